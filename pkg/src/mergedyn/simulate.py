"""Seeded Monte-Carlo runs of a Markov chain and total-variation checks."""
from __future__ import annotations

import csv
import io
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .spectral import MarkovChain

CHUNK = 1 << 16


@dataclass
class Trajectory:
    seed: int
    start: int
    steps: int
    burn_in: int
    counts: np.ndarray
    last: int

    @property
    def empirical(self) -> np.ndarray:
        return self.counts / self.counts.sum()


def _stream(seed: int, chain_id: str, replica: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, chain id, replica)."""
    key = zlib.crc32(chain_id.encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, key, replica])))


def _cumulative(chain: MarkovChain):
    p = chain.P.tocsr()
    p.sort_indices()
    cum = np.cumsum(p.data)
    starts = p.indptr[:-1]
    ends = p.indptr[1:]
    # cumulative mass reached before each row
    offset = np.concatenate(([0.0], cum))[starts]
    return p.indices, cum, offset, starts, ends


def run_chain_cdf(chain: MarkovChain, start: int, steps: int, seed: int, burn_in: int = 0,
                  replica: int = 0, chain_id: str = "") -> Trajectory:
    """Reference sampler for ``run_chain`` by inverse CDF.

    Each step draws one uniform and locates it in the row's cumulative
    weights with a global binary search, so the cost per step is
    logarithmic in the number of edges and the loop runs in numpy chunks.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    m = chain.size
    if not 0 <= start < m:
        raise ValueError(f"start {start} outside 0..{m - 1}")
    cols, cum, offset, starts, ends = _cumulative(chain)
    rng = _stream(seed, chain_id, replica)
    counts = np.zeros(m, dtype=np.int64)
    state = start
    total = burn_in + steps
    done = 0
    while done < total:
        block = min(CHUNK, total - done)
        u = rng.random(block)
        path = np.empty(block, dtype=np.int64)
        s = state
        for k in range(block):
            row_mass = cum[ends[s] - 1] - offset[s]
            idx = int(np.searchsorted(cum, offset[s] + u[k] * row_mass, side="right"))
            if idx >= ends[s]:
                idx = ends[s] - 1
            s = int(cols[idx])
            path[k] = s
        state = s
        lo = max(0, burn_in - done)
        if lo < block:
            counts += np.bincount(path[lo:], minlength=m)
        done += block
    return Trajectory(seed, start, steps, burn_in, counts, state)


def _alias_tables(chain: MarkovChain):
    """Walker alias tables padded to the widest row."""
    p = chain.P.tocsr()
    m = p.shape[0]
    width = int(np.diff(p.indptr).max())
    prob = np.ones((m, width))
    alias = np.zeros((m, width), dtype=np.int64)
    target = np.zeros((m, width), dtype=np.int64)
    deg = np.diff(p.indptr)
    for r in range(m):
        lo, hi = p.indptr[r], p.indptr[r + 1]
        w = p.data[lo:hi] * (hi - lo)
        target[r, : hi - lo] = p.indices[lo:hi]
        small = [i for i, x in enumerate(w) if x < 1.0]
        large = [i for i, x in enumerate(w) if x >= 1.0]
        w = list(w)
        while small and large:
            s, g = small.pop(), large.pop()
            prob[r, s] = w[s]
            alias[r, s] = g
            w[g] -= 1.0 - w[s]
            (small if w[g] < 1.0 else large).append(g)
        for i in small + large:
            prob[r, i] = 1.0
            alias[r, i] = i
    return prob, alias, target, deg


def run_chain(chain: MarkovChain, start: int, steps: int, seed: int, burn_in: int = 0,
              replica: int = 0, chain_id: str = "") -> Trajectory:
    """Walk ``steps`` counted transitions after ``burn_in`` discarded ones.

    Transitions use Walker alias tables, one uniform for the slot and one
    for the coin, so each step is O(1).
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    m = chain.size
    if not 0 <= start < m:
        raise ValueError(f"start {start} outside 0..{m - 1}")
    prob, alias, target, deg = _alias_tables(chain)
    rng = _stream(seed, chain_id, replica)
    counts = np.zeros(m, dtype=np.int64)
    state = start
    total = burn_in + steps
    done = 0
    while done < total:
        block = min(CHUNK, total - done)
        u = rng.random(block)
        v = rng.random(block)
        path = np.empty(block, dtype=np.int64)
        s = state
        for k in range(block):
            d = deg[s]
            slot = int(u[k] * d)
            if v[k] >= prob[s, slot]:
                slot = alias[s, slot]
            s = int(target[s, slot])
            path[k] = s
        state = s
        lo = max(0, burn_in - done)
        if lo < block:
            counts += np.bincount(path[lo:], minlength=m)
        done += block
    return Trajectory(seed, start, steps, burn_in, counts, state)


def run_replicas(chain: MarkovChain, start: int, steps: int, seed: int, replicas: int = 1,
                 burn_in: int = 0, workers: int = 1, chain_id: str = "") -> Trajectory:
    """Independent replicas with merged counts; identical for any worker count."""
    per = [steps // replicas + (1 if r < steps % replicas else 0) for r in range(replicas)]

    def one(r):
        return run_chain(chain, start, per[r], seed, burn_in, replica=r, chain_id=chain_id)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            runs = list(ex.map(one, range(replicas)))
    else:
        runs = [one(r) for r in range(replicas)]
    counts = sum((t.counts for t in runs), start=np.zeros(chain.size, dtype=np.int64))
    return Trajectory(seed, start, steps, burn_in, counts, runs[-1].last)


def tv_distance(d1, d2) -> float:
    a = np.asarray(d1, dtype=float)
    b = np.asarray(d2, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return 0.5 * float(np.abs(a - b).sum())


def frequency_csv(traj: Trajectory, exact, names=None) -> str:
    emp = traj.empirical
    exact = np.asarray(exact, dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vertex", "frequency", "exact", "abs_error"])
    for i in range(len(emp)):
        name = names[i] if names is not None else i
        w.writerow([name, f"{emp[i]:.8f}", f"{exact[i]:.8f}", f"{abs(emp[i] - exact[i]):.8f}"])
    return buf.getvalue()
