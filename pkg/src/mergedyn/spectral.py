"""Perron-Frobenius data, the maximal-entropy chain and Boltzmann identities."""
from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import NoConvergence, Periodic, Reducible, ZeroRow
from .merge_graph import period, strongly_connected_components

log = logging.getLogger(__name__)

FLUSH = 1e-300


def as_csr(k) -> sparse.csr_matrix:
    m = sparse.csr_matrix(k, dtype=float)
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass
class PFResult:
    lam: float
    eta: np.ndarray
    psi: np.ndarray
    mode: str
    residual_right: float
    residual_left: float
    iterations: int

    def normalized(self, mode: str) -> "PFResult":
        eta, psi = _normalize(self.eta, self.psi, mode)
        return PFResult(self.lam, eta, psi, mode, self.residual_right, self.residual_left, self.iterations)


def _normalize(eta, psi, mode):
    if mode == "unit":
        return eta / np.linalg.norm(eta), psi / np.linalg.norm(psi)
    if mode == "pairing":
        eta = eta / np.linalg.norm(eta)
        return eta, psi / float(psi @ eta)
    raise ValueError(f"unknown normalization {mode!r}")


def _power(k: sparse.csr_matrix, tol: float, max_iter: int, relative: bool = False):
    v = np.ones(k.shape[0])
    for it in range(1, max_iter + 1):
        w = k @ v
        lam = w.max()
        if lam <= 0:
            raise Reducible("matrix annihilates the positive vector")
        w /= lam
        small = (w > 0) & (w < FLUSH)
        if small.any():
            log.warning("flushing %d entries below %g", int(small.sum()), FLUSH)
            w[small] = 0.0
        gap = np.abs(w - v)
        if relative:
            gap = gap / np.where(w > 0, w, 1.0)
        if np.max(gap) < tol:
            return lam, w, it
        v = w
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


def check_primitive(k) -> None:
    k = as_csr(k)
    if strongly_connected_components(k).count != 1:
        raise Reducible("matrix is not irreducible")
    p = period(k)
    if p != 1:
        raise Periodic(f"matrix has period {p}")


def perron_frobenius(k, tol: float = 1e-12, max_iter: int = 10**6, mode: str = "unit",
                     check: bool = True, relative: bool = False) -> PFResult:
    """Leading eigenvalue with right (eta) and left (psi) eigenvectors.

    With ``relative`` the stopping rule is entrywise relative, which keeps
    entries many orders of magnitude below the maximum accurate.
    """
    k = as_csr(k)
    if check:
        check_primitive(k)
    lam_r, eta, it_r = _power(k, tol, max_iter, relative)
    lam_l, psi, it_l = _power(k.T.tocsr(), tol, max_iter, relative)
    if abs(lam_r - lam_l) > max(tol, 1e-9) * max(1.0, lam_r):
        raise NoConvergence(f"left/right eigenvalues disagree: {lam_r} vs {lam_l}")
    lam = lam_r
    eta, psi = _normalize(eta, psi, mode)
    res_r = float(np.max(np.abs(k @ eta - lam * eta)))
    res_l = float(np.max(np.abs(k.T @ psi - lam * psi)))
    return PFResult(float(lam), eta, psi, mode, res_r, res_l, max(it_r, it_l))


@dataclass
class MarkovChain:
    P: sparse.csr_matrix
    provenance: str
    pf: PFResult | None = None
    row_defect: float = 0.0

    def __post_init__(self):
        rows = np.asarray(self.P.sum(axis=1)).ravel()
        if np.max(np.abs(rows - 1.0)) > 1e-12:
            raise ValueError("rows do not sum to one")

    @property
    def size(self) -> int:
        return self.P.shape[0]


def _row_normalize(p: sparse.csr_matrix):
    rows = np.asarray(p.sum(axis=1)).ravel()
    defect = float(np.max(np.abs(rows - 1.0)))
    p = sparse.diags(1.0 / rows) @ p
    return p.tocsr(), defect


def to_markov(k, pf: PFResult, provenance: str = "HAMC") -> MarkovChain:
    """Conjugate K by its right eigenvector: P(x,y) = K(x,y) eta(y) / (lam eta(x))."""
    k = as_csr(k)
    p = sparse.diags(1.0 / (pf.lam * pf.eta)) @ k @ sparse.diags(pf.eta)
    p, defect = _row_normalize(p.tocsr())
    return MarkovChain(p, provenance, pf, defect)


def to_random_walk(k) -> MarkovChain:
    k = as_csr(k)
    deg = np.asarray(k.sum(axis=1)).ravel()
    if np.any(deg == 0):
        raise ZeroRow(f"rows with no out-edges: {np.flatnonzero(deg == 0).tolist()}")
    p, defect = _row_normalize(k)
    return MarkovChain(p, "random-walk", None, defect)


def stationary(chain: MarkovChain, tol: float = 1e-13) -> np.ndarray:
    pf = perron_frobenius(chain.P, tol=tol)
    pi = pf.psi / pf.psi.sum()
    if chain.pf is not None:
        closed = chain.pf.psi * chain.pf.eta
        closed = closed / closed.sum()
        gap = float(np.max(np.abs(closed - pi)))
        if gap > 1e-9:
            raise AssertionError(f"closed-form stationary disagrees by {gap}")
        return closed
    return pi


def stationarity_defect(chain: MarkovChain, pi: np.ndarray, steps: int = 64) -> float:
    v = pi.copy()
    pt = chain.P.T.tocsr()
    for _ in range(steps):
        v = pt @ v
    return float(np.abs(v - pi).sum())


def entropy_rate(chain: MarkovChain, pi: np.ndarray) -> float:
    p = chain.P.tocoo()
    vals = p.data
    terms = pi[p.row] * vals * np.log(np.where(vals > 0, vals, 1.0))
    return -math.fsum(terms.tolist())


def shannon(dist) -> float:
    d = np.asarray(dist, dtype=float)
    d = d[d > 0]
    return -math.fsum((d * np.log(d)).tolist())


def path_probability_table(chain: MarkovChain, pf: PFResult, ell: int) -> dict:
    """Compare the law of stationary length-ell paths with psi(s) eta(t) / lam^ell.

    Multiplicities of K enter as a product along the path; for a 0/1
    matrix that product is 1, so paths with equal endpoints tie exactly.
    """
    if chain.pf is None:
        raise ValueError("path table needs a chain built from PF data")
    pf = pf.normalized("pairing")
    pi = pf.psi * pf.eta
    p = chain.P.tocsr()
    count = 0
    worst = 0.0
    total = 0.0
    by_ends: dict = {}

    def walk(path, prob, mult):
        nonlocal count, worst, total
        if len(path) == ell + 1:
            s, t = path[0], path[-1]
            expected = pf.psi[s] * pf.eta[t] * mult / pf.lam ** ell
            worst = max(worst, abs(prob - expected))
            by_ends.setdefault((s, t, round(mult, 9)), []).append(prob)
            count += 1
            total += prob
            return
        u = path[-1]
        for idx in range(p.indptr[u], p.indptr[u + 1]):
            v = int(p.indices[idx])
            walk(path + [v], prob * p.data[idx], mult * _k_entry(chain, u, v))

    for s in range(p.shape[0]):
        walk([s], pi[s], 1.0)
    spread = max((max(v) - min(v) for v in by_ends.values()), default=0.0)
    return {"ell": ell, "paths": count, "max_deviation": worst,
            "max_spread_same_endpoints": spread, "total_mass": total}


def _k_entry(chain: MarkovChain, a: int, b: int) -> float:
    """Recover K(a,b) from P = K eta(b) / (lam eta(a))."""
    pf = chain.pf
    return chain.P[a, b] * pf.lam * pf.eta[a] / pf.eta[b]


def random_same_support(chain: MarkovChain, rng: np.random.Generator, spread: float = 0.5) -> MarkovChain:
    """Perturb every row of a chain while keeping its support."""
    p = chain.P.tocsr().copy()
    p.data = p.data * np.exp(rng.uniform(-spread, spread, size=p.data.shape))
    p, _ = _row_normalize(p)
    return MarkovChain(p, "random-perturbation")


# ---------------------------------------------------------------- Boltzmann

def edge_values(k, omega) -> np.ndarray:
    """Weights aligned with the CSR data of ``as_csr(k)``."""
    k = as_csr(k)
    rows = np.repeat(np.arange(k.shape[0]), np.diff(k.indptr))
    if isinstance(omega, Mapping):
        return np.array([omega[(int(r), int(c))] for r, c in zip(rows, k.indices)], dtype=float)
    if callable(omega):
        return np.array([omega(int(r), int(c)) for r, c in zip(rows, k.indices)], dtype=float)
    if sparse.issparse(omega):
        omega = omega.tocsr()
        return np.asarray(omega[rows, k.indices]).ravel().astype(float)
    return np.asarray(omega, dtype=float)[rows, k.indices]


def weighted_by_energy(k, omega, beta: float) -> sparse.csr_matrix:
    k = as_csr(k)
    w = k.copy()
    w.data = k.data * np.exp(-beta * edge_values(k, omega))
    return w


@dataclass
class BoltzmannResult:
    rows: np.ndarray
    cols: np.ndarray
    prob: np.ndarray
    energy: np.ndarray
    Z: float
    pf: PFResult
    extra: dict = field(default_factory=dict)


def boltzmann_edges(k, omega, beta: float, tol: float = 1e-13) -> BoltzmannResult:
    """Edge law psi(s) eta(t) K e^{-beta omega} / Z under the pairing normalization."""
    k = as_csr(k)
    energy = edge_values(k, omega)
    w = k.copy()
    w.data = k.data * np.exp(-beta * energy)
    pf = perron_frobenius(w, tol=tol, mode="pairing")
    rows = np.repeat(np.arange(k.shape[0]), np.diff(k.indptr))
    cols = k.indices.copy()
    mass = pf.psi[rows] * w.data * pf.eta[cols]
    z = math.fsum(mass.tolist())
    return BoltzmannResult(rows, cols, mass / z, energy, z, pf)


def free_energy_report(k, omega, beta: float = 1.0, dbeta: float = 1e-4,
                       lengths=(1, 2, 4, 8, 16, 64, 256, 1024)) -> dict:
    """Check the Boltzmann free-energy identities at one inverse temperature."""
    b = boltzmann_edges(k, omega, beta)
    lam = b.pf.lam
    ebar = math.fsum((b.prob * b.energy).tolist())
    sh_p = shannon(b.prob)
    pi = b.pf.psi * b.pf.eta
    sh_pi = shannon(pi)
    ln_z = math.log(b.Z)
    lam_hi = perron_frobenius(weighted_by_energy(k, omega, beta + dbeta), tol=1e-14, check=False).lam
    lam_lo = perron_frobenius(weighted_by_energy(k, omega, beta - dbeta), tol=1e-14, check=False).lam
    dlnz = (math.log(lam_hi) - math.log(lam_lo)) / (2 * dbeta)
    free = ebar - sh_p / beta
    closed = -(sh_pi + ln_z) / beta
    chain = to_markov(weighted_by_energy(k, omega, beta), b.pf, provenance=f"weighted-HAMC beta={beta}")
    h = entropy_rate(chain, pi / pi.sum())
    per_length = {ell: ebar - (sh_pi / ell + h) / beta for ell in lengths}
    limit = ebar - h / beta
    report = {
        "beta": beta,
        "lambda": lam,
        "Z": b.Z,
        "z_lambda_rel": abs(b.Z - lam) / lam,
        "energy_mean": ebar,
        "dlnZ_dbeta": dlnz,
        "opt1_residual": abs(ebar + dlnz),
        "opt2_residual": abs(sh_p - (ln_z - beta * dlnz + sh_pi)),
        "opt3_residual": abs(free - closed),
        "free_energy": free,
        "shannon_edges": sh_p,
        "shannon_pi": sh_pi,
        "per_length": per_length,
        "per_length_limit_residual": abs(limit + math.log(lam) / beta),
    }
    report["pass"] = {
        "z_lambda": report["z_lambda_rel"] <= 1e-9,
        "opt1": report["opt1_residual"] <= 1e-4,
        "opt3": report["opt3_residual"] <= 1e-8,
        "per_length": report["per_length_limit_residual"] <= 1e-8,
    }
    return report


def closed_class_stationaries(k) -> list:
    """Stationary laws of the maximal-entropy chain on each closed class.

    Used for reducible restricted dynamics, where mass ends up on the
    closed communication classes.  Returns (members, distribution) pairs.
    """
    k = as_csr(k)
    cond = strongly_connected_components(k)
    out = []
    for members in cond.closed_classes():
        sub = k[members][:, members]
        if sub.nnz == 0:
            out.append((members, np.full(len(members), 1.0 / len(members))))
            continue
        pf = perron_frobenius(sub, mode="pairing")
        pi = pf.psi * pf.eta
        out.append((members, pi / pi.sum()))
    return out
