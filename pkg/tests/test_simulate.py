import numpy as np
import pytest
from scipy import sparse

from mergedyn.errors import DimensionMismatch
from mergedyn.spectral import MarkovChain, perron_frobenius, stationary, to_markov
from mergedyn.simulate import frequency_csv, run_chain, run_chain_cdf, run_replicas, tv_distance


@pytest.fixture(scope="module")
def hamc4(g4):
    chain = to_markov(g4.K, perron_frobenius(g4.K))
    return chain, stationary(chain)


def cycle2():
    return MarkovChain(sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])), "cycle")


@pytest.mark.parametrize("runner", [run_chain, run_chain_cdf])
def test_deterministic_two_cycle(runner):
    t = runner(cycle2(), start=0, steps=1, seed=5)
    assert t.last == 1 and t.counts.tolist() == [0, 1]
    t = runner(cycle2(), start=0, steps=10, seed=5, burn_in=3)
    assert t.counts.sum() == 10 and t.counts.tolist() == [5, 5]


def test_same_seed_same_trajectory(hamc4):
    chain, _ = hamc4
    a = run_chain(chain, 0, 20_000, seed=9)
    b = run_chain(chain, 0, 20_000, seed=9)
    c = run_chain(chain, 0, 20_000, seed=10)
    assert np.array_equal(a.counts, b.counts) and a.last == b.last
    assert not np.array_equal(a.counts, c.counts)
    assert a.counts.sum() == 20_000
    assert a.empirical.sum() == pytest.approx(1.0, abs=1e-12)


def test_long_run_tv(hamc4):
    chain, pi = hamc4
    t = run_chain(chain, 0, 10**6, seed=42, burn_in=1000)
    assert tv_distance(t.empirical, pi) <= 0.01


def test_cdf_sampler_agrees(hamc4):
    chain, pi = hamc4
    t = run_chain_cdf(chain, 0, 200_000, seed=1)
    assert tv_distance(t.empirical, pi) <= 0.02


def test_start_independence(hamc4):
    chain, _ = hamc4
    a = run_chain(chain, 0, 10**6, seed=3)
    b = run_chain(chain, chain.size - 1, 10**6, seed=4)
    assert tv_distance(a.empirical, b.empirical) <= 0.02


def test_replicas_reproducible_across_workers(hamc4):
    chain, pi = hamc4
    one = run_replicas(chain, 0, 100_000, seed=7, replicas=4, workers=1)
    many = run_replicas(chain, 0, 100_000, seed=7, replicas=4, workers=4)
    assert np.array_equal(one.counts, many.counts)
    assert one.counts.sum() == 100_000
    assert tv_distance(one.empirical, pi) <= 0.02


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_chain(cycle2(), 0, 0, seed=1)
    with pytest.raises(ValueError):
        run_chain(cycle2(), 2, 5, seed=1)


def test_tv_distance():
    d = np.array([0.1, 0.2, 0.7])
    assert tv_distance(d, d) == 0
    assert tv_distance([1, 0], [0, 1]) == 1
    # 0.5 * (0.2767 + 0.0609 + 0.1283 + 0.2094)
    assert tv_distance([0.25] * 4, [0.5267, 0.3109, 0.1217, 0.0406]) == pytest.approx(0.33765, abs=1e-12)
    with pytest.raises(DimensionMismatch):
        tv_distance([1.0], [0.5, 0.5])


def test_frequency_csv():
    t = run_chain(cycle2(), 0, 4, seed=0)
    text = frequency_csv(t, [0.5, 0.5], names=["x", "y"])
    assert text.splitlines() == [
        "vertex,frequency,exact,abs_error",
        "x,0.50000000,0.50000000,0.00000000",
        "y,0.50000000,0.50000000,0.00000000",
    ]
