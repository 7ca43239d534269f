import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctmc_occupation.chain_algebra import GeneratorMatrix, chain_invariants, random_irreducible_generator
from ctmc_occupation.errors import HorizonTooLong, OutOfHorizon, ZeroExitRate
from ctmc_occupation.path_sim import (
    CtmcPath,
    ScalingParams,
    compensator,
    dynkin_martingale,
    fluctuation_process,
    indicator,
    occupation_measure,
    pathwise_residuals,
    simulate_path,
)
from ctmc_occupation.rng import derive_seed

from oracles import summed_occupation

UNIT = ScalingParams(1, 1.0)


def test_scaling_params():
    sc = ScalingParams(100, 1.0)
    assert sc.speed == 100.0 and sc.root_speed == 10.0
    with pytest.raises(ValueError):
        ScalingParams(0)
    with pytest.raises(ValueError):
        ScalingParams(2, -1.0)


def test_path_rejects_bad_data():
    with pytest.raises(ValueError):
        CtmcPath(0, [0.5, 0.4], [1, 0], 1.0, 2)
    with pytest.raises(ValueError):
        CtmcPath(0, [0.5], [0], 1.0, 2)
    with pytest.raises(ValueError):
        CtmcPath(0, [1.5], [1], 1.0, 2)
    with pytest.raises(ValueError):
        CtmcPath(0, [0.5], [2], 1.0, 2)


def test_hand_path_functionals(sym, one_jump_path):
    p = one_jump_path
    assert np.allclose(occupation_measure(p, 1.0), [0.4, 0.6])
    assert np.array_equal(occupation_measure(p, 0.0), [0.0, 0.0])
    assert np.array_equal(indicator(p, 0.4), [0.0, 1.0])
    assert np.array_equal(indicator(p, 0.3999), [1.0, 0.0])
    assert np.allclose(dynkin_martingale(p, sym, UNIT, 1.0), [-1.2, 1.2])
    assert np.allclose(dynkin_martingale(p, sym, UNIT, 0.0), [0.0, 0.0])
    assert np.allclose(compensator(p, sym, UNIT, 1.0), [[1, -1], [-1, 1]])
    assert np.allclose(fluctuation_process(p, [0.5, 0.5], UNIT, 1.0), [-0.1, 0.1])
    assert np.allclose(fluctuation_process(p, [0.5, 0.5], UNIT, 0.0), [0.0, 0.0])


def test_compensator_single_segment(asym):
    p = CtmcPath(1, [], [], 0.7, 2)
    sc = ScalingParams(3, 1.0)
    q = asym * 3
    e = np.array([0.0, 1.0])
    expected = 0.7 * (np.diag(q.T @ e) - q.T @ np.diag(e) - np.diag(e) @ q)
    assert np.allclose(compensator(p, asym, sc, 0.7), expected, atol=1e-14)


def test_out_of_horizon(one_jump_path, sym):
    for f in (lambda t: occupation_measure(one_jump_path, t),
              lambda t: dynkin_martingale(one_jump_path, sym, UNIT, t),
              lambda t: compensator(one_jump_path, sym, UNIT, t),
              lambda t: fluctuation_process(one_jump_path, [0.5, 0.5], UNIT, t)):
        with pytest.raises(OutOfHorizon):
            f(1.1)
        with pytest.raises(OutOfHorizon):
            f(-0.1)


def test_batch_queries_match_scalar(asym):
    p = simulate_path(asym, ScalingParams(20), 1.0, seed=3)
    ts = np.linspace(0, 1, 17)
    L = occupation_measure(p, ts)
    for t, row in zip(ts, L):
        assert np.allclose(row, summed_occupation(p, t), atol=1e-13)
    C = compensator(p, asym, ScalingParams(20), ts)
    assert C.shape == (17, 2, 2)
    assert np.allclose(C[5], compensator(p, asym, ScalingParams(20), ts[5]))


def test_reproducible_and_seed_sensitive(asym):
    a = simulate_path(asym, ScalingParams(50), 1.0, seed=11)
    b = simulate_path(asym, ScalingParams(50), 1.0, seed=11)
    c = simulate_path(asym, ScalingParams(50), 1.0, seed=12)
    assert a.initial_state == b.initial_state
    assert a.jump_times.tobytes() == b.jump_times.tobytes()
    assert a.post_jump_states.tobytes() == b.post_jump_states.tobytes()
    assert a.jump_times.tobytes() != c.jump_times.tobytes()


def test_fixed_and_vector_init(asym):
    assert simulate_path(asym, UNIT, 1.0, init=1, seed=0).initial_state == 1
    assert simulate_path(asym, UNIT, 1.0, init=[0.0, 1.0], seed=0).initial_state == 1


def test_guards(sym):
    with pytest.raises(HorizonTooLong):
        simulate_path(sym, ScalingParams(10**6), 1.0, max_expected_jumps=1e5)
    with pytest.raises(ZeroExitRate):
        simulate_path(GeneratorMatrix(np.zeros((2, 2))), UNIT, 1.0, init=0)


@pytest.mark.parametrize("n, expected", [(1, 1.0), (100, 100.0)])
def test_mean_jump_count(sym, n, expected):
    R = 10000 if n == 1 else 2000
    counts = np.array([simulate_path(sym, ScalingParams(n), 1.0, seed=derive_seed(5, r)).n_jumps
                       for r in range(R)])
    se = counts.std(ddof=1) / np.sqrt(R)
    assert abs(counts.mean() - expected) <= 3 * se


def test_embedded_chain_frequencies():
    q = np.array([[-3.0, 1.0, 2.0], [1.0, -1.0, 0.0], [0.5, 0.5, -1.0]])
    p = simulate_path(q, ScalingParams(20000), 1.0, init=0, seed=1)
    from_0 = p.post_jump_states[p.states[:-1] == 0]
    frac = np.mean(from_0 == 2)
    se = np.sqrt(2 / 3 * 1 / 3 / from_0.size)
    assert abs(frac - 2 / 3) <= 4 * se


def test_stationary_holding_fraction(asym):
    # time-average occupation of a long path approaches pi
    p = simulate_path(asym, ScalingParams(20000), 1.0, seed=2)
    assert np.allclose(occupation_measure(p, 1.0), [2 / 3, 1 / 3], atol=0.01)


@given(d=st.integers(2, 6), seed=st.integers(0, 2**32 - 1), n=st.integers(1, 200))
@settings(max_examples=50, deadline=None)
def test_pathwise_invariants(d, seed, n):
    Q = random_irreducible_generator(d, seed)
    inv = chain_invariants(Q)
    sc = ScalingParams(n)
    p = simulate_path(Q, sc, 1.0, init="stationary", seed=seed)
    assert (np.diff(p.jump_times) > 0).all()
    assert (p.states[1:] != p.states[:-1]).all()
    ts = np.concatenate([np.linspace(0, 1, 11), p.jump_times[:20]])
    res = pathwise_residuals(p, Q, sc, inv.pi, inv.F, ts)
    assert res["FtQtK"] <= 1e-12 * max(1.0, np.abs(inv.F).max() * np.abs(Q.matrix).max())
    assert res["sum_K"] == 0.0
    assert res["sum_L"] <= 1e-12
    assert res["sum_Y"] <= 1e-12 * max(1.0, sc.speed * np.abs(Q.matrix).max())
    assert res["sum_G"] <= 1e-12 * max(1.0, sc.root_speed)
    C = compensator(p, Q, sc, ts)
    assert np.allclose(C, C.transpose(0, 2, 1), atol=1e-12 * max(1.0, np.abs(C).max()))
    assert np.abs(C.sum(axis=2)).max() <= 1e-10 * max(1.0, np.abs(C).max())
    eig = np.linalg.eigvalsh(C)
    assert eig.min() >= -1e-10 * max(1.0, eig.max())


def test_fluctuation_equals_integrated_drift(asym):
    inv = chain_invariants(asym)
    sc = ScalingParams(40)
    p = simulate_path(asym, sc, 1.0, seed=9)
    t = 0.77
    G = fluctuation_process(p, inv.pi, sc, t)
    drift = -sc.root_speed * inv.F.T @ asym.T @ occupation_measure(p, t)
    assert np.allclose(G, drift, atol=1e-12)
