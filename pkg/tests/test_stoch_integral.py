import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctmc_occupation.bv_toolkit import sup_abs, total_variation
from ctmc_occupation.chain_algebra import chain_invariants, random_irreducible_generator
from ctmc_occupation.errors import DomainMismatch, NotPSD
from ctmc_occupation.path_sim import CtmcPath, ScalingParams, dynkin_martingale, simulate_path
from ctmc_occupation.rng import derive_seed
from ctmc_occupation.stoch_integral import (
    OccupationIntegrand,
    PiecewiseFunction,
    integrate_state_density,
    integrate_wrt_dynkin,
    integrate_wrt_indicator,
    integrate_wrt_occupation,
    integrate_wrt_state_indicator,
    limit_integral_covariance,
    scaled_variation_condition,
)

from oracles import dynkin_integral_by_parts, riemann_occupation_integral

UNIT = ScalingParams(1, 1.0)
HALF = [0.5, 0.5]
SIGMA_X_SYM = 0.25 * np.array([[1.0, -1.0], [-1.0, 1.0]])
H1 = PiecewiseFunction.constant([1.0, -1.0], 1.0)
H2 = PiecewiseFunction.affine([0.0, 0.0], [1.0, -1.0], 1.0)


def random_piecewise(rng, k, m, horizon=1.0):
    pieces = int(rng.integers(1, 5))
    inner = np.sort(rng.uniform(0, horizon, pieces - 1))
    breaks = np.concatenate(([0.0], inner, [horizon]))
    return PiecewiseFunction(breaks, rng.normal(size=(pieces, k, m)), rng.normal(size=(pieces, k, m)))


def test_evaluation_conventions():
    H = PiecewiseFunction([0, 0.5, 1], [[[1.0]], [[3.0]]], [[[0.0]], [[0.0]]])
    assert H(0.5)[0, 0] == 3.0
    assert H.left_limit(0.5)[0, 0] == 1.0
    assert H.left_limit(0.0)[0, 0] == H(0.0)[0, 0]
    assert H(1.0)[0, 0] == 3.0
    with pytest.raises(DomainMismatch):
        H(1.5)


def test_spec_round_trip():
    spec = {"breakpoints": [0, 0.3, 1], "segments": [{"A": [[1, 2]]}, {"A": [[0, 1]], "B": [[2, -1]]}]}
    H = PiecewiseFunction.from_spec(spec)
    assert H.shape == (1, 2)
    H2_ = PiecewiseFunction.from_spec(H.to_spec())
    assert np.array_equal(H.A, H2_.A) and np.array_equal(H.B, H2_.B)
    with pytest.raises(ValueError):
        PiecewiseFunction.from_spec({"breakpoints": [0, 1], "segments": [{"A": [[1]], "C": [[1]]}]})
    with pytest.raises(ValueError):
        PiecewiseFunction([0.1, 1], [[[1.0]]], [[[0.0]]])


def test_occupation_integral_examples(one_jump_path):
    assert np.allclose(integrate_wrt_occupation(H1, one_jump_path, HALF, UNIT).value, [-0.2])
    assert np.allclose(integrate_wrt_occupation(H2, one_jump_path, HALF, UNIT).value, [-0.34])
    zero = PiecewiseFunction.constant([0.0, 0.0], 1.0)
    assert integrate_wrt_occupation(zero, one_jump_path, HALF, UNIT).value == [0.0]


def test_occupation_integral_matches_riemann_sum(asym):
    inv = chain_invariants(asym)
    sc = ScalingParams(10)
    p = simulate_path(asym, sc, 1.0, seed=4)
    H = PiecewiseFunction([0, 0.35, 1], [[[1.0, 2.0]], [[-1.0, 0.5]]], [[[3.0, -1.0]], [[0.5, 2.0]]])
    exact = integrate_wrt_occupation(H, p, inv.pi, sc).value
    approx = riemann_occupation_integral(H, p, inv.pi, sc, step=1e-6)
    assert np.allclose(exact, approx, atol=1e-5)


def test_indicator_integral_examples(one_jump_path, two_jump_path):
    H = PiecewiseFunction.affine(0.0, 1.0, 1.0)
    assert integrate_wrt_indicator(H, one_jump_path, 1).value[0] == pytest.approx(0.4)
    res = integrate_wrt_indicator(H, two_jump_path, 1)
    assert res.value[0] == pytest.approx(-0.4) and res.n_jumps == 2
    bound = total_variation(H.entry(0, 0)) + sup_abs(H.entry(0, 0))
    assert abs(res.value[0]) <= bound == 2.0
    stay = CtmcPath(0, [], [], 1.0, 2)
    assert integrate_wrt_indicator(H, stay, 1).value[0] == 0.0


def test_dynkin_identity_integrand(asym):
    sc = ScalingParams(25)
    p = simulate_path(asym, sc, 1.0, seed=1)
    I = PiecewiseFunction.constant(np.eye(2), 1.0)
    got = integrate_wrt_dynkin(I, p, asym, sc).value
    assert np.allclose(got, dynkin_martingale(p, asym, sc, 1.0) / sc.root_speed, atol=1e-12)
    zero = PiecewiseFunction.constant(np.zeros((3, 2)), 1.0)
    assert np.array_equal(integrate_wrt_dynkin(zero, p, asym, sc).value, np.zeros(3))


def test_dynkin_integral_by_parts_oracle(sym, one_jump_path):
    p = one_jump_path
    exact = integrate_wrt_dynkin(H2, p, sym, UNIT).value
    assert np.allclose(exact, dynkin_integral_by_parts(H2, p, sym, UNIT), atol=1e-12)


def test_domain_mismatch(one_jump_path):
    short = PiecewiseFunction.constant([1.0, -1.0], 0.5)
    with pytest.raises(DomainMismatch):
        integrate_wrt_occupation(short, one_jump_path, HALF, UNIT)
    with pytest.raises(DomainMismatch):
        integrate_wrt_indicator(short, one_jump_path, 1)
    with pytest.raises(DomainMismatch):
        limit_integral_covariance(short, SIGMA_X_SYM, T=1.0)


def test_limit_covariance_examples():
    stacked = PiecewiseFunction.stack([H1, H2])
    cov = limit_integral_covariance(stacked, SIGMA_X_SYM)
    assert np.allclose(cov, [[1.0, 0.5], [0.5, 1 / 3]], atol=1e-14)
    zero = PiecewiseFunction.constant([0.0, 0.0], 1.0)
    assert np.array_equal(limit_integral_covariance(zero, SIGMA_X_SYM), [[0.0]])
    with pytest.raises(NotPSD):
        limit_integral_covariance(H1, -np.eye(2))


def test_limit_covariance_against_quadrature():
    rng = np.random.default_rng(0)
    H = random_piecewise(rng, 3, 2)
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    nodes, weights = np.polynomial.legendre.leggauss(4)
    ref = np.zeros((3, 3))
    for u, v in zip(H.breakpoints[:-1], H.breakpoints[1:]):
        s = (u + v) / 2 + (v - u) / 2 * nodes
        vals = H(s)
        ref += (v - u) / 2 * np.einsum("t,tkm,mn,tjn->kj", weights, vals, S, vals)
    assert np.allclose(limit_integral_covariance(H, S), ref, atol=1e-12)


def test_variation_certificate():
    t = PiecewiseFunction.affine(0.0, 1.0, 1.0)
    cert = scaled_variation_condition(t, ScalingParams(100))
    assert cert.max_scaled == pytest.approx(0.1) and cert.holds(0.1)
    assert scaled_variation_condition(H1, ScalingParams(7)).max_scaled == 0.0
    tent = PiecewiseFunction([0, 0.5, 1], [[[0.0]], [[1.75]]], [[[2.0]], [[-1.5]]])
    assert scaled_variation_condition(tent, UNIT).max_scaled == pytest.approx(1.75)


def test_occupation_integrand_realization(sym, one_jump_path):
    H = OccupationIntegrand([[1.0, 0.0]], [[[2.0, 0.0]], [[0.0, 1.0]]])
    Hp = H.realize(one_jump_path)
    for t in (0.0, 0.2, 0.4, 0.7, 1.0):
        L = [min(t, 0.4), max(0.0, t - 0.4)]
        expected = np.array([[1.0, 0.0]]) + L[0] * np.array([[2.0, 0.0]]) + L[1] * np.array([[0.0, 1.0]])
        assert np.allclose(Hp(t), expected, atol=1e-14)
    assert np.allclose(H.limit(HALF, 1.0)(1.0), [[2.0, 0.5]])
    at_horizon = CtmcPath(0, [1.0], [1], 1.0, 2)
    assert H.realize(at_horizon).horizon == 1.0


@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    Q = random_irreducible_generator(3, seed)
    inv = chain_invariants(Q)
    sc = ScalingParams(int(rng.integers(1, 50)))
    p = simulate_path(Q, sc, 1.0, seed=seed)
    F1, F2 = random_piecewise(rng, 2, 3), random_piecewise(rng, 2, 3)
    combo = F1 * a + F2 * b
    for f in (lambda H: integrate_wrt_occupation(H, p, inv.pi, sc).value,
              lambda H: integrate_wrt_dynkin(H, p, Q, sc).value,
              lambda H: integrate_wrt_state_indicator(H, p, 1.0).value):
        lhs, rhs = f(combo), a * f(F1) + b * f(F2)
        assert np.allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(rhs).max()))


def _pair(r):
    rng = np.random.default_rng(derive_seed(99, r))
    d = int(rng.integers(2, 6))
    Q = random_irreducible_generator(d, derive_seed(98, r))
    sc = ScalingParams(int(rng.integers(1, 100)), float(rng.uniform(0.5, 1.5)))
    return Q, sc, simulate_path(Q, sc, 1.0, seed=derive_seed(97, r)), random_piecewise(rng, 2, d)


def test_decomposition_and_transfer_identities_on_1000_pairs():
    worst_dec = worst_tr = 0.0
    for r in range(1000):
        Q, sc, p, H = _pair(r)
        inv = chain_invariants(Q)
        qt = Q.matrix.T
        jump = integrate_wrt_state_indicator(H, p, 1.0 / sc.root_speed).value
        dyn = integrate_wrt_dynkin(H, p, Q, sc).value
        drift = integrate_state_density(H, p, qt, sc.root_speed).value
        worst_dec = max(worst_dec, np.abs(jump - dyn - drift).max())
        occ = integrate_wrt_occupation(H, p, inv.pi, sc).value
        transfer = -integrate_state_density(H @ inv.F.T, p, qt, sc.root_speed).value
        worst_tr = max(worst_tr, np.abs(occ - transfer).max())
    assert worst_dec <= 1e-10
    assert worst_tr <= 1e-10


def test_dynkin_by_parts_on_random_pairs():
    for r in range(30):
        Q, sc, p, H = _pair(r)
        assert np.allclose(integrate_wrt_dynkin(H, p, Q, sc).value,
                           dynkin_integral_by_parts(H, p, Q, sc), atol=1e-9)


def test_indicator_bound_on_simulated_paths():
    rng = np.random.default_rng(3)
    for r in range(1000):
        Q, sc, p, _ = _pair(r)
        H = random_piecewise(rng, 1, 1)
        j = int(rng.integers(0, p.d))
        x = H.entry(0, 0)
        bound = total_variation(x) + sup_abs(x)
        T = float(rng.uniform(0.05, 1.0))
        assert abs(integrate_wrt_indicator(H, p, j, T=T).value[0]) <= bound + 1e-12
