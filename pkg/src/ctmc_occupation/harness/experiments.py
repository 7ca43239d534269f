"""Monte Carlo experiments comparing simulated statistics with their closed-form limits.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns a
:class:`ConvergenceReport`. Replication ``r`` always uses the seed
``derive_seed(master_seed, r)``; the same seeds are reused across the
``n_grid`` (common random numbers).
"""

from __future__ import annotations

import math
import time
from functools import partial

import numpy as np
from scipy import stats

from ..bv_toolkit import (
    BVFunction,
    alternating_jump_bound,
    boundedness_bound,
    indicator_function,
    lipschitz_composition_bound,
    product_variation_bound,
    random_bv_function,
    sup_abs,
    total_variation,
)
from ..chain_algebra import (
    IDENTITY_NAMES,
    ChainInvariants,
    random_irreducible_generator,
    verify_identities,
)
from ..errors import DegenerateProjection, DomainMismatch, GridTooSmall
from ..path_sim import (
    ScalingParams,
    compensator,
    dynkin_martingale,
    fluctuation_process,
    simulate_path,
)
from ..rng import derive_seed
from ..stoch_integral import (
    OccupationIntegrand,
    PiecewiseFunction,
    integrate_wrt_dynkin,
    integrate_wrt_occupation,
    limit_integral_covariance,
)
from .config import ExperimentConfig
from .engine import run_replications
from .report import ConvergenceReport, ReportRow, stat_row

IDENTITY_TOL = 1e-8
BV_TOL = 1e-12
N_RANDOM_GENERATORS = 100


def empirical_covariance(x: np.ndarray):
    """Covariance of the rows of ``x`` and entrywise standard errors from fourth moments."""
    x = np.asarray(x, dtype=float)
    R = x.shape[0]
    xc = x - x.mean(axis=0)
    prods = np.einsum("ri,rj->rij", xc, xc)
    cov = prods.sum(axis=0) / (R - 1)
    se = prods.std(axis=0, ddof=1) / math.sqrt(R)
    return cov, se


def quantile_with_se(x: np.ndarray, q: float, z: float = 1.96):
    """Sample quantile and a distribution-free standard error from order statistics."""
    xs = np.sort(np.asarray(x, dtype=float))
    R = xs.size
    half = z * math.sqrt(R * q * (1 - q))
    lo = int(np.clip(math.floor(R * q - half), 0, R - 1))
    hi = int(np.clip(math.ceil(R * q + half), 0, R - 1))
    return float(np.quantile(xs, q)), float((xs[hi] - xs[lo]) / (2 * z))


def _strictly_below(x: float) -> float:
    return float(np.nextafter(x, -np.inf))


def _report(name, config, notes=()):
    return ConvergenceReport(name, config=config.echo(), notes=list(notes))


# identities -------------------------------------------------------------


def run_identity_suite(config: ExperimentConfig, random_dims=None, count: int = N_RANDOM_GENERATORS,
                       tol: float = IDENTITY_TOL) -> ConvergenceReport:
    """Identity residuals for the configured generator and a seeded random batch.

    ``random_dims`` cycles the dimensions of the batch; by default every random
    generator has the configured dimension.
    """
    start = time.perf_counter()
    rep = _report("identities", config, [f"residuals relative to ||Q||_2 ||F||_2^2, tolerance {tol:g}"])
    gen = config.generator
    res = verify_identities(gen, ChainInvariants.from_generator(gen), tol)
    for name in IDENTITY_NAMES:
        rep.add(ReportRow(0, f"config_{name}", res.relative[name], 0.0, 0.0, tol))
    dims = [gen.d] if random_dims is None else list(random_dims)
    worst = dict.fromkeys(IDENTITY_NAMES, 0.0)
    failures = 0
    for i in range(count):
        d = dims[i % len(dims)]
        q = random_irreducible_generator(d, derive_seed(config.master_seed, i))
        r = verify_identities(q, ChainInvariants.from_generator(q), tol)
        failures += not r.passed
        for name, v in r.relative.items():
            worst[name] = max(worst[name], v)
    for name in IDENTITY_NAMES:
        rep.add(ReportRow(0, f"random_max_{name}", worst[name], 0.0, 0.0, tol))
    rep.add(ReportRow(0, "random_failures", failures, 0.0, 0.0, 0.0))
    rep.metadata.update(runtime_s=round(time.perf_counter() - start, 3), random_generators=count,
                        random_dims=sorted(set(dims)))
    return rep


# martingale moments ---------------------------------------------------------


def _martingale_task(seed, *, Q, sc, T, init):
    path = simulate_path(Q, sc, T, init=init, seed=seed)
    return dynkin_martingale(path, Q, sc, T), compensator(path, Q, sc, T)


def run_martingale_experiment(config: ExperimentConfig, workers: int = 1) -> ConvergenceReport:
    """Check ``E Y(T) = 0`` and ``E[Y Y^T](T) = E<Y>(T)`` for the unscaled Dynkin martingale."""
    start = time.perf_counter()
    rep = _report("martingale", config, ["Y is the Dynkin martingale of the sped-up chain, unscaled"])
    gen, T = config.generator, config.horizon
    inv = ChainInvariants.from_generator(gen)
    init = config.init_for("stationary")
    init = inv.pi if init == "stationary" else init
    d = gen.d
    for n in config.n_grid:
        sc = ScalingParams(n, config.alpha)
        task = partial(_martingale_task, Q=gen, sc=sc, T=T, init=init)
        Y, QV = run_replications(task, config.replications, config.master_seed, workers)
        R = Y.shape[0]
        mean = Y.mean(axis=0)
        se = Y.std(axis=0, ddof=1) / math.sqrt(R)
        for i in range(d):
            rep.add(ReportRow(n, f"mean_Y_{i + 1}", mean[i], 0.0, se[i], 4 * se[i]))
        outer = np.einsum("ri,rj->rij", Y, Y)
        diff = outer - QV
        dse = diff.std(axis=0, ddof=1) / math.sqrt(R)
        for i in range(d):
            for j in range(i, d):
                rep.add(ReportRow(n, f"E_YYt_{i + 1}_{j + 1}", outer[:, i, j].mean(),
                                  QV[:, i, j].mean(), dse[i, j], 4 * dse[i, j]))
    rep.metadata.update(runtime_s=round(time.perf_counter() - start, 3), workers=workers)
    return rep


# ergodic scaling ----------------------------------------------------------


def _ergodic_task(seed, *, Q, sc, T, init, pi, eps):
    path = simulate_path(Q, sc, T, init=init, seed=seed)
    times = np.append(path.segment_starts, T)
    occ = np.vstack([path.occupation_table, path.occupation_table[-1]])
    occ[-1, path.states[-1]] += T - path.segment_starts[-1]
    # norm of an affine vector function is convex, so the sup sits at a segment end
    dev = np.linalg.norm(occ - np.outer(times, pi), axis=1).max()
    return (np.array(float(sc.n) ** (sc.alpha / 2 - eps) * dev),)


def run_ergodic_experiment(config: ExperimentConfig, workers: int = 1,
                           median_ratio: float = 0.5) -> ConvergenceReport:
    """Distribution of ``S_n = sup_t ||n^{a/2-eps} (L_n(t) - pi t)||`` across the grid.

    Medians must decrease strictly, 0.95-quantiles must not increase, and the
    median at the largest ``n`` must be at most ``median_ratio`` times the
    median at the smallest.
    """
    if len(config.n_grid) < 2:
        raise GridTooSmall("ergodic experiment needs at least two grid points")
    start = time.perf_counter()
    eps = config.eps
    rep = _report("ergodic", config, [f"epsilon={eps:g}; median_S rows require a strict decrease "
                                      f"(tolerance = previous median, exclusive); q95_S rows a non-increase; "
                                      f"median_ratio tolerance {median_ratio:g}"])
    gen, T = config.generator, config.horizon
    inv = ChainInvariants.from_generator(gen)
    init = config.init_for(1)
    init = inv.pi if init == "stationary" else init
    medians, prev_q = [], math.inf
    for n in config.n_grid:
        sc = ScalingParams(n, config.alpha)
        task = partial(_ergodic_task, Q=gen, sc=sc, T=T, init=init, pi=inv.pi, eps=eps)
        (S,) = run_replications(task, config.replications, config.master_seed, workers)
        med, med_se = quantile_with_se(S, 0.5)
        q95, q95_se = quantile_with_se(S, 0.95)
        tol_med = _strictly_below(medians[-1]) if medians else math.inf
        rep.add(ReportRow(n, "median_S", med, 0.0, med_se, tol_med))
        rep.add(ReportRow(n, "q95_S", q95, 0.0, q95_se, prev_q))
        medians.append(med)
        prev_q = q95
    ratio = medians[-1] / medians[0] if medians[0] > 0 else math.inf
    rep.add(ReportRow(config.n_grid[-1], "median_ratio", ratio, 0.0, 0.0, median_ratio))
    rep.metadata.update(runtime_s=round(time.perf_counter() - start, 3), workers=workers,
                        predicted_decade_factor=round(10 ** (-eps), 4))
    return rep


# FCLT ---------------------------------------------------------------------


def _fclt_task(seed, *, Q, sc, T, init, pi):
    path = simulate_path(Q, sc, T, init=init, seed=seed)
    return dynkin_martingale(path, Q, sc, T) / sc.root_speed, fluctuation_process(path, pi, sc, T)


def run_fclt_experiment(config: ExperimentConfig, workers: int = 1, rel_tol: float = 0.05) -> ConvergenceReport:
    """Covariances of ``n^{-a/2} Y_n(T)`` and ``G_n(T)`` against ``SigmaY T`` and ``SigmaX T``.

    A one-sample KS test of the standardised projection of ``G_n(T)`` on
    ``e_1 - e_2`` is judged at the largest ``n``.
    """
    start = time.perf_counter()
    gen, T = config.generator, config.horizon
    inv = ChainInvariants.from_generator(gen)
    d = gen.d
    u = np.zeros(d)
    u[0], u[1 % d] = 1.0, -1.0
    proj_var = float(u @ inv.SigmaX @ u)
    if d < 2 or proj_var <= 1e-14 * max(1.0, float(np.abs(inv.SigmaX).max())):
        raise DegenerateProjection("projection e1 - e2 has zero limiting variance")
    level = config.test_level
    rep = _report("fclt", config, [f"KS normality of u^T G_n(T) / sqrt(u^T SigmaX u T), u = e1 - e2, "
                                   f"at level {level:g}: ks_pvalue_proj passes iff p >= level"])
    init = config.init_for("stationary")
    init = inv.pi if init == "stationary" else init
    for n in config.n_grid:
        sc = ScalingParams(n, config.alpha)
        task = partial(_fclt_task, Q=gen, sc=sc, T=T, init=init, pi=inv.pi)
        Yb, G = run_replications(task, config.replications, config.master_seed, workers)
        for name, X, Sigma in (("Y", Yb, inv.SigmaY), ("G", G, inv.SigmaX)):
            cov, se = empirical_covariance(X)
            for i in range(d):
                for j in range(i, d):
                    rep.add(stat_row(n, f"cov_{name}_{i + 1}_{j + 1}", cov[i, j], Sigma[i, j] * T,
                                     se[i, j], rel_tol))
            scale = max(1.0, float(np.abs(cov).max()))
            rep.add(ReportRow(n, f"cov_{name}_rowsum_max", float(np.abs(cov.sum(axis=1)).max()),
                              0.0, 0.0, 1e-9 * scale))
        proj = G @ u
        pv, pse = empirical_covariance(proj[:, None])
        rep.add(stat_row(n, "var_G_proj", pv[0, 0], proj_var * T, pse[0, 0], rel_tol))
        if n == config.n_grid[-1]:
            z = proj / math.sqrt(proj_var * T)
            pvalue = float(stats.kstest(z, "norm").pvalue)
            rep.add(ReportRow(n, "ks_pvalue_proj", pvalue, 1.0, 0.0, 1.0 - level))
    rep.metadata.update(runtime_s=round(time.perf_counter() - start, 3), workers=workers)
    return rep


# stochastic integrals -------------------------------------------------------


def _realize(H, path):
    return H.realize(path) if isinstance(H, OccupationIntegrand) else H


def _integral_task(seed, *, Q, sc, T, init, pi, Ft, integrands):
    path = simulate_path(Q, sc, T, init=init, seed=seed)
    vG, vY, vYF, tv = [], [], [], []
    for H in integrands:
        Hn = _realize(H, path)
        vG.append(integrate_wrt_occupation(Hn, path, pi, sc, T).value)
        vY.append(integrate_wrt_dynkin(Hn, path, Q, sc, T).value)
        vYF.append(integrate_wrt_dynkin(Hn @ Ft, path, Q, sc, T).value)
        tv.append(Hn.total_variation(T).max(initial=0.0) / sc.root_speed)
    return np.concatenate(vG), np.concatenate(vY), np.concatenate(vYF), np.array(tv)


def run_integral_experiment(config: ExperimentConfig, workers: int = 1, rel_tol: float = 0.05,
                            variation_tol: float = 0.1) -> ConvergenceReport:
    """Vector of integrals ``H_k^- . G_n`` (and ``H_k^- . n^{-a/2} Y_n``) against closed-form covariances.

    Also reported: the scaled total variation ``n^{-a/2} v_{H_k}(T)`` per ``n``
    (each row must not exceed the previous one, the largest-``n`` row must be
    at most ``variation_tol``) and, at the largest ``n``, the gap between
    ``Var(H^- . G_n)`` and ``Var((H F^T)^- . n^{-a/2} Y_n)`` within twice the
    combined standard error.
    """
    if not config.integrands:
        raise DomainMismatch("integral experiment needs at least one integrand")
    start = time.perf_counter()
    gen, T = config.generator, config.horizon
    inv = ChainInvariants.from_generator(gen)
    for H in config.integrands:
        if H.shape[1] != gen.d:
            raise DomainMismatch(f"integrand has {H.shape[1]} columns, chain has {gen.d} states")
        if isinstance(H, PiecewiseFunction) and H.horizon < T - 1e-12:
            raise DomainMismatch(f"integrand horizon {H.horizon} shorter than T={T}")
    limits = [H.limit(inv.pi, T) if isinstance(H, OccupationIntegrand) else H for H in config.integrands]
    stacked = PiecewiseFunction.stack(limits)
    target_x = limit_integral_covariance(stacked, inv.SigmaX, T)
    target_y = limit_integral_covariance(stacked, inv.SigmaY, T)
    m = target_x.shape[0]
    rep = _report("integral", config, [f"{len(config.integrands)} integrands, {m} output coordinates; "
                                       f"tv_scaled rows: non-increase along the grid, final row <= {variation_tol:g}; "
                                       f"decomposition_gap rows: |Var(H.G) - Var((HF^T).Y)| <= 2 combined stderr"])
    init = config.init_for("stationary")
    init = inv.pi if init == "stationary" else init
    # n >= 1, so the unscaled variation bounds the first grid point
    first_tol = [_variation_bound(H, T) for H in config.integrands]
    prev_tv = None
    for n in config.n_grid:
        sc = ScalingParams(n, config.alpha)
        task = partial(_integral_task, Q=gen, sc=sc, T=T, init=init, pi=inv.pi, Ft=inv.F.T,
                       integrands=config.integrands)
        vG, vY, vYF, tv = run_replications(task, config.replications, config.master_seed, workers)
        cg, sg = empirical_covariance(vG)
        cy, sy = empirical_covariance(vY)
        cf, sf = empirical_covariance(vYF)
        for a in range(m):
            for b in range(a, m):
                rep.add(stat_row(n, f"cov_HG_{a + 1}_{b + 1}", cg[a, b], target_x[a, b], sg[a, b], rel_tol))
                rep.add(stat_row(n, f"cov_HY_{a + 1}_{b + 1}", cy[a, b], target_y[a, b], sy[a, b], rel_tol))
        tv_max = tv.max(axis=0)
        for k, v in enumerate(tv_max):
            tol = prev_tv[k] if prev_tv is not None else first_tol[k]
            rep.add(ReportRow(n, f"tv_scaled_H{k + 1}", float(v), 0.0, 0.0, float(tol)))
        prev_tv = tv_max
        if n == config.n_grid[-1]:
            for k, v in enumerate(tv_max):
                rep.add(ReportRow(n, f"tv_scaled_final_H{k + 1}", float(v), 0.0, 0.0, variation_tol))
            for a in range(m):
                gap = abs(cg[a, a] - cf[a, a])
                comb = math.hypot(sg[a, a], sf[a, a])
                rep.add(ReportRow(n, f"decomposition_gap_{a + 1}", gap, 0.0, comb, 2 * comb))
    rep.metadata.update(runtime_s=round(time.perf_counter() - start, 3), workers=workers)
    return rep


def _variation_bound(H, T):
    if isinstance(H, OccupationIntegrand):
        return float(np.abs(H.coefficients).max(initial=0.0) * T)
    return float(H.total_variation(T).max(initial=0.0))


# bounded-variation inequalities ---------------------------------------------

_COMPOSITIONS = (
    ("square", lambda u: u * u, lambda B: 2 * B),
    ("sin", np.sin, lambda B: 1.0),
    ("abs", np.abs, lambda B: 1.0),
    ("exp", np.exp, lambda B: math.exp(B)),
)


def _sin_like(rng, horizon):
    knots = np.linspace(0.0, horizon, int(rng.integers(3, 12)))
    freq, phase, amp = rng.uniform(0.5, 6.0), rng.uniform(0, 2 * np.pi), rng.uniform(0.2, 3.0)
    return BVFunction.from_points(knots, amp * np.sin(freq * knots + phase))


def run_bv_suite(config: ExperimentConfig, cases: int = 1000) -> ConvergenceReport:
    """Seeded random instances of the four bounded-variation inequalities.

    The alternating-jump bound integrates random (half of them sine-like)
    piecewise-affine ``y`` against state indicators of paths drawn from the
    configured chain at ``n = n_grid[0]``.
    """
    start = time.perf_counter()
    rep = _report("bv", config, [f"{cases} cases per bound; violation = max(0, -min slack), tolerance {BV_TOL:g}"])
    T = config.horizon
    worst = {k: math.inf for k in ("boundedness", "composition", "product", "alternating_jumps")}
    gap_identity = 0.0
    sc = ScalingParams(config.n_grid[0], config.alpha)
    gen = config.generator
    for i in range(cases):
        rng = np.random.default_rng(derive_seed(config.master_seed, i))
        x = random_bv_function(rng, T)
        y = random_bv_function(rng, T)
        t = float(rng.uniform(0, T)) if rng.random() < 0.5 else T
        worst["boundedness"] = min(worst["boundedness"], boundedness_bound(x, t).slack)
        _, f, lip = _COMPOSITIONS[i % len(_COMPOSITIONS)]
        B = sup_abs(x, T)
        worst["composition"] = min(worst["composition"], lipschitz_composition_bound(x, f, lip(B), T).slack)
        worst["product"] = min(worst["product"], product_variation_bound(x, y, T).slack)
        one = BVFunction.constant(1.0, T)
        gap_identity = max(gap_identity, abs(product_variation_bound(x, one, T).lhs - total_variation(x, T)))
        path = simulate_path(gen, sc, T, init=int(rng.integers(gen.d)), seed=derive_seed(config.master_seed + 1, i))
        ind = indicator_function(path, int(rng.integers(gen.d)))
        yy = _sin_like(rng, T) if i % 2 else y
        worst["alternating_jumps"] = min(worst["alternating_jumps"], alternating_jump_bound(yy, ind, T).slack)
    for k in sorted(worst):
        rep.add(ReportRow(0, f"{k}_violation", max(0.0, -worst[k]), 0.0, 0.0, BV_TOL))
    rep.add(ReportRow(0, "product_unit_gap", gap_identity, 0.0, 0.0, BV_TOL))
    rep.metadata.update(runtime_s=round(time.perf_counter() - start, 3),
                        worst_slack={k: float(v) for k, v in sorted(worst.items())})
    return rep


EXPERIMENTS = {
    "identities": run_identity_suite,
    "martingale": run_martingale_experiment,
    "ergodic": run_ergodic_experiment,
    "fclt": run_fclt_experiment,
    "integral": run_integral_experiment,
    "bv": run_bv_suite,
}
