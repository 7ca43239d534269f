"""Exact simulation of the sped-up chain and closed-form path functionals.

A path is stored sparsely as its initial state, jump times and post-jump
states. Every functional here (indicator ``K``, occupation measure ``L``,
Dynkin martingale ``Y``, its compensator and the fluctuation process ``G``)
is an exact segment sum over the constancy intervals of the path. States are
0-based.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chain_algebra import as_generator, stationary
from .errors import HorizonTooLong, OutOfHorizon, ZeroExitRate
from .rng import uniform_stream

DEFAULT_JUMP_CAP = 1e8


@dataclass(frozen=True)
class ScalingParams:
    """Scale index ``n`` and speed exponent ``alpha``; the generator is ``n**alpha * Q``."""

    n: int = 1
    alpha: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def speed(self) -> float:
        return float(self.n) ** self.alpha

    @property
    def root_speed(self) -> float:
        return float(self.n) ** (self.alpha / 2)


@dataclass(frozen=True)
class CtmcPath:
    """A right-continuous piecewise-constant trajectory on ``[0, horizon]``."""

    initial_state: int
    jump_times: np.ndarray
    post_jump_states: np.ndarray
    horizon: float
    d: int

    def __post_init__(self):
        times = np.array(self.jump_times, dtype=float)
        states = np.array(self.post_jump_states, dtype=np.int64)
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "jump_times", times)
        object.__setattr__(self, "post_jump_states", states)
        if times.shape != states.shape or times.ndim != 1:
            raise ValueError("jump_times and post_jump_states must be 1-d and equally long")
        if times.size:
            if times[0] <= 0 or (np.diff(times) <= 0).any() or times[-1] > self.horizon:
                raise ValueError("jump times must be strictly increasing in (0, horizon]")
            if (states == self.states[:-1]).any():
                raise ValueError("path contains a self-jump")
        if not 0 <= self.initial_state < self.d or ((states < 0) | (states >= self.d)).any():
            raise ValueError("state index out of range")

    @cached_property
    def states(self) -> np.ndarray:
        """State on each constancy interval: initial state followed by post-jump states."""
        out = np.concatenate(([self.initial_state], self.post_jump_states))
        out.setflags(write=False)
        return out

    @cached_property
    def segment_starts(self) -> np.ndarray:
        out = np.concatenate(([0.0], self.jump_times))
        out.setflags(write=False)
        return out

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    def durations(self, t: float | None = None) -> np.ndarray:
        """Length of each constancy interval intersected with ``[0, t]``."""
        t = self.horizon if t is None else t
        ends = np.append(self.jump_times, self.horizon)
        return np.clip(np.minimum(ends, t) - self.segment_starts, 0.0, None)

    def _check(self, t) -> np.ndarray:
        ts = np.asarray(t, dtype=float)
        if (ts < 0).any() or (ts > self.horizon).any():
            raise OutOfHorizon(f"query time outside [0, {self.horizon}]")
        return ts

    def state_at(self, t):
        ts = self._check(t)
        idx = np.searchsorted(self.jump_times, ts, side="right")
        return self.states[idx]

    @cached_property
    def occupation_table(self) -> np.ndarray:
        """``L`` evaluated at 0 and at every jump time, shape ``(n_jumps + 1, d)``."""
        table = np.zeros((self.n_jumps + 1, self.d))
        if self.n_jumps:
            lengths = np.diff(self.segment_starts)
            steps = np.zeros((self.n_jumps, self.d))
            steps[np.arange(self.n_jumps), self.states[:-1]] = lengths
            table[1:] = np.cumsum(steps, axis=0)
        table.setflags(write=False)
        return table


def _init_state(init, gen, rng) -> int:
    if isinstance(init, str):
        if init != "stationary":
            raise ValueError(f"unknown init {init!r}")
        probs = np.asarray(stationary(gen))
    elif np.ndim(init) == 0:
        state = int(init)
        if not 0 <= state < gen.d:
            raise ValueError(f"initial state {state} out of range")
        return state
    else:
        probs = np.asarray(init, dtype=float)
    cdf = np.cumsum(probs) / probs.sum()
    return min(int(np.searchsorted(cdf, rng.random(), side="right")), gen.d - 1)


def _jump_cdfs(q: np.ndarray) -> list[list[float]]:
    d = q.shape[0]
    rows = []
    for i in range(d):
        probs = np.where(np.arange(d) == i, 0.0, q[i]) / -q[i, i]
        cdf = np.cumsum(probs)
        cdf[np.flatnonzero(probs > 0)[-1]:] = 1.0
        rows.append(cdf.tolist())
    return rows


def simulate_path(Q, sc: ScalingParams, T: float, init="stationary", seed: int = 0,
                  max_expected_jumps: float = DEFAULT_JUMP_CAP) -> CtmcPath:
    """Simulate the chain with generator ``sc.speed * Q`` on ``[0, T]``.

    Jump-chain construction: holding time in state ``i`` is exponential with
    rate ``sc.speed * (-Q_ii)`` (inverse-CDF sampling), the next state is
    ``j != i`` with probability ``Q_ij / (-Q_ii)``.

    Parameters
    ----------
    init : "stationary", int or probability vector
        Initial law, or a fixed 0-based initial state.
    seed : int
        Seed of the Philox stream; equal seeds give bitwise-equal paths.
    """
    gen = as_generator(Q)
    q = gen.matrix
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    exit_rates = -np.diag(q)
    if (exit_rates <= 0).any():
        raise ZeroExitRate(f"state {int(np.argmin(exit_rates))} has zero exit rate")
    rates = exit_rates * sc.speed
    expected = float(rates.max() * T)
    if expected > max_expected_jumps:
        raise HorizonTooLong(f"expected up to {expected:.3g} jumps, cap is {max_expected_jumps:.3g}")

    rng = uniform_stream(seed)
    state = _init_state(init, gen, rng)
    initial = state
    cdfs = _jump_cdfs(q)
    t = 0.0
    times_out, states_out = [], []
    while True:
        block = int(1.25 * rates.max() * (T - t)) + 16
        u = rng.random((block, 2))
        holds = -np.log1p(-u[:, 0])
        seq = [state]
        push = seq.append
        s = state
        for v in u[:, 1].tolist():
            s = bisect_right(cdfs[s], v)
            push(s)
        before = np.array(seq[:-1], dtype=np.int64)
        after = np.array(seq[1:], dtype=np.int64)
        jt = t + np.cumsum(holds / rates[before])
        keep = int(np.searchsorted(jt, T, side="right"))
        times_out.append(jt[:keep])
        states_out.append(after[:keep])
        if keep < block:
            break
        t, state = float(jt[-1]), int(after[-1])
    return CtmcPath(initial, np.concatenate(times_out), np.concatenate(states_out), float(T), gen.d)


def indicator(path: CtmcPath, t) -> np.ndarray:
    """State indicator ``K(t)``; shape ``(d,)`` or ``(len(t), d)``."""
    states = path.state_at(t)
    return np.eye(path.d)[states]


def occupation_measure(path: CtmcPath, t) -> np.ndarray:
    """``L(t) = int_0^t K(s) ds`` for a scalar time or a batch of times."""
    ts = path._check(t)
    idx = np.searchsorted(path.jump_times, ts, side="right")
    table = path.occupation_table
    out = table[idx].copy()
    extra = ts - path.segment_starts[idx]
    if out.ndim == 1:
        out[path.states[idx]] += extra
    else:
        out[np.arange(out.shape[0]), path.states[idx]] += extra
    return out


def _qv_from_occupation(q: np.ndarray, occ: np.ndarray) -> np.ndarray:
    return np.diag(q.T @ occ) - q.T * occ[None, :] - occ[:, None] * q


def dynkin_martingale(path: CtmcPath, Q, sc: ScalingParams, t) -> np.ndarray:
    """``Y(t) = K(t) - K(0) - int_0^t (n^a Q)^T K(s) ds``, using ``int Q^T K = Q^T L``."""
    q = as_generator(Q).matrix
    occ = occupation_measure(path, t)
    k0 = np.eye(path.d)[path.initial_state]
    return indicator(path, t) - k0 - sc.speed * occ @ q


def compensator(path: CtmcPath, Q, sc: ScalingParams, t) -> np.ndarray:
    """Predictable quadratic variation of ``Y`` at time ``t`` (or a stack for several times).

    The integrand is linear in ``K``, so the integral equals
    ``diag(Q^T L) - Q^T diag(L) - diag(L) Q`` times the speed.
    """
    q = as_generator(Q).matrix * sc.speed
    occ = occupation_measure(path, t)
    if occ.ndim == 1:
        return _qv_from_occupation(q, occ)
    return np.stack([_qv_from_occupation(q, row) for row in occ])


def fluctuation_process(path: CtmcPath, pi, sc: ScalingParams, t) -> np.ndarray:
    """``G_n(t) = n^{a/2} (L(t) - pi t)``."""
    occ = occupation_measure(path, t)
    ts = np.asarray(t, dtype=float)
    return sc.root_speed * (occ - np.multiply.outer(ts, np.asarray(pi, dtype=float)))


def pathwise_residuals(path: CtmcPath, Q, sc: ScalingParams, pi, F, times) -> dict:
    """Largest violations of the per-path identities over ``times`` and all visited states.

    ``FtQtK`` checks ``F^T Q^T K(s) = pi - K(s)`` on every constancy interval.
    """
    q = as_generator(Q).matrix
    pi = np.asarray(pi, dtype=float)
    ts = np.asarray(times, dtype=float)
    visited = np.unique(path.states)
    M = np.asarray(F).T @ q.T
    eye = np.eye(path.d)
    drift = np.abs(M[:, visited].T - (pi[None, :] - eye[visited])).max()
    K = indicator(path, ts)
    L = occupation_measure(path, ts)
    Y = dynkin_martingale(path, q, sc, ts)
    G = fluctuation_process(path, pi, sc, ts)
    return {
        "FtQtK": float(drift),
        "sum_K": float(np.abs(K.sum(axis=-1) - 1).max()),
        "sum_L": float(np.abs(L.sum(axis=-1) - ts).max()),
        "sum_Y": float(np.abs(Y.sum(axis=-1)).max()),
        "sum_G": float(np.abs(G.sum(axis=-1)).max()),
    }
