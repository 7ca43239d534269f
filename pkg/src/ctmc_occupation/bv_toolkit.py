"""Total variation of piecewise-affine scalar functions and checkable forms of the BV inequalities.

A :class:`BVFunction` is right-continuous and affine on each
``[b_j, b_{j+1})``; jumps may only occur at breakpoints. Everything that can
be done exactly on this class is done exactly. The composition bound is the
exception: ``f`` is an arbitrary callable, so its variation along a piece is
a partition sum over a fine grid (exact whenever ``f`` is monotone between
grid points).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NotBinaryPath, OutOfHorizon

BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class BVFunction:
    """``x(t) = values[j] + slopes[j] * (t - b_j)`` on ``[b_j, b_{j+1})``."""

    breakpoints: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float)
        v = np.array(self.values, dtype=float)
        s = np.array(self.slopes, dtype=float)
        if b.ndim != 1 or b.size < 2 or (np.diff(b) <= 0).any() or b[0] != 0.0:
            raise ValueError("breakpoints must start at 0 and be strictly increasing")
        if v.shape != (b.size - 1,) or s.shape != v.shape:
            raise ValueError("need one value and one slope per segment")
        for arr in (b, v, s):
            arr.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "slopes", s)

    @classmethod
    def from_points(cls, times, values) -> "BVFunction":
        """Continuous piecewise-linear interpolant through ``(times[i], values[i])``."""
        t = np.asarray(times, dtype=float)
        x = np.asarray(values, dtype=float)
        return cls(t, x[:-1], np.diff(x) / np.diff(t))

    @classmethod
    def from_affine(cls, breakpoints, intercepts, slopes) -> "BVFunction":
        """Segments given as ``intercept + t * slope`` in absolute time."""
        b = np.asarray(breakpoints, dtype=float)
        a = np.asarray(intercepts, dtype=float)
        s = np.asarray(slopes, dtype=float)
        return cls(b, a + s * b[:-1], s)

    @classmethod
    def step(cls, jump_times, levels, horizon: float) -> "BVFunction":
        """Piecewise-constant function: ``levels[0]`` until the first jump, then ``levels[k]``."""
        b = np.concatenate(([0.0], np.asarray(jump_times, dtype=float), [float(horizon)]))
        levels = np.asarray(levels, dtype=float)
        if b[-1] <= b[-2]:
            b, levels = b[:-1], levels[:-1]
        return cls(b, levels, np.zeros(levels.size))

    @classmethod
    def constant(cls, c: float, horizon: float) -> "BVFunction":
        return cls([0.0, horizon], [c], [0.0])

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def end_values(self) -> np.ndarray:
        """Left limit at the right end of each segment."""
        return self.values + self.slopes * np.diff(self.breakpoints)

    @property
    def jumps(self) -> np.ndarray:
        """``x(b_j) - x(b_j-)`` at the interior breakpoints ``b_1 .. b_{p-1}``."""
        return self.values[1:] - self.end_values[:-1]

    def _segment(self, t, left: bool):
        ts = np.asarray(t, dtype=float)
        if (ts < 0).any() or (ts > self.horizon).any():
            raise OutOfHorizon(f"evaluation outside [0, {self.horizon}]")
        side = "left" if left else "right"
        j = np.clip(np.searchsorted(self.breakpoints, ts, side=side) - 1, 0, self.values.size - 1)
        return ts, j

    def __call__(self, t):
        ts, j = self._segment(t, left=False)
        return self.values[j] + self.slopes[j] * (ts - self.breakpoints[j])

    def left_limit(self, t):
        ts, j = self._segment(t, left=True)
        return self.values[j] + self.slopes[j] * (ts - self.breakpoints[j])

    def refine(self, points) -> "BVFunction":
        pts = np.asarray(points, dtype=float)
        grid = np.union1d(self.breakpoints, pts[(pts > 0) & (pts < self.horizon)])
        j = np.clip(np.searchsorted(self.breakpoints, grid[:-1], side="right") - 1, 0, self.values.size - 1)
        vals = self.values[j] + self.slopes[j] * (grid[:-1] - self.breakpoints[j])
        return BVFunction(grid, vals, self.slopes[j])

    def restrict(self, t: float) -> "BVFunction":
        """The function on ``[0, t]``."""
        if not 0 < t <= self.horizon:
            raise OutOfHorizon(f"cannot restrict to [0, {t}]")
        f = self.refine([t])
        keep = f.breakpoints[:-1] < t
        return BVFunction(np.append(f.breakpoints[:-1][keep], t), f.values[keep], f.slopes[keep])

    def __add__(self, other: "BVFunction") -> "BVFunction":
        a, b = _common(self, other)
        return BVFunction(a.breakpoints, a.values + b.values, a.slopes + b.slopes)

    def __neg__(self) -> "BVFunction":
        return BVFunction(self.breakpoints, -self.values, -self.slopes)

    def __sub__(self, other: "BVFunction") -> "BVFunction":
        return self + (-other)


def _common(x: BVFunction, y: BVFunction):
    if not np.isclose(x.horizon, y.horizon, rtol=0, atol=1e-12):
        raise ValueError("functions live on different horizons")
    return x.refine(y.breakpoints), y.refine(x.breakpoints)


def _upto(x: BVFunction, t) -> BVFunction:
    t = x.horizon if t is None else float(t)
    if t > x.horizon or t < 0:
        raise OutOfHorizon(f"t={t} outside [0, {x.horizon}]")
    return x if t == x.horizon else (x.restrict(t) if t > 0 else None)


def total_variation(x: BVFunction, t: float | None = None) -> float:
    """``v_x(t)``: sum of ``|slope| * length`` over pieces plus ``|jump|`` at breakpoints in ``(0, t]``.

    A jump exactly at ``t`` counts, since ``x`` is right-continuous.
    """
    f = _upto(x, t)
    if f is None:
        return 0.0
    total = float((np.abs(f.slopes) * np.diff(f.breakpoints)).sum() + np.abs(f.jumps).sum())
    tt = f.horizon
    if tt < x.horizon:
        total += float(abs(x(tt) - x.left_limit(tt)))
    return total


def sup_abs(x: BVFunction, t: float | None = None) -> float:
    """``sup_{0 <= s <= t} |x(s)|``, attained at a segment start or a left limit."""
    f = _upto(x, t)
    if f is None:
        return float(abs(x(0.0)))
    cands = [np.abs(f.values).max(), np.abs(f.end_values).max()]
    if f.horizon < x.horizon:
        cands.append(abs(x(f.horizon)))
    return float(max(cands))


def jordan_decomposition(x: BVFunction) -> tuple[BVFunction, BVFunction]:
    """Split ``x = x_plus - x_minus`` into nondecreasing parts.

    Normalisation ``x_plus(0) = x(0)``, ``x_minus(0) = 0``, so that
    ``x_plus + x_minus - x(0)`` is the total variation function.
    """
    pos_slope = np.clip(x.slopes, 0.0, None)
    neg_slope = np.clip(-x.slopes, 0.0, None)
    lengths = np.diff(x.breakpoints)
    jumps = x.jumps
    # value of each part at the start of every segment
    up = np.concatenate(([0.0], np.cumsum(pos_slope[:-1] * lengths[:-1] + np.clip(jumps, 0.0, None))))
    down = np.concatenate(([0.0], np.cumsum(neg_slope[:-1] * lengths[:-1] + np.clip(-jumps, 0.0, None))))
    x0 = float(x.values[0])
    return (BVFunction(x.breakpoints, x0 + up, pos_slope),
            BVFunction(x.breakpoints, down, neg_slope))


@dataclass(frozen=True)
class BoundCheck:
    """Both sides of an inequality ``lhs <= rhs``."""

    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack >= -BOUND_SLACK


def boundedness_bound(x: BVFunction, T: float | None = None) -> BoundCheck:
    """``sup |x| <= |x(0)| + v_x(T)`` on ``[0, T]``."""
    return BoundCheck(sup_abs(x, T), abs(float(x(0.0))) + total_variation(x, T))


def _monotone_variation(f, a: float, b: float, samples: int) -> float:
    grid = f(np.linspace(a, b, samples))
    return float(np.abs(np.diff(grid)).sum())


def composition_variation(x: BVFunction, f: Callable, T: float | None = None,
                          samples: int = 2049) -> float:
    """Variation of ``f(x(.))`` on ``[0, T]``.

    On an affine piece ``x`` sweeps ``[x(u), x(v-)]`` once, so the variation
    of ``f o x`` there is the variation of ``f`` over that interval; jumps of
    ``x`` contribute ``|f(x(b)) - f(x(b-))|``.
    """
    g = _upto(x, T)
    if g is None:
        return 0.0
    total = 0.0
    for a, b in zip(g.values, g.end_values):
        if a != b:
            total += _monotone_variation(f, a, b, samples)
    if g.jumps.size:
        total += float(np.abs(f(g.values[1:]) - f(g.end_values[:-1])).sum())
    if g.horizon < x.horizon:
        total += float(abs(f(x(g.horizon)) - f(x.left_limit(g.horizon))))
    return total


def lipschitz_composition_bound(x: BVFunction, f: Callable, c: float, T: float | None = None,
                                samples: int = 2049) -> BoundCheck:
    """``v_{f o x}(T) <= c * v_x(T)`` with ``c`` a Lipschitz constant of ``f`` on ``[-sup|x|, sup|x|]``."""
    return BoundCheck(composition_variation(x, f, T, samples), c * total_variation(x, T))


def product(x: BVFunction, y: BVFunction):
    """Pointwise product as ``(grid, a, b, c)`` with ``z = a + b*s + c*s**2`` in local time ``s``."""
    xr, yr = _common(x, y)
    a = xr.values * yr.values
    b = xr.values * yr.slopes + xr.slopes * yr.values
    c = xr.slopes * yr.slopes
    return xr.breakpoints, a, b, c


def product_variation(x: BVFunction, y: BVFunction, T: float | None = None) -> float:
    """Exact variation of ``x * y``: each piece is a quadratic, split at its vertex."""
    T = x.horizon if T is None else float(T)
    grid, a, b, c = product(x, y)
    total = 0.0
    seg_len = np.diff(grid)
    prev_end = None
    for j in range(a.size):
        if grid[j] > T:
            break
        h = min(seg_len[j], T - grid[j])
        z = lambda s, j=j: a[j] + b[j] * s + c[j] * s * s  # noqa: E731
        if prev_end is not None:
            total += abs(a[j] - prev_end)
        pts = [0.0, h]
        if c[j] != 0:
            vertex = -b[j] / (2 * c[j])
            if 0 < vertex < h:
                pts = [0.0, vertex, h]
        vals = [z(s) for s in pts]
        total += sum(abs(v1 - v0) for v0, v1 in zip(vals, vals[1:]))
        prev_end = z(seg_len[j])
    return float(total)


def product_variation_bound(x: BVFunction, y: BVFunction, T: float | None = None) -> BoundCheck:
    """``v_{xy}(T) <= B (v_x(T) + v_y(T))`` with ``B = max(sup|x|, sup|y|)``."""
    B = max(sup_abs(x, T), sup_abs(y, T))
    return BoundCheck(product_variation(x, y, T), B * (total_variation(x, T) + total_variation(y, T)))


def binary_jumps(x: BVFunction, T: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Jump times and signs of a ``{0, 1}``-valued step function on ``(0, T]``."""
    if np.any(x.slopes != 0) or not np.isin(x.values, (0.0, 1.0)).all():
        raise NotBinaryPath("integrator must be piecewise constant with values in {0, 1}")
    T = x.horizon if T is None else float(T)
    times = x.breakpoints[1:-1]
    jumps = x.jumps
    live = (jumps != 0) & (times <= T)
    return times[live], jumps[live]


def alternating_jump_bound(y: BVFunction, x: BVFunction, T: float | None = None) -> BoundCheck:
    """``sup_{t<=T} |int_0^t y dx| <= v_y(T) + sup_{t<=T} |y(t)|`` for binary ``x``.

    The integral is a jump sum with the integrand taken as the left limit
    ``y(s-)`` at each jump; its running supremum is attained right after a jump.
    """
    times, signs = binary_jumps(x, T)
    if times.size:
        partial = np.cumsum(y.left_limit(times) * signs)
        lhs = float(np.abs(partial).max())
    else:
        lhs = 0.0
    return BoundCheck(lhs, total_variation(y, T) + sup_abs(y, T))


def indicator_function(path, state: int) -> BVFunction:
    """``t -> 1{J(t) = state}`` of a simulated path as a step :class:`BVFunction`."""
    levels = (path.states == state).astype(float)
    return BVFunction.step(path.jump_times, levels, path.horizon)


def random_bv_function(rng: np.random.Generator, horizon: float = 1.0, pieces: int | None = None,
                       jump_prob: float = 0.3, scale: float = 1.0) -> BVFunction:
    """Random piecewise-affine function with occasional jumps, for property checks."""
    pieces = int(rng.integers(1, 8)) if pieces is None else pieces
    inner = np.sort(rng.uniform(0, horizon, pieces - 1))
    b = np.unique(np.concatenate(([0.0], inner, [horizon])))
    p = b.size - 1
    slopes = rng.normal(0, scale * 3, p) * (rng.random(p) < 0.8)
    lengths = np.diff(b)
    starts = np.empty(p)
    starts[0] = rng.normal(0, scale)
    for j in range(1, p):
        cont = starts[j - 1] + slopes[j - 1] * lengths[j - 1]
        starts[j] = cont + (rng.normal(0, scale) if rng.random() < jump_prob else 0.0)
    return BVFunction(b, starts, slopes)
