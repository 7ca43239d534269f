"""Pathwise stochastic integrals against the occupation measure, indicator and Dynkin martingale.

Integrands are piecewise-affine matrix functions ``H(t) = A_j + t B_j`` on
``[b_j, b_{j+1})``. Against a piecewise-constant path every integral reduces
to closed-form sums over the cells of the merged grid (path jump times plus
integrand breakpoints), so nothing here is discretised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bv_toolkit import BVFunction
from .chain_algebra import as_generator, check_psd
from .errors import DomainMismatch
from .path_sim import CtmcPath, ScalingParams


def _as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class PiecewiseFunction:
    """Piecewise-affine ``k x m`` matrix function on ``[0, breakpoints[-1]]``.

    Values are right-continuous: on ``[b_j, b_{j+1})`` the function is
    ``A[j] + t * B[j]``, and the last segment is closed at the horizon.
    :meth:`left_limit` uses the previous segment at a breakpoint and sets
    ``H(0-) = H(0)``.
    """

    breakpoints: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float)
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        if b.ndim != 1 or b.size < 2 or b[0] != 0.0 or (np.diff(b) <= 0).any():
            raise ValueError("breakpoints must start at 0 and be strictly increasing")
        if A.ndim != 3 or A.shape != B.shape or A.shape[0] != b.size - 1:
            raise ValueError(f"need one (A, B) pair per segment, got A {A.shape}, B {B.shape}")
        if not (np.isfinite(A).all() and np.isfinite(B).all()):
            raise ValueError("integrand has non-finite coefficients")
        for arr in (b, A, B):
            arr.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    # construction -------------------------------------------------------

    @classmethod
    def constant(cls, value, horizon: float) -> "PiecewiseFunction":
        m = _as_matrix(value)
        return cls([0.0, horizon], m[None], np.zeros_like(m)[None])

    @classmethod
    def affine(cls, intercept, slope, horizon: float) -> "PiecewiseFunction":
        """``intercept + t * slope`` on ``[0, horizon]``."""
        a, b = np.broadcast_arrays(_as_matrix(intercept), _as_matrix(slope))
        return cls([0.0, horizon], a[None], b[None])

    @classmethod
    def from_spec(cls, spec: dict) -> "PiecewiseFunction":
        """Build from ``{"breakpoints": [...], "segments": [{"A": ..., "B": ...}, ...]}``.

        ``B`` may be omitted (zero slope); a flat list is read as a 1-row matrix.
        """
        try:
            breaks = spec["breakpoints"]
            segments = spec["segments"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"integrand needs 'breakpoints' and 'segments': {spec!r}") from exc
        A, B = [], []
        for seg in segments:
            unknown = set(seg) - {"A", "B"}
            if unknown:
                raise ValueError(f"unknown segment keys {sorted(unknown)}")
            a = _as_matrix(seg["A"])
            b = _as_matrix(seg.get("B", np.zeros_like(a)))
            if a.shape != b.shape:
                raise ValueError("A and B of a segment must have equal shapes")
            A.append(a)
            B.append(b)
        return cls(breaks, np.stack(A), np.stack(B))

    def to_spec(self) -> dict:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "segments": [{"A": a.tolist(), "B": b.tolist()} for a, b in zip(self.A, self.B)],
        }

    # evaluation ---------------------------------------------------------

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape[1], self.A.shape[2]

    @property
    def n_segments(self) -> int:
        return self.A.shape[0]

    def segment_index(self, t, left: bool = False) -> np.ndarray:
        side = "left" if left else "right"
        idx = np.searchsorted(self.breakpoints, np.asarray(t, dtype=float), side=side) - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def _eval(self, t, left):
        ts = np.asarray(t, dtype=float)
        if (ts < 0).any() or (ts > self.horizon).any():
            raise DomainMismatch(f"evaluation outside [0, {self.horizon}]")
        j = self.segment_index(ts, left)
        return self.A[j] + np.multiply.outer(ts, np.ones(self.shape)) * self.B[j]

    def __call__(self, t) -> np.ndarray:
        return self._eval(t, left=False)

    def left_limit(self, t) -> np.ndarray:
        return self._eval(t, left=True)

    # algebra ------------------------------------------------------------

    def refine(self, points) -> "PiecewiseFunction":
        """Same function on the union of its breakpoints and ``points`` inside the domain."""
        pts = np.asarray(points, dtype=float)
        pts = pts[(pts > 0) & (pts < self.horizon)]
        grid = np.union1d(self.breakpoints, pts)
        j = self.segment_index(grid[:-1])
        return PiecewiseFunction(grid, self.A[j], self.B[j])

    def _common(self, other: "PiecewiseFunction"):
        if not np.isclose(self.horizon, other.horizon, rtol=0, atol=1e-12):
            raise DomainMismatch("integrands have different horizons")
        a = self.refine(other.breakpoints)
        b = other.refine(self.breakpoints)
        return a, b

    def __add__(self, other):
        if not isinstance(other, PiecewiseFunction):
            return NotImplemented
        a, b = self._common(other)
        return PiecewiseFunction(a.breakpoints, a.A + b.A, a.B + b.B)

    def __mul__(self, c):
        c = float(c)
        return PiecewiseFunction(self.breakpoints, c * self.A, c * self.B)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __matmul__(self, M) -> "PiecewiseFunction":
        """Right-multiply every value by the constant matrix ``M``."""
        M = _as_matrix(M)
        return PiecewiseFunction(self.breakpoints, self.A @ M, self.B @ M)

    @classmethod
    def stack(cls, functions) -> "PiecewiseFunction":
        """Stack integrands vertically (rows concatenated) on a common grid."""
        functions = list(functions)
        grid = functions[0].breakpoints
        for f in functions[1:]:
            functions[0]._common(f)
            grid = np.union1d(grid, f.breakpoints)
        refined = [f.refine(grid) for f in functions]
        return cls(refined[0].breakpoints,
                   np.concatenate([f.A for f in refined], axis=1),
                   np.concatenate([f.B for f in refined], axis=1))

    def total_variation(self, T: float | None = None) -> np.ndarray:
        """Entrywise total variation on ``[0, T]``: slopes times lengths plus breakpoint jumps."""
        T = self.horizon if T is None else float(T)
        if T > self.horizon + 1e-12:
            raise DomainMismatch(f"T={T} beyond integrand horizon {self.horizon}")
        lo = self.breakpoints[:-1]
        hi = np.minimum(self.breakpoints[1:], T)
        length = np.clip(hi - lo, 0.0, None)
        var = (np.abs(self.B) * length[:, None, None]).sum(axis=0)
        inner = self.breakpoints[1:-1]
        live = inner <= T
        if live.any():
            t = inner[live][:, None, None]
            j = np.flatnonzero(live) + 1
            jumps = (self.A[j] + t * self.B[j]) - (self.A[j - 1] + t * self.B[j - 1])
            var = var + np.abs(jumps).sum(axis=0)
        return var

    def entry(self, i: int, j: int) -> BVFunction:
        """Scalar entry ``(i, j)`` as a :class:`BVFunction`."""
        starts = self.breakpoints[:-1]
        return BVFunction(self.breakpoints, self.A[:, i, j] + starts * self.B[:, i, j], self.B[:, i, j])


@dataclass(frozen=True)
class OccupationIntegrand:
    """Path-functional integrand ``H_n(t) = offset + sum_i L_n(i; t) coefficients[i]``.

    Such an integrand is continuous, adapted and piecewise affine along each
    path, so it is realised as a :class:`PiecewiseFunction` on the path's own
    jump grid. Its deterministic limit is ``offset + t * sum_i pi_i coefficients[i]``.
    """

    offset: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        off = _as_matrix(self.offset)
        coef = np.array(self.coefficients, dtype=float)
        if coef.ndim == 2:
            coef = coef[:, None, :]
        if coef.ndim != 3 or coef.shape[1:] != off.shape:
            raise ValueError("coefficients must be one offset-shaped matrix per state")
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "coefficients", coef)

    @classmethod
    def from_spec(cls, spec: dict) -> "OccupationIntegrand":
        return cls(spec["offset"], spec["coefficients"])

    @property
    def shape(self):
        return self.offset.shape

    def realize(self, path: CtmcPath) -> PiecewiseFunction:
        if self.coefficients.shape[0] != path.d:
            raise DomainMismatch("occupation integrand has wrong number of state coefficients")
        starts = path.segment_starts
        occ = path.occupation_table
        states = path.states
        C = self.coefficients
        A = self.offset[None] + np.einsum("si,ikm->skm", occ, C) - starts[:, None, None] * C[states]
        B = C[states]
        grid = np.append(starts, path.horizon)
        if grid[-1] <= grid[-2]:
            # jump exactly at the horizon leaves an empty final cell
            grid, A, B = grid[:-1], A[:-1], B[:-1]
        return PiecewiseFunction(grid, A, B)

    def limit(self, pi, horizon: float) -> PiecewiseFunction:
        slope = np.einsum("i,ikm->km", np.asarray(pi, dtype=float), self.coefficients)
        return PiecewiseFunction.affine(self.offset, slope, horizon)


@dataclass(frozen=True)
class IntegralResult:
    value: np.ndarray
    n_jumps: int
    n_segments: int


def _resolve_T(H: PiecewiseFunction, path: CtmcPath, T):
    T = path.horizon if T is None else float(T)
    if T > H.horizon + 1e-12:
        raise DomainMismatch(f"integrand defined up to {H.horizon}, integration to {T}")
    if T > path.horizon:
        raise DomainMismatch(f"path defined up to {path.horizon}, integration to {T}")
    return T


def _cells(H: PiecewiseFunction, path: CtmcPath, T: float):
    """Cells of the merged grid on ``[0, T]``: ``(int_cell H ds, state on cell)``."""
    jt = path.jump_times[path.jump_times <= T]
    bp = H.breakpoints[H.breakpoints < T]
    grid = np.union1d(np.union1d(bp, jt), [0.0, T])
    u, v = grid[:-1], grid[1:]
    seg = H.segment_index(u)
    states = path.states[np.searchsorted(path.jump_times, u, side="right")]
    h = v - u
    mass = H.A[seg] * h[:, None, None] + H.B[seg] * (h * (u + v) / 2)[:, None, None]
    return mass, states


def _jump_sum(H: PiecewiseFunction, path: CtmcPath, T: float, column: int | None = None):
    """``sum_k H(t_k-) (e_new - e_old)`` over jumps in ``(0, T]``, or its ``column`` entry."""
    live = path.jump_times <= T
    times = path.jump_times[live]
    new = path.post_jump_states[live]
    old = path.states[:-1][live]
    k = H.shape[0]
    if times.size == 0:
        return np.zeros(k), 0
    Hl = H.left_limit(times)
    idx = np.arange(times.size)
    if column is None:
        return (Hl[idx, :, new] - Hl[idx, :, old]).sum(axis=0), int(times.size)
    src = 0 if H.shape[1] == 1 else column
    sign = (new == column).astype(float) - (old == column).astype(float)
    touched = sign != 0
    return (Hl[:, :, src] * sign[:, None]).sum(axis=0), int(touched.sum())


def integrate_wrt_occupation(H: PiecewiseFunction, path: CtmcPath, pi, sc: ScalingParams,
                             T: float | None = None) -> IntegralResult:
    """``(H^- . G_n)(T) = int_0^T H(s) n^{a/2} (K_n(s) - pi) ds``.

    ``G_n`` is absolutely continuous, so ``H(s-)`` and ``H(s)`` give the same
    integral and each cell is integrated in closed form.
    """
    T = _resolve_T(H, path, T)
    mass, states = _cells(H, path, T)
    pi = np.asarray(pi, dtype=float)
    idx = np.arange(states.size)
    at_state = mass[idx, :, states].sum(axis=0)
    centred = at_state - mass.sum(axis=0) @ pi
    return IntegralResult(sc.root_speed * centred, 0, int(states.size))


def integrate_wrt_indicator(H: PiecewiseFunction, path: CtmcPath, j: int, scale: float = 1.0,
                            T: float | None = None) -> IntegralResult:
    """``int_0^T scale * H(s-)[:, j] d 1{J(s) = j}``: a sum over the jumps of the indicator.

    A one-column ``H`` is used for any ``j``.
    """
    T = _resolve_T(H, path, T)
    value, touched = _jump_sum(H, path, T, column=j)
    return IntegralResult(scale * value, touched, 0)


def integrate_wrt_state_indicator(H: PiecewiseFunction, path: CtmcPath, scale: float = 1.0,
                                  T: float | None = None) -> IntegralResult:
    """``(H^- . scale K)(T)`` summed over all state columns."""
    T = _resolve_T(H, path, T)
    value, count = _jump_sum(H, path, T)
    return IntegralResult(scale * value, count, 0)


def integrate_state_density(H: PiecewiseFunction, path: CtmcPath, M, scale: float = 1.0,
                            T: float | None = None) -> IntegralResult:
    """``scale * int_0^T H(s) M K(s) ds`` for a constant ``d x d`` matrix ``M``."""
    T = _resolve_T(H, path, T)
    mass, states = _cells(H, path, T)
    M = np.asarray(M, dtype=float)
    value = np.einsum("ckm,cm->k", mass, M[:, states].T)
    return IntegralResult(scale * value, 0, int(states.size))


def integrate_wrt_dynkin(H: PiecewiseFunction, path: CtmcPath, Q, sc: ScalingParams,
                         T: float | None = None) -> IntegralResult:
    """``(H^- . n^{-a/2} Y_n)(T)`` as jump part minus absolutely continuous part.

    ``n^{-a/2} Y_n = n^{-a/2} (K_n - K_n(0)) - int n^{a/2} Q^T K_n ds``.
    """
    q = as_generator(Q).matrix
    T = _resolve_T(H, path, T)
    jumps, count = _jump_sum(H, path, T)
    drift = integrate_state_density(H, path, q.T, sc.root_speed, T)
    return IntegralResult(jumps / sc.root_speed - drift.value, count, drift.n_segments)


def limit_integral_covariance(H: PiecewiseFunction, Sigma, T: float | None = None) -> np.ndarray:
    """``int_0^T H(s) Sigma H(s)^T ds``, exact for piecewise-affine ``H``."""
    Sigma = np.asarray(Sigma, dtype=float)
    check_psd(Sigma, "Sigma")
    T = H.horizon if T is None else float(T)
    if T > H.horizon + 1e-12:
        raise DomainMismatch(f"integrand defined up to {H.horizon}, requested {T}")
    u = H.breakpoints[:-1]
    v = np.minimum(H.breakpoints[1:], T)
    live = v > u
    u, v, A, B = u[live], v[live], H.A[live], H.B[live]
    m1 = v - u
    m2 = (v**2 - u**2) / 2
    m3 = (v**3 - u**3) / 3
    ASA = A @ Sigma @ A.transpose(0, 2, 1)
    ASB = A @ Sigma @ B.transpose(0, 2, 1)
    BSB = B @ Sigma @ B.transpose(0, 2, 1)
    out = (m1[:, None, None] * ASA + m2[:, None, None] * (ASB + ASB.transpose(0, 2, 1))
           + m3[:, None, None] * BSB).sum(axis=0)
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class VariationCertificate:
    """Entrywise total variation of ``n^{-a/2} H`` on ``[0, T]``."""

    n: int
    alpha: float
    variation: np.ndarray
    scaled: np.ndarray

    @property
    def max_scaled(self) -> float:
        return float(self.scaled.max(initial=0.0))

    def holds(self, tol: float) -> bool:
        return self.max_scaled <= tol


def scaled_variation_condition(H: PiecewiseFunction, sc: ScalingParams,
                               T: float | None = None) -> VariationCertificate:
    var = H.total_variation(T)
    return VariationCertificate(sc.n, sc.alpha, var, var / sc.root_speed)

