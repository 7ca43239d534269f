"""Stationary distribution, deviation/fundamental/ergodic matrices and limit covariances.

All objects are computed with dense linear algebra. With ``1`` the all-ones
vector and ``P = 1 pi^T``:

* ``F = (P - Q)^{-1}`` is the fundamental matrix and ``D = F - P`` the
  deviation matrix,
* ``SigmaY = -(Q^T diag(pi) + diag(pi) Q)`` is the rate of the limiting
  quadratic variation of the scaled Dynkin martingale,
* ``SigmaX = diag(pi) D + D^T diag(pi)`` is the rate for the scaled, centred
  occupation measure.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import NotAGenerator, NotPSD, Reducible, SingularSystem

COND_LIMIT = 1e12
PSD_RTOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GeneratorMatrix:
    """A validated irreducible rate matrix with exactly zero row sums."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.matrix)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def as_generator(Q) -> GeneratorMatrix:
    """Pass a :class:`GeneratorMatrix` through; validate anything else."""
    if isinstance(Q, GeneratorMatrix):
        return Q
    return validate_generator(Q)


def _reachable(adj: np.ndarray, start: int = 0) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adj[i] & ~seen):
            seen[j] = True
            queue.append(j)
    return seen


def is_strongly_connected(adj: np.ndarray) -> bool:
    """Forward and backward breadth-first search from state 0."""
    adj = np.asarray(adj, dtype=bool)
    return bool(_reachable(adj).all() and _reachable(adj.T).all())


def validate_generator(raw, tol: float | None = None) -> GeneratorMatrix:
    """Check a raw rate matrix and return it with its diagonal recomputed.

    Parameters
    ----------
    raw : array_like, shape (d, d)
    tol : float, optional
        Allowed absolute row-sum error. Defaults to ``1e-9 * max|Q_ij|``.

    Raises
    ------
    NotAGenerator
        Non-square input, non-finite entries, a negative off-diagonal entry or
        a row sum larger than ``tol`` in magnitude.
    Reducible
        The digraph ``{i -> j : Q_ij > 0}`` is not strongly connected.
    """
    q = np.array(raw, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
        raise NotAGenerator(f"generator must be a non-empty square matrix, got shape {q.shape}")
    if not np.isfinite(q).all():
        raise NotAGenerator("generator has non-finite entries")
    d = q.shape[0]
    off = ~np.eye(d, dtype=bool)
    if (q[off] < 0).any():
        i, j = np.argwhere((q < 0) & off)[0]
        raise NotAGenerator(f"negative off-diagonal rate Q[{i},{j}] = {q[i, j]}")
    if tol is None:
        tol = 1e-9 * float(np.abs(q).max(initial=0.0))
    sums = q.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums) > tol)
    if bad.size:
        i = bad[0]
        raise NotAGenerator(f"row {i} sums to {sums[i]} (tolerance {tol})")
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    if not is_strongly_connected(q > 0) and d > 1:
        raise Reducible("transition graph is not strongly connected")
    return GeneratorMatrix(q)


def _guarded_solve(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystem(f"{what}: condition number {cond:.3g} exceeds {COND_LIMIT:.0e}")
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"{what}: {exc}") from exc


def stationary(Q) -> np.ndarray:
    """Solve ``pi^T Q = 0`` with ``sum(pi) = 1``.

    The last balance equation is replaced by the normalisation. The result is
    strictly positive for an irreducible ``Q``; anything else is reported as
    :class:`SingularSystem`.
    """
    q = as_generator(Q).matrix
    d = q.shape[0]
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(d)
    b[-1] = 1.0
    pi = _guarded_solve(a, b, "stationary distribution")
    if (pi <= 0).any():
        raise SingularSystem(f"stationary solve returned non-positive entries: {pi}")
    return _frozen(pi / pi.sum())


def deviation_matrix(Q, pi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(D, F, Pi)`` with ``F = (Pi - Q)^{-1}`` and ``D = F - Pi``."""
    q = as_generator(Q).matrix
    pi = np.asarray(pi, dtype=float)
    d = q.shape[0]
    ergodic = np.outer(np.ones(d), pi)
    fundamental = _guarded_solve(ergodic - q, np.eye(d), "fundamental matrix")
    dev = fundamental - ergodic
    return _frozen(dev), _frozen(fundamental), _frozen(ergodic)


def check_psd(m: np.ndarray, name: str = "matrix", rtol: float = PSD_RTOL) -> None:
    """Raise :class:`NotPSD` if ``m`` is asymmetric or has an eigenvalue below ``-rtol * lambda_max``."""
    m = np.asarray(m, dtype=float)
    scale = float(np.abs(m).max(initial=0.0))
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise NotPSD(f"{name} is not symmetric")
    eig = np.linalg.eigvalsh(0.5 * (m + m.T))
    if eig.size and eig[0] < -rtol * max(eig[-1], 0.0):
        raise NotPSD(f"{name} has eigenvalue {eig[0]:.3g} (largest {eig[-1]:.3g})")


def limit_covariances(Q, pi, D, F=None) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic-variation rates ``(SigmaY, SigmaX)`` of the two Brownian limits.

    ``F`` is accepted for signature symmetry with the identity checks; the
    closed forms only need ``Q``, ``pi`` and ``D``.
    """
    q = as_generator(Q).matrix
    dpi = np.diag(np.asarray(pi, dtype=float))
    D = np.asarray(D, dtype=float)
    sigma_y = -(q.T @ dpi + dpi @ q)
    sigma_x = dpi @ D + D.T @ dpi
    sigma_y = 0.5 * (sigma_y + sigma_y.T)
    sigma_x = 0.5 * (sigma_x + sigma_x.T)
    check_psd(sigma_y, "SigmaY")
    check_psd(sigma_x, "SigmaX")
    return _frozen(sigma_y), _frozen(sigma_x)


@dataclass(frozen=True)
class ChainInvariants:
    pi: np.ndarray
    Pi: np.ndarray
    D: np.ndarray
    F: np.ndarray
    SigmaY: np.ndarray
    SigmaX: np.ndarray

    @classmethod
    def from_generator(cls, Q) -> "ChainInvariants":
        gen = as_generator(Q)
        pi = stationary(gen)
        D, F, Pi = deviation_matrix(gen, pi)
        sigma_y, sigma_x = limit_covariances(gen, pi, D, F)
        return cls(pi=pi, Pi=Pi, D=D, F=F, SigmaY=sigma_y, SigmaX=sigma_x)


def chain_invariants(Q) -> ChainInvariants:
    return ChainInvariants.from_generator(Q)


IDENTITY_NAMES = ("QF", "FQ", "QD", "DQ", "piD", "quadvar", "D1", "piQ")


@dataclass(frozen=True)
class IdentityReport:
    """Absolute residuals of the deviation-matrix identities.

    ``scale = ||Q||_2 * ||F||_2**2``; an identity fails when
    ``residual / scale > tol``.
    """

    residuals: dict
    scale: float
    tol: float
    failures: tuple = field(default=())

    @property
    def relative(self) -> dict:
        return {k: v / self.scale for k, v in self.residuals.items()}

    @property
    def max_relative(self) -> float:
        return max(self.relative.values())

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_identities(Q, inv: ChainInvariants, tol: float = 1e-8) -> IdentityReport:
    q = as_generator(Q).matrix
    d = q.shape[0]
    pi, Pi, D, F = inv.pi, inv.Pi, inv.D, inv.F
    eye = np.eye(d)
    dpi = np.diag(pi)

    def mx(a):
        return float(np.abs(a).max(initial=0.0))

    target = Pi - eye
    residuals = {
        "QF": mx(q @ F - target),
        "FQ": mx(F @ q - target),
        "QD": mx(q @ D - target),
        "DQ": mx(D @ q - target),
        "piD": mx(pi @ D),
        "quadvar": mx(F.T @ (q.T @ dpi + dpi @ q) @ F + (dpi @ D + D.T @ dpi)),
        "D1": mx(D @ np.ones(d)),
        "piQ": mx(pi @ q),
    }
    scale = float(np.linalg.norm(q, 2) * np.linalg.norm(F, 2) ** 2) or 1.0
    failures = tuple(k for k, v in residuals.items() if v / scale > tol)
    return IdentityReport(residuals=residuals, scale=scale, tol=tol, failures=failures)


def random_irreducible_generator(d: int, seed: int, density: float = 0.5,
                                 max_rate: float = 5.0) -> GeneratorMatrix:
    """Random generator guaranteed irreducible by a random Hamiltonian cycle of positive rates."""
    rng = np.random.default_rng(int(seed))
    q = np.where(rng.random((d, d)) < density, rng.uniform(0.05, max_rate, (d, d)), 0.0)
    order = rng.permutation(d)
    for a, b in zip(order, np.roll(order, -1)):
        if a != b:
            q[a, b] = rng.uniform(0.05, max_rate)
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return validate_generator(q)
