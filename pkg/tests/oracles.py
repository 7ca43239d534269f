"""Independent reference computations used only by the tests."""

import numpy as np
from scipy.linalg import expm

from ctmc_occupation.path_sim import dynkin_martingale


def truncated_deviation_integral(Q, pi, tail_tol=1e-8):
    """``int_0^T* (exp(Qs) - Pi) ds`` with ``T*`` doubled until the integrand is below ``tail_tol``.

    The finite integral of the exponential is read off the block exponential
    ``exp([[Q, I], [0, 0]] T*)``.
    """
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[0]
    Pi = np.outer(np.ones(d), pi)
    horizon = 1.0
    while np.abs(expm(Q * horizon) - Pi).max() >= tail_tol:
        horizon *= 2.0
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = Q
    block[:d, d:] = np.eye(d)
    integral = expm(block * horizon)[:d, d:]
    return integral - Pi * horizon


def riemann_occupation_integral(H, path, pi, sc, step=1e-6):
    """Left-endpoint Riemann sum of ``int H(s) n^{a/2} (K(s) - pi) ds``."""
    T = path.horizon
    s = np.arange(0.0, T, step)
    K = np.eye(path.d)[path.state_at(s)] - np.asarray(pi)
    vals = H(s)
    return sc.root_speed * step * np.einsum("tkm,tm->k", vals, K)


def dynkin_integral_by_parts(H, path, Q, sc):
    """``int H(s-) d(n^{-a/2} Y)(s)`` via integration by parts.

    ``H(T)Y(T) - H(0)Y(0) - sum_b Y(b) dH(b) - int Y(s) H'(s) ds``; ``Y`` is
    affine between jumps so three-point Gauss-Legendre is exact on each cell.
    """
    T = path.horizon
    scale = 1.0 / sc.root_speed

    def Y(t):
        return scale * dynkin_martingale(path, Q, sc, t)

    total = H(T) @ Y(T)
    inner = H.breakpoints[1:-1]
    for b in inner:
        total = total - (H(b) - H.left_limit(b)) @ Y(b)
    grid = np.union1d(np.union1d(H.breakpoints, path.jump_times), [T])
    nodes, weights = np.polynomial.legendre.leggauss(3)
    for u, v in zip(grid[:-1], grid[1:]):
        mid, half = (u + v) / 2, (v - u) / 2
        slope = H.B[H.segment_index(mid)]
        for x, w in zip(nodes, weights):
            s = mid + half * x
            # Y is right-continuous; evaluate inside the open cell
            total = total - half * w * slope @ Y(s)
    return total


def summed_occupation(path, t):
    """``L(t)`` by summing interval lengths, without the cached table."""
    out = np.zeros(path.d)
    starts = np.append(path.segment_starts, np.inf)
    for i, state in enumerate(path.states):
        out[state] += max(0.0, min(starts[i + 1], t) - starts[i])
    return out

