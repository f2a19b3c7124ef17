"""Reference values: exact fractional Laplacian of the Gaussian and a
singular-integral quadrature oracle.

Two independent routes to the same quantity cross-validate each other and the
discrete operator.  The closed route evaluates

    (-Lap)^{alpha/2} exp(-|x|^2)
        = 2^alpha * Gamma((d+alpha)/2) / Gamma(d/2)
          * 1F1((d+alpha)/2; d/2; -|x|^2)

through the confluent hypergeometric function; the brute-force route
adaptively integrates the symmetrized hypersingular integral

    (c_{d,alpha}/2) * int [2u(x) - u(x+y) - u(x-y)] / |y|^{d+alpha} dy,

whose integrand is O(|y|^{2-d-alpha}) near the origin and therefore needs no
principal-value machinery.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .errors import (
    InvalidDim,
    InvalidRange,
    NotNested,
    OrderOutOfRange,
    PoleInB,
    QuadratureNonConvergent,
    RangeExceeded,
    TailTooLarge,
)
from .grid import GridFunction, OrderField, UniformGrid, build_grid, sample_order

__all__ = [
    "hyp1f1",
    "gaussian_frac_lap",
    "normalization_constant",
    "integral_frac_lap",
    "manufactured_rhs_case1",
]

_Z_MAX = 200.0
_SERIES_CAP = 4000


def _series_1f1(a: np.ndarray, b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Kummer series for z >= 0 elementwise; terms eventually one-signed."""
    term = np.ones_like(z)
    total = term.copy()
    scale = np.ones_like(z)
    for k in range(_SERIES_CAP):
        term = term * (a + k) / ((b + k) * (k + 1.0)) * z
        total += term
        np.maximum(scale, np.abs(total), out=scale)
        if np.all(np.abs(term) <= 1e-18 * scale):
            return total
    raise QuadratureNonConvergent("hypergeometric series did not converge")


def hyp1f1(a, b, z):
    """Confluent hypergeometric function 1F1(a; b; z) for real arguments.

    Nonnegative arguments sum the Kummer series directly; negative arguments
    first apply the Kummer transformation ``1F1(a;b;z) = e^z 1F1(b-a;b;-z)``,
    whose series has a nonnegative argument and no catastrophic cancellation.
    Relative accuracy is ~1e-12 on the supported range |z| <= 200.

    Scalars in, scalar out; arrays broadcast elementwise.

    Raises:
        PoleInB: b is zero or a negative integer.
        RangeExceeded: |z| > 200.
    """
    a_arr, b_arr, z_arr = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float),
        np.asarray(z, dtype=float))
    scalar = a_arr.ndim == 0
    a_arr, b_arr, z_arr = np.atleast_1d(a_arr, b_arr, z_arr)
    if np.any((b_arr <= 0.0) & (b_arr == np.round(b_arr))):
        raise PoleInB("lower parameter b at a nonpositive integer")
    if np.any(np.abs(z_arr) > _Z_MAX):
        raise RangeExceeded(f"|z| beyond supported range {_Z_MAX}")
    neg = z_arr < 0.0
    a_eff = np.where(neg, b_arr - a_arr, a_arr)
    out = _series_1f1(a_eff, b_arr, np.abs(z_arr))
    out = np.where(neg, np.exp(z_arr) * out, out)
    return float(out[0]) if scalar else out


def gaussian_frac_lap(x, alpha, d: int):
    """Exact ``(-Lap)^{alpha/2} exp(-|x|^2)`` at point(s) x in dimension d.

    ``x`` is a point of shape (d,) (scalar in 1D) or a batch (n, d); ``alpha``
    may be a scalar or per-point array.  Valid for alpha in (0, 2]; alpha = 2
    reproduces the classical negative Laplacian of the Gaussian.
    """
    d = int(d)
    if d not in (1, 2, 3):
        raise InvalidDim(f"dimension must be 1, 2 or 3, got {d}")
    pts = np.asarray(x, dtype=float)
    if pts.ndim <= 1 and d == 1:
        r2 = pts**2
    elif pts.ndim == 1:
        if pts.size != d:
            raise InvalidDim(f"point has {pts.size} components, expected {d}")
        r2 = np.sum(pts**2)
    else:
        if pts.shape[-1] != d:
            raise InvalidDim(f"points have {pts.shape[-1]} components, expected {d}")
        r2 = np.sum(pts**2, axis=-1)
    al = np.broadcast_to(np.asarray(alpha, dtype=float), r2.shape).copy()
    if np.any(al <= 0.0) or np.any(al > 2.0):
        raise OrderOutOfRange("order outside (0, 2]")
    lg = np.vectorize(math.lgamma)
    front = 2.0**al * np.exp(lg((d + al) / 2.0) - math.lgamma(d / 2.0))
    out = np.asarray(front * hyp1f1((d + al) / 2.0, d / 2.0, -r2))
    return float(out) if out.ndim == 0 else out


def normalization_constant(d: int, alpha: float) -> float:
    """Constant ``c_{d,alpha} = 2^(alpha-1) alpha Gamma((alpha+d)/2) /
    (pi^(d/2) Gamma(1-alpha/2))``, positive on alpha in (0, 2).

    Evaluated through log-Gamma so the alpha -> 2 pole surfaces as an explicit
    error rather than overflow.

    Raises:
        OrderOutOfRange: alpha outside the open interval (0, 2).
    """
    alpha = float(alpha)
    if not (0.0 < alpha < 2.0):
        raise OrderOutOfRange(
            f"normalization constant defined on (0, 2); got alpha = {alpha}"
        )
    logc = ((alpha - 1.0) * math.log(2.0)
            + math.lgamma((alpha + d) / 2.0)
            - (d / 2.0) * math.log(math.pi)
            - math.lgamma(1.0 - alpha / 2.0))
    return alpha * math.exp(logc)


def _sphere_directions(d: int, n_theta: int, n_polar: int):
    """Quadrature directions and weights on the unit sphere (full measure)."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        th = 2.0 * np.pi * np.arange(n_theta) / n_theta
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        w = np.full(n_theta, 2.0 * np.pi / n_theta)
        return dirs, w
    # d == 3: trapezoid in azimuth x Gauss-Legendre in cos(polar)
    nodes, glw = np.polynomial.legendre.leggauss(n_polar)
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta
    ct, cc = np.meshgrid(th, nodes, indexing="ij")
    st = np.sqrt(1.0 - cc**2)
    dirs = np.stack([st * np.cos(ct), st * np.sin(ct), cc], axis=-1).reshape(-1, 3)
    w = (np.full(n_theta, 2.0 * np.pi / n_theta)[:, None] * glw[None, :]).ravel()
    return dirs, w


_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def integral_frac_lap(u, x, alpha: float, d: int,
                      cutoff_r: float | None = None, tol: float = 1e-8,
                      u_inf: float | None = None,
                      n_angle: int = 96) -> float:
    """Fractional Laplacian of a smooth function by direct quadrature.

    ``u`` maps points of shape (n, d) to values (n,).  The symmetrized
    integrand is integrated adaptively over |y| <= R in polar/spherical
    coordinates (a power substitution regularizes the residual |y|^(1-alpha)
    endpoint behavior); beyond R the function is replaced by its far-field
    constant ``u_inf`` (estimated from probe spheres when not given), turning
    the tail into the analytic term ``c * (u(x)-u_inf) * S_d * R^-alpha / alpha``.

    Raises:
        TailTooLarge: far-field deviation from u_inf too big for ``tol``.
        QuadratureNonConvergent: adaptive quadrature error above ``tol``.
        OrderOutOfRange: alpha outside (0, 2) (the constant is singular at 2).
    """
    d = int(d)
    if d not in (1, 2, 3):
        raise InvalidDim(f"dimension must be 1, 2 or 3, got {d}")
    alpha = float(alpha)
    c = normalization_constant(d, alpha)
    x0 = np.atleast_1d(np.asarray(x, dtype=float)).reshape(d)
    ux = float(np.asarray(u(x0[None, :])).ravel()[0])
    radius = float(cutoff_r) if cutoff_r is not None else float(np.linalg.norm(x0)) + 8.0

    dirs, wts = _sphere_directions(d, n_angle, max(8, n_angle // 4))

    def angular(rho: float) -> float:
        plus = np.asarray(u(x0[None, :] + rho * dirs)).ravel()
        minus = np.asarray(u(x0[None, :] - rho * dirs)).ravel()
        return float(np.dot(wts, 2.0 * ux - plus - minus))

    # far-field constant and deviation from it on probe spheres
    probe = []
    for fac in (1.0, 1.5, 2.0, 4.0):
        probe.append(np.asarray(u(x0[None, :] + fac * radius * dirs)).ravel())
        probe.append(np.asarray(u(x0[None, :] - fac * radius * dirs)).ravel())
    probe = np.concatenate(probe)
    if u_inf is None:
        u_inf = float(np.median(probe))
    far_dev = float(np.abs(probe - u_inf).max())
    area = _SPHERE_AREA[d]
    tail_bound = c * area * far_dev * radius ** (-alpha) / alpha
    if tail_bound > max(tol, 1e-15):
        raise TailTooLarge(
            f"far-field residual {tail_bound:.2e} exceeds tol {tol:.2e};"
            " increase cutoff_r"
        )

    rho0 = min(1.0, radius / 2.0)
    p = 2.0 - alpha

    # A(rho) = O(rho^2) near zero, but evaluating it there in floats is pure
    # cancellation noise amplified by rho^-2; below rho_c the quadratic
    # profile is frozen from its value at rho_c.
    rho_c = 3e-4
    s_floor = angular(rho_c) / rho_c**2

    # rho = s^(1/p) turns the rho^(1-alpha) endpoint behavior of the
    # symmetrized integrand into a bounded one: A(rho) rho^(-1-alpha) drho
    # = [A(rho) rho^(-2)] / p ds.
    def inner(s: float) -> float:
        rho = s ** (1.0 / p)
        if rho < rho_c:
            return s_floor / p
        return angular(rho) * rho**-2.0 / p

    val1, err1 = quad(inner, 0.0, rho0**p, epsabs=tol / 4.0, epsrel=1e-11,
                      limit=200)
    val2, err2 = quad(lambda rho: angular(rho) * rho ** (-1.0 - alpha),
                      rho0, radius, epsabs=tol / 4.0, epsrel=1e-11, limit=200)
    if err1 + err2 > max(tol, 1e-13 * (abs(val1) + abs(val2))):
        raise QuadratureNonConvergent(
            f"quadrature error estimate {err1 + err2:.2e} above tol {tol:.2e}"
        )
    tail = c * (ux - u_inf) * area * radius ** (-alpha) / alpha
    return c / 2.0 * (val1 + val2) + tail


def manufactured_rhs_case1(grid: UniformGrid, field: OrderField, beta: float,
                           h_ref: float, reaction: float = 1.0,
                           rank: int | None = None,
                           quadrature_m: int | None = None) -> GridFunction:
    """Right-hand side for the known-solution elliptic benchmark.

    The target solution is ``u = prod_p (1 - x_p^2)^beta`` on the box; the
    data is produced by applying the discrete operator (plus the reaction
    term) on a fine reference grid of step ``h_ref`` and sampling the result
    at the coarse nodes.  The coarse grid must be nested in the reference
    grid so restriction is exact sampling.

    Raises:
        NotNested: coarse nodes are not a subset of the reference nodes.
        InvalidRange: beta < 2.
    """
    from .operator import VariableOrderOperator  # deferred: heavy module

    if beta < 2.0:
        raise InvalidRange(f"beta must be >= 2, got {beta}")
    ratio_f = grid.h / h_ref
    ratio = int(round(ratio_f))
    if ratio < 1 or abs(ratio_f - ratio) > 1e-9 * ratio_f:
        raise NotNested(f"coarse step {grid.h} is not a multiple of {h_ref}")
    n_ref = []
    for p in range(grid.dim):
        span = grid.upper[p] - grid.lower[p]
        n_float = span / h_ref - 1.0
        n = int(round(n_float))
        if abs(n_float - n) > 1e-9:
            raise NotNested(f"reference step {h_ref} does not fit the box")
        n_ref.append(n)
    fine = build_grid(grid.dim, grid.lower, grid.upper, tuple(n_ref))

    pts = fine.points()
    u_fine = np.prod(1.0 - pts**2, axis=-1) ** float(beta)
    sampled = sample_order(field, fine)
    op = VariableOrderOperator(fine, sampled, mode="fast", rank=rank,
                               quadrature_m=quadrature_m)
    f_fine = op._apply_flat(u_fine) + reaction * u_fine

    picks = tuple(slice(ratio - 1, None, ratio) for _ in range(grid.dim))
    f_coarse = f_fine.reshape(fine.shape)[picks]
    if f_coarse.shape != grid.shape:
        raise NotNested(
            f"restriction shape {f_coarse.shape} != coarse shape {grid.shape}"
        )
    return GridFunction(grid, f_coarse.ravel())
