"""Krylov solver and time steppers for PDEs with the variable-order operator.

The elliptic scheme solves ``(-Lap_h)^{alpha_j/2} u_j + b_j u_j = f_j`` on the
interior nodes with the extended zero condition outside; nodes excluded by an
embedding mask are pinned to zero through identity rows, keeping the system
square and nonsingular.  Linear systems are solved matrix-free by BiCGSTAB
with a zero initial guess by default.

A requested tolerance below double-precision reach is treated as "iterate to
stagnation": the solver stops once the relative residual is at ``tol`` or no
improvement has been seen for a fixed window of iterations, and returns the
best iterate either way.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import GridMismatch, InvalidRange, SolverFailure
from .grid import DomainMask, GridFunction
from .operator import VariableOrderOperator

__all__ = [
    "KrylovConfig",
    "KrylovResult",
    "bicgstab",
    "EllipticProblem",
    "SolveOutcome",
    "solve_elliptic",
    "TimeStepper",
    "step_crank_nicolson",
    "step_allen_cahn_three_level",
    "evolve",
    "EvolveRecord",
    "write_residual_csv",
    "write_observer_csv",
]

LinearMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class KrylovConfig:
    """BiCGSTAB controls; defaults reproduce iterate-to-stagnation behavior."""

    tol: float = 1e-14
    max_iter: int = 5000
    stagnation_window: int = 25
    max_restarts: int = 8
    accept_relres: float = 1e-6
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.tol <= 0.0:
            raise InvalidRange("tolerance must be positive")
        if self.max_iter < 1:
            raise InvalidRange("max_iter must be >= 1")


@dataclass
class KrylovResult:
    x: np.ndarray
    iterations: int
    relres: float
    status: str                  # converged | stagnated | max_iter | breakdown
    residuals: list[float] = field(default_factory=list)
    accept_relres: float = 1e-6

    @property
    def ok(self) -> bool:
        return self.status == "converged" or self.relres <= self.accept_relres


def bicgstab(apply_a: LinearMap, rhs: np.ndarray,
             config: KrylovConfig | None = None) -> KrylovResult:
    """Unpreconditioned BiCGSTAB for a general linear map.

    Iterations are counted in half-steps: every full sweep applies the
    operator twice and produces two iterates, and the count increments at
    each, the usual convention for reported BiCGSTAB iteration numbers.

    Stops on relative residual <= tol, stagnation (no improvement of the best
    residual over ``stagnation_window`` consecutive full sweeps, after
    ``max_restarts`` fresh Krylov cycles from the best iterate have been
    spent), breakdown of the recurrence (rho or omega numerically zero,
    reported distinctly), or the sweep cap.  Always returns the best iterate
    seen.

    Raises:
        SolverFailure: a NaN or infinity appeared in the iteration.
    """
    cfg = config or KrylovConfig()
    b = np.asarray(rhs, dtype=float).ravel()
    n = b.size
    x = np.zeros(n) if cfg.x0 is None else np.array(cfg.x0, dtype=float).ravel()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return KrylovResult(x=np.zeros(n), iterations=0, relres=0.0,
                            status="converged", residuals=[0.0],
                            accept_relres=cfg.accept_relres)
    r = b - apply_a(x) if cfg.x0 is not None else b.copy()
    r_hat = r.copy()
    rho_old = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)
    relres = float(np.linalg.norm(r)) / b_norm
    residuals = [relres]
    best_x, best_res, best_half = x.copy(), relres, 0
    if relres <= cfg.tol:
        return KrylovResult(x=x, iterations=0, relres=relres,
                            status="converged", residuals=residuals,
                            accept_relres=cfg.accept_relres)
    status = "max_iter"
    half = 0
    restarts = 0
    cycle_anchor = 0
    for it in range(1, cfg.max_iter + 1):
        rho = float(r_hat @ r)
        if abs(rho) < 1e-300:
            status = "breakdown"
            break
        beta = (rho / rho_old) * (alpha / omega)
        p = r + beta * (p - omega * v)
        v = apply_a(p)
        denom = float(r_hat @ v)
        if abs(denom) < 1e-300:
            status = "breakdown"
            break
        alpha = rho / denom
        s = x + alpha * p          # half-step iterate
        res_half = r - alpha * v
        half = 2 * it - 1
        half_norm = float(np.linalg.norm(res_half)) / b_norm
        residuals.append(half_norm)
        if not math.isfinite(half_norm):
            raise SolverFailure("NaN detected in BiCGSTAB iteration")
        if half_norm < best_res:
            best_x, best_res, best_half = s.copy(), half_norm, half
        if half_norm <= cfg.tol:
            x, relres = s, half_norm
            status = "converged"
            break
        t = apply_a(res_half)
        tt = float(t @ t)
        if tt == 0.0:
            status = "breakdown"
            break
        omega = float(t @ res_half) / tt
        if omega == 0.0:
            status = "breakdown"
            break
        x = s + omega * res_half
        r = res_half - omega * t
        rho_old = rho
        half = 2 * it
        relres = float(np.linalg.norm(r)) / b_norm
        residuals.append(relres)
        if not math.isfinite(relres):
            raise SolverFailure("NaN detected in BiCGSTAB iteration")
        if relres < best_res:
            best_x, best_res, best_half = x.copy(), relres, half
        if relres <= cfg.tol:
            status = "converged"
            break
        # the initial transient can wander above the starting residual for a
        # long stretch on stiff systems; only call it stagnation once some
        # progress has been made (or after a much longer leash if none)
        leash = 2 * cfg.stagnation_window
        if best_res >= 0.999 * residuals[0]:
            leash *= 8
        if half - max(best_half, cycle_anchor) >= leash:
            if restarts < cfg.max_restarts:
                # plateau: restart from the best iterate with a fresh shadow
                # residual and Krylov space; the recomputed true residual
                # resets the bar (the recursive one can drift optimistic,
                # which would block all further improvement)
                restarts += 1
                cycle_anchor = half
                x = best_x.copy()
                r = b - apply_a(x)
                r_hat = r.copy()
                rho_old = alpha = omega = 1.0
                v = np.zeros(n)
                p = np.zeros(n)
                relres = float(np.linalg.norm(r)) / b_norm
                best_x, best_res, best_half = x.copy(), relres, half
                if relres <= cfg.tol:
                    status = "converged"
                    break
                continue
            status = "stagnated"
            break
    if status == "converged":
        return KrylovResult(x=x, iterations=half, relres=relres, status=status,
                            residuals=residuals,
                            accept_relres=cfg.accept_relres)
    return KrylovResult(x=best_x, iterations=best_half, relres=best_res,
                        status=status, residuals=residuals,
                        accept_relres=cfg.accept_relres)


@dataclass(frozen=True)
class EllipticProblem:
    """``(-Lap_h)^{alpha(x)/2} u + b(x) u = f`` with nonnegative reaction b."""

    operator: VariableOrderOperator
    f: GridFunction
    b: GridFunction | None = None

    def __post_init__(self):
        if self.f.grid.shape != self.operator.grid.shape:
            raise GridMismatch("rhs grid does not match operator grid")
        if self.b is not None:
            if self.b.grid.shape != self.operator.grid.shape:
                raise GridMismatch("reaction grid does not match operator grid")
            if np.any(self.b.values < 0.0):
                raise InvalidRange("reaction coefficient must be nonnegative")


@dataclass
class SolveOutcome:
    u: GridFunction
    krylov: KrylovResult


def _pinned_map(op: VariableOrderOperator, diag: np.ndarray | None,
                scale_a: float = 1.0, shift: float = 0.0) -> LinearMap:
    """Linear map u -> shift*u + scale_a*(A u) + diag*u, identity on masked rows."""
    mask = op.mask

    def apply_a(u: np.ndarray) -> np.ndarray:
        out = scale_a * op._apply_flat(u)
        if diag is not None:
            out += diag * u
        if shift != 0.0:
            out = out + shift * u
        if mask is not None:
            out[~mask.inside] = u[~mask.inside]
        return out

    return apply_a


def _masked_rhs(rhs: np.ndarray, mask: DomainMask | None) -> np.ndarray:
    if mask is None:
        return rhs
    out = rhs.copy()
    out[~mask.inside] = 0.0
    return out


def solve_elliptic(problem: EllipticProblem,
                   config: KrylovConfig | None = None) -> SolveOutcome:
    """Solve the elliptic scheme by BiCGSTAB; masked nodes stay at zero.

    Raises:
        SolverFailure: the Krylov iteration broke down or left a residual
            above 1e-8 relative.
    """
    op = problem.operator
    diag = problem.b.values if problem.b is not None else None
    apply_a = _pinned_map(op, diag)
    rhs = _masked_rhs(problem.f.values, op.mask)
    result = bicgstab(apply_a, rhs, config)
    if not result.ok:
        raise SolverFailure(
            f"elliptic solve ended with status {result.status}, "
            f"relative residual {result.relres:.3e}"
        )
    return SolveOutcome(u=GridFunction(op.grid, result.x), krylov=result)


@dataclass(frozen=True)
class TimeStepper:
    """Time-stepping configuration.

    ``scheme`` is "crank_nicolson" or "allen_cahn" (the three-level linearized
    scheme; ``kappa`` is its interface width, unused otherwise).  ``source``
    maps (points, t) to values; ``diffusion`` scales the operator.
    """

    scheme: str = "crank_nicolson"
    dt: float = 1e-2
    t_final: float = 1.0
    kappa: float = 0.01
    diffusion: float = 1.0
    source: Callable[[np.ndarray, float], np.ndarray] | None = None
    krylov: KrylovConfig = field(default_factory=KrylovConfig)

    def __post_init__(self):
        if self.scheme not in ("crank_nicolson", "allen_cahn"):
            raise InvalidRange(f"unknown scheme {self.scheme!r}")
        if self.dt <= 0.0 or self.t_final < self.dt:
            raise InvalidRange("need dt > 0 and t_final >= dt")
        if self.scheme == "allen_cahn" and self.kappa <= 0.0:
            raise InvalidRange("Allen-Cahn needs kappa > 0")


def step_crank_nicolson(u_prev: GridFunction, stepper: TimeStepper,
                        operator: VariableOrderOperator,
                        t: float = 0.0,
                        b: GridFunction | None = None) -> tuple[GridFunction, KrylovResult]:
    """One Crank-Nicolson step of ``u_t + L u = f`` with L = diffusion*A + b.

    Solves ``(I + dt/2 L) u_next = (I - dt/2 L) u_prev + dt f(t + dt/2)``.
    """
    op = operator
    dt = stepper.dt
    diag = dt / 2.0 * b.values if b is not None else None
    lhs = _pinned_map(op, diag, scale_a=stepper.diffusion * dt / 2.0, shift=1.0)
    explicit = _pinned_map(op, -diag if diag is not None else None,
                           scale_a=-stepper.diffusion * dt / 2.0, shift=1.0)
    rhs = explicit(u_prev.values)
    if op.mask is not None:
        rhs[~op.mask.inside] = 0.0
    if stepper.source is not None:
        rhs = rhs + dt * np.asarray(
            stepper.source(op.grid.points(), t + dt / 2.0), dtype=float).ravel()
        rhs = _masked_rhs(rhs, op.mask)
    result = bicgstab(lhs, rhs, stepper.krylov)
    if not result.ok:
        raise SolverFailure(
            f"Crank-Nicolson step failed: {result.status}, relres {result.relres:.3e}"
        )
    return GridFunction(op.grid, result.x), result


def step_allen_cahn_three_level(u_nm1: GridFunction, u_n: GridFunction,
                                stepper: TimeStepper,
                                operator: VariableOrderOperator
                                ) -> tuple[GridFunction, KrylovResult]:
    """One step of the three-level linearized phase-field scheme.

    All arguments are in the shifted variable (physical phase + 1), which
    carries the homogeneous exterior condition.  The cubic is linearized
    about the middle level, u^3 ~ (u^n)^2 * u-averaged, while the mild -u
    part stays explicit; with mu = dt/kappa^2 and q = (u^n)^2 the update
    solves

        (I + dt A + mu diag(q)) w^{n+1}
            = (I - dt A - mu diag(q)) w^{n-1} + 2 mu (q + u^n).

    The nonnegative implicit factor q keeps the scheme stable at dt ~
    kappa^2; fully explicit or fully averaged treatments of the double-well
    term are leapfrog-unstable there.
    """
    op = operator
    dt = stepper.dt
    mu = dt / stepper.kappa**2
    phys = u_n.values - 1.0
    q = phys**2
    lhs = _pinned_map(op, mu * q, scale_a=stepper.diffusion * dt, shift=1.0)
    rhs = (u_nm1.values
           - dt * stepper.diffusion * op._apply_flat(u_nm1.values)
           - mu * q * u_nm1.values
           + 2.0 * mu * (q + phys))
    rhs = _masked_rhs(rhs, op.mask)
    result = bicgstab(lhs, rhs, stepper.krylov)
    if not result.ok:
        raise SolverFailure(
            f"three-level step failed: {result.status}, relres {result.relres:.3e}"
        )
    return GridFunction(op.grid, result.x), result


def positive_component_count(u: GridFunction) -> int:
    """Connected components of the region {u > 0} (orthogonal connectivity)."""
    _, count = ndimage.label(u.values_nd > 0.0)
    return int(count)


@dataclass
class ObserverRow:
    step: int
    t: float
    max_norm: float
    l2: float
    mass: float
    components: int
    iterations: int
    seconds: float


@dataclass
class EvolveRecord:
    rows: list[ObserverRow]
    final: GridFunction

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]


def _observe(u: GridFunction, step: int, t: float, iterations: int,
             seconds: float) -> ObserverRow:
    h_d = u.grid.h ** u.grid.dim
    vals = u.values
    return ObserverRow(step=step, t=t,
                       max_norm=float(np.abs(vals).max()),
                       l2=float(np.sqrt(h_d * np.sum(vals**2))),
                       mass=float(h_d * np.sum(vals)),
                       components=positive_component_count(u),
                       iterations=iterations, seconds=seconds)


def evolve(stepper: TimeStepper, operator: VariableOrderOperator,
           u0: GridFunction, frame_dir=None, frame_every: int = 0,
           stop_when=None) -> EvolveRecord:
    """March to t_final recording observers each step.

    ``stop_when`` is an optional predicate on the latest observer row; the
    march ends early once it returns True.

    For the phase-field scheme ``u0`` and all recorded states are physical
    (phase in [-1, 1]); the shifted variable is managed internally and the
    first step is bootstrapped by one Crank-Nicolson step with the
    nonlinearity taken explicitly.  Frames, when requested, are written as
    flat row-major text arrays, one file per step.
    """
    if u0.grid.shape != operator.grid.shape:
        raise GridMismatch("initial data grid does not match operator grid")
    n_steps = int(round(stepper.t_final / stepper.dt))
    rows = [_observe(u0, 0, 0.0, 0, 0.0)]
    _dump_frame(frame_dir, frame_every, 0, u0)

    if stepper.scheme == "crank_nicolson":
        u = u0
        for k in range(1, n_steps + 1):
            t0 = time.perf_counter()
            u, res = step_crank_nicolson(u, stepper, operator, t=(k - 1) * stepper.dt)
            rows.append(_observe(u, k, k * stepper.dt, res.iterations,
                                 time.perf_counter() - t0))
            _dump_frame(frame_dir, frame_every, k, u)
            if stop_when is not None and stop_when(rows[-1]):
                break
        return EvolveRecord(rows=rows, final=u)

    # three-level phase-field scheme in the shifted variable
    kap2 = stepper.kappa**2
    w_prev = GridFunction(operator.grid, u0.values + 1.0)
    t0 = time.perf_counter()
    lhs = _pinned_map(operator, None, scale_a=stepper.diffusion * stepper.dt / 2.0,
                      shift=1.0)
    phys = w_prev.values - 1.0
    rhs = (w_prev.values
           - stepper.dt / 2.0 * stepper.diffusion * operator._apply_flat(w_prev.values)
           - (stepper.dt / kap2) * (phys**3 - phys))
    rhs = _masked_rhs(rhs, operator.mask)
    res = bicgstab(lhs, rhs, stepper.krylov)
    if not res.ok:
        raise SolverFailure(f"bootstrap step failed: {res.status}")
    w_cur = GridFunction(operator.grid, res.x)
    u_phys = GridFunction(operator.grid, w_cur.values - 1.0)
    rows.append(_observe(u_phys, 1, stepper.dt, res.iterations,
                         time.perf_counter() - t0))
    _dump_frame(frame_dir, frame_every, 1, u_phys)
    for k in range(2, n_steps + 1):
        t0 = time.perf_counter()
        w_next, res = step_allen_cahn_three_level(w_prev, w_cur, stepper, operator)
        w_prev, w_cur = w_cur, w_next
        u_phys = GridFunction(operator.grid, w_cur.values - 1.0)
        rows.append(_observe(u_phys, k, k * stepper.dt, res.iterations,
                             time.perf_counter() - t0))
        _dump_frame(frame_dir, frame_every, k, u_phys)
        if stop_when is not None and stop_when(rows[-1]):
            break
    return EvolveRecord(rows=rows, final=u_phys)


def _dump_frame(frame_dir, frame_every: int, step: int, u: GridFunction) -> None:
    if frame_dir is None or frame_every <= 0 or step % frame_every != 0:
        return
    np.savetxt(f"{frame_dir}/frame_{step:06d}.txt", u.values_nd.reshape(
        u.grid.shape[0], -1))


def write_residual_csv(result: KrylovResult, path) -> None:
    """Per-iteration relative residuals of one solve."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "relative_residual"])
        for i, r in enumerate(result.residuals):
            writer.writerow([i, f"{r:.6e}"])


def write_observer_csv(record: EvolveRecord, path) -> None:
    """Per-step observer values of one evolution."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "max_norm", "l2", "mass",
                         "components", "iterations", "seconds"])
        for r in record.rows:
            writer.writerow([r.step, f"{r.t:.6e}", f"{r.max_norm:.6e}",
                             f"{r.l2:.6e}", f"{r.mass:.6e}", r.components,
                             r.iterations, f"{r.seconds:.3e}"])
