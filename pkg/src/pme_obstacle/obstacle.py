"""Obstacle-constrained solver and the variational-inequality checkers.

Each implicit step solves, in w = u^m against the transformed obstacle
w_lo = psi^m (equivalent to u >= psi since s -> s^m is increasing), the
complementarity system

    w >= w_lo,   F(w) >= 0,   (w - w_lo) . F(w) = 0,
    F(w) = w^(1/m) - u_prev - dt * lap(w),

which keeps the linear part of F intact on the inactive set, so the
projected Newton systems remain M-matrices.  Boundary nodes carry the
obstacle's own trace; for compactly supported obstacles that trace is
zero.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grid import (GridShapeError, ScalarField, SpaceTimeGrid, dirichlet_form,
                   field_to_csv, field_values, h1_seminorm_sq)
from .pme import (BoundaryData, NewtonDiverged, PmeParameters, SolveReport,
                  _implicit_step, active_system)


class SolverDiverged(RuntimeError):
    """The complementarity iteration failed to converge."""


class InfeasibleObstacle(ValueError):
    """The obstacle is incompatible with the boundary values."""


def contact_tolerance(psi_sup: float) -> float:
    """Width of the discrete contact band; scale-invariant and far
    below discretization error."""
    return 1e-9 * (1.0 + psi_sup)


@dataclass(frozen=True)
class Obstacle:
    """Obstacle field with its initial trace and admissibility metadata.

    When compact_support is set, the field must vanish on the lateral
    boundary, on the nodes adjacent to it, and on the first and last
    time slices (a discrete neighborhood of the parabolic boundary plus
    the top).  holder_exponent records the parabolic Hoelder class the
    obstacle is built to satisfy (1.0 means Lipschitz).
    """

    psi: ScalarField
    compact_support: bool = False
    holder_exponent: float = 1.0

    def __post_init__(self):
        if self.psi.is_slice:
            raise GridShapeError("obstacle must be a full space-time field")
        if not 0.0 < self.holder_exponent <= 1.0:
            raise ValueError("holder_exponent must lie in (0, 1]")
        if self.compact_support:
            g = self.grid
            v = self.psi.values
            interior = g.interior_mask()
            if np.abs(v[~interior]).max(initial=0.0) > 0:
                raise ValueError("compactly supported obstacle must vanish "
                                 "on the lateral boundary")
            ring = interior & ~_eroded(interior, g)
            if np.abs(v[ring]).max(initial=0.0) > 0:
                raise ValueError("compactly supported obstacle must vanish "
                                 "next to the lateral boundary")
            if np.abs(v[..., 0]).max() > 0 or np.abs(v[..., -1]).max() > 0:
                raise ValueError("compactly supported obstacle must vanish "
                                 "on the first and last time slices")

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.psi.grid

    @property
    def psi_o(self) -> np.ndarray:
        return self.psi.values[..., 0]

    def slice(self, k: int) -> np.ndarray:
        return self.psi.values[..., k]

    def sup(self) -> float:
        return float(self.psi.values.max())

    def trace(self) -> BoundaryData:
        """The obstacle's own parabolic-boundary values as Dirichlet data."""
        return BoundaryData(self.grid, self.psi.values)

    def holder_seminorm_estimate(self) -> float:
        """Adjacent-node estimate of the parabolic Hoelder seminorm."""
        g = self.grid
        v = self.psi.values
        beta = self.holder_exponent
        quot = [np.abs(np.diff(v, axis=0)).max(initial=0.0) / g.dx ** beta,
                np.abs(np.diff(v, axis=-1)).max(initial=0.0) / g.dt ** (beta / 2.0)]
        if g.d == 2:
            quot.append(np.abs(np.diff(v, axis=1)).max(initial=0.0) / g.dy ** beta)
        return float(max(quot))


def _eroded(mask: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    out = np.zeros_like(mask)
    if grid.d == 1:
        out[2:-2] = mask[2:-2]
    else:
        out[2:-2, 2:-2] = mask[2:-2, 2:-2]
    return out


@dataclass(frozen=True)
class ContactSet:
    """Mask of nodes where the solution sits on the obstacle."""

    grid: SpaceTimeGrid
    mask: np.ndarray
    tol: float

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    def to_csv(self, path) -> None:
        field_to_csv(self.mask.astype(float), self.grid, path, kind="contact_mask")


class ViStepResult(NamedTuple):
    u: ScalarField
    contact: ContactSet
    iterations: int
    residual: float


def vi_step(u_prev, psi_slice, psi_bdry, p: PmeParameters, dt: float,
            grid: SpaceTimeGrid) -> ViStepResult:
    """One implicit step of the constrained evolution.

    psi_slice holds the obstacle at the new time; psi_bdry the Dirichlet
    values imposed there (the obstacle trace in the standard setup).
    Raises InfeasibleObstacle when the obstacle exceeds the boundary
    values on the boundary, SolverDiverged when the iteration stalls.
    """
    up = field_values(u_prev)
    ps = field_values(psi_slice)
    bd = field_values(psi_bdry)
    if up.shape != grid.space_shape or ps.shape != grid.space_shape \
            or bd.shape != grid.space_shape:
        raise GridShapeError("slice shape mismatch with grid")
    tol = contact_tolerance(float(ps.max()))
    interior = grid.interior_mask()
    if np.any(ps[~interior] > bd[~interior] + tol):
        raise InfeasibleObstacle("obstacle exceeds boundary data on the "
                                 "spatial boundary")
    sys = active_system(grid)
    w_lower = sys.take(ps) ** p.m
    try:
        u_next, it, res = _implicit_step(up, bd, p, dt, grid, sys,
                                         w_lower=w_lower)
    except NewtonDiverged as exc:
        raise SolverDiverged(str(exc)) from exc
    mask = u_next - ps <= tol
    return ViStepResult(ScalarField(grid, u_next),
                        ContactSet(grid, mask, tol), it, res)


def vi_solve(obstacle: Obstacle, p: PmeParameters,
             grid: SpaceTimeGrid) -> tuple[ScalarField, ContactSet, SolveReport]:
    """Constrained evolution over all steps, starting on the obstacle's
    initial trace and carrying its lateral trace as boundary values."""
    if obstacle.grid != grid:
        raise GridShapeError("obstacle grid mismatch")
    psi = obstacle.psi.values
    tol = contact_tolerance(obstacle.sup())
    sys = active_system(grid)
    out = np.empty(grid.full_shape)
    out[..., 0] = psi[..., 0]
    iters = []
    max_res = 0.0
    start = time.perf_counter()
    for k in range(grid.nt):
        ps = psi[..., k + 1]
        w_lower = sys.take(ps) ** p.m
        try:
            u_next, it, res = _implicit_step(out[..., k], ps, p, grid.dt,
                                             grid, sys, w_lower=w_lower)
        except NewtonDiverged as exc:
            raise SolverDiverged(f"step {k + 1}: {exc}") from exc
        out[..., k + 1] = u_next
        iters.append(it)
        max_res = max(max_res, res)
    mask = out - psi <= tol
    um = out ** (p.m + 1.0)
    w_sp = grid.space_weights()
    axes = tuple(range(grid.d))
    slice_dist = np.tensordot(
        w_sp, np.abs(np.diff(out, axis=-1)) ** (p.m + 1.0), axes=(axes, axes))
    report = SolveReport(
        steps=grid.nt, newton_iters=iters, max_residual=max_res,
        wallclock=time.perf_counter() - start,
        extra={
            "complementarity_residual": max_res,
            "holder_seminorm_estimate": obstacle.holder_seminorm_estimate(),
            "lmp1_continuity_modulus": float(
                np.max(slice_dist) ** (1.0 / (p.m + 1.0))),
        })
    return ScalarField(grid, out), ContactSet(grid, mask, tol), report


# ---------------------------------------------------------------------------
# pointwise convexity gap and the two variational-inequality checkers


def boiler_I(a, b, m: float):
    """Convexity gap I(a, b) = a^(m+1)/(m+1) + m b^(m+1)/(m+1) - b^m a.

    Nonnegative for a, b >= 0 and zero exactly on the diagonal a = b.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.min() < 0 or b.min() < 0:
        raise ValueError("arguments must be nonnegative")
    val = a ** (m + 1) / (m + 1) + m * b ** (m + 1) / (m + 1) - b ** m * a
    return float(val) if val.ndim == 0 else val


def _time_derivative(full: np.ndarray, dt: float) -> np.ndarray:
    """Centered in the interior, one-sided at the ends."""
    out = np.empty_like(full)
    out[..., 1:-1] = (full[..., 2:] - full[..., :-2]) / (2 * dt)
    out[..., 0] = (full[..., 1] - full[..., 0]) / dt
    out[..., -1] = (full[..., -1] - full[..., -2]) / dt
    return out


def _check_admissible(v: np.ndarray, obstacle: Obstacle) -> None:
    gap = float((v - obstacle.psi.values).min())
    if gap < -contact_tolerance(obstacle.sup()):
        raise ValueError(f"inadmissible comparison map: v < psi by {-gap:.3e}")


def check_local_variational_inequality(u, obstacle: Obstacle, v,
                                       alpha: np.ndarray, eta: np.ndarray,
                                       m: float) -> float:
    """Value of the localized variational inequality for comparison map v.

    Evaluates, by trapezoid quadrature,

        int eta [ alpha' (u^(m+1)/(m+1) - u v^m) - alpha u (v^m)_t ]
        + int alpha grad u^m . grad(eta (v^m - u^m)),

    which a constrained solution keeps >= 0 up to discretization error
    for admissible v >= psi and nonnegative cutoffs alpha (vanishing at
    t = 0, T) and eta (vanishing on the spatial boundary).
    """
    grid = obstacle.grid
    uv = field_values(u)
    vv = field_values(v)
    alpha = np.asarray(alpha, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if uv.shape != grid.full_shape or vv.shape != grid.full_shape:
        raise GridShapeError("u and v must be full space-time fields")
    if alpha.shape != (grid.nt + 1,):
        raise GridShapeError("alpha must be a time-grid function")
    if eta.shape != grid.space_shape:
        raise GridShapeError("eta must be a spatial slice")
    if alpha.min() < 0 or eta.min() < 0:
        raise ValueError("cutoffs must be nonnegative")
    if alpha[0] != 0.0 or alpha[-1] != 0.0:
        raise ValueError("alpha must vanish at t=0 and t=T")
    interior = grid.interior_mask()
    if np.abs(eta[~interior]).max(initial=0.0) > 0:
        raise ValueError("eta must vanish on the spatial boundary")
    _check_admissible(vv, obstacle)

    dt = grid.dt
    alpha_p = _time_derivative(alpha[None, :], dt)[0]
    vm = vv ** m
    um = uv ** m
    dvm = _time_derivative(vm, dt)
    bshape = (1,) * grid.d + (grid.nt + 1,)
    integrand = (alpha_p.reshape(bshape) * (uv ** (m + 1) / (m + 1) - uv * vm)
                 - alpha.reshape(bshape) * uv * dvm)
    w_sp = grid.space_weights()
    tw = grid.time_weights()
    axes = tuple(range(grid.d))
    per_slice = np.tensordot(w_sp, eta[..., None] * integrand, axes=(axes, axes))
    parabolic = float(np.sum(tw * per_slice))

    diff = eta[..., None] * (vm - um)
    divergence = 0.0
    for k in range(grid.nt + 1):
        if alpha[k] == 0.0:
            continue
        divergence += tw[k] * alpha[k] * dirichlet_form(um[..., k], diff[..., k], grid)
    return parabolic + divergence


def check_energy_variational_inequality(u, obstacle: Obstacle, v, tau: float,
                                        m: float) -> float:
    """Slack (right side minus left side) of the energy inequality

        1/2 int_0^tau |grad u^m|^2
            <= int_0^tau (v^m)_t (v - u) + 1/2 int_0^tau |grad v^m|^2
               - int I(u(tau), v(tau)) + int I(psi_o, v(0)),

    expected nonnegative up to discretization error for admissible v.
    """
    grid = obstacle.grid
    uv = field_values(u)
    vv = field_values(v)
    if uv.shape != grid.full_shape or vv.shape != grid.full_shape:
        raise GridShapeError("u and v must be full space-time fields")
    _check_admissible(vv, obstacle)
    k_tau = int(round(tau / grid.dt))
    if not 0 < k_tau <= grid.nt or abs(k_tau * grid.dt - tau) > 1e-9 * grid.T:
        raise ValueError(f"tau={tau} is not a positive grid time")

    um = uv ** m
    vm = vv ** m
    tw = grid.time_weights(k_tau)
    ones = np.ones(grid.space_shape)
    lhs = 0.5 * sum(tw[k] * h1_seminorm_sq(um[..., k], ones, grid)
                    for k in range(k_tau + 1))
    grad_v = 0.5 * sum(tw[k] * h1_seminorm_sq(vm[..., k], ones, grid)
                       for k in range(k_tau + 1))
    dvm = _time_derivative(vm, grid.dt)
    w_sp = grid.space_weights()
    axes = tuple(range(grid.d))
    per_slice = np.tensordot(w_sp, dvm * (vv - uv), axes=(axes, axes))
    parabolic = float(np.sum(tw * per_slice))
    i_tau = grid.integrate_space(boiler_I(uv[..., k_tau], vv[..., k_tau], m))
    i_zero = grid.integrate_space(boiler_I(obstacle.psi_o, vv[..., 0], m))
    rhs = parabolic + grad_v - i_tau + i_zero
    return rhs - lhs
