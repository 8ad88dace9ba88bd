"""Minimal supersolution above an obstacle by monotone local sweeps.

The candidate starts at the constant sup(psi) in the interior (with the
obstacle's own parabolic-boundary trace) and is repeatedly replaced, on
a fixed decomposition of the cylinder, by the free evolution of its own
boundary data followed by projection back above the obstacle.  Both
operations are monotone and decreasing, so the iterates fall nodewise
toward the smallest such fixed point, which is the discrete stand-in
for the minimal supersolution.  Time slabs of a few steps spanning the
whole spatial domain make every modification a plain initial-boundary
solve; in 2D two overlapping spatial halves are swept as well, in the
manner of alternating domain decomposition.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .grid import GridShapeError, ScalarField, SpaceTimeGrid, field_values
from .obstacle import Obstacle
from .pme import NewtonDiverged, PmeParameters, SolveReport, _implicit_step, active_system


class NoConvergence(RuntimeError):
    """Sweeping failed to reach the decrement tolerance."""


class Cylinder(NamedTuple):
    """Grid-aligned subcylinder box x (t_k0, t_k1].

    box holds inclusive interior node-index ranges per spatial axis.
    """

    k0: int
    k1: int
    box: tuple


def cylinder_mask(grid: SpaceTimeGrid, cyl: Cylinder) -> np.ndarray:
    mask = np.zeros(grid.space_shape, dtype=bool)
    if grid.d == 1:
        (i0, i1), = cyl.box
        mask[i0:i1 + 1] = True
    else:
        (i0, i1), (j0, j1) = cyl.box
        mask[i0:i1 + 1, j0:j1 + 1] = True
    return mask & grid.interior_mask()


def default_cylinders(grid: SpaceTimeGrid, slab_steps: int = 10) -> tuple[Cylinder, ...]:
    """Time slabs over the full domain, plus overlapping spatial halves in 2D."""
    boxes = [((1, grid.nx),) if grid.d == 1
             else ((1, grid.nx), (1, grid.ny))]
    if grid.d == 2:
        split_hi = int(np.ceil(0.6 * (grid.nx + 1)))
        split_lo = int(np.floor(0.4 * (grid.nx + 1)))
        boxes.append(((1, split_hi), (1, grid.ny)))
        boxes.append(((split_lo, grid.nx), (1, grid.ny)))
    cyls = []
    for k0 in range(0, grid.nt, slab_steps):
        k1 = min(k0 + slab_steps, grid.nt)
        for box in boxes:
            cyls.append(Cylinder(k0, k1, box))
    return tuple(cyls)


@dataclass(frozen=True)
class BalayageState:
    """Current candidate supersolution and sweep bookkeeping."""

    grid: SpaceTimeGrid
    current: np.ndarray
    iteration: int
    sweep_cylinders: tuple
    decrease_norm: float

    def __post_init__(self):
        c = np.asarray(self.current, dtype=float).copy()
        c.setflags(write=False)
        object.__setattr__(self, "current", c)


def initial_state(obstacle: Obstacle, grid: SpaceTimeGrid,
                  slab_steps: int = 10) -> BalayageState:
    """Constant sup(psi) in the interior for t > 0; the obstacle's own
    trace on the parabolic boundary (zero for compact support)."""
    cur = obstacle.psi.values.copy()
    interior = grid.interior_mask()
    sup = obstacle.sup()
    if grid.d == 1:
        cur[1:-1, 1:] = sup
    else:
        cur[1:-1, 1:-1, 1:] = sup
    return BalayageState(grid=grid, current=cur, iteration=0,
                         sweep_cylinders=default_cylinders(grid, slab_steps),
                         decrease_norm=float("inf"))


def poisson_modify(state: BalayageState, cyl: Cylinder,
                   p: PmeParameters, obstacle: Obstacle) -> BalayageState:
    """Replace the candidate inside one cylinder by the smallest
    supersolution of its own parabolic-boundary data above the obstacle.

    On cylinders the obstacle never touches, this is the plain
    replacement by the evolution of the candidate's boundary data; where
    contact occurs, the stepping keeps the constraint active so the
    result stays a supersolution (a pure evolve-then-clip sweep would
    pin the region around the contact set below the reaction of the
    obstacle and converge to a field that is not a supersolution).  By
    comparison the result never rises above the previous candidate and
    never falls below the obstacle.
    """
    grid = state.grid
    psi = obstacle.psi.values
    mask = cylinder_mask(grid, cyl)
    sys = active_system(grid, mask)
    cur = state.current.copy()
    work = cur[..., cyl.k0].copy()
    decrease = 0.0
    for k in range(cyl.k0, cyl.k1):
        w_lower = sys.take(psi[..., k + 1]) ** p.m
        h, _, _ = _implicit_step(work, cur[..., k + 1], p, grid.dt, grid, sys,
                                 w_lower=w_lower)
        new_slice = cur[..., k + 1].copy()
        new_slice[mask] = np.maximum(h[mask], psi[..., k + 1][mask])
        decrease = max(decrease, float((cur[..., k + 1] - new_slice).max(initial=0.0)))
        cur[..., k + 1] = new_slice
        work = new_slice
    return replace(state, current=cur, iteration=state.iteration + 1,
                   decrease_norm=decrease)


def balayage_solve(obstacle: Obstacle, p: PmeParameters, grid: SpaceTimeGrid,
                   sweep_tol: float | None = None, max_sweeps: int = 500,
                   slab_steps: int = 10,
                   ordering: Sequence[int] | None = None
                   ) -> tuple[ScalarField, SolveReport]:
    """Sweep Poisson modifications to convergence.

    Stops once the sup-norm decrement of a full sweep falls below
    sweep_tol (default 1e-9 * sup psi); raises NoConvergence after
    max_sweeps.  ``ordering`` optionally permutes the cylinder sweep
    order (the fixed point is order-independent; the default order is
    forward in time).
    """
    if obstacle.grid != grid:
        raise GridShapeError("obstacle grid mismatch")
    sup = obstacle.sup()
    if sweep_tol is None:
        sweep_tol = 1e-9 * sup if sup > 0 else 1e-15
    state = initial_state(obstacle, grid, slab_steps)
    cyls = state.sweep_cylinders
    order = list(range(len(cyls))) if ordering is None else list(ordering)
    if sorted(order) != list(range(len(cyls))):
        raise ValueError("ordering must permute the cylinder indices")
    decrements = []
    start = time.perf_counter()
    for sweep in range(max_sweeps):
        worst = 0.0
        for idx in order:
            try:
                state = poisson_modify(state, cyls[idx], p, obstacle)
            except NewtonDiverged as exc:
                raise NoConvergence(
                    f"sweep {sweep}, cylinder {idx}: {exc}") from exc
            worst = max(worst, state.decrease_norm)
        decrements.append(worst)
        if worst < sweep_tol:
            report = SolveReport(
                steps=grid.nt, newton_iters=[],
                max_residual=worst,
                wallclock=time.perf_counter() - start,
                extra={"sweeps": sweep + 1,
                       "decrements": [float(d) for d in decrements],
                       "sweep_tol": sweep_tol,
                       "cylinders": len(cyls)})
            return ScalarField(grid, state.current), report
    raise NoConvergence(
        f"decrement {decrements[-1]:.3e} still above {sweep_tol:.3e} "
        f"after {max_sweeps} sweeps")


def zero_past_extend(v, t0: float, grid: SpaceTimeGrid | None = None) -> ScalarField:
    """Zero the field on all slices with t <= t0, keep it afterwards.

    The extension of a (discrete) supersolution remains one: across the
    seam the field only jumps upward, which the weak form registers
    with the correct sign.
    """
    if isinstance(v, ScalarField):
        grid = v.grid
    if grid is None:
        raise ValueError("grid required when v is a bare array")
    vv = field_values(v).copy()
    if vv.shape != grid.full_shape:
        raise GridShapeError("expected a full space-time field")
    vv[..., grid.times <= t0] = 0.0
    return ScalarField(grid, vv)
