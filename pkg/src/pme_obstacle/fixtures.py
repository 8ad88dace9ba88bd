"""Obstacle construction and seeded generators for test fields.

Obstacles are built from a small declarative spec (the same structure
the CLI config uses).  The bump kinds produce C^1 space profiles times a
C^1 time window that vanishes near t = 0 and t = T, so the result is
Lipschitz with compact support in the open cylinder.  Random cutoffs,
test functions and boundary pairs come from a seeded generator so every
check is reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import ScalarField, SpaceTimeGrid, field_from_csv
from .obstacle import Obstacle
from .pme import BoundaryData


@dataclass(frozen=True)
class ObstacleSpec:
    """Declarative obstacle description.

    window is in absolute time; None means (0.2 T, 0.8 T).  center is a
    scalar in 1D, an (x, y) pair in 2D.  table points at a CSV written
    by field_to_csv for the custom-table kind.
    """

    kind: str = "bump"
    amplitude: float = 1.0
    center: object = 0.5
    radius: float = 0.2
    window: tuple | None = None
    ramp_fraction: float = 0.25
    holder_exponent: float = 1.0
    table: str | None = None

    KINDS = ("zero", "constant", "bump", "product-bump", "custom-table")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown obstacle kind {self.kind!r}; "
                             f"expected one of {self.KINDS}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.kind == "custom-table" and not self.table:
            raise ValueError("custom-table kind requires a table path")


def bump_profile(s):
    """C^1 radial profile (1 - s^2)^2 clipped to s <= 1."""
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, (1.0 - np.minimum(s * s, 1.0)) ** 2, 0.0)


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def time_window(t, t_on: float, t_off: float, ramp: float):
    """C^1 window: 0 outside (t_on, t_off), 1 on the inner plateau."""
    t = np.asarray(t, dtype=float)
    return smoothstep((t - t_on) / ramp) * smoothstep((t_off - t) / ramp)


def make_obstacle(spec: ObstacleSpec, grid: SpaceTimeGrid) -> Obstacle:
    """Sample the spec on the grid.

    bump and product-bump carry compact support; constant does not (its
    trace is the constant itself, the matching-trace control case).
    """
    t = grid.times
    if spec.kind == "zero":
        return Obstacle(ScalarField(grid, np.zeros(grid.full_shape)),
                        compact_support=True,
                        holder_exponent=spec.holder_exponent)
    if spec.kind == "constant":
        vals = np.full(grid.full_shape, spec.amplitude)
        return Obstacle(ScalarField(grid, vals), compact_support=False,
                        holder_exponent=spec.holder_exponent)
    if spec.kind == "custom-table":
        vals, tgrid = field_from_csv(Path(spec.table))
        if tgrid != grid:
            raise ValueError(f"table grid {tgrid.meta()} does not match "
                             f"the requested grid {grid.meta()}")
        compact = _vanishes_near_parabolic_boundary(vals, grid)
        return Obstacle(ScalarField(grid, vals), compact_support=compact,
                        holder_exponent=spec.holder_exponent)

    window = spec.window
    if window is None:
        window = (0.2 * grid.T, 0.8 * grid.T)
    t_on, t_off = window
    if not 0.0 <= t_on < t_off <= grid.T:
        raise ValueError(f"window {window} must satisfy 0 <= t_on < t_off <= T")
    ramp = spec.ramp_fraction * (t_off - t_on)
    tau = time_window(t, t_on, t_off, ramp)
    if grid.d == 1:
        c = float(spec.center)
        if spec.kind == "product-bump":
            space = bump_profile((grid.x - c) / spec.radius)
        else:
            space = bump_profile(np.abs(grid.x - c) / spec.radius)
        vals = spec.amplitude * space[:, None] * tau[None, :]
    else:
        cx, cy = (spec.center, spec.center) if np.isscalar(spec.center) \
            else spec.center
        X, Y = grid.space_nodes()
        if spec.kind == "product-bump":
            space = (bump_profile((X - cx) / spec.radius)
                     * bump_profile((Y - cy) / spec.radius))
        else:
            r = np.sqrt((X - cx) ** 2 + (Y - cy) ** 2)
            space = bump_profile(r / spec.radius)
        vals = spec.amplitude * space[:, :, None] * tau[None, None, :]
    compact = (t_on > 0.0 and t_off < grid.T
               and _vanishes_near_parabolic_boundary(vals, grid))
    return Obstacle(ScalarField(grid, vals), compact_support=compact,
                    holder_exponent=spec.holder_exponent)


def _vanishes_near_parabolic_boundary(vals: np.ndarray, grid: SpaceTimeGrid) -> bool:
    interior = grid.interior_mask()
    if np.abs(vals[~interior]).max(initial=0.0) > 0:
        return False
    ring = interior.copy()
    if grid.d == 1:
        ring[2:-2] = False
    else:
        ring[2:-2, 2:-2] = False
    ring &= interior
    if np.abs(vals[ring]).max(initial=0.0) > 0:
        return False
    return np.abs(vals[..., 0]).max() == 0 and np.abs(vals[..., -1]).max() == 0


def default_spec() -> ObstacleSpec:
    """The standard bump fixture."""
    return ObstacleSpec(kind="bump", amplitude=1.0, center=0.5, radius=0.2,
                        window=(0.2, 0.8))


def default_grid() -> SpaceTimeGrid:
    return SpaceTimeGrid(d=1, nx=101, nt=200, T=1.0)


class FieldSampler:
    """Seeded source of cutoffs, test functions and boundary pairs."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def space_bump(self, grid: SpaceTimeGrid) -> np.ndarray:
        """Product of per-axis C^1 bumps with random center and width,
        supported strictly inside the spatial box."""
        out = np.ones(grid.space_shape)
        axes = (grid.x,) if grid.d == 1 else grid.space_nodes()
        for ax in axes:
            c = self.rng.uniform(0.25, 0.75)
            w = self.rng.uniform(0.4, 0.95) * min(c, 1.0 - c)
            out = out * bump_profile((ax - c) / w)
        return out

    def tent(self, grid: SpaceTimeGrid) -> np.ndarray:
        """Random tent cutoff supported strictly inside the spatial box."""
        c = self.rng.uniform(0.3, 0.7)
        w = self.rng.uniform(0.5, 0.95) * min(c, 1.0 - c)
        axes = (grid.x,) if grid.d == 1 else grid.space_nodes()
        out = np.ones(grid.space_shape)
        for ax in axes:
            out = out * np.maximum(0.0, 1.0 - np.abs(ax - c) / w)
        return out

    def clipped_gaussian(self, grid: SpaceTimeGrid) -> np.ndarray:
        """Gaussian shifted down and clipped, compactly supported."""
        c = self.rng.uniform(0.3, 0.7)
        s = self.rng.uniform(0.08, 0.2)
        floor = np.exp(-0.08 / s ** 2)
        axes = (grid.x,) if grid.d == 1 else grid.space_nodes()
        r2 = np.zeros(grid.space_shape)
        for ax in axes:
            r2 = r2 + (ax - c) ** 2
        return np.maximum(np.exp(-r2 / s ** 2) - floor, 0.0)

    def time_cutoff(self, grid: SpaceTimeGrid) -> np.ndarray:
        """Random C^1 window vanishing at t = 0 and t = T."""
        t_on = self.rng.uniform(0.02, 0.3) * grid.T
        t_off = self.rng.uniform(0.7, 0.98) * grid.T
        ramp = self.rng.uniform(0.15, 0.35) * (t_off - t_on)
        return time_window(grid.times, t_on, t_off, ramp)

    def test_function(self, grid: SpaceTimeGrid, nonnegative: bool = True,
                      amplitude: float = 1.0) -> np.ndarray:
        """Space-time test function vanishing on the parabolic boundary,
        the lateral boundary at all times and the top slice."""
        shape = self.space_bump(grid)
        tau = self.time_cutoff(grid)
        phi = amplitude * np.multiply.outer(shape, tau)
        if not nonnegative:
            freq = self.rng.uniform(1.0, 4.0)
            phase = self.rng.uniform(0, 2 * np.pi)
            ax = grid.x if grid.d == 1 else grid.space_nodes()[0]
            osc = np.cos(2 * np.pi * freq * ax + phase)
            phi = phi * osc[..., None]
        return phi

    def smooth_profile(self, grid: SpaceTimeGrid, modes: int = 4,
                       floor: float = 0.1) -> np.ndarray:
        """Smooth strictly positive function of time on the grid."""
        t = grid.times / grid.T
        vals = np.zeros_like(t)
        for j in range(1, modes + 1):
            vals += self.rng.normal() / j * np.sin(np.pi * j * t) \
                + self.rng.normal() / j * np.cos(np.pi * j * t)
        vals = vals - vals.min() + floor
        return vals

    def boundary_pair(self, grid: SpaceTimeGrid) -> tuple[BoundaryData, BoundaryData]:
        """Two continuous nonnegative data sets with g <= g' everywhere."""
        g = self._smooth_spacetime(grid)
        extra = self._smooth_spacetime(grid)
        return BoundaryData(grid, g), BoundaryData(grid, g + extra)

    def _smooth_spacetime(self, grid: SpaceTimeGrid) -> np.ndarray:
        a0 = self.rng.uniform(0.05, 0.5)
        amp = self.rng.uniform(0.2, 1.0)
        kx = self.rng.integers(1, 3)
        om = self.rng.uniform(0.5, 2.0)
        phase = self.rng.uniform(0, 2 * np.pi)
        t = grid.times
        if grid.d == 1:
            sx = np.sin(np.pi * kx * grid.x)[:, None]
            wig = 1.0 + 0.5 * np.sin(om * np.pi * t / grid.T + phase)[None, :]
        else:
            X, Y = grid.space_nodes()
            sx = (np.sin(np.pi * kx * X) * np.sin(np.pi * kx * Y))[..., None]
            wig = 1.0 + 0.5 * np.sin(om * np.pi * t / grid.T + phase)[None, None, :]
        vals = a0 + amp * (0.5 + 0.5 * sx) * wig
        return np.maximum(vals, 0.0)
