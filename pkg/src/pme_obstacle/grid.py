"""Uniform tensor grids on the unit interval/square crossed with (0,T).

Nodes carry the boundary explicitly: a 1D slice has shape (nx+2,) with
entries 0 and nx+1 on the spatial boundary, a 2D slice has shape
(nx+2, ny+2), and full space-time fields append a trailing time axis of
length nt+1 (slice k sits at time k*dt).  Zero Dirichlet data therefore
lives in the arrays and traces stay inspectable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# node classification codes
INTERIOR = 0
LATERAL = 1
INITIAL = 2


class GridShapeError(ValueError):
    """Array shape does not match the grid layout."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform grid on (0,1)^d x (0,T) with d in {1, 2}.

    nx (and ny in 2D) count interior nodes per axis, nt counts time
    steps, so spacings are dx = 1/(nx+1) and dt = T/nt.
    """

    d: int
    nx: int
    nt: int
    T: float
    ny: int | None = None

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.nx < 1:
            raise ValueError(f"nx must be >= 1, got {self.nx}")
        if self.nt < 1:
            raise ValueError(f"nt must be >= 1, got {self.nt}")
        if not self.T > 0:
            raise ValueError(f"T must be > 0, got {self.T}")
        if self.d == 2:
            if self.ny is None or self.ny < 1:
                raise ValueError(f"ny must be >= 1 in 2D, got {self.ny}")
        elif self.ny is not None:
            raise ValueError("ny must be omitted in 1D")

    @property
    def dx(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def dy(self) -> float:
        if self.d != 2:
            raise AttributeError("dy is only defined in 2D")
        return 1.0 / (self.ny + 1)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nx + 2)

    @property
    def y(self) -> np.ndarray:
        if self.d != 2:
            raise AttributeError("y is only defined in 2D")
        return np.linspace(0.0, 1.0, self.ny + 2)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    @property
    def space_shape(self) -> tuple[int, ...]:
        if self.d == 1:
            return (self.nx + 2,)
        return (self.nx + 2, self.ny + 2)

    @property
    def full_shape(self) -> tuple[int, ...]:
        return self.space_shape + (self.nt + 1,)

    def interior_mask(self) -> np.ndarray:
        """Boolean slice-shaped mask of spatially interior nodes."""
        mask = np.zeros(self.space_shape, dtype=bool)
        if self.d == 1:
            mask[1:-1] = True
        else:
            mask[1:-1, 1:-1] = True
        return mask

    def space_nodes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to slice shape."""
        if self.d == 1:
            return (self.x,)
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return (X, Y)

    def space_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights over the closed spatial box."""
        wx = np.full(self.nx + 2, self.dx)
        wx[0] = wx[-1] = 0.5 * self.dx
        if self.d == 1:
            return wx
        wy = np.full(self.ny + 2, self.dy)
        wy[0] = wy[-1] = 0.5 * self.dy
        return np.outer(wx, wy)

    def time_weights(self, k_stop: int | None = None) -> np.ndarray:
        """Trapezoid weights over [0, t_k_stop] (defaults to [0, T])."""
        k = self.nt if k_stop is None else k_stop
        if not 0 < k <= self.nt:
            raise ValueError(f"k_stop must be in (0, nt], got {k_stop}")
        w = np.zeros(self.nt + 1)
        w[: k + 1] = self.dt
        w[0] = w[k] = 0.5 * self.dt
        return w

    def integrate_space(self, slice_values: np.ndarray) -> float:
        return float(np.sum(self.space_weights() * slice_values))

    def integrate_spacetime(self, full_values: np.ndarray,
                            k_stop: int | None = None) -> float:
        w = self.time_weights(k_stop)
        per_slice = np.tensordot(self.space_weights(), full_values,
                                 axes=(tuple(range(self.d)), tuple(range(self.d))))
        return float(np.sum(w * per_slice))

    def refine(self) -> "SpaceTimeGrid":
        """Next refinement level: nx -> 2nx-1, nt -> 2nt."""
        ny = None if self.ny is None else 2 * self.ny - 1
        return SpaceTimeGrid(d=self.d, nx=2 * self.nx - 1, nt=2 * self.nt,
                             T=self.T, ny=ny)

    def coarsen(self) -> "SpaceTimeGrid":
        """Inverse of refine: nx -> (nx+1)//2, nt -> nt//2."""
        if self.nx < 3 or self.nt < 2:
            raise ValueError("grid too small to coarsen")
        ny = None if self.ny is None else (self.ny + 1) // 2
        return SpaceTimeGrid(d=self.d, nx=(self.nx + 1) // 2,
                             nt=self.nt // 2, T=self.T, ny=ny)

    def meta(self) -> dict:
        out = {"d": self.d, "nx": self.nx, "nt": self.nt, "T": self.T,
               "dx": self.dx, "dt": self.dt}
        if self.d == 2:
            out.update(ny=self.ny, dy=self.dy)
        return out


@dataclass(frozen=True)
class ScalarField:
    """Nonnegative nodal values on a single slice or the full cylinder."""

    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape not in (self.grid.space_shape, self.grid.full_shape):
            raise GridShapeError(
                f"values shape {v.shape} matches neither slice "
                f"{self.grid.space_shape} nor full {self.grid.full_shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if v.min() < 0.0:
            raise ValueError(f"field contains negative values (min {v.min():.3e})")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_slice(self) -> bool:
        return self.values.shape == self.grid.space_shape

    def time_slice(self, k: int) -> np.ndarray:
        if self.is_slice:
            raise GridShapeError("field is a single slice")
        return self.values[..., k]

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())


def field_values(f) -> np.ndarray:
    """Unwrap a ScalarField or pass a bare array through."""
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)


def laplacian(f, grid: SpaceTimeGrid) -> np.ndarray:
    """Centered second-order Laplacian of a spatial slice.

    Returns an array of the slice shape with the stencil applied at
    interior nodes and zeros on the boundary rows.
    """
    v = field_values(f)
    if v.shape != grid.space_shape:
        raise GridShapeError(f"slice shape {v.shape} != {grid.space_shape}")
    out = np.zeros_like(v)
    if grid.d == 1:
        out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / grid.dx ** 2
    else:
        out[1:-1, 1:-1] = (
            (v[:-2, 1:-1] - 2.0 * v[1:-1, 1:-1] + v[2:, 1:-1]) / grid.dx ** 2
            + (v[1:-1, :-2] - 2.0 * v[1:-1, 1:-1] + v[1:-1, 2:]) / grid.dy ** 2
        )
    return out


def h1_seminorm_sq(f, weight, grid: SpaceTimeGrid) -> float:
    """Quadrature of weight^2 |grad f|^2 over the spatial box.

    One-sided differences on cell edges with the weight averaged to the
    edge midpoint; exact for affine f with constant weight.
    """
    v = field_values(f)
    w = field_values(weight)
    if v.shape != grid.space_shape or w.shape != grid.space_shape:
        raise GridShapeError("slice shape mismatch")
    if grid.d == 1:
        df = np.diff(v) / grid.dx
        wm = 0.5 * (w[:-1] + w[1:])
        return float(np.sum(grid.dx * wm ** 2 * df ** 2))
    dfx = np.diff(v, axis=0) / grid.dx
    wmx = 0.5 * (w[:-1, :] + w[1:, :])
    wy = np.full(grid.ny + 2, grid.dy)
    wy[0] = wy[-1] = 0.5 * grid.dy
    total = float(np.sum(grid.dx * wy[None, :] * wmx ** 2 * dfx ** 2))
    dfy = np.diff(v, axis=1) / grid.dy
    wmy = 0.5 * (w[:, :-1] + w[:, 1:])
    wx = np.full(grid.nx + 2, grid.dx)
    wx[0] = wx[-1] = 0.5 * grid.dx
    total += float(np.sum(grid.dy * wx[:, None] * wmy ** 2 * dfy ** 2))
    return total


def dirichlet_form(a, b, grid: SpaceTimeGrid) -> float:
    """Discrete energy pairing sum of grad a . grad b.

    Edge sum chosen so that for b vanishing on the spatial boundary it
    equals -sum_i b_i (laplacian a)_i over interior nodes with weight
    dx (dx*dy in 2D); this exact adjointness is what the weak-form
    evaluations rely on.
    """
    av = field_values(a)
    bv = field_values(b)
    if av.shape != grid.space_shape or bv.shape != grid.space_shape:
        raise GridShapeError("slice shape mismatch")
    if grid.d == 1:
        da = np.diff(av)
        db = np.diff(bv)
        return float(np.sum(da * db) / grid.dx)
    dax = np.diff(av, axis=0)[:, 1:-1]
    dbx = np.diff(bv, axis=0)[:, 1:-1]
    total = float(np.sum(dax * dbx) * grid.dy / grid.dx)
    day = np.diff(av, axis=1)[1:-1, :]
    dby = np.diff(bv, axis=1)[1:-1, :]
    total += float(np.sum(day * dby) * grid.dx / grid.dy)
    return total


def node_classification(grid: SpaceTimeGrid) -> np.ndarray:
    """Full-shape int array: INTERIOR, LATERAL (spatial boundary at any
    time) or INITIAL (interior nodes of the t=0 slice)."""
    cls = np.full(grid.full_shape, INTERIOR, dtype=np.int8)
    lateral = ~grid.interior_mask()
    cls[lateral, :] = LATERAL
    init = grid.interior_mask()
    cls[init, 0] = INITIAL
    return cls


def parabolic_boundary_mask(grid: SpaceTimeGrid) -> np.ndarray:
    """Mask of the parabolic boundary: the initial slice over the open
    spatial domain plus the lateral boundary for times in [0, T).

    The final time T is excluded also on the lateral boundary (half-open
    time interval), and corner nodes at t=0 are counted once through the
    lateral part.
    """
    cls = node_classification(grid)
    mask = cls == INITIAL
    lateral = cls == LATERAL
    lateral[..., grid.nt] = False
    return mask | lateral


def field_to_csv(f, grid: SpaceTimeGrid, path, kind: str = "field") -> None:
    """Write one row per node (x[,y],t,value) plus a JSON metadata sidecar.

    Values use 17 significant digits so a load/dump round trip is
    bit-exact for float64.
    """
    v = field_values(f)
    path = Path(path)
    full = v.reshape(grid.space_shape + (-1,))
    ntimes = full.shape[-1]
    times = grid.times[:ntimes] if ntimes > 1 else np.zeros(1)
    cols = []
    if grid.d == 1:
        X = grid.x
        Xc = np.repeat(X, ntimes)
        Tc = np.tile(times, grid.nx + 2)
        cols = [Xc, Tc, full.reshape(-1)]
        header = "x,t,value"
    else:
        X, Y = grid.space_nodes()
        Xc = np.repeat(X.reshape(-1), ntimes)
        Yc = np.repeat(Y.reshape(-1), ntimes)
        Tc = np.tile(times, (grid.nx + 2) * (grid.ny + 2))
        cols = [Xc, Yc, Tc, full.reshape(-1)]
        header = "x,y,t,value"
    data = np.column_stack(cols)
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")
    meta = {"kind": kind, "grid": grid.meta(),
            "slices": int(ntimes), "columns": header.split(",")}
    Path(str(path) + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True))


def field_from_csv(path) -> tuple[np.ndarray, SpaceTimeGrid]:
    """Load a CSV written by field_to_csv; returns (values, grid)."""
    path = Path(path)
    meta = json.loads(Path(str(path) + ".meta.json").read_text())
    g = meta["grid"]
    grid = SpaceTimeGrid(d=g["d"], nx=g["nx"], nt=g["nt"], T=g["T"],
                         ny=g.get("ny"))
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    nslices = meta["slices"]
    vals = raw[:, -1].reshape(grid.space_shape + (nslices,))
    if nslices == 1:
        vals = vals[..., 0]
    return vals, grid
