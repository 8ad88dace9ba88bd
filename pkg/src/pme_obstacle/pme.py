"""Implicit solver for the fast-diffusion equation u_t = lap(u^m), 0 < m < 1.

Each time step solves F(w) = w^(1/m) - u_prev - dt*lap(w) = 0 in the
variable w = u^m, where the map w -> w^(1/m) is differentiable at zero
for m < 1, so damped Newton needs no regularization beyond a floor that
guards round-off.  The same kernel accepts a lower bound w >= psi^m and
then solves the complementarity system by a projected semismooth Newton
iteration with a projected red-black Gauss-Seidel fallback; that path is
used by the obstacle solvers.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded
from scipy.special import gammaln

from .grid import (GridShapeError, ScalarField, SpaceTimeGrid, dirichlet_form,
                   field_values, laplacian)


class NewtonDiverged(RuntimeError):
    """Newton iteration failed to reach the residual tolerance."""


class NegativeValue(RuntimeError):
    """A solver produced negative values after clamping; internal bug."""


@dataclass(frozen=True)
class PmeParameters:
    """Exponent and Newton controls.

    w_floor only guards against negative round-off excursions inside the
    iteration; it is not a physical regularization.
    """

    m: float
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    w_floor: float = 1e-14

    def __post_init__(self):
        if not 0.0 < self.m < 1.0:
            raise ValueError(f"m must lie in (0,1), got {self.m}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be > 0")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if not self.w_floor >= 0:
            raise ValueError("w_floor must be >= 0")


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data on the parabolic boundary.

    Stored as a full space-time array for simplicity; solvers read the
    lateral columns and the t=0 slice only.  Values must be nonnegative
    and should come from a single continuous function so the corner
    compatibility at t=0 holds.
    """

    grid: SpaceTimeGrid
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.full_shape:
            raise GridShapeError(
                f"boundary values shape {v.shape} != {self.grid.full_shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("boundary data contains non-finite values")
        if v.min() < 0:
            raise ValueError("boundary data must be nonnegative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def slice(self, k: int) -> np.ndarray:
        return self.values[..., k]

    @classmethod
    def zero(cls, grid: SpaceTimeGrid) -> "BoundaryData":
        return cls(grid, np.zeros(grid.full_shape))

    @classmethod
    def constant(cls, grid: SpaceTimeGrid, c: float) -> "BoundaryData":
        return cls(grid, np.full(grid.full_shape, float(c)))

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn) -> "BoundaryData":
        """Sample fn(x, t) (1D) or fn(x, y, t) (2D) on the full grid."""
        t = grid.times
        if grid.d == 1:
            vals = fn(grid.x[:, None], t[None, :])
        else:
            X, Y = grid.space_nodes()
            vals = fn(X[..., None], Y[..., None], t[None, None, :])
        return cls(grid, np.broadcast_to(vals, grid.full_shape).copy())


@dataclass
class SolveReport:
    """Per-run diagnostics serialized as JSON."""

    steps: int
    newton_iters: list
    max_residual: float
    wallclock: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"steps": self.steps,
               "newton_iters": list(int(i) for i in self.newton_iters),
               "max_residual": float(self.max_residual),
               "wallclock": float(self.wallclock)}
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# linear algebra kernels


class _ActiveSystem:
    """Stiffness bookkeeping for the nodes actually solved for.

    ``mask`` selects the unknowns of one time step (grid interior, or a
    sub-box of it for local sweeps); every other node is Dirichlet.  In
    1D the unknowns form a contiguous range and the Newton systems stay
    tridiagonal; in 2D a sparse matrix of -lap restricted to the active
    set is assembled once and reused.
    """

    def __init__(self, grid: SpaceTimeGrid, mask: np.ndarray):
        self.grid = grid
        self.mask = mask
        self.n = int(mask.sum())
        if self.n == 0:
            raise ValueError("active node set is empty")
        self.banded = grid.d == 1
        if self.banded:
            idx = np.flatnonzero(mask)
            if not np.array_equal(idx, np.arange(idx[0], idx[-1] + 1)):
                raise ValueError("1D active set must be a contiguous range")
            self.lo, self.hi = int(idx[0]), int(idx[-1])
            self.sigma = 2.0 / grid.dx ** 2
        else:
            self._assemble_2d()

    def _assemble_2d(self):
        grid = self.grid
        nxt, nyt = grid.space_shape
        flat = np.flatnonzero(self.mask.reshape(-1))
        pos = -np.ones(nxt * nyt, dtype=np.int64)
        pos[flat] = np.arange(flat.size)
        self.flat = flat
        self.pos = pos
        cx, cy = 1.0 / grid.dx ** 2, 1.0 / grid.dy ** 2
        self.sigma = 2.0 * (cx + cy)
        rows, cols, vals = [], [], []
        ii, jj = np.divmod(flat, nyt)
        for di, dj, c in ((1, 0, cx), (-1, 0, cx), (0, 1, cy), (0, -1, cy)):
            ni, nj = ii + di, jj + dj
            nflat = ni * nyt + nj
            ok = pos[nflat] >= 0
            rows.append(np.arange(flat.size)[ok])
            cols.append(pos[nflat[ok]])
            vals.append(np.full(ok.sum(), -c))
        rows.append(np.arange(flat.size))
        cols.append(np.arange(flat.size))
        vals.append(np.full(flat.size, self.sigma))
        self.A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(flat.size, flat.size))

    def take(self, full_slice: np.ndarray) -> np.ndarray:
        if self.banded:
            return full_slice[self.lo:self.hi + 1]
        return full_slice.reshape(-1)[self.flat]

    def put(self, full_slice: np.ndarray, active_vals: np.ndarray) -> None:
        if self.banded:
            full_slice[self.lo:self.hi + 1] = active_vals
        else:
            full_slice.reshape(-1)[self.flat] = active_vals

    def lap(self, full_slice: np.ndarray) -> np.ndarray:
        """laplacian of the full slice evaluated at the active nodes."""
        return self.take(laplacian(full_slice, self.grid))

    def neighbor_sum(self, full_slice: np.ndarray) -> np.ndarray:
        """sum_nb w_nb / h^2 at active nodes (for Gauss-Seidel updates)."""
        return self.lap(full_slice) + self.sigma * self.take(full_slice)

    def solve_modified(self, jac_diag: np.ndarray, dt: float,
                       newton_rows: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Solve the row-modified Newton system.

        Rows flagged in ``newton_rows`` carry (jac_diag + dt*(-lap)),
        the remaining rows are identity rows (projection onto the
        constraint); ``rhs`` is the full right-hand side.
        """
        if self.banded:
            n = self.n
            diag = jac_diag + dt * self.sigma
            off = -dt / self.grid.dx ** 2
            ab = np.zeros((3, n))
            ab[1] = np.where(newton_rows, diag, 1.0)
            # superdiagonal entry of row i lands at ab[0, i+1], the
            # subdiagonal entry of row i+1 at ab[2, i]
            ab[0, 1:] = np.where(newton_rows[:-1], off, 0.0)
            ab[2, :-1] = np.where(newton_rows[1:], off, 0.0)
            return solve_banded((1, 1), ab, rhs)
        free = np.flatnonzero(newton_rows)
        fixed = np.flatnonzero(~newton_rows)
        delta = np.zeros(self.n)
        delta[fixed] = rhs[fixed]
        J = sp.diags(jac_diag[free]) + dt * self.A[free][:, free]
        coupling = dt * (self.A[free][:, fixed] @ delta[fixed]) if fixed.size else 0.0
        delta[free] = spla.spsolve(J.tocsc(), rhs[free] - coupling)
        return delta


@lru_cache(maxsize=64)
def _cached_system(grid: SpaceTimeGrid, mask_bytes: bytes, shape: tuple) -> _ActiveSystem:
    mask = np.frombuffer(mask_bytes, dtype=bool).reshape(shape)
    return _ActiveSystem(grid, mask)


def active_system(grid: SpaceTimeGrid, mask: np.ndarray | None = None) -> _ActiveSystem:
    if mask is None:
        mask = grid.interior_mask()
    mask = np.ascontiguousarray(mask, dtype=bool)
    return _cached_system(grid, mask.tobytes(), mask.shape)


# ---------------------------------------------------------------------------
# one implicit step (plain and with lower bound)


def _implicit_step(u_prev: np.ndarray, dirichlet: np.ndarray, p: PmeParameters,
                   dt: float, grid: SpaceTimeGrid, sys: _ActiveSystem,
                   w_lower: np.ndarray | None = None):
    """Advance one step on the active set of ``sys``.

    Returns (full next slice, iterations, final residual).  With
    ``w_lower`` the complementarity system  w >= w_lower, F(w) >= 0,
    (w - w_lower) F(w) = 0  is solved; otherwise F(w) = 0.
    """
    m = p.m
    inv_m = 1.0 / m
    w_full = dirichlet ** m
    u_prev_a = sys.take(u_prev)
    scale = 1.0 + float(np.abs(u_prev).max()) + float(np.abs(dirichlet).max())
    tol = p.newton_tol * scale
    max_it = p.newton_max_iter if w_lower is None else 3 * p.newton_max_iter

    w = np.maximum(u_prev_a, 0.0) ** m
    if w_lower is not None:
        w = np.maximum(w, w_lower)

    def residual(wa):
        sys.put(w_full, wa)
        F = wa ** inv_m - u_prev_a - dt * sys.lap(w_full)
        if w_lower is None:
            return F, F
        return F, np.minimum(wa - w_lower, F)

    F, phi = residual(w)
    it = 0
    stalls = 0
    while np.abs(phi).max() > tol:
        if it >= max_it:
            raise NewtonDiverged(
                f"no convergence after {it} iterations "
                f"(residual {np.abs(phi).max():.3e}, tol {tol:.3e})")
        jac_diag = inv_m * np.maximum(w, p.w_floor) ** (inv_m - 1.0)
        if w_lower is None:
            newton_rows = np.ones_like(w, dtype=bool)
            rhs = -F
        else:
            newton_rows = (w - w_lower) > F
            rhs = np.where(newton_rows, -F, -(w - w_lower))
        delta = sys.solve_modified(jac_diag, dt, newton_rows, rhs)
        lam = 1.0
        base = np.abs(phi).max()
        for _ in range(30):
            w_try = np.maximum(w + lam * delta, p.w_floor)
            if w_lower is not None:
                w_try = np.maximum(w_try, w_lower)
            F_try, phi_try = residual(w_try)
            if np.abs(phi_try).max() < base:
                break
            lam *= 0.5
        else:
            stalls += 1
            if w_lower is not None and stalls <= 3:
                w = _gauss_seidel_ncp(w_try, u_prev_a, w_full, p, dt, sys,
                                      w_lower, sweeps=20)
                F, phi = residual(w)
                it += 1
                continue
            raise NewtonDiverged(
                f"line search stalled at iteration {it} "
                f"(residual {base:.3e}, tol {tol:.3e})")
        w, F, phi = w_try, F_try, phi_try
        it += 1

    u_next = dirichlet.copy()
    sys.put(u_next, w ** inv_m)
    if u_next.min() < 0:
        raise NegativeValue("negative value after clamped solve")
    return u_next, it, float(np.abs(phi).max())


def _gauss_seidel_ncp(w, u_prev_a, full, p, dt, sys, w_lower, sweeps=10):
    """Projected red-black Gauss-Seidel sweeps on the complementarity
    system; globally convergent fallback used when Newton stalls."""
    inv_m = 1.0 / p.m
    grid = sys.grid
    if sys.banded:
        idx = np.arange(sys.lo, sys.hi + 1)
        colors = [(idx % 2 == 0), (idx % 2 == 1)]
    else:
        ii, jj = np.divmod(sys.flat, grid.space_shape[1])
        colors = [((ii + jj) % 2 == 0), ((ii + jj) % 2 == 1)]
    sigma = sys.sigma
    for _ in range(sweeps):
        for color in colors:
            sys.put(full, w)
            nb = sys.neighbor_sum(full)
            rhs = u_prev_a + dt * nb
            wc = w[color]
            r = rhs[color]
            for _ in range(20):
                g = wc ** inv_m + dt * sigma * wc - r
                dg = inv_m * np.maximum(wc, p.w_floor) ** (inv_m - 1.0) + dt * sigma
                step = g / dg
                wc = np.maximum(wc - step, p.w_floor)
                if np.abs(g).max() < 1e-14 * (1.0 + np.abs(r).max()):
                    break
            w[color] = np.maximum(wc, w_lower[color])
    sys.put(full, w)
    return w


# ---------------------------------------------------------------------------
# public stepping interface


def pme_step(u_prev, bdry_slice, p: PmeParameters, dt: float,
             grid: SpaceTimeGrid) -> ScalarField:
    """One implicit Euler step of the obstacle-free equation.

    u_prev is the previous slice, bdry_slice holds the Dirichlet values
    imposed at the new time on the spatial boundary.
    """
    up = field_values(u_prev)
    bd = field_values(bdry_slice)
    if up.shape != grid.space_shape or bd.shape != grid.space_shape:
        raise GridShapeError("slice shape mismatch with grid")
    if up.min() < 0:
        raise ValueError("u_prev must be nonnegative")
    sys = active_system(grid)
    u_next, _, _ = _implicit_step(up, bd, p, dt, grid, sys)
    return ScalarField(grid, u_next)


def pme_solve(bdry: BoundaryData, p: PmeParameters,
              grid: SpaceTimeGrid) -> tuple[ScalarField, SolveReport]:
    """March the implicit scheme over all time steps.

    The initial slice is bdry at t=0; each step imposes the lateral
    values of bdry at the new time.  Newton iteration counts per step
    and the worst final residual are reported.
    """
    if bdry.grid != grid:
        raise GridShapeError("boundary data grid mismatch")
    sys = active_system(grid)
    out = np.empty(grid.full_shape)
    out[..., 0] = bdry.slice(0)
    iters = []
    max_res = 0.0
    start = time.perf_counter()
    for k in range(grid.nt):
        try:
            u_next, it, res = _implicit_step(out[..., k], bdry.slice(k + 1),
                                             p, grid.dt, grid, sys)
        except NewtonDiverged as exc:
            raise NewtonDiverged(f"step {k + 1}: {exc}") from exc
        out[..., k + 1] = u_next
        iters.append(it)
        max_res = max(max_res, res)
    report = SolveReport(steps=grid.nt, newton_iters=iters,
                         max_residual=max_res,
                         wallclock=time.perf_counter() - start)
    return ScalarField(grid, out), report


# ---------------------------------------------------------------------------
# Barenblatt source solution (fast diffusion)


def _front_constant(m: float, mass: float, dim: int) -> float:
    # closes int (C + k|y|^2)^(-1/(1-m)) dy = mass over R^dim
    p = 1.0 / (1.0 - m)
    alpha = dim / (dim * (m - 1.0) + 2.0)
    k = alpha * (1.0 - m) / (2.0 * m * dim)
    log_arg = (np.log(mass) + 0.5 * dim * np.log(k) + gammaln(p)
               - 0.5 * dim * np.log(np.pi) - gammaln(p - 0.5 * dim))
    return float(np.exp(log_arg / (0.5 * dim - p)))


def barenblatt(x, t, m: float, mass: float = 1.0, dim: int = 1):
    """Self-similar source solution of u_t = lap(u^m) centered at the
    origin, valid for (dim-2)/dim < m < 1 where the profile has finite
    mass.  x is scalar/array in 1D, (..., 2)-shaped in 2D.
    """
    if not (dim - 2) / dim < m < 1:
        raise ValueError(f"m={m} outside the integrable range for dim={dim}")
    if mass <= 0:
        raise ValueError("mass must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    if dim == 1:
        r2 = x ** 2
    else:
        if x.shape[-1] != 2:
            raise ValueError("2D points must have trailing length 2")
        r2 = np.sum(x ** 2, axis=-1)
    alpha = dim / (dim * (m - 1.0) + 2.0)
    k = alpha * (1.0 - m) / (2.0 * m * dim)
    C = _front_constant(m, mass, dim)
    profile = (C + k * r2 * t ** (-2.0 * alpha / dim)) ** (-1.0 / (1.0 - m))
    return t ** (-alpha) * profile


def barenblatt_field(grid: SpaceTimeGrid, m: float, mass: float = 1.0,
                     t_offset: float = 0.1,
                     center=0.5) -> tuple[ScalarField, BoundaryData]:
    """Sample the source solution (shifted to start at t_offset and
    centered in the box) on the grid; also return it as boundary data."""
    t = grid.times + t_offset
    if grid.d == 1:
        vals = barenblatt(grid.x[:, None] - center, t[None, :], m, mass, dim=1)
    else:
        cx, cy = (center, center) if np.isscalar(center) else center
        X, Y = grid.space_nodes()
        pts = np.stack([X - cx, Y - cy], axis=-1)[:, :, None, :]
        vals = barenblatt(np.broadcast_to(
            pts, (grid.nx + 2, grid.ny + 2, grid.nt + 1, 2)),
            t[None, None, :], m, mass, dim=2)
    f = ScalarField(grid, vals)
    return f, BoundaryData(grid, vals)


# ---------------------------------------------------------------------------
# weak form residual and the rescaled-solution identity


def _check_test_function(phi: np.ndarray, grid: SpaceTimeGrid) -> None:
    interior = grid.interior_mask()
    if np.abs(phi[~interior]).max(initial=0.0) > 0:
        raise ValueError("test function must vanish on the lateral boundary")
    if np.abs(phi[..., 0]).max() > 0 or np.abs(phi[..., -1]).max() > 0:
        raise ValueError("test function must vanish at t=0 and t=T")


def weak_residual(u, phi, m: float, grid: SpaceTimeGrid | None = None,
                  mode: str = "scheme") -> float:
    """Evaluate the weak-form pairing  int (-u phi_t + grad u^m . grad phi).

    mode="scheme" (default): the time pairing sums -u_{k+1} (phi_{k+1} -
    phi_k) and the space pairing matches the discrete Green identity, so
    for fields produced by the implicit scheme the value collapses,
    exactly, to sum_k dt dx phi_k * (step residual at k+1).  A
    supersolution of the discrete scheme therefore gives a nonnegative
    value for nonnegative phi up to solver tolerance; a solution ~0.

    mode="centered": trapezoid in time with a centered phi_t, a plain
    quadrature independent of the stepping.  Use it for consistency and
    refinement studies, where the scheme pairing would sit at the solver
    noise floor by construction; its value on a computed solution
    reflects the genuine discretization error.
    """
    if isinstance(u, ScalarField):
        grid = u.grid
    if grid is None:
        raise ValueError("grid required when u is a bare array")
    uv = field_values(u)
    pv = field_values(phi)
    if uv.shape != grid.full_shape or pv.shape != grid.full_shape:
        raise GridShapeError("expected full space-time fields")
    _check_test_function(pv, grid)
    w_sp = grid.space_weights()
    axes = tuple(range(grid.d))
    um = uv ** m
    if mode == "scheme":
        dphi = pv[..., 1:] - pv[..., :-1]
        t_term = -float(np.tensordot(w_sp, (uv[..., 1:] * dphi).sum(axis=-1),
                                     axes=(axes, axes)))
        s_term = 0.0
        for k in range(grid.nt):
            s_term += grid.dt * dirichlet_form(um[..., k + 1], pv[..., k], grid)
        return t_term + s_term
    if mode != "centered":
        raise ValueError(f"unknown mode {mode!r}")
    tw = grid.time_weights()
    dphi = np.zeros_like(pv)
    dphi[..., 1:-1] = (pv[..., 2:] - pv[..., :-2]) / (2.0 * grid.dt)
    per_slice = np.tensordot(w_sp, -uv * dphi, axes=(axes, axes))
    t_term = float(np.sum(tw * per_slice))
    s_term = sum(tw[k] * dirichlet_form(um[..., k], pv[..., k], grid)
                 for k in range(grid.nt + 1))
    return t_term + s_term


def laplacian_all(full_values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """Spatial Laplacian applied slice-wise to a full field."""
    out = np.zeros_like(full_values)
    v = full_values
    if grid.d == 1:
        out[1:-1, :] = (v[:-2, :] - 2.0 * v[1:-1, :] + v[2:, :]) / grid.dx ** 2
    else:
        out[1:-1, 1:-1, :] = (
            (v[:-2, 1:-1, :] - 2.0 * v[1:-1, 1:-1, :] + v[2:, 1:-1, :]) / grid.dx ** 2
            + (v[1:-1, :-2, :] - 2.0 * v[1:-1, 1:-1, :] + v[1:-1, 2:, :]) / grid.dy ** 2
        )
    return out


def scheme_residual(u, m: float, grid: SpaceTimeGrid | None = None) -> np.ndarray:
    """Residual lap(u^m)_{k+1} - (u_{k+1} - u_k)/dt of the implicit
    scheme, on interior nodes, one entry per step (trailing axis nt)."""
    if isinstance(u, ScalarField):
        grid = u.grid
    uv = field_values(u)
    lump = laplacian_all(uv ** m, grid)[..., 1:]
    dudt = (uv[..., 1:] - uv[..., :-1]) / grid.dt
    res = lump - dudt
    interior = grid.interior_mask()
    return np.where(interior[..., None], res, 0.0)


def scaled_source_coefficient(m: float, eps: float) -> float:
    """Coefficient c with f = c u^m in the rescaled-solution identity."""
    return (1.0 - (1.0 + eps) ** (m - 1.0)) / (1.0 + eps) ** m


def scaled_source_identity(u, m: float, eps: float,
                           grid: SpaceTimeGrid | None = None) -> dict:
    """Residuals of the rescaled-solution identity for u_eps = u/(1+eps).

    Writing R(.) for the scheme residual, the identity

        R(u_eps) = R(u)/(1+eps) + lap(f),   f = c(m, eps) u^m,

    holds for arbitrary fields: it combines the homogeneity of the
    power law with the linearity of the discrete operators.  'exact'
    measures it directly, normalized by the magnitude of the stencil
    terms entering the expressions (the conditioning-free scale; the
    Laplacian of a smooth field cancels ~dx^2/4 of its summands, so a
    residual relative to |lap f| cannot beat machine precision times
    that amplification).  'solution_rel' additionally reports
    |R(u_eps) - lap f| against max(|lap f|, |R(u_eps)|); it vanishes
    only to the extent u solves the scheme.
    """
    if isinstance(u, ScalarField):
        grid = u.grid
    uv = field_values(u)
    c = scaled_source_coefficient(m, eps)
    f = c * uv ** m
    lap_f = laplacian_all(f, grid)[..., 1:]
    interior = grid.interior_mask()
    lap_f = np.where(interior[..., None], lap_f, 0.0)
    r_u = scheme_residual(uv, m, grid)
    u_eps = uv / (1.0 + eps)
    r_eps = scheme_residual(u_eps, m, grid)
    exact = float(np.abs(r_eps - r_u / (1.0 + eps) - lap_f).max())
    solution = float(np.abs(r_eps - lap_f).max())
    stencil = 2 * grid.d / grid.dx ** 2
    if grid.d == 2:
        stencil = 2.0 / grid.dx ** 2 + 2.0 / grid.dy ** 2
    op_scale = (2.0 * stencil * float((u_eps ** m).max())
                + 2.0 * float(u_eps.max()) / grid.dt)
    cancel_scale = max(float(np.abs(lap_f).max()), float(np.abs(r_eps).max()))
    return {
        "exact": exact / op_scale if op_scale > 0 else 0.0,
        "solution_rel": solution / cancel_scale if cancel_scale > 0 else 0.0,
        "operator_scale": op_scale,
        "term_scale": cancel_scale,
    }
