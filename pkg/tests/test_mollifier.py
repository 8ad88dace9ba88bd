import math

import numpy as np
import pytest

from pme_obstacle import (MollifierParams, ScalarField, SpaceTimeGrid,
                          mollify, mollifier_identity_residual)
from pme_obstacle.fixtures import FieldSampler

from oracles import riemann_mollify


def _time_field(grid, profile):
    return np.broadcast_to(profile, grid.full_shape).copy()


def test_invalid_timescale():
    with pytest.raises(ValueError):
        MollifierParams(h=0.0, v_o=np.zeros(3))
    with pytest.raises(ValueError):
        MollifierParams(h=-0.1, v_o=np.zeros(3))


def test_initial_slice_is_datum():
    g = SpaceTimeGrid(d=1, nx=5, nt=10, T=1.0)
    rng = np.random.default_rng(0)
    v = rng.random(g.full_shape)
    v_o = rng.random(g.space_shape)
    out = mollify(v, MollifierParams(h=0.2, v_o=v_o), g)
    assert np.array_equal(out.values[..., 0], v_o)


def test_constant_fixed_point():
    g = SpaceTimeGrid(d=1, nx=4, nt=50, T=1.0)
    c = 2.75
    out = mollify(np.full(g.full_shape, c),
                  MollifierParams(h=0.05, v_o=np.full(g.space_shape, c)), g)
    assert np.abs(out.values - c).max() < 1e-13


def test_linear_ramp_closed_form():
    g = SpaceTimeGrid(d=1, nx=2, nt=500, T=1.0)
    h = 0.3
    v = _time_field(g, g.times)
    out = mollify(v, MollifierParams(h=h, v_o=np.zeros(g.space_shape)), g)
    closed = g.times - h * (1.0 - np.exp(-g.times / h))
    # the one-step recurrence is exact for piecewise-linear input
    assert np.abs(out.values - closed).max() < 1e-13


def test_identity_residual_constant_zero():
    g = SpaceTimeGrid(d=1, nx=3, nt=60, T=1.0)
    v = np.full(g.full_shape, 1.3)
    res = mollifier_identity_residual(
        v, MollifierParams(h=0.1, v_o=np.full(g.space_shape, 1.3)), g)
    assert res < 1e-13


def test_identity_residual_linear_ramp_taylor_bound():
    h = 0.3
    for nt in (200, 400):
        g = SpaceTimeGrid(d=1, nx=2, nt=nt, T=1.0)
        v = _time_field(g, g.times)
        res = mollifier_identity_residual(
            v, MollifierParams(h=h, v_o=np.zeros(g.space_shape)), g)
        # third derivative of the averaged ramp is exp(-t/h)/h^2, so the
        # centered-difference defect is bounded by dt^2/(6 h^2); sup v = 1
        assert res <= 1.2 * g.dt ** 2 / (6.0 * h ** 2)


def test_identity_residual_refinement_order():
    h = 0.25
    coeffs = FieldSampler(4).rng.normal(size=(4, 2))

    def profile_fn(t):
        out = np.zeros_like(t)
        for j, (a, b) in enumerate(coeffs, start=1):
            out = out + a / j * np.sin(np.pi * j * t) \
                + b / j * np.cos(np.pi * j * t)
        return out - out.min() + 0.2

    res = []
    for nt in (100, 200, 400):
        g = SpaceTimeGrid(d=1, nx=2, nt=nt, T=1.0)
        prof = profile_fn(g.times)
        v = _time_field(g, prof)
        res.append(mollifier_identity_residual(
            v, MollifierParams(h=h, v_o=np.full(g.space_shape, prof[0])), g))
    order = math.log(res[0] / res[2]) / math.log(4)
    assert order >= 1.8


def test_monotone_in_input():
    g = SpaceTimeGrid(d=1, nx=6, nt=40, T=1.0)
    rng = np.random.default_rng(5)
    v_o = rng.random(g.space_shape)
    lo = rng.random(g.full_shape)
    hi = lo + rng.random(g.full_shape)
    p = MollifierParams(h=0.07, v_o=v_o)
    assert np.all(mollify(hi, p, g).values >= mollify(lo, p, g).values - 1e-14)


def test_bounds_between_extremes():
    g = SpaceTimeGrid(d=1, nx=6, nt=40, T=1.0)
    rng = np.random.default_rng(6)
    v = rng.random(g.full_shape) + 0.5
    v_o = rng.random(g.space_shape)
    out = mollify(v, MollifierParams(h=0.11, v_o=v_o), g).values
    assert out.min() >= min(v.min(), v_o.min()) - 1e-14
    assert out.max() <= max(v.max(), v_o.max()) + 1e-14


def test_converges_to_signal_as_h_shrinks():
    g = SpaceTimeGrid(d=1, nx=4, nt=200, T=1.0)
    prof = np.sin(2 * np.pi * g.times) + 1.5
    v = _time_field(g, prof)
    v_o = np.full(g.space_shape, prof[0])
    w_sp = g.space_weights()
    tw = g.time_weights()
    dists = []
    for h in (0.1, 0.01, 0.001):
        out = mollify(v, MollifierParams(h=h, v_o=v_o), g).values
        err2 = np.tensordot(w_sp, (out - v) ** 2, axes=((0,), (0,)))
        dists.append(math.sqrt(float(np.sum(tw * err2))))
    assert dists[0] > dists[1] > dists[2]


def test_against_riemann_sum_oracle():
    g = SpaceTimeGrid(d=1, nx=2, nt=40, T=1.0)
    rng = np.random.default_rng(7)
    prof = np.cumsum(rng.random(g.nt + 1)) * g.dt + 0.3
    v = _time_field(g, prof)
    h = 0.15
    out = mollify(v, MollifierParams(h=h, v_o=np.full(g.space_shape, prof[0])), g)
    ref = riemann_mollify(prof, g.times, h, prof[0])
    # the oracle integrates the same piecewise-linear signal numerically
    assert np.abs(out.values[0] - ref).max() < 5e-6
