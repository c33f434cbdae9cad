"""Reaction kinetics, boundary schedules, and bump initial data."""

import numpy as np
import pytest
import scipy.integrate

from segrelab.mesh import Field, Grid
from segrelab.model import (
    BoundarySchedule,
    InitialData,
    ModelError,
    ReactionModel,
    bump_field,
    bump_profile,
    make_segregated_bumps,
)


def test_reaction_values():
    logi = ReactionModel("logistic")
    assert logi.f(2.0) == -2.0
    assert logi.f(-1.0) == 0.0
    assert logi.f(1.0) == 0.0
    assert logi.F(1.0) == pytest.approx(1.0 / 6.0)
    assert logi.F(0.5) == pytest.approx(1.0 / 12.0)
    smooth = ReactionModel("smooth_logistic")
    assert smooth.f(0.5) == pytest.approx(0.125)
    assert smooth.f(-1.0) == 0.0
    assert smooth.fprime(0.0) == 0.0
    zero = ReactionModel("zero")
    assert zero.f(0.7) == 0.0 and zero.F(0.7) == 0.0
    with pytest.raises(ModelError):
        ReactionModel("cubic")


@pytest.mark.parametrize("kind", ["logistic", "smooth_logistic"])
def test_reaction_calculus(kind):
    model = ReactionModel(kind)
    rng = np.random.default_rng(2)
    s = rng.uniform(0.05, 2.0, 40)
    eps = 1e-6
    fd = (model.f(s + eps) - model.f(s - eps)) / (2 * eps)
    assert np.allclose(model.fprime(s), fd, atol=1e-8)
    for sv in s[:10]:
        q, _ = scipy.integrate.quad(model.f, 0.0, sv)
        assert model.F(sv) == pytest.approx(q, abs=1e-10)
    a, b = rng.uniform(0.0, 1.0, (2, 500))
    L = model.lipschitz_bound
    assert np.all(np.abs(model.f(a) - model.f(b)) <= L * np.abs(a - b) + 1e-14)


def test_schedule_stationary():
    g = Grid.line(9, 1.0)
    s = BoundarySchedule.stationary(g, 0.4)
    m = g.boundary_mask
    assert np.all(s.at(0.0)[m] == 0.4)
    assert np.all(s.at(7.3)[m] == 0.4)
    assert np.all(s.dt_at(1.0) == 0.0)
    assert np.all(s.dtt_at(1.0) == 0.0)
    with pytest.raises(ModelError):
        BoundarySchedule(g, np.zeros(g.shape), np.full(g.shape, 0.1))


def test_schedule_decaying_calculus():
    g = Grid.line(9, 1.0)
    gamma, rho, psi = 1.0, 0.1, 0.2
    s = BoundarySchedule.decaying(g, psi, rho, gamma)
    m = g.boundary_mask
    # transient factor t^2 exp(-gamma t): value and derivative at t = 2
    assert s.at(0.0)[m] == pytest.approx(psi)
    assert np.all(s.dt_at(0.0) == 0.0)
    assert s.at(2.0)[m][0] == pytest.approx(psi + rho * 4.0 * np.exp(-2.0))
    eps = 1e-6
    fd = (s.at(2.0 + eps)[m] - s.at(2.0 - eps)[m]) / (2 * eps)
    assert np.allclose(s.dt_at(2.0)[m], fd, atol=1e-8)
    fd2 = (s.dt_at(2.0 + eps)[m] - s.dt_at(2.0 - eps)[m]) / (2 * eps)
    assert np.allclose(s.dtt_at(2.0)[m], fd2, atol=1e-7)
    with pytest.raises(ModelError):
        s.at(-0.1)


def test_schedule_range_and_rate_validation():
    g = Grid.line(9, 1.0)
    # peak value psi + rho * 4 / (e gamma)^2 exceeds 1
    with pytest.raises(ModelError):
        BoundarySchedule.decaying(g, 0.9, 0.5, 1.0)
    with pytest.raises(ModelError):
        BoundarySchedule.decaying(g, 0.1, 0.1, -1.0)
    with pytest.raises(ModelError):
        BoundarySchedule(g, np.zeros(3), np.zeros(3))


def test_bump_profile_and_field():
    assert bump_profile(np.array([0.0]))[0] == 1.0
    assert np.all(bump_profile(np.array([1.0, 2.0])) == 0.0)
    g = Grid.line(200, 10.0)
    f = bump_field(g, [np.array([3.0])], [1.0], [0.8])
    assert f.values.max() == pytest.approx(0.8, abs=1e-3)
    x = g.axis_coords()[0]
    assert np.all(f.values[np.abs(x - 3.0) >= 1.0] == 0.0)
    assert np.all(f.values[g.boundary_mask] == 0.0)
    with pytest.raises(ModelError):
        bump_field(g, [np.array([3.0])], [1.0], [1.5])
    with pytest.raises(ModelError):
        bump_field(g, [np.array([3.0])], [-1.0], [0.5])
    with pytest.raises(ModelError):
        bump_field(g, [np.array([3.0])], [1.0], [0.5, 0.5])


def test_segregated_bumps():
    g = Grid.line(127, 10.0)
    init = make_segregated_bumps(g, [np.array([3.0])], [1.0],
                                 [np.array([7.0])], [1.0])
    assert init.segregated
    assert np.all(init.u0.values * init.v0.values == 0.0)
    with pytest.raises(ModelError):
        make_segregated_bumps(g, [np.array([4.0])], [1.5],
                              [np.array([6.0])], [1.5])
    with pytest.raises(ModelError):
        make_segregated_bumps(g, [np.array([0.5])], [1.0],
                              [np.array([7.0])], [1.0])


def test_initial_data_validation():
    g = Grid.line(31, 1.0)
    sched = BoundarySchedule.stationary(g, 0.0)
    ok = Field(g, g.embed(np.full(31, 0.5)))
    InitialData(ok, ok).validate(sched, sched)
    too_big = Field(g, g.embed(np.full(31, 1.5)))
    with pytest.raises(ModelError):
        InitialData(too_big, ok).validate()
    with pytest.raises(ModelError):
        InitialData(ok, ok, segregated=True).validate()
    shifted = BoundarySchedule.stationary(g, 0.25)
    with pytest.raises(ModelError):
        InitialData(ok, ok).validate(shifted, shifted)
