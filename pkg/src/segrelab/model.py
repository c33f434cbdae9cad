"""Reaction kinetics, time-dependent boundary schedules, and initial data.

Kinetics vanish on the negative half-line and are negative above 1, so
[0, 1] x [0, 1] is invariant for the coupled flow.  Boundary schedules
follow  psi(x, t) = psi_inf(x) + rho(x) * t^2 exp(-gamma t), which has
an integrable first and second time derivative, vanishing derivative at
t = 0, and closed-form calculus throughout.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import Field, Grid, MeshError, harmonic_extension


class ModelError(ValueError):
    pass


_KINDS = ("logistic", "smooth_logistic", "zero")


@dataclass(frozen=True)
class ReactionModel:
    """Reaction term of one species: logistic s(1-s), smooth s^2(1-s), or zero."""

    kind: str = "logistic"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ModelError(f"unknown reaction kind {self.kind!r}")

    @property
    def lipschitz_bound(self):
        """sup over [0, 1] of |f'| for the chosen kind."""
        if self.kind == "logistic":
            return 1.0  # f'(s) = 1 - 2s
        if self.kind == "smooth_logistic":
            return 1.0  # f'(s) = 2s - 3s^2, |f'| <= 1 on [0, 1]
        return 0.0

    def f(self, s):
        s = np.asarray(s, dtype=float)
        pos = np.maximum(s, 0.0)
        if self.kind == "logistic":
            out = pos * (1.0 - pos)
        elif self.kind == "smooth_logistic":
            out = pos**2 * (1.0 - pos)
        else:
            out = np.zeros_like(pos)
        return out if out.ndim else float(out)

    def fprime(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "logistic":
            out = np.where(s > 0.0, 1.0 - 2.0 * s, 0.0)
        elif self.kind == "smooth_logistic":
            out = np.where(s > 0.0, 2.0 * s - 3.0 * s**2, 0.0)
        else:
            out = np.zeros_like(s)
        return out if out.ndim else float(out)

    def F(self, s):
        """Antiderivative with F(0) = 0; zero for s < 0."""
        s = np.asarray(s, dtype=float)
        pos = np.maximum(s, 0.0)
        if self.kind == "logistic":
            out = pos**2 / 2.0 - pos**3 / 3.0
        elif self.kind == "smooth_logistic":
            out = pos**3 / 3.0 - pos**4 / 4.0
        else:
            out = np.zeros_like(pos)
        return out if out.ndim else float(out)


def reaction_f(model: ReactionModel, s):
    return model.f(s)


def antiderivative_F(model: ReactionModel, s):
    return model.F(s)


def _transient(t, gamma):
    t = np.asarray(t, dtype=float)
    return t**2 * np.exp(-gamma * t)


def _transient_dt(t, gamma):
    t = np.asarray(t, dtype=float)
    return (2.0 * t - gamma * t**2) * np.exp(-gamma * t)


def _transient_dtt(t, gamma):
    t = np.asarray(t, dtype=float)
    return (2.0 - 4.0 * gamma * t + gamma**2 * t**2) * np.exp(-gamma * t)


@dataclass(frozen=True)
class BoundarySchedule:
    """Dirichlet data psi(x, t) = psi_inf(x) + rho(x) t^2 exp(-gamma t).

    terminal_trace and transient_shape are full-shaped arrays whose
    interior entries are ignored; only boundary nodes matter.
    """

    grid: Grid
    terminal_trace: np.ndarray
    transient_shape: np.ndarray
    decay_rate: float = 1.0
    mode: str = "stationary"

    def __post_init__(self):
        if self.mode not in ("stationary", "decaying"):
            raise ModelError(f"unknown boundary mode {self.mode!r}")
        psi = np.asarray(self.terminal_trace, dtype=float)
        rho = np.asarray(self.transient_shape, dtype=float)
        if psi.shape != self.grid.shape or rho.shape != self.grid.shape:
            raise ModelError("trace arrays must have the full grid shape")
        object.__setattr__(self, "terminal_trace", psi)
        object.__setattr__(self, "transient_shape", rho)
        if self.decay_rate <= 0:
            raise ModelError("decay_rate must be positive")
        bmask = self.grid.boundary_mask
        if self.mode == "stationary":
            if np.any(rho[bmask] != 0.0):
                raise ModelError("stationary schedule requires rho = 0")
        # range check over a fine time sample; the scalar factor peaks at
        # t = 2/gamma with value 4/(e gamma)^2
        ts = np.linspace(0.0, 10.0 / self.decay_rate, 400)
        s = _transient(ts, self.decay_rate)
        vals = psi[bmask][:, None] + rho[bmask][:, None] * s[None, :]
        if vals.size and (vals.min() < -1e-12 or vals.max() > 1.0 + 1e-12):
            raise ModelError("boundary values leave [0, 1]")

    @classmethod
    def stationary(cls, grid, trace):
        if np.isscalar(trace):
            trace = np.full(grid.shape, float(trace))
        return cls(grid, np.asarray(trace, dtype=float), np.zeros(grid.shape))

    @classmethod
    def decaying(cls, grid, trace, rho, gamma=1.0):
        if np.isscalar(trace):
            trace = np.full(grid.shape, float(trace))
        if np.isscalar(rho):
            rho = np.full(grid.shape, float(rho))
        return cls(
            grid,
            np.asarray(trace, dtype=float),
            np.asarray(rho, dtype=float),
            gamma,
            "decaying",
        )

    def _mask(self, arr):
        out = np.zeros(self.grid.shape)
        m = self.grid.boundary_mask
        out[m] = arr[m]
        return out

    def at(self, t):
        """Boundary values at time t (full-shaped array, interior zero)."""
        if t < 0:
            raise ModelError("t must be nonnegative")
        if self.mode == "stationary":
            return self._mask(self.terminal_trace)
        s = float(_transient(t, self.decay_rate))
        return self._mask(self.terminal_trace + s * self.transient_shape)

    def dt_at(self, t):
        """Time derivative of the boundary values at time t."""
        if self.mode == "stationary":
            return np.zeros(self.grid.shape)
        s = float(_transient_dt(t, self.decay_rate))
        return self._mask(s * self.transient_shape)

    def dtt_at(self, t):
        if self.mode == "stationary":
            return np.zeros(self.grid.shape)
        s = float(_transient_dtt(t, self.decay_rate))
        return self._mask(s * self.transient_shape)

    def terminal_extension(self) -> Field:
        """Harmonic extension of the terminal trace psi_inf."""
        return harmonic_extension(self._mask(self.terminal_trace), self.grid)

    def shape_extension(self) -> Field:
        """Harmonic extension of the transient shape rho."""
        return harmonic_extension(self._mask(self.transient_shape), self.grid)


def boundary_at(sched: BoundarySchedule, t):
    return sched.at(t)


@dataclass
class InitialData:
    """Initial pair (u0, v0) with trace compatibility and optional segregation."""

    u0: Field
    v0: Field
    segregated: bool = False

    def validate(self, sched_u=None, sched_v=None, tol=1e-12):
        for name, f in (("u0", self.u0), ("v0", self.v0)):
            if f.values.min() < -tol or f.values.max() > 1.0 + tol:
                raise ModelError(f"{name} leaves [0, 1]")
        if self.segregated:
            prod = np.abs(self.u0.values * self.v0.values)
            if prod.max() > 0.0:
                raise ModelError("segregated flag set but u0*v0 != 0 somewhere")
        for f, sched in ((self.u0, sched_u), (self.v0, sched_v)):
            if sched is None:
                continue
            m = f.grid.boundary_mask
            if np.max(np.abs(f.values[m] - sched.at(0.0)[m])) > tol:
                raise ModelError("initial trace incompatible with boundary data")
        return self


def bump_profile(r):
    """Standard mollifier exp(1 - 1/(1 - r^2)) on |r| < 1, zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    ri = r[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ri**2))
    return out


def bump_field(grid: Grid, centers, radii, amplitudes) -> Field:
    """Superposition of compactly supported bumps (zero boundary trace)."""
    centers = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers]
    radii = [float(r) for r in radii]
    amplitudes = [float(a) for a in amplitudes]
    if not (len(centers) == len(radii) == len(amplitudes)):
        raise ModelError("centers, radii, amplitudes must have equal length")
    coords = grid.meshgrid()
    vals = np.zeros(grid.shape)
    for c, r, a in zip(centers, radii, amplitudes):
        if not (0.0 < a <= 1.0):
            raise ModelError("amplitudes must lie in (0, 1]")
        if r <= 0:
            raise ModelError("radii must be positive")
        d2 = np.zeros(grid.shape)
        for ax in range(grid.dim):
            d2 += (coords[ax] - c[ax]) ** 2
        vals += a * bump_profile(np.sqrt(d2) / r)
    vals[grid.boundary_mask] = 0.0
    return Field(grid, np.clip(vals, 0.0, 1.0))


def make_segregated_bumps(
    grid: Grid, centers_u, radii_u, centers_v, radii_v,
    amplitudes_u=None, amplitudes_v=None,
) -> InitialData:
    """Segregated initial pair built from disjoint mollifier bumps.

    Supports must be pairwise disjoint across species and contained in
    the open domain, so u0 * v0 = 0 holds exactly and both traces vanish.
    """
    amplitudes_u = amplitudes_u or [1.0] * len(centers_u)
    amplitudes_v = amplitudes_v or [1.0] * len(centers_v)
    cu = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers_u]
    cv = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers_v]
    for c, r in zip(cu, radii_u):
        for cc, rr in zip(cv, radii_v):
            if np.linalg.norm(c - cc) < r + rr:
                raise ModelError("u-support overlaps a v-support")
    for cs, rs in ((cu, radii_u), (cv, radii_v)):
        for c, r in zip(cs, rs):
            for ci, L in zip(c, grid.lengths):
                if ci - r < 0.0 or ci + r > L:
                    raise ModelError("bump support reaches the boundary")
    u0 = bump_field(grid, cu, radii_u, amplitudes_u)
    v0 = bump_field(grid, cv, radii_v, amplitudes_v)
    prod = u0.values * v0.values
    if np.any(prod != 0.0):  # belt and braces: disjointness should force this
        raise ModelError("bump supports intersect on the grid")
    return InitialData(u0, v0, segregated=True)
