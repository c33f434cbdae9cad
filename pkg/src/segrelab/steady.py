"""Stationary solves, stabilization detection, and limit certificates.

The stationary system is solved by damped Newton on the coupled
discrete residual with its analytic Jacobian; on stagnation the solver
falls back to pseudo-time stepping (the parabolic flow itself) and
polishes with Newton afterwards.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Field, laplacian_apply, l2_norm, h1_norm, h1_seminorm, linf_norm, lp_norm
from .evolve import (
    Problem,
    SimState,
    StepperConfig,
    initial_state,
    run_until,
)


class SteadyError(RuntimeError):
    pass


@dataclass
class StationaryPair:
    u_hat: Field
    v_hat: Field
    residual_u: float
    residual_v: float
    method: str
    iterations: int

    def state(self) -> SimState:
        return SimState(0.0, self.u_hat.copy(), self.v_hat.copy())


@dataclass
class LimitCertificate:
    vi_violation_u: float
    vi_violation_v: float
    overlap: float
    kappa_overlap: float
    holder_ratio: float | None = None


def _residual(prob, bu, bv, ui, vi):
    g = prob.grid
    A = g.neg_laplacian
    ru = A @ ui - g.boundary_rhs(bu) - prob.model_u.f(ui) + prob.kappa * ui * vi**2
    rv = A @ vi - g.boundary_rhs(bv) - prob.model_v.f(vi) + prob.kappa * vi * ui**2
    return ru, rv


def _jacobian(prob, ui, vi):
    g = prob.grid
    A = g.neg_laplacian
    k = prob.kappa
    Juu = A + sp.diags(k * vi**2 - prob.model_u.fprime(ui))
    Jvv = A + sp.diags(k * ui**2 - prob.model_v.fprime(vi))
    Juv = sp.diags(2.0 * k * ui * vi)
    return sp.bmat([[Juu, Juv], [Juv, Jvv]], format="csc")


def _newton(prob, bu, bv, ui, vi, tol, max_iter=60, max_halvings=20):
    history = []
    for it in range(max_iter):
        ru, rv = _residual(prob, bu, bv, ui, vi)
        rnorm = max(np.max(np.abs(ru)), np.max(np.abs(rv)))
        history.append(rnorm)
        if rnorm <= tol:
            return ui, vi, it, history, True
        J = _jacobian(prob, ui, vi)
        delta = spla.spsolve(J, np.concatenate([ru, rv]))
        du, dv = delta[: ui.size], delta[ui.size:]
        lam = 1.0
        for _ in range(max_halvings):
            uc, vc = ui - lam * du, vi - lam * dv
            rcu, rcv = _residual(prob, bu, bv, uc, vc)
            rc = max(np.max(np.abs(rcu)), np.max(np.abs(rcv)))
            if rc < rnorm:
                ui, vi = uc, vc
                break
            lam *= 0.5
        else:
            return ui, vi, it, history, False  # stagnation
    return ui, vi, max_iter, history, False


def solve_stationary(prob: Problem, guess_u: Field, guess_v: Field,
                     tol=1e-10, pseudo_dt=0.5, pseudo_max_steps=200000,
                     pseudo_threshold=None) -> StationaryPair:
    """Damped Newton with pseudo-time fallback for the stationary system.

    Boundary traces are taken from the problem's terminal boundary data
    and injected exactly, never solved for.
    """
    g = prob.grid
    bu = prob.sched_u._mask(prob.sched_u.terminal_trace)
    bv = prob.sched_v._mask(prob.sched_v.terminal_trace)
    ui, vi = g.interior(guess_u.values), g.interior(guess_v.values)

    ui, vi, iters, history, ok = _newton(prob, bu, bv, ui, vi, tol)
    method = "newton"
    if not ok:
        # parabolic flow toward the stationary state, then polish
        method = "pseudo_time"
        L = max(prob.model_u.lipschitz_bound, prob.model_v.lipschitz_bound, 1e-12)
        dt = min(pseudo_dt, 1.0 / L)
        u0 = Field(g, g.embed(np.clip(g.interior(guess_u.values), 0.0, 1.0), bu))
        v0 = Field(g, g.embed(np.clip(g.interior(guess_v.values), 0.0, 1.0), bv))
        thr = pseudo_threshold if pseudo_threshold is not None else max(tol, 1e-9)
        cfg = StepperConfig(dt=dt, max_steps=pseudo_max_steps, threshold=thr,
                            sample_stride=20)
        traj = run_until(initial_state(prob, u0, v0), prob, cfg)
        ui = traj.final.u.interior()
        vi = traj.final.v.interior()
        ui, vi, it2, history, ok = _newton(prob, bu, bv, ui, vi, tol)
        iters += it2
        if not ok:
            ru, rv = _residual(prob, bu, bv, ui, vi)
            worst = max(np.max(np.abs(ru)), np.max(np.abs(rv)))
            raise SteadyError(
                f"stationary solve failed: residual {worst:.3e} > tol {tol:g}"
            )

    ru, rv = _residual(prob, bu, bv, ui, vi)
    u_hat = Field(g, g.embed(ui, bu))
    v_hat = Field(g, g.embed(vi, bv))
    for name, w in (("u_hat", u_hat), ("v_hat", v_hat)):
        if w.values.min() < -1e-8 or w.values.max() > 1.0 + 1e-8:
            raise SteadyError(f"{name} leaves [0, 1] beyond 1e-8")
    return StationaryPair(
        u_hat, v_hat,
        residual_u=float(np.max(np.abs(ru))),
        residual_v=float(np.max(np.abs(rv))),
        method=method,
        iterations=iters,
    )


def pair_distance(state: SimState, pair: StationaryPair):
    """Distances between a state and a stationary pair in several norms."""
    g = state.u.grid
    du = Field(g, state.u.values - pair.u_hat.values)
    dv = Field(g, state.v.values - pair.v_hat.values)
    return {
        "h": float(np.sqrt(h1_norm(du) ** 2 + h1_norm(dv) ** 2)),
        "l2": float(np.sqrt(l2_norm(du) ** 2 + l2_norm(dv) ** 2)),
        "l4": float((lp_norm(du, 4) ** 4 + lp_norm(dv, 4) ** 4) ** 0.25),
        "linf": float(max(linf_norm(du), linf_norm(dv))),
    }


def stabilization_detect(traj, pair: StationaryPair, tol=1e-4) -> dict:
    """Compare a stabilized trajectory's final state against a stationary pair."""
    if traj.status != "stabilized":
        raise SteadyError(f"trajectory status {traj.status!r}, not stabilized")
    d = pair_distance(traj.final, pair)
    d["success"] = bool(d["h"] <= tol)
    d["tolerance"] = tol
    return d


def variational_inequality_residual(f_field: Field, model) -> float:
    """Max over interior nodes of the positive part of -Lap_h u - f(u).

    With lumped quadrature the nonnegative nodal indicators generate all
    discrete test functions, so entrywise positivity is exactly the weak
    inequality.
    """
    g = f_field.grid
    lap = g.interior(laplacian_apply(f_field).values)
    r = lap - model.f(f_field.interior())
    return float(max(np.max(r), 0.0))


def morrey_check(u: Field) -> float:
    """Worst pairwise Holder-1/2 ratio |u(x)-u(y)| / (4 |grad u|_2 sqrt|x-y|)."""
    if u.grid.dim != 1:
        raise SteadyError("the Morrey check is one-dimensional")
    x = u.grid.axis_coords()[0]
    vals = u.values
    gnorm = h1_seminorm(u)
    if gnorm == 0.0:
        return 0.0
    dx = np.abs(x[:, None] - x[None, :])
    dv = np.abs(vals[:, None] - vals[None, :])
    mask = dx > 0
    ratios = dv[mask] / (4.0 * gnorm * np.sqrt(dx[mask]))
    return float(np.max(ratios))


def limit_certificate(pair: StationaryPair, prob: Problem) -> LimitCertificate:
    """Certify the segregation diagnostics of a stationary pair."""
    w = pair.u_hat.grid.quadrature_weight
    ui, vi = pair.u_hat.interior(), pair.v_hat.interior()
    overlap = float(w * np.sum(ui**2 * vi**2))
    holder = morrey_check(pair.u_hat) if pair.u_hat.grid.dim == 1 else None
    return LimitCertificate(
        vi_violation_u=variational_inequality_residual(pair.u_hat, prob.model_u),
        vi_violation_v=variational_inequality_residual(pair.v_hat, prob.model_v),
        overlap=overlap,
        kappa_overlap=prob.kappa * overlap,
        holder_ratio=holder,
    )
