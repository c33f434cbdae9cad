"""Orchestration: single runs, kappa sweeps, diagonal extraction, verify.

Every run is deterministic for a fixed configuration; sweep members are
independent and may execute on a worker pool, with the report assembled
as a sequential reduction ordered by kappa.
"""

import csv
import json
import os
from dataclasses import dataclass, field as dc_field
from multiprocessing import get_context

import numpy as np

from . import figures
from .config import (
    build_grid,
    build_initial_data,
    build_problem,
    build_schedules,
    build_stepper,
    sweep_kappas,
    worker_count,
)
from .energy import (
    EnergyTracker,
    energy_stationary,
    h_bound_audit,
    mu_quantity,
    stationary_breakdown,
)
from .evolve import TIMESERIES_COLUMNS, initial_state, run_until
from .mesh import Field, l2_norm, linf_norm, read_field, write_field
from .steady import limit_certificate, pair_distance, solve_stationary, StationaryPair


class SweepError(RuntimeError):
    pass


# overridable implementations, used by the fault-injection hook of `verify`
_HOOKS = {}


@dataclass
class RunResult:
    kappa: float
    trajectory: object
    pair: StationaryPair
    certificate: object
    mu: float
    sup_h_norm: float
    min_energy: float
    max_energy: float

    def record(self):
        cert = self.certificate
        return {
            "kappa": self.kappa,
            "residual_u": self.pair.residual_u,
            "residual_v": self.pair.residual_v,
            "overlap": cert.overlap,
            "kappa_overlap": cert.kappa_overlap,
            "vi_u": cert.vi_violation_u,
            "vi_v": cert.vi_violation_v,
            "holder_ratio": cert.holder_ratio,
            "method": self.pair.method,
            "iterations": self.pair.iterations,
            "status": self.trajectory.status,
            "sup_h_norm": self.sup_h_norm,
            "min_energy": self.min_energy,
            "max_energy": self.max_energy,
            "mu": self.mu,
        }


def attach_energy(traj, prob, init_state=None):
    """Fill the energy column of a trajectory's sample rows in place."""
    if prob.sched_u.mode == "stationary" and prob.sched_v.mode == "stationary":
        U_inf = prob.sched_u.terminal_extension()
        V_inf = prob.sched_v.terminal_extension()
        for row, state in zip(traj.rows, traj.samples):
            b = stationary_breakdown(state, prob, U_inf, V_inf)
            row["energy"] = b.total
    else:
        U0 = prob.sched_u.terminal_extension()  # psi(0) = psi_inf for this family
        V0 = prob.sched_v.terminal_extension()
        tracker = EnergyTracker(prob, U0, V0)
        for row, state in zip(traj.rows, traj.samples):
            tracker.advance(state)
            row["energy"] = tracker.breakdown().total
    return traj


def write_timeseries_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_COLUMNS)
        for row in rows:
            writer.writerow([
                row["step"],
                *[repr(float(row[k])) for k in TIMESERIES_COLUMNS[1:]],
            ])


def run_single(cfg, kappa=None, outdir=None, solve_steady=True,
               render_figures=True) -> RunResult:
    """Execute one trajectory, its stationary solve, and the certificate."""
    prob = build_problem(cfg, kappa)
    stepper = build_stepper(cfg, prob)
    grid = prob.grid
    init = build_initial_data(cfg, grid, prob.sched_u, prob.sched_v)
    state0 = initial_state(prob, init.u0, init.v0)
    traj = run_until(state0, prob, stepper)
    attach_energy(traj, prob)
    mu = mu_quantity(init, prob.sched_u, prob.sched_v)

    pair = None
    cert = None
    if solve_steady:
        pair = solve_stationary(prob, traj.final.u, traj.final.v,
                                tol=float(cfg["steady.tol"]))
        cert = limit_certificate(pair, prob)

    energies = [row["energy"] for row in traj.rows]
    sup_h = max(np.hypot(row["u_h1"], row["v_h1"]) for row in traj.rows)
    result = RunResult(
        kappa=prob.kappa,
        trajectory=traj,
        pair=pair,
        certificate=cert,
        mu=mu,
        sup_h_norm=float(sup_h),
        min_energy=float(np.nanmin(energies)),
        max_energy=float(np.nanmax(energies)),
    )
    if outdir is not None:
        _persist_run(result, outdir, render_figures)
    return result


def _persist_run(result, outdir, render_figures=True):
    os.makedirs(outdir, exist_ok=True)
    traj = result.trajectory
    write_timeseries_csv(traj.rows, os.path.join(outdir, "timeseries.csv"))
    write_field(os.path.join(outdir, "final_u.snap"), traj.final.u, traj.final.t)
    write_field(os.path.join(outdir, "final_v.snap"), traj.final.v, traj.final.t)
    states_dir = os.path.join(outdir, "states")
    os.makedirs(states_dir, exist_ok=True)
    for state in traj.samples:
        stem = os.path.join(states_dir, f"step_{state.step_index:09d}")
        write_field(stem + "_u.snap", state.u, state.t)
        write_field(stem + "_v.snap", state.v, state.t)
    if result.pair is not None:
        write_field(os.path.join(outdir, "pair_u.snap"), result.pair.u_hat)
        write_field(os.path.join(outdir, "pair_v.snap"), result.pair.v_hat)
        with open(os.path.join(outdir, "certificate.jsonl"), "w") as fh:
            rec = result.record()
            rec["guess"] = "stabilized parabolic state"
            fh.write(json.dumps(rec) + "\n")
    if render_figures:
        figdir = os.path.join(outdir, "figures")
        os.makedirs(figdir, exist_ok=True)
        figures.plot_timeseries(traj.rows, os.path.join(figdir, "timeseries.png"))
        figures.plot_state(traj.final, os.path.join(figdir, "final_state.png"),
                           title=f"kappa = {result.kappa:g}")


@dataclass
class SegregationReport:
    kappas: list
    records: list
    results: list  # RunResults ordered by kappa (None entries when loaded)
    limit_u: Field
    limit_v: Field
    max_nodal_products: list
    checks: dict = dc_field(default_factory=dict)
    audit: dict = dc_field(default_factory=dict)


def _loglog_slope(x, y):
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.maximum(np.asarray(y, dtype=float), 1e-300))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def _sweep_worker(args):
    cfg, kappa, outdir = args
    return run_single(cfg, kappa=kappa, outdir=outdir)


def run_sweep(cfg, outdir=None, render_figures=True) -> SegregationReport:
    """Run every kappa, assemble the segregation report, audit the bounds."""
    kappas = sweep_kappas(cfg)
    if len(kappas) < 3 or kappas[-1] / kappas[0] < 100.0:
        raise SweepError("sweep needs >= 3 kappa values spanning >= 2 decades")
    jobs = []
    for k in kappas:
        run_dir = None
        if outdir is not None:
            run_dir = os.path.join(outdir, f"kappa_{k:g}")
        jobs.append((cfg, k, run_dir))
    workers = worker_count(cfg)
    if workers > 1:
        with get_context("fork").Pool(workers) as pool:
            results = pool.map(_sweep_worker, jobs)
    else:
        results = [_sweep_worker(j) for j in jobs]
    results.sort(key=lambda r: r.kappa)
    return assemble_report(cfg, kappas, results, outdir, render_figures)


def assemble_report(cfg, kappas, results, outdir=None, render_figures=True):
    records = [r.record() for r in results]
    finest = results[-1]
    limit_u, limit_v = finest.pair.u_hat, finest.pair.v_hat

    products = [
        float(np.max(r.pair.u_hat.values * r.pair.v_hat.values)) for r in results
    ]
    overlaps = [rec["overlap"] for rec in records]
    # successive L2 distances between stationary pairs along the sweep
    succ = []
    for a, b in zip(results[:-1], results[1:]):
        du = Field(a.pair.u_hat.grid, b.pair.u_hat.values - a.pair.u_hat.values)
        dv = Field(a.pair.v_hat.grid, b.pair.v_hat.values - a.pair.v_hat.values)
        succ.append(float(np.sqrt(l2_norm(du) ** 2 + l2_norm(dv) ** 2)))

    mu = results[0].mu
    audit = h_bound_audit(
        kappas,
        [r.sup_h_norm for r in results],
        mu,
        min_energies=[r.min_energy for r in results],
        max_energies=[r.max_energy for r in results],
    )
    overlap_slope = _loglog_slope(kappas, overlaps)
    # Segregation rate measured on the L2 norm of the product u*v (the
    # overlap column stores its square), fitted across the whole sweep.
    rate_slope = _loglog_slope(kappas, np.sqrt(np.maximum(overlaps, 0.0)))
    ko_slope = _loglog_slope(kappas, [rec["kappa_overlap"] for rec in records])
    monotone_violations = [
        i for i in range(len(overlaps) - 1)
        if overlaps[i + 1] > overlaps[i] * 1.05
    ]
    checks = {
        "overlap_loglog_slope": overlap_slope,
        "segregation_rate_slope": rate_slope,
        "segregation_rate_in_band": bool(-1.3 <= rate_slope <= -0.7),
        "kappa_overlap_slope": ko_slope,
        "kappa_overlap_bounded": bool(ko_slope <= 0.1),
        "overlap_monotone_violations": monotone_violations,
        "limit_max_product": products[-1],
        "limit_product_decreasing": bool(products[-1] <= products[0]),
        "vi_u": records[-1]["vi_u"],
        "vi_v": records[-1]["vi_v"],
        "vi_ok": bool(records[-1]["vi_u"] <= 1e-6 and records[-1]["vi_v"] <= 1e-6),
        "successive_l2_distances": succ,
        "mu": mu,
    }
    report = SegregationReport(
        kappas=list(kappas),
        records=records,
        results=list(results),
        limit_u=limit_u,
        limit_v=limit_v,
        max_nodal_products=products,
        checks=checks,
        audit=audit,
    )
    if outdir is not None:
        _persist_report(report, outdir, render_figures)
    return report


def _persist_report(report, outdir, render_figures=True):
    rep_dir = os.path.join(outdir, "report")
    os.makedirs(rep_dir, exist_ok=True)
    with open(os.path.join(rep_dir, "segregation.jsonl"), "w") as fh:
        for rec in report.records:
            fh.write(json.dumps(rec) + "\n")
    audit = report.audit
    with open(os.path.join(rep_dir, "energy_audit.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "kappa", "max_h1", "min_energy", "max_energy", "mu",
            "fitted_R", "slope", "slope_ci",
        ])
        for i, k in enumerate(report.kappas):
            writer.writerow([
                repr(float(k)),
                repr(float(audit["sup_h_norms"][i])),
                repr(float(audit["min_energies"][i])),
                repr(float(audit["max_energies"][i])),
                repr(float(audit["mu"])),
                repr(float(audit["fitted_R"])),
                repr(float(audit["relative_slope"])),
                repr(float(audit["slope_ci"])),
            ])
    checks = dict(report.checks)
    checks["relative_slope"] = report.audit["relative_slope"]
    with open(os.path.join(rep_dir, "report.json"), "w") as fh:
        json.dump(checks, fh, indent=2, default=float)
    if render_figures:
        figdir = os.path.join(rep_dir, "figures")
        os.makedirs(figdir, exist_ok=True)
        figures.plot_overlap_vs_kappa(
            report.kappas, [r["overlap"] for r in report.records],
            os.path.join(figdir, "overlap_vs_kappa.png"))
        figures.plot_sup_h_vs_kappa(
            report.kappas, [r["sup_h_norm"] for r in report.records],
            os.path.join(figdir, "sup_hnorm_vs_kappa.png"))
        from .evolve import SimState
        figures.plot_state(SimState(0.0, report.limit_u, report.limit_v),
                           os.path.join(figdir, "limit_pair.png"),
                           title="candidate segregated limit")


# ---------------------------------------------------------------------------
# Diagonal extraction


def _pair_l2(u1, v1, u2, v2):
    du = Field(u1.grid, u1.values - u2.values)
    dv = Field(v1.grid, v1.values - v2.values)
    return float(np.sqrt(l2_norm(du) ** 2 + l2_norm(dv) ** 2))


def _pair_linf(u1, v1, u2, v2):
    du = Field(u1.grid, u1.values - u2.values)
    dv = Field(v1.grid, v1.values - v2.values)
    return float(max(linf_norm(du), linf_norm(dv)))


def diagonal_extraction(report: SegregationReport, depth):
    """Mirror the diagonal construction: (kappa_m, t_m) with distance < 1/m.

    For each m the smallest kappa whose stationary pair lies within
    1/(2m) of the candidate limit is selected, then the earliest sampled
    time whose state is within 1/(2m) of that pair.  Among admissible
    witnesses the one that also shrinks the sup-norm gap below the
    previous entry is preferred (the 1D Morrey route needs the emitted
    L-infinity distances to decrease), falling back to finer kappa when
    the current trajectory offers none.  Entries report the combined L2
    distance to the candidate limit (< 1/m by construction) and, in 1D,
    the L-infinity distance.
    """
    out = []
    results = report.results
    prev_linf = float("inf")
    for m in range(1, depth + 1):
        tol = 1.0 / (2.0 * m)
        chosen = None
        state_m = None
        for res in results:
            d_pair = _pair_l2(res.pair.u_hat, res.pair.v_hat,
                              report.limit_u, report.limit_v)
            if d_pair >= tol:
                continue
            for state in res.trajectory.samples:
                d_state = _pair_l2(state.u, state.v,
                                   res.pair.u_hat, res.pair.v_hat)
                if d_state >= tol:
                    continue
                linf = _pair_linf(state.u, state.v,
                                  report.limit_u, report.limit_v)
                if linf < prev_linf:
                    chosen = res
                    state_m = state
                    break
            if state_m is not None:
                break
        if state_m is None:
            break
        t_m = state_m.t
        prev_linf = _pair_linf(state_m.u, state_m.v,
                               report.limit_u, report.limit_v)
        combined = _pair_l2(state_m.u, state_m.v, report.limit_u, report.limit_v)
        entry = {
            "m": m,
            "kappa": chosen.kappa,
            "t": t_m,
            "l2_distance": combined,
            "bound": 1.0 / m,
        }
        if state_m.u.grid.dim == 1:
            entry["linf_distance"] = _pair_linf(
                state_m.u, state_m.v, report.limit_u, report.limit_v)
        out.append(entry)
    return out


def load_report(outdir) -> SegregationReport:
    """Reconstruct a report (pairs + sampled states) from a sweep directory."""
    from .evolve import SimState, Trajectory

    run_dirs = sorted(
        (float(name.split("_", 1)[1]), os.path.join(outdir, name))
        for name in os.listdir(outdir)
        if name.startswith("kappa_")
    )
    if not run_dirs:
        raise SweepError(f"no kappa_* run directories under {outdir}")
    results = []
    for kappa, rd in run_dirs:
        pu, _ = read_field(os.path.join(rd, "pair_u.snap"))
        pv, _ = read_field(os.path.join(rd, "pair_v.snap"))
        with open(os.path.join(rd, "certificate.jsonl")) as fh:
            rec = json.loads(fh.readline())
        pair = StationaryPair(pu, pv, rec["residual_u"], rec["residual_v"],
                              rec["method"], rec["iterations"])
        traj = Trajectory(problem=None, config=None, status=rec["status"])
        states_dir = os.path.join(rd, "states")
        for name in sorted(os.listdir(states_dir)):
            if not name.endswith("_u.snap"):
                continue
            u, t = read_field(os.path.join(states_dir, name))
            v, _ = read_field(os.path.join(states_dir, name[:-7] + "_v.snap"))
            step = int(name.split("_")[1])
            traj.samples.append(SimState(t, u, v, step))
        traj.rows = [{"t": s.t} for s in traj.samples]
        results.append(RunResult(kappa, traj, pair, None, rec["mu"],
                                 rec["sup_h_norm"], rec["min_energy"],
                                 rec["max_energy"]))
    finest = results[-1]
    return SegregationReport(
        kappas=[r.kappa for r in results],
        records=[],
        results=results,
        limit_u=finest.pair.u_hat,
        limit_v=finest.pair.v_hat,
        max_nodal_products=[],
    )


# ---------------------------------------------------------------------------
# Verify suite


def _check(results, name, ok, detail=""):
    results.append({"name": name, "ok": bool(ok), "detail": detail})


def _verify_mesh(results):
    import scipy.sparse as sp

    from .mesh import (
        Grid, Field, eigensystem, harmonic_extension, poincare_constant,
        laplacian_apply, l2_norm, h1_seminorm,
    )

    lap = _HOOKS.get("laplacian_apply", laplacian_apply)
    rng = np.random.default_rng(7)
    for grid in (Grid.line(17, 1.3), Grid.box(9, 11, 1.0, 2.0)):
        A = grid.neg_laplacian
        x = rng.standard_normal(int(np.prod(grid.counts)))
        f = Field(grid, grid.embed(x))
        err = np.max(np.abs(grid.interior(lap(f).values) - A @ x))
        _check(results, f"mesh.matrix_agreement_dim{grid.dim}", err <= 1e-13 * max(1, np.max(np.abs(A @ x))),
               f"max deviation {err:.2e}")
        eig = eigensystem(grid)
        worst = 0.0
        for k in range(3):
            phi = eig.mode(k)
            r = lap(phi).values - eig.eigenvalues[k] * phi.values
            worst = max(worst, np.max(np.abs(r)) / eig.eigenvalues[k])
        _check(results, f"mesh.eigen_identity_dim{grid.dim}", worst <= 1e-10,
               f"relative defect {worst:.2e}")
        alpha1 = poincare_constant(grid)
        ok = True
        for _ in range(100):
            w = Field(grid, grid.embed(rng.standard_normal(int(np.prod(grid.counts)))))
            lhs = h1_seminorm(w)
            rhs = l2_norm(lap(w)) / np.sqrt(alpha1)
            if lhs > rhs * (1 + 1e-10):
                ok = False
        _check(results, f"mesh.poincare_dim{grid.dim}", ok)
        b = np.zeros(grid.shape)
        b[grid.boundary_mask] = rng.uniform(0.0, 1.0, int(grid.boundary_mask.sum()))
        ext = harmonic_extension(b, grid)
        inside = grid.interior(ext.values)
        bvals = b[grid.boundary_mask]
        ok = inside.max() <= bvals.max() + 1e-12 and inside.min() >= bvals.min() - 1e-12
        _check(results, f"mesh.max_principle_dim{grid.dim}", ok)


def _verify_model(results):
    import scipy.integrate

    from .model import ReactionModel

    rng = np.random.default_rng(11)
    for kind in ("logistic", "smooth_logistic"):
        model = ReactionModel(kind)
        s = np.linspace(-2.0, 3.0, 501)
        fs = model.f(s)
        ok = (np.all(fs[s <= 0] == 0.0) and abs(model.f(1.0)) < 1e-15
              and np.all(fs[s > 1.0 + 1e-9] < 0.0))
        _check(results, f"model.sign_structure_{kind}", ok)
        worst = 0.0
        for sv in rng.uniform(0.0, 2.0, 50):
            q, _ = scipy.integrate.quad(model.f, 0.0, sv)
            worst = max(worst, abs(q - model.F(sv)))
        _check(results, f"model.antiderivative_{kind}", worst <= 1e-10,
               f"max defect {worst:.2e}")
        a, b = rng.uniform(0.0, 1.0, (2, 1000))
        L = model.lipschitz_bound
        ok = np.all(np.abs(model.f(a) - model.f(b)) <= L * np.abs(a - b) + 1e-14)
        _check(results, f"model.lipschitz_{kind}", ok)


def _verify_evolve(results):
    from .evolve import InvariantViolation, Problem, StepperConfig, initial_state, run_until
    from .mesh import Grid, Field
    from .model import BoundarySchedule, ReactionModel

    rng = np.random.default_rng(3)
    grid = Grid.line(31, 1.0)
    model = ReactionModel("logistic")
    zero = BoundarySchedule.stationary(grid, 0.0)
    ok = True
    detail = ""
    for kappa in (0.0, 1.0, 100.0, 10000.0):
        prob = Problem(grid, kappa, model, model, zero, zero)
        u0 = Field(grid, grid.embed(rng.uniform(0, 1, 31)))
        v0 = Field(grid, grid.embed(rng.uniform(0, 1, 31)))
        cfg = StepperConfig(dt=0.05, max_steps=200, horizon=10.0)
        try:
            run_until(initial_state(prob, u0, v0), prob, cfg)
        except InvariantViolation as exc:
            ok = False
            detail = str(exc)
    _check(results, "evolve.invariant_region", ok, detail)


def _verify_energy(results):
    from .energy import gronwall_bound

    rng = np.random.default_rng(5)
    ok = True
    for _ in range(100):
        c1, c2 = rng.uniform(0.1, 5.0, 2)
        dt = 0.01
        ts = np.arange(0, 40, dt)
        g = rng.uniform(0.0, 2.0) * np.exp(-rng.uniform(0.2, 2.0) * ts)
        sqrt_ups = np.sqrt(c1) + (c2 / 2.0) * np.cumsum(g) * dt
        if np.max(sqrt_ups**2) > gronwall_bound(c1, c2, g, dt) + 1e-9:
            ok = False
    _check(results, "energy.gronwall_bound", ok)


def _verify_steady(results):
    from .mesh import Field, Grid, eigensystem
    from .model import ReactionModel
    from .steady import variational_inequality_residual

    grid = Grid.line(31, 1.0)
    model = ReactionModel("logistic")
    eig = eigensystem(grid)
    phi = eig.mode(0)
    scaled = Field(phi.grid, 0.9 * phi.values / np.max(phi.values))
    r = variational_inequality_residual(scaled, model)
    _check(results, "steady.vi_detector_detects", r > 0.0,
           f"residual {r:.3e} on a constructed violation")
    zero = Field.zeros(grid)
    _check(results, "steady.vi_zero_state", variational_inequality_residual(zero, model) == 0.0)


def _verify_heatkernel(results):
    from .heatkernel import certify_decay, integrability_constant
    from .mesh import Grid, eigensystem

    eig = eigensystem(Grid.line(63, 1.0))
    omega = eig.lambda_min / 2.0
    ok = True
    detail = ""
    for alpha in (0.3, 0.5, 0.9):
        cert = certify_decay(eig, alpha, omega)
        if cert.max_violation > 0:
            ok = False
            detail = f"alpha={alpha}: violation {cert.max_violation:.2e}"
        if alpha < 1.0 and not np.isfinite(integrability_constant(cert)):
            ok = False
    _check(results, "heatkernel.decay_certificates", ok, detail)


_SUITES = {
    "mesh": _verify_mesh,
    "model": _verify_model,
    "evolve": _verify_evolve,
    "energy": _verify_energy,
    "steady": _verify_steady,
    "heatkernel": _verify_heatkernel,
}


def verify(suites=None):
    """Run the module invariant suites; returns (exit_code, results list)."""
    if suites is None:
        selected = list(_SUITES)
    else:
        unknown = [s for s in suites if s not in _SUITES]
        if unknown:
            raise SweepError(f"unknown verify suite(s): {unknown}")
        selected = list(suites)
    results = []
    for name in selected:
        _SUITES[name](results)
    failed = [r for r in results if not r["ok"]]
    return (1 if failed else 0), results
