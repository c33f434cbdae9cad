"""Acceptance gate: ten quantitative criteria for the laboratory.

Each test prints one pass/fail line.  Criteria that share the default
kappa sweep reuse the session fixture from conftest.
"""

import time

import numpy as np
import scipy.integrate

from segrelab.config import build_problem, default_config
from segrelab.energy import (
    dissipation_residual,
    energy_stationary,
    gronwall_bound,
    relative_slope,
)
from segrelab.evolve import (
    Problem,
    StepperConfig,
    initial_state,
    linear_heat_reference,
    run_until,
    step,
)
from segrelab.heatkernel import certify_decay, integrability_constant
from segrelab.mesh import (
    Field,
    Grid,
    eigensystem,
    h1_norm,
    l2_norm,
    laplacian_apply,
)
from segrelab.model import BoundarySchedule, ReactionModel, make_segregated_bumps
from segrelab.steady import morrey_check
from segrelab.sweeplab import diagonal_extraction


def _criterion(num, name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def _loglog_slope(x, y):
    return float(np.polyfit(np.log(np.asarray(x, float)),
                            np.log(np.asarray(y, float)), 1)[0])


# ---------------------------------------------------------------------------
# 1. Invariant region


def test_criterion_01_invariant_region():
    rng = np.random.default_rng(42)
    model = ReactionModel("logistic")
    cases = [
        (Grid.line(255, 20.0), 0.05),
        (Grid.box(63, 63, 10.0, 10.0), 2e-4),
    ]
    t0 = time.perf_counter()
    lo, hi = 0.0, 1.0
    for grid, dt in cases:
        zero = BoundarySchedule.stationary(grid, 0.0)
        n = int(np.prod(grid.counts))
        for kappa in (0.0, 1.0, 100.0, 10000.0):
            prob = Problem(grid, kappa, model, model, zero, zero)
            cfg = StepperConfig(dt=dt).validate([prob])
            u0 = Field(grid, grid.embed(rng.uniform(0.0, 1.0, n)))
            v0 = Field(grid, grid.embed(rng.uniform(0.0, 1.0, n)))
            state = initial_state(prob, u0, v0)
            for _ in range(10**4):
                state = step(state, prob, cfg)
                lo = min(lo, float(state.u.values.min()), float(state.v.values.min()))
                hi = max(hi, float(state.u.values.max()), float(state.v.values.max()))
    elapsed = time.perf_counter() - t0
    ok = lo >= -1e-9 and hi <= 1.0 + 1e-9 and elapsed <= 120.0
    _criterion(1, "invariant region", ok,
               f"range [{lo:.3e}, {hi:.10f}], {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 2. Energy dissipation


def test_criterion_02_energy_dissipation():
    grid = Grid.line(127, 10.0)
    model = ReactionModel("logistic")
    zero = BoundarySchedule.stationary(grid, 0.0)
    prob = Problem(grid, 100.0, model, model, zero, zero)
    init = make_segregated_bumps(grid, [np.array([3.0])], [1.2],
                                 [np.array([7.0])], [1.2], [0.9], [0.9])
    U_inf = zero.terminal_extension()
    V_inf = zero.terminal_extension()
    efn = lambda st: energy_stationary(st, prob, U_inf, V_inf)

    dts = (4e-3, 2e-3, 1e-3)
    residuals = []
    monotone_ok = True
    for dt in dts:
        cfg = StepperConfig(dt=dt, horizon=1.0, sample_stride=1).validate([prob])
        traj = run_until(initial_state(prob, init.u0, init.v0), prob, cfg,
                         energy_fn=efn)
        E = np.array([r["energy"] for r in traj.rows])
        t = np.array([r["t"] for r in traj.rows])
        du = np.array([r["du_norm"] for r in traj.rows])
        dv = np.array([r["dv_norm"] for r in traj.rows])
        tol = 10.0 * dt**2 * max(1.0, abs(E[0]))
        if np.max(np.diff(E)) > tol:
            monotone_ok = False
        r = np.abs([dissipation_residual(E[i], E[i + 1], dt, du[i + 1],
                                         dv[i + 1], 0.0)
                    for i in range(len(E) - 1)])
        residuals.append(np.max(r[t[1:] > 0.25]))
    slope = _loglog_slope(dts, residuals)
    ok = monotone_ok and 0.8 <= slope <= 1.2
    _criterion(2, "energy dissipation", ok,
               f"residual slope {slope:.4f}, monotone {monotone_ok}")


# ---------------------------------------------------------------------------
# 3. Uniform-in-kappa bound + mu > 0 contrast


def _trapezoid(x, a, b, c, d, amp):
    return amp * np.clip((x - a) / (b - a), 0.0, 1.0) \
               * np.clip((d - x) / (d - c), 0.0, 1.0)


def test_criterion_03_uniform_h_bound(default_sweep):
    audit = default_sweep.audit
    rel = audit["relative_slope"]
    ok_zero = audit["mu"] == 0.0 and abs(rel) <= 1e-3

    # contrast: overlapping trapezoids (mu > 0) make the bound kappa-dependent
    grid = Grid.line(1023, 6.0)
    x = grid.axis_coords()[0]
    model = ReactionModel("logistic")
    zero = BoundarySchedule.stationary(grid, 0.0)
    u0 = Field(grid, _trapezoid(x, 0.3, 1.3, 2.5, 3.5, 0.9))
    v0 = Field(grid, _trapezoid(x, 2.5, 3.5, 4.7, 5.7, 0.9))
    mu = l2_norm(Field(grid, u0.values * v0.values)) ** 2
    kappas = (1.0, 10.0, 100.0, 1000.0, 10000.0)
    sup_h = []
    for kappa in kappas:
        prob = Problem(grid, kappa, model, model, zero, zero)
        cfg = StepperConfig(dt=0.005, horizon=2.0, sample_stride=1).validate([prob])
        traj = run_until(initial_state(prob, u0, v0), prob, cfg)
        sup_h.append(max(np.hypot(r["u_h1"], r["v_h1"]) for r in traj.rows))
    contrast = relative_slope(kappas, sup_h)
    ok = ok_zero and mu > 0.0 and contrast > 0.0
    _criterion(3, "uniform-in-kappa H-bound", ok,
               f"mu=0 slope {rel:.2e}, mu={mu:.3f} contrast slope {contrast:+.3e}")


# ---------------------------------------------------------------------------
# 4. Segregation limit


def test_criterion_04_segregation_limit(default_sweep):
    checks = default_sweep.checks
    rate = checks["segregation_rate_slope"]
    ko = checks["kappa_overlap_slope"]
    prod = checks["limit_max_product"]
    ok = (-1.3 <= rate <= -0.7) and ko <= 0.1 and prod <= 1e-3 \
        and not checks["overlap_monotone_violations"]
    _criterion(4, "segregation limit", ok,
               f"rate slope {rate:.4f}, kappa*overlap slope {ko:.4f}, "
               f"max product {prod:.3e}")


# ---------------------------------------------------------------------------
# 5. Variational inequalities + exact traces


def test_criterion_05_variational_inequalities(default_sweep):
    finest = default_sweep.results[-1]
    rec = finest.record()
    prob = build_problem(default_config(), kappa=finest.kappa)
    m = prob.grid.boundary_mask
    traces_ok = (
        np.array_equal(finest.pair.u_hat.values[m], prob.sched_u.at(0.0)[m])
        and np.array_equal(finest.pair.v_hat.values[m], prob.sched_v.at(0.0)[m])
    )
    ok = rec["vi_u"] <= 1e-6 and rec["vi_v"] <= 1e-6 and traces_ok
    _criterion(5, "variational inequalities", ok,
               f"vi_u {rec['vi_u']:.2e}, vi_v {rec['vi_v']:.2e}, "
               f"traces bitwise {traces_ok}")


# ---------------------------------------------------------------------------
# 6. Diagonal extraction


def test_criterion_06_diagonal_extraction(default_sweep):
    seq = diagonal_extraction(default_sweep, 5)
    depth_ok = len(seq) >= 5
    l2_ok = all(e["l2_distance"] < e["bound"] for e in seq)
    linfs = [e["linf_distance"] for e in seq]
    linf_ok = all(b < a for a, b in zip(linfs, linfs[1:]))
    ok = depth_ok and l2_ok and linf_ok
    _criterion(6, "diagonal extraction", ok,
               f"depth {len(seq)}, linf " + ", ".join(f"{v:.4f}" for v in linfs))


# ---------------------------------------------------------------------------
# 7. Heat-kernel decay certificates


def test_criterion_07_heat_kernel_decay():
    t0 = time.perf_counter()
    eig = eigensystem(Grid.line(255, 1.0))
    omega = eig.lambda_min / 2.0
    worst = -np.inf
    finite = True
    for alpha in (0.3, 0.5, 0.9):
        cert = certify_decay(eig, alpha, omega)
        worst = max(worst, cert.max_violation)
        finite = finite and np.isfinite(integrability_constant(cert))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.0 and finite and elapsed <= 5.0
    _criterion(7, "heat-kernel decay", ok,
               f"max violation {worst:.2e}, {elapsed:.2f} s")


# ---------------------------------------------------------------------------
# 8. Linear-flow oracles


def _linear_case(n, L=4.0, gamma=1.0):
    grid = Grid.line(n, L)
    psi = np.zeros(grid.shape)
    rho = np.zeros(grid.shape)
    psi[0], psi[-1] = 0.3, 0.1
    rho[0], rho[-1] = 0.25, 0.2
    sched = BoundarySchedule.decaying(grid, psi, rho, gamma)
    x = grid.axis_coords()[0]
    u0 = Field(grid, 0.3 + (0.1 - 0.3) * x / L + 0.5 * np.sin(np.pi * x / L) ** 3)
    return grid, sched, u0


def _stepper_solution(grid, sched, u0, dt, T):
    model = ReactionModel("zero")
    prob = Problem(grid, 0.0, model, model, sched, sched)
    cfg = StepperConfig(dt=dt, horizon=T, sample_stride=10**9).validate([prob])
    traj = run_until(initial_state(prob, u0, u0), prob, cfg)
    return traj.final.u


def test_criterion_08_linear_flow_oracles():
    gamma, L, T = 1.0, 4.0, 1.0

    # spatial order against a fine-grid spectral reference
    nf = 2047
    grid_f, sched_f, u0_f = _linear_case(nf)
    ref_f = linear_heat_reference(u0_f, sched_f, T)
    h_list, eh = [], []
    for n in (31, 63, 127):
        grid, sched, u0 = _linear_case(n)
        u = _stepper_solution(grid, sched, u0, 2e-5, T)
        stride = (nf + 1) // (n + 1)
        restricted = ref_f.values[::stride]
        eh.append(l2_norm(Field(grid, u.values - restricted)))
        h_list.append(grid.spacing[0])
    h_slope = _loglog_slope(h_list, eh)

    # temporal order against the same-grid spectral reference
    grid, sched, u0 = _linear_case(127)
    ref = linear_heat_reference(u0, sched, T)
    dts = (4e-3, 2e-3, 1e-3)
    et = [l2_norm(Field(grid, _stepper_solution(grid, sched, u0, dt, T).values
                        - ref.values)) for dt in dts]
    dt_slope = _loglog_slope(dts, et)

    # stabilization toward the harmonic extension of the terminal trace
    U_inf = sched.terminal_extension()
    U40 = linear_heat_reference(u0, sched, 40.0 / gamma)
    stab = h1_norm(Field(grid, U40.values - U_inf.values))

    # Cauchy tail of the running L1 integral of |U_t|_{H1}
    ts = np.linspace(0.05, 60.0, 1200)
    bmask = grid.boundary_mask
    y = []
    for t in ts:
        U = linear_heat_reference(u0, sched, t)
        vals = -laplacian_apply(U).values
        vals[bmask] = sched.dt_at(t)[bmask]
        y.append(h1_norm(Field(grid, vals)))
    y = np.array(y)
    tail = ts[:-1] >= 40.0
    increments = 0.5 * np.diff(ts)[tail] * (y[:-1][tail] + y[1:][tail])
    max_inc = float(np.max(increments))

    ok = (1.8 <= h_slope <= 2.2 and 0.8 <= dt_slope <= 1.2
          and stab <= 1e-6 and max_inc <= 1e-8)
    _criterion(8, "linear-flow oracles", ok,
               f"h slope {h_slope:.3f}, dt slope {dt_slope:.3f}, "
               f"stabilization {stab:.2e}, tail increment {max_inc:.2e}")


# ---------------------------------------------------------------------------
# 9. Gronwall utility


def test_criterion_09_gronwall():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        c1, c2 = rng.uniform(0.1, 5.0, 2)
        T = rng.uniform(1.0, 10.0)
        amp = rng.uniform(0.0, 2.0)
        freq = rng.uniform(0.5, 3.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        ts = np.linspace(0.0, T, 2001)
        g = amp * np.abs(np.sin(freq * ts + phase))
        bound = gronwall_bound(c1, c2, g, ts[1] - ts[0])
        sol = scipy.integrate.solve_ivp(
            lambda t, y: c2 * np.interp(t, ts, g) * np.sqrt(np.maximum(y, 0.0)),
            (0.0, T), [c1], rtol=1e-10, atol=1e-12, dense_output=True,
            max_step=T / 50.0,
        )
        sup = float(np.max(sol.sol(ts)[0]))
        worst = max(worst, sup / bound)
    ok = worst < 1.0
    _criterion(9, "Gronwall bound", ok, f"worst sup/bound {worst:.4f}")


# ---------------------------------------------------------------------------
# 10. Morrey bound


def test_criterion_10_morrey(default_sweep):
    worst = 0.0
    for res in default_sweep.results:
        for f in (res.pair.u_hat, res.pair.v_hat,
                  res.trajectory.final.u, res.trajectory.final.v):
            worst = max(worst, morrey_check(f))
    ok = worst <= 1.0 + 1e-6
    _criterion(10, "Morrey Holder-1/2 bound", ok, f"worst ratio {worst:.4f}")
