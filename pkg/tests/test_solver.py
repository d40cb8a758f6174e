"""Newton-Krylov solver: residual, linearization, manufactured and continuity runs."""

import numpy as np
import pytest

from dhym.errors import (
    LinearSolveStalled,
    MaxItersExceeded,
    PathStalled,
    PhaseFloorViolated,
    PhaseOutOfRange,
)
from dhym.solver import (
    DhymProblem,
    SolverConfig,
    apply_linearized,
    apply_linearized_adjoint,
    continuity_solve,
    linearization_kernel,
    linearized_apply,
    manufactured_problem,
    newton_solve,
    residual,
    verify_supercritical,
)
from dhym.torus import (
    HermitianFormField,
    ScalarField,
    TorusGrid,
    constant_form_field,
    hat_theta,
    i_ddbar,
    identity_metric,
    integrate,
    isotropic_form_field,
    inverse_laplacian_quarter,
    laplacian_quarter,
    theta_field,
)


def _grid1(N=32):
    return TorusGrid(1, N)


def _simple_problem(g, chi_level=0.3, target=0.3, eps0=0.5):
    return DhymProblem(
        grid=g,
        omega=identity_metric(g),
        chi0=constant_form_field(g, chi_level * np.eye(g.n)),
        target=float(target),
        eps0=eps0,
    )


def _random_band_limited(g, rng, amp=0.1):
    vals = np.zeros(g.shape)
    axes = [f"{c}{j + 1}" for j in range(g.n) for c in ("x", "y")]
    for axis in axes:
        coord = g.axis_coordinate(axis)
        for freq in (1, 2):
            vals = vals + amp * rng.uniform(-1, 1) * np.cos(
                freq * coord + rng.uniform(0, 2 * np.pi)
            )
    return ScalarField(g, vals - vals.mean())


# --- residual -------------------------------------------------------------------


def test_residual_zero_at_exact_solution():
    g = _grid1()
    om = identity_metric(g)
    chi0 = constant_form_field(g, [[0.3]])
    prob = DhymProblem(g, om, chi0, theta_field(om, chi0), eps0=0.5)
    res = residual(ScalarField(g, np.zeros(g.shape)), 0.0, prob)
    assert np.max(np.abs(res.values)) == 0.0


def test_residual_n1_reduction():
    g = _grid1()
    prob = _simple_problem(g, chi_level=0.0, target=0.2)
    rng = np.random.default_rng(0)
    u = _random_band_limited(g, rng)
    res = residual(u, 0.0, prob)
    hess = i_ddbar(u).values[..., 0, 0].real
    expect = np.arctan(hess) - 0.2
    assert np.max(np.abs(res.values - expect)) <= 1e-12


def test_residual_manufactured_is_zero():
    g = _grid1(64)
    ustar = ScalarField(g, 0.3 * np.cos(g.axis_coordinate("x1")))
    prob = manufactured_problem(
        ustar, identity_metric(g), constant_form_field(g, [[0.2]]), eps0=0.5
    )
    res = residual(ustar, 0.0, prob)
    assert np.max(np.abs(res.values)) <= 1e-11


# --- linearization -----------------------------------------------------------------


def test_linearized_is_quarter_laplacian_at_flat_state():
    g = _grid1()
    prob = _simple_problem(g, chi_level=0.0, target=0.2)
    rng = np.random.default_rng(1)
    v = _random_band_limited(g, rng)
    out = linearized_apply(ScalarField(g, np.zeros(g.shape)), v, prob)
    assert np.max(np.abs(out.values - laplacian_quarter(v.values, g))) <= 1e-12


def test_linearized_constant_direction_is_zero():
    g = _grid1()
    prob = _simple_problem(g)
    out = linearized_apply(
        ScalarField(g, np.zeros(g.shape)), ScalarField(g, np.full(g.shape, 3.0)), prob
    )
    assert np.max(np.abs(out.values)) <= 1e-13


def test_linearized_matches_finite_difference():
    rng = np.random.default_rng(2)
    for n, N in ((1, 32), (2, 8)):
        g = TorusGrid(n, N)
        prob = _simple_problem(g, chi_level=0.3, target=0.3 * n, eps0=0.2)
        for _ in range(10):
            u = _random_band_limited(g, rng)
            v = _random_band_limited(g, rng)
            lin = linearized_apply(u, v, prob).values
            eps = 1e-5
            rp = residual(ScalarField(g, u.values + eps * v.values), 0.0, prob).values
            rm = residual(ScalarField(g, u.values - eps * v.values), 0.0, prob).values
            fd = (rp - rm) / (2 * eps)
            assert np.max(np.abs(lin - fd)) / max(1e-12, np.max(np.abs(fd))) <= 1e-6


def test_linearized_adjoint_pairing():
    g = _grid1()
    prob = _simple_problem(g)
    rng = np.random.default_rng(3)
    u = _random_band_limited(g, rng)
    kernel = linearization_kernel(u, prob)
    v = _random_band_limited(g, rng)
    w = _random_band_limited(g, rng)
    lhs = np.vdot(apply_linearized(kernel, v.values, g), w.values)
    rhs = np.vdot(v.values, apply_linearized_adjoint(kernel, w.values, g))
    assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(lhs))


def test_linearized_symmetric_at_constant_state_and_elliptic_sign():
    # at constant-coefficient states the operator is exactly self-adjoint in
    # L^2; its quadratic form carries the elliptic (negative Laplacian-like)
    # sign on mean-zero fields
    g = _grid1()
    prob = _simple_problem(g, chi_level=0.4, target=0.4)
    u0 = ScalarField(g, np.zeros(g.shape))
    rng = np.random.default_rng(4)
    for _ in range(50):
        v = _random_band_limited(g, rng)
        w = _random_band_limited(g, rng)
        lv = linearized_apply(u0, v, prob)
        lw = linearized_apply(u0, w, prob)
        sym = integrate(ScalarField(g, lv.values * w.values)) - integrate(
            ScalarField(g, v.values * lw.values)
        )
        assert abs(sym) <= 1e-9
        quad = integrate(ScalarField(g, lv.values * v.values))
        assert quad < 0.0


# --- newton -------------------------------------------------------------------------


def test_newton_trivial_start_is_converged():
    g = _grid1()
    om = identity_metric(g)
    chi0 = constant_form_field(g, [[0.3]])
    prob = DhymProblem(g, om, chi0, theta_field(om, chi0), eps0=0.5)
    rep = newton_solve(prob)
    assert rep.converged
    assert len(rep.newton_trace) == 1
    assert rep.c == 0.0
    assert np.max(np.abs(rep.u.values)) == 0.0


def test_newton_manufactured_n1():
    g = _grid1(64)
    ustar = ScalarField(g, 0.3 * np.cos(g.axis_coordinate("x1")))
    prob = manufactured_problem(
        ustar, identity_metric(g), constant_form_field(g, [[0.2]]), eps0=0.5
    )
    rep = newton_solve(prob, cfg=SolverConfig(tol=1e-11))
    aligned = ustar.values - ustar.values.mean()
    assert rep.residual_sup <= 1e-8
    assert np.max(np.abs(rep.u.values - aligned)) <= 1e-9
    assert abs(rep.u.values.mean()) <= 1e-13
    for _, _, margin in rep.newton_trace:
        assert margin > 0.0


def test_newton_manufactured_n2_small():
    g = TorusGrid(2, 16)
    ustar = ScalarField(
        g,
        0.1 * np.cos(g.axis_coordinate("x1")) + 0.05 * np.cos(g.axis_coordinate("y2")),
    )
    prob = manufactured_problem(
        ustar, identity_metric(g), constant_form_field(g, 0.3 * np.eye(2)), eps0=0.3
    )
    rep = newton_solve(prob, cfg=SolverConfig(tol=1e-11))
    aligned = ustar.values - ustar.values.mean()
    assert rep.residual_sup <= 1e-8
    assert np.max(np.abs(rep.u.values - aligned)) <= 1e-6


def test_newton_rejects_subcritical_start():
    g = TorusGrid(2, 8)
    om = identity_metric(g)
    chi0 = constant_form_field(g, -2.0 * np.eye(2))  # negative phase state
    prob = DhymProblem(g, om, chi0, float(np.pi / 2), eps0=0.1)
    with pytest.raises(PhaseFloorViolated):
        newton_solve(prob)


def test_newton_starved_krylov_stalls():
    g = _grid1()
    ustar = ScalarField(g, 0.3 * np.cos(g.axis_coordinate("x1")))
    prob = manufactured_problem(
        ustar, identity_metric(g), constant_form_field(g, [[0.2]]), eps0=0.5
    )
    with pytest.raises(LinearSolveStalled):
        newton_solve(prob, cfg=SolverConfig(tol=1e-11, krylov_iters=1))


def test_newton_iteration_budget():
    g = _grid1()
    ustar = ScalarField(g, 0.3 * np.cos(g.axis_coordinate("x1")))
    prob = manufactured_problem(
        ustar, identity_metric(g), constant_form_field(g, [[0.2]]), eps0=0.5
    )
    with pytest.raises(MaxItersExceeded):
        newton_solve(prob, cfg=SolverConfig(tol=1e-14, max_iters=1))


def test_continuity_path_stalls_when_stages_cannot_converge():
    g = _grid1()
    x = g.axis_coordinate("x1")
    om = identity_metric(g)
    chi0 = isotropic_form_field(g, ScalarField(g, 0.5 + 0.2 * np.cos(x)))
    hhat = float(np.arctan(0.5))
    prob = DhymProblem(g, om, chi0, hhat, eps0=0.25)
    with pytest.raises(PathStalled):
        continuity_solve(prob, cfg=SolverConfig(tol=1e-16, max_iters=2))


def test_newton_krylov_variants_agree():
    g = _grid1()
    ustar = ScalarField(g, 0.2 * np.cos(g.axis_coordinate("x1")))
    prob = manufactured_problem(
        ustar, identity_metric(g), constant_form_field(g, [[0.2]]), eps0=0.5
    )
    sols = []
    for method in ("gmres", "cg", "cgnr"):
        rep = newton_solve(prob, cfg=SolverConfig(tol=1e-10, krylov=method))
        assert rep.converged
        sols.append(rep.u.values)
    assert np.max(np.abs(sols[0] - sols[1])) <= 1e-9
    assert np.max(np.abs(sols[0] - sols[2])) <= 1e-9


# --- supercritical check --------------------------------------------------------------


def test_verify_supercritical_constant_field():
    g = TorusGrid(2, 8)
    om = identity_metric(g)
    chi = constant_form_field(g, np.tan(np.pi / 3) * np.eye(2))
    prob = DhymProblem(g, om, chi, float(2 * np.pi / 3), eps0=0.1)
    rep = verify_supercritical(ScalarField(g, np.zeros(g.shape)), prob)
    assert rep["ok"]
    assert abs(rep["min_phase"] - 2 * np.pi / 3) <= 1e-12


def test_verify_supercritical_negative_state():
    g = TorusGrid(2, 8)
    om = identity_metric(g)
    chi = constant_form_field(g, -np.eye(2))
    prob = DhymProblem(
        g, om, constant_form_field(g, np.eye(2)), float(np.pi / 2), eps0=0.1
    )
    prob.chi0 = chi  # probe a non-admissible state against the same problem
    rep = verify_supercritical(ScalarField(g, np.zeros(g.shape)), prob)
    assert not rep["ok"]


# --- manufactured problems -------------------------------------------------------------


def test_manufactured_trivial_target():
    g = _grid1()
    om = identity_metric(g)
    chi0 = constant_form_field(g, [[0.3]])
    prob = manufactured_problem(ScalarField(g, np.zeros(g.shape)), om, chi0, eps0=0.5)
    assert np.max(np.abs(prob.target_values() - np.arctan(0.3))) <= 1e-15


def test_manufactured_amplitude_sweep_hits_band_edge():
    g = _grid1(32)
    om = identity_metric(g)
    chi0 = constant_form_field(g, [[0.2]])
    x = g.axis_coordinate("x1")
    good = ScalarField(g, 0.3 * np.cos(x))
    manufactured_problem(good, om, chi0, eps0=0.5)  # fine
    first_bad = None
    for amp in np.arange(0.5, 16.0, 0.5):
        try:
            manufactured_problem(ScalarField(g, amp * np.cos(x)), om, chi0, eps0=0.5)
        except PhaseOutOfRange:
            first_bad = amp
            break
    # the band edge needs arctan(0.2 - amp/4) < -pi/2 + 0.5, i.e.
    # amp > 4 (0.2 + cot(0.5)) ~ 8.1
    assert first_bad is not None
    assert first_bad >= 4 * (0.2 + 1.0 / np.tan(0.5)) - 0.5


# --- continuity -------------------------------------------------------------------------


def test_continuity_trivial_path():
    g = _grid1()
    om = identity_metric(g)
    chi0 = constant_form_field(g, [[0.4]])
    hhat = float(np.arctan(0.4))
    prob = DhymProblem(g, om, chi0, hhat, eps0=0.5)
    rep = continuity_solve(prob)
    assert rep.converged
    assert rep.residual_sup <= 1e-12
    assert abs(rep.c) <= 1e-14


def test_continuity_reaches_averaged_angle():
    g = _grid1(64)
    x = g.axis_coordinate("x1")
    om = identity_metric(g)
    chi0 = isotropic_form_field(g, ScalarField(g, 0.5 + 0.2 * np.cos(x)))
    hhat = hat_theta(om, chi0).hat_theta
    prob = DhymProblem(g, om, chi0, hhat, eps0=0.25)
    rep = continuity_solve(prob, cfg=SolverConfig(tol=1e-11))
    assert rep.converged
    assert abs(rep.c) <= 1e-8
    chi = HermitianFormField(g, chi0.values + i_ddbar(rep.u).values, _symmetrized=True)
    theta = theta_field(om, chi).values
    assert theta.max() - theta.min() <= 1e-8
    # n=1 oracle: the final Hessian solves a single Poisson problem
    oracle = inverse_laplacian_quarter(np.tan(hhat) - (0.5 + 0.2 * np.cos(x)), g)
    oracle -= oracle.mean()
    assert np.max(np.abs(oracle - rep.u.values)) <= 1e-8


def test_continuity_stage_constants_nonpositive_when_target_dominates():
    g = _grid1(64)
    x = g.axis_coordinate("x1")
    om = identity_metric(g)
    chi0 = isotropic_form_field(g, ScalarField(g, 0.5 + 0.2 * np.cos(x)))
    hdom = float(np.arctan(0.7)) + 0.05
    prob = DhymProblem(g, om, chi0, hdom, eps0=0.25)
    rep = continuity_solve(prob, cfg=SolverConfig(tol=1e-11))
    assert rep.converged
    for _, c_t, _ in rep.continuity_trace:
        assert c_t <= 1e-12
    for _, _, min_phase, _, _ in rep.iterate_rows:
        assert min_phase > prob.phase_floor


def test_continuity_multi_start_uniqueness():
    g = _grid1(64)
    x = g.axis_coordinate("x1")
    y = g.axis_coordinate("y1")
    om = identity_metric(g)
    chi0 = isotropic_form_field(g, ScalarField(g, 0.5 + 0.2 * np.cos(x)))
    hhat = hat_theta(om, chi0).hat_theta
    prob = DhymProblem(g, om, chi0, hhat, eps0=0.25)
    results = []
    for seed in (1, 2):
        rng = np.random.default_rng(seed)
        u0 = ScalarField(
            g,
            0.05 * np.cos(x + rng.uniform(0, 2 * np.pi))
            + 0.03 * np.sin(y + rng.uniform(0, 2 * np.pi)),
        )
        rep = newton_solve(prob, u0=u0, cfg=SolverConfig(tol=1e-11))
        assert rep.converged
        results.append(rep)
    diff = np.max(np.abs(results[0].u.values - results[1].u.values))
    assert diff <= 1e-8
    assert abs(results[0].c - results[1].c) <= 1e-10


def test_continuity_requires_constant_target():
    g = _grid1()
    om = identity_metric(g)
    chi0 = constant_form_field(g, [[0.3]])
    prob = DhymProblem(g, om, chi0, theta_field(om, chi0), eps0=0.4)
    with pytest.raises(PhaseOutOfRange):
        continuity_solve(prob)
