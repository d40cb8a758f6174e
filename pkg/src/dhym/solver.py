"""Newton-Krylov continuity solver for the pointwise phase equation.

Solves Theta(chi0 + i ddbar u) = target + c on a flat torus for the pair
(u mean-zero, c real).  Each damped Newton step solves the linearized system
with a Krylov method preconditioned by the exact inverse of the flat
quarter-Laplacian; a backtracking line search keeps the pointwise phase above
the supercritical floor (n-2) pi/2.  Constant targets are reached by an
adaptive continuation from the initial phase field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import (
    DimensionMismatch,
    LinearSolveStalled,
    MaxItersExceeded,
    PathStalled,
    PhaseFloorViolated,
    PhaseOutOfRange,
)
from .torus import (
    HermitianFormField,
    ScalarField,
    TorusGrid,
    eta_inverse_values,
    fftn,
    i_ddbar,
    ifftn,
    inverse_laplacian_quarter,
    theta_field,
)

DT_MIN = 1.0 / 1024.0
DT_MAX = 0.25


@dataclass
class DhymProblem:
    """One instance of the phase equation on a torus.

    target is either a ScalarField h(x) or a constant angle; its values must
    stay in [(n-2) pi/2 + eps0, n pi/2) pointwise.
    """

    grid: TorusGrid
    omega: HermitianFormField
    chi0: HermitianFormField
    target: ScalarField | float
    eps0: float

    def __post_init__(self):
        if self.eps0 <= 0.0:
            raise PhaseOutOfRange(f"eps0={self.eps0:.6g} must be positive")
        for f in (self.omega, self.chi0):
            if f.grid != self.grid:
                raise DimensionMismatch("form fields live on a different grid")
        if isinstance(self.target, ScalarField) and self.target.grid != self.grid:
            raise DimensionMismatch("target field lives on a different grid")
        lo = self.phase_floor + self.eps0
        hi = self.grid.n * np.pi / 2
        vals = self.target_values()
        if vals.min() < lo - 1e-12 or vals.max() >= hi:
            raise PhaseOutOfRange(
                f"target range [{vals.min():.6g}, {vals.max():.6g}] outside "
                f"[{lo:.6g}, {hi:.6g})"
            )

    @property
    def phase_floor(self) -> float:
        return (self.grid.n - 2) * np.pi / 2

    def target_values(self) -> np.ndarray:
        if isinstance(self.target, ScalarField):
            return self.target.values
        return np.full(self.grid.shape, float(self.target))


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_iters: int = 40
    krylov: str = "gmres"  # gmres | cg | cgnr
    krylov_tol: float = 1e-12
    krylov_iters: int = 400
    start_margin: float = 0.0
    line_search_halvings: int = 40
    fast_stage_iters: int = 4  # continuation doubles dt at or below this
    dt_init: float = DT_MAX


@dataclass
class SolveReport:
    """Solution state with convergence diagnostics.

    newton_trace rows: (residual_sup, step_length, min_phase_margin).
    continuity_trace rows: (t, stage_constant, iterations).
    iterate_rows: flat per-iterate rows
    (iteration, residual_sup, min_phase, t, stage_constant) for trace export.
    """

    u: ScalarField
    c: float
    residual_sup: float
    converged: bool
    newton_trace: list[tuple[float, float, float]] = field(default_factory=list)
    continuity_trace: list[tuple[float, float, int]] = field(default_factory=list)
    iterate_rows: list[tuple[int, float, float, float, float]] = field(
        default_factory=list
    )


def residual(u: ScalarField, c: float, prob: DhymProblem) -> ScalarField:
    """Theta(chi0 + i ddbar u) - target - c, pointwise."""
    chi = HermitianFormField(
        prob.grid, prob.chi0.values + i_ddbar(u).values, _symmetrized=True
    )
    theta = theta_field(prob.omega, chi)
    return ScalarField(prob.grid, theta.values - prob.target_values() - c)


def _state_chi(u: ScalarField, prob: DhymProblem) -> HermitianFormField:
    return HermitianFormField(
        prob.grid, prob.chi0.values + i_ddbar(u).values, _symmetrized=True
    )


def linearization_kernel(u: ScalarField, prob: DhymProblem) -> np.ndarray:
    """Pointwise Hermitian coefficient matrices of the linearized operator.

    These are the inverses of omega + chi omega^-1 chi at the current state;
    the derivative of the phase in direction v contracts them against the
    complex Hessian of v.
    """
    return eta_inverse_values(prob.omega, _state_chi(u, prob))


def apply_linearized(kernel: np.ndarray, v_values: np.ndarray, grid: TorusGrid):
    hess = i_ddbar(ScalarField(grid, v_values)).values
    return np.einsum("...ij,...ji->...", kernel, hess).real


def apply_linearized_adjoint(kernel: np.ndarray, w_values: np.ndarray, grid: TorusGrid):
    """L^2 adjoint of apply_linearized for the same frozen kernel."""
    n = grid.n
    out = np.zeros(grid.shape)
    for j in range(n):
        for k in range(n):
            prod = np.conj(kernel[..., j, k]) * w_values
            phat = fftn(prod)
            out = out + ifftn(np.conj(_entry_multiplier(grid, k, j)) * phat).real
    return out


def _entry_multiplier(grid: TorusGrid, j: int, k: int) -> np.ndarray:
    """Fourier multiplier of the (j, k) entry of the complex Hessian."""
    from .torus import _axis_multiplier  # shared with i_ddbar

    if j == k:
        kx = _axis_multiplier(grid, 2 * j, zero_nyquist=False)
        ky = _axis_multiplier(grid, 2 * j + 1, zero_nyquist=False)
        return -0.25 * (kx**2 + ky**2) + 0.0j
    kxj = _axis_multiplier(grid, 2 * j, zero_nyquist=True)
    kyj = _axis_multiplier(grid, 2 * j + 1, zero_nyquist=True)
    kxk = _axis_multiplier(grid, 2 * k, zero_nyquist=True)
    kyk = _axis_multiplier(grid, 2 * k + 1, zero_nyquist=True)
    return -0.25 * (kxj * kxk + kyj * kyk) - 0.25j * (kxj * kyk - kyj * kxk)


def linearized_apply(u: ScalarField, v: ScalarField, prob: DhymProblem) -> ScalarField:
    """Directional derivative of the residual at state u in direction v."""
    kernel = linearization_kernel(u, prob)
    return ScalarField(prob.grid, apply_linearized(kernel, v.values, prob.grid))


def _min_phase(u: ScalarField, prob: DhymProblem) -> float:
    theta = theta_field(prob.omega, _state_chi(u, prob))
    return float(theta.values.min())


def verify_supercritical(u: ScalarField, prob: DhymProblem) -> dict:
    """Minimum pointwise phase and whether it clears the floor plus eps0."""
    min_phase = _min_phase(u, prob)
    floor = prob.phase_floor
    return {
        "min_phase": min_phase,
        "margin": min_phase - floor,
        "ok": bool(min_phase > floor + prob.eps0 - 1e-12),
    }


def manufactured_problem(
    u_star: ScalarField,
    omega: HermitianFormField,
    chi0: HermitianFormField,
    eps0: float,
) -> DhymProblem:
    """Problem whose exact solution is u_star (up to its mean) with c = 0.

    The target is the discrete phase field of chi0 + i ddbar u_star; raises
    PhaseOutOfRange if that field leaves the admissible band.
    """
    grid = u_star.grid
    chi = HermitianFormField(
        grid, chi0.values + i_ddbar(u_star).values, _symmetrized=True
    )
    target = theta_field(omega, chi)
    return DhymProblem(grid=grid, omega=omega, chi0=chi0, target=target, eps0=eps0)


def _solve_inner(
    kernel: np.ndarray,
    rhs: np.ndarray,
    grid: TorusGrid,
    cfg: SolverConfig,
) -> np.ndarray:
    """Solve P L du = rhs on the mean-zero subspace (P = mean projector)."""
    npts = grid.num_points
    shape = grid.shape

    def project(x):
        return x - x.mean()

    def matvec(x):
        v = project(x.reshape(shape))
        out = apply_linearized(kernel, v, grid)
        return project(out).ravel()

    def rmatvec(x):
        w = project(x.reshape(shape))
        out = apply_linearized_adjoint(kernel, w, grid)
        return project(out).ravel()

    def precond(x):
        v = x.reshape(shape)
        return project(inverse_laplacian_quarter(v, grid)).ravel()

    b = project(rhs).ravel()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(shape)

    rtol = max(cfg.krylov_tol, 1e-14)
    op = spla.LinearOperator((npts, npts), matvec=matvec, rmatvec=rmatvec)
    if cfg.krylov == "cg":
        # operator is negative-definite near constant-coefficient states
        neg = spla.LinearOperator((npts, npts), matvec=lambda x: -matvec(x))
        m_op = spla.LinearOperator((npts, npts), matvec=lambda x: -precond(x))
        x, _ = spla.cg(
            neg, -b, rtol=rtol, atol=0.0, maxiter=cfg.krylov_iters, M=m_op
        )
    elif cfg.krylov == "cgnr":
        normal = spla.LinearOperator(
            (npts, npts), matvec=lambda x: rmatvec(matvec(x))
        )
        m_op = spla.LinearOperator(
            (npts, npts), matvec=lambda x: precond(precond(x))
        )
        x, _ = spla.cg(
            normal,
            rmatvec(b),
            rtol=rtol,
            atol=0.0,
            maxiter=cfg.krylov_iters,
            M=m_op,
        )
    elif cfg.krylov == "gmres":
        m_op = spla.LinearOperator((npts, npts), matvec=precond)
        x, _ = spla.gmres(
            op,
            b,
            rtol=rtol,
            atol=0.0,
            restart=min(60, cfg.krylov_iters),
            maxiter=max(1, cfg.krylov_iters // 60),
            M=m_op,
        )
    else:
        raise LinearSolveStalled(f"unknown krylov method {cfg.krylov!r}")

    achieved = float(np.linalg.norm(matvec(x) - b))
    if not np.isfinite(achieved) or achieved > max(10.0 * cfg.krylov_tol, 1e-9) * bnorm:
        raise LinearSolveStalled(
            f"krylov ({cfg.krylov}) residual {achieved:.3e} vs rhs norm "
            f"{bnorm:.3e} after {cfg.krylov_iters} iterations"
        )
    return project(x.reshape(shape))


def newton_solve(
    prob: DhymProblem,
    u0: ScalarField | None = None,
    cfg: SolverConfig | None = None,
) -> SolveReport:
    """Damped Newton on the augmented unknown (u mean-zero, c).

    Each step solves the linearized system on the mean-zero subspace with the
    flat-Laplacian preconditioner and recovers the constant shift from the
    residual mean; the backtracking line search halves the step until the sup
    residual decreases and the minimum pointwise phase stays above the
    supercritical floor.
    """
    cfg = cfg or SolverConfig()
    grid = prob.grid
    if u0 is None:
        u0 = ScalarField(grid, np.zeros(grid.shape))
    u_vals = u0.values - u0.values.mean()
    c = 0.0
    floor = prob.phase_floor

    if _min_phase(ScalarField(grid, u_vals), prob) < floor + cfg.start_margin:
        raise PhaseFloorViolated(
            "initial state is not supercritical for this problem"
        )

    trace: list[tuple[float, float, float]] = []
    c_hist: list[float] = []
    res = residual(ScalarField(grid, u_vals), c, prob)
    res_sup = float(np.max(np.abs(res.values)))
    trace.append((res_sup, 0.0, _min_phase(ScalarField(grid, u_vals), prob) - floor))
    c_hist.append(c)

    for _ in range(cfg.max_iters):
        if res_sup <= cfg.tol:
            break
        kernel = linearization_kernel(ScalarField(grid, u_vals), prob)
        du = _solve_inner(kernel, -res.values, grid, cfg)
        dc = float(res.values.mean() + apply_linearized(kernel, du, grid).mean())

        step = 1.0
        accepted = False
        for _ in range(cfg.line_search_halvings):
            trial_u = u_vals + step * du
            trial_u -= trial_u.mean()
            trial_c = c + step * dc
            trial_field = ScalarField(grid, trial_u)
            trial_res = residual(trial_field, trial_c, prob)
            trial_sup = float(np.max(np.abs(trial_res.values)))
            min_phase = _min_phase(trial_field, prob)
            if min_phase > floor and trial_sup < res_sup:
                u_vals, c, res, res_sup = trial_u, trial_c, trial_res, trial_sup
                trace.append((res_sup, step, min_phase - floor))
                c_hist.append(c)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if _min_phase(ScalarField(grid, u_vals + step * du), prob) <= floor:
                raise PhaseFloorViolated(
                    "no step length preserves the supercritical phase floor"
                )
            raise MaxItersExceeded(
                f"line search stalled at residual_sup={res_sup:.3e}"
            )
    else:
        if res_sup > cfg.tol:
            raise MaxItersExceeded(
                f"residual_sup={res_sup:.3e} > tol={cfg.tol:.3e} after "
                f"{cfg.max_iters} iterations"
            )

    u_vals = u_vals - u_vals.mean()
    rows = [
        (i, sup, margin + floor, 1.0, float(ci))
        for i, ((sup, _, margin), ci) in enumerate(zip(trace, c_hist))
    ]
    return SolveReport(
        u=ScalarField(grid, u_vals),
        c=float(c),
        residual_sup=res_sup,
        converged=bool(res_sup <= cfg.tol),
        newton_trace=trace,
        iterate_rows=rows,
    )


def continuity_solve(prob: DhymProblem, cfg: SolverConfig | None = None) -> SolveReport:
    """March a constant-target problem from the initial phase field.

    The stage target at time t is (1-t) Theta0 + t h_hat; the step doubles
    after fast stages and halves on failure within [1/1024, 1/4].  Stage
    solutions warm-start the next stage.  The final stage constant is the
    shift c_1, reported as a diagnostic (it vanishes for h_hat equal to the
    averaged angle of (omega, chi0), up to discretization).
    """
    cfg = cfg or SolverConfig()
    if isinstance(prob.target, ScalarField):
        raise PhaseOutOfRange("continuity_solve needs a constant target")
    grid = prob.grid
    h_hat = float(prob.target)
    theta0 = theta_field(prob.omega, prob.chi0)
    if theta0.values.min() < prob.phase_floor + prob.eps0 - 1e-12:
        raise PhaseFloorViolated("initial phase field is not supercritical")

    u = ScalarField(grid, np.zeros(grid.shape))
    c = 0.0
    t = 0.0
    dt = min(max(cfg.dt_init, DT_MIN), DT_MAX)
    continuity_trace: list[tuple[float, float, int]] = [(0.0, 0.0, 0)]
    newton_trace: list[tuple[float, float, float]] = []
    iterate_rows: list[tuple[int, float, float, float, float]] = []
    report = None

    while t < 1.0:
        t_next = min(1.0, t + dt)
        stage_target = ScalarField(
            grid, (1.0 - t_next) * theta0.values + t_next * h_hat
        )
        stage_prob = DhymProblem(
            grid=grid,
            omega=prob.omega,
            chi0=prob.chi0,
            target=stage_target,
            eps0=prob.eps0,
        )
        try:
            report = newton_solve(stage_prob, u0=u, cfg=cfg)
        except (MaxItersExceeded, LinearSolveStalled, PhaseFloorViolated):
            dt *= 0.5
            if dt < DT_MIN:
                raise PathStalled(
                    f"continuation step underflowed {DT_MIN:g} at t={t:.6g}"
                )
            continue
        u, c = report.u, report.c
        iters = len(report.newton_trace) - 1
        newton_trace.extend(report.newton_trace)
        base = len(iterate_rows)
        iterate_rows.extend(
            (base + i, sup, phase, t_next, float(c))
            for i, (_, sup, phase, _, _) in enumerate(report.iterate_rows)
        )
        continuity_trace.append((t_next, c, iters))
        t = t_next
        if iters <= cfg.fast_stage_iters:
            dt = min(2.0 * dt, DT_MAX)

    final = report if report is not None else newton_solve(prob, u0=u, cfg=cfg)
    return SolveReport(
        u=final.u,
        c=final.c,
        residual_sup=final.residual_sup,
        converged=final.converged,
        newton_trace=newton_trace,
        continuity_trace=continuity_trace,
        iterate_rows=iterate_rows,
    )
