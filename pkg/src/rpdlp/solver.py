"""Restarted primal-dual hybrid gradient for general-form LPs.

The engine runs PDHG on the diagonally preconditioned saddle problem with an
adaptive step-size, a primal weight that balances primal and dual progress,
and restarts driven by the weighted KKT error of the original problem. All
quantities reported back (objectives, residuals, KKT errors) are evaluated on
the unscaled instance.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import (
    GeneralFormLp,
    PrimalDualPoint,
    ReducedCosts,
    SaddleProblem,
    bound_term,
    reduced_costs_from_slack,
    stacked_matrix,
    stacked_rhs,
    to_saddle,
)
from .scaling import DiagonalScaling, apply_scaling, compute_scaling
from .sparse import max_abs_entry, spmv, spmv_transpose


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"
    NUMERICAL_ERROR = "numerical_error"


class NumericalFailure(ArithmeticError):
    """A non-finite value appeared in the iterates."""


@dataclass
class SolverParams:
    eps_optimal: float = 1e-4
    eps_infeasible: float = 1e-8
    time_limit: float = 3600.0
    iteration_limit: int = 10**9
    beta_sufficient: float = 0.2
    beta_necessary: float = 0.8
    beta_artificial: float = 0.36
    theta_smoothing: float = 0.5
    eps_zero: float = 1e-10
    evaluation_frequency: int = 64
    eager_restart: bool = False
    scaling: str = "ruiz+pc"
    ruiz_iterations: int = 10
    pock_chambolle_alpha: float = 1.0
    step_reduction_exponent: float = 0.3
    step_growth_exponent: float = 0.6
    omega_min: float = 1e-8
    omega_max: float = 1e8
    detect_infeasibility: bool = True

    def __post_init__(self):
        if not 0 < self.beta_sufficient < self.beta_necessary < 1:
            raise ValueError("need 0 < beta_sufficient < beta_necessary < 1")
        if not 0 < self.beta_artificial < 1:
            raise ValueError("beta_artificial must lie in (0, 1)")
        if self.eps_optimal <= 0 or self.eps_infeasible <= 0 or self.eps_zero <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 <= self.theta_smoothing <= 1.0:
            raise ValueError("theta_smoothing must lie in [0, 1]")
        if self.evaluation_frequency < 1:
            raise ValueError("evaluation_frequency must be at least 1")
        if self.time_limit <= 0 or self.iteration_limit < 0:
            raise ValueError("limits must be positive")
        if not 0 < self.omega_min <= self.omega_max:
            raise ValueError("need 0 < omega_min <= omega_max")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConvergenceInfo:
    primal_objective: float
    dual_objective: float
    gap_abs: float
    primal_residual_norm: float
    dual_residual_norm: float
    rhs_norm: float
    cost_norm: float
    kkt_omega: float = math.nan

    @property
    def relative_gap(self) -> float:
        return self.gap_abs / (1.0 + abs(self.primal_objective) + abs(self.dual_objective))

    @property
    def relative_primal_residual(self) -> float:
        return self.primal_residual_norm / (1.0 + self.rhs_norm)

    @property
    def relative_dual_residual(self) -> float:
        return self.dual_residual_norm / (1.0 + self.cost_norm)

    def criteria(self, eps: float) -> tuple[tuple[float, float], ...]:
        """(left side, right side) of the gap, primal and dual tests."""
        return (
            (self.gap_abs, eps * (1.0 + abs(self.dual_objective) + abs(self.primal_objective))),
            (self.primal_residual_norm, eps * (1.0 + self.rhs_norm)),
            (self.dual_residual_norm, eps * (1.0 + self.cost_norm)),
        )

    def satisfied(self, eps: float) -> bool:
        return all(lhs <= rhs for lhs, rhs in self.criteria(eps))


@dataclass
class InfeasibilityCertificate:
    status: SolveStatus
    ray: np.ndarray
    source: str  # "difference" or "normalized"
    residual: float
    objective: float


@dataclass
class StepRecord:
    k: int
    omega: float
    eta: float
    eta_bar: float
    eta_next: float
    trials: int
    z: PrimalDualPoint | None = None
    z_new: PrimalDualPoint | None = None


@dataclass
class EvaluationRecord:
    k: int
    t: int
    n: int
    omega: float
    kkt_current: float
    kkt_average: float
    kkt_candidate: float
    kkt_previous_candidate: float
    kkt_epoch_start: float
    restart: str | None = None
    kkt_new_epoch_start: float = math.nan
    z_average: PrimalDualPoint | None = None


@dataclass
class SolveTrace:
    """Optional per-iteration log filled in by :func:`solve`.

    ``keep_iterates`` also stores the scaled iterates before and after each
    accepted step and the running average at each evaluation, which is
    memory-hungry and meant for tests.
    """

    keep_iterates: bool = False
    steps: list[StepRecord] = field(default_factory=list)
    evaluations: list[EvaluationRecord] = field(default_factory=list)
    scaled_problem: SaddleProblem | None = None
    scaling: DiagonalScaling | None = None


@dataclass
class SolveResult:
    status: SolveStatus
    point: PrimalDualPoint
    reduced_costs: ReducedCosts
    info: ConvergenceInfo
    iterations: int
    restarts: int
    solve_seconds: float
    certificate: InfeasibilityCertificate | None = None
    limit: str | None = None
    message: str = ""


# Single operations.


def pdhg_raw_step(
    z: PrimalDualPoint, tau: float, sigma: float, problem: SaddleProblem
) -> PrimalDualPoint:
    """One PDHG step with primal step ``tau`` and dual step ``sigma``."""
    if tau <= 0 or sigma <= 0:
        raise ValueError("step sizes must be positive")
    K = problem.K
    x_new = np.clip(z.x - tau * (problem.c - spmv_transpose(K, z.y)), problem.l, problem.u)
    y_new = z.y + sigma * (problem.q - spmv(K, 2.0 * x_new - z.x))
    if problem.m1:
        np.maximum(y_new[: problem.m1], 0.0, out=y_new[: problem.m1])
    return PrimalDualPoint(x_new, y_new)


@dataclass
class AdaptiveStep:
    x: np.ndarray
    y: np.ndarray
    kx: np.ndarray
    kty: np.ndarray
    eta: float
    eta_next: float
    eta_bar: float
    trials: int


def adaptive_step(
    x: np.ndarray,
    y: np.ndarray,
    omega: float,
    eta_hat: float,
    k: int,
    problem: SaddleProblem,
    kx: np.ndarray | None = None,
    kty: np.ndarray | None = None,
    reduction_exponent: float = 0.3,
    growth_exponent: float = 0.6,
) -> AdaptiveStep:
    """PDHG step with the adaptive step-size search.

    ``kx`` and ``kty`` are the cached products ``K @ x`` and ``K.T @ y``; each
    trial costs one product with ``K`` and one with ``K.T``.

    Raises:
        NumericalFailure: on a non-finite iterate or a vanishing step-size.
    """
    if eta_hat <= 0:
        raise ValueError("eta_hat must be positive")
    if k < 1:
        raise ValueError("iteration counter passed to adaptive_step starts at 1")
    K, c, q, l, u, m1 = problem.K, problem.c, problem.q, problem.l, problem.u, problem.m1
    if kx is None:
        kx = spmv(K, x)
    if kty is None:
        kty = spmv_transpose(K, y)
    shrink = 1.0 - (k + 1) ** (-reduction_exponent)
    grow = 1.0 + (k + 1) ** (-growth_exponent)
    eta = eta_hat
    trials = 0
    while True:
        trials += 1
        x_new = x - (eta / omega) * (c - kty)
        np.clip(x_new, l, u, out=x_new)
        kx_new = spmv(K, x_new)
        y_new = y + (eta * omega) * (q - (2.0 * kx_new - kx))
        if m1:
            np.maximum(y_new[:m1], 0.0, out=y_new[:m1])
        dx = x_new - x
        dy = y_new - y
        movement = omega * (dx @ dx) + (dy @ dy) / omega
        # Magnitude of the cross term: a negative product is what breaks the
        # PDHG metric for this sign convention, so it must limit the step too.
        interaction = 2.0 * abs(dy @ (kx_new - kx))
        if not (math.isfinite(movement) and math.isfinite(interaction)):
            raise NumericalFailure(f"non-finite iterate at iteration {k}")
        eta_bar = movement / interaction if interaction > 0 else math.inf
        eta_next = min(shrink * eta_bar, grow * eta)
        if eta <= eta_bar:
            return AdaptiveStep(
                x_new, y_new, kx_new, spmv_transpose(K, y_new), eta, eta_next, eta_bar, trials
            )
        if not eta_next > 0:
            raise NumericalFailure(f"step-size collapsed to {eta_next} at iteration {k}")
        eta = eta_next


def initialize_primal_weight(c: np.ndarray, q: np.ndarray, eps_zero: float = 1e-10) -> float:
    c_norm = float(np.linalg.norm(c))
    q_norm = float(np.linalg.norm(q))
    if c_norm > eps_zero and q_norm > eps_zero:
        return c_norm / q_norm
    return 1.0


def update_primal_weight(
    z_new: PrimalDualPoint,
    z_prev: PrimalDualPoint,
    omega_prev: float,
    theta: float = 0.5,
    eps_zero: float = 1e-10,
) -> float:
    """Log-space exponential smoothing of ``||dy|| / ||dx||`` between epoch starts."""
    dx = float(np.linalg.norm(z_new.x - z_prev.x))
    dy = float(np.linalg.norm(z_new.y - z_prev.y))
    if dx > eps_zero and dy > eps_zero:
        return math.exp(theta * math.log(dy / dx) + (1.0 - theta) * math.log(omega_prev))
    return omega_prev


def should_restart(
    kkt_now: float,
    kkt_prev: float,
    kkt_epoch_start: float,
    t: int,
    k: int,
    params: SolverParams,
) -> str | None:
    """Return the first restart criterion that holds ("sufficient", "necessary", "artificial")."""
    if kkt_now <= params.beta_sufficient * kkt_epoch_start:
        return "sufficient"
    if kkt_now <= params.beta_necessary * kkt_epoch_start and kkt_now > kkt_prev:
        return "necessary"
    if t >= params.beta_artificial * k:
        return "artificial"
    return None


class _Evaluator:
    """Residuals, objectives and KKT errors on the original instance."""

    def __init__(self, lp: GeneralFormLp):
        self.lp = lp
        self.K = stacked_matrix(lp)
        self.q = stacked_rhs(lp)
        self.m1 = lp.num_ineq
        self.rhs_norm = float(np.linalg.norm(self.q))
        self.cost_norm = float(np.linalg.norm(lp.c))

    def info(self, x: np.ndarray, y: np.ndarray, omega: float = 1.0) -> tuple[ConvergenceInfo, ReducedCosts]:
        lp, m1 = self.lp, self.m1
        kx = spmv(self.K, x)
        kty = spmv_transpose(self.K, y)
        lam = reduced_costs_from_slack(lp.c - kty, lp.l, lp.u)
        eq = kx[m1:] - lp.b
        ineq = np.maximum(lp.h - kx[:m1], 0.0)
        pres_sq = float(eq @ eq + ineq @ ineq)
        dres = lp.c - kty - lam.lam
        dres_sq = float(dres @ dres)
        pobj = float(lp.c @ x) + lp.objective_constant
        dobj = float(self.q @ y) + bound_term(lp.l, lp.u, lam) + lp.objective_constant
        gap = dobj - pobj
        kkt = math.sqrt(omega**2 * pres_sq + dres_sq / omega**2 + gap * gap)
        info = ConvergenceInfo(
            primal_objective=pobj,
            dual_objective=dobj,
            gap_abs=abs(gap),
            primal_residual_norm=math.sqrt(pres_sq),
            dual_residual_norm=math.sqrt(dres_sq),
            rhs_norm=self.rhs_norm,
            cost_norm=self.cost_norm,
            kkt_omega=kkt,
        )
        return info, lam


def kkt_error_omega(z: PrimalDualPoint, omega: float, lp: GeneralFormLp) -> float:
    """Weighted KKT error of an (unscaled) point."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    info, _ = _Evaluator(lp).info(z.x, z.y, omega)
    return info.kkt_omega


def restart_candidate(
    z: PrimalDualPoint, z_bar: PrimalDualPoint, omega: float, lp: GeneralFormLp
) -> PrimalDualPoint:
    """The current iterate if its KKT error is strictly smaller, else the average."""
    ev = _Evaluator(lp)
    if ev.info(z.x, z.y, omega)[0].kkt_omega < ev.info(z_bar.x, z_bar.y, omega)[0].kkt_omega:
        return z
    return z_bar


def check_termination(
    z: PrimalDualPoint, lam: ReducedCosts | None, lp: GeneralFormLp, eps: float
) -> tuple[bool, ConvergenceInfo]:
    """Relative KKT termination test on the original problem (inclusive inequalities).

    ``lam`` is recomputed from ``z.y`` when omitted; when given it must be the
    reduced costs of ``z.y``.
    """
    ev = _Evaluator(lp)
    info, computed = ev.info(z.x, z.y)
    if lam is not None and not np.array_equal(lam.lam, computed.lam):
        kty = spmv_transpose(ev.K, z.y)
        dres = lp.c - kty - lam.lam
        pobj = info.primal_objective
        dobj = float(ev.q @ z.y) + bound_term(lp.l, lp.u, lam) + lp.objective_constant
        info.dual_residual_norm = float(np.linalg.norm(dres))
        info.dual_objective = dobj
        info.gap_abs = abs(dobj - pobj)
    return info.satisfied(eps), info


def check_infeasibility(
    delta_z: PrimalDualPoint | None,
    normalized_z: PrimalDualPoint | None,
    lp: GeneralFormLp,
    eps_infeasible: float,
) -> InfeasibilityCertificate | None:
    """Test the two candidate rays for approximate Farkas certificates.

    A dual ray ``y`` (inequality part projected to be nonnegative) certifies
    primal infeasibility when, with ``lam`` the sign-feasible part of
    ``-K.T @ y``, ``||K.T@y + lam|| <= eps*||y||``, ``q@y + l@lam+ - u@lam- >
    eps*||y||`` and additionally ``||K.T@y + lam|| <= eps * (q@y + ...)``. The
    primal-ray test for dual infeasibility is the mirror image.
    """
    K = stacked_matrix(lp)
    q = stacked_rhs(lp)
    m1 = lp.num_ineq
    for source, z in (("difference", delta_z), ("normalized", normalized_z)):
        if z is None:
            continue
        cert = _dual_ray_certificate(z.y, K, q, lp, m1, eps_infeasible, source)
        if cert is not None:
            return cert
        cert = _primal_ray_certificate(z.x, K, lp, m1, eps_infeasible, source)
        if cert is not None:
            return cert
    return None


def _dual_ray_certificate(y, K, q, lp, m1, eps, source):
    y = y.copy()
    if m1:
        np.maximum(y[:m1], 0.0, out=y[:m1])
    y_norm = float(np.linalg.norm(y))
    if not y_norm > 0 or not math.isfinite(y_norm):
        return None
    kty = spmv_transpose(K, y)
    lam = reduced_costs_from_slack(-kty, lp.l, lp.u)
    residual = float(np.linalg.norm(kty + lam.lam))
    objective = float(q @ y) + bound_term(lp.l, lp.u, lam)
    if residual <= eps * y_norm and objective > eps * y_norm and residual <= eps * objective:
        return InfeasibilityCertificate(SolveStatus.PRIMAL_INFEASIBLE, y, source, residual, objective)
    return None


def _primal_ray_certificate(x, K, lp, m1, eps, source):
    x_norm = float(np.linalg.norm(x))
    if not x_norm > 0 or not math.isfinite(x_norm):
        return None
    kx = spmv(K, x)
    # Recession violations: A x = 0, G x >= 0, x >= 0 on finite lower bounds, x <= 0 on finite upper.
    viol = np.concatenate(
        [
            np.abs(kx[m1:]),
            np.maximum(-kx[:m1], 0.0),
            np.where(np.isfinite(lp.l), np.maximum(-x, 0.0), 0.0),
            np.where(np.isfinite(lp.u), np.maximum(x, 0.0), 0.0),
        ]
    )
    objective = float(lp.c @ x)
    tol = eps * x_norm
    ok = (
        float(np.linalg.norm(kx[m1:])) <= tol
        and (m1 == 0 or float(np.min(kx[:m1])) >= -tol)
        and bool(np.all(np.where(np.isfinite(lp.l), x, 0.0) >= -tol))
        and bool(np.all(np.where(np.isfinite(lp.u), x, 0.0) <= tol))
        and objective < -tol
    )
    residual = float(np.linalg.norm(viol))
    if ok and residual <= eps * -objective:
        return InfeasibilityCertificate(SolveStatus.DUAL_INFEASIBLE, x, source, residual, objective)
    return None


# Driver.


def solve(lp: GeneralFormLp, params: SolverParams | None = None, trace: SolveTrace | None = None) -> SolveResult:
    """Solve ``lp`` with restarted PDHG; see :class:`SolverParams` for knobs."""
    params = params or SolverParams()
    start = time.perf_counter()
    deadline = start + params.time_limit
    evaluator = _Evaluator(lp)

    saddle = to_saddle(lp)
    scaling = compute_scaling(
        saddle.K, params.scaling, params.ruiz_iterations, params.pock_chambolle_alpha
    )
    prob = apply_scaling(saddle, scaling)
    if trace is not None:
        trace.scaled_problem = prob
        trace.scaling = scaling
    K = prob.K
    n, m = prob.num_vars, prob.num_rows

    x = np.zeros(n)
    y = np.zeros(m)
    kx = np.zeros(m)
    kty = np.zeros(n)
    x_avg, y_avg = x.copy(), y.copy()
    eta_sum = 0.0
    max_abs = max_abs_entry(K)
    eta_hat = 1.0 / max_abs if max_abs > 0 else 1.0
    omega = _clamp(initialize_primal_weight(prob.c, prob.q, params.eps_zero), params)
    x_start, y_start = x.copy(), y.copy()
    dx = dy = None

    def evaluate(xs, ys, w):
        return evaluator.info(xs * scaling.d_col, ys * scaling.d_row, w)

    info, lam = evaluate(x, y, omega)
    kkt_epoch_start = info.kkt_omega
    kkt_prev_candidate = kkt_epoch_start
    k = t = restarts = 0
    freq = 1 if params.eager_restart else params.evaluation_frequency

    def finish(status, xs, ys, info, lam, certificate=None, limit=None, message=""):
        return SolveResult(
            status=status,
            point=PrimalDualPoint(xs * scaling.d_col, ys * scaling.d_row),
            reduced_costs=lam,
            info=info,
            iterations=k,
            restarts=restarts,
            solve_seconds=time.perf_counter() - start,
            certificate=certificate,
            limit=limit,
            message=message,
        )

    def average_copy():
        if trace is None or not trace.keep_iterates:
            return None
        return PrimalDualPoint(x_avg.copy(), y_avg.copy())

    if info.satisfied(params.eps_optimal):
        return finish(SolveStatus.OPTIMAL, x, y, info, lam)

    while True:
        try:
            step = adaptive_step(
                x, y, omega, eta_hat, k + 1, prob, kx, kty,
                params.step_reduction_exponent, params.step_growth_exponent,
            )
        except NumericalFailure as exc:
            info, lam = evaluate(x, y, omega)
            return finish(SolveStatus.NUMERICAL_ERROR, x, y, info, lam, message=str(exc))
        if trace is not None:
            trace.steps.append(
                StepRecord(
                    k + 1, omega, step.eta, step.eta_bar, step.eta_next, step.trials,
                    PrimalDualPoint(x, y) if trace.keep_iterates else None,
                    PrimalDualPoint(step.x, step.y) if trace.keep_iterates else None,
                )
            )
        dx, dy = step.x - x, step.y - y
        x, y, kx, kty = step.x, step.y, step.kx, step.kty
        eta_hat = step.eta_next
        eta_sum += step.eta
        weight = step.eta / eta_sum
        x_avg = x_avg + weight * (x - x_avg)
        y_avg = y_avg + weight * (y - y_avg)
        t += 1
        k += 1

        out_of_time = time.perf_counter() >= deadline
        out_of_iterations = k >= params.iteration_limit
        if k % freq and not (out_of_time or out_of_iterations):
            continue

        info_cur, lam_cur = evaluate(x, y, omega)
        info_avg, lam_avg = evaluate(x_avg, y_avg, omega)
        use_current = info_cur.kkt_omega < info_avg.kkt_omega
        cand = (x, y, info_cur, lam_cur) if use_current else (x_avg, y_avg, info_avg, lam_avg)
        other = (x_avg, y_avg, info_avg, lam_avg) if use_current else (x, y, info_cur, lam_cur)
        for xs, ys, inf_, lam_ in (cand, other):
            if inf_.satisfied(params.eps_optimal):
                if trace is not None:
                    trace.evaluations.append(
                        EvaluationRecord(k, t, restarts, omega, info_cur.kkt_omega,
                                         info_avg.kkt_omega, cand[2].kkt_omega,
                                         kkt_prev_candidate, kkt_epoch_start,
                                         z_average=average_copy())
                    )
                return finish(SolveStatus.OPTIMAL, xs, ys, inf_, lam_)

        if params.detect_infeasibility:
            cert = check_infeasibility(
                PrimalDualPoint(dx * scaling.d_col, dy * scaling.d_row),
                PrimalDualPoint(
                    (x - x_start) / t * scaling.d_col, (y - y_start) / t * scaling.d_row
                ),
                lp,
                params.eps_infeasible,
            )
            if cert is not None:
                return finish(cert.status, x, y, info_cur, lam_cur, certificate=cert)

        if out_of_time or out_of_iterations:
            status = SolveStatus.TIME_LIMIT if out_of_time else SolveStatus.ITERATION_LIMIT
            limit = (
                f"time_limit={params.time_limit}" if out_of_time
                else f"iteration_limit={params.iteration_limit}"
            )
            return finish(status, cand[0], cand[1], cand[2], cand[3], limit=limit)

        kkt_cand = cand[2].kkt_omega
        criterion = should_restart(kkt_cand, kkt_prev_candidate, kkt_epoch_start, t, k, params)
        record = None
        if trace is not None:
            record = EvaluationRecord(
                k, t, restarts, omega, info_cur.kkt_omega, info_avg.kkt_omega,
                kkt_cand, kkt_prev_candidate, kkt_epoch_start, criterion,
                z_average=average_copy(),
            )
            trace.evaluations.append(record)
        if criterion is None:
            kkt_prev_candidate = kkt_cand
            continue

        # Restart at the candidate.
        if criterion == "sufficient":
            assert kkt_cand <= params.beta_sufficient * kkt_epoch_start
        x_new, y_new = cand[0].copy(), cand[1].copy()
        if not use_current:
            kx = spmv(K, x_new)
            kty = spmv_transpose(K, y_new)
        omega = _clamp(
            update_primal_weight(
                PrimalDualPoint(x_new, y_new), PrimalDualPoint(x_start, y_start),
                omega, params.theta_smoothing, params.eps_zero,
            ),
            params,
        )
        x, y = x_new, y_new
        x_start, y_start = x.copy(), y.copy()
        x_avg, y_avg = x.copy(), y.copy()
        eta_sum = 0.0
        t = 0
        restarts += 1
        kkt_epoch_start = evaluate(x, y, omega)[0].kkt_omega
        kkt_prev_candidate = kkt_epoch_start
        if record is not None:
            record.kkt_new_epoch_start = kkt_epoch_start


def _clamp(omega: float, params: SolverParams) -> float:
    return min(max(omega, params.omega_min), params.omega_max)
