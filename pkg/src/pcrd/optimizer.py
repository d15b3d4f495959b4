"""Rate-constrained QP selection with an augmented Lagrangian method.

The outer loop grows the penalty geometrically and updates the multiplier
from the rate residual; each subproblem is minimized by projected gradient
descent over the real-valued QP box. The continuous optimum is rounded to
the best feasible neighboring integer pair at the end.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .rdmodel import RdModels, eval_distortion, eval_rate, grad_distortion, grad_rate

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class InfeasibleBudgetError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Solver constants. ``q_init=None`` starts both QPs at the models' sweep
    anchor; ``SolverConfig.published()`` gives the looser published settings
    (0.3 thresholds, start at 51)."""

    alpha: float = 1.5
    rho0: float = 50.0
    lambda0: float = 0.0
    gamma: float = 0.001
    outer_tol: float = 1e-6
    inner_tol: float = 1e-9
    qp_min: float = 2
    qp_max: float = 51
    q_init: float | None = None
    max_outer: int = 100
    max_inner: int = 100_000

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        if not self.rho0 > 0:
            raise ValueError("rho0 must be > 0")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not (self.outer_tol >= 0 and self.inner_tol >= 0):
            raise ValueError("tolerances must be non-negative")
        if not self.qp_min < self.qp_max:
            raise ValueError("qp_min must be < qp_max")
        if self.q_init is not None and not self.qp_min <= self.q_init <= self.qp_max:
            raise ValueError("q_init must lie in [qp_min, qp_max]")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be positive")

    @classmethod
    def published(cls, **overrides) -> "SolverConfig":
        return cls(**{"outer_tol": 0.3, "inner_tol": 0.3, "q_init": 51, **overrides})

    @classmethod
    def from_overrides(cls, overrides: dict) -> "SolverConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in overrides.items() if k in names})


@dataclass
class TraceRow:
    """State after one outer iteration: the subproblem solution and the
    multiplier and penalty that were used to obtain it."""

    q_g: float
    q_c: float
    J: float
    residual: float
    lam: float
    rho: float
    inner_steps: int


@dataclass
class SolveResult:
    q_g_star: int
    q_c_star: int
    q_g_real: float
    q_c_real: float
    model_rate: float
    model_distortion: float
    model_rate_real: float
    model_distortion_real: float
    lambda_final: float
    rho_final: float
    target_rate: float
    converged: bool
    outer_iterations: int
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def augmented_lagrangian(q_g, q_c, lam, rho, models: RdModels, R_hat):
    """``D + lam (R - R_hat) + rho/2 (R - R_hat)^2`` at ``(q_g, q_c)``."""
    r = eval_rate(models, q_g, q_c) - R_hat
    return eval_distortion(models, q_g, q_c) + lam * r + 0.5 * rho * r * r


def augmented_lagrangian_grad(q_g, q_c, lam, rho, models: RdModels, R_hat):
    r = eval_rate(models, q_g, q_c) - R_hat
    dg, dc = grad_distortion(models, q_g, q_c)
    rg, rc = grad_rate(models, q_g, q_c)
    w = lam + rho * r
    return dg + w * rg, dc + w * rc


def _inner(lam, rho, models, R_hat, start, config):
    lo, hi = config.qp_min, config.qp_max
    qg, qc = start
    J = augmented_lagrangian(qg, qc, lam, rho, models, R_hat)
    if not math.isfinite(J):
        raise SolverError(f"objective is not finite at q=({qg}, {qc})")
    steps = 0
    for steps in range(1, config.max_inner + 1):
        gg, gc = augmented_lagrangian_grad(qg, qc, lam, rho, models, R_hat)
        if not (math.isfinite(gg) and math.isfinite(gc)):
            raise SolverError(f"gradient is not finite at q=({qg}, {qc})")
        ng = min(max(qg - config.gamma * gg, lo), hi)
        nc = min(max(qc - config.gamma * gc, lo), hi)
        nJ = augmented_lagrangian(ng, nc, lam, rho, models, R_hat)
        if not math.isfinite(nJ):
            raise SolverError(f"objective is not finite at q=({ng}, {nc})")
        decrement = J - nJ
        if decrement < config.inner_tol:
            # a step that raised J is not taken
            if decrement >= 0:
                qg, qc, J = ng, nc, nJ
            break
        qg, qc, J = ng, nc, nJ
    return qg, qc, J, steps


def inner_minimize(lam, rho, models: RdModels, R_hat, start, config: SolverConfig | None = None):
    """Projected gradient descent on the augmented Lagrangian from ``start``.

    Stops once one step lowers the objective by less than ``inner_tol`` (or
    ``max_inner`` steps). Returns the final ``(q_g, q_c)``.
    """
    config = config or SolverConfig()
    qg, qc, _, _ = _inner(lam, rho, models, R_hat, start, config)
    return qg, qc


def _round_to_feasible(models, qg, qc, R_hat, config):
    """Best feasible integer pair among the four around ``(qg, qc)``.

    Ranked by model distortion, then rate, then q_g. If none of the four is
    feasible the search widens one ring at a time.
    """
    lo, hi = int(math.ceil(config.qp_min)), int(math.floor(config.qp_max))
    base_g = min(max(int(math.floor(qg)), lo), hi)
    base_c = min(max(int(math.floor(qc)), lo), hi)
    ring = 0
    while True:
        cands = set()
        for dg in range(-ring, ring + 2):
            for dc in range(-ring, ring + 2):
                if ring and -ring < dg < ring + 1 and -ring < dc < ring + 1:
                    continue
                g, c = base_g + dg, base_c + dc
                if lo <= g <= hi and lo <= c <= hi:
                    cands.add((g, c))
        if not cands:
            return None
        feasible = [
            (eval_distortion(models, g, c), eval_rate(models, g, c), g, c)
            for g, c in cands
            if eval_rate(models, g, c) <= R_hat
        ]
        if feasible:
            _, _, g, c = min(feasible)
            return g, c
        ring += 1


def min_model_rate(models: RdModels, config: SolverConfig | None = None):
    """Lowest model rate over the integer QP grid, with the pair attaining it.

    With a rate model that falls monotonically in both QPs this is the
    coarsest pair; fitted polynomials can turn back up before the edge.
    """
    config = config or SolverConfig()
    q = np.arange(int(math.ceil(config.qp_min)), int(math.floor(config.qp_max)) + 1, dtype=np.float64)
    G, C = np.meshgrid(q, q, indexing="ij")
    R = eval_rate(models, G, C)
    i, j = np.unravel_index(np.argmin(R), R.shape)
    return float(R[i, j]), (int(q[i]), int(q[j]))


def check_feasible(models: RdModels, R_hat: float, config: SolverConfig | None = None) -> None:
    config = config or SolverConfig()
    if not R_hat > 0:
        raise InfeasibleBudgetError(f"target rate must be positive, got {R_hat}")
    floor_rate, at = min_model_rate(models, config)
    if floor_rate > R_hat:
        raise InfeasibleBudgetError(
            f"infeasible: target rate {R_hat:g} Mbps is below the lowest model rate {floor_rate:g} Mbps "
            f"(reached at QPs {at})"
        )


def solve(models: RdModels, R_hat: float, config: SolverConfig | None = None) -> SolveResult:
    """Minimize model distortion subject to model rate <= ``R_hat``."""
    config = config or SolverConfig()
    check_feasible(models, R_hat, config)

    lam, rho = config.lambda0, config.rho0
    qg, qc = _start(models, config)
    trace = []
    prev_J = None
    converged = False
    for _ in range(config.max_outer):
        qg, qc, J, steps = _inner(lam, rho, models, R_hat, (qg, qc), config)
        residual = eval_rate(models, qg, qc) - R_hat
        trace.append(TraceRow(qg, qc, J, residual, lam, rho, steps))
        lam = lam + rho * residual
        rho = config.alpha * rho
        if prev_J is not None and abs(J - prev_J) < config.outer_tol:
            converged = True
            break
        prev_J = J

    if converged:
        final_g, final_c = qg, qc
    else:
        log.warning("augmented Lagrangian did not converge in %d outer iterations", config.max_outer)
        final_g, final_c = _best_feasible(models, trace, R_hat, (qg, qc))

    rounded = _round_to_feasible(models, final_g, final_c, R_hat, config)
    if rounded is None:
        raise InfeasibleBudgetError(f"no feasible integer QP pair for target rate {R_hat:g}")
    g_star, c_star = rounded
    log.info("solved R_hat=%g: q=(%d, %d) after %d outer iterations", R_hat, g_star, c_star, len(trace))
    return SolveResult(
        q_g_star=g_star,
        q_c_star=c_star,
        q_g_real=final_g,
        q_c_real=final_c,
        model_rate=float(eval_rate(models, g_star, c_star)),
        model_distortion=float(eval_distortion(models, g_star, c_star)),
        model_rate_real=float(eval_rate(models, final_g, final_c)),
        model_distortion_real=float(eval_distortion(models, final_g, final_c)),
        lambda_final=lam,
        rho_final=rho,
        target_rate=float(R_hat),
        converged=converged,
        outer_iterations=len(trace),
        trace=trace,
    )


def _start(models, config):
    if config.q_init is not None:
        return float(config.q_init), float(config.q_init)
    lo, hi = config.qp_min, config.qp_max
    return tuple(float(min(max(q, lo), hi)) for q in models.anchor)


def _best_feasible(models, trace, R_hat, fallback):
    feasible = [(eval_distortion(models, t.q_g, t.q_c), t.q_g, t.q_c) for t in trace if t.residual <= 0]
    if not feasible:
        return fallback
    _, g, c = min(feasible)
    return g, c


def grid_optimum(models: RdModels, R_hat: float, qp_min: int = 2, qp_max: int = 51):
    """Exhaustive search over integer QP pairs; ``None`` when nothing is feasible."""
    q = np.arange(qp_min, qp_max + 1, dtype=np.float64)
    G, C = np.meshgrid(q, q, indexing="ij")
    D = eval_distortion(models, G, C)
    R = eval_rate(models, G, C)
    D = np.where(R <= R_hat, D, np.inf)
    if not np.isfinite(D).any():
        return None
    i, j = np.unravel_index(np.argmin(D), D.shape)
    return int(q[i]), int(q[j]), float(D[i, j])
