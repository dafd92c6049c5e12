"""Iterative methods: Newton baselines, penalty and augmented Newton, root finding.

The two headline updates, with preconditioner ``G > 0``, penalty ``rho`` and
step constant ``L``:

    penalty form:    x+ = x - (1/L) (G/rho + H(x))^{-1} grad f(x)
    augmented form:  x+ = x - (G/rho + H(x))^{-1} [ (1/L) grad f(x)
                                                    - (1/rho) G (x - x_prev) ]

Choosing ``G = I`` recovers the Levenberg update, ``G = diag(H)`` the
Levenberg-Marquardt one, and ``rho -> inf`` the plain Newton step. The
augmented form is equivalently a Newton step plus adaptive heavy-ball
momentum, or a primal/dual multiplier iteration (see ``anm_step_dual``).

Runs record an :class:`IterateTrace` with per-iteration function values,
gradient norms, penalty values, weighted step norms and (when f* is known)
the composite descent value ``f(x_k) - f* + (L / 2 rho_k) ||x_k - x_{k-1}||^2_G``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DenominatorVanished,
    LineSearchStall,
    MaxIterationsExceeded,
    NotPositiveDefinite,
    RangeViolation,
)
from .linalg import as_symmetric, pinv_apply, spd_solve, sym_eig, weighted_norm_sq
from .objective import ObjectiveModel

__all__ = [
    "PreconditionerPolicy",
    "PenaltySchedule",
    "SolverConfig",
    "IterateRecord",
    "IterateTrace",
    "DualState",
    "newton_step",
    "newton_run",
    "damped_newton_run",
    "pnm_step",
    "pnm_run",
    "anm_step_dual",
    "anm_step_momentum",
    "anm_run",
    "root_penalty_newton",
    "root_augmented_newton",
    "FStarResult",
    "fstar_oracle",
    "run",
    "METHODS",
]

METHODS = ("newton", "damped_newton", "pnm", "anm")


@dataclass(frozen=True)
class PreconditionerPolicy:
    """How to realize the penalty-norm matrix G at each iterate.

    ``identity`` gives the Levenberg special case, ``hessian_diagonal`` the
    Levenberg-Marquardt one (G re-evaluated as diag(H(x_k)) every iterate),
    and ``fixed`` uses a user-supplied PD matrix throughout.
    """

    kind: str = "identity"
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "hessian_diagonal", "fixed"):
            raise ValueError(f"unknown preconditioner kind {self.kind!r}")
        if self.kind == "fixed":
            if self.matrix is None:
                raise ValueError("fixed preconditioner needs a matrix")
            M = as_symmetric(self.matrix)
            w, _ = sym_eig(M)
            if float(w[0]) <= 0.0:
                raise NotPositiveDefinite(
                    f"fixed preconditioner must be PD (lambda_min = {w[0]:.3e})"
                )
            object.__setattr__(self, "matrix", M)

    @classmethod
    def identity(cls) -> "PreconditionerPolicy":
        return cls("identity")

    @classmethod
    def hessian_diagonal(cls) -> "PreconditionerPolicy":
        return cls("hessian_diagonal")

    @classmethod
    def fixed(cls, M) -> "PreconditionerPolicy":
        return cls("fixed", np.asarray(M, dtype=float))

    def materialize(self, H: np.ndarray) -> np.ndarray:
        """Concrete G for an iterate whose Hessian is ``H``."""
        n = H.shape[0]
        if self.kind == "identity":
            return np.eye(n)
        if self.kind == "hessian_diagonal":
            d = np.diag(H).copy()
            if np.any(d <= 0.0):
                raise NotPositiveDefinite(
                    "hessian_diagonal preconditioner needs a strictly positive "
                    f"Hessian diagonal (min entry {d.min():.3e})"
                )
            return np.diag(d)
        return self.matrix


@dataclass(frozen=True)
class PenaltySchedule:
    """Geometric penalty growth ``rho_{k+1} = min(c * rho_k, rho_max)``."""

    rho0: float = 1.0
    c: float = 2.0
    rho_max: float = 1e12

    def __post_init__(self):
        if not self.rho0 > 0.0:
            raise ValueError(f"rho0 must be > 0, got {self.rho0}")
        if self.c < 1.0:
            raise ValueError(f"growth factor c must be >= 1, got {self.c}")
        if self.rho_max < self.rho0:
            raise ValueError("rho_max must be >= rho0")

    @classmethod
    def fixed(cls, rho: float) -> "PenaltySchedule":
        return cls(rho0=rho, c=1.0, rho_max=max(rho, 1e12))

    def next_rho(self, rho: float) -> float:
        return min(self.c * rho, self.rho_max)


@dataclass(frozen=True)
class SolverConfig:
    """Method selection plus every knob the runs need."""

    method: str = "pnm"
    precond: PreconditionerPolicy = field(default_factory=PreconditionerPolicy.identity)
    schedule: PenaltySchedule = field(default_factory=PenaltySchedule)
    step_L: float = 1.0
    max_iters: int = 100
    grad_tol: float = 1e-8
    bt_alpha: float = 0.25
    bt_beta: float = 0.5

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.step_L > 0.0:
            raise ValueError(f"step constant L must be > 0, got {self.step_L}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0.0:
            raise ValueError("grad_tol must be > 0")
        if not (0.0 < self.bt_alpha <= 0.5):
            raise ValueError("backtracking alpha must be in (0, 1/2]")
        if not (0.0 < self.bt_beta < 1.0):
            raise ValueError("backtracking beta must be in (0, 1)")


@dataclass
class IterateRecord:
    k: int
    x: np.ndarray
    f: float
    grad_norm: float
    rho: float
    step_norm_g_sq: float
    lyapunov: float | None
    elapsed_ns: int


@dataclass
class IterateTrace:
    """Per-iteration history of a solver run.

    ``records[k].rho`` is the penalty parameter in effect for the step that
    leaves ``x_k`` (``inf`` for the Newton baselines); ``step_norm_g_sq`` is
    ``||x_k - x_{k-1}||^2_G`` for the step that produced ``x_k`` (0 at k=0).
    """

    method: str
    records: list[IterateRecord] = field(default_factory=list)
    termination: str = "max_iters"
    f_star: float | None = None
    steps_taken: int = 0

    @property
    def xs(self) -> list[np.ndarray]:
        return [r.x for r in self.records]

    @property
    def final(self) -> IterateRecord:
        return self.records[-1]


@dataclass
class DualState:
    """Multiplier estimate ``z`` and the combined vector ``u = (rho/L) grad f + G z``."""

    z: np.ndarray
    u: np.ndarray | None = None


def _range_checked_newton_direction(H, g, step_L: float) -> np.ndarray:
    d = pinv_apply(H, g)
    residual = float(np.linalg.norm(H @ d - g))
    if residual > 1e-8 * (1.0 + float(np.linalg.norm(g))):
        raise RangeViolation(
            f"gradient lies outside Range(H): projection residual {residual:.3e}"
        )
    return d / step_L


def newton_step(model: ObjectiveModel, x, step_L: float = 1.0) -> np.ndarray:
    """Pseudo-inverse Newton update ``x - (1/L) H(x)^+ grad f(x)``.

    Raises :class:`RangeViolation` when the gradient has a component outside
    ``Range(H)`` (the range assumption fails), detected by the projection
    residual exceeding ``1e-8 * (1 + ||grad||)``.
    """
    x = np.asarray(x, dtype=float)
    H = model.hessian(x)
    g = model.gradient(x)
    return x - _range_checked_newton_direction(H, g, step_L)


def pnm_step(model: ObjectiveModel, x, rho: float, G, step_L: float) -> np.ndarray:
    """Penalty Newton update ``x - (1/L) (G/rho + H(x))^{-1} grad f(x)``."""
    x = np.asarray(x, dtype=float)
    H = model.hessian(x)
    g = model.gradient(x)
    return x - spd_solve(as_symmetric(G) / rho + H, g) / step_L


def anm_step_dual(
    model: ObjectiveModel, x, dual: DualState, rho: float, G, step_L: float
) -> tuple[np.ndarray, DualState]:
    """Primal/dual augmented update.

    With ``u = (rho/L) grad f(x) + G z`` the new multiplier is
    ``z+ = (1/rho) (G/rho + H)^{-1} u`` and the new point ``x+ = x - z+``,
    so ``z+ == x - x+`` holds exactly.
    """
    x = np.asarray(x, dtype=float)
    G = as_symmetric(G)
    H = model.hessian(x)
    g = model.gradient(x)
    u = (rho / step_L) * g + G @ dual.z
    z_next = spd_solve(G / rho + H, u) / rho
    return x - z_next, DualState(z=z_next, u=u)


def anm_step_momentum(model: ObjectiveModel, x, x_prev, rho: float, G, step_L: float) -> np.ndarray:
    """Momentum-form augmented update.

    Solves one shifted system against ``(1/L) grad f(x) - (1/rho) G (x - x_prev)``;
    algebraically this equals the penalty step plus
    ``Theta(x) (x - x_prev)`` with ``Theta = (1/rho) (G/rho + H)^{-1} G``.
    """
    x = np.asarray(x, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    G = as_symmetric(G)
    H = model.hessian(x)
    rhs = model.gradient(x) / step_L - G @ (x - x_prev) / rho
    return x - spd_solve(G / rho + H, rhs)


def _lyapunov_value(gap: float, step_norm_g_sq: float, rho: float, step_L: float) -> float:
    v = gap + step_L / (2.0 * rho) * step_norm_g_sq
    return 0.0 if -1e-9 < v < 0.0 else v


def _start_trace(method: str, model: ObjectiveModel, x0, rho: float) -> tuple[IterateTrace, int]:
    t0 = time.perf_counter_ns()
    x0 = np.asarray(x0, dtype=float)
    f_star = model.f_star
    trace = IterateTrace(method=method, f_star=f_star)
    f0 = model.value(x0)
    lyap = None
    if f_star is not None and np.isfinite(rho):
        lyap = _lyapunov_value(f0 - f_star, 0.0, rho, 1.0)
    trace.records.append(
        IterateRecord(
            k=0,
            x=x0.copy(),
            f=f0,
            grad_norm=float(np.linalg.norm(model.gradient(x0))),
            rho=rho,
            step_norm_g_sq=0.0,
            lyapunov=lyap,
            elapsed_ns=time.perf_counter_ns() - t0,
        )
    )
    return trace, t0


def _append_record(
    trace: IterateTrace,
    model: ObjectiveModel,
    x: np.ndarray,
    rho: float,
    step_norm_g_sq: float,
    step_L: float,
    t0: int,
) -> IterateRecord:
    f = model.value(x)
    lyap = None
    if trace.f_star is not None and np.isfinite(rho):
        lyap = _lyapunov_value(f - trace.f_star, step_norm_g_sq, rho, step_L)
    rec = IterateRecord(
        k=trace.records[-1].k + 1,
        x=x.copy(),
        f=f,
        grad_norm=float(np.linalg.norm(model.gradient(x))),
        rho=rho,
        step_norm_g_sq=step_norm_g_sq,
        lyapunov=lyap,
        elapsed_ns=time.perf_counter_ns() - t0,
    )
    trace.records.append(rec)
    return rec


def newton_run(model: ObjectiveModel, x0, config: SolverConfig) -> IterateTrace:
    """Fixed-step Newton iteration ``x - (1/L) H^+ grad f`` until ``grad_tol``."""
    trace, t0 = _start_trace("newton", model, x0, np.inf)
    x = trace.records[0].x
    for _ in range(config.max_iters):
        if trace.records[-1].grad_norm <= config.grad_tol:
            break
        x_next = newton_step(model, x, config.step_L)
        step_sq = float((x_next - x) @ (x_next - x))
        trace.steps_taken += 1
        _append_record(trace, model, x_next, np.inf, step_sq, config.step_L, t0)
        x = x_next
    trace.termination = "converged" if trace.records[-1].grad_norm <= config.grad_tol else "max_iters"
    return trace


def damped_newton_run(model: ObjectiveModel, x0, config: SolverConfig) -> IterateTrace:
    """Newton direction with backtracking line search on the Newton decrement.

    The step starts at ``t = 1`` and shrinks by ``bt_beta`` while
    ``f(x - t d) > f(x) - bt_alpha * t * decrement^2``. The comparison
    tolerates ties within a few ulps of ``f`` so that, once the required
    decrease falls below float resolution, the iteration can still take the
    Newton step and reach the numerical optimum instead of stalling. Raises
    :class:`LineSearchStall` (partial trace attached) if ``t`` falls below 1e-16.
    """
    trace, t0 = _start_trace("damped_newton", model, x0, np.inf)
    x = trace.records[0].x
    for _ in range(config.max_iters):
        if trace.records[-1].grad_norm <= config.grad_tol:
            break
        H = model.hessian(x)
        g = model.gradient(x)
        d = _range_checked_newton_direction(H, g, 1.0)
        decrement_sq = float(g @ d)
        f_curr = trace.records[-1].f
        tie_slack = 16.0 * np.finfo(float).eps * (1.0 + abs(f_curr))
        t = 1.0
        while model.value(x - t * d) > f_curr - config.bt_alpha * t * decrement_sq + tie_slack:
            t *= config.bt_beta
            if t < 1e-16:
                exc = LineSearchStall(
                    f"backtracking step underflowed at ||grad|| = {trace.records[-1].grad_norm:.3e}"
                )
                exc.trace = trace
                raise exc
        x_next = x - t * d
        step_sq = float((x_next - x) @ (x_next - x))
        trace.steps_taken += 1
        _append_record(trace, model, x_next, np.inf, step_sq, config.step_L, t0)
        x = x_next
    trace.termination = "converged" if trace.records[-1].grad_norm <= config.grad_tol else "max_iters"
    return trace


def pnm_run(model: ObjectiveModel, x0, config: SolverConfig) -> IterateTrace:
    """Penalty Newton iteration with the geometric penalty schedule."""
    rho = config.schedule.rho0
    trace, t0 = _start_trace("pnm", model, x0, rho)
    x = trace.records[0].x
    for _ in range(config.max_iters):
        if trace.records[-1].grad_norm <= config.grad_tol:
            break
        H = model.hessian(x)
        G = config.precond.materialize(H)
        x_next = x - spd_solve(G / rho + H, model.gradient(x)) / config.step_L
        step_sq = weighted_norm_sq(x_next - x, G)
        rho = config.schedule.next_rho(rho)
        trace.steps_taken += 1
        _append_record(trace, model, x_next, rho, step_sq, config.step_L, t0)
        x = x_next
    trace.termination = "converged" if trace.records[-1].grad_norm <= config.grad_tol else "max_iters"
    return trace


def anm_run(
    model: ObjectiveModel,
    x0,
    config: SolverConfig,
    x1=None,
    form: str = "momentum",
) -> IterateTrace:
    """Augmented Newton iteration from two initial points (default ``x1 = x0``).

    ``form`` selects the algebraically equivalent update route: ``momentum``
    solves against the combined right-hand side, ``dual`` carries the
    multiplier ``z`` explicitly (initialized ``z_1 = x_0 - x_1``). Stops when
    both the gradient norm and the G-weighted step norm fall below
    ``grad_tol``.
    """
    if form not in ("momentum", "dual"):
        raise ValueError(f"unknown ANM form {form!r}")
    rho = config.schedule.rho0
    trace, t0 = _start_trace("anm", model, x0, rho)
    x_prev = trace.records[0].x
    x = x_prev if x1 is None else np.asarray(x1, dtype=float)

    H = model.hessian(x)
    G = config.precond.materialize(H)
    step_sq = weighted_norm_sq(x - x_prev, G)
    _append_record(trace, model, x, rho, step_sq, config.step_L, t0)
    dual = DualState(z=x_prev - x)

    for _ in range(config.max_iters):
        last = trace.records[-1]
        if last.grad_norm <= config.grad_tol and np.sqrt(last.step_norm_g_sq) <= config.grad_tol:
            break
        H = model.hessian(x)
        G = config.precond.materialize(H)
        if form == "momentum":
            x_next = anm_step_momentum(model, x, x_prev, rho, G, config.step_L)
        else:
            x_next, dual = anm_step_dual(model, x, dual, rho, G, config.step_L)
        step_sq = weighted_norm_sq(x_next - x, G)
        rho = config.schedule.next_rho(rho)
        trace.steps_taken += 1
        _append_record(trace, model, x_next, rho, step_sq, config.step_L, t0)
        x_prev, x = x, x_next

    last = trace.records[-1]
    converged = last.grad_norm <= config.grad_tol and np.sqrt(last.step_norm_g_sq) <= config.grad_tol
    trace.termination = "converged" if converged else "max_iters"
    return trace


def run(model: ObjectiveModel, x0, config: SolverConfig, x1=None) -> IterateTrace:
    """Dispatch to the run matching ``config.method``."""
    if config.method == "newton":
        return newton_run(model, x0, config)
    if config.method == "damped_newton":
        return damped_newton_run(model, x0, config)
    if config.method == "pnm":
        return pnm_run(model, x0, config)
    return anm_run(model, x0, config, x1=x1)


def root_penalty_newton(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    x0: float,
    rho: float,
    tol: float = 1e-10,
    max_iters: int = 100,
) -> tuple[float, list[float]]:
    """Scalar penalty-Newton root finding.

    Update: ``x+ = x - rho f(x) / (1 + rho f'(x))``. Stops when
    ``|f(x)| <= tol``; raises :class:`DenominatorVanished` when
    ``|1 + rho f'(x)| <= 1e-14`` and :class:`MaxIterationsExceeded` when the
    budget runs out. Returns the root and the iterate sequence.
    """
    x = float(x0)
    xs = [x]
    for k in range(max_iters + 1):
        fx = f(x)
        if abs(fx) <= tol:
            return x, xs
        if k == max_iters:
            raise MaxIterationsExceeded(
                f"|f| = {abs(fx):.3e} > tol after {max_iters} iterations"
            )
        denom = 1.0 + rho * fprime(x)
        if abs(denom) <= 1e-14:
            raise DenominatorVanished(f"1 + rho f'(x) = {denom:.3e} at x = {x!r}")
        x = x - rho * fx / denom
        xs.append(x)
    raise AssertionError("unreachable")


def root_augmented_newton(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    x0: float,
    x1: float,
    rho: float,
    tol: float = 1e-10,
    max_iters: int = 100,
) -> tuple[float, list[float]]:
    """Scalar augmented-Newton root finding with a momentum correction.

    Update: ``x+ = x - [rho f(x) - (x - x_prev)] / (1 + rho f'(x))``.
    Same stopping and error behavior as :func:`root_penalty_newton`.
    """
    x_prev = float(x0)
    x = float(x1)
    xs = [x_prev, x] if x_prev != x else [x]
    for k in range(max_iters + 1):
        fx = f(x)
        if abs(fx) <= tol:
            return x, xs
        if k == max_iters:
            raise MaxIterationsExceeded(
                f"|f| = {abs(fx):.3e} > tol after {max_iters} iterations"
            )
        denom = 1.0 + rho * fprime(x)
        if abs(denom) <= 1e-14:
            raise DenominatorVanished(f"1 + rho f'(x) = {denom:.3e} at x = {x!r}")
        x_next = x - rho * fx / denom + (x - x_prev) / denom
        x_prev, x = x, x_next
        xs.append(x)
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class FStarResult:
    """Reference optimum produced by the damped-Newton oracle."""

    x_star: np.ndarray
    f_star: float
    grad_norm: float
    iterations: int
    converged: bool


def fstar_oracle(model: ObjectiveModel, grad_tol: float = 1e-13, max_iters: int = 10_000) -> FStarResult:
    """Resolve f* by damped Newton driven to ``||grad f|| <= grad_tol``.

    The terminal gradient norm is reported so downstream optimality gaps
    carry their provenance. A line-search stall near the floating-point
    floor returns the best point reached instead of failing.
    """
    config = SolverConfig(method="damped_newton", grad_tol=grad_tol, max_iters=max_iters)
    x0 = np.zeros(model.dim)
    try:
        trace = damped_newton_run(model, x0, config)
    except LineSearchStall as exc:
        trace = exc.trace
    last = trace.final
    return FStarResult(
        x_star=last.x,
        f_star=last.f,
        grad_norm=last.grad_norm,
        iterations=trace.steps_taken,
        converged=last.grad_norm <= grad_tol,
    )
