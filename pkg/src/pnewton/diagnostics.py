"""Spectral diagnostics and linear-rate certification for penalty/augmented runs.

For a PSD Hessian ``H``, PD preconditioner ``G`` and penalty ``rho``, the two
central matrices are

    K = (G/rho + H)^{-1}                      (the shifted inverse)
    F = H^{1/2} (I/rho + H^{1/2} G^{-1} H^{1/2})^{-1} H^{1/2}   (filtered curvature)

On the G-whitened scale both act through the scalar filter
``lam -> rho*lam / (1 + rho*lam)`` applied to the eigenvalues of
``G^{-1/2} H G^{-1/2}``; everything here is computed through that shared
eigendecomposition, which keeps the algebraic identities

    H K = I - (1/rho) G K          and          G K G = rho G - rho F

accurate to ~1e-11 even at extreme penalties where a naive inversion loses
several digits.

The certifications replay a recorded solver trace and test, iteration by
iteration, the contraction factors that the convergence analysis predicts:
``1 - eta`` on optimality gaps for penalty runs and ``1 - xi*mu/L`` on the
composite descent value for augmented runs. Bounds outside (0, 1) are
reported as vacuous, never silently passed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import MissingOptimum, NotPSD, ZeroHessian
from .linalg import (
    DEFAULT_RANK_TOL,
    as_symmetric,
    inv_sqrt_pd,
    pinv_apply,
    psd_sqrt,
    spd_solve,
    sym_eig,
    weighted_norm_sq,
)
from .objective import ObjectiveModel

if TYPE_CHECKING:
    from .solvers import IterateTrace, PreconditionerPolicy

__all__ = [
    "CheckResult",
    "SpectralDiagnostics",
    "ContractionEntry",
    "ContractionReport",
    "shifted_inverse",
    "filtered_curvature",
    "min_filtered_curvature",
    "precond_floor",
    "momentum_matrix",
    "spectral_snapshot",
    "verify_inverse_identities",
    "verify_spectrum_match",
    "verify_gradient_energy_bound",
    "verify_step_energy_bound",
    "lyapunov",
    "certify_penalty_contraction",
    "certify_augmented_contraction",
]


@dataclass(frozen=True)
class CheckResult:
    """Boolean verdict plus the measured residuals/values behind it."""

    ok: bool
    values: dict[str, float] = field(default_factory=dict)
    precondition_ok: bool = True

    def __bool__(self) -> bool:
        return self.ok


def _whitened_spectrum(H, G):
    """Eigen-decompose ``G^{-1/2} H G^{-1/2}``; returns (G^{1/2}, G^{-1/2}, V, lam)."""
    H = as_symmetric(H)
    G = as_symmetric(G)
    Gis = inv_sqrt_pd(G)
    Gs = psd_sqrt(G)
    W = Gis @ H @ Gis
    lam, V = sym_eig(0.5 * (W + W.T))
    lam_max = max(float(lam[-1]), 0.0)
    if float(lam[0]) < -1e-10 * lam_max:
        raise NotPSD(
            f"Hessian is not PSD on the whitened scale (lambda_min = {lam[0]:.3e})"
        )
    return Gs, Gis, V, np.clip(lam, 0.0, None)


def shifted_inverse(H, G, rho: float) -> np.ndarray:
    """The matrix ``(G/rho + H)^{-1}``, symmetric positive definite."""
    _, Gis, V, lam = _whitened_spectrum(H, G)
    diag = 1.0 / (1.0 / rho + lam)
    K = Gis @ ((V * diag) @ V.T) @ Gis
    return 0.5 * (K + K.T)


def filtered_curvature(H, G, rho: float) -> np.ndarray:
    """The matrix ``H^{1/2} (I/rho + H^{1/2} G^{-1} H^{1/2})^{-1} H^{1/2}``, PSD.

    Complementary to the shifted inverse: ``G K G = rho G - rho F``.
    """
    Gs, _, V, lam = _whitened_spectrum(H, G)
    diag = lam / (1.0 / rho + lam)
    F = Gs @ ((V * diag) @ V.T) @ Gs
    return 0.5 * (F + F.T)


def min_filtered_curvature(H, G, rho: float, rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """Smallest nonzero filtered eigenvalue ``xi = rho*lam / (1 + rho*lam)``.

    ``lam`` ranges over the nonzero spectrum of ``G^{-1/2} H G^{-1/2}``;
    the result lies in (0, 1]. Raises :class:`ZeroHessian` when the Hessian
    is numerically zero (no nonzero eigenvalue to take a minimum over).
    """
    _, _, _, lam = _whitened_spectrum(H, G)
    lam_max = float(lam[-1])
    if lam_max <= 0.0:
        raise ZeroHessian("whitened Hessian is numerically zero; xi is undefined")
    nonzero = lam[lam > rank_tol * lam_max]
    if nonzero.size == 0:
        raise ZeroHessian("whitened Hessian is numerically zero; xi is undefined")
    lam_min = float(nonzero[0])
    return rho * lam_min / (1.0 + rho * lam_min)


def precond_floor(H, G, rho: float) -> float:
    """Smallest eigenvalue of ``K^{1/2} G K^{1/2}`` (the beta of the gap bound)."""
    K = shifted_inverse(H, G, rho)
    Ks = psd_sqrt(K)
    B = Ks @ as_symmetric(G) @ Ks
    w, _ = sym_eig(0.5 * (B + B.T))
    return float(w[0])


def momentum_matrix(H, G, rho: float) -> np.ndarray:
    """Adaptive heavy-ball coefficient ``Theta = (1/rho) (G/rho + H)^{-1} G``.

    Not symmetric in general; its spectral radius is below 1 whenever H is PD.
    """
    G = as_symmetric(G)
    H = as_symmetric(H)
    return spd_solve(G / rho + H, G) / rho


@dataclass(frozen=True)
class SpectralDiagnostics:
    """Snapshot of the spectral objects at one iterate."""

    shifted_inv: np.ndarray
    filtered: np.ndarray
    xi: float
    beta: float
    theta: np.ndarray
    rho: float
    at_x: np.ndarray | None = None


def spectral_snapshot(
    H, G, rho: float, rank_tol: float = DEFAULT_RANK_TOL, at_x=None
) -> SpectralDiagnostics:
    """Assemble all spectral diagnostics for a Hessian/preconditioner pair."""
    return SpectralDiagnostics(
        shifted_inv=shifted_inverse(H, G, rho),
        filtered=filtered_curvature(H, G, rho),
        xi=min_filtered_curvature(H, G, rho, rank_tol),
        beta=precond_floor(H, G, rho),
        theta=momentum_matrix(H, G, rho),
        rho=rho,
        at_x=None if at_x is None else np.asarray(at_x, dtype=float),
    )


def verify_inverse_identities(H, G, rho: float, tol: float = 1e-8, K=None, F=None) -> CheckResult:
    """Check the two algebraic identities tying H, G, K and F together.

    ``||H K - (I - G K / rho)||_F <= tol`` and
    ``||G K G - rho G + rho F||_F <= tol * (1 + ||G||_F^2)``.
    ``K``/``F`` may be supplied explicitly (e.g. to show a corrupted matrix
    fails); by default they are computed here.
    """
    H = as_symmetric(H)
    G = as_symmetric(G)
    if K is None:
        K = shifted_inverse(H, G, rho)
    if F is None:
        F = filtered_curvature(H, G, rho)
    n = H.shape[0]
    res_hk = float(np.linalg.norm(H @ K - (np.eye(n) - G @ K / rho), "fro"))
    res_gkg = float(np.linalg.norm(G @ K @ G - rho * G + rho * F, "fro"))
    scale = 1.0 + float(np.linalg.norm(G, "fro")) ** 2
    ok = res_hk <= tol and res_gkg <= tol * scale
    return CheckResult(ok, {"res_hk": res_hk, "res_gkg": res_gkg, "gkg_scale": scale})


def _nonzero_eigs(M, rank_tol: float) -> np.ndarray:
    w, _ = sym_eig(M)
    lam_max = max(float(w[-1]), 0.0)
    if lam_max <= 0.0:
        return np.empty(0)
    return w[w > rank_tol * lam_max]


def verify_spectrum_match(
    H, G, rho: float, tol: float = 1e-8, rank_tol: float = DEFAULT_RANK_TOL
) -> CheckResult:
    """Check that ``H^{1/2} K H^{1/2}`` and ``G^{-1/2} F G^{-1/2}`` share nonzero spectra.

    The two matrices are built through different routes (the Hessian square
    root versus the whitened filter), so agreement genuinely exercises both.
    The sorted nonzero lists are compared as multisets: when an eigenvalue
    sits at the rank cutoff and the two routes classify it differently, the
    shorter list is padded with zeros, so the disputed value still has to be
    below ``tol`` for the check to pass.
    """
    H = as_symmetric(H)
    G = as_symmetric(G)
    S = psd_sqrt(H)
    K = shifted_inverse(H, G, rho)
    M1 = S @ K @ S
    Gis = inv_sqrt_pd(G)
    M2 = Gis @ filtered_curvature(H, G, rho) @ Gis
    e1 = _nonzero_eigs(0.5 * (M1 + M1.T), rank_tol)
    e2 = _nonzero_eigs(0.5 * (M2 + M2.T), rank_tol)
    width = max(e1.size, e2.size)
    p1 = np.concatenate([np.zeros(width - e1.size), e1])
    p2 = np.concatenate([np.zeros(width - e2.size), e2])
    max_diff = float(np.abs(p1 - p2).max()) if width else 0.0
    return CheckResult(
        max_diff <= tol,
        {"count_lhs": float(e1.size), "count_rhs": float(e2.size), "max_diff": max_diff},
    )


def verify_gradient_energy_bound(
    model: ObjectiveModel, x, G, rho: float, tol: float = 1e-10
) -> CheckResult:
    """Check ``||grad f||^2_K >= xi * ||grad f||^2_{H^+}`` at one point."""
    x = np.asarray(x, dtype=float)
    g = model.gradient(x)
    if float(np.linalg.norm(g)) == 0.0:
        return CheckResult(True, {"lhs": 0.0, "rhs": 0.0, "xi": np.nan})
    H = model.hessian(x)
    K = shifted_inverse(H, G, rho)
    lhs = weighted_norm_sq(g, K)
    xi = min_filtered_curvature(H, G, rho)
    rhs = xi * float(g @ pinv_apply(H, g))
    return CheckResult(lhs >= rhs - tol, {"lhs": lhs, "rhs": rhs, "xi": xi})


def verify_step_energy_bound(
    x, x_prev, H, G, rho: float, tol: float = 1e-10, rank_tol: float = DEFAULT_RANK_TOL
) -> CheckResult:
    """Check ``||x - x_prev||^2_F >= xi * ||x - x_prev||^2_G`` at one iterate.

    Requires H to be PD, or ``G (x - x_prev)`` to lie in ``Range(H)``
    (projection residual below ``1e-8 * (1 + ||G d||)``); the verdict carries
    ``precondition_ok = False`` when neither holds, in which case the bound
    itself is not guaranteed.
    """
    x = np.asarray(x, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    d = x - x_prev
    if float(np.linalg.norm(d)) == 0.0:
        return CheckResult(True, {"lhs": 0.0, "rhs": 0.0, "xi": np.nan})
    H = as_symmetric(H)
    G = as_symmetric(G)
    w, _ = sym_eig(H)
    pd = float(w[0]) > rank_tol * max(float(w[-1]), 0.0)
    if pd:
        range_ok = True
    else:
        v = G @ d
        proj_residual = float(np.linalg.norm(H @ pinv_apply(H, v) - v))
        range_ok = proj_residual <= 1e-8 * (1.0 + float(np.linalg.norm(v)))
    lhs = weighted_norm_sq(d, filtered_curvature(H, G, rho))
    xi = min_filtered_curvature(H, G, rho)
    rhs = xi * weighted_norm_sq(d, G)
    return CheckResult(lhs >= rhs - tol, {"lhs": lhs, "rhs": rhs, "xi": xi}, precondition_ok=range_ok)


def lyapunov(f_x: float, f_star: float, x, x_prev, G, rho: float, step_L: float) -> float:
    """Composite descent value ``f(x) - f* + (L / 2 rho) ||x - x_prev||^2_G``.

    Requires ``f_star <= f_x + 1e-9``; the result is clamped to be nonnegative
    against floating-point noise of that size.
    """
    if f_star > f_x + 1e-9:
        raise ValueError(f"f_star = {f_star!r} exceeds f(x) = {f_x!r} beyond tolerance")
    x = np.asarray(x, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    v = (f_x - f_star) + step_L / (2.0 * rho) * weighted_norm_sq(x - x_prev, G)
    return max(v, 0.0)


@dataclass
class ContractionEntry:
    k: int
    lhs: float
    bound: float
    satisfied: bool
    vacuous: bool
    slack: float
    xi: float
    beta: float | None = None
    eta: float | None = None
    precondition_ok: bool = True


@dataclass
class ContractionReport:
    """Per-iteration contraction certificates for one solver trace.

    ``lhs`` is the achieved ratio (NaN when the reference quantity is zero),
    ``bound`` the predicted factor, ``slack`` the margin of the inequality
    in absolute terms (nonnegative iff satisfied). Entries whose predicted
    factor falls outside (0, 1] are flagged vacuous instead of being scored.
    """

    kind: str
    entries: list[ContractionEntry] = field(default_factory=list)
    f_star: float = np.nan
    mu: float = np.nan
    step_L: float = np.nan

    @property
    def n_vacuous(self) -> int:
        return sum(e.vacuous for e in self.entries)

    @property
    def fraction_satisfied(self) -> float:
        scored = [e for e in self.entries if not e.vacuous]
        if not scored:
            return 1.0
        return sum(e.satisfied for e in scored) / len(scored)

    @property
    def worst_slack(self) -> float:
        scored = [e.slack for e in self.entries if not e.vacuous]
        return min(scored) if scored else np.inf

    @property
    def all_certified(self) -> bool:
        """Every iteration either satisfied its bound or was flagged vacuous."""
        return all(e.satisfied or e.vacuous for e in self.entries)

    @property
    def xi_min(self) -> float:
        return min((e.xi for e in self.entries), default=np.nan)

    @property
    def beta_min(self) -> float:
        betas = [e.beta for e in self.entries if e.beta is not None]
        return min(betas) if betas else np.nan

    def to_dict(self) -> dict:
        def _f(v):
            if v is None:
                return None
            v = float(v)
            return v if np.isfinite(v) else repr(v)

        return {
            "kind": self.kind,
            "f_star": _f(self.f_star),
            "mu": _f(self.mu),
            "step_L": _f(self.step_L),
            "aggregate": {
                "iterations": len(self.entries),
                "all_certified": self.all_certified,
                "fraction_satisfied": _f(self.fraction_satisfied),
                "worst_slack": _f(self.worst_slack),
                "n_vacuous": self.n_vacuous,
                "xi_min": _f(self.xi_min),
                "beta_min": _f(self.beta_min),
            },
            "entries": [
                {
                    "k": e.k,
                    "lhs": _f(e.lhs),
                    "bound": _f(e.bound),
                    "satisfied": e.satisfied,
                    "vacuous": e.vacuous,
                    "slack": _f(e.slack),
                    "xi": _f(e.xi),
                    "beta": _f(e.beta),
                    "eta": _f(e.eta),
                    "precondition_ok": e.precondition_ok,
                }
                for e in self.entries
            ],
        }


def _resolve_f_star(trace: "IterateTrace", model: ObjectiveModel) -> float:
    if trace.f_star is not None:
        return float(trace.f_star)
    if model.f_star is not None:
        return float(model.f_star)
    raise MissingOptimum("certification needs f*; attach an optimum to the model or trace")


def certify_penalty_contraction(
    trace: "IterateTrace",
    model: ObjectiveModel,
    precond: "PreconditionerPolicy",
    mu: float,
    step_L: float,
    slack_tol: float = 1e-12,
) -> ContractionReport:
    """Certify per-iteration gap contraction of a penalty-Newton trace.

    At each recorded iterate the contraction margin is
    ``eta_k = mu * xi_k * (beta_k + rho_k) / (rho_k * L)`` with
    ``beta_k`` the smallest eigenvalue of ``K^{1/2} G K^{1/2}`` at that
    iterate; the check is ``gap_{k+1} <= (1 - eta_k) * gap_k + slack_tol``.
    Iterations where ``eta_k`` falls outside (0, 1] are flagged vacuous.
    """
    f_star = _resolve_f_star(trace, model)
    report = ContractionReport(kind="penalty", f_star=f_star, mu=mu, step_L=step_L)
    records = trace.records
    for k in range(len(records) - 1):
        x_k = records[k].x
        rho_k = records[k].rho
        H_k = model.hessian(x_k)
        G_k = precond.materialize(H_k)
        xi_k = min_filtered_curvature(H_k, G_k, rho_k)
        beta_k = precond_floor(H_k, G_k, rho_k)
        eta_k = mu * xi_k * (beta_k + rho_k) / (rho_k * step_L)
        gap_k = records[k].f - f_star
        gap_next = records[k + 1].f - f_star
        rhs = (1.0 - eta_k) * gap_k + slack_tol
        report.entries.append(
            ContractionEntry(
                k=k,
                lhs=gap_next / gap_k if gap_k > 0.0 else np.nan,
                bound=1.0 - eta_k,
                satisfied=gap_next <= rhs,
                vacuous=not (0.0 < eta_k <= 1.0),
                slack=rhs - gap_next,
                xi=xi_k,
                beta=beta_k,
                eta=eta_k,
            )
        )
    return report


def certify_augmented_contraction(
    trace: "IterateTrace",
    model: ObjectiveModel,
    precond: "PreconditionerPolicy",
    mu: float,
    step_L: float,
    slack_tol: float = 1e-12,
) -> ContractionReport:
    """Certify per-iteration composite-value contraction of an augmented trace.

    For each interior iterate the composite value
    ``V_k = f(x_k) - f* + (L / 2 rho_k) ||x_k - x_{k-1}||^2_G`` must contract
    by at least ``1 - xi_k * mu / L`` (both sides evaluated at the penalty
    value actually used for the step). The range condition on
    ``G (x_k - x_{k-1})`` is checked and annotated per iterate.
    """
    f_star = _resolve_f_star(trace, model)
    if len(trace.records) < 2:
        raise ValueError("augmented certification needs a trace with at least two points")
    report = ContractionReport(kind="augmented", f_star=f_star, mu=mu, step_L=step_L)
    records = trace.records
    for k in range(1, len(records) - 1):
        x_prev, x_k, x_next = records[k - 1].x, records[k].x, records[k + 1].x
        rho_k = records[k].rho
        H_k = model.hessian(x_k)
        G_k = precond.materialize(H_k)
        xi_k = min_filtered_curvature(H_k, G_k, rho_k)
        theta_k = xi_k * mu / step_L
        v_k = lyapunov(records[k].f, f_star, x_k, x_prev, G_k, rho_k, step_L)
        v_next = lyapunov(records[k + 1].f, f_star, x_next, x_k, G_k, rho_k, step_L)
        rhs = (1.0 - theta_k) * v_k + slack_tol
        step_check = verify_step_energy_bound(x_k, x_prev, H_k, G_k, rho_k)
        report.entries.append(
            ContractionEntry(
                k=k,
                lhs=v_next / v_k if v_k > 0.0 else np.nan,
                bound=1.0 - theta_k,
                satisfied=v_next <= rhs,
                vacuous=not (0.0 < theta_k <= 1.0),
                slack=rhs - v_next,
                xi=xi_k,
                precondition_ok=step_check.precondition_ok,
            )
        )
    return report
