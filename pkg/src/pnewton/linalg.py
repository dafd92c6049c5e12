"""Dense symmetric linear-algebra kernels.

Everything downstream (solvers, diagnostics, GLM constants) funnels through
the handful of primitives here: validated symmetric matrices, shifted-SPD
solves with a jitter retry policy, symmetric eigendecomposition, pseudo-inverse
application, PSD square roots and weighted norms.

All functions are pure and operate on plain ``numpy`` arrays; matrices are
symmetrized once on entry via :func:`as_symmetric` and never mutated.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, NotPositiveDefinite, NotPSD

__all__ = [
    "EigenDecomposition",
    "as_symmetric",
    "spd_solve",
    "sym_eig",
    "pinv_apply",
    "psd_sqrt",
    "inv_sqrt_pd",
    "weighted_norm_sq",
    "lambda_min_pos",
    "DEFAULT_RANK_TOL",
]

#: Relative tolerance for the symmetry check in :func:`as_symmetric`.
SYMMETRY_RTOL = 1e-12

#: Default relative eigenvalue cutoff for numerical rank decisions.
DEFAULT_RANK_TOL = 1e-10


class EigenDecomposition(NamedTuple):
    """Spectral factorization ``M = V diag(w) V^T`` with ``w`` ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_symmetric(M, *, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Validate that ``M`` is square, finite and symmetric; return ``(M + M^T)/2``.

    Raises ``ValueError`` if the asymmetry exceeds ``rtol * max|M|`` or any
    entry is non-finite.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise ValueError("matrix has non-finite entries")
    scale = float(np.abs(M).max()) if M.size else 0.0
    skew = float(np.abs(M - M.T).max()) if M.size else 0.0
    if skew > rtol * scale:
        raise ValueError(
            f"matrix is not symmetric: max |M - M^T| = {skew:.3e} "
            f"exceeds {rtol:.0e} * max|M| = {rtol * scale:.3e}"
        )
    return 0.5 * (M + M.T)


def spd_solve(M, b) -> np.ndarray:
    """Solve ``M x = b`` for symmetric positive definite ``M`` by Cholesky.

    A marginally indefinite ``M`` (e.g. a shifted system ``G/rho + H`` with a
    huge penalty ``rho``) gets up to three jittered retries: the jitter starts
    at ``1e-12 * trace(M)/n`` and escalates tenfold per retry.

    ``b`` may be a vector or a matrix of stacked right-hand sides.

    Raises :class:`NotPositiveDefinite` if every attempt fails.
    """
    M = as_symmetric(M)
    b = np.asarray(b, dtype=float)
    n = M.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"rhs length {b.shape[0]} does not match order {n}")
    base = 1e-12 * float(np.trace(M)) / n
    jitter = 0.0
    for _ in range(4):
        try:
            shifted = M if jitter == 0.0 else M + jitter * np.eye(n)
            factor = scipy.linalg.cho_factor(shifted, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError:
            if base <= 0.0:
                break
            jitter = base if jitter == 0.0 else 10.0 * jitter
            continue
        return scipy.linalg.cho_solve(factor, b, check_finite=False)
    raise NotPositiveDefinite(
        f"Cholesky failed after 3 jittered retries (final jitter {jitter:.3e}); "
        "matrix is not positive definite"
    )


def sym_eig(M) -> EigenDecomposition:
    """Full symmetric eigendecomposition with ascending eigenvalues.

    Raises :class:`ConvergenceFailure` if the underlying eigensolver exceeds
    its sweep budget.
    """
    M = as_symmetric(M)
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigendecomposition did not converge: {exc}") from exc
    return EigenDecomposition(w, V)


def pinv_apply(M, b, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Apply the Moore-Penrose pseudo-inverse of a symmetric PSD ``M`` to ``b``.

    Eigenvalues at or below ``rank_tol * lambda_max`` are treated as zero, so
    the result is exact on ``Range(M)`` and annihilates ``Null(M)``.
    """
    w, V = sym_eig(M)
    b = np.asarray(b, dtype=float)
    lam_max = float(w[-1]) if w.size else 0.0
    if lam_max <= 0.0:
        return np.zeros_like(b)
    keep = w > rank_tol * lam_max
    coeff = V[:, keep].T @ b
    return V[:, keep] @ (coeff / w[keep])


def psd_sqrt(M) -> np.ndarray:
    """Symmetric PSD square root ``S`` with ``S @ S ~= M``.

    Tiny negative eigenvalues within ``-1e-10 * lambda_max`` are clamped to
    zero; anything more negative raises :class:`NotPSD`.
    """
    w, V = sym_eig(M)
    lam_max = max(float(w[-1]), 0.0) if w.size else 0.0
    if w.size and float(w[0]) < -1e-10 * lam_max:
        raise NotPSD(
            f"matrix has eigenvalue {w[0]:.3e} below -1e-10 * lambda_max = "
            f"{-1e-10 * lam_max:.3e}"
        )
    root = np.sqrt(np.clip(w, 0.0, None))
    S = (V * root) @ V.T
    return 0.5 * (S + S.T)


def inv_sqrt_pd(M) -> np.ndarray:
    """Inverse symmetric square root of a positive definite ``M``.

    Raises :class:`NotPositiveDefinite` if any eigenvalue is non-positive.
    """
    w, V = sym_eig(M)
    if w.size == 0 or float(w[0]) <= 0.0:
        raise NotPositiveDefinite(
            f"inverse square root needs a PD matrix (lambda_min = {w[0] if w.size else 'n/a'})"
        )
    W = (V * w**-0.5) @ V.T
    return 0.5 * (W + W.T)


def weighted_norm_sq(x, M) -> float:
    """Quadratic form ``x^T M x`` for PSD ``M``, clamped against tiny negative noise.

    Values in ``[-1e-12 * ||M||_F * ||x||^2, 0)`` are rounded up to zero.
    """
    M = as_symmetric(M)
    x = np.asarray(x, dtype=float)
    v = float(x @ (M @ x))
    if v < 0.0:
        band = 1e-12 * float(np.linalg.norm(M, "fro")) * float(x @ x)
        if v >= -band:
            v = 0.0
    return v


def lambda_min_pos(M, rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """Smallest eigenvalue of PSD ``M`` exceeding ``rank_tol * lambda_max``.

    Returns 0.0 when the matrix is numerically zero (no eigenvalue survives
    the cutoff).
    """
    w, _ = sym_eig(M)
    lam_max = float(w[-1]) if w.size else 0.0
    if lam_max <= 0.0:
        return 0.0
    above = w[w > rank_tol * lam_max]
    return float(above[0]) if above.size else 0.0
