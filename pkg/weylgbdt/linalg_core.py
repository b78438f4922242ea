"""
Dense complex linear-algebra kernels for small matrices (n up to a few dozen).

Matrices are plain 2-D numpy arrays. Every function here is pure: inputs are never
modified and no state is kept between calls, so results can be shared freely across
threads.
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import MatrixOverflow, NearSingular, NonFiniteError, NotHermitian, ShapeError, SpectraOverlap

logger = logging.getLogger(__name__)

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D array; real input stays real, everything else is complex."""
    arr = np.asarray(M)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        arr = arr.astype(complex)
    else:
        arr = arr.astype(float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return arr


def _square(M, name: str) -> np.ndarray:
    arr = as_matrix(M, name)
    if arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {arr.shape}")
    return arr


def norm2(M) -> float:
    arr = np.asarray(M)
    if arr.size == 0:
        return 0.0
    if arr.ndim == 1:
        return float(np.linalg.norm(arr))
    return float(np.linalg.norm(arr, 2))


def mat_exp(M, t: float = 1.0) -> np.ndarray:
    """e^{tM} by scaling and squaring with Pade approximation.

    Exact on defective (Jordan-type) matrices, unlike eigendecomposition.
    """
    arr = _square(M, "M")
    t = float(t)
    if not np.isfinite(t):
        raise NonFiniteError("t must be finite")
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(t * arr)
    if not np.all(np.isfinite(out)):
        raise MatrixOverflow(f"e^(tM) overflows for t={t:.6g}, |M|={norm2(arr):.3e}")
    return out


def spectral_separation(F, G) -> float:
    """min |lambda_i(F) - mu_j(G)| over all eigenvalue pairs."""
    ev_f = np.linalg.eigvals(_square(F, "F"))
    ev_g = np.linalg.eigvals(_square(G, "G"))
    if ev_f.size == 0 or ev_g.size == 0:
        return float("inf")
    return float(np.min(np.abs(ev_f[:, None] - ev_g[None, :])))


def solve_sylvester(F, G, C, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Unique X with F X - X G = C.

    Raises SpectraOverlap when the spectra of F and G come closer than
    tolerances.sylvester_separation * (|F| + |G|); callers fall back to Van Loan.
    """
    F = _square(F, "F")
    G = _square(G, "G")
    C = as_matrix(C, "C")
    if C.shape != (F.shape[0], G.shape[0]):
        raise ShapeError(f"C must be {F.shape[0]}x{G.shape[0]}, got {C.shape}")
    scale = norm2(F) + norm2(G)
    threshold = tolerances.sylvester_separation * scale
    separation = spectral_separation(F, G)
    if separation <= threshold:
        raise SpectraOverlap(separation, threshold)

    X = scipy.linalg.solve_sylvester(F, -G, C)
    residual = norm2(F @ X - X @ G - C)
    bound = 1e-12 * scale * norm2(X)
    if residual > bound and residual > np.finfo(float).eps * norm2(C):
        logger.warning("Sylvester residual %.3e above %.3e (separation %.3e)", residual, bound, separation)
    return X


def van_loan_integral(F, C, G, x: float) -> np.ndarray:
    """Integral over r in [0, x] of e^{rF} C e^{rG}, signed for x < 0.

    The top-right block of exp(x [[F, C], [0, -G]]) is the integral times e^{-xG}.
    """
    F = _square(F, "F")
    G = _square(G, "G")
    C = as_matrix(C, "C")
    p, q = F.shape[0], G.shape[0]
    if C.shape != (p, q):
        raise ShapeError(f"C must be {p}x{q}, got {C.shape}")
    dtype = complex if any(np.iscomplexobj(a) for a in (F, C, G)) else float
    block = np.zeros((p + q, p + q), dtype=dtype)
    block[:p, :p] = F
    block[:p, p:] = C
    block[p:, p:] = -G
    top_right = mat_exp(block, x)[:p, p:]
    return top_right @ mat_exp(G, x)


def hermitian_min_eig(M, tol: Optional[float] = None) -> float:
    """Smallest eigenvalue of the Hermitian part of M."""
    M = _square(M, "M")
    tol = DEFAULT_TOLERANCES.hermitian if tol is None else tol
    deviation = norm2(M - M.conj().T)
    threshold = tol * norm2(M)
    if deviation > threshold:
        raise NotHermitian("M", deviation, threshold)
    H = 0.5 * (M + M.conj().T)
    return float(np.linalg.eigvalsh(H)[0])


def inverse_with_condition(M, limit: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """(M^-1, 2-norm condition number); only inverts where conditioning permits."""
    M = _square(M, "M")
    limit = DEFAULT_TOLERANCES.condition_limit if limit is None else limit
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > limit:
        raise NearSingular(cond, limit)
    return np.linalg.inv(M), cond
