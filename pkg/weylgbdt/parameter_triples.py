"""
GBDT parameter triples {A, S(0), Pi(0)}.

A triple is the seed datum of the transformation: n x n matrices A and S(0) and an
n x 2 matrix Pi(0) = [Lambda_1(0), Lambda_2(0)] tied together by the operator identity

    A S(0) - S(0) A* = i Pi(0) Pi(0)*,   S(0) = S(0)*.

validate_triple is the only way to obtain a ParameterTriple; every constructor in this
module goes through it, so holding a ParameterTriple means the identity was certified.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    ConfigError,
    ConstraintViolated,
    IdentityViolated,
    InconsistentLowerPart,
    NotHermitian,
    NotSkewSymmetric,
    ShapeError,
)
from .linalg_core import as_matrix, norm2

logger = logging.getLogger(__name__)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ParameterTriple:
    n: int
    A: np.ndarray
    S0: np.ndarray
    Pi0: np.ndarray
    identity_residual: float
    positive_definite: bool
    s0_min_eig: float

    @property
    def Lambda1(self) -> np.ndarray:
        return self.Pi0[:, 0]

    @property
    def Lambda2(self) -> np.ndarray:
        return self.Pi0[:, 1]

    @property
    def calA(self) -> np.ndarray:
        """The matrix A = i calA, i.e. calA = -iA."""
        return -1j * self.A


@dataclass(frozen=True)
class RealnessCertificate:
    is_real_form: bool
    max_violation: float


def operator_identity_residual(A: np.ndarray, S: np.ndarray, Pi: np.ndarray) -> float:
    """|A S - S A* - i Pi Pi*| / (1 + |S|)."""
    raw = A @ S - S @ A.conj().T - 1j * (Pi @ Pi.conj().T)
    return norm2(raw) / (1.0 + norm2(S))


def validate_triple(A, S0, Pi0, tolerances: Tolerances = DEFAULT_TOLERANCES) -> ParameterTriple:
    A = as_matrix(np.atleast_2d(A), "A").astype(complex)
    S0 = as_matrix(np.atleast_2d(S0), "S0").astype(complex)
    Pi0 = as_matrix(np.atleast_2d(Pi0), "Pi0").astype(complex)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ShapeError(f"A must be square, got {A.shape}")
    if S0.shape != (n, n):
        raise ShapeError(f"S0 must be {n}x{n}, got {S0.shape}")
    if Pi0.shape != (n, 2):
        raise ShapeError(f"Pi0 must be {n}x2, got {Pi0.shape}")

    s_norm = norm2(S0)
    deviation = norm2(S0 - S0.conj().T)
    if deviation > tolerances.hermitian * s_norm:
        raise NotHermitian("S0", deviation, tolerances.hermitian * s_norm)

    residual = norm2(A @ S0 - S0 @ A.conj().T - 1j * (Pi0 @ Pi0.conj().T))
    threshold = tolerances.triple_identity * (norm2(A) * s_norm + norm2(Pi0) ** 2)
    if residual > threshold:
        raise IdentityViolated(residual, threshold)

    min_eig = float(np.linalg.eigvalsh(0.5 * (S0 + S0.conj().T))[0])
    positive = min_eig > 0
    if not positive:
        logger.warning(
            "S0 is not positive definite (min eigenvalue %.3e); positivity and invertibility of S(x) are not guaranteed",
            min_eig,
        )
    return ParameterTriple(
        n=n,
        A=_frozen(A),
        S0=_frozen(S0),
        Pi0=_frozen(Pi0),
        identity_residual=residual,
        positive_definite=positive,
        s0_min_eig=min_eig,
    )


def realness_conditions(t: ParameterTriple, tolerances: Tolerances = DEFAULT_TOLERANCES) -> RealnessCertificate:
    """iA, S0, i Lambda_1(0) and Lambda_2(0) real: the dressed system is of Dirac-Weyl form."""
    parts = (1j * t.A, t.S0, 1j * t.Lambda1, t.Lambda2)
    violation = max(float(np.max(np.abs(p.imag))) if p.size else 0.0 for p in parts)
    return RealnessCertificate(is_real_form=violation <= tolerances.real_form, max_violation=violation)


def spectrum_halfplane_check(t: ParameterTriple, tolerances: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """True iff every eigenvalue of A lies in the closed upper half-plane (up to tolerance)."""
    if not t.positive_definite:
        logger.warning("spectrum check run without S0 > 0; the half-plane property is not implied")
    eigenvalues = np.linalg.eigvals(t.A)
    floor = -tolerances.halfplane * norm2(t.A)
    return bool(np.all(eigenvalues.imag >= floor))


def _real_vector(v, name: str, n: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(v)
    if np.iscomplexobj(arr):
        if np.max(np.abs(arr.imag), initial=0.0) > 0:
            raise ShapeError(f"{name} must be real")
        arr = arr.real
    arr = np.atleast_1d(arr.astype(float)).ravel()
    if n is not None and arr.size != n:
        raise ShapeError(f"{name} must have length {n}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    return arr


def make_example1(calA: float, m1: float, m2: float, sign1: int = 1, sign2: int = 1,
                  tolerances: Tolerances = DEFAULT_TOLERANCES) -> ParameterTriple:
    """Scalar triple: A = i calA, S0 = 1, Pi0 = [sign1 i m1, sign2 m2] with 2 calA = m1^2 + m2^2."""
    if sign1 not in (1, -1) or sign2 not in (1, -1):
        raise ConstraintViolated("signs must be +1 or -1")
    if not calA > 0:
        raise ConstraintViolated(f"calA must be positive, got {calA}")
    if m1 < 0 or m2 < 0:
        raise ConstraintViolated("m1 and m2 are moduli and must be non-negative")
    lhs, rhs = 2.0 * calA, m1 * m1 + m2 * m2
    if abs(lhs - rhs) > 1e-12 * max(1.0, lhs):
        raise ConstraintViolated(f"2*calA = {lhs:g} but m1^2 + m2^2 = {rhs:g}")
    return validate_triple(
        np.array([[1j * calA]]),
        np.array([[1.0]]),
        np.array([[sign1 * 1j * m1, sign2 * m2]]),
        tolerances,
    )


def make_example2(tolerances: Tolerances = DEFAULT_TOLERANCES) -> ParameterTriple:
    """Jordan-cell triple: A = i[[1,0],[1,1]], S0 = I, Pi0 = (1/sqrt 2)[[2i,0],[i,sqrt 3]]."""
    calA = np.array([[1.0, 0.0], [1.0, 1.0]])
    Pi0 = np.array([[math.sqrt(2.0) * 1j, 0.0], [1j * math.sqrt(0.5), math.sqrt(1.5)]])
    return validate_triple(1j * calA, np.eye(2), Pi0, tolerances)


def make_example3(calA0, h1, h2, tolerances: Tolerances = DEFAULT_TOLERANCES) -> ParameterTriple:
    """calA = calA0 + h1 h1^T + h2 h2^T with calA0 real skew-symmetric, Pi0 = sqrt 2 [i h1, h2]."""
    calA0 = np.atleast_2d(np.asarray(calA0))
    if np.iscomplexobj(calA0):
        if np.max(np.abs(calA0.imag), initial=0.0) > 0:
            raise NotSkewSymmetric("calA0 must have real entries")
        calA0 = calA0.real
    calA0 = calA0.astype(float)
    n = calA0.shape[0]
    if calA0.shape != (n, n):
        raise ShapeError(f"calA0 must be square, got {calA0.shape}")
    if norm2(calA0 + calA0.T) > 1e-12 * max(1.0, norm2(calA0)):
        raise NotSkewSymmetric("calA0 must satisfy calA0 = -calA0^T")
    h1 = _real_vector(h1, "h1", n)
    h2 = _real_vector(h2, "h2", n)
    calA = calA0 + np.outer(h1, h1) + np.outer(h2, h2)
    Pi0 = math.sqrt(2.0) * np.column_stack([1j * h1, h2])
    return validate_triple(1j * calA, np.eye(n), Pi0, tolerances)


def forced_lower_triangular(h1, h2) -> np.ndarray:
    """The lower-triangular calA with calA + calA^T = h1 h1^T + h2 h2^T."""
    h1 = _real_vector(h1, "h1")
    h2 = _real_vector(h2, "h2", h1.size)
    M = np.outer(h1, h1) + np.outer(h2, h2)
    return np.tril(M, -1) + np.diag(np.diag(M) / 2.0)


def make_example4(h1, h2, lower=None, tolerances: Tolerances = DEFAULT_TOLERANCES) -> ParameterTriple:
    """Triangular family: Pi0 = [i h1, h2], calA lower triangular with calA + calA^T = Pi0 Pi0*.

    The strictly lower part of calA is forced by that relation; `lower`, when given,
    is checked against it rather than used.
    """
    calA = forced_lower_triangular(h1, h2)
    n = calA.shape[0]
    if lower is not None:
        lower = np.atleast_2d(np.asarray(lower, dtype=float))
        if lower.shape != (n, n):
            raise ShapeError(f"lower must be {n}x{n}, got {lower.shape}")
        expected = np.tril(calA, -1)
        deviation = float(np.max(np.abs(lower - expected), initial=0.0))
        if deviation > 1e-12 * max(1.0, norm2(calA)):
            raise InconsistentLowerPart(deviation)
    h1v = _real_vector(h1, "h1", n)
    h2v = _real_vector(h2, "h2", n)
    Pi0 = np.column_stack([1j * h1v, h2v])
    return validate_triple(1j * calA, np.eye(n), Pi0, tolerances)


def random_example3(n: int, rng_seed: int, scale: float = 0.3, skew: float = 1.0) -> ParameterTriple:
    rng = np.random.default_rng(rng_seed)
    B = rng.uniform(-skew / 2.0, skew / 2.0, size=(n, n))
    h1 = rng.uniform(-scale, scale, size=n)
    h2 = rng.uniform(-scale, scale, size=n)
    return make_example3(B - B.T, h1, h2)


def random_example4(n: int, rng_seed: int, scale: float = 0.3) -> ParameterTriple:
    rng = np.random.default_rng(rng_seed)
    h1 = rng.uniform(-scale, scale, size=n)
    h2 = rng.uniform(-scale, scale, size=n)
    return make_example4(h1, h2)


def zero_dressing_triple(n: int = 1) -> ParameterTriple:
    """A = 0, S0 = I, Pi0 = 0: the identity transformation."""
    return validate_triple(np.zeros((n, n)), np.eye(n), np.zeros((n, 2)))


# -- serialization -------------------------------------------------------------

def _encode(M: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M, dtype=complex)]


def _decode(rows: Any, name: str) -> np.ndarray:
    try:
        out = []
        for row in rows:
            out_row = []
            for entry in row:
                if isinstance(entry, (list, tuple)):
                    re, im = entry
                else:
                    re, im = entry, 0.0
                out_row.append(complex(float(re), float(im)))
            out.append(out_row)
        arr = np.array(out, dtype=complex)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: entries must be [re, im] pairs ({e})")
    if arr.ndim != 2:
        raise ConfigError(f"{name}: rows must all have the same length")
    return arr


def triple_to_document(t: ParameterTriple) -> Dict[str, Any]:
    return {"n": t.n, "A": _encode(t.A), "S0": _encode(t.S0), "Pi0": _encode(t.Pi0)}


def triple_from_document(doc: Mapping[str, Any], tolerances: Tolerances = DEFAULT_TOLERANCES) -> ParameterTriple:
    missing = [k for k in ("n", "A", "S0", "Pi0") if k not in doc]
    if missing:
        raise ConfigError(f"triple document lacks {', '.join(missing)}")
    try:
        n = int(doc["n"])
    except (TypeError, ValueError):
        raise ConfigError("triple field n must be an integer")
    A = _decode(doc["A"], "A")
    S0 = _decode(doc["S0"], "S0")
    Pi0 = _decode(doc["Pi0"], "Pi0")
    for name, arr, shape in (("A", A, (n, n)), ("S0", S0, (n, n)), ("Pi0", Pi0, (n, 2))):
        if arr.shape != shape:
            raise ConfigError(f"{name} must be {shape[0]}x{shape[1]} for n={n}, got {arr.shape}")
    return validate_triple(A, S0, Pi0, tolerances)


def standard_basis(n: int) -> Sequence[np.ndarray]:
    return [np.eye(n, dtype=complex)[:, k] for k in range(n)]
