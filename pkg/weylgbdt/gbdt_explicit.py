"""
Closed-form dressing of the zero seed (V = 0).

With V = 0 the frame is explicit,

    Lambda_1(x) = e^{-ixA} Lambda_1(0),   Lambda_2(x) = e^{ixA} Lambda_2(0),

and S(x) = S(0) + int_0^x Pi(r) sigma_3 Pi(r)* dr. S(x) is computed one of three ways:

  SYLVESTER   solve A S - S A* = i Pi(x) Pi(x)* directly (no integration at all)
  VAN_LOAN    block-matrix exponential for each integral of exponentials
  QUADRATURE  adaptive Gauss-Kronrod on the integrand (the cross-check oracle)

AUTO tries SYLVESTER and falls back to VAN_LOAN when the spectra of A and A* are too
close for the Sylvester equation to be well posed.
"""
from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad_vec

from .config import DEFAULT_TOLERANCES, Grid, Tolerances
from .errors import (
    ConsistencyError,
    GBDTError,
    MatrixOverflow,
    NearSingular,
    ProfileEvaluationError,
    QuadratureNonConvergence,
    ShapeError,
    SpectraOverlap,
)
from .linalg_core import SIGMA3, hermitian_min_eig, inverse_with_condition, mat_exp, solve_sylvester, van_loan_integral
from .parameter_triples import ParameterTriple, operator_identity_residual, realness_conditions

logger = logging.getLogger(__name__)


class Method(str, enum.Enum):
    AUTO = "auto"
    SYLVESTER = "sylvester"
    VAN_LOAN = "vanloan"
    QUADRATURE = "quadrature"

    @classmethod
    def parse(cls, value: Union[str, "Method"]) -> "Method":
        if isinstance(value, Method):
            return value
        try:
            return cls(str(value).lower().replace("_", "").replace("-", ""))
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {value!r} (expected one of {choices})")


@dataclass(frozen=True)
class DressedState:
    x: float
    Pi: np.ndarray
    S: np.ndarray
    S_inv: Optional[np.ndarray]
    identity_residual: float
    method: Method
    condition: float
    min_eig: float


@dataclass(frozen=True)
class DressedPotential:
    x: float
    X: np.ndarray
    V_tilde: np.ndarray
    u_tilde: complex


@dataclass(frozen=True)
class ProfileSample:
    x: float
    state: DressedState
    potential: DressedPotential


def frame_matrices(t: ParameterTriple, x: float) -> Tuple[np.ndarray, np.ndarray]:
    """(e^{-ixA}, e^{ixA}), the propagators of Lambda_1 and Lambda_2."""
    return mat_exp(-1j * t.A, x), mat_exp(1j * t.A, x)


def _growth_guard(t: ParameterTriple, x: float, tolerances: Tolerances) -> None:
    rho = float(np.max(np.abs(np.linalg.eigvals(t.A)), initial=0.0))
    exponent = 2.0 * abs(x) * rho
    if exponent > tolerances.growth_exponent_limit:
        raise MatrixOverflow(
            f"S(x) grows like e^{exponent:.1f} at x={x:.6g} (spectral radius {rho:.3g}); "
            f"limit e^{tolerances.growth_exponent_limit:g}"
        )


def eval_Pi(t: ParameterTriple, x: float) -> np.ndarray:
    if x == 0:
        return np.array(t.Pi0)
    back, fwd = frame_matrices(t, x)
    return np.column_stack([back @ t.Lambda1, fwd @ t.Lambda2])


def _S_sylvester(t: ParameterTriple, Pi: np.ndarray, tolerances: Tolerances) -> np.ndarray:
    return solve_sylvester(t.A, t.A.conj().T, 1j * (Pi @ Pi.conj().T), tolerances)


def _S_van_loan(t: ParameterTriple, x: float) -> np.ndarray:
    A, Ah = t.A, t.A.conj().T
    L1 = np.outer(t.Lambda1, t.Lambda1.conj())
    L2 = np.outer(t.Lambda2, t.Lambda2.conj())
    first = van_loan_integral(-1j * A, L1, 1j * Ah, x)
    second = van_loan_integral(1j * A, L2, -1j * Ah, x)
    return t.S0 + first - second


def _S_quadrature(t: ParameterTriple, x: float, tolerances: Tolerances) -> np.ndarray:
    n = t.n

    def integrand(r: float) -> np.ndarray:
        P = eval_Pi(t, r)
        M = P @ SIGMA3 @ P.conj().T
        return np.concatenate([M.real.ravel(), M.imag.ravel()])

    lo, hi = min(0.0, x), max(0.0, x)
    res, err, info = quad_vec(
        integrand,
        lo,
        hi,
        epsabs=tolerances.quad_epsabs,
        epsrel=tolerances.quad_epsrel,
        quadrature="gk15",
        full_output=True,
    )
    if not info.success:
        raise QuadratureNonConvergence(
            f"quadrature over [{lo:.6g}, {hi:.6g}] did not converge: {info.message} (error estimate {err:.3e})"
        )
    integral = (res[: n * n] + 1j * res[n * n:]).reshape(n, n)
    return t.S0 + np.sign(x) * integral


def eval_S(
    t: ParameterTriple,
    x: float,
    method: Union[str, Method] = Method.AUTO,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DressedState:
    method = Method.parse(method)
    x = float(x)
    if not np.isfinite(x):
        raise ShapeError("x must be finite")
    _growth_guard(t, x, tolerances)
    Pi = eval_Pi(t, x)

    if x == 0:
        S = np.array(t.S0)
        used = Method.SYLVESTER if method is Method.AUTO else method
    elif method is Method.AUTO:
        try:
            S = _S_sylvester(t, Pi, tolerances)
            used = Method.SYLVESTER
        except SpectraOverlap as e:
            logger.debug("Sylvester path ill-posed at x=%.6g (%s); using Van Loan", x, e)
            S = _S_van_loan(t, x)
            used = Method.VAN_LOAN
    elif method is Method.SYLVESTER:
        S = _S_sylvester(t, Pi, tolerances)
        used = method
    elif method is Method.VAN_LOAN:
        S = _S_van_loan(t, x)
        used = method
    else:
        S = _S_quadrature(t, x, tolerances)
        used = method

    S = 0.5 * (S + S.conj().T)
    try:
        S_inv, cond = inverse_with_condition(S, tolerances.condition_limit)
    except NearSingular as e:
        S_inv, cond = None, e.condition
    return DressedState(
        x=x,
        Pi=Pi,
        S=S,
        S_inv=S_inv,
        identity_residual=operator_identity_residual(t.A, S, Pi),
        method=used,
        condition=cond,
        min_eig=hermitian_min_eig(S, tolerances.hermitian),
    )


def potential_from_state(
    Pi: np.ndarray,
    S_inv: np.ndarray,
    x: float,
    V_seed: Optional[np.ndarray] = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DressedPotential:
    """X = Pi* S^-1 Pi and V~ = V + i(sigma_3 X sigma_3 - X), with u~ checked two ways."""
    X = Pi.conj().T @ S_inv @ Pi
    X = 0.5 * (X + X.conj().T)
    V = 1j * (SIGMA3 @ X @ SIGMA3 - X)
    if V_seed is not None:
        V = V_seed + V
    # the dressing adds -2i Lambda_1* S^-1 Lambda_2 to the seed's upper corner
    shift = -2j * complex(Pi[:, 0].conj() @ S_inv @ Pi[:, 1])
    direct = shift + (complex(V_seed[0, 1]) if V_seed is not None else 0.0)
    u = complex(V[0, 1])
    if abs(u - direct) > tolerances.u_consistency * (1.0 + abs(u)):
        raise ConsistencyError(f"u~ at x={x:.6g}: V~[0,1]={u} but -2i Lambda_1* S^-1 Lambda_2 gives {direct}")
    return DressedPotential(x=x, X=X, V_tilde=V, u_tilde=u)


def _require_inverse(state: DressedState, tolerances: Tolerances) -> np.ndarray:
    if state.S_inv is None:
        raise NearSingular(state.condition, tolerances.condition_limit, state.x)
    return state.S_inv


def eval_potential(
    t: ParameterTriple,
    x: float,
    method: Union[str, Method] = Method.AUTO,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    state: Optional[DressedState] = None,
) -> DressedPotential:
    state = state if state is not None else eval_S(t, x, method, tolerances)
    pot = potential_from_state(state.Pi, _require_inverse(state, tolerances), state.x, tolerances=tolerances)
    if realness_conditions(t, tolerances).is_real_form:
        # rounding in S^-1 grows with cond(S)
        limit = max(tolerances.realness, 100.0 * np.finfo(float).eps * state.condition) * (1.0 + abs(pot.u_tilde))
        if abs(pot.u_tilde.imag) > limit:
            raise ConsistencyError(
                f"Im u~ = {pot.u_tilde.imag:.3e} at x={state.x:.6g} exceeds {limit:.3e} "
                "although the triple satisfies the realness conditions"
            )
    return pot


def _as_h(h, n: int) -> np.ndarray:
    vec = np.asarray(h, dtype=complex).ravel()
    if vec.size != n:
        raise ShapeError(f"h must have length {n}, got {vec.size}")
    return vec


def eval_psi(
    t: ParameterTriple,
    x: float,
    y: float,
    h,
    method: Union[str, Method] = Method.AUTO,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    state: Optional[DressedState] = None,
) -> np.ndarray:
    """psi~(x, y) = Pi(x)* S(x)^-1 e^{-yA} h."""
    h = _as_h(h, t.n)
    state = state if state is not None else eval_S(t, x, method, tolerances)
    S_inv = _require_inverse(state, tolerances)
    return state.Pi.conj().T @ (S_inv @ (mat_exp(t.A, -float(y)) @ h))


def default_workers() -> int:
    try:
        import psutil  # type: ignore
    except Exception:
        psutil = None  # type: ignore

    count = None
    if psutil is not None:
        try:
            count = psutil.cpu_count(logical=False)
        except Exception:
            count = None
    return max(1, count or os.cpu_count() or 1)


def _grid_points(grid: Union[Grid, Iterable[float]]) -> List[float]:
    xs = [float(v) for v in (grid.points() if isinstance(grid, Grid) else grid)]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ShapeError("grid must be strictly increasing")
    return xs


def sample_profile(
    t: ParameterTriple,
    grid: Union[Grid, Sequence[float]],
    method: Union[str, Method] = Method.AUTO,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    workers: Optional[int] = None,
) -> List[ProfileSample]:
    """Evaluate state and potential at every grid point, in grid order."""
    xs = _grid_points(grid)
    if not xs:
        return []
    method = Method.parse(method)

    def one(x: float) -> ProfileSample:
        try:
            state = eval_S(t, x, method, tolerances)
            return ProfileSample(x=x, state=state, potential=eval_potential(t, x, tolerances=tolerances, state=state))
        except GBDTError as e:
            raise ProfileEvaluationError(x, e) from e

    workers = workers or default_workers()
    if workers == 1 or len(xs) < 2 * workers:
        samples = [one(x) for x in xs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(one, xs))
        logger.debug("sampled %d points with %d workers", len(samples), workers)
    fallbacks = sum(1 for s in samples if method is Method.AUTO and s.state.method is Method.VAN_LOAN)
    if fallbacks:
        logger.warning("Sylvester path ill-posed (spectra of A and A* overlap); Van Loan used at %d of %d points",
                       fallbacks, len(samples))
    return samples
