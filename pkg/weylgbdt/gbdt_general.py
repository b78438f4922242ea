"""
Dressing of a nontrivial seed potential by integrating the frame equations

    Pi' = A Pi Q_1 + Pi Q_0,    S' = i Pi Q_1 Pi*,
    Q_1 = -i sigma_3,           Q_0(x) = -i sigma_3 V(x),

jointly from x = 0 outward in both directions. Pi and S share one state vector so
they share step-size control. The operator identity A S - S A* = i Pi Pi* is a
conserved quantity of these equations; its residual is recorded at every accepted
step and is never silently corrected unless projection mode is requested.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import RK45, OdeSolution

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    ConfigError,
    IdentityDriftExceeded,
    NearSingular,
    OutOfCoverage,
    ShapeError,
    SpectraOverlap,
    StepSizeUnderflow,
)
from .gbdt_explicit import DressedPotential, potential_from_state
from .linalg_core import SIGMA3, inverse_with_condition, mat_exp, norm2, solve_sylvester
from .parameter_triples import ParameterTriple, operator_identity_residual

logger = logging.getLogger(__name__)


class SeedKind(str, enum.Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    GAUSSIAN = "gaussian"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class SeedPotential:
    """Scalar seed u(x) of V(x) = [[0, u], [-conj(u), 0]]."""

    kind: SeedKind
    params: Tuple[complex, ...] = ()
    knots: Optional[np.ndarray] = field(default=None, compare=False)
    values: Optional[np.ndarray] = field(default=None, compare=False)

    @classmethod
    def zero(cls) -> "SeedPotential":
        return cls(SeedKind.ZERO)

    @classmethod
    def constant(cls, c: complex) -> "SeedPotential":
        c = complex(c)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ConfigError("constant seed must be finite")
        if c == 0:
            return cls.zero()
        return cls(SeedKind.CONSTANT, (c,))

    @classmethod
    def gaussian(cls, amp: float, center: float, width: float) -> "SeedPotential":
        if not width > 0:
            raise ConfigError(f"gaussian width must be positive, got {width}")
        if not all(math.isfinite(v) for v in (amp, center, width)):
            raise ConfigError("gaussian parameters must be finite")
        return cls(SeedKind.GAUSSIAN, (float(amp), float(center), float(width)))

    @classmethod
    def tabulated(cls, knots: Sequence[float], values: Sequence[complex]) -> "SeedPotential":
        k = np.asarray(knots, dtype=float).ravel()
        v = np.asarray(values, dtype=complex).ravel()
        if k.size < 2 or k.size != v.size:
            raise ConfigError("tabulated seed needs at least two knots and one value per knot")
        if np.any(np.diff(k) <= 0):
            raise ConfigError("tabulated seed knots must be strictly increasing")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(v))):
            raise ConfigError("tabulated seed has non-finite entries")
        k.setflags(write=False)
        v.setflags(write=False)
        return cls(SeedKind.TABULATED, (), k, v)

    @classmethod
    def from_csv(cls, path: Path) -> "SeedPotential":
        """Read `x,u_re[,u_im]` rows (header optional)."""
        xs: List[float] = []
        us: List[complex] = []
        try:
            with open(path, newline="", encoding="utf-8") as f:
                for row in csv.reader(f):
                    if not row or row[0].strip().startswith("#"):
                        continue
                    try:
                        x = float(row[0])
                    except ValueError:
                        if not xs:
                            continue  # header
                        raise
                    im = float(row[2]) if len(row) > 2 and row[2].strip() else 0.0
                    xs.append(x)
                    us.append(complex(float(row[1]), im))
        except (OSError, ValueError, IndexError) as e:
            raise ConfigError(f"cannot read tabulated seed {path}: {e}")
        return cls.tabulated(xs, us)

    @classmethod
    def parse(cls, text: str) -> "SeedPotential":
        """zero | constant:c | gaussian:amp,center,width | tabulated:FILE.csv"""
        kind, _, rest = str(text).strip().partition(":")
        kind = kind.lower()
        try:
            if kind == "zero" and not rest:
                return cls.zero()
            if kind == "constant":
                return cls.constant(complex(rest.replace(" ", "")))
            if kind == "gaussian":
                amp, center, width = (float(p) for p in rest.split(","))
                return cls.gaussian(amp, center, width)
            if kind == "tabulated" and rest:
                return cls.from_csv(Path(rest))
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"bad seed {text!r}: {e}")
        raise ConfigError(f"bad seed {text!r} (zero | constant:c | gaussian:amp,center,width | tabulated:FILE)")

    @property
    def is_zero(self) -> bool:
        return self.kind is SeedKind.ZERO

    @property
    def is_real(self) -> bool:
        if self.kind is SeedKind.CONSTANT:
            return self.params[0].imag == 0
        if self.kind is SeedKind.TABULATED:
            return bool(np.all(self.values.imag == 0))
        return True

    @property
    def breakpoints(self) -> np.ndarray:
        if self.kind is SeedKind.TABULATED:
            return self.knots
        return np.empty(0)

    def coverage(self) -> Tuple[float, float]:
        if self.kind is SeedKind.TABULATED:
            return float(self.knots[0]), float(self.knots[-1])
        return -math.inf, math.inf

    def u(self, x: float) -> complex:
        if self.kind is SeedKind.ZERO:
            return 0j
        if self.kind is SeedKind.CONSTANT:
            return self.params[0]
        if self.kind is SeedKind.GAUSSIAN:
            amp, center, width = self.params
            return complex(amp * math.exp(-((x - center) ** 2) / (2.0 * width * width)))
        lo, hi = self.coverage()
        if not lo <= x <= hi:
            raise OutOfCoverage(x, lo, hi)
        return complex(np.interp(x, self.knots, self.values.real), np.interp(x, self.knots, self.values.imag))

    def V(self, x: float) -> np.ndarray:
        u = self.u(x)
        return np.array([[0.0, u], [-u.conjugate(), 0.0]], dtype=complex)

    def __str__(self) -> str:
        if self.kind is SeedKind.TABULATED:
            return f"tabulated[{self.knots.size} knots]"
        if self.kind is SeedKind.CONSTANT:
            c = self.params[0]
            return f"constant:{c.real:g}" if c.imag == 0 else f"constant:{c}"
        if self.kind is SeedKind.GAUSSIAN:
            return "gaussian:" + ",".join(f"{p:g}" for p in self.params)
        return self.kind.value


@dataclass(frozen=True)
class IntegratorStats:
    steps: int
    rejected: int
    nfev: int
    projections: int


@dataclass(frozen=True)
class DressingTrajectory:
    triple: ParameterTriple
    seed: SeedPotential
    interval: Tuple[float, float]
    tolerance: float
    grid: np.ndarray
    Pi: np.ndarray
    S: np.ndarray
    identity_residual: np.ndarray
    hermitian_drift: np.ndarray
    condition: np.ndarray
    stats: IntegratorStats
    _forward: Optional[OdeSolution] = field(default=None, repr=False, compare=False)
    _backward: Optional[OdeSolution] = field(default=None, repr=False, compare=False)

    @property
    def max_identity_drift(self) -> float:
        return float(np.max(self.identity_residual))

    @property
    def max_hermitian_drift(self) -> float:
        return float(np.max(self.hermitian_drift))

    def covers(self, x: float) -> bool:
        return self.interval[0] <= x <= self.interval[1]

    def state_at(self, x: float) -> Tuple[np.ndarray, np.ndarray]:
        """(Pi(x), S(x)) from the integrator's dense output; exact at grid samples."""
        x = float(x)
        if not self.covers(x):
            raise OutOfCoverage(x, *self.interval)
        hit = np.flatnonzero(self.grid == x)
        if hit.size:
            k = int(hit[0])
            return self.Pi[k], self.S[k]
        sol = self._forward if x > 0 else self._backward
        return _unpack(sol(x), self.triple.n)


def _pack(Pi: np.ndarray, S: np.ndarray) -> np.ndarray:
    return np.concatenate([Pi.ravel(), S.ravel()]).astype(complex)


def _unpack(y: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    Pi = y[: 2 * n].reshape(n, 2)
    S = y[2 * n:].reshape(n, n)
    return Pi, S


def _rhs(t: ParameterTriple, seed: SeedPotential):
    A = t.A
    n = t.n
    Q1 = -1j * SIGMA3

    def fun(x: float, y: np.ndarray) -> np.ndarray:
        Pi, _ = _unpack(y, n)
        Q0 = -1j * SIGMA3 @ seed.V(x)
        dPi = A @ Pi @ Q1 + Pi @ Q0
        dS = 1j * Pi @ Q1 @ Pi.conj().T
        return _pack(dPi, dS)

    return fun


def _hermitian_drift(S: np.ndarray) -> float:
    return norm2(S - S.conj().T) / (1.0 + norm2(S))


def _condition(S: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.linalg.cond(0.5 * (S + S.conj().T)))


@dataclass
class _Leg:
    """Samples and dense-output pieces collected along one direction from x = 0."""

    xs: List[float] = field(default_factory=list)
    ys: List[np.ndarray] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    drifts: List[float] = field(default_factory=list)
    conds: List[float] = field(default_factory=list)
    ts: List[float] = field(default_factory=lambda: [0.0])
    interpolants: list = field(default_factory=list)
    steps: int = 0
    rejected: int = 0
    nfev: int = 0
    projections: int = 0


def _project(t: ParameterTriple, y: np.ndarray, tolerances: Tolerances) -> Tuple[np.ndarray, bool]:
    Pi, S = _unpack(y, t.n)
    try:
        S_new = solve_sylvester(t.A, t.A.conj().T, 1j * (Pi @ Pi.conj().T), tolerances)
    except SpectraOverlap:
        return y, False
    S_new = 0.5 * (S_new + S_new.conj().T)
    return _pack(Pi, S_new), True


def _integrate_leg(
    t: ParameterTriple,
    seed: SeedPotential,
    end: float,
    rtol: float,
    atol: float,
    tolerances: Tolerances,
    checkpoint: Optional[float],
) -> _Leg:
    leg = _Leg()
    if end == 0:
        return leg
    direction = 1.0 if end > 0 else -1.0
    stops = [float(k) for k in seed.breakpoints if 0 < direction * k < direction * end]
    if checkpoint:
        m = 1
        while m * checkpoint < abs(end):
            stops.append(direction * m * checkpoint)
            m += 1
    stops = sorted(set(stops), key=lambda s: direction * s) + [end]

    fun = _rhs(t, seed)
    y = _pack(np.array(t.Pi0), np.array(t.S0))
    x0 = 0.0
    for stop in stops:
        solver = RK45(fun, x0, y, stop, rtol=rtol, atol=atol)
        accepted = 0
        while solver.status == "running":
            message = solver.step()
            if solver.status == "failed":
                raise StepSizeUnderflow(solver.t, message or "")
            accepted += 1
            leg.interpolants.append(solver.dense_output())
            leg.ts.append(solver.t)
            Pi, S = _unpack(solver.y, t.n)
            residual = operator_identity_residual(t.A, S, Pi)
            if residual > tolerances.drift_limit:
                raise IdentityDriftExceeded(residual, tolerances.drift_limit, solver.t)
            leg.xs.append(solver.t)
            leg.ys.append(np.array(solver.y))
            leg.residuals.append(residual)
            leg.drifts.append(_hermitian_drift(S))
            leg.conds.append(_condition(S))
        leg.steps += accepted
        leg.nfev += solver.nfev
        # 2 evaluations to start, 6 per attempted step
        leg.rejected += max(0, (solver.nfev - 2) // 6 - accepted)
        x0, y = solver.t, solver.y
        if checkpoint and stop != end:
            y, done = _project(t, y, tolerances)
            if done:
                leg.projections += 1
                leg.ys[-1] = np.array(y)
                Pi, S = _unpack(y, t.n)
                leg.residuals[-1] = operator_identity_residual(t.A, S, Pi)
                leg.drifts[-1] = _hermitian_drift(S)
    return leg


def integrate_dressing(
    t: ParameterTriple,
    seed: SeedPotential,
    interval: Tuple[float, float],
    tolerance: Optional[float] = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    project: bool = False,
    checkpoint: Optional[float] = None,
) -> DressingTrajectory:
    a, b = float(interval[0]), float(interval[1])
    if not (math.isfinite(a) and math.isfinite(b)) or not a <= 0 <= b:
        raise ShapeError(f"interval [{a:g}, {b:g}] must be finite and contain 0")
    lo, hi = seed.coverage()
    if a < lo or b > hi:
        raise OutOfCoverage(a if a < lo else b, lo, hi)
    tol = tolerances.ode_tol if tolerance is None else float(tolerance)
    if not tol > 0:
        raise ShapeError("integrator tolerance must be positive")
    if project:
        checkpoint = checkpoint or max(abs(a), abs(b)) / 4.0 or None
    else:
        checkpoint = None
    if not seed.is_real:
        logger.info("seed %s is complex valued; the dressed system is of Dirac form only", seed)

    rtol, atol = tol, 1e-3 * tol
    fwd = _integrate_leg(t, seed, b, rtol, atol, tolerances, checkpoint)
    bwd = _integrate_leg(t, seed, a, rtol, atol, tolerances, checkpoint)

    y0 = _pack(np.array(t.Pi0), np.array(t.S0))
    xs = list(reversed(bwd.xs)) + [0.0] + fwd.xs
    ys = list(reversed(bwd.ys)) + [y0] + fwd.ys
    residual0 = operator_identity_residual(t.A, t.S0, t.Pi0)
    unpacked = [_unpack(y, t.n) for y in ys]

    traj = DressingTrajectory(
        triple=t,
        seed=seed,
        interval=(a, b),
        tolerance=tol,
        grid=np.array(xs),
        Pi=np.array([p for p, _ in unpacked]),
        S=np.array([s for _, s in unpacked]),
        identity_residual=np.array(list(reversed(bwd.residuals)) + [residual0] + fwd.residuals),
        hermitian_drift=np.array(list(reversed(bwd.drifts)) + [_hermitian_drift(t.S0)] + fwd.drifts),
        condition=np.array(list(reversed(bwd.conds)) + [_condition(t.S0)] + fwd.conds),
        stats=IntegratorStats(
            steps=fwd.steps + bwd.steps,
            rejected=fwd.rejected + bwd.rejected,
            nfev=fwd.nfev + bwd.nfev,
            projections=fwd.projections + bwd.projections,
        ),
        _forward=OdeSolution(fwd.ts, fwd.interpolants) if fwd.interpolants else None,
        _backward=OdeSolution(bwd.ts, bwd.interpolants) if bwd.interpolants else None,
    )
    if traj.max_identity_drift > tolerances.drift_report:
        logger.warning("identity drift %.3e above %.1e on [%g, %g]", traj.max_identity_drift,
                       tolerances.drift_report, a, b)
    logger.debug("integrated %s on [%g, %g]: %d steps, %d rejected, max drift %.3e",
                 seed, a, b, traj.stats.steps, traj.stats.rejected, traj.max_identity_drift)
    return traj


def _inverse_at(S: np.ndarray, x: float, tolerances: Tolerances) -> np.ndarray:
    S = 0.5 * (S + S.conj().T)
    try:
        S_inv, _ = inverse_with_condition(S, tolerances.condition_limit)
    except NearSingular as e:
        raise NearSingular(e.condition, e.limit, x)
    return S_inv


def transformed_potential(
    traj: DressingTrajectory,
    seed: Optional[SeedPotential],
    x: float,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DressedPotential:
    """V~(x) = V(x) + i(sigma_3 X sigma_3 - X) with X = Pi* S^-1 Pi."""
    seed = traj.seed if seed is None else seed
    Pi, S = traj.state_at(x)
    S_inv = _inverse_at(S, x, tolerances)
    return potential_from_state(Pi, S_inv, float(x), V_seed=seed.V(float(x)), tolerances=tolerances)


def eval_psi_general(
    traj: DressingTrajectory,
    x: float,
    y: float,
    h,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """psi~(x, y) = Pi(x)* S(x)^-1 e^{-yA} h."""
    t = traj.triple
    vec = np.asarray(h, dtype=complex).ravel()
    if vec.size != t.n:
        raise ShapeError(f"h must have length {t.n}, got {vec.size}")
    Pi, S = traj.state_at(x)
    S_inv = _inverse_at(S, x, tolerances)
    return Pi.conj().T @ (S_inv @ (mat_exp(t.A, -float(y)) @ vec))
