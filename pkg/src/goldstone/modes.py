"""Harmonic normal modes built from spectral data.

A mode is fixed by its frequency ``epsilon``, the quantisation parameter ``c``
(the total weight of the ``dc`` measure it sits on) and the inverse
temperature.  Families of modes are atom discretisations of a ``dc`` measure
with a spectral gap; the Goldstone limit sends the frequency to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Sequence

import numpy as np

from .core_ops import ContractError
from .fluctuations import SpectralMeasure

INFINITE = math.inf
LIMIT_TAUS = (0.0, math.pi / 4, math.pi / 2, math.pi)


def _coth(x: float) -> float:
    return 1.0 / math.tanh(x)


@dataclass(frozen=True)
class NormalMode:
    """Canonical pair ``(Q, P)`` with ``[Q, P] = ic`` oscillating at ``epsilon_mode``."""

    epsilon_mode: float
    c: float
    beta: float

    def __post_init__(self):
        if not self.epsilon_mode > 0:
            raise ContractError(f"mode frequency must be positive, got {self.epsilon_mode}")
        if not self.c > 0:
            raise ContractError(f"quantisation parameter must be positive, got {self.c}")
        if not self.beta > 0:
            raise ContractError(f"beta must be positive or inf, got {self.beta}")

    @property
    def ground(self) -> bool:
        return math.isinf(self.beta)

    @property
    def varQ(self) -> float:
        half = 0.5 * self.c * self.epsilon_mode
        if self.ground:
            return half
        return half * _coth(0.5 * self.beta * self.epsilon_mode)

    @property
    def varP(self) -> float:
        return self.varQ / self.epsilon_mode**2

    @property
    def commutator(self) -> complex:
        return 1j * self.c

    @property
    def occupancy(self) -> float:
        if self.ground:
            return 0.0
        return self.c / math.expm1(self.beta * self.epsilon_mode)

    def covariance(self) -> np.ndarray:
        """``[[w(QQ), w(QP)], [w(PQ), w(PP)]]`` of the gauge-invariant state."""
        half = 0.5j * self.c
        return np.array([[self.varQ, half], [-half, self.varP]], dtype=complex)


def mode_from_atom(epsilon_mode: float, c: float, beta: float) -> NormalMode:
    """The mode carried by a single atom ``c * delta(lambda - epsilon_mode)`` of ``dc``."""
    return NormalMode(float(epsilon_mode), float(c), float(beta))


@dataclass(frozen=True)
class ModeStatistics:
    varQ: float
    varP: float
    commutator: complex
    occupancy: float
    a_plus_a_plus: complex
    mean_a: complex
    epsilon_mode: float
    c: float

    @property
    def virial_residual(self) -> float:
        return self.varQ - self.epsilon_mode**2 * self.varP

    @property
    def occupancy_from_variances(self) -> float:
        eps = self.epsilon_mode
        return (self.varQ + eps**2 * self.varP) / (2 * eps) - 0.5 * self.c


def mode_statistics(mode: NormalMode) -> ModeStatistics:
    """Second-order statistics; the state is gauge invariant so ``w(a)`` and ``w(a a)`` vanish."""
    return ModeStatistics(
        varQ=mode.varQ,
        varP=mode.varP,
        commutator=mode.commutator,
        occupancy=mode.occupancy,
        a_plus_a_plus=0j,
        mean_a=0j,
        epsilon_mode=mode.epsilon_mode,
        c=mode.c,
    )


def evolve_mode(mode: NormalMode, t: float) -> np.ndarray:
    """Real symplectic matrix sending ``(Q, P)`` to ``(alpha_t Q, alpha_t P)``."""
    eps = mode.epsilon_mode
    ct, st = math.cos(eps * t), math.sin(eps * t)
    return np.array([[ct, eps * st], [-st / eps, ct]])


def mode_two_point(mode: NormalMode, t: float) -> complex:
    """``w(Q alpha_t Q)``."""
    row = evolve_mode(mode, t)[0]
    return complex(mode.covariance()[0] @ row)


# ----------------------------------------------------------- families


@dataclass(frozen=True)
class ModeFamily:
    """Modes on the atoms of a gapped ``dc`` measure."""

    dc: SpectralMeasure
    beta: float
    modes: tuple = field(init=False)

    def __post_init__(self):
        if len(self.dc) == 0:
            raise ContractError("mode family needs at least one atom")
        if np.any(self.dc.lambdas <= 0):
            raise ContractError("mode family atoms must sit at positive frequency")
        modes = tuple(
            mode_from_atom(lam, w, self.beta) for lam, w in self.dc.atoms() if w > 0
        )
        object.__setattr__(self, "modes", modes)

    @property
    def gap(self) -> float:
        return float(self.dc.lambdas.min())

    @property
    def varQ(self) -> float:
        return sum(m.varQ for m in self.modes)

    @property
    def varP(self) -> float:
        return sum(m.varP for m in self.modes)

    @property
    def commutator(self) -> complex:
        return 1j * sum(m.c for m in self.modes)

    @property
    def occupancy(self) -> float:
        return sum(m.occupancy for m in self.modes)

    def atom_table(self) -> list[dict]:
        return [
            {
                "lambda": m.epsilon_mode,
                "c": m.c,
                "varQ": m.varQ,
                "varP": m.varP,
                "virial_residual": m.varQ - m.epsilon_mode**2 * m.varP,
            }
            for m in self.modes
        ]


def mode_family_from_measure(dc: SpectralMeasure, beta: float) -> ModeFamily:
    """Aggregate family over ``dc``; the virial identity holds per atom only."""
    return ModeFamily(dc, float(beta))


# ---------------------------------------------------------- delta limit


def gaussian_bump(center: float = 0.0, width: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Test function ``exp(-((lambda - center)/width)^2)``."""
    if width <= 0:
        raise ContractError("bump width must be positive")

    def f(lam):
        return np.exp(-(((np.asarray(lam) - center) / width) ** 2))

    f.center, f.width = center, width
    return f


@dataclass(frozen=True)
class DeltaLimitReport:
    integrals: np.ndarray  # [measure, test function]
    targets: np.ndarray  # c0 * f(0) per test function
    locations: np.ndarray
    shrinking: bool

    @property
    def deviations(self) -> np.ndarray:
        return np.abs(self.integrals - self.targets[None, :])

    @property
    def monotone(self) -> np.ndarray:
        return np.all(np.diff(self.deviations, axis=0) <= 0, axis=0)

    @property
    def final_deviation(self) -> np.ndarray:
        return self.deviations[-1]

    @property
    def converging(self) -> bool:
        return self.shrinking and bool(np.all(self.monotone))


def delta_limit_check(
    measures: Sequence[SpectralMeasure],
    c0_target: float,
    test_functions: Sequence[Callable[[np.ndarray], np.ndarray]],
) -> DeltaLimitReport:
    """Compare ``int f dc_k`` with ``c0 f(0)`` along a sequence ``k -> 0``.

    The support location of each measure is its mass-weighted mean ``|lambda|``;
    a sequence whose locations do not strictly decrease is flagged.
    """
    if len(measures) < 3:
        raise ContractError("a delta-limit check needs at least three measures")
    if not test_functions:
        raise ContractError("no test functions supplied")
    integrals = np.array([[m.integrate(f) for f in test_functions] for m in measures])
    targets = np.array([c0_target * float(f(0.0)) for f in test_functions])
    locations = np.array(
        [m.integrate(np.abs) / m.total_mass if m.total_mass > 0 else 0.0 for m in measures]
    )
    shrinking = bool(np.all(np.diff(locations) < 0))
    return DeltaLimitReport(integrals, targets, locations, shrinking)


# ------------------------------------------------- zero-T renormalisation


@dataclass(frozen=True)
class RenormalizedPair:
    """Statistics of ``(eps^{-1/2} Q, eps^{1/2} P)`` for a ground-state mode."""

    varQ: float
    varP: float
    commutator: complex
    occupancy: float
    number_renormalized: float
    number_original: float

    @property
    def uncertainty_product(self) -> float:
        return self.varQ * self.varP


def renormalize_zero_T(mode: NormalMode) -> RenormalizedPair:
    """Squeeze a ground-state mode to a frequency-independent canonical pair.

    ``number_*`` are ``w(a^* a)`` for ``a = (Q_r + i P_r)/sqrt(2c)`` and for
    ``a = (Q + i eps P)/sqrt(2 eps c)``; they agree because the rescaling
    leaves the ladder operators unchanged.
    """
    if not mode.ground:
        raise ContractError("zero-temperature renormalisation needs beta = inf; use the thermal branch")
    eps, c = mode.epsilon_mode, mode.c
    # varQ = c eps/2 and varP = c/(2 eps) at zero temperature; the squeeze cancels eps exactly
    vq = vp = 0.5 * c
    comm = mode.commutator
    n_r = ((vq + vp) + (1j * comm).real) / (2 * c)
    n_o = ((mode.varQ + eps**2 * mode.varP) + eps * (1j * comm).real) / (2 * eps * c)
    return RenormalizedPair(vq, vp, comm, mode.occupancy, float(n_r), float(n_o))


# ---------------------------------------------------------- limit system


@dataclass(frozen=True)
class LimitPoint:
    epsilon_k: float
    c_k: float
    varQ: float
    varP: float
    commutator: complex


@dataclass(frozen=True)
class LimitSystem:
    """``k -> 0`` limit of a mode sequence.

    ``quantum_ground`` points carry the renormalised variances and the
    two-point function at rescaled times ``tau`` (``t = tau/eps_k``).
    ``classical_thermal`` points carry the raw ``varQ`` and the vanishing
    commutator products ``c_k eps_k``.
    """

    kind: str
    c0: float
    beta: float
    points: tuple
    taus: tuple = ()
    two_point: np.ndarray | None = None
    commutator_products: tuple = ()

    @property
    def varQ_limit(self) -> float:
        if self.kind == "quantum_ground":
            return 0.5 * self.c0
        return self.c0 / self.beta

    @property
    def varP_limit(self) -> float | None:
        return 0.5 * self.c0 if self.kind == "quantum_ground" else None

    @property
    def commutator_limit(self) -> complex:
        return 1j * self.c0 if self.kind == "quantum_ground" else 0j

    @property
    def occupancy_limit(self) -> float | None:
        return 0.0 if self.kind == "quantum_ground" else None

    def two_point_limit(self, tau: float) -> complex:
        """``(c0/2) e^{i tau}`` for the ground branch."""
        if self.kind != "quantum_ground":
            raise ContractError("the thermal limit carries no canonical two-point function")
        return 0.5 * self.c0 * complex(math.cos(tau), math.sin(tau))


def limit_system(
    sequence: Sequence[tuple[float, float]],
    beta: float,
    c0: float | None = None,
    taus: Sequence[float] = LIMIT_TAUS,
) -> LimitSystem:
    """Build the Goldstone limit from ``(eps_k, c_k)`` with ``eps_k`` strictly decreasing.

    ``c0`` defaults to the last ``c_k``.
    """
    seq = [(float(e), float(c)) for e, c in sequence]
    if len(seq) < 3:
        raise ContractError("limit_system needs at least three sequence points")
    eps = np.array([e for e, _ in seq])
    if np.any(np.diff(eps) >= 0):
        raise ContractError("epsilon_k must be strictly decreasing")
    if c0 is None:
        c0 = seq[-1][1]
    modes = [mode_from_atom(e, c, beta) for e, c in seq]
    if math.isinf(beta):
        points, table = [], []
        for m in modes:
            r = renormalize_zero_T(m)
            points.append(LimitPoint(m.epsilon_mode, m.c, r.varQ, r.varP, r.commutator))
            # renormalised Q is eps^{-1/2} Q, so the correlator picks up 1/eps
            table.append([mode_two_point(m, tau / m.epsilon_mode) / m.epsilon_mode for tau in taus])
        return LimitSystem(
            kind="quantum_ground",
            c0=float(c0),
            beta=beta,
            points=tuple(points),
            taus=tuple(taus),
            two_point=np.array(table),
        )
    points = tuple(LimitPoint(m.epsilon_mode, m.c, m.varQ, m.varP, m.commutator) for m in modes)
    return LimitSystem(
        kind="classical_thermal",
        c0=float(c0),
        beta=float(beta),
        points=points,
        commutator_products=tuple(m.c * m.epsilon_mode for m in modes),
    )


# ------------------------------------------------------------ scaling


def scaling_exponents(delta, nu):
    """Sub- and abnormal fluctuation exponents ``1/2 -+ delta/(2 nu)``.

    Rational inputs give :class:`fractions.Fraction` results.
    """
    if isinstance(nu, bool) or int(nu) != nu or nu < 1:
        raise ContractError(f"dimension nu must be a positive integer, got {nu}")
    if not delta > 0:
        raise ContractError(f"dispersion exponent must be positive, got {delta}")
    if delta > nu:
        raise ContractError(f"delta = {delta} > nu = {nu}: fluctuations outside the admissible regime")
    if isinstance(delta, Rational):
        shift = Fraction(delta) / (2 * int(nu))
        half = Fraction(1, 2)
    else:
        shift = float(delta) / (2 * int(nu))
        half = 0.5
    return half - shift, half + shift
