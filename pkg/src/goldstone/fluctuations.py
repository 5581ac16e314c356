"""Fluctuation operators, their statistics and their Liouvillian spectra.

A fluctuation ``F_{n,k}(A) = |L|^{-s} sum_x (tau_x A - omega(A)) cos(k x)`` is
kept symbolic (:class:`FluctuationObservable`) so that product-state moments
can be evaluated from one-site data at any window size.  Spectral quantities
(Bohr-frequency measures, Duhamel functions) need a state carrying an
eigendecomposed Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import comb

from .core_ops import (
    ContractError,
    HermitianOperator,
    MatrixLike,
    as_matrix,
    check_sites,
    commutator,
    embed,
    heisenberg_evolve,
)
from .models import GibbsState, ProductState, QuantumState, SpectralState

MERGE_TOL = 1e-9
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class FluctuationObservable:
    """Symbolic ``F_{n,k}(A)`` on the window ``offset .. offset + sites - 1``.

    Window coordinates are ``x = j - (sites - 1)//2`` so that an odd window
    ``2n+1`` runs over ``-n..n``.
    """

    base: np.ndarray
    sites: int
    momentum: float = 0.0
    centered_mean: complex = 0.0
    scaling_exponent: float = 0.5
    total_sites: int | None = None
    offset: int = 0

    def __post_init__(self):
        base = np.array(as_matrix(self.base), dtype=complex)
        if base.shape != (2, 2):
            raise ContractError("fluctuation base must be a one-site observable")
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        if self.sites < 1:
            raise ContractError("window must contain at least one site")
        if self.total_sites is None:
            object.__setattr__(self, "total_sites", self.offset + self.sites)
        if self.offset + self.sites > self.total_sites:
            raise ContractError("window does not fit on the chain")

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.sites) - (self.sites - 1) // 2

    @property
    def coefficients(self) -> np.ndarray:
        return np.cos(self.momentum * self.positions) / self.sites**self.scaling_exponent

    @property
    def centered_base(self) -> np.ndarray:
        return self.base - self.centered_mean * np.eye(2)

    def power_sum(self, order: int) -> float:
        return float(np.sum(self.coefficients**order))

    def matrix(self) -> np.ndarray:
        m = self.total_sites
        check_sites(m)
        dim = 2**m
        out = np.zeros((dim, dim), dtype=complex)
        b = self.centered_base
        for j, c in enumerate(self.coefficients):
            if c != 0:
                out += c * embed(b, self.offset + j, m)
        return out


def _window_mean(base: np.ndarray, state: QuantumState, sites: int, offset: int) -> complex:
    if isinstance(state, ProductState):
        return state.site_expectation(base)
    vals = [state.expectation(embed(base, offset + j, state.sites)) for j in range(sites)]
    return complex(np.mean(vals))


def make_fluctuation(
    base: MatrixLike,
    state: QuantumState,
    n: int | None = None,
    k: float = 0.0,
    scaling_exponent: float = 0.5,
) -> FluctuationObservable:
    """``F_{n,k}(base)`` centred with the state's one-site mean.

    ``n`` is the window half-width (``2n+1`` sites starting at chain site 0);
    ``None`` uses the whole chain.  For product states the window may be
    arbitrarily large because nothing is materialised.
    """
    if not 0 <= k <= math.pi:
        raise ContractError(f"momentum must lie in [0, pi], got {k}")
    a = as_matrix(base)
    sites = state.sites if n is None else 2 * n + 1
    total = max(state.sites, sites) if isinstance(state, ProductState) else state.sites
    if sites > total:
        raise ContractError(f"window of {sites} sites exceeds the {state.sites}-site chain")
    mean = _window_mean(a, state, sites, 0)
    if np.allclose(a, a.conj().T):
        mean = mean.real
    return FluctuationObservable(
        base=a,
        sites=sites,
        momentum=k,
        centered_mean=mean,
        scaling_exponent=scaling_exponent,
        total_sites=total,
    )


def fluctuation_matrix(
    base: MatrixLike,
    state: QuantumState,
    n: int | None = None,
    k: float = 0.0,
    scaling_exponent: float = 0.5,
):
    """Dense ``F_{n,k}(base)``; a :class:`HermitianOperator` for Hermitian ``base``."""
    f = make_fluctuation(base, state, n=n, k=k, scaling_exponent=scaling_exponent)
    mat = f.matrix()
    if np.allclose(f.base, f.base.conj().T):
        return HermitianOperator(mat, f"F(k={k})")
    return mat


# ----------------------------------------------------------- moments


def cumulants_from_moments(moments: Sequence[complex]) -> list:
    """Cumulants ``k_1..k_L`` from raw moments ``m_1..m_L``."""
    m = [1.0] + list(moments)
    kappa = [0.0]
    for order in range(1, len(m)):
        val = m[order]
        for j in range(1, order):
            val -= comb(order - 1, j - 1, exact=True) * kappa[j] * m[order - j]
        kappa.append(val)
    return kappa[1:]


def _site_distribution(rho: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(b)
    probs = np.einsum("ia,ij,ja->a", vecs.conj(), rho, vecs).real
    return vals, probs


def spectral_distribution(state: QuantumState, f: MatrixLike) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of a Hermitian ``f`` and their probabilities in ``state``."""
    mat = as_matrix(f)
    vals, vecs = np.linalg.eigh(mat)
    if isinstance(state, SpectralState):
        _, u = state.H.eig()
        overlap = u.conj().T @ vecs
        probs = state.weights @ np.abs(overlap) ** 2
    else:
        rho = state.density_matrix()
        probs = np.einsum("ia,ij,ja->a", vecs.conj(), rho, vecs).real
    return vals, probs


def cumulants(state: QuantumState, F: FluctuationObservable, max_order: int = 4) -> list[float]:
    """Cumulants ``k_1..k_max_order`` of a Hermitian fluctuation, up to order 4.

    In a product state the translates are independent, so
    ``k_l(F) = k_l(A - omega(A)) * sum_x c_x**l`` is evaluated from the one-site
    distribution; otherwise ``F`` is diagonalised densely.
    """
    if not 1 <= max_order <= 4:
        raise ContractError("cumulants are available for orders 1..4")
    if isinstance(state, ProductState):
        vals, probs = _site_distribution(state.rho_site, F.centered_base)
        one_site = cumulants_from_moments([probs @ vals**l for l in range(1, max_order + 1)])
        return [float(one_site[l - 1] * F.power_sum(l)) for l in range(1, max_order + 1)]
    vals, probs = spectral_distribution(state, F.matrix())
    moments = [probs @ vals**l for l in range(1, max_order + 1)]
    return [float(c) for c in cumulants_from_moments(moments)]


@dataclass(frozen=True)
class CharacteristicTable:
    theta: np.ndarray
    value: np.ndarray
    gaussian: np.ndarray
    variance: float

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.value)

    def sup_gap(self) -> float:
        return float(np.abs(self.value - self.gaussian).max())

    def rows(self):
        return list(zip(self.theta.tolist(), self.modulus.tolist(), self.gaussian.tolist()))


def characteristic_function(state: QuantumState, F: FluctuationObservable, theta_grid) -> CharacteristicTable:
    """``omega(exp(i theta F))`` against the Gaussian ``exp(-theta^2 s / 2)``."""
    theta = np.asarray(theta_grid, dtype=float)
    if isinstance(state, ProductState):
        vals, probs = _site_distribution(state.rho_site, F.centered_base)
        value = np.ones_like(theta, dtype=complex)
        for c in F.coefficients:
            value *= np.exp(1j * np.outer(theta, c * vals)) @ probs
    else:
        vals, probs = spectral_distribution(state, F.matrix())
        value = np.exp(1j * np.outer(theta, vals)) @ probs
    s = cumulants(state, F, 2)[1]
    return CharacteristicTable(theta=theta, value=value, gaussian=np.exp(-0.5 * theta**2 * s), variance=s)


# ------------------------------------------------- spectral measures


@dataclass(frozen=True)
class SpectralMeasure:
    """Finitely many atoms ``(lambda_i, w_i)`` with ``w_i >= 0``, sorted by ``lambda``."""

    lambdas: np.ndarray
    weights: np.ndarray
    merge_tolerance: float = MERGE_TOL

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if lam.shape != w.shape:
            raise ContractError("lambdas and weights must have equal length")
        if np.any(w < 0):
            raise ContractError("atom weights must be non-negative")
        order = np.argsort(lam, kind="stable")
        object.__setattr__(self, "lambdas", lam[order])
        object.__setattr__(self, "weights", w[order])

    @classmethod
    def from_atoms(cls, lambdas, weights, merge_tolerance: float = MERGE_TOL, prune: float = 0.0):
        """Build a measure, merging chains of atoms closer than ``merge_tolerance``.

        Merged atoms sit at the unweighted mean of their members so that
        a measure with symmetric support stays exactly symmetric.  Atoms lighter
        than ``prune * total_mass`` are dropped afterwards.
        """
        lam = np.asarray(lambdas, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        if lam.size == 0:
            return cls(lam, w, merge_tolerance)
        order = np.argsort(lam, kind="stable")
        lam, w = lam[order], w[order]
        breaks = np.flatnonzero(np.diff(lam) > merge_tolerance) + 1
        starts = np.concatenate([[0], breaks])
        counts = np.diff(np.concatenate([starts, [lam.size]]))
        pos = np.add.reduceat(lam, starts) / counts
        mass = np.add.reduceat(w, starts)
        # zero-frequency cluster is pinned exactly at 0
        pos[np.abs(pos) <= merge_tolerance] = 0.0
        keep = mass > prune * mass.sum()
        return cls(pos[keep], mass[keep], merge_tolerance)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self):
        return self.lambdas.size

    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.lambdas.tolist(), self.weights.tolist()))

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(f(self.lambdas) * self.weights))

    def weight_at(self, lam: float) -> float:
        hit = np.abs(self.lambdas - lam) <= self.merge_tolerance
        return float(self.weights[hit].sum())

    def positive_part(self) -> "SpectralMeasure":
        keep = self.lambdas > self.merge_tolerance
        return SpectralMeasure(self.lambdas[keep], self.weights[keep], self.merge_tolerance)


def liouvillian_spectral_measure(
    state: QuantumState, F: MatrixLike, merge_tolerance: float = MERGE_TOL, prune: float = 1e-15
) -> SpectralMeasure:
    """Bohr-frequency measure of ``<F, dE_lambda F>``.

    Atoms sit at ``E_b - E_a`` with weight ``p_a |<b|F|a>|^2``; the total mass
    is ``omega(F^* F)``.
    """
    if not isinstance(state, SpectralState):
        raise ContractError("spectral measures need a Gibbs or ground state with a Hamiltonian")
    e, _ = state.H.eig()
    ft = state.to_eigenbasis(F)
    w = state.weights[None, :] * np.abs(ft) ** 2  # w[b, a] = p_a |F_ba|^2
    lam = e[:, None] - e[None, :]
    return SpectralMeasure.from_atoms(lam, w, merge_tolerance, prune)


def _dc_factor(lam: np.ndarray, beta: float) -> np.ndarray:
    if math.isinf(beta):
        return 2.0 / lam
    return -2.0 * np.expm1(-beta * lam) / lam


def dc_measure(mu: SpectralMeasure, beta: float) -> SpectralMeasure:
    """``dc(lambda) = 2 (1 - exp(-beta lambda)) / lambda  dmu(lambda)`` on ``lambda > 0``.

    The zero-frequency atom is dropped, not given its ``beta -> 0`` limit.
    """
    pos = mu.positive_part()
    return SpectralMeasure(pos.lambdas, pos.weights * _dc_factor(pos.lambdas, beta), mu.merge_tolerance)


def kms_weight_error(mu: SpectralMeasure, beta: float, floor: float = 1e-12) -> float:
    """Max relative violation of ``w(-lambda) = exp(-beta lambda) w(lambda)``.

    Pairs whose weights both fall below ``floor * total_mass`` are skipped.
    """
    worst = 0.0
    cut = floor * mu.total_mass
    for lam, w in zip(mu.lambdas, mu.weights):
        if lam <= mu.merge_tolerance:
            continue
        w_neg = mu.weight_at(-lam)
        if max(w, w_neg) <= cut:
            continue
        expected = math.exp(-beta * lam) * w
        worst = max(worst, abs(w_neg - expected) / max(w_neg, expected))
    return worst


def mode_sum_rule(mu: SpectralMeasure, beta: float, f: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    """Both sides of ``int f dmu = int_0^inf (f(l) + f(-l) e^{-beta l}) l / (2(1 - e^{-beta l})) dc(l)``.

    The identity holds when ``mu`` carries no zero-frequency atom.
    """
    dc = dc_measure(mu, beta)
    lam = dc.lambdas
    back = lam / (-2.0 * np.expm1(-beta * lam))
    rhs = np.sum((f(lam) + f(-lam) * np.exp(-beta * lam)) * back * dc.weights)
    return mu.integrate(f), float(rhs)


def nonzero_frequency_part(state: SpectralState, F: MatrixLike, tol: float = MERGE_TOL) -> np.ndarray:
    """Drop the components of ``F`` between (near-)degenerate levels.

    This is the finite-volume projection onto the range of ``E_+ + E_-``.
    """
    e, u = state.H.eig()
    ft = state.to_eigenbasis(F)
    ft = np.where(np.abs(e[:, None] - e[None, :]) > tol, ft, 0.0)
    return u @ ft @ u.conj().T


# ------------------------------------------------------------ Duhamel


@dataclass(frozen=True)
class DuhamelValue:
    """Duhamel two-point value; complex in general, real for ``A = B``."""

    value: complex
    beta: float

    @property
    def real(self) -> float:
        return float(self.value.real)


def _duhamel_kernel(e: np.ndarray, p: np.ndarray, beta: float) -> np.ndarray:
    """``K[a, b] = (p_a - p_b) / (beta (E_b - E_a))`` with its diagonal limit ``p_a``."""
    de = e[None, :] - e[:, None]
    x = beta * de
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (p[:, None] - p[None, :]) / x
    small = np.abs(x) < 1e-3
    # p_a (1 - exp(-x))/x as a series where the difference form loses digits
    xs = x[small]
    series = 1 - xs / 2 + xs**2 / 6 - xs**3 / 24 + xs**4 / 120
    k[small] = (p[:, None] * np.ones_like(x))[small] * series
    k[np.abs(de) < DEGENERATE_GAP] = (p[:, None] * np.ones_like(x))[np.abs(de) < DEGENERATE_GAP]
    return k


def duhamel(state: GibbsState, A: MatrixLike, B: MatrixLike, t: float = 0.0) -> DuhamelValue:
    """``(A, alpha_t B)~ = beta^{-1} int_0^beta omega(A^* alpha_{iu + t} B) du``, spectrally."""
    if not isinstance(state, GibbsState):
        raise ContractError("the Duhamel function needs a finite-temperature Gibbs state")
    b = as_matrix(B)
    if t:
        b = heisenberg_evolve(state.H, b, t)
    at = state.to_eigenbasis(A)
    bt = state.to_eigenbasis(b)
    e, _ = state.H.eig()
    k = _duhamel_kernel(e, state.weights, state.beta)
    # sum_ab K_ab conj(A_ba) B_ba
    value = np.sum(k * (at.conj() * bt).T)
    return DuhamelValue(complex(value), state.beta)


def susceptibility(
    state: GibbsState,
    q: MatrixLike,
    k: float = 0.0,
    n: int | None = None,
    convention: str = "auto",
    t: float = 0.0,
) -> float:
    """``c_k = factor * beta * (F_{n,k}(q), alpha_t F_{n,k}(q))~``.

    ``convention="auto"`` uses ``factor = 1/2`` at ``k = 0`` (uniform
    susceptibility) and ``1`` at ``k != 0`` (mode quantisation parameter);
    ``"half"`` and ``"full"`` force either factor.
    """
    factors = {"half": 0.5, "full": 1.0}
    if convention == "auto":
        factor = 0.5 if k == 0 else 1.0
    elif convention in factors:
        factor = factors[convention]
    else:
        raise ContractError(f"unknown convention {convention!r}")
    f = fluctuation_matrix(q, state, n=n, k=k)
    return factor * state.beta * duhamel(state, f, f, t=t).real


@dataclass(frozen=True)
class BogoliubovResult:
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def bogoliubov_check(state: GibbsState, A: MatrixLike, B: MatrixLike) -> BogoliubovResult:
    """``|omega([A^*, B])|^2 <= beta omega([A^*, [H, A]]) (B, B)~``."""
    if not isinstance(state, GibbsState):
        raise ContractError("the Bogoliubov inequality is checked in Gibbs states")
    a, b = as_matrix(A), as_matrix(B)
    a_star = a.conj().T
    lhs = abs(state.expectation(commutator(a_star, b))) ** 2
    double = state.expectation(commutator(a_star, commutator(state.H.matrix, a))).real
    rhs = state.beta * double * duhamel(state, b, b).real
    return BogoliubovResult(float(lhs), float(rhs))


# ----------------------------------------------------- static structure


def static_structure(state: QuantumState, A: MatrixLike, k: float, periodic: bool = True) -> float:
    """Large-window limit of ``omega(F_{n,k}(A)^2)`` from two-point correlations.

    For generic ``k`` this is ``(1/4)[mu(k) + mu(-k)] = (1/2) sum_z C(z) cos(kz)``
    with ``C`` the connected correlation; when ``2k`` is a multiple of ``2 pi``
    (``k = 0`` or ``pi``) the oscillating terms do not average out and the
    limit is ``mu(k)`` itself.
    """
    a = as_matrix(A)
    if isinstance(state, ProductState):
        m1 = state.site_expectation(a)
        corr = {0: (state.site_expectation(a @ a) - m1 * m1).real}
    else:
        m = state.sites
        ref = (m - 1) // 2
        # one representative per displacement class; open chains never wrap
        disp = range(-ref, m - ref)
        a_ref = embed(a, ref, m)
        mean_ref = state.expectation(a_ref)
        corr = {}
        for z in disp:
            site = (ref + z) % m
            a_z = embed(a, site, m)
            corr[z] = (state.expectation(a_ref @ a_z) - mean_ref * state.expectation(a_z)).real
    half = 0.5 * sum(c * math.cos(k * z) for z, c in corr.items())
    if math.isclose(math.remainder(k, math.pi), 0.0, abs_tol=1e-12):
        return 2.0 * half
    return half


def momentum_grid(sites: int, periodic: bool = True) -> np.ndarray:
    """Allowed non-zero momenta in ``(0, pi]``: ``2 pi m / M`` or ``pi m / (M + 1)``."""
    if periodic:
        return 2 * np.pi * np.arange(1, sites // 2 + 1) / sites
    return np.pi * np.arange(1, sites + 1) / (sites + 1)
