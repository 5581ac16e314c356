"""Strong-coupling BCS model in closed form.

The mean-field solution lives on a single site: a gap parameter ``lam``, the
effective one-site Hamiltonian ``h = eps sz - lam s+ - conj(lam) s-`` and its
Gibbs (or ground) density matrix.  Linear maps on 2x2 matrices are stored as
4x4 matrices acting on the row-major vectorisation ``A.reshape(4)``, so that
``vec(P A Q) = kron(P, Q.T) @ vec(A)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .core_ops import ContractError, ResourceError, embed, pauli_matrices, product_operator
from .models import build_bcs_hamiltonian

INFINITE = math.inf

GAP_TOL = 1e-12
MAX_BISECT = 200
DYNAMICS_MAX_SITES = 11

_P = {k: v.op for k, v in pauli_matrices().items()}
SZ, SPLUS, SMINUS, ID2 = _P["z"], _P["plus"], _P["minus"], _P["id"]


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon < 0.5:
        raise ContractError(f"epsilon must lie in (0, 1/2), got {epsilon}")


def critical_beta(epsilon: float) -> float:
    """Inverse critical temperature, the root of ``tanh(beta eps) = 2 eps``."""
    _check_epsilon(epsilon)
    return float(np.arctanh(2 * epsilon) / epsilon)


def effective_hamiltonian(epsilon: float, lam: complex) -> np.ndarray:
    return epsilon * SZ - lam * SPLUS - np.conj(lam) * SMINUS


@dataclass(frozen=True)
class GapSolution:
    epsilon: float
    beta: float
    lam: complex
    mu: float
    rho: np.ndarray
    h: np.ndarray

    @property
    def broken(self) -> bool:
        return self.lam != 0

    @property
    def gap(self) -> float:
        return abs(self.lam)

    def residual(self) -> float:
        """``tanh(beta mu) - 2 mu`` (``1 - 2 mu`` at zero temperature).

        Only meaningful on the broken branch; the normal phase solves the
        unreduced equation with ``lam = 0``.
        """
        if math.isinf(self.beta):
            return 1.0 - 2.0 * self.mu
        return math.tanh(self.beta * self.mu) - 2.0 * self.mu

    def self_consistency_residual(self) -> float:
        """``|lam| |1 - tanh(beta mu)/(2 mu)|``; vanishes on both branches."""
        polar = 1.0 if math.isinf(self.beta) else math.tanh(self.beta * self.mu)
        return abs(self.lam) * abs(1.0 - polar / (2.0 * self.mu))

    def expect(self, a: np.ndarray) -> complex:
        return complex(np.trace(self.rho @ a))


def _one_site_state(epsilon: float, beta: float, lam: complex) -> tuple[float, np.ndarray, np.ndarray]:
    mu = math.sqrt(epsilon**2 + abs(lam) ** 2)
    h = effective_hamiltonian(epsilon, lam)
    # h^2 = mu^2, so exp(-beta h)/Z = (1 - tanh(beta mu) h/mu)/2
    polar = 1.0 if math.isinf(beta) else math.tanh(beta * mu)
    rho = 0.5 * (ID2 - polar * h / mu)
    return mu, h, rho


def solve_gap(epsilon: float, beta: float, phase: float = 0.0) -> GapSolution:
    """Solve ``lam (1 - tanh(beta mu)/(2 mu)) = 0`` with ``mu = sqrt(eps^2 + |lam|^2)``.

    Above ``critical_beta(epsilon)`` the non-trivial branch is returned with
    ``lam = |lam| exp(i phase)``; otherwise the normal phase ``lam = 0``.
    ``beta = INFINITE`` selects the ground state, where ``mu = 1/2`` exactly.
    """
    _check_epsilon(epsilon)
    if not beta > 0:
        raise ContractError(f"beta must be positive, got {beta}")

    if math.isinf(beta):
        mu = 0.5
    else:
        def f(m):
            return math.tanh(beta * m) - 2.0 * m

        lo = epsilon + 1e-15
        if beta <= critical_beta(epsilon) or f(lo) <= 0:
            mu = None
        else:
            mu = optimize.bisect(f, lo, 0.5, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=MAX_BISECT)

    if mu is None:
        lam = 0j
    else:
        lam = math.sqrt(max(mu * mu - epsilon * epsilon, 0.0)) * np.exp(1j * phase)
        lam = complex(lam)
    mu, h, rho = _one_site_state(epsilon, beta, lam)
    return GapSolution(epsilon=epsilon, beta=beta, lam=lam, mu=mu, rho=rho, h=h)


# ------------------------------------------------------- superoperators


def left_right(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """4x4 matrix of the map ``A -> p A q``."""
    return np.kron(p, q.T)


def apply_map(e: np.ndarray, a: np.ndarray) -> np.ndarray:
    return (e @ np.asarray(a, dtype=complex).reshape(4)).reshape(2, 2)


def adjoint_map(h: np.ndarray) -> np.ndarray:
    """4x4 matrix of ``A -> [h, A]``."""
    return np.kron(h, ID2) - np.kron(ID2, h.T)


@dataclass(frozen=True)
class SuperoperatorSpectrum:
    P_minus: np.ndarray
    P_plus: np.ndarray
    E_minus: np.ndarray
    E_zero: np.ndarray
    E_plus: np.ndarray
    J: np.ndarray
    frequency: float
    degenerate: bool

    def apply(self, which: str, a: np.ndarray) -> np.ndarray:
        return apply_map(getattr(self, which), a)


def superoperator_spectrum(sol: GapSolution) -> SuperoperatorSpectrum:
    """Spectral projections of ``[h, .]`` (eigenvalues ``-2mu, 0, 2mu``) and ``J``.

    For ``lam = 0`` the projections are still well defined but ``sz`` lies in
    the zero-frequency range; the result is flagged ``degenerate``.
    """
    p_minus = 0.5 * (ID2 - sol.h / sol.mu)
    p_plus = 0.5 * (ID2 + sol.h / sol.mu)
    e_minus = left_right(p_minus, p_plus)
    e_plus = left_right(p_plus, p_minus)
    e_zero = left_right(p_minus, p_minus) + left_right(p_plus, p_plus)
    j = 1j * (e_plus - e_minus)
    return SuperoperatorSpectrum(
        P_minus=p_minus,
        P_plus=p_plus,
        E_minus=e_minus,
        E_zero=e_zero,
        E_plus=e_plus,
        J=j,
        frequency=2.0 * sol.mu,
        degenerate=not sol.broken,
    )


def symmetry_decompose(sol: GapSolution) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``sz`` into its broken part ``hat``, invariant part ``E0 sz`` and ``J hat``.

    Returns ``(hat_sigma_z, E0_sigma_z, J_hat_sigma_z)``, all built from the
    projections of :func:`superoperator_spectrum`.
    """
    spec = superoperator_spectrum(sol)
    hat = apply_map(spec.E_plus + spec.E_minus, SZ)
    e0 = apply_map(spec.E_zero, SZ)
    j_hat = apply_map(spec.J, hat)
    return hat, e0, j_hat


def hat_sigma_z_closed_form(sol: GapSolution) -> np.ndarray:
    lam, mu = sol.lam, sol.mu
    return (abs(lam) ** 2 / mu**2) * SZ + (sol.epsilon / mu**2) * (lam * SPLUS + np.conj(lam) * SMINUS)


def j_hat_sigma_z_closed_form(sol: GapSolution) -> np.ndarray:
    lam = sol.lam
    return (1j / sol.mu) * (lam * SPLUS - np.conj(lam) * SMINUS)


def two_point(sol: GapSolution, a: np.ndarray, b: np.ndarray) -> complex:
    """Limit two-point function ``rho((A - rho(A)) (B - rho(B)))``."""
    a0 = a - sol.expect(a) * ID2
    b0 = b - sol.expect(b) * ID2
    return sol.expect(a0 @ b0)


def symplectic_form(sol: GapSolution, a: np.ndarray, b: np.ndarray) -> float:
    """``sigma(A, B) = -i rho([A, B])``."""
    return float((-1j * sol.expect(a @ b - b @ a)).real)


@dataclass(frozen=True)
class GoldstoneStatistics:
    c_lambda: float
    frequency: float
    varQ: float
    varP: float
    var_E0: float
    commutator_fluct: float
    commutatorQP: float
    occupancy: float

    @property
    def virial_residual(self) -> float:
        return self.varQ - self.frequency**2 * self.varP


def goldstone_statistics(sol: GapSolution) -> GoldstoneStatistics:
    """Statistics of the Goldstone pair ``Q = F(hat)``, ``P = F(J hat)/(2 mu)``.

    Variances and commutators are evaluated as 2x2 traces against ``rho``;
    ``c_lambda = 2|lam|^2/mu^2`` and the Bose occupancy use the closed forms.
    """
    hat, e0, j_hat = symmetry_decompose(sol)
    freq = 2.0 * sol.mu
    var_q = two_point(sol, hat, hat).real
    var_p = two_point(sol, j_hat, j_hat).real / freq**2
    comm = sol.expect(hat @ j_hat - j_hat @ hat).imag
    c_lam = 2.0 * abs(sol.lam) ** 2 / sol.mu**2
    if math.isinf(sol.beta) or c_lam == 0:
        occ = 0.0
    else:
        occ = c_lam / math.expm1(sol.beta * freq)
    return GoldstoneStatistics(
        c_lambda=c_lam,
        frequency=freq,
        varQ=var_q,
        varP=var_p,
        var_E0=two_point(sol, e0, e0).real,
        commutator_fluct=comm,
        commutatorQP=comm / freq,
        occupancy=occ,
    )


def occupancy_from_variances(stats: GoldstoneStatistics) -> float:
    """``<a+ a->`` with ``a+- = (Q -+ i 2mu P)/sqrt(4 mu)`` from second moments."""
    w = stats.frequency
    return (stats.varQ + w**2 * stats.varP - w * stats.commutatorQP) / (2 * w)


# ------------------------------------------------------ finite-N dynamics


def collective_generator(sol: GapSolution) -> np.ndarray:
    """Generator of the ``N -> infinity`` fluctuation dynamics under ``H_N``.

    The mean-field coupling contributes, besides ``[h, A]``, the O(1) terms
    ``-rho([s-, A]) s+ - rho([s+, A]) s-`` to ``[H_N, F_N(A)]``.  The
    resulting map is nilpotent on the broken pair (a zero-frequency mode).
    """
    def functional(x):
        # A -> rho([x, A]) as a row vector on vec(A)
        return (sol.rho @ x - x @ sol.rho).T.reshape(4)

    gen = adjoint_map(sol.h)
    gen = gen - np.outer(SPLUS.reshape(4), functional(SMINUS))
    gen = gen - np.outer(SMINUS.reshape(4), functional(SPLUS))
    return gen


@dataclass(frozen=True)
class TwoPointTable:
    N: int
    t: np.ndarray
    g_N: np.ndarray
    g_limit: np.ndarray
    g_collective: np.ndarray

    def max_deviation(self) -> float:
        return float(np.abs(self.g_N - self.g_limit).max())

    def max_deviation_collective(self) -> float:
        return float(np.abs(self.g_N - self.g_collective).max())


def limit_two_point(sol: GapSolution, t_grid) -> np.ndarray:
    """``rho(hat . exp(ith) hat exp(-ith))`` on a time grid."""
    hat, _, _ = symmetry_decompose(sol)
    e, v = np.linalg.eigh(sol.h)
    out = []
    for t in np.asarray(t_grid, dtype=float):
        u = (v * np.exp(1j * t * e)) @ v.conj().T
        out.append(sol.expect(hat @ u @ hat @ u.conj().T))
    return np.array(out)


def collective_two_point(sol: GapSolution, t_grid) -> np.ndarray:
    hat, _, _ = symmetry_decompose(sol)
    gen = collective_generator(sol)
    out = []
    for t in np.asarray(t_grid, dtype=float):
        evolved = apply_map(linalg.expm(1j * t * gen), hat)
        out.append(two_point(sol, hat, evolved))
    return np.array(out)


def finite_size_two_point(sol: GapSolution, N: int, t_grid) -> TwoPointTable:
    """Dense ``omega_lam^{x(2N+1)}(F_N(hat) alpha_t^{H_N}(F_N(hat)))`` on a time grid.

    ``g_limit`` is the one-site ``h``-dynamics closed form; ``g_collective``
    is the infinite-N limit of the ``H_N`` dynamics (see
    :func:`collective_generator`).
    """
    m = 2 * N + 1
    if m > DYNAMICS_MAX_SITES:
        raise ResourceError(f"2N+1 = {m} exceeds the dynamics cap of {DYNAMICS_MAX_SITES} sites")
    t_grid = np.asarray(t_grid, dtype=float)
    hat, _, _ = symmetry_decompose(sol)
    H = build_bcs_hamiltonian(sol.epsilon, N)
    e, u = H.eig()

    norm = 1.0 / math.sqrt(m)
    f = norm * sum(embed(hat, i, m) for i in range(m))
    # rho^{xm} F assembled as a sum of Kronecker products
    rho_f = norm * sum(
        product_operator({j: (sol.rho @ hat if j == i else sol.rho) for j in range(m)}, m)
        for i in range(m)
    )
    x = u.conj().T @ rho_f @ u
    y = u.conj().T @ f @ u
    w = x * y.T  # w[a, b] = x_ab y_ba, carries phase exp(it(E_b - E_a))
    left = np.exp(-1j * np.outer(t_grid, e))
    g_n = np.sum((left @ w) * left.conj(), axis=1)
    return TwoPointTable(
        N=N,
        t=t_grid,
        g_N=g_n,
        g_limit=limit_two_point(sol, t_grid),
        g_collective=collective_two_point(sol, t_grid),
    )
