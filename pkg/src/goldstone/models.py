"""Hamiltonians and states on finite spin chains.

Three state kinds are supported: translation-invariant product states, finite
volume Gibbs states and (possibly degenerate) ground states.  Product states
never build a ``2**M`` density matrix; dense observables are contracted one
tensor factor at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .core_ops import (
    ContractError,
    HermitianOperator,
    MatrixLike,
    SiteObservable,
    as_matrix,
    check_sites,
    embed,
    pauli_matrices,
    product_operator,
)

DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class PairTerm:
    displacement: int
    left: SiteObservable
    right: SiteObservable
    coupling: float = 1.0


@dataclass(frozen=True)
class InteractionSpec:
    """Translation-invariant one- and two-body interaction.

    Each pair term contributes ``coupling * left_x right_{x+d}`` for every
    bond, symmetrised as ``(T + T^*)/2`` so the assembled Hamiltonian is
    Hermitian whatever ``left`` and ``right`` are.
    """

    on_site: SiteObservable | None = None
    pair_terms: tuple[PairTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "pair_terms", tuple(self.pair_terms))
        if self.on_site is not None:
            a = self.on_site.op
            if not np.allclose(a, a.conj().T, atol=1e-12):
                raise ContractError("on-site term must be Hermitian")
        for term in self.pair_terms:
            if term.displacement < 1:
                raise ContractError("pair displacement must be >= 1")

    @property
    def range(self) -> int:
        return max((t.displacement for t in self.pair_terms), default=0)


def heisenberg_spec(jx: float = 1.0, jy: float = 1.0, jz: float = 1.0, field_z: float = 0.0) -> InteractionSpec:
    """Nearest-neighbour XYZ exchange with an optional longitudinal field."""
    p = pauli_matrices()
    terms = [PairTerm(1, p[a], p[a], j) for a, j in (("x", jx), ("y", jy), ("z", jz)) if j != 0]
    on_site = SiteObservable(field_z * p["z"].op, "hz") if field_z else None
    return InteractionSpec(on_site=on_site, pair_terms=tuple(terms))


def xx_spec(j: float = 1.0, field_z: float = 0.0) -> InteractionSpec:
    return heisenberg_spec(jx=j, jy=j, jz=0.0, field_z=field_z)


def build_bcs_hamiltonian(epsilon: float, N: int) -> HermitianOperator:
    """Strong-coupling BCS Hamiltonian on the window ``-N..N``.

    ``H_N = eps * sum_i sz_i - (2N+1)^{-1} sum_{i,j} s+_i s-_j``.
    """
    if not 0 < epsilon < 0.5:
        raise ContractError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if N < 0:
        raise ContractError("window half-width must be non-negative")
    m = 2 * N + 1
    check_sites(m)
    p = pauli_matrices()
    s_minus = sum(embed(p["minus"], i, m) for i in range(m))
    # total sz is diagonal: eigenvalue m - 2 * popcount(basis index)
    idx = np.arange(2**m)
    ones = np.array([bin(i).count("1") for i in idx])
    h = -(s_minus.conj().T @ s_minus) / m
    h[idx, idx] += epsilon * (m - 2 * ones)
    return HermitianOperator(h, f"BCS(eps={epsilon}, N={N})")


def chain_bonds(n: int, d: int, periodic: bool) -> list[tuple[int, int]]:
    if periodic:
        return [(i, (i + d) % n) for i in range(n)]
    return [(i, i + d) for i in range(n - d)]


def build_chain_hamiltonian(spec: InteractionSpec, n: int, periodic: bool = True) -> HermitianOperator:
    check_sites(n)
    if spec.range >= n:
        raise ContractError(f"interaction range {spec.range} does not fit on {n} sites")
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    if spec.on_site is not None:
        for i in range(n):
            h += embed(spec.on_site, i, n)
    for term in spec.pair_terms:
        for i, j in chain_bonds(n, term.displacement, periodic):
            bond = term.coupling * (embed(term.left, i, n) @ embed(term.right, j, n))
            h += 0.5 * (bond + bond.conj().T)
    return HermitianOperator(h, f"chain(n={n}, periodic={periodic})")


def shift_operator(n: int) -> np.ndarray:
    """Permutation matrix of the cyclic translation ``site i -> site i+1``."""
    check_sites(n)
    dim = 2**n
    idx = np.arange(dim)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    shifted = np.roll(bits, 1, axis=1)
    new = shifted @ (1 << np.arange(n - 1, -1, -1))
    t = np.zeros((dim, dim))
    t[new, idx] = 1.0
    return t


# ---------------------------------------------------------------- states


class QuantumState:
    """Base class: a normalised positive linear functional on ``M`` sites."""

    kind: str = ""
    sites: int

    def expectation(self, op: MatrixLike) -> complex:
        raise NotImplementedError

    def _check_dim(self, a: np.ndarray) -> None:
        if a.shape != (2**self.sites, 2**self.sites):
            raise ContractError(
                f"operator of shape {a.shape} does not act on {self.sites} sites"
            )


def _check_density(rho: np.ndarray, tol: float = 1e-12) -> None:
    if rho.shape != (2, 2):
        raise ContractError("site density matrix must be 2x2")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ContractError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ContractError("density matrix must have unit trace")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ContractError("density matrix is not positive")


class ProductState(QuantumState):
    """``rho_site`` replicated on every site of an ``M``-site chain."""

    kind = "product"

    def __init__(self, rho_site, sites: int):
        rho = np.array(as_matrix(rho_site), dtype=complex)
        _check_density(rho)
        if sites < 1:
            raise ContractError("need at least one site")
        rho.setflags(write=False)
        self.rho_site = rho
        self.sites = sites

    def site_expectation(self, a: MatrixLike) -> complex:
        return complex(np.trace(self.rho_site @ as_matrix(a)))

    def expectation_product(self, factors: Sequence[MatrixLike]) -> complex:
        """``prod_i tr(rho A_i)`` for a product observable ``A_1 x ... x A_M``."""
        if len(factors) != self.sites:
            raise ContractError("need one factor per site")
        out = 1.0 + 0j
        for f in factors:
            out *= self.site_expectation(f)
        return out

    def expectation(self, op: MatrixLike) -> complex:
        """Contract a dense ``2**M`` observable against ``rho^{x M}`` factor-wise."""
        a = as_matrix(op)
        self._check_dim(a)
        m = self.sites
        t = a.reshape((2,) * (2 * m))
        # t[i_0..i_{m-1}, j_0..j_{m-1}]: contract (i_s, j_s) of each site with rho[j_s, i_s]
        for _ in range(m):
            t = _contract_first(t, self.rho_site)
        return complex(t)

    def density_matrix(self) -> np.ndarray:
        check_sites(self.sites)
        return product_operator({i: self.rho_site for i in range(self.sites)}, self.sites)


def _contract_first(t: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Trace the first site of a (bra..., ket...) tensor against ``rho``."""
    k = t.ndim // 2
    # move ket index of the first site next to its bra index
    t = np.moveaxis(t, k, 1)
    return np.tensordot(rho.T, t, axes=([0, 1], [0, 1]))


class SpectralState(QuantumState):
    """State diagonal in the eigenbasis of a Hamiltonian with weights ``p``."""

    H: HermitianOperator
    weights: np.ndarray

    def __init__(self, H: HermitianOperator, weights: np.ndarray):
        self.H = H
        self.sites = int(round(np.log2(H.dim)))
        if 2**self.sites != H.dim:
            raise ContractError("Hamiltonian dimension is not a power of two")
        weights = np.asarray(weights, dtype=float)
        weights.setflags(write=False)
        self.weights = weights

    def to_eigenbasis(self, op: MatrixLike) -> np.ndarray:
        a = as_matrix(op)
        self._check_dim(a)
        _, u = self.H.eig()
        return u.conj().T @ a @ u

    def expectation(self, op: MatrixLike) -> complex:
        a = as_matrix(op)
        self._check_dim(a)
        # tr(rho A) as an elementwise contraction: O(d^2) per call
        return complex(np.sum(self._rho * a.T))

    @cached_property
    def _rho(self) -> np.ndarray:
        _, u = self.H.eig()
        rho = (u * self.weights) @ u.conj().T
        rho.setflags(write=False)
        return rho

    def density_matrix(self) -> np.ndarray:
        return self._rho.copy()


class GibbsState(SpectralState):
    kind = "gibbs"

    def __init__(self, H: HermitianOperator, beta: float):
        if not (beta > 0 and np.isfinite(beta)):
            raise ContractError(f"beta must be positive and finite, got {beta}; use ground_state for T=0")
        e, _ = H.eig()
        boltz = np.exp(-beta * (e - e[0]))
        super().__init__(H, boltz / boltz.sum())
        self.beta = float(beta)

    def log_partition(self) -> float:
        e, _ = self.H.eig()
        return float(-self.beta * e[0] + np.log(np.exp(-self.beta * (e - e[0])).sum()))


class GroundState(SpectralState):
    kind = "ground"

    def __init__(self, H: HermitianOperator, tol: float = DEGENERACY_TOL):
        e, _ = H.eig()
        low = e <= e[0] + tol
        self.degeneracy = int(low.sum())
        super().__init__(H, low / low.sum())
        self.beta = np.inf


def gibbs_state(H: HermitianOperator, beta: float) -> GibbsState:
    return GibbsState(_as_hermitian(H), beta)


def ground_state(H: HermitianOperator, tol: float = DEGENERACY_TOL) -> GroundState:
    return GroundState(_as_hermitian(H), tol)


def product_state(rho_site, sites: int) -> ProductState:
    return ProductState(rho_site, sites)


def expectation(state: QuantumState, op: MatrixLike) -> complex:
    return state.expectation(op)


def _as_hermitian(H) -> HermitianOperator:
    return H if isinstance(H, HermitianOperator) else HermitianOperator(H)
