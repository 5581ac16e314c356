"""Dense linear algebra on tensor products of spin-1/2 sites.

Everything here works with plain ``numpy`` complex arrays.  The one stateful
object is :class:`HermitianOperator`, which caches its eigendecomposition so
that Gibbs states, Duhamel functions and spectral measures built from the same
Hamiltonian share a single ``eigh`` call.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Union

import numpy as np

MAX_SITES = 13

HERMITIAN_TOL = 1e-12


class ResourceError(RuntimeError):
    """Raised when a dense construction would exceed the site cap."""


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


@dataclass(frozen=True)
class SiteObservable:
    """A one-site (2x2) observable with a human readable label."""

    op: np.ndarray
    label: str = ""

    def __post_init__(self):
        op = np.asarray(self.op, dtype=complex)
        if op.shape != (2, 2):
            raise ContractError(f"site observable must be 2x2, got shape {op.shape}")
        op.setflags(write=False)
        object.__setattr__(self, "op", op)

    @property
    def H(self) -> "SiteObservable":
        return SiteObservable(self.op.conj().T, f"({self.label})^*")

    def __matmul__(self, other: "SiteObservable") -> "SiteObservable":
        return SiteObservable(self.op @ as_matrix(other), f"{self.label}{other.label}")


class HermitianOperator:
    """Hermitian matrix with a lazily computed, cached eigendecomposition.

    Parameters
    ----------
    matrix : array_like
        Square complex matrix.  Hermiticity is checked to ``1e-12`` relative
        Frobenius norm and the stored matrix is the exactly symmetrised
        ``(A + A^*)/2``.
    label : str, optional
        Free-form description, used only in ``repr``.
    """

    def __init__(self, matrix, label: str = ""):
        a = np.array(matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ContractError(f"expected a square matrix, got shape {a.shape}")
        scale = max(np.linalg.norm(a), 1.0)
        if np.linalg.norm(a - a.conj().T) > HERMITIAN_TOL * scale:
            raise ContractError("matrix is not Hermitian")
        a = 0.5 * (a + a.conj().T)
        a.setflags(write=False)
        self._matrix = a
        self.label = label
        self._eig = None
        self._lock = threading.Lock()

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(E, U)`` with ``E`` ascending and ``U`` unitary."""
        if self._eig is None:
            with self._lock:
                if self._eig is None:
                    if np.any(self._matrix.imag):
                        e, u = np.linalg.eigh(self._matrix)
                    else:
                        # real symmetric: real eigh is ~4x cheaper
                        e, u = np.linalg.eigh(self._matrix.real)
                    e.setflags(write=False)
                    u.setflags(write=False)
                    self._eig = (e, u)
        return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig()[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eig()[1]

    def __array__(self, dtype=None, copy=None):
        return self._matrix if dtype is None else self._matrix.astype(dtype)

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim}, label={self.label!r})"


MatrixLike = Union[np.ndarray, HermitianOperator, SiteObservable]


def as_matrix(x: MatrixLike) -> np.ndarray:
    """Return the underlying complex array of any supported operator type."""
    if isinstance(x, HermitianOperator):
        return x.matrix
    if isinstance(x, SiteObservable):
        return x.op
    return np.asarray(x, dtype=complex)


def check_sites(total_sites: int) -> None:
    if total_sites < 1:
        raise ContractError("need at least one site")
    if total_sites > MAX_SITES:
        raise ResourceError(
            f"{total_sites} sites exceeds the dense cap of {MAX_SITES} (dim {2**MAX_SITES})"
        )


def pauli_matrices() -> dict[str, SiteObservable]:
    """Pauli matrices with ``z = diag(1, -1)`` and ``plus = |0><1|``.

    With this convention ``plus @ minus - minus @ plus == z`` and
    ``plus = (x + i y) / 2``.
    """
    z = np.diag([1.0, -1.0]).astype(complex)
    plus = np.array([[0, 1], [0, 0]], dtype=complex)
    minus = plus.T.copy()
    return {
        "z": SiteObservable(z, "sz"),
        "plus": SiteObservable(plus, "s+"),
        "minus": SiteObservable(minus, "s-"),
        "x": SiteObservable(plus + minus, "sx"),
        "y": SiteObservable(-1j * (plus - minus), "sy"),
        "id": SiteObservable(np.eye(2), "id"),
    }


def embed(op: MatrixLike, site: int, total_sites: int) -> np.ndarray:
    """Kronecker embedding ``id x ... x op x ... x id`` with ``op`` at ``site``.

    Site 0 is the leftmost (most significant) tensor factor.
    """
    check_sites(total_sites)
    if not 0 <= site < total_sites:
        raise ContractError(f"site {site} out of range for {total_sites} sites")
    a = as_matrix(op)
    if a.shape != (2, 2):
        raise ContractError("embed expects a one-site (2x2) operator")
    left = np.eye(2**site)
    right = np.eye(2 ** (total_sites - site - 1))
    return np.kron(np.kron(left, a), right)


def product_operator(factors: dict[int, MatrixLike], total_sites: int) -> np.ndarray:
    """Tensor product with one-site ``factors[site]`` and identities elsewhere."""
    check_sites(total_sites)
    out = np.ones((1, 1), dtype=complex)
    for j in range(total_sites):
        f = as_matrix(factors[j]) if j in factors else np.eye(2)
        out = np.kron(out, f)
    return out


def hermitian_eig(op: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvectors, cached on ``op``."""
    if not isinstance(op, HermitianOperator):
        op = HermitianOperator(op)
    return op.eig()


def heisenberg_evolve(H: HermitianOperator, A: MatrixLike, t: float) -> np.ndarray:
    """``exp(itH) A exp(-itH)`` through the eigendecomposition of ``H``."""
    if not isinstance(H, HermitianOperator):
        H = HermitianOperator(H)
    a = as_matrix(A)
    if a.shape != H.matrix.shape:
        raise ContractError(f"dimension mismatch: H is {H.matrix.shape}, A is {a.shape}")
    e, u = H.eig()
    phase = np.exp(1j * t * e)
    a_eig = u.conj().T @ a @ u
    a_eig = phase[:, None] * a_eig * phase.conj()[None, :]
    return u @ a_eig @ u.conj().T


def commutator(A: MatrixLike, B: MatrixLike) -> np.ndarray:
    a, b = as_matrix(A), as_matrix(B)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def random_hermitian(dim: int, rng: np.random.Generator, norm: float | None = None) -> np.ndarray:
    """GUE-like random Hermitian matrix, optionally rescaled to an operator norm."""
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    a = 0.5 * (x + x.conj().T)
    if norm is not None:
        a *= norm / np.linalg.norm(a, 2)
    return a
