"""Dense complex-matrix primitives for finite-dimensional quantum states.

All operators are plain ``numpy`` arrays of ``complex128``. Density matrices
and ensembles get thin validated wrappers so that invariants (Hermiticity,
positivity, unit trace, normalized weights) are checked once at construction.
Entropies are reported in nats (natural logarithm) throughout.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, EnsembleError, ParameterError, ShapeError

HERMITICITY_TOL = 1e-10
EIGENVALUE_TOL = 1e-10
TRACE_TOL = 1e-10
WEIGHT_TOL = 1e-12

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z)


def as_matrix(a) -> np.ndarray:
    """Coerce input to a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix entries must be finite")
    return m


def is_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    return a.shape[0] == a.shape[1] and np.max(np.abs(a - a.conj().T)) <= tol


def hermitian_eig(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns eigenvalues in ascending order and the matrix whose columns are
    the corresponding orthonormal eigenvectors.
    """
    m = as_matrix(h)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    if not is_hermitian(m):
        raise ShapeError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(m)
    return w, v


def schatten_norm(a, p: float) -> float:
    """Schatten p-norm (sum of p-th powers of singular values)^(1/p), p >= 1 or inf."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}")
    if not (p == np.inf or p >= 1.0):
        raise ParameterError(f"Schatten norm requires p >= 1, got {p}")
    s = np.linalg.svd(m, compute_uv=False)
    if p == np.inf:
        return float(s[0]) if s.size else 0.0
    if p == 1:
        return float(np.sum(s))
    return float(np.sum(s**p) ** (1.0 / p))


def trace_norm(a) -> float:
    return schatten_norm(a, 1)


def matrix_sqrt_psd(p) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in [-EIGENVALUE_TOL, 0) are treated as solver noise and
    clamped to zero; anything more negative is a genuine domain violation.
    """
    m = as_matrix(p)
    w, v = hermitian_eig(m)
    if w[0] < -EIGENVALUE_TOL:
        raise DomainError(f"matrix is indefinite (min eigenvalue {w[0]:.3e})")
    w = np.maximum(w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def partial_trace(x, dims: tuple[int, int], keep: str = "first") -> np.ndarray:
    """Partial trace of an operator on a bipartite space.

    ``dims = (dA, dB)`` declares the tensor factorization (first factor is
    the leading index); ``keep`` selects which factor survives.
    """
    m = as_matrix(x)
    da, db = int(dims[0]), int(dims[1])
    if m.shape != (da * db, da * db):
        raise DimensionError(f"operator shape {m.shape} does not match dims {da}x{db}")
    t = m.reshape(da, db, da, db)
    if keep == "first":
        return np.einsum("abcb->ac", t)
    if keep == "second":
        return np.einsum("abad->bd", t)
    raise ParameterError(f"keep must be 'first' or 'second', got {keep!r}")


def von_neumann_entropy(rho) -> float:
    """Von Neumann entropy -sum(lam ln lam) in nats, with 0 ln 0 = 0."""
    m = _state_matrix(rho)
    w = np.linalg.eigvalsh(m)
    w = np.clip(w.real, 0.0, None)
    nz = w[w > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def random_state(dim: int, rank: int, seed) -> "DensityMatrix":
    """Random density matrix of the given rank (Ginibre / Hilbert-Schmidt induced).

    rho = G G^dag / Tr(G G^dag) for a dim x rank standard complex Gaussian G.
    Deterministic for a fixed seed.
    """
    if not (1 <= rank <= dim):
        raise ParameterError(f"rank must be in [1, {dim}], got {rank}")
    rng = _as_rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    m /= np.trace(m).real
    return DensityMatrix((m + m.conj().T) / 2)


def random_pure_state(dim: int, seed) -> np.ndarray:
    """Haar-random normalized state vector."""
    rng = _as_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, seed) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fix."""
    rng = _as_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, seed, scale: float = 1.0) -> np.ndarray:
    rng = _as_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (g + g.conj().T) / 2


def bloch_vector(s: float, theta: float, phi: float) -> np.ndarray:
    """Cartesian Bloch vector n = (s sin(theta) cos(phi), s sin(theta) sin(phi), s cos(theta))."""
    return np.array(
        [s * np.sin(theta) * np.cos(phi), s * np.sin(theta) * np.sin(phi), s * np.cos(theta)]
    )


def qubit_from_bloch(n) -> "DensityMatrix":
    """Qubit state (I + n . sigma) / 2 for a Bloch vector with |n| <= 1."""
    n = np.asarray(n, dtype=float)
    if n.shape != (3,):
        raise DimensionError("Bloch vector must have 3 components")
    if np.linalg.norm(n) > 1 + 1e-12:
        raise DomainError(f"Bloch vector length {np.linalg.norm(n):.6f} exceeds 1")
    m = (SIGMA_0 + n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z) / 2
    return DensityMatrix(m)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _state_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return as_matrix(rho)


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix: Hermitian, PSD and unit trace to tolerance."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ShapeError("density matrix is not Hermitian within 1e-10")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise DomainError(f"density matrix trace {np.trace(m):.3e} is not 1")
        w = np.linalg.eigvalsh(m)
        if w[0] < -EIGENVALUE_TOL:
            raise DomainError(f"density matrix has negative eigenvalue {w[0]:.3e}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @staticmethod
    def pure(vector) -> "DensityMatrix":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        return DensityMatrix(np.outer(v, v.conj()))

    @staticmethod
    def maximally_mixed(dim: int) -> "DensityMatrix":
        return DensityMatrix(np.eye(dim, dtype=complex) / dim)

    def bloch(self) -> np.ndarray:
        """Bloch vector (qubit only)."""
        if self.dim != 2:
            raise DimensionError("Bloch vector is defined for qubits only")
        return np.array(
            [np.trace(self.matrix @ p).real for p in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
        )


@dataclass(frozen=True)
class Space:
    """Which Hilbert space an ensemble lives on: system only or system + ancilla."""

    kind: str  # 'S' or 'SA'
    dim_s: int
    dim_a: int | None = None

    def __post_init__(self):
        if self.kind not in ("S", "SA"):
            raise ParameterError(f"space kind must be 'S' or 'SA', got {self.kind!r}")
        if self.kind == "SA" and (self.dim_a is None or self.dim_a < 1):
            raise ParameterError("SA space needs a positive ancilla dimension")

    @property
    def total_dim(self) -> int:
        return self.dim_s if self.kind == "S" else self.dim_s * self.dim_a

    @staticmethod
    def system(dim_s: int) -> "Space":
        return Space("S", dim_s)

    @staticmethod
    def system_ancilla(dim_s: int, dim_a: int) -> "Space":
        return Space("SA", dim_s, dim_a)


@dataclass(frozen=True)
class Ensemble:
    """Finite weighted collection of density matrices on a declared space."""

    space: Space
    members: tuple[tuple[float, DensityMatrix], ...]

    def __post_init__(self):
        members = tuple((float(w), s) for w, s in self.members)
        if len(members) < 1:
            raise EnsembleError("ensemble needs at least one member")
        weights = np.array([w for w, _ in members])
        if np.any(weights < 0):
            raise EnsembleError("ensemble weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise EnsembleError(f"ensemble weights sum to {weights.sum():.15f}, not 1")
        for _, state in members:
            if state.dim != self.space.total_dim:
                raise EnsembleError(
                    f"state dimension {state.dim} does not match space dimension "
                    f"{self.space.total_dim}"
                )
        object.__setattr__(self, "members", members)

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.members])

    @property
    def states(self) -> list[np.ndarray]:
        return [s.matrix for _, s in self.members]

    def fingerprint(self) -> str:
        h = hashlib.sha1()
        for w, s in self.members:
            h.update(np.float64(w).tobytes())
            h.update(np.ascontiguousarray(s.matrix).tobytes())
        return h.hexdigest()[:16]
