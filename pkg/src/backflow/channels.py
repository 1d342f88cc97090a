"""Quantum channels on a d-dimensional system in three interchangeable forms.

Conventions (asserted by round-trip tests):

* Vectorization is column-stacking: ``vec(X) = X.reshape(-1, order='F')``,
  so ``vec(A X B) = (B^T kron A) vec(X)`` and a Kraus set gives the
  superoperator ``S = sum_k conj(K_k) kron K_k``.
* The Choi matrix is unnormalized, ``J = sum_ij |i><j| (x) L(|i><j|)`` with
  the index factor first; ``Tr J = d`` for trace-preserving maps, and the
  map is completely positive iff ``J >= 0``.

Channels are immutable after construction; representations and CP/TP
verdicts are cached on first use and shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvertibilityError, ParameterError, RepresentationError
from .linalg import DensityMatrix, as_matrix, _as_rng

CP_TOL = 1e-10
TP_TOL = 1e-10
KRAUS_KEEP_TOL = 1e-10


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    v = np.asarray(v).reshape(-1)
    d = int(np.sqrt(v.size)) if dim is None else dim
    return v.reshape(d, d, order="F")


def kraus_to_superop(kraus) -> np.ndarray:
    d = kraus[0].shape[0]
    s = np.zeros((d * d, d * d), dtype=complex)
    for k in kraus:
        s += np.kron(k.conj(), k)
    return s


def kraus_to_choi(kraus) -> np.ndarray:
    # With column stacking, each Kraus operator contributes vec(K) vec(K)^dag.
    d = kraus[0].shape[0]
    j = np.zeros((d * d, d * d), dtype=complex)
    for k in kraus:
        v = vec(k)
        j += np.outer(v, v.conj())
    return j


def choi_from_superop(s: np.ndarray) -> np.ndarray:
    d = int(np.sqrt(s.shape[0]))
    return s.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


def superop_from_choi(j: np.ndarray) -> np.ndarray:
    # The index reshuffle between the two forms is an involution.
    return choi_from_superop(j)


def choi_to_kraus(j: np.ndarray, keep_tol: float = KRAUS_KEEP_TOL) -> list[np.ndarray]:
    """Kraus operators from a Choi matrix; requires complete positivity."""
    d = int(np.sqrt(j.shape[0]))
    jh = (j + j.conj().T) / 2
    w, v = np.linalg.eigh(jh)
    if w[0] < -keep_tol:
        raise RepresentationError(
            f"channel is not CP (min Choi eigenvalue {w[0]:.3e}); no Kraus form exists",
            min_eigenvalue=float(w[0]),
        )
    ops = []
    for lam, col in zip(w, v.T):
        if lam > keep_tol:
            ops.append(np.sqrt(lam) * unvec(col, d))
    return ops


class QuantumChannel:
    """Linear map on d x d operators held as Kraus set, Choi matrix and/or superoperator."""

    def __init__(self, dim: int, kraus=None, choi=None, superop=None,
                 cp: bool | None = None, tp: bool | None = None,
                 min_choi_eig: float | None = None, tp_residual: float | None = None):
        if kraus is None and choi is None and superop is None:
            raise ParameterError("channel needs at least one representation")
        self.dim = int(dim)
        self._kraus = tuple(np.asarray(k, dtype=complex) for k in kraus) if kraus else None
        self._choi = np.asarray(choi, dtype=complex) if choi is not None else None
        self._superop = np.asarray(superop, dtype=complex) if superop is not None else None
        self._cp = cp
        self._tp = tp
        self._min_choi_eig = min_choi_eig
        self._tp_residual = tp_residual

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_kraus(cls, kraus, tp_tol: float = TP_TOL) -> "QuantumChannel":
        ops = [as_matrix(k) for k in kraus]
        d = ops[0].shape[0]
        for k in ops:
            if k.shape != (d, d):
                raise DimensionError("all Kraus operators must be square with equal dimension")
        acc = sum(k.conj().T @ k for k in ops)
        residual = float(np.max(np.abs(acc - np.eye(d))))
        return cls(d, kraus=ops, cp=True, tp=residual <= tp_tol, tp_residual=residual)

    @classmethod
    def from_choi(cls, choi, dim: int | None = None) -> "QuantumChannel":
        j = as_matrix(choi)
        d = int(np.sqrt(j.shape[0])) if dim is None else int(dim)
        if j.shape != (d * d, d * d):
            raise DimensionError(f"Choi matrix shape {j.shape} does not match dim {d}")
        return cls(d, choi=j)

    @classmethod
    def from_superop(cls, superop, dim: int | None = None) -> "QuantumChannel":
        s = as_matrix(superop)
        d = int(np.sqrt(s.shape[0])) if dim is None else int(dim)
        if s.shape != (d * d, d * d):
            raise DimensionError(f"superoperator shape {s.shape} does not match dim {d}")
        return cls(d, superop=s)

    @classmethod
    def identity(cls, dim: int) -> "QuantumChannel":
        return cls.from_kraus([np.eye(dim, dtype=complex)])

    @classmethod
    def from_unitary(cls, u) -> "QuantumChannel":
        return cls.from_kraus([as_matrix(u)])

    @classmethod
    def depolarizing(cls, dim: int) -> "QuantumChannel":
        """Fully depolarizing channel rho -> I/d."""
        ops = []
        for i in range(dim):
            for j in range(dim):
                e = np.zeros((dim, dim), dtype=complex)
                e[i, j] = 1.0 / np.sqrt(dim)
                ops.append(e)
        return cls.from_kraus(ops)

    # -- cached representations -------------------------------------------

    @property
    def superop(self) -> np.ndarray:
        if self._superop is None:
            if self._kraus is not None:
                self._superop = kraus_to_superop(self._kraus)
            else:
                self._superop = superop_from_choi(self._choi)
        return self._superop

    @property
    def choi(self) -> np.ndarray:
        if self._choi is None:
            if self._kraus is not None:
                self._choi = kraus_to_choi(self._kraus)
            else:
                self._choi = choi_from_superop(self._superop)
        return self._choi

    @property
    def kraus(self) -> tuple[np.ndarray, ...]:
        if self._kraus is None:
            self._kraus = tuple(choi_to_kraus(self.choi))
        return self._kraus

    @property
    def has_kraus(self) -> bool:
        return self._kraus is not None

    # -- verdicts ----------------------------------------------------------

    @property
    def cp_verdict(self) -> str:
        return "unchecked" if self._cp is None else ("yes" if self._cp else "no")

    @property
    def tp_verdict(self) -> str:
        return "unchecked" if self._tp is None else ("yes" if self._tp else "no")

    @property
    def min_choi_eig(self) -> float | None:
        return self._min_choi_eig

    @property
    def tp_residual(self) -> float | None:
        return self._tp_residual

    # -- application -------------------------------------------------------

    def apply_matrix(self, x: np.ndarray) -> np.ndarray:
        """Apply the map to an arbitrary operator (no state validation)."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim, self.dim):
            raise DimensionError(f"operator shape {x.shape} does not match channel dim {self.dim}")
        if self._kraus is not None:
            out = np.zeros_like(x)
            for k in self._kraus:
                out += k @ x @ k.conj().T
            return out
        return unvec(self.superop @ vec(x), self.dim)

    def apply(self, rho) -> DensityMatrix:
        """Apply to a density matrix, returning a validated density matrix."""
        m = rho.matrix if isinstance(rho, DensityMatrix) else as_matrix(rho)
        out = self.apply_matrix(m)
        return DensityMatrix((out + out.conj().T) / 2)

    def __repr__(self):
        reps = [name for name, val in (
            ("kraus", self._kraus), ("choi", self._choi), ("superop", self._superop)
        ) if val is not None]
        return (f"QuantumChannel(dim={self.dim}, reps={'/'.join(reps)}, "
                f"cp={self.cp_verdict}, tp={self.tp_verdict})")


@dataclass(frozen=True)
class CPTPVerdict:
    cp: bool
    tp: bool
    min_choi_eig: float
    tp_residual: float


def verify_cptp(ch: QuantumChannel, tol: float = CP_TOL) -> CPTPVerdict:
    """Decide CP via the Choi spectrum and TP via the partial trace of the Choi."""
    j = ch.choi
    d = ch.dim
    w = np.linalg.eigvalsh((j + j.conj().T) / 2)
    min_eig = float(w[0])
    tr_out = np.einsum("imjm->ij", j.reshape(d, d, d, d))
    residual = float(np.max(np.abs(tr_out - np.eye(d))))
    cp = min_eig >= -tol
    tp = residual <= tol
    ch._cp, ch._tp = cp, tp
    ch._min_choi_eig, ch._tp_residual = min_eig, residual
    return CPTPVerdict(cp, tp, min_eig, residual)


def convert(ch: QuantumChannel, target: str) -> QuantumChannel:
    """Re-express a channel through a single target representation."""
    if target == "kraus":
        return QuantumChannel.from_kraus(choi_to_kraus(ch.choi))
    if target == "choi":
        return QuantumChannel.from_choi(ch.choi.copy(), ch.dim)
    if target == "superop":
        return QuantumChannel.from_superop(ch.superop.copy(), ch.dim)
    raise ParameterError(f"unknown target representation {target!r}")


def compose(later: QuantumChannel, earlier: QuantumChannel) -> QuantumChannel:
    """Channel applying ``earlier`` first, then ``later``."""
    if later.dim != earlier.dim:
        raise DimensionError("composed channels must share a dimension")
    return QuantumChannel.from_superop(later.superop @ earlier.superop, later.dim)


def intermediate_map(later: QuantumChannel, earlier: QuantumChannel,
                     inv_tol: float = 1e-10) -> QuantumChannel:
    """The map V with later = V o earlier, defined when ``earlier`` is invertible."""
    if later.dim != earlier.dim:
        raise DimensionError("intermediate map needs channels of equal dimension")
    s_early = earlier.superop
    smin = float(np.linalg.svd(s_early, compute_uv=False)[-1])
    if smin < inv_tol:
        raise InvertibilityError(
            f"earlier map is numerically singular (smallest singular value {smin:.3e})",
            smallest_singular_value=smin,
        )
    v = np.linalg.solve(s_early.T, later.superop.T).T
    return QuantumChannel.from_superop(v, later.dim)


def extend_with_identity(ch: QuantumChannel, dim_a: int) -> QuantumChannel:
    """The map ch (x) identity acting on a system tensor ancilla space."""
    if dim_a < 1:
        raise ParameterError(f"ancilla dimension must be >= 1, got {dim_a}")
    d = ch.dim
    if ch.has_kraus:
        eye = np.eye(dim_a, dtype=complex)
        ext = QuantumChannel(
            d * dim_a, kraus=[np.kron(k, eye) for k in ch._kraus],
            cp=ch._cp, tp=ch._tp, tp_residual=ch._tp_residual,
        )
        return ext
    # General (possibly non-CP) case: lift the superoperator index-wise.
    # With L[m,n,s,t] = L(|s><t|)[m,n], the extended superoperator is
    # L[m,n,s,t] delta_{ca} delta_{db} arranged on the composite vec indices.
    l4 = ch.superop.reshape(d, d, d, d).transpose(1, 0, 3, 2)
    eye = np.eye(dim_a)
    big = np.einsum("mnst,ca,db->ndmctbsa", l4, eye, eye)
    dd = d * dim_a
    return QuantumChannel(
        dd, superop=big.reshape(dd * dd, dd * dd).astype(complex),
        cp=ch._cp, tp=ch._tp, tp_residual=ch._tp_residual,
    )


def extend_superops_batch(stack: np.ndarray, dim: int, dim_a: int) -> np.ndarray:
    """Vectorized ``extend_with_identity`` for a stack (N, d^2, d^2) of superoperators."""
    n = stack.shape[0]
    l4 = stack.reshape(n, dim, dim, dim, dim).transpose(0, 2, 1, 4, 3)
    eye = np.eye(dim_a)
    big = np.einsum("xmnst,ca,db->xndmctbsa", l4, eye, eye)
    dd = dim * dim_a
    return big.reshape(n, dd * dd, dd * dd)


def random_cptp(dim: int, kraus_count: int, seed) -> QuantumChannel:
    """Random CPTP channel from a Haar-ish random Stinespring isometry.

    QR of a (dim * kraus_count) x dim complex Gaussian gives an exact
    isometry, so the Kraus blocks satisfy sum K^dag K = I by construction.
    """
    if kraus_count < 1:
        raise ParameterError(f"kraus_count must be >= 1, got {kraus_count}")
    rng = _as_rng(seed)
    g = rng.standard_normal((dim * kraus_count, dim)) + 1j * rng.standard_normal(
        (dim * kraus_count, dim)
    )
    q, _ = np.linalg.qr(g)
    ops = [q[i * dim:(i + 1) * dim, :] for i in range(kraus_count)]
    return QuantumChannel.from_kraus(ops)


def vec_batch(x: np.ndarray) -> np.ndarray:
    """Column-stack a stack of matrices (..., d, d) -> (..., d*d)."""
    d = x.shape[-1]
    return np.swapaxes(x, -1, -2).reshape(*x.shape[:-2], d * d)


def unvec_batch(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`vec_batch`."""
    return np.swapaxes(v.reshape(*v.shape[:-1], dim, dim), -1, -2)


def min_output_eigenvalue_sampled(ch: QuantumChannel, samples: int, seed) -> float:
    """Smallest output eigenvalue over Haar-random pure inputs (positivity probe)."""
    rng = _as_rng(seed)
    d = ch.dim
    v = rng.standard_normal((samples, d)) + 1j * rng.standard_normal((samples, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    states = np.einsum("ni,nj->nij", v, v.conj())
    out = unvec_batch(vec_batch(states) @ ch.superop.T, d)
    out = (out + out.conj().swapaxes(-1, -2)) / 2
    eigs = np.linalg.eigvalsh(out)
    return float(eigs[:, 0].min())
