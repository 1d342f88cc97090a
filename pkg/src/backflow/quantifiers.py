"""Information quantifiers that are monotone under CPTP maps, and their trajectories.

Every quantifier here is a bounded nonnegative function on weighted state
ensembles that never increases when a channel acts on the system side (with
an identity on the ancilla for joint-space quantifiers). Evaluating one
along a dynamical-map family produces a trajectory whose non-monotone decay
witnesses information backflow.

Quantifiers restricted to a fixed ensemble size (or to equal weights) follow
a piecewise convention: they evaluate to zero on non-conforming ensembles.
A module flag turns that into a hard error instead.

The registry is open: registering a new definition automatically enrols it
in the CPTP-monotonicity fuzz suite and in the classification driver.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .channels import (
    QuantumChannel,
    extend_superops_batch,
    extend_with_identity,
    unvec_batch,
    vec_batch,
)
from .dynamics import DynamicalMapFamily, TimeGrid
from .errors import (
    DimensionError,
    DomainError,
    EnsembleError,
    ParameterError,
)
from .linalg import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityMatrix,
    Ensemble,
    Space,
    as_matrix,
    partial_trace,
    random_state,
    schatten_norm,
    trace_norm,
)

_STRICT_PIECEWISE = True

KIND_GTD = "GTD"
KIND_BLP = "BLP"
KIND_FIDELITY = "Fidelity"
KIND_QFI = "QFI"
KIND_QMI = "QMI"
KIND_PNORM = "PNorm"
KIND_P1P2 = "P1P2"
KIND_GTDE = "GTDE"
KIND_COHERENT_INFO = "CoherentInfo"


def set_strict_piecewise(flag: bool) -> None:
    """Choose whether non-conforming ensembles evaluate to 0 (True) or raise (False)."""
    global _STRICT_PIECEWISE
    _STRICT_PIECEWISE = bool(flag)


def strict_piecewise() -> bool:
    return _STRICT_PIECEWISE


# ---------------------------------------------------------------------------
# numerical helpers
# ---------------------------------------------------------------------------


def _mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityMatrix) else as_matrix(x)


def _det2(m: np.ndarray) -> float:
    return float((m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real)


def _sqrt_psd_raw(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def bures_gap(rho, sigma) -> float:
    """1 - ||sqrt(rho) sqrt(sigma)||_1, computed without catastrophic cancellation
    for well-conditioned qubit states.

    The quantity is quadratically small for nearby states, so the naive
    subtract-after-norm route loses all significant digits exactly where the
    Fisher-information limit needs them. For qubits the 2x2 determinant/trace
    identities give the difference directly from sigma - rho.
    """
    r = _mat(rho)
    s = _mat(sigma)
    if r.shape != s.shape:
        raise DimensionError("states must share a dimension")
    if r.shape[0] == 2:
        # Trace-normalized qubit form. F^2 = tr(rho sigma) + 2 sqrt(det rho det sigma)
        # scales bilinearly in the traces, so dividing them out algebraically
        # removes the first-order sensitivity to trace-level input noise that
        # would otherwise swamp the quadratically small gap.
        delta = s - r
        tr_r = float(np.trace(r).real)
        tr_s = float(np.trace(s).real)
        adj_delta = np.array([[delta[1, 1], -delta[0, 1]],
                              [-delta[1, 0], delta[0, 0]]])
        t_rad = float(np.trace(r @ adj_delta).real)  # tr(rho adj(delta))
        det_delta = _det2(delta)
        a = _det2(r)
        ddet = det_delta + t_rad  # det(sigma) - det(rho)
        b = a + ddet
        if a > 1e-6:
            root = np.sqrt(max(1.0 + ddet / a, 0.0))
            num = t_rad * (1.0 - 2.0 / (1.0 + root)) - 2.0 * det_delta / (1.0 + root)
        else:
            num = 2.0 * a + t_rad - 2.0 * np.sqrt(max(a * b, 0.0))
        den = tr_r * tr_s
        f_norm = np.sqrt(max(den - num, 0.0) / den)
        return float(num / (den * (1.0 + f_norm)))
    prod = _sqrt_psd_raw(r) @ _sqrt_psd_raw(s)
    return 1.0 - float(np.sum(np.linalg.svd(prod, compute_uv=False)))


def _eigh_batch(stack: np.ndarray) -> np.ndarray:
    h = (stack + stack.conj().swapaxes(-1, -2)) / 2
    return np.linalg.eigvalsh(h)


def _trace_norm_batch(stack: np.ndarray) -> np.ndarray:
    """Trace norms of a stack of Hermitian matrices."""
    return np.abs(_eigh_batch(stack)).sum(axis=-1)


def _schatten_batch(stack: np.ndarray, p: float) -> np.ndarray:
    sv = np.abs(_eigh_batch(stack))
    if p == np.inf:
        return sv.max(axis=-1)
    if p == 1:
        return sv.sum(axis=-1)
    return np.sum(sv**p, axis=-1) ** (1.0 / p)


def _entropy_batch(stack: np.ndarray) -> np.ndarray:
    w = np.clip(_eigh_batch(stack), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0.0, w * np.log(np.where(w > 0.0, w, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def _partial_trace_batch(stack: np.ndarray, dim_s: int, dim_a: int,
                         keep: str = "first") -> np.ndarray:
    t = stack.reshape(*stack.shape[:-2], dim_s, dim_a, dim_s, dim_a)
    if keep == "first":
        return np.einsum("...abcb->...ac", t)
    return np.einsum("...abad->...bd", t)


def _apply_superop_stack(superops: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Apply (N, D^2, D^2) superoperators to (m, D, D) matrices -> (N, m, D, D)."""
    d = mats.shape[-1]
    vecs = vec_batch(mats)
    out = np.einsum("nij,mj->nmi", superops, vecs)
    return unvec_batch(out, d)


def _fidelity_qubit_batch(rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """||sqrt(rho) sqrt(sigma)||_1 for stacks of qubit states (plain formula)."""
    tr_rs = np.einsum("nij,nji->n", rho, sigma).real
    det_r = (rho[:, 0, 0] * rho[:, 1, 1] - rho[:, 0, 1] * rho[:, 1, 0]).real
    det_s = (sigma[:, 0, 0] * sigma[:, 1, 1] - sigma[:, 0, 1] * sigma[:, 1, 0]).real
    inner = np.clip(tr_rs + 2.0 * np.sqrt(np.clip(det_r * det_s, 0.0, None)), 0.0, None)
    return np.sqrt(inner)


def _unitary_from_generator(g: np.ndarray, theta: float) -> np.ndarray:
    w, v = np.linalg.eigh((g + g.conj().T) / 2)
    return (v * np.exp(-1j * theta * w)) @ v.conj().T


_GENERATORS = {"x": SIGMA_X / 2, "y": SIGMA_Y / 2, "z": SIGMA_Z / 2}


# ---------------------------------------------------------------------------
# quantifier primitives
# ---------------------------------------------------------------------------


def pq_gtd(p1: float, p2: float, rho1, rho2) -> float:
    """Weighted-distinguishability quantifier ||p1 rho1 - p2 rho2||_1."""
    if abs(p1 + p2 - 1.0) > 1e-12:
        raise EnsembleError(f"weights must sum to 1, got {p1} + {p2}")
    m1, m2 = _mat(rho1), _mat(rho2)
    if m1.shape != m2.shape:
        raise DimensionError("states must share a dimension")
    return trace_norm(p1 * m1 - p2 * m2)


def pq_blp(rho1, rho2) -> float:
    """Trace-distance distinguishability ||rho1 - rho2||_1 (equal weights)."""
    m1, m2 = _mat(rho1), _mat(rho2)
    if m1.shape != m2.shape:
        raise DimensionError("states must share a dimension")
    return trace_norm(m1 - m2)


def pq_fidelity(rho1, rho2) -> float:
    """Fidelity-based quantifier 1 - ||sqrt(rho1) sqrt(rho2)||_1."""
    return max(bures_gap(rho1, rho2), 0.0)


def pq_qfi(state_family: Callable[[float], np.ndarray], theta: float,
           dtheta: float, richardson: bool = True) -> float:
    """Fisher-information quantifier from the infinitesimal Bures distance.

    Finite-difference estimate 8 (1 - ||sqrt(rho_t) sqrt(rho_{t+h})||_1) / h^2,
    optionally Richardson-extrapolated over h and h/2.
    """
    if dtheta <= 0:
        raise ParameterError(f"dtheta must be positive, got {dtheta}")
    base = np.asarray(state_family(theta), dtype=complex)
    if not np.all(np.isfinite(base)):
        raise DomainError("state family produced non-finite values")

    def estimate(h: float) -> float:
        shifted = np.asarray(state_family(theta + h), dtype=complex)
        if not np.all(np.isfinite(shifted)):
            raise DomainError("state family produced non-finite values")
        return 8.0 * bures_gap(base, shifted) / h**2

    f1 = estimate(dtheta)
    if not richardson:
        return f1
    f2 = estimate(dtheta / 2.0)
    return (4.0 * f2 - f1) / 3.0


def pq_qmi(xi, dims: tuple[int, int]) -> float:
    """Quantum mutual information S(xi_S) + S(xi_A) - S(xi) in nats."""
    m = _mat(xi)
    ds, da = int(dims[0]), int(dims[1])
    if m.shape != (ds * da, ds * da):
        raise DimensionError(f"state shape {m.shape} does not factor as {ds}x{da}")
    s_joint = float(_entropy_batch(m[None])[0])
    s_s = float(_entropy_batch(partial_trace(m, (ds, da), "first")[None])[0])
    s_a = float(_entropy_batch(partial_trace(m, (ds, da), "second")[None])[0])
    return s_s + s_a - s_joint


def pq_pnorm_combo(q1: float, q2: float, p1: float, p2: float, rho1, rho2) -> float:
    """Convex combination of two Schatten p-norms of the state difference (qubits).

    q1 ||rho1 - rho2||_{p1} + q2 ||rho1 - rho2||_{p2}; a single p-norm is the
    q2 = 0 case and p1 = 1, q1 = 1 recovers the trace-distance quantifier.
    """
    if abs(q1 + q2 - 1.0) > 1e-12:
        raise EnsembleError(f"weights must sum to 1, got {q1} + {q2}")
    if p1 < 1 or p2 < 1:
        raise ParameterError("p-norm orders must be >= 1")
    m1, m2 = _mat(rho1), _mat(rho2)
    if m1.shape != (2, 2) or m2.shape != (2, 2):
        raise DomainError("p-norm quantifiers are defined on qubit states only")
    delta = m1 - m2
    return q1 * schatten_norm(delta, p1) + q2 * schatten_norm(delta, p2)


def coherent_information(rho, ch: QuantumChannel) -> float:
    """Coherent information S(L[rho]) - S((L (x) I)[Psi]) for the canonical purification.

    The purification uses the eigenbasis of rho with an ancilla of the same
    dimension, which makes the (purification-independent) value reproducible.
    Range is [-ln d, ln d].
    """
    m = _mat(rho)
    d = m.shape[0]
    if ch.dim != d:
        raise DimensionError(f"channel dim {ch.dim} does not match state dim {d}")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    psi = (v * np.sqrt(w)).reshape(-1)  # component (s*d + a) = sqrt(w_a) v[s, a]
    joint = np.outer(psi, psi.conj())
    out = ch.apply_matrix(m)
    out_joint = extend_with_identity(ch, d).apply_matrix(joint)
    s_out = float(_entropy_batch(out[None])[0])
    s_joint = float(_entropy_batch(out_joint[None])[0])
    return s_out - s_joint


# ---------------------------------------------------------------------------
# quantifier specs and registry
# ---------------------------------------------------------------------------

_KNOWN_KINDS = (
    KIND_GTD, KIND_BLP, KIND_FIDELITY, KIND_QFI, KIND_QMI,
    KIND_PNORM, KIND_P1P2, KIND_GTDE, KIND_COHERENT_INFO,
)


@dataclass(frozen=True)
class QuantifierSpec:
    """Selection and parameters of a registered quantifier."""

    kind: str
    p: float | None = None
    p1: float | None = None
    p2: float | None = None
    dtheta: float = 1e-3
    generator: str = "z"
    richardson: bool = True
    lifted: bool = False

    def __post_init__(self):
        if self.kind not in REGISTRY:
            raise ParameterError(f"unknown quantifier kind {self.kind!r}")
        if self.kind == KIND_PNORM:
            if self.p is None or self.p < 1:
                raise ParameterError("PNorm requires p >= 1")
        if self.kind == KIND_P1P2:
            if self.p1 is None or self.p2 is None or self.p1 < 1 or self.p2 < 1:
                raise ParameterError("P1P2 requires p1, p2 >= 1")
        if self.kind == KIND_QFI:
            if self.dtheta <= 0:
                raise ParameterError("QFI requires dtheta > 0")
            if isinstance(self.generator, str) and self.generator not in _GENERATORS:
                raise ParameterError(f"unknown QFI generator {self.generator!r}")
        if self.lifted:
            entry = REGISTRY[self.kind]
            if entry.space != "S" or not entry.liftable:
                raise ParameterError(
                    f"{self.kind} cannot be lifted to the system-ancilla space"
                )

    @property
    def space(self) -> str:
        if self.lifted:
            return "SA"
        return REGISTRY[self.kind].space

    def generator_matrix(self) -> np.ndarray:
        if isinstance(self.generator, str):
            return _GENERATORS[self.generator]
        return as_matrix(self.generator)

    def label(self) -> str:
        parts = [self.kind.lower()]
        if self.kind == KIND_PNORM:
            parts.append(f"p{self.p:g}")
        if self.kind == KIND_P1P2:
            parts.append(f"p{self.p1:g}-p{self.p2:g}")
        if self.lifted:
            parts.append("lifted")
        return "_".join(parts)


@dataclass(frozen=True)
class QuantifierDefinition:
    """Registry entry: evaluation core plus the metadata the fuzz suite needs."""

    kind: str
    space: str  # 'S' or 'SA'
    ensemble_size: int | None
    core: Callable[[QuantifierSpec, np.ndarray, list[np.ndarray]], float] | None
    sampler: Callable[[np.random.Generator], Ensemble]
    equal_weights: bool = False
    qubit_only: bool = False
    liftable: bool = True
    map_dependent: bool = False
    batch: Callable[[QuantifierSpec, np.ndarray, np.ndarray], np.ndarray] | None = None


REGISTRY: dict[str, QuantifierDefinition] = {}


def register_quantifier(defn: QuantifierDefinition, replace_existing: bool = False) -> None:
    if defn.kind in REGISTRY and not replace_existing:
        raise ParameterError(f"quantifier kind {defn.kind!r} is already registered")
    if defn.space not in ("S", "SA"):
        raise ParameterError("quantifier space must be 'S' or 'SA'")
    REGISTRY[defn.kind] = defn


def registered_kinds() -> list[str]:
    return list(REGISTRY)


def _conforms(entry: QuantifierDefinition, weights: np.ndarray, n: int, dim: int) -> bool:
    if entry.qubit_only and dim != 2:
        raise DomainError(f"{entry.kind} is defined on qubit states only")
    if entry.ensemble_size is not None and n != entry.ensemble_size:
        if _STRICT_PIECEWISE:
            return False
        raise EnsembleError(
            f"{entry.kind} is defined on ensembles of size {entry.ensemble_size}, got {n}"
        )
    if entry.equal_weights and np.any(np.abs(weights - 1.0 / n) > 1e-12):
        if _STRICT_PIECEWISE:
            return False
        raise EnsembleError(f"{entry.kind} requires equal weights")
    return True


# -- evaluation cores (states already transformed) ---------------------------


def _core_gtd(spec, weights, mats):
    return trace_norm(weights[0] * mats[0] - weights[1] * mats[1])


def _core_blp(spec, weights, mats):
    return trace_norm(mats[0] - mats[1])


def _core_fidelity(spec, weights, mats):
    return max(bures_gap(mats[0], mats[1]), 0.0)


def _core_pnorm(spec, weights, mats):
    return schatten_norm(mats[0] - mats[1], spec.p)


def _core_p1p2(spec, weights, mats):
    delta = mats[0] - mats[1]
    return weights[0] * schatten_norm(delta, spec.p1) + weights[1] * schatten_norm(delta, spec.p2)


def _core_qmi(spec, weights, mats):
    d = int(np.sqrt(mats[0].shape[0]))
    return pq_qmi(mats[0], (d, d))


def _core_gtde(spec, weights, mats):
    return trace_norm(weights[0] * mats[0] - weights[1] * mats[1])


# -- batched cores over a grid ------------------------------------------------


def _batch_gtd(spec, weights, stack):
    return _trace_norm_batch(weights[0] * stack[:, 0] - weights[1] * stack[:, 1])


def _batch_blp(spec, weights, stack):
    return _trace_norm_batch(stack[:, 0] - stack[:, 1])


def _batch_fidelity(spec, weights, stack):
    if stack.shape[-1] == 2:
        return np.clip(1.0 - _fidelity_qubit_batch(stack[:, 0], stack[:, 1]), 0.0, None)
    return np.array([max(bures_gap(a, b), 0.0) for a, b in zip(stack[:, 0], stack[:, 1])])


def _batch_pnorm(spec, weights, stack):
    return _schatten_batch(stack[:, 0] - stack[:, 1], spec.p)


def _batch_p1p2(spec, weights, stack):
    delta = stack[:, 0] - stack[:, 1]
    return weights[0] * _schatten_batch(delta, spec.p1) + weights[1] * _schatten_batch(delta, spec.p2)


def _batch_qmi(spec, weights, stack):
    d = int(np.sqrt(stack.shape[-1]))
    joint = stack[:, 0]
    s_joint = _entropy_batch(joint)
    s_s = _entropy_batch(_partial_trace_batch(joint, d, d, "first"))
    s_a = _entropy_batch(_partial_trace_batch(joint, d, d, "second"))
    return s_s + s_a - s_joint


# -- fuzzing samplers (qubit system, ancilla of equal dimension) --------------


def _two_state_sampler(equal_weights: bool, space_kind: str):
    def sample(rng: np.random.Generator) -> Ensemble:
        if space_kind == "S":
            space = Space.system(2)
            states = [random_state(2, 2, rng), random_state(2, 2, rng)]
        else:
            space = Space.system_ancilla(2, 2)
            states = [random_state(4, 4, rng), random_state(4, 4, rng)]
        if equal_weights:
            w1 = 0.5
        else:
            w1 = float(rng.uniform(0.05, 0.95))
        return Ensemble(space, ((w1, states[0]), (1.0 - w1, states[1])))

    return sample


def _single_state_sampler(space_kind: str):
    def sample(rng: np.random.Generator) -> Ensemble:
        if space_kind == "S":
            space = Space.system(2)
            state = random_state(2, 2, rng)
        else:
            space = Space.system_ancilla(2, 2)
            state = random_state(4, 4, rng)
        return Ensemble(space, ((1.0, state),))

    return sample


def _register_builtins() -> None:
    register_quantifier(QuantifierDefinition(
        kind=KIND_GTD, space="S", ensemble_size=2, core=_core_gtd,
        sampler=_two_state_sampler(False, "S"), batch=_batch_gtd))
    register_quantifier(QuantifierDefinition(
        kind=KIND_BLP, space="S", ensemble_size=2, core=_core_blp,
        sampler=_two_state_sampler(True, "S"), equal_weights=True, batch=_batch_blp))
    register_quantifier(QuantifierDefinition(
        kind=KIND_FIDELITY, space="S", ensemble_size=2, core=_core_fidelity,
        sampler=_two_state_sampler(True, "S"), equal_weights=True, batch=_batch_fidelity))
    register_quantifier(QuantifierDefinition(
        kind=KIND_QFI, space="S", ensemble_size=1, core=None,
        sampler=_single_state_sampler("S"), map_dependent=True, liftable=False))
    register_quantifier(QuantifierDefinition(
        kind=KIND_QMI, space="SA", ensemble_size=1, core=_core_qmi,
        sampler=_single_state_sampler("SA"), liftable=False, batch=_batch_qmi))
    register_quantifier(QuantifierDefinition(
        kind=KIND_PNORM, space="S", ensemble_size=2, core=_core_pnorm,
        sampler=_two_state_sampler(True, "S"), equal_weights=True, qubit_only=True,
        batch=_batch_pnorm))
    register_quantifier(QuantifierDefinition(
        kind=KIND_P1P2, space="S", ensemble_size=2, core=_core_p1p2,
        sampler=_two_state_sampler(False, "S"), qubit_only=True, batch=_batch_p1p2))
    register_quantifier(QuantifierDefinition(
        kind=KIND_GTDE, space="SA", ensemble_size=2, core=_core_gtde,
        sampler=_two_state_sampler(False, "SA"), liftable=False, batch=_batch_gtd))
    register_quantifier(QuantifierDefinition(
        kind=KIND_COHERENT_INFO, space="S", ensemble_size=1, core=None,
        sampler=_single_state_sampler("S"), map_dependent=True, liftable=False))


_register_builtins()


def default_spec(kind: str) -> QuantifierSpec:
    """A ready-to-run spec for each registered kind (used by the classifier)."""
    if kind == KIND_PNORM:
        return QuantifierSpec(kind, p=2.0)
    if kind == KIND_P1P2:
        return QuantifierSpec(kind, p1=2.0, p2=3.0)
    return QuantifierSpec(kind)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _qfi_value(spec: QuantifierSpec, rho: np.ndarray,
               apply_fn: Callable[[np.ndarray], np.ndarray]) -> float:
    gen = spec.generator_matrix()

    def family(theta: float) -> np.ndarray:
        u = _unitary_from_generator(gen, theta)
        return apply_fn(u @ rho @ u.conj().T)

    return pq_qfi(family, 0.0, spec.dtheta, spec.richardson)


def _coherent_info_value(spec: QuantifierSpec, rho: np.ndarray,
                         channel: QuantumChannel | None) -> float:
    d = rho.shape[0]
    ch = channel if channel is not None else QuantumChannel.identity(d)
    # Shifted by the lower bound ln d so trajectory values stay nonnegative.
    return coherent_information(rho, ch) + np.log(d)


def evaluate_pq(spec: QuantifierSpec, ensemble: Ensemble,
                channel: QuantumChannel | None = None) -> float:
    """Value of the quantifier on the ensemble, optionally after a channel acts.

    System-space quantifiers see the channel directly; joint-space ones see
    channel (x) identity. Map-dependent quantifiers (QFI, CoherentInfo) fold
    the channel into their defining construction.
    """
    entry = REGISTRY[spec.kind]
    weights = ensemble.weights
    mats = ensemble.states
    space = ensemble.space

    if spec.lifted:
        if space.kind != "SA":
            raise EnsembleError("lifted quantifiers act on system-ancilla ensembles")
        if channel is not None:
            ext = extend_with_identity(channel, space.dim_a)
            mats = [ext.apply_matrix(m) for m in mats]
        reduced = [partial_trace(m, (space.dim_s, space.dim_a), "first") for m in mats]
        if not _conforms(entry, weights, len(reduced), space.dim_s):
            return 0.0
        return float(entry.core(spec, weights, reduced))

    if entry.space != space.kind:
        raise EnsembleError(
            f"{spec.kind} expects a {entry.space}-space ensemble, got {space.kind}"
        )

    if entry.space == "SA":
        if channel is not None:
            if channel.dim != space.dim_s:
                raise DimensionError("channel dimension does not match the system factor")
            ext = extend_with_identity(channel, space.dim_a)
            mats = [ext.apply_matrix(m) for m in mats]
        if not _conforms(entry, weights, len(mats), space.dim_s):
            return 0.0
        return float(entry.core(spec, weights, mats))

    if channel is not None and channel.dim != space.dim_s:
        raise DimensionError("channel dimension does not match the ensemble")

    if spec.kind == KIND_QFI:
        if not _conforms(entry, weights, len(mats), space.dim_s):
            return 0.0
        apply_fn = channel.apply_matrix if channel is not None else (lambda x: x)
        return _qfi_value(spec, mats[0], apply_fn)

    if spec.kind == KIND_COHERENT_INFO:
        if not _conforms(entry, weights, len(mats), space.dim_s):
            return 0.0
        return _coherent_info_value(spec, mats[0], channel)

    if channel is not None:
        mats = [channel.apply_matrix(m) for m in mats]
    if not _conforms(entry, weights, len(mats), space.dim_s):
        return 0.0
    return float(entry.core(spec, weights, mats))


@dataclass(frozen=True)
class Trajectory:
    """A quantifier evaluated along a time grid for a fixed initial ensemble."""

    times: np.ndarray
    values: np.ndarray
    quantifier: QuantifierSpec
    ensemble_fingerprint: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape:
            raise DimensionError("trajectory times and values must align")
        if not np.all(np.isfinite(v)):
            raise DomainError("trajectory values must be finite")
        if v.size and v.min() < -1e-10:
            raise DomainError(
                f"quantifier trajectories must stay nonnegative, got {v.min():.3e}")
        t = t.copy(); t.flags.writeable = False
        v = v.copy(); v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


def evaluate_trajectory(spec: QuantifierSpec, ensemble: Ensemble,
                        family: DynamicalMapFamily, grid: TimeGrid) -> Trajectory:
    """Evolve the ensemble along the family and evaluate the quantifier per grid point.

    Forward evolution only: invertibility losses do not block evaluation.
    If the family itself violates complete positivity somewhere on the grid,
    the trajectory carries a warning (values are still computed).
    """
    entry = REGISTRY[spec.kind]
    space = ensemble.space
    if family.dim != space.dim_s:
        raise DimensionError(
            f"family dimension {family.dim} does not match system dimension {space.dim_s}"
        )
    times = grid.times
    n_points = times.size
    weights = ensemble.weights
    mats = np.stack(ensemble.states)

    warnings: list[str] = []
    bad_cp = family.cp_violation_times(times)
    if bad_cp:
        warnings.append(
            f"family violates complete positivity at {len(bad_cp)} grid point(s), "
            f"first at t={bad_cp[0]:.6g}"
        )

    superops = family.superops_on_grid(times)

    if spec.lifted or entry.space == "SA":
        if space.kind != "SA":
            raise EnsembleError(f"{spec.label()} needs a system-ancilla ensemble")
        ext = extend_superops_batch(superops, space.dim_s, space.dim_a)
        evolved = _apply_superop_stack(ext, mats)
        if spec.lifted:
            evolved = _partial_trace_batch(evolved, space.dim_s, space.dim_a, "first")
        values = _values_from_stack(entry, spec, weights, evolved, space.dim_s)
    elif spec.kind == KIND_QFI:
        if not _conforms(entry, weights, len(mats), space.dim_s):
            values = np.zeros(n_points)
        else:
            values = _qfi_trajectory(spec, mats[0], superops, family.dim)
    elif spec.kind == KIND_COHERENT_INFO:
        if not _conforms(entry, weights, len(mats), space.dim_s):
            values = np.zeros(n_points)
        else:
            values = _coherent_info_trajectory(spec, mats[0], superops, family.dim)
    else:
        if space.kind != "S":
            raise EnsembleError(f"{spec.kind} expects a system-space ensemble")
        evolved = _apply_superop_stack(superops, mats)
        values = _values_from_stack(entry, spec, weights, evolved, space.dim_s)

    return Trajectory(times=times, values=np.asarray(values, dtype=float),
                      quantifier=spec, ensemble_fingerprint=ensemble.fingerprint(),
                      warnings=tuple(warnings))


def _values_from_stack(entry, spec, weights, evolved, dim_s) -> np.ndarray:
    n_points, n_members = evolved.shape[0], evolved.shape[1]
    if not _conforms(entry, weights, n_members, dim_s):
        return np.zeros(n_points)
    if entry.batch is not None:
        return np.asarray(entry.batch(spec, weights, evolved), dtype=float)
    return np.array([
        entry.core(spec, weights, [evolved[k, m] for m in range(n_members)])
        for k in range(n_points)
    ])


def _qfi_trajectory(spec, rho, superops, dim) -> np.ndarray:
    gen = spec.generator_matrix()
    thetas = [0.0, spec.dtheta, spec.dtheta / 2.0]
    base = []
    for th in thetas:
        u = _unitary_from_generator(gen, th)
        base.append(u @ rho @ u.conj().T)
    evolved = _apply_superop_stack(superops, np.stack(base))
    n_points = evolved.shape[0]
    out = np.empty(n_points)
    h = spec.dtheta
    for k in range(n_points):
        f1 = 8.0 * bures_gap(evolved[k, 0], evolved[k, 1]) / h**2
        if spec.richardson:
            f2 = 8.0 * bures_gap(evolved[k, 0], evolved[k, 2]) / (h / 2.0) ** 2
            out[k] = (4.0 * f2 - f1) / 3.0
        else:
            out[k] = f1
    return out


def _coherent_info_trajectory(spec, rho, superops, dim) -> np.ndarray:
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    psi = (v * np.sqrt(w)).reshape(-1)
    joint = np.outer(psi, psi.conj())
    ext = extend_superops_batch(superops, dim, dim)
    out = _apply_superop_stack(superops, rho[None])[:, 0]
    out_joint = _apply_superop_stack(ext, joint[None])[:, 0]
    return _entropy_batch(out) - _entropy_batch(out_joint) + np.log(dim)


def lift_s_to_sa(spec: QuantifierSpec) -> QuantifierSpec:
    """Lift a system-space quantifier to the joint space via reduced states.

    The lifted quantifier evaluates the original one on the partial traces of
    the joint ensemble, so its trajectories reproduce the reduced-state
    trajectories exactly.
    """
    if spec.lifted:
        return spec
    return replace(spec, lifted=True)
