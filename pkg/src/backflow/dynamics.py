"""Time-parametrized families of qubit dynamical maps.

Random-unitary (Pauli) dynamics ``L_t[rho] = sum_a r_a(t) sigma_a rho sigma_a``
is diagonal in the Pauli operator basis, ``L_t[sigma_k] = lam_k(t) sigma_k``.
Probabilities and eigenvalues are related through the 4x4 Hadamard-type
matrix ``H``: ``lam = H r`` and ``r = H lam / 4``. Rate functions enter via
``lam_1 = exp(-2[G_2 + G_3])`` (and cyclic), with ``G_k(t)`` the integral of
``gamma_k`` from 0 to ``t``, computed by adaptive Simpson quadrature unless a
closed form is registered.

Families are immutable; evaluation at a time point is pure, so grid sweeps
can run point-parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import QuantumChannel, vec
from .errors import (
    DimensionError,
    DomainError,
    IntegrationError,
    InterpolationError,
    ParameterError,
    SingularRateError,
)
from .linalg import PAULIS

HADAMARD4 = np.array(
    [
        [1, 1, 1, 1],
        [1, 1, -1, -1],
        [1, -1, 1, -1],
        [1, -1, -1, 1],
    ],
    dtype=float,
)

PROB_NEG_TOL = 1e-12
PROB_SUM_TOL = 1e-9

# Rank-one projectors |vec(sigma_a)><vec(sigma_a)| / 2: the Pauli superoperator
# eigenbasis in column-stacking convention.
_PAULI_VEC = np.stack([vec(p) for p in PAULIS])
_PAULI_PROJ = np.einsum("ai,aj->aij", _PAULI_VEC, _PAULI_VEC.conj()) / 2.0


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature with absolute tolerance."""
    if a == b:
        return 0.0

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, eps, depth):
        xm = 0.5 * (x0 + x2)
        xl, xr = 0.5 * (x0 + xm), 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise IntegrationError(
                f"quadrature did not converge on [{x0:.6g}, {x2:.6g}] at depth {depth}"
            )
        return (
            recurse(x0, xm, f0, fl, f1, left, eps / 2.0, depth + 1)
            + recurse(xm, x2, f1, fr, f2, right, eps / 2.0, depth + 1)
        )

    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


@dataclass(frozen=True)
class RateFunctions:
    """Pauli master-equation rates gamma_1..3(t), with optional closed-form integrals."""

    gamma1: Callable[[float], float]
    gamma2: Callable[[float], float]
    gamma3: Callable[[float], float]
    integrated: tuple[Callable[[float], float], ...] | None = None

    def rates(self):
        return (self.gamma1, self.gamma2, self.gamma3)


@dataclass(frozen=True)
class ProbabilityFunctions:
    """Pauli mixing probabilities r_0..3(t)."""

    r0: Callable[[float], float]
    r1: Callable[[float], float]
    r2: Callable[[float], float]
    r3: Callable[[float], float]

    def probs(self):
        return (self.r0, self.r1, self.r2, self.r3)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time points starting at 0."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ParameterError("time grid needs at least two points")
        if t[0] != 0.0:
            raise ParameterError(f"time grid must start at 0, got {t[0]}")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("time grid must be strictly increasing")
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @staticmethod
    def linspace(t_end: float, points: int) -> "TimeGrid":
        if t_end <= 0:
            raise ParameterError(f"t_end must be positive, got {t_end}")
        return TimeGrid(np.linspace(0.0, t_end, points))

    def __len__(self):
        return self.times.size


def lambda_from_rates(rates: RateFunctions, t: float,
                      quad_tol: float = 1e-10) -> tuple[float, float, float]:
    """Channel eigenvalues (lam_1, lam_2, lam_3) from rate functions at time t."""
    if t < 0:
        raise ParameterError(f"time must be nonnegative, got {t}")
    if rates.integrated is not None:
        g1, g2, g3 = (g(t) for g in rates.integrated)
    else:
        g1, g2, g3 = (
            adaptive_simpson(g, 0.0, float(t), tol=quad_tol) for g in rates.rates()
        )
    return (
        float(np.exp(-2.0 * (g2 + g3))),
        float(np.exp(-2.0 * (g1 + g3))),
        float(np.exp(-2.0 * (g1 + g2))),
    )


def probs_to_lambda(r: np.ndarray) -> np.ndarray:
    """lam = H r (last axis)."""
    return np.asarray(r) @ HADAMARD4.T


def lambda_to_probs(lam: np.ndarray) -> np.ndarray:
    """r = H lam / 4 (last axis)."""
    return np.asarray(lam) @ HADAMARD4.T / 4.0


def _validated_probs(values: np.ndarray, t) -> np.ndarray:
    r = np.asarray(values, dtype=float)
    if np.any(r < -PROB_NEG_TOL):
        raise DomainError(
            f"probability {r.min():.3e} below tolerance at t={t}; not a probability vector"
        )
    if np.any(np.abs(r.sum(axis=-1) - 1.0) > PROB_SUM_TOL):
        raise DomainError(f"probabilities do not sum to 1 at t={t}")
    return np.clip(r, 0.0, None)


def lambda_from_probs(probs: ProbabilityFunctions, t: float) -> tuple[float, ...]:
    """Channel eigenvalues (lam_0..lam_3) from probability functions at time t."""
    if t < 0:
        raise ParameterError(f"time must be nonnegative, got {t}")
    r = _validated_probs(np.array([p(t) for p in probs.probs()], dtype=float), t)
    lam = probs_to_lambda(r)
    return tuple(float(x) for x in lam)


def gamma_from_lambda(lams: Callable[[float], Sequence[float]], t: float,
                      lams_dot: Callable[[float], Sequence[float]] | None = None,
                      zero_tol: float = 1e-12,
                      fd_step: float = 1e-6) -> tuple[float, float, float, float]:
    """Master-equation rates gamma_0..3 from the eigenvalue functions.

    gamma_i = (1/4) sum_j H_ij lam_dot_j / lam_j. The derivative is taken by
    central difference with step ``fd_step * max(1, |t|)`` unless an analytic
    derivative is supplied. Vanishing eigenvalues mean the dynamics is not
    invertible at t and the rates are singular.
    """
    lam = np.asarray(lams(t), dtype=float)
    if np.any(np.abs(lam) < zero_tol):
        raise SingularRateError(
            f"channel eigenvalue vanishes at t={t}; rates are singular there"
        )
    if lams_dot is not None:
        dlam = np.asarray(lams_dot(t), dtype=float)
    else:
        h = fd_step * max(1.0, abs(t))
        dlam = (np.asarray(lams(t + h), dtype=float) - np.asarray(lams(t - h), dtype=float)) / (2 * h)
    gammas = 0.25 * (HADAMARD4 @ (dlam / lam))
    return tuple(float(g) for g in gammas)


def pauli_superop(lam: np.ndarray) -> np.ndarray:
    """Superoperator of the Pauli channel with eigenvalue vector lam (shape (..., 4))."""
    return np.einsum("...a,aij->...ij", np.asarray(lam), _PAULI_PROJ)


def pauli_channel(lam) -> QuantumChannel:
    """Qubit Pauli channel from its four eigenvalues (lam_0 must be 1).

    Trace preservation is structural; complete positivity holds exactly when
    the mixing probabilities r = H lam / 4 are all nonnegative, in which case
    a Kraus form sqrt(r_a) sigma_a is attached.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (4,):
        raise ParameterError("Pauli channel needs 4 eigenvalues")
    if abs(lam[0] - 1.0) > 1e-12:
        raise DomainError(f"lam_0 must be 1 for a trace-preserving Pauli channel, got {lam[0]}")
    r = lambda_to_probs(lam)
    min_r = float(r.min())
    cp = min_r >= -PROB_NEG_TOL
    if cp:
        r = np.clip(r, 0.0, None)
        kraus = [np.sqrt(w) * p for w, p in zip(r, PAULIS) if w > 0.0]
        ch = QuantumChannel(2, kraus=kraus, superop=pauli_superop(lam),
                            cp=True, tp=True, tp_residual=0.0)
    else:
        ch = QuantumChannel(2, superop=pauli_superop(lam), cp=False, tp=True,
                            min_choi_eig=2.0 * min_r, tp_residual=0.0)
    return ch


class DynamicalMapFamily:
    """A map t -> quantum channel, from Pauli rates/probabilities or an explicit grid."""

    def __init__(self, kind: str, dim: int, *, lambda_fn=None, lambda_dot_fn=None,
                 probs_fn=None, rates: RateFunctions | None = None,
                 grid_times=None, grid_channels=None, label: str = "",
                 default_window: float = 10.0):
        self.kind = kind
        self.dim = dim
        self._lambda_fn = lambda_fn
        self._lambda_dot_fn = lambda_dot_fn
        self._probs_fn = probs_fn
        self.rates = rates
        self._grid_times = None if grid_times is None else np.asarray(grid_times, dtype=float)
        self._grid_channels = None if grid_channels is None else list(grid_channels)
        self.label = label or kind
        self.default_window = default_window

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_rates(cls, rates: RateFunctions, label: str = "pauli-rates",
                   quad_tol: float = 1e-10) -> "DynamicalMapFamily":
        def lam(t):
            l1, l2, l3 = lambda_from_rates(rates, float(t), quad_tol=quad_tol)
            return np.array([1.0, l1, l2, l3])

        return cls("pauli_rates", 2, lambda_fn=lam, rates=rates, label=label)

    @classmethod
    def from_probs(cls, probs: ProbabilityFunctions,
                   label: str = "pauli-probs") -> "DynamicalMapFamily":
        if abs(probs.r0(0.0) - 1.0) > 1e-9:
            raise DomainError("probability dynamics must start from the identity: r0(0) = 1")

        def lam(t):
            return np.asarray(lambda_from_probs(probs, float(t)))

        return cls("pauli_probs", 2, lambda_fn=lam, probs_fn=probs, label=label)

    @classmethod
    def from_channel_grid(cls, times, channels, label: str = "channel-grid") -> "DynamicalMapFamily":
        times = np.asarray(times, dtype=float)
        channels = list(channels)
        if times.size != len(channels) or times.size < 1:
            raise ParameterError("channel grid needs one channel per time point")
        if times[0] != 0.0:
            raise ParameterError("channel grid must start at t=0")
        dim = channels[0].dim
        if any(c.dim != dim for c in channels):
            raise DimensionError("all grid channels must share a dimension")
        ident = np.eye(dim * dim)
        if np.max(np.abs(channels[0].superop - ident)) > 1e-9:
            raise DomainError("channel at t=0 must be the identity map")
        return cls("channel_grid", dim, grid_times=times, grid_channels=channels, label=label)

    # -- evaluation --------------------------------------------------------

    def lambda_at(self, t) -> np.ndarray:
        """Pauli eigenvalues (lam_0..lam_3); vectorized over an array of times."""
        if self._lambda_fn is None:
            raise ParameterError("explicit channel grids do not expose Pauli eigenvalues")
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self._lambda_fn(float(t))
        return np.stack([self._lambda_fn(float(x)) for x in t])

    def lambda_dot_at(self, t) -> np.ndarray | None:
        if self._lambda_dot_fn is None:
            return None
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self._lambda_dot_fn(float(t))
        return np.stack([self._lambda_dot_fn(float(x)) for x in t])

    def probs_at(self, t) -> np.ndarray:
        return lambda_to_probs(self.lambda_at(t))

    def _grid_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self._grid_times - t)))
        if abs(self._grid_times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise InterpolationError(
                f"t={t} is not a stored grid time; channel grids are not interpolated"
            )
        return idx

    def channel_at(self, t: float) -> QuantumChannel:
        if t < 0:
            raise ParameterError(f"time must be nonnegative, got {t}")
        if self.kind == "channel_grid":
            return self._grid_channels[self._grid_index(float(t))]
        return pauli_channel(self.lambda_at(float(t)))

    def superops_on_grid(self, times) -> np.ndarray:
        """Stack of superoperators for all grid times, shape (N, d^2, d^2)."""
        times = np.asarray(times, dtype=float)
        if self.kind == "channel_grid":
            return np.stack([self._grid_channels[self._grid_index(float(t))].superop
                             for t in times])
        return pauli_superop(self.lambda_at(times)).astype(complex)

    def invertibility_witness(self, times) -> np.ndarray:
        """min_k |lam_k| for Pauli sources, else smallest singular value per grid channel."""
        times = np.asarray(times, dtype=float)
        if self.kind == "channel_grid":
            return np.array(
                [np.linalg.svd(self._grid_channels[self._grid_index(float(t))].superop,
                               compute_uv=False)[-1] for t in times]
            )
        lam = self.lambda_at(times)
        return np.min(np.abs(lam[..., 1:]), axis=-1)

    def cp_violation_times(self, times, tol: float = PROB_NEG_TOL) -> list[float]:
        """Grid times where the family itself fails complete positivity."""
        times = np.asarray(times, dtype=float)
        if self.kind == "channel_grid":
            out = []
            for t in times:
                ch = self._grid_channels[self._grid_index(float(t))]
                w = np.linalg.eigvalsh((ch.choi + ch.choi.conj().T) / 2)
                if w[0] < -tol * 100:
                    out.append(float(t))
            return out
        r = lambda_to_probs(self.lambda_at(times))
        bad = r.min(axis=-1) < -tol
        return [float(t) for t in times[bad]]

    def __repr__(self):
        return f"DynamicalMapFamily({self.label!r}, kind={self.kind}, dim={self.dim})"


@dataclass(frozen=True)
class InvertibilityScan:
    """Per-grid-point invertibility witnesses with flagged (near-)singular instants."""

    times: np.ndarray
    witnesses: np.ndarray
    flags: np.ndarray

    @property
    def flagged_times(self) -> list[float]:
        return [float(t) for t in self.times[self.flags]]


def invertibility_scan(family: DynamicalMapFamily, grid: TimeGrid,
                       tol: float = 0.0) -> InvertibilityScan:
    """Locate grid points where the family genuinely loses invertibility.

    A point is flagged when its witness drops below ``tol``, when it is an
    exact zero, or, for Pauli sources, when some eigenvalue changes sign
    across a neighbouring grid point (a zero crossing then lies inside the
    step; the endpoint closer to zero is flagged). The default ``tol = 0``
    deliberately ignores mere ill-conditioning: exponentially decaying but
    strictly positive eigenvalues are invertible, and downstream consumers
    guard ill-conditioned inversions with their own singular-value floors.
    """
    times = grid.times
    witnesses = family.invertibility_witness(times)
    flags = (witnesses < tol) | (witnesses == 0.0)
    if family.kind != "channel_grid":
        lam = family.lambda_at(times)[:, 1:]
        sign_change = lam[:-1] * lam[1:] < 0
        for k, row in enumerate(sign_change):
            # a zero crossing lies inside step k; flag the endpoint nearer it
            for comp in np.nonzero(row)[0]:
                if abs(lam[k, comp]) <= abs(lam[k + 1, comp]):
                    flags[k] = True
                else:
                    flags[k + 1] = True
    return InvertibilityScan(times=times, witnesses=witnesses, flags=flags)


def _example1_family() -> DynamicalMapFamily:
    rates = RateFunctions(
        gamma1=lambda t: 1.0,
        gamma2=lambda t: 1.0,
        gamma3=np.sin,
        integrated=(lambda t: t, lambda t: t, lambda t: 1.0 - np.cos(t)),
    )

    def lam(t):
        l12 = np.exp(-2.0 * (1.0 + t - np.cos(t)))
        return np.array([1.0, l12, l12, np.exp(-4.0 * t)])

    def lam_dot(t):
        l12 = np.exp(-2.0 * (1.0 + t - np.cos(t)))
        return np.array([0.0, -2.0 * (1.0 + np.sin(t)) * l12,
                         -2.0 * (1.0 + np.sin(t)) * l12, -4.0 * np.exp(-4.0 * t)])

    return DynamicalMapFamily("pauli_rates", 2, lambda_fn=lam, lambda_dot_fn=lam_dot,
                              rates=rates, label="example1", default_window=10.0)


def _example2_family(r0, r0_dot, label: str, window: float) -> DynamicalMapFamily:
    probs = ProbabilityFunctions(
        r0=r0,
        r1=lambda t: (1.0 - r0(t)) / 4.0,
        r2=lambda t: (1.0 - r0(t)) / 4.0,
        r3=lambda t: (1.0 - r0(t)) / 2.0,
    )

    def lam(t):
        v = r0(t)
        return np.array([1.0, (3.0 * v - 1.0) / 2.0, (3.0 * v - 1.0) / 2.0, v])

    def lam_dot(t):
        dv = r0_dot(t)
        return np.array([0.0, 1.5 * dv, 1.5 * dv, dv])

    fam = DynamicalMapFamily("pauli_probs", 2, lambda_fn=lam, lambda_dot_fn=lam_dot,
                             probs_fn=probs, label=label, default_window=window)
    return fam


def preset(name: str) -> DynamicalMapFamily:
    """Built-in random-unitary families with registered closed-form eigenvalues.

    * ``example1``: rates (1, 1, sin t); eigenvalues exp(-2(1+t-cos t)),
      same, exp(-4t).
    * ``example2_exp``: mixing probabilities driven by r0(t) = exp(-t); loses
      invertibility at t = ln 3.
    * ``example2_cos``: r0(t) = (1 + cos t)/2; eigenvalue revivals on (0, 2*pi).
    """
    if name == "example1":
        return _example1_family()
    if name == "example2_exp":
        return _example2_family(lambda t: np.exp(-t), lambda t: -np.exp(-t),
                                "example2_exp", 10.0)
    if name == "example2_cos":
        return _example2_family(lambda t: (1.0 + np.cos(t)) / 2.0,
                                lambda t: -np.sin(t) / 2.0,
                                "example2_cos", 2.0 * np.pi)
    raise ParameterError(f"unknown preset {name!r}")


def channel_at(family: DynamicalMapFamily, t: float) -> QuantumChannel:
    return family.channel_at(t)
