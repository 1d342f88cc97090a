"""Markovianity criteria and non-Markovianity measures for dynamical-map families.

Divisibility checks build intermediate maps between adjacent grid times and
test complete positivity (Choi spectrum) or positivity (sampled pure inputs).
The joint-space trace-distance check evolves random weighted state pairs with
an equal-dimension ancilla attached and looks for any growth.

Sampled verdicts are evidence over the sampling budget, not certificates;
every report records its counts, seeds and tolerances. Grid points where the
family loses invertibility are excluded (with a one-step neighbourhood) from
divisibility checks and listed in the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import extend_superops_batch, intermediate_map, unvec_batch, vec_batch
from .dynamics import DynamicalMapFamily, InvertibilityScan, TimeGrid, invertibility_scan
from .errors import (
    AnalysisError,
    DimensionError,
    InconsistencyError,
    InvertibilityError,
    ParameterError,
)
from .linalg import random_state, trace_norm
from .quantifiers import REGISTRY, Trajectory, default_spec, evaluate_trajectory

DEFAULT_CP_TOL = 1e-10
DEFAULT_PDIV_TOL = 1e-9
DEFAULT_MONO_TOL = 1e-7
DEFAULT_INV_SCAN_TOL = 0.0

SAMPLING_CAVEAT = (
    "sampled verdict: evidence over the stated budget, not a certificate"
)


@dataclass
class MarkovReport:
    """Verdict of one Markovianity criterion on one family/grid (or trajectory)."""

    criterion: str
    verdict: bool
    witness: tuple[float, float, float] | None = None  # (s, t, value)
    violation_intervals: list[tuple[float, float]] = field(default_factory=list)
    measure_N: float | None = None
    excluded_times: list[float] = field(default_factory=list)
    step_times: np.ndarray | None = None
    step_witness: np.ndarray | None = None
    step_ok: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.verdict and self.witness is None:
            raise AnalysisError("a failing verdict must carry a witness")
        if self.measure_N is not None and self.measure_N < 0:
            raise AnalysisError("the backflow measure cannot be negative")


def _excluded_steps(scan: InvertibilityScan, n_steps: int) -> np.ndarray:
    """Steps touching a flagged grid point, widened by one grid step each side."""
    excluded = np.zeros(n_steps, dtype=bool)
    for i in np.nonzero(scan.flags)[0]:
        lo = max(i - 2, 0)
        hi = min(i + 1, n_steps - 1)
        excluded[lo:hi + 1] = True
    return excluded


def check_cpd(family: DynamicalMapFamily, grid: TimeGrid,
              tol: float = DEFAULT_CP_TOL,
              inv_tol: float = 1e-10,
              inv_scan_tol: float = DEFAULT_INV_SCAN_TOL) -> MarkovReport:
    """CP-divisibility scan: every adjacent-step intermediate map must have a PSD Choi."""
    times = grid.times
    n_steps = times.size - 1
    scan = invertibility_scan(family, grid, tol=inv_scan_tol)
    excluded = _excluded_steps(scan, n_steps)

    step_witness = np.full(n_steps, np.nan)
    step_ok = np.ones(n_steps, dtype=bool)
    witness = None
    worst = np.inf
    channels = [family.channel_at(t) for t in times]
    for k in range(n_steps):
        if excluded[k]:
            continue
        try:
            v = intermediate_map(channels[k + 1], channels[k], inv_tol=inv_tol)
        except InvertibilityError:
            excluded[k] = True
            continue
        j = v.choi
        min_eig = float(np.linalg.eigvalsh((j + j.conj().T) / 2)[0])
        step_witness[k] = min_eig
        if min_eig < -tol:
            step_ok[k] = False
            if min_eig < worst:
                worst = min_eig
                witness = (float(times[k]), float(times[k + 1]), min_eig)
    if excluded.all():
        raise AnalysisError("no invertible step available for the divisibility check")
    verdict = bool(step_ok[~excluded].all())
    return MarkovReport(
        criterion="CPD",
        verdict=verdict,
        witness=witness,
        violation_intervals=_intervals_from_flags(times[1:], ~step_ok),
        excluded_times=scan.flagged_times,
        step_times=times[1:].copy(),
        step_witness=step_witness,
        step_ok=step_ok,
        meta={"tol": tol, "inv_tol": inv_tol, "inv_scan_tol": inv_scan_tol,
              "excluded_steps": int(excluded.sum())},
    )


def _min_eig_batch(stack: np.ndarray) -> np.ndarray:
    h = (stack + stack.conj().swapaxes(-1, -2)) / 2
    return np.linalg.eigvalsh(h)[..., 0]


def check_p_divisibility(family: DynamicalMapFamily, grid: TimeGrid,
                         samples: int = 2000,
                         tol: float = DEFAULT_PDIV_TOL,
                         seed: int = 0,
                         inv_tol: float = 1e-10,
                         inv_scan_tol: float = DEFAULT_INV_SCAN_TOL) -> MarkovReport:
    """Positivity scan of intermediate maps over Haar-random pure inputs."""
    if samples < 1:
        raise ParameterError("sample count must be positive")
    times = grid.times
    n_steps = times.size - 1
    d = family.dim
    scan = invertibility_scan(family, grid, tol=inv_scan_tol)
    excluded = _excluded_steps(scan, n_steps)

    seeds = np.random.SeedSequence(seed).spawn(n_steps)
    step_witness = np.full(n_steps, np.nan)
    step_ok = np.ones(n_steps, dtype=bool)
    witness = None
    worst = np.inf
    channels = [family.channel_at(t) for t in times]
    for k in range(n_steps):
        if excluded[k]:
            continue
        try:
            v = intermediate_map(channels[k + 1], channels[k], inv_tol=inv_tol)
        except InvertibilityError:
            excluded[k] = True
            continue
        rng = np.random.default_rng(seeds[k])
        amp = rng.standard_normal((samples, d)) + 1j * rng.standard_normal((samples, d))
        amp /= np.linalg.norm(amp, axis=1, keepdims=True)
        pure = np.einsum("ni,nj->nij", amp, amp.conj())
        out = unvec_batch(vec_batch(pure) @ v.superop.T, d)
        min_eig = float(_min_eig_batch(out).min())
        step_witness[k] = min_eig
        if min_eig < -tol:
            step_ok[k] = False
            if min_eig < worst:
                worst = min_eig
                witness = (float(times[k]), float(times[k + 1]), min_eig)
    if excluded.all():
        raise AnalysisError("no invertible step available for the positivity check")
    verdict = bool(step_ok[~excluded].all())
    return MarkovReport(
        criterion="PD",
        verdict=verdict,
        witness=witness,
        violation_intervals=_intervals_from_flags(times[1:], ~step_ok),
        excluded_times=scan.flagged_times,
        step_times=times[1:].copy(),
        step_witness=step_witness,
        step_ok=step_ok,
        meta={"tol": tol, "samples": samples, "seed": seed,
              "caveat": SAMPLING_CAVEAT, "excluded_steps": int(excluded.sum())},
    )


def check_gtde(family: DynamicalMapFamily, grid: TimeGrid,
               trials: int = 500, seed: int = 0,
               tol: float = DEFAULT_MONO_TOL,
               chunk: int = 64,
               inv_scan_tol: float = DEFAULT_INV_SCAN_TOL) -> MarkovReport:
    """Joint-space trace-distance monotonicity over random weighted state pairs.

    The ancilla has the system's dimension. Each trial evolves a Helstrom
    operator ``p xi_1 - (1-p) xi_2`` under family (x) identity and flags any
    relative trace-norm growth above ``tol``. Trials alternate between two
    Helstrom distributions: generic pairs (p uniform, Hilbert-Schmidt-random
    full-rank joint states) and pull-back probes, i.e. equal-weight pairs
    whose evolved operator at a random invertible anchor time is a random
    traceless Hermitian there. The pull-backs follow the existence
    construction behind the divisibility equivalence: without them, strongly
    contracting families hide their violating directions exponentially fast
    and no realistic number of generic draws can find them.
    """
    if trials < 1:
        raise ParameterError("trial count must be positive")
    times = grid.times
    n_points = times.size
    d = family.dim
    dd = d * d
    superops = family.superops_on_grid(times)
    ext = extend_superops_batch(superops, d, d)
    scan = invertibility_scan(family, grid, tol=inv_scan_tol)
    anchor_pool = np.nonzero(~scan.flags)[0]
    anchor_pool = anchor_pool[anchor_pool > 0]

    rng = np.random.default_rng(seed)

    # Per step, track the worst relative increment excess over the threshold.
    step_excess = np.full(n_points - 1, -np.inf)
    witness = None
    first_violation_time = np.inf
    worst_trial = -1
    tiny = 1e-250

    def sample_helstrom(index: int) -> np.ndarray:
        if index % 2 == 0 or anchor_pool.size == 0:
            p = rng.uniform()
            xi1 = random_state(dd, dd, rng).matrix
            xi2 = random_state(dd, dd, rng).matrix
            return p * xi1 - (1.0 - p) * xi2
        k = int(rng.choice(anchor_pool))
        probe = random_state(dd, dd, rng).matrix - random_state(dd, dd, rng).matrix
        h = np.linalg.solve(ext[k], probe.reshape(-1, order="F"))
        h = h.reshape(dd, dd, order="F")
        h = (h + h.conj().T) / 2
        return h / np.abs(np.linalg.eigvalsh(h)).sum()

    done = 0
    while done < trials:
        batch = min(chunk, trials - done)
        hels = np.stack([sample_helstrom(done + b) for b in range(batch)])
        evolved = np.einsum("nij,bj->nbi", ext, vec_batch(hels))
        evolved = unvec_batch(evolved, dd)
        norms = np.abs(np.linalg.eigvalsh(
            (evolved + evolved.conj().swapaxes(-1, -2)) / 2)).sum(axis=-1)  # (N, batch)
        increments = norms[1:] - norms[:-1]
        excess = (increments - tol * norms[:-1]) / np.maximum(norms[:-1], tiny)
        step_excess = np.maximum(step_excess, excess.max(axis=1))
        viol = excess > 0
        if viol.any():
            ks, bs = np.nonzero(viol)
            first = np.argmin(times[ks])
            k, b = int(ks[first]), int(bs[first])
            if times[k] < first_violation_time:
                first_violation_time = times[k]
                dt = times[k + 1] - times[k]
                witness = (float(times[k]), float(times[k + 1]),
                           float(increments[k, b] / dt))
                worst_trial = done + b
        done += batch

    step_ok = step_excess <= 0
    verdict = witness is None
    return MarkovReport(
        criterion="GTDE",
        verdict=verdict,
        witness=witness,
        violation_intervals=_intervals_from_flags(times[1:], ~step_ok),
        excluded_times=scan.flagged_times,
        step_times=times[1:].copy(),
        step_witness=step_excess,
        step_ok=step_ok,
        meta={"tol": tol, "trials": trials, "seed": seed,
              "caveat": SAMPLING_CAVEAT, "violating_trial": worst_trial,
              "sampling": "alternating generic and pull-back Helstrom pairs"},
    )


def _intervals_from_flags(times: np.ndarray, flags: np.ndarray) -> list[tuple[float, float]]:
    """Maximal runs of flagged points as (t_start, t_end) pairs."""
    intervals = []
    start = None
    for t, bad in zip(times, flags):
        if bad and start is None:
            start = float(t)
        elif not bad and start is not None:
            intervals.append((start, float(prev)))
            start = None
        prev = t
    if start is not None:
        intervals.append((start, float(times[-1])))
    return intervals


def monotonicity_report(traj: Trajectory, tol: float = DEFAULT_MONO_TOL) -> MarkovReport:
    """Detect monotonicity violations of a trajectory and integrate the backflow.

    The derivative is estimated by central differences (one-sided at the
    endpoints); a point violates when the derivative exceeds
    ``tol * max(1, |value|)``. The measure is the trapezoidal integral of the
    derivative over violating points, so it vanishes exactly when no point
    violates.
    """
    times = np.asarray(traj.times)
    values = np.asarray(traj.values)
    if times.size < 2:
        raise ParameterError("monotonicity needs at least two samples")
    deriv = np.gradient(values, times)
    thresh = tol * np.maximum(1.0, np.abs(values))
    flags = deriv > thresh
    integrand = np.where(flags, deriv, 0.0)
    measure = float(np.trapezoid(integrand, times))
    witness = None
    if flags.any():
        k = int(np.argmax(deriv - thresh))
        lo = max(k - 1, 0)
        hi = min(k + 1, times.size - 1)
        witness = (float(times[lo]), float(times[hi]), float(deriv[k]))
    return MarkovReport(
        criterion="TrajectoryMonotone",
        verdict=not bool(flags.any()),
        witness=witness,
        violation_intervals=_intervals_from_flags(times, flags),
        measure_N=measure,
        step_times=times.copy(),
        step_witness=deriv,
        step_ok=~flags,
        meta={"tol": tol, "quantifier": traj.quantifier.label(),
              "ensemble": traj.ensemble_fingerprint,
              "warnings": list(traj.warnings)},
    )


def positive_increment_integral(times: np.ndarray, derivative: np.ndarray,
                                lo: int = 0, hi: int | None = None) -> float:
    """Trapezoidal integral of the positive part of a sampled derivative on [lo, hi]."""
    hi = len(times) if hi is None else hi
    seg_t = times[lo:hi]
    seg_d = np.clip(derivative[lo:hi], 0.0, None)
    return float(np.trapezoid(seg_d, seg_t))


@dataclass(frozen=True)
class AlbertiResult:
    feasible_evidence: bool
    worst_ratio: float
    worst_x: float
    skipped_x: tuple[float, ...] = ()
    note: str = ""


def default_alberti_grid() -> np.ndarray:
    return np.concatenate(([0.0, 1.0], np.geomspace(1e-3, 1e3, 64)))


def alberti_check(rho1, rho2, sigma1, sigma2, x_grid=None) -> AlbertiResult:
    """Qubit state-pair transformability evidence via trace-norm contraction.

    A CPTP map sending rho_i to sigma_i exists iff
    ||sigma1 - x sigma2||_1 <= ||rho1 - x rho2||_1 for every x >= 0; this
    checks the ratio on a finite x grid (grid evidence, not a certificate).
    The x -> infinity limit is trivial for trace-preserving candidates and is
    skipped.
    """
    mats = [m.matrix if hasattr(m, "matrix") else np.asarray(m, dtype=complex)
            for m in (rho1, rho2, sigma1, sigma2)]
    if any(m.shape != (2, 2) for m in mats):
        raise DimensionError("the transformability criterion applies to qubit states")
    r1, r2, s1, s2 = mats
    grid = default_alberti_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    if np.any(grid < 0):
        raise ParameterError("x grid must be nonnegative")
    worst_ratio = -np.inf
    worst_x = float("nan")
    skipped = []
    for x in grid:
        num = trace_norm(s1 - x * s2)
        den = trace_norm(r1 - x * r2)
        if den < 1e-12:
            if num > 1e-9:
                return AlbertiResult(False, float("inf"), float(x), tuple(skipped),
                                     "denominator vanishes while numerator does not")
            skipped.append(float(x))
            continue
        ratio = num / den
        if ratio > worst_ratio:
            worst_ratio = ratio
            worst_x = float(x)
    feasible = worst_ratio <= 1.0 + 1e-9
    note = "all grid ratios within tolerance" if feasible else "contraction violated"
    return AlbertiResult(bool(feasible), float(worst_ratio), worst_x, tuple(skipped), note)


@dataclass(frozen=True)
class ClassifyConfig:
    seed: int = 0
    cp_tol: float = DEFAULT_CP_TOL
    pdiv_tol: float = DEFAULT_PDIV_TOL
    mono_tol: float = DEFAULT_MONO_TOL
    inv_scan_tol: float = DEFAULT_INV_SCAN_TOL
    pdiv_samples: int = 2000
    gtde_trials: int = 500
    pq_ensembles: int = 5


@dataclass
class ClassificationReport:
    family_label: str
    criterion_reports: dict
    quantifier_reports: dict
    notes: list[str] = field(default_factory=list)

    def summary_lines(self) -> list[str]:
        lines = [f"classification of family '{self.family_label}'"]
        for name in ("CPD", "PD", "GTDE"):
            rep = self.criterion_reports.get(name)
            if rep is None:
                continue
            status = "Markovian" if rep.verdict else "non-Markovian"
            extra = ""
            if rep.witness is not None:
                s, t, w = rep.witness
                extra = f" (witness {w:.3e} on step [{s:.4g}, {t:.4g}])"
            lines.append(f"  {name:<5} -> {status}{extra}")
            if rep.excluded_times:
                lines.append(
                    f"         excluded {len(rep.excluded_times)} non-invertible grid point(s)"
                )
        for kind, reports in sorted(self.quantifier_reports.items()):
            worst = max((r.measure_N or 0.0) for r in reports)
            mono = all(r.verdict for r in reports)
            status = "monotone" if mono else f"backflow (max N = {worst:.3e})"
            lines.append(f"  quantifier {kind:<13} -> {status} over {len(reports)} ensembles")
        lines.extend(f"  note: {n}" for n in self.notes)
        return lines


def classify(family: DynamicalMapFamily, grid: TimeGrid,
             config: ClassifyConfig = ClassifyConfig()) -> ClassificationReport:
    """Run every criterion plus per-quantifier trajectory checks on fuzzed ensembles.

    Cross-criterion consistency is asserted: CP-divisibility forces every
    quantifier trajectory to be monotone, and a joint-space trace-distance
    violation forces the CP-divisibility verdict to be negative (invertible
    scans). Disagreement raises, because it means a tolerance or harness bug
    rather than physics.
    """
    cpd = check_cpd(family, grid, tol=config.cp_tol, inv_scan_tol=config.inv_scan_tol)
    pdiv = check_p_divisibility(
        family, grid, samples=config.pdiv_samples, tol=config.pdiv_tol,
        seed=config.seed + 1, inv_scan_tol=config.inv_scan_tol)
    gtde = check_gtde(family, grid, trials=config.gtde_trials,
                      seed=config.seed + 2, tol=config.mono_tol)

    rng = np.random.default_rng(config.seed + 3)
    pq_reports: dict[str, list[MarkovReport]] = {}
    for kind, entry in REGISTRY.items():
        spec = default_spec(kind)
        reports = []
        for _ in range(config.pq_ensembles):
            ens = entry.sampler(rng)
            traj = evaluate_trajectory(spec, ens, family, grid)
            reports.append(monotonicity_report(traj, tol=config.mono_tol))
        pq_reports[kind] = reports

    notes = []
    invertible_scan = not cpd.excluded_times
    if cpd.verdict:
        for kind, reports in pq_reports.items():
            bad = [r for r in reports if not r.verdict]
            if bad:
                raise InconsistencyError(
                    f"CP-divisible family shows a non-monotone {kind} trajectory "
                    f"(N = {bad[0].measure_N:.3e}); tolerances or harness are inconsistent"
                )
    if not gtde.verdict and invertible_scan and cpd.verdict:
        raise InconsistencyError(
            "joint-space trace distance grew on an invertible CP-divisible scan"
        )
    if gtde.verdict and not cpd.verdict:
        notes.append(
            "CPD violation not found by the sampled joint-space check "
            f"({gtde.meta['trials']} trials); sampling evidence only"
        )
    if not invertible_scan:
        notes.append(
            "family loses invertibility on this grid; divisibility equivalences "
            "apply only away from the excluded instants"
        )
    notes.append("'Markovian' verdicts are evidence over the registered quantifier "
                 "set and fuzz budget, not proofs")

    return ClassificationReport(
        family_label=family.label,
        criterion_reports={"CPD": cpd, "PD": pdiv, "GTDE": gtde},
        quantifier_reports=pq_reports,
        notes=notes,
    )


__all__ = [
    "AlbertiResult",
    "ClassificationReport",
    "ClassifyConfig",
    "MarkovReport",
    "alberti_check",
    "check_cpd",
    "check_gtde",
    "check_p_divisibility",
    "classify",
    "default_alberti_grid",
    "monotonicity_report",
    "positive_increment_integral",
]
