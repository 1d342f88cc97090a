"""Scenario configuration: a single TOML file describing dynamics, ensembles,
quantifiers, grids and analysis requests.

Qubit ensemble states follow the spherical Bloch convention
``n = (s sin(theta) cos(phi), s sin(theta) sin(phi), s cos(theta))`` entered
as ``[s, theta, phi]`` triples; arbitrary states can be given as explicit
matrices of ``[re, im]`` pairs. Explicit channel grids load from ``.npz``
files with arrays ``times`` (N,) and ``superops`` (N, d^2, d^2),
column-stacking convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .channels import QuantumChannel
from .dynamics import DynamicalMapFamily, ProbabilityFunctions, RateFunctions, TimeGrid
from .errors import BackflowError, ConfigError
from .exprparse import parse_expr
from .linalg import DensityMatrix, Ensemble, Space, bloch_vector, qubit_from_bloch
from .quantifiers import REGISTRY, QuantifierSpec

VALID_ANALYSES = ("trajectories", "cpd", "pdiv", "gtde", "classify")


@dataclass(frozen=True)
class Tolerances:
    cp: float = 1e-10
    pdiv: float = 1e-9
    monotonicity: float = 1e-7
    inv_scan: float = 0.0


@dataclass(frozen=True)
class SamplingBudget:
    pdiv_samples: int = 2000
    gtde_trials: int = 500
    pq_ensembles: int = 5


@dataclass(frozen=True)
class ScenarioConfig:
    label: str
    family: DynamicalMapFamily
    grid: TimeGrid
    ensembles: tuple[Ensemble, ...]
    quantifiers: tuple[QuantifierSpec, ...]
    analyses: tuple[str, ...]
    seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)
    sampling: SamplingBudget = field(default_factory=SamplingBudget)


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing key {key!r} in [{where}]")
    return table[key]


def _parse_dynamics(table: dict, base: Path) -> DynamicalMapFamily:
    if "preset" in table:
        from .dynamics import preset

        try:
            return preset(str(table["preset"]))
        except BackflowError as exc:
            raise ConfigError(str(exc)) from exc
    source = _require(table, "source", "dynamics")
    try:
        if source == "pauli-rates":
            rates = RateFunctions(
                gamma1=parse_expr(str(_require(table, "gamma1", "dynamics"))),
                gamma2=parse_expr(str(_require(table, "gamma2", "dynamics"))),
                gamma3=parse_expr(str(_require(table, "gamma3", "dynamics"))),
            )
            return DynamicalMapFamily.from_rates(rates, label="pauli-rates")
        if source == "pauli-probs":
            probs = ProbabilityFunctions(
                r0=parse_expr(str(_require(table, "r0", "dynamics"))),
                r1=parse_expr(str(_require(table, "r1", "dynamics"))),
                r2=parse_expr(str(_require(table, "r2", "dynamics"))),
                r3=parse_expr(str(_require(table, "r3", "dynamics"))),
            )
            return DynamicalMapFamily.from_probs(probs, label="pauli-probs")
        if source == "channel-grid":
            path = base / str(_require(table, "file", "dynamics"))
            if not path.exists():
                raise ConfigError(f"channel grid file {path} does not exist")
            data = np.load(path)
            if "times" not in data or "superops" not in data:
                raise ConfigError("channel grid file needs arrays 'times' and 'superops'")
            channels = [QuantumChannel.from_superop(s) for s in data["superops"]]
            return DynamicalMapFamily.from_channel_grid(data["times"], channels,
                                                        label=path.stem)
    except BackflowError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown dynamics source {source!r}")


def _state_from_entry(entry, index: int) -> DensityMatrix:
    if isinstance(entry, (list, tuple)) and len(entry) == 3 and all(
            isinstance(x, (int, float)) for x in entry):
        s, theta, phi = (float(x) for x in entry)
        if not 0.0 <= s <= 1.0:
            raise ConfigError(f"Bloch length must lie in [0, 1], got {s} (state {index})")
        return qubit_from_bloch(bloch_vector(s, theta, phi))
    raise ConfigError(f"state {index} is not a [s, theta, phi] triple")


def _matrix_from_entry(entry, index: int) -> DensityMatrix:
    try:
        rows = [[complex(float(cell[0]), float(cell[1])) for cell in row] for row in entry]
        return DensityMatrix(np.array(rows, dtype=complex))
    except BackflowError as exc:
        raise ConfigError(f"state {index} is not a valid density matrix: {exc}") from exc
    except (TypeError, IndexError, ValueError) as exc:
        raise ConfigError(
            f"state {index}: matrices are nested rows of [re, im] pairs ({exc})") from exc


def _parse_ensemble(table: dict, index: int) -> Ensemble:
    weights = _require(table, "weights", f"ensembles[{index}]")
    states: list[DensityMatrix] = []
    if "bloch" in table:
        states = [_state_from_entry(e, i) for i, e in enumerate(table["bloch"])]
    elif "matrices" in table:
        states = [_matrix_from_entry(e, i) for i, e in enumerate(table["matrices"])]
    else:
        raise ConfigError(f"ensemble {index} needs 'bloch' or 'matrices' states")
    if len(weights) != len(states):
        raise ConfigError(f"ensemble {index}: {len(weights)} weights for {len(states)} states")
    if "dims" in table:
        ds, da = (int(x) for x in table["dims"])
        space = Space.system_ancilla(ds, da)
    else:
        space = Space.system(states[0].dim)
    try:
        return Ensemble(space, tuple((float(w), s) for w, s in zip(weights, states)))
    except BackflowError as exc:
        raise ConfigError(f"ensemble {index}: {exc}") from exc


def _parse_quantifier(table: dict, index: int) -> QuantifierSpec:
    kind = str(_require(table, "kind", f"quantifiers[{index}]"))
    if kind not in REGISTRY:
        raise ConfigError(f"quantifier {index}: unknown kind {kind!r}")
    kwargs = {}
    for key in ("p", "p1", "p2", "dtheta"):
        if key in table:
            kwargs[key] = float(table[key])
    if "generator" in table:
        kwargs["generator"] = str(table["generator"])
    if "lifted" in table:
        kwargs["lifted"] = bool(table["lifted"])
    try:
        return QuantifierSpec(kind, **kwargs)
    except BackflowError as exc:
        raise ConfigError(f"quantifier {index}: {exc}") from exc


def load_scenario(path) -> ScenarioConfig:
    """Load and validate a scenario file; raises ConfigError on any defect."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc

    family = _parse_dynamics(raw.get("dynamics", {}), path.parent)

    grid_tbl = raw.get("grid", {})
    t_end = float(grid_tbl.get("t_end", family.default_window))
    points = int(grid_tbl.get("points", 500))
    if t_end <= 0:
        raise ConfigError(f"grid t_end must be positive, got {t_end}")
    if points < 2:
        raise ConfigError(f"grid needs at least 2 points, got {points}")
    grid = TimeGrid.linspace(t_end, points)

    ensembles = tuple(_parse_ensemble(t, i) for i, t in enumerate(raw.get("ensembles", [])))
    quantifiers = tuple(_parse_quantifier(t, i) for i, t in enumerate(raw.get("quantifiers", [])))

    analyses_tbl = raw.get("analyses", {})
    analyses = tuple(str(a) for a in analyses_tbl.get("run", []))
    if not analyses:
        raise ConfigError("at least one analysis must be requested in [analyses] run")
    for a in analyses:
        if a not in VALID_ANALYSES:
            raise ConfigError(f"unknown analysis {a!r}; valid: {', '.join(VALID_ANALYSES)}")
    if "trajectories" in analyses and (not ensembles or not quantifiers):
        raise ConfigError("trajectory analysis needs at least one ensemble and one quantifier")

    tol_tbl = raw.get("tolerances", {})
    tolerances = Tolerances(
        cp=float(tol_tbl.get("cp", 1e-10)),
        pdiv=float(tol_tbl.get("pdiv", 1e-9)),
        monotonicity=float(tol_tbl.get("monotonicity", 1e-7)),
        inv_scan=float(tol_tbl.get("inv_scan", 0.0)),
    )
    smp_tbl = raw.get("sampling", {})
    sampling = SamplingBudget(
        pdiv_samples=int(smp_tbl.get("pdiv_samples", 2000)),
        gtde_trials=int(smp_tbl.get("gtde_trials", 500)),
        pq_ensembles=int(smp_tbl.get("pq_ensembles", 5)),
    )

    return ScenarioConfig(
        label=str(raw.get("label", path.stem)),
        family=family,
        grid=grid,
        ensembles=ensembles,
        quantifiers=quantifiers,
        analyses=analyses,
        seed=int(raw.get("seed", 0)),
        tolerances=tolerances,
        sampling=sampling,
    )


def quantifier_to_table(spec: QuantifierSpec) -> dict:
    """Serialize a quantifier spec back to its config-table form."""
    table = {"kind": spec.kind}
    if spec.kind == "PNorm":
        table["p"] = spec.p
    if spec.kind == "P1P2":
        table["p1"] = spec.p1
        table["p2"] = spec.p2
    if spec.kind == "QFI":
        table["dtheta"] = spec.dtheta
        table["generator"] = spec.generator
    if spec.lifted:
        table["lifted"] = True
    return table


def load_alberti_states(path) -> tuple[DensityMatrix, DensityMatrix, DensityMatrix,
                                       DensityMatrix, np.ndarray | None]:
    """Read the four qubit states (and optional x grid) for the transformability check."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"states file {path} does not exist")
    try:
        raw = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    states = []
    for name in ("rho1", "rho2", "sigma1", "sigma2"):
        tbl = raw.get(name)
        if tbl is None:
            raise ConfigError(f"missing [{name}] table")
        if "bloch" in tbl:
            states.append(_state_from_entry(tbl["bloch"], 0))
        elif "matrix" in tbl:
            states.append(_matrix_from_entry(tbl["matrix"], 0))
        else:
            raise ConfigError(f"[{name}] needs 'bloch' or 'matrix'")
    x_grid = None
    if "x_grid" in raw:
        x_grid = np.asarray([float(x) for x in raw["x_grid"]], dtype=float)
    return (*states, x_grid)
