"""Aquifer domain description: grid, conductivity zones, boundaries, sources,
wells, stress schedule and transport parameters.

Models are loaded from YAML files (see ``data/default_aquifer.yaml`` for the
shipped layout) and validated before use. Cells are addressed as
``(row, col)`` with 0-based indices; the row index runs along the eta axis and
the column index along the zeta axis.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

FORMAT_VERSION = 1
SECONDS_PER_MONTH = 365.25 * 86400.0 / 12.0

Cell = tuple[int, int]


class ModelConfigError(ValueError):
    """Raised when an aquifer configuration cannot be parsed or is invalid."""

    def __init__(self, message: str, violations: list[str] | None = None):
        self.violations = list(violations or [])
        if self.violations:
            message = message + ":\n  " + "\n  ".join(self.violations)
        super().__init__(message)


@dataclass(frozen=True)
class GridSpec:
    n_rows: int
    n_cols: int
    delta_zeta: float
    delta_eta: float
    thickness_b: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def contains(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.n_rows and 0 <= c < self.n_cols

    def on_boundary(self, cell: Cell) -> bool:
        r, c = cell
        return r in (0, self.n_rows - 1) or c in (0, self.n_cols - 1)


@dataclass(frozen=True)
class ZoneRect:
    """Rectangle of cells (inclusive index ranges) assigned to one zone."""

    zone: int
    rows: tuple[int, int]
    cols: tuple[int, int]


@dataclass(frozen=True)
class ZoneMap:
    hk_of_zone: dict[int, float]
    rectangles: tuple[ZoneRect, ...]

    def zone_of_cell(self, grid: GridSpec) -> np.ndarray:
        """Zone id per cell; 0 marks cells no rectangle covers. Later
        rectangles override earlier ones."""
        zones = np.zeros(grid.shape, dtype=int)
        for rect in self.rectangles:
            r0, r1 = rect.rows
            c0, c1 = rect.cols
            zones[max(r0, 0) : r1 + 1, max(c0, 0) : c1 + 1] = rect.zone
        return zones

    def hk_field(self, grid: GridSpec) -> np.ndarray:
        zones = self.zone_of_cell(grid)
        hk = np.zeros(grid.shape)
        for zone_id, value in self.hk_of_zone.items():
            hk[zones == zone_id] = value
        return hk


@dataclass(frozen=True)
class HeadSegment:
    name: str
    rows: tuple[int, int]
    cols: tuple[int, int]
    head: float

    def cells(self) -> list[Cell]:
        return [
            (r, c)
            for r in range(self.rows[0], self.rows[1] + 1)
            for c in range(self.cols[0], self.cols[1] + 1)
        ]


@dataclass(frozen=True)
class BoundaryConditions:
    """Specified-head segments; every other boundary face is no-flow."""

    segments: tuple[HeadSegment, ...]

    @property
    def fixed_head_cells(self) -> dict[Cell, float]:
        out: dict[Cell, float] = {}
        for seg in self.segments:
            for cell in seg.cells():
                out[cell] = seg.head
        return out


@dataclass(frozen=True)
class SourceSpec:
    id: str
    cell: Cell
    active_periods: tuple[int, ...]


@dataclass(frozen=True)
class WellSpec:
    id: str
    cell: Cell


@dataclass(frozen=True)
class StressSchedule:
    n_periods: int
    period_length: float  # months
    observation_times: tuple[float, ...]  # months from start

    @property
    def total_length(self) -> float:
        return self.n_periods * self.period_length

    def period_edges_seconds(self) -> np.ndarray:
        return np.arange(self.n_periods + 1) * self.period_length * SECONDS_PER_MONTH

    def observation_seconds(self) -> np.ndarray:
        return np.asarray(self.observation_times, dtype=float) * SECONDS_PER_MONTH


@dataclass(frozen=True)
class TransportParams:
    porosity_phi: float
    alpha_L: float
    alpha_T: float
    initial_concentration: float = 0.0
    # Upper bound on the per-sub-step Courant number of the transport solver.
    max_courant: float = 1.0


@dataclass(frozen=True)
class AquiferModel:
    grid: GridSpec
    zones: ZoneMap
    boundaries: BoundaryConditions
    sources: tuple[SourceSpec, ...]
    wells: tuple[WellSpec, ...]
    schedule: StressSchedule
    transport: TransportParams
    # Kept for completeness of the flow equation; steady-state flow ignores it.
    storativity_S: float = 1e-4
    name: str = field(default="aquifer", compare=True)

    def source(self, source_id: str) -> SourceSpec:
        for src in self.sources:
            if src.id == source_id:
                return src
        raise KeyError(f"no source named {source_id!r}")

    def with_sources(self, sources) -> "AquiferModel":
        return dataclasses.replace(self, sources=tuple(sources))

    @property
    def n_release_values(self) -> int:
        return sum(len(s.active_periods) for s in self.sources)

    @property
    def n_observations(self) -> int:
        return len(self.wells) * len(self.schedule.observation_times)


def validate(model: AquiferModel) -> list[str]:
    """Return every violated invariant of ``model`` (empty when valid).

    Each message is prefixed with the name of the type whose invariant failed.
    """
    out: list[str] = []
    g = model.grid
    if g.n_rows < 1 or g.n_cols < 1:
        out.append(f"GridSpec: grid must have at least one row and column, got {g.n_rows}x{g.n_cols}")
    for name in ("delta_zeta", "delta_eta", "thickness_b"):
        if not getattr(g, name) > 0:
            out.append(f"GridSpec: {name} must be positive, got {getattr(g, name)}")

    zones = model.zones
    for zone_id, hk in zones.hk_of_zone.items():
        if not hk > 0:
            out.append(f"ZoneMap: hydraulic conductivity of zone {zone_id} must be positive, got {hk}")
    for rect in zones.rectangles:
        if rect.zone not in zones.hk_of_zone:
            out.append(f"ZoneMap: rectangle refers to undefined zone {rect.zone}")
    if g.n_rows >= 1 and g.n_cols >= 1:
        zone_ids = zones.zone_of_cell(g)
        missing = int(np.sum(~np.isin(zone_ids, list(zones.hk_of_zone))))
        if missing:
            out.append(f"ZoneMap: {missing} cell(s) are not mapped to a defined zone")

    fixed = model.boundaries.fixed_head_cells
    for seg in model.boundaries.segments:
        for cell in seg.cells():
            if not g.contains(cell):
                out.append(f"BoundaryConditions: segment {seg.name} cell {cell} lies outside the grid")
                break
            if not g.on_boundary(cell):
                out.append(f"BoundaryConditions: segment {seg.name} cell {cell} is not on the domain boundary")
                break
    if len(set(fixed.values())) < 2:
        out.append("BoundaryConditions: at least two distinct fixed head values are required")

    periods = set(range(model.schedule.n_periods))
    for src in model.sources:
        if not g.contains(src.cell):
            out.append(f"SourceSpec: source {src.id} cell {src.cell} lies outside the grid")
        elif src.cell in fixed:
            out.append(f"AquiferModel: source {src.id} sits on a fixed-head cell {src.cell}")
        if not set(src.active_periods) <= periods:
            out.append(f"SourceSpec: source {src.id} active periods {src.active_periods} exceed the schedule")
    for well in model.wells:
        if not g.contains(well.cell):
            out.append(f"WellSpec: well {well.id} cell {well.cell} lies outside the grid")
        elif well.cell in fixed:
            out.append(f"AquiferModel: well {well.id} sits on a fixed-head cell {well.cell}")

    sched = model.schedule
    times = np.asarray(sched.observation_times, dtype=float)
    if sched.n_periods < 1 or not sched.period_length > 0:
        out.append("StressSchedule: need at least one period of positive length")
    if times.size and np.any(np.diff(times) <= 0):
        out.append("StressSchedule: observation times must be strictly increasing")
    if times.size and (times.max() > sched.total_length or times.min() <= 0):
        out.append(
            f"StressSchedule: observation times must lie in (0, {sched.total_length}] months"
        )

    tp = model.transport
    if not 0 < tp.porosity_phi < 1:
        out.append(f"TransportParams: porosity must lie in (0, 1), got {tp.porosity_phi}")
    if not tp.alpha_L >= tp.alpha_T >= 0:
        out.append(f"TransportParams: need alpha_L >= alpha_T >= 0, got {tp.alpha_L}, {tp.alpha_T}")
    if not tp.max_courant > 0:
        out.append("TransportParams: max_courant must be positive")
    return out


# -- (de)serialisation -------------------------------------------------------


def _pair(value, what: str) -> tuple[int, int]:
    if isinstance(value, int):
        return (value, value)
    a, b = value
    return (int(a), int(b))


def model_from_dict(cfg: dict) -> AquiferModel:
    try:
        g = cfg["grid"]
        grid = GridSpec(
            n_rows=int(g["n_rows"]),
            n_cols=int(g["n_cols"]),
            delta_zeta=float(g["delta_zeta"]),
            delta_eta=float(g["delta_eta"]),
            thickness_b=float(g["thickness"]),
        )
        z = cfg["zones"]
        zones = ZoneMap(
            hk_of_zone={int(k): float(v) for k, v in z["hk"].items()},
            rectangles=tuple(
                ZoneRect(int(r["zone"]), _pair(r["rows"], "rows"), _pair(r["cols"], "cols"))
                for r in z["layout"]
            ),
        )
        boundaries = BoundaryConditions(
            tuple(
                HeadSegment(str(b["name"]), _pair(b["rows"], "rows"), _pair(b["cols"], "cols"), float(b["head"]))
                for b in cfg["boundaries"]
            )
        )
        sources = tuple(
            SourceSpec(str(s["id"]), tuple(int(i) for i in s["cell"]), tuple(int(p) for p in s["active_periods"]))
            for s in cfg.get("sources", [])
        )
        wells = tuple(WellSpec(str(w["id"]), tuple(int(i) for i in w["cell"])) for w in cfg.get("wells", []))
        s = cfg["schedule"]
        schedule = StressSchedule(
            n_periods=int(s["n_periods"]),
            period_length=float(s["period_length_months"]),
            observation_times=tuple(float(t) for t in s["observation_times_months"]),
        )
        t = cfg["transport"]
        transport = TransportParams(
            porosity_phi=float(t["porosity"]),
            alpha_L=float(t["alpha_L"]),
            alpha_T=float(t["alpha_T"]),
            initial_concentration=float(t.get("initial_concentration", 0.0)),
            max_courant=float(t.get("max_courant", 1.0)),
        )
        return AquiferModel(
            grid=grid,
            zones=zones,
            boundaries=boundaries,
            sources=sources,
            wells=wells,
            schedule=schedule,
            transport=transport,
            storativity_S=float(cfg.get("storativity", 1e-4)),
            name=str(cfg.get("name", "aquifer")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelConfigError(f"malformed aquifer configuration ({type(exc).__name__}: {exc})") from exc


def model_to_dict(model: AquiferModel) -> dict:
    g = model.grid
    return {
        "format_version": FORMAT_VERSION,
        "name": model.name,
        "grid": {
            "n_rows": g.n_rows,
            "n_cols": g.n_cols,
            "delta_zeta": g.delta_zeta,
            "delta_eta": g.delta_eta,
            "thickness": g.thickness_b,
        },
        "zones": {
            "hk": {int(k): float(v) for k, v in model.zones.hk_of_zone.items()},
            "layout": [
                {"zone": r.zone, "rows": list(r.rows), "cols": list(r.cols)} for r in model.zones.rectangles
            ],
        },
        "boundaries": [
            {"name": b.name, "rows": list(b.rows), "cols": list(b.cols), "head": b.head}
            for b in model.boundaries.segments
        ],
        "sources": [
            {"id": s.id, "cell": list(s.cell), "active_periods": list(s.active_periods)} for s in model.sources
        ],
        "wells": [{"id": w.id, "cell": list(w.cell)} for w in model.wells],
        "schedule": {
            "n_periods": model.schedule.n_periods,
            "period_length_months": model.schedule.period_length,
            "observation_times_months": list(model.schedule.observation_times),
        },
        "transport": {
            "porosity": model.transport.porosity_phi,
            "alpha_L": model.transport.alpha_L,
            "alpha_T": model.transport.alpha_T,
            "initial_concentration": model.transport.initial_concentration,
            "max_courant": model.transport.max_courant,
        },
        "storativity": model.storativity_S,
    }


def load_model(config_path: str | Path) -> AquiferModel:
    """Load and validate an aquifer model from a YAML file.

    Raises
    ------
    ModelConfigError
        If the file cannot be parsed or the resulting model violates any
        invariant. ``violations`` lists every problem found.
    """
    path = Path(config_path)
    try:
        cfg = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ModelConfigError(f"cannot read aquifer configuration {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ModelConfigError(f"aquifer configuration {path} is not a mapping")
    version = cfg.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ModelConfigError(f"unsupported format_version {version!r}")
    model = model_from_dict(cfg)
    problems = validate(model)
    if problems:
        raise ModelConfigError(f"invalid aquifer configuration {path}", problems)
    return model


def save_model(model: AquiferModel, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(model_to_dict(model), sort_keys=False))


def default_model_path() -> Path:
    return Path(str(resources.files("gwann") / "data" / "default_aquifer.yaml"))


def default_model() -> AquiferModel:
    return load_model(default_model_path())
