"""Latin hypercube designs, release bounds and batch generation of datasets."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aquifer import AquiferModel, SourceSpec
from .flow import FlowField, solve_steady_flow
from .layout import (
    ScenarioConfig,
    SimulationBatch,
    build_io_vectors,
    cell_to_location,
    golden_model,
    inv2_candidates,
)
from .transport import ReleaseHistory, TransportSimulator

FORMAT_VERSION = 1


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    """Per-dimension sampling box ``[lower, upper]`` for release rates (g/s)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise SamplingError("lower and upper bounds differ in length")
        if np.any(hi <= lo):
            raise SamplingError("every upper bound must exceed its lower bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, n_dims: int, upper: float, lower: float = 0.0) -> "Bounds":
        return cls(np.full(n_dims, lower), np.full(n_dims, upper))

    @property
    def n_dims(self) -> int:
        return self.lower.size

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def lhs(n_samples: int, n_dims: int, bounds: Bounds | None = None, seed=None) -> np.ndarray:
    """Latin hypercube sample of shape ``(n_samples, n_dims)``.

    Each dimension is cut into ``n_samples`` equal strata; every stratum gets
    exactly one point, placed uniformly inside it, and the strata are
    matched across dimensions by independent random permutations. Without
    ``bounds`` the unit cube is sampled.
    """
    if n_samples < 1 or n_dims < 1:
        raise SamplingError("n_samples and n_dims must be at least 1")
    rng = np.random.default_rng(seed)
    unit = np.empty((n_samples, n_dims))
    for j in range(n_dims):
        unit[:, j] = (rng.permutation(n_samples) + rng.random(n_samples)) / n_samples
    if bounds is None:
        return unit
    if bounds.n_dims != n_dims:
        raise SamplingError(f"bounds have {bounds.n_dims} dimensions, expected {n_dims}")
    return bounds.lower + unit * (bounds.upper - bounds.lower)


def release_bounds(
    model: AquiferModel,
    flow: FlowField,
    m0: float,
    c_true,
    safety: float = 1.2,
    columns=None,
    simulator: TransportSimulator | None = None,
) -> Bounds:
    """Upper release bound from one constant-rate run.

    All active periods release ``m0``; ``R`` is the largest ratio, over
    wells, of the true concentration to the simulated one (each at its own
    peak over the observed times). The bound ``safety * m0 * R`` applies to
    every dimension, with lower bound 0.

    ``c_true`` holds observations at ``columns`` of the full observation
    vector (all columns when omitted).
    """
    if m0 <= 0:
        raise SamplingError("m0 must be positive")
    c_true = np.asarray(c_true, dtype=float).ravel()
    if np.any(c_true < 0) or not np.any(c_true > 0):
        raise SamplingError("c_true must be non-negative with at least one positive entry")
    cols = np.arange(model.n_observations) if columns is None else np.asarray(columns)
    if cols.size != c_true.size:
        raise SamplingError("c_true does not match the selected observation columns")
    sim = simulator or TransportSimulator(model, flow)
    simulated = sim.observe(np.full(model.n_release_values, m0))
    n_t = len(model.schedule.observation_times)
    well_of = cols // n_t
    ratios = []
    for w in np.unique(well_of):
        sel = well_of == w
        c_max = simulated[cols[sel]].max()
        if c_max > 0:
            ratios.append(c_true[sel].max() / c_max)
    if not ratios:
        raise SamplingError("source is hydraulically disconnected from every well")
    r = max(ratios)
    return Bounds.uniform(model.n_release_values, safety * m0 * r)


@dataclass
class Dataset:
    """Network inputs and targets with column labels and provenance."""

    inputs: np.ndarray
    targets: np.ndarray
    input_labels: list[str]
    target_labels: list[str]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise SamplingError("inputs and targets differ in sample count")
        if self.inputs.shape[1] != len(self.input_labels) or self.targets.shape[1] != len(self.target_labels):
            raise SamplingError("label count does not match column count")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise SamplingError("dataset contains missing or non-finite entries")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def select_inputs(self, mask) -> "Dataset":
        mask = np.asarray(mask, dtype=bool)
        meta = dict(self.metadata)
        meta["input_mask"] = mask.tolist()
        return Dataset(
            self.inputs[:, mask],
            self.targets,
            [lab for lab, keep in zip(self.input_labels, mask) if keep],
            list(self.target_labels),
            meta,
        )

    def with_inputs(self, inputs) -> "Dataset":
        return Dataset(inputs, self.targets, list(self.input_labels), list(self.target_labels), dict(self.metadata))


def _unit(label: str) -> str:
    if label in ("zeta", "eta"):
        return "cell index"
    if label == "alpha":
        return "1"
    if label.startswith("W"):
        return "g/m3 (= mg/L)"
    return "g/s"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def descriptor_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_dataset(ds: Dataset, path: str | Path) -> tuple[Path, Path]:
    """Write ``path`` (CSV, inputs then targets) and ``path + '.json'`` (descriptor)."""
    path = Path(path)
    rows = [ds.input_labels + ds.target_labels]
    for x, y in zip(ds.inputs, ds.targets):
        rows.append([repr(float(v)) for v in np.concatenate([x, y])])
    lines = [",".join(r) for r in rows]
    _atomic_write(path, "\n".join(lines) + "\n")
    columns = [{"name": n, "role": "input", "unit": _unit(n)} for n in ds.input_labels]
    columns += [{"name": n, "role": "target", "unit": _unit(n)} for n in ds.target_labels]
    desc = {
        "format_version": FORMAT_VERSION,
        "n_samples": len(ds),
        "n_inputs": len(ds.input_labels),
        "n_targets": len(ds.target_labels),
        "columns": columns,
        "metadata": ds.metadata,
    }
    dpath = descriptor_path(path)
    _atomic_write(dpath, json.dumps(desc, indent=1, sort_keys=True) + "\n")
    return path, dpath


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    desc = json.loads(descriptor_path(path).read_text())
    if desc.get("format_version") != FORMAT_VERSION:
        raise SamplingError(f"unsupported dataset format version {desc.get('format_version')!r}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    names = [c["name"] for c in desc["columns"]]
    if header != names:
        raise SamplingError("dataset header does not match its descriptor")
    data = data.reshape(-1, len(names))
    k = desc["n_inputs"]
    return Dataset(data[:, :k], data[:, k:], header[:k], header[k:], desc.get("metadata", {}))


# Forward simulation in batches ------------------------------------------------


def _simulate_chunk(model: AquiferModel, tasks) -> list[np.ndarray]:
    """Run ``(s2_cell or None, release_vector)`` tasks; one simulator per source layout."""
    flow = solve_steady_flow(model)
    sims: dict = {}
    out = []
    for cell, releases in tasks:
        sim = sims.get(cell)
        if sim is None:
            m = model if cell is None else _move_s2(model, cell)
            sim = sims[cell] = TransportSimulator(m, flow)
        out.append(sim.run(ReleaseHistory.from_vector(sim.model, releases)).observations.values)
    return out


def _move_s2(model: AquiferModel, cell) -> AquiferModel:
    return model.with_sources(
        [SourceSpec(s.id, tuple(cell), s.active_periods) if s.id == "S2" else s for s in model.sources]
    )


def simulate_batch(model: AquiferModel, releases, s2_cells=None, jobs: int = 1) -> np.ndarray:
    """Observation matrix for many release vectors, in input order.

    Splits the work into ``jobs`` contiguous chunks run in separate
    processes; every simulation is independent, so the result does not
    depend on ``jobs``.
    """
    releases = np.atleast_2d(np.asarray(releases, dtype=float))
    cells = [None] * len(releases) if s2_cells is None else [tuple(int(v) for v in c) for c in s2_cells]
    tasks = list(zip(cells, [r for r in releases]))
    jobs = max(1, min(int(jobs or 1), len(tasks)))
    if jobs == 1:
        obs = _simulate_chunk(model, tasks)
    else:
        bounds = np.linspace(0, len(tasks), jobs + 1).astype(int)
        chunks = [tasks[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_simulate_chunk, [model] * len(chunks), chunks))
        obs = [o for part in parts for o in part]
    return np.array(obs).reshape(len(tasks), model.n_observations)


def golden_observations(model: AquiferModel, config: ScenarioConfig, flow: FlowField | None = None) -> np.ndarray:
    """Full observation vector produced by the golden-test releases."""
    gm = golden_model(model, config)
    flow = flow or solve_steady_flow(gm)
    return TransportSimulator(gm, flow).observe(config.golden.vector(config.source_ids))


def scenario_bounds(model: AquiferModel, config: ScenarioConfig, flow: FlowField | None = None) -> Bounds:
    """Release sampling box for a scenario.

    FWD1 has no observations to anchor on, so its box is ``safety`` times the
    largest golden release. Inverse scenarios use :func:`release_bounds` with
    the full golden observation record (peak over time at every well),
    computed with S2 at its golden location.
    """
    sm = golden_model(model, config)
    flow = flow or solve_steady_flow(sm)
    golden = config.golden.vector(config.source_ids)
    if config.kind == "FWD1":
        return Bounds.uniform(sm.n_release_values, config.safety * golden.max())
    sim = TransportSimulator(sm, flow)
    obs = sim.observe(golden)
    return release_bounds(sm, flow, config.m0, obs, config.safety, simulator=sim)


def generate_dataset(
    model: AquiferModel, config: ScenarioConfig, n: int | None = None, seed: int | None = None, jobs: int = 1
) -> Dataset:
    """Sample releases by LHS, simulate them and lay out network I/O.

    For INV2 ``n`` is split evenly over the nine candidate cells, each with
    its own Latin hypercube. Bit-identical for fixed inputs whatever ``jobs``.
    """
    n = config.n_samples if n is None else int(n)
    seed = config.dataset_seed if seed is None else int(seed)
    sm = golden_model(model, config)
    flow = solve_steady_flow(sm)
    bounds = scenario_bounds(model, config, flow)
    d = sm.n_release_values
    candidates = None
    if config.kind == "INV2":
        if n % 9:
            raise SamplingError("INV2 dataset size must be a multiple of 9")
        candidates = inv2_candidates(sm, config.golden.s2_cell, config.inv2_candidates)
        per = n // len(candidates)
        R = np.vstack([lhs(per, d, bounds, seed=[seed, k]) for k in range(len(candidates))])
        cells = [c for c in candidates for _ in range(per)]
        locations = np.array([cell_to_location(c) for c in cells])
    else:
        R = lhs(n, d, bounds, seed=seed)
        cells, locations = None, None
    O = simulate_batch(sm, R, s2_cells=cells, jobs=jobs)
    batch = SimulationBatch(R, O, locations)
    X, Y, in_labels, out_labels = build_io_vectors(config.kind, batch, sm, seed=seed, alpha_levels=config.alpha_levels)
    meta = {
        "kind": config.kind,
        "n_samples": n,
        "seed": seed,
        "model": sm.name,
        "sources": list(config.source_ids),
        "bounds": bounds.to_dict(),
        "scenario": config.to_dict(),
    }
    if candidates is not None:
        meta["candidates_row_col"] = [list(c) for c in candidates]
    return Dataset(X, Y, in_labels, out_labels, meta)
