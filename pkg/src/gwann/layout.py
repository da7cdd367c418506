"""Scenario definitions and the mapping from simulations to network I/O.

Five scenarios are supported:

========  =====================================  ==========================
kind      network input                          network target
========  =====================================  ==========================
FWD1      8 release rates (S1, S2)               35 observations
INV1      7 final-year observations (S2 only)    4 release rates
INV2      7 final-year observations (S2 only)    4 release rates + (zeta, eta)
INV3      35 observations, near-zero dropped     8 release rates
INV4      as INV3, each sample corrupted         8 release rates + alpha
========  =====================================  ==========================

Cell coordinates: model cells are ``(row, col)``; the source location learned
in INV2 is expressed as ``(zeta, eta) = (col, row)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .aquifer import AquiferModel, SourceSpec
from .transport import ObservationVector, observation_labels, release_labels

KINDS = ("FWD1", "INV1", "INV2", "INV3", "INV4")
ALPHA_LEVELS = (0.0, 0.001, 0.01, 0.1)

# Sources each scenario works with; INV1/INV2 study S2 alone.
SCENARIO_SOURCES = {
    "FWD1": ("S1", "S2"),
    "INV1": ("S2",),
    "INV2": ("S2",),
    "INV3": ("S1", "S2"),
    "INV4": ("S1", "S2"),
}
DEFAULT_SIZES = {"FWD1": 500, "INV1": 256, "INV2": 2304, "INV3": 500, "INV4": 500}
EXPECTED_DIMS = {"FWD1": (8, 35), "INV1": (7, 4), "INV2": (7, 6), "INV3": (35, 8), "INV4": (35, 9)}


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class GoldenTest:
    """Reference release histories (g/s) and the true S2 location."""

    releases: dict = field(
        default_factory=lambda: {"S1": (35.0, 90.0, 65.0, 47.0), "S2": (24.0, 56.0, 43.0, 35.0)}
    )
    s2_cell: tuple[int, int] = (4, 4)

    def vector(self, source_ids) -> np.ndarray:
        return np.concatenate([np.asarray(self.releases[s], dtype=float) for s in source_ids])

    @property
    def s2_location(self) -> tuple[float, float]:
        """True S2 location as ``(zeta, eta)``."""
        return float(self.s2_cell[1]), float(self.s2_cell[0])


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one scenario run.

    ``n_samples`` is the total dataset size; for INV2 it is split evenly
    over the candidate cells. ``alpha`` is the relative noise level applied
    to network inputs (for INV4 it selects the headline evaluation level;
    all of ``alpha_levels`` are evaluated).
    """

    kind: str
    n_samples: int | None = None
    alpha: float = 0.0
    hidden: int = 10
    n_networks: int = 10
    dataset_seed: int = 0
    train_seed: int = 0
    noise_seed: int = 0
    golden: GoldenTest = field(default_factory=GoldenTest)
    inv2_candidates: tuple[tuple[int, int], ...] | None = None
    alpha_levels: tuple[float, ...] = ALPHA_LEVELS
    safety: float = 2.0
    m0: float = 1.0
    threshold_fraction: float = 1e-4
    max_epochs: int = 1000
    max_fail: int = 6
    heldout_samples: int = 50

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in KINDS:
            raise LayoutError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.n_samples is None:
            object.__setattr__(self, "n_samples", DEFAULT_SIZES[kind])
        if self.alpha < 0:
            raise LayoutError("alpha must be non-negative")
        if self.n_samples < 1:
            raise LayoutError("n_samples must be positive")
        if kind == "INV2" and self.n_samples % 9:
            raise LayoutError("INV2 n_samples must be a multiple of the 9 candidate cells")

    @property
    def source_ids(self) -> tuple[str, ...]:
        return SCENARIO_SOURCES[self.kind]

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["golden"] = {
            "releases": {k: list(v) for k, v in self.golden.releases.items()},
            "s2_cell": list(self.golden.s2_cell),
        }
        if self.inv2_candidates is not None:
            d["inv2_candidates"] = [list(c) for c in self.inv2_candidates]
        d["alpha_levels"] = list(self.alpha_levels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        g = d.pop("golden", None)
        if g is not None:
            d["golden"] = GoldenTest(
                releases={k: tuple(float(x) for x in v) for k, v in g["releases"].items()},
                s2_cell=tuple(g["s2_cell"]),
            )
        if d.get("inv2_candidates") is not None:
            d["inv2_candidates"] = tuple(tuple(c) for c in d["inv2_candidates"])
        if "alpha_levels" in d:
            d["alpha_levels"] = tuple(d["alpha_levels"])
        return cls(**d)


def scenario_model(model: AquiferModel, config: ScenarioConfig, s2_cell=None) -> AquiferModel:
    """The model restricted to the scenario's sources (S2 optionally moved)."""
    sources = []
    for sid in config.source_ids:
        src = model.source(sid)
        if sid == "S2" and s2_cell is not None:
            src = SourceSpec(src.id, tuple(s2_cell), src.active_periods)
        sources.append(src)
    return model.with_sources(sources)


def golden_model(model: AquiferModel, config: ScenarioConfig) -> AquiferModel:
    """Scenario model with S2 at the golden-test location."""
    return scenario_model(model, config, s2_cell=config.golden.s2_cell)


# Noise and column reduction ------------------------------------------------


def corrupt_observations(obs, alpha: float, seed=None, eps=None):
    """Relative Gaussian corruption ``C + alpha * eps * C``.

    One standard-normal draw per component. ``eps`` overrides the draws (a
    scalar or array), which tests use to pin the noise. Accepts a plain
    array (any shape) or an :class:`ObservationVector` and returns the same
    kind.
    """
    if alpha < 0:
        raise LayoutError("alpha must be non-negative")
    values = obs.values if isinstance(obs, ObservationVector) else np.asarray(obs, dtype=float)
    if alpha == 0:
        out = values.copy()
    else:
        if eps is None:
            eps = np.random.default_rng(seed).standard_normal(values.shape)
        out = values + alpha * np.asarray(eps, dtype=float) * values
    if isinstance(obs, ObservationVector):
        return ObservationVector(out, obs.well_ids, obs.times)
    return out


def near_zero_mask(inputs: np.ndarray, threshold_fraction: float) -> np.ndarray:
    """Columns to keep: those whose maximum reaches ``threshold_fraction`` of the global max."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    col_max = np.abs(inputs).max(axis=0)
    keep = col_max >= threshold_fraction * col_max.max(initial=0.0)
    keep &= col_max > 0
    if not keep.any():
        raise LayoutError("every input column is below the near-zero threshold")
    return keep


def reduce_near_zero_columns(dataset, threshold_fraction: float = 1e-4):
    """Drop near-zero input columns of ``dataset``; return ``(reduced, mask)``."""
    mask = near_zero_mask(dataset.inputs, threshold_fraction)
    return dataset.select_inputs(mask), mask


# I/O assembly ----------------------------------------------------------------


@dataclass
class SimulationBatch:
    """Raw forward-simulation results for a set of sampled release vectors."""

    releases: np.ndarray  # (n, n_release_values)
    observations: np.ndarray  # (n, n_wells * n_times), well-major
    locations: np.ndarray | None = None  # (n, 2) as (zeta, eta), INV2 only

    def __len__(self) -> int:
        return self.releases.shape[0]


def final_time_columns(model: AquiferModel) -> np.ndarray:
    """Indices of the last observation time of every well in observation order."""
    n_t = len(model.schedule.observation_times)
    return np.arange(len(model.wells)) * n_t + (n_t - 1)


def io_labels(kind: str, model: AquiferModel) -> tuple[list[str], list[str]]:
    """Input and target column labels for ``kind`` on a scenario model."""
    obs = observation_labels(model)
    rel = release_labels(model)
    if kind == "FWD1":
        return rel, obs
    if kind in ("INV1", "INV2"):
        inputs = [obs[i] for i in final_time_columns(model)]
        return inputs, rel + (["zeta", "eta"] if kind == "INV2" else [])
    return obs, rel + (["alpha"] if kind == "INV4" else [])


def sample_alpha_and_noise(index: int, seed: int, n_obs: int, levels=ALPHA_LEVELS):
    """Per-sample noise level and standard-normal draws for INV4."""
    rng = np.random.default_rng([int(seed), int(index)])
    alpha = float(levels[int(rng.integers(len(levels)))])
    return alpha, rng.standard_normal(n_obs)


def build_io_vectors(kind: str, batch: SimulationBatch, model: AquiferModel, seed: int = 0, alpha_levels=ALPHA_LEVELS):
    """Arrange simulation results into network inputs and targets.

    Returns ``(inputs, targets, input_labels, target_labels)``. For INV4 each
    row's observations are corrupted with its own drawn noise level, which
    becomes the last target component; other kinds are returned clean.
    """
    kind = kind.upper()
    in_labels, out_labels = io_labels(kind, model)
    R, O = np.asarray(batch.releases, dtype=float), np.asarray(batch.observations, dtype=float)
    if R.shape[1] != model.n_release_values or O.shape[1] != model.n_observations:
        raise LayoutError("simulation batch does not match the scenario model")
    if kind == "FWD1":
        X, Y = R, O
    elif kind in ("INV1", "INV2"):
        X = O[:, final_time_columns(model)]
        if kind == "INV2":
            if batch.locations is None:
                raise LayoutError("INV2 needs per-sample source locations")
            Y = np.hstack([R, batch.locations])
        else:
            Y = R
    elif kind == "INV3":
        X, Y = O, R
    else:
        X = np.empty_like(O)
        alphas = np.empty(len(O))
        for i in range(len(O)):
            alphas[i], eps = sample_alpha_and_noise(i, seed, O.shape[1], alpha_levels)
            X[i] = corrupt_observations(O[i], alphas[i], eps=eps)
        Y = np.hstack([R, alphas[:, None]])
    if X.shape[1] != len(in_labels) or Y.shape[1] != len(out_labels):
        raise LayoutError("layout mismatch between data and labels")
    return X, Y, in_labels, out_labels


# INV2 locations ---------------------------------------------------------------


def inv2_candidates(model: AquiferModel, center_cell, explicit=None) -> list[tuple[int, int]]:
    """The nine candidate source cells ``(row, col)``: the 3x3 block around ``center_cell``."""
    if explicit is not None:
        cells = [tuple(int(v) for v in c) for c in explicit]
        bad = [c for c in cells if not model.grid.contains(c)]
        if bad:
            raise LayoutError(f"candidate cells outside the grid: {bad}")
        return cells
    r0, c0 = center_cell
    cells = [(r, c) for r in range(r0 - 1, r0 + 2) for c in range(c0 - 1, c0 + 2)]
    if not all(model.grid.contains(c) for c in cells):
        raise LayoutError(f"3x3 block around {tuple(center_cell)} leaves the grid")
    return cells


def cell_to_location(cell) -> tuple[float, float]:
    return float(cell[1]), float(cell[0])


def decode_location(raw_zeta: float, raw_eta: float, candidates) -> tuple[int, int]:
    """Nearest candidate ``(zeta, eta)``; ties go to the lexicographically smaller one.

    ``candidates`` are ``(zeta, eta)`` pairs.
    """
    cands = sorted((int(z), int(e)) for z, e in candidates)
    if not cands:
        raise LayoutError("no candidate locations")
    d = [(z - raw_zeta) ** 2 + (e - raw_eta) ** 2 for z, e in cands]
    return cands[int(np.argmin(d))]
