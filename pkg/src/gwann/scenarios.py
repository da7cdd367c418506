"""End-to-end scenario runs: data, noise, ensemble training, golden-test evaluation."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .aquifer import AquiferModel
from .ann import LMEnsembleRegressor, train_ensemble
from .flow import solve_steady_flow
from .layout import (
    ALPHA_LEVELS,
    KINDS,
    GoldenTest,
    LayoutError,
    ScenarioConfig,
    build_io_vectors,
    cell_to_location,
    corrupt_observations,
    decode_location,
    final_time_columns,
    golden_model,
    inv2_candidates,
    near_zero_mask,
    reduce_near_zero_columns,
    scenario_model,
)
from .sampling import Dataset, _atomic_write, generate_dataset, lhs, scenario_bounds, simulate_batch
from .transport import ReleaseHistory, TransportSimulator, simulate_transport

__all__ = [
    "ALPHA_LEVELS",
    "KINDS",
    "GoldenTest",
    "LayoutError",
    "ScenarioConfig",
    "ScenarioReport",
    "build_io_vectors",
    "corrupt_observations",
    "decode_location",
    "evaluate_scenario",
    "golden_input",
    "golden_targets",
    "heldout_test",
    "inv2_candidates",
    "near_zero_mask",
    "reduce_near_zero_columns",
    "render_report",
    "run_scenario",
    "surrogate_timing",
    "training_inputs",
    "write_report",
]

# Sub-stream tags for noise drawn from ``noise_seed``.
_TRAIN_NOISE = 1
_GOLDEN_NOISE = 2


@dataclass
class ScenarioReport:
    """Outcome of one scenario run.

    ``actual``/``estimated``/``sd_t`` cover every network output at the
    headline noise level; ``release_metrics`` covers only the release rates
    (or, for FWD1, the predicted concentrations). Wall-clock figures live in
    ``timings`` and are kept out of the deterministic report files.
    """

    kind: str
    config: dict
    labels: list[str]
    actual: np.ndarray
    estimated: np.ndarray
    sd_t: np.ndarray
    release_metrics: metrics.MetricReport
    details: dict = field(default_factory=dict)
    members: list[dict] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def nrmse(self) -> float | None:
        return self.release_metrics.nrmse_percent

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "kind": self.kind,
            "config": self.config,
            "labels": self.labels,
            "actual": self.actual.tolist(),
            "estimated": self.estimated.tolist(),
            "sd_t": self.sd_t.tolist(),
            "release_metrics": self.release_metrics.to_dict(),
            "details": self.details,
            "members": self.members,
        }


# Data preparation -------------------------------------------------------------


def training_inputs(dataset: Dataset, config: ScenarioConfig):
    """Apply the scenario's noise and column reduction to a clean dataset.

    INV1-INV3 corrupt every input once at ``config.alpha`` (shared by all
    ensemble members); INV4 datasets already carry per-sample noise. INV3
    and INV4 then drop near-zero columns. Returns ``(dataset, mask)`` where
    ``mask`` is None when no reduction applies.
    """
    ds = dataset
    if config.kind in ("INV1", "INV2", "INV3") and config.alpha > 0:
        noisy = corrupt_observations(ds.inputs, config.alpha, seed=[config.noise_seed, _TRAIN_NOISE])
        ds = ds.with_inputs(noisy)
    mask = None
    if config.kind in ("INV3", "INV4"):
        ds, mask = reduce_near_zero_columns(ds, config.threshold_fraction)
    return ds, mask


def golden_targets(config: ScenarioConfig) -> np.ndarray:
    vec = config.golden.vector(config.source_ids)
    if config.kind == "INV2":
        vec = np.concatenate([vec, config.golden.s2_location])
    return vec


def golden_input(model: AquiferModel, config: ScenarioConfig, alpha: float, mask=None, level: int = 0, obs=None):
    """Network input for the golden test at noise level ``alpha``."""
    gm = golden_model(model, config)
    if obs is None:
        obs = TransportSimulator(gm, solve_steady_flow(gm)).observe(config.golden.vector(config.source_ids))
    x = obs[final_time_columns(gm)] if config.kind in ("INV1", "INV2") else obs
    x = corrupt_observations(x, alpha, seed=[config.noise_seed, _GOLDEN_NOISE, level])
    return x if mask is None else x[np.asarray(mask, dtype=bool)]


# Evaluation -----------------------------------------------------------------


def _member_summary(ens: LMEnsembleRegressor) -> list[dict]:
    out = []
    for seed, log in zip(ens.seeds_, ens.training_logs_):
        out.append(
            {
                "seed": seed,
                "epochs": log.epochs,
                "best_epoch": log.best_epoch,
                "stop_reason": log.stop_reason,
                "train_loss": log.train_loss,
                "val_loss": log.val_loss,
                "converged": log.stop_reason != "mu_max",
            }
        )
    return out


def _release_groups(config: ScenarioConfig) -> dict[str, list[int]]:
    return {sid: list(range(4 * k, 4 * k + 4)) for k, sid in enumerate(config.source_ids)}


def _forward_consistency(model, config, estimate, location=None):
    """Re-simulate recovered releases and compare with the clean golden observations."""
    gm = golden_model(model, config)
    flow = solve_steady_flow(gm)
    cols = final_time_columns(gm) if config.kind in ("INV1", "INV2") else np.arange(gm.n_observations)
    truth = TransportSimulator(gm, flow).observe(config.golden.vector(config.source_ids))[cols]
    em = gm if location is None else scenario_model(model, config, s2_cell=(location[1], location[0]))
    back = TransportSimulator(em, flow).observe(estimate)[cols]
    rel = metrics.nrmse(config.golden.vector(config.source_ids), estimate)
    obs = metrics.nrmse(truth, back)
    return {"observation_nrmse_percent": obs, "release_nrmse_percent": rel, "holds": bool(obs <= 2.0 * rel + 1e-12)}


def evaluate_scenario(
    model: AquiferModel, config: ScenarioConfig, ensemble: LMEnsembleRegressor, mask=None
) -> ScenarioReport:
    """Golden-test evaluation of a trained ensemble."""
    gm = golden_model(model, config)
    flow = solve_steady_flow(gm)
    sim = TransportSimulator(gm, flow)
    golden_rel = config.golden.vector(config.source_ids)
    golden_obs = sim.observe(golden_rel)
    n_rel = golden_rel.size
    details: dict = {}
    if mask is not None:
        details["kept_columns"] = int(np.sum(mask))
        details["dropped_columns"] = int(np.size(mask) - np.sum(mask))
        details["input_mask"] = [bool(v) for v in mask]

    if config.kind == "FWD1":
        mean, sd = ensemble.predict(golden_rel[None, :], return_std=True)
        mean, sd = mean[0], sd[0]
        actual = golden_obs
        labels = [f"{w.id}_t{t:g}" for w in gm.wells for t in gm.schedule.observation_times]
        rm = metrics.metric_report(actual, mean, labels, units="g/m3")
        rm.sd_t = sd
        details["heldout"] = heldout_test(model, config, ensemble)
        return ScenarioReport(config.kind, config.to_dict(), labels, actual, mean, sd, rm, details, _member_summary(ensemble))

    levels = list(config.alpha_levels) if config.kind == "INV4" else [config.alpha]
    actual = golden_targets(config)
    if config.kind == "INV4":
        actual = np.concatenate([golden_rel, [config.alpha]])
    per_level = {}
    for k, a in enumerate(levels):
        x = golden_input(model, config, a, mask, level=k, obs=golden_obs)
        members = ensemble.member_predictions(x[None, :])[:, 0, :]
        mean = members.mean(axis=0)
        sd = metrics.sd_t(members)
        rep = metrics.metric_report(
            golden_rel, mean[:n_rel], realizations=members[:, :n_rel], groups=_release_groups(config), units="g/s"
        )
        entry = {"alpha": a, "estimated": mean.tolist(), "sd_t": sd.tolist(), "metrics": rep.to_dict()}
        if config.kind == "INV4":
            entry["alpha_hat"] = float(mean[n_rel])
            entry["alpha_decoded"] = float(min(config.alpha_levels, key=lambda v: (abs(v - mean[n_rel]), v)))
        per_level[repr(a)] = entry
    head = per_level[repr(config.alpha)] if config.kind == "INV4" and repr(config.alpha) in per_level else per_level[repr(levels[0])]
    mean = np.asarray(head["estimated"])
    sd = np.asarray(head["sd_t"])
    labels = list(ensemble.metadata_.get("target_labels", [])) if hasattr(ensemble, "metadata_") else []
    if len(labels) != mean.size:
        labels = [f"{s}_p{p + 1}" for s in config.source_ids for p in range(4)]
        labels += {"INV2": ["zeta", "eta"], "INV4": ["alpha"]}.get(config.kind, [])
    rm = metrics.metric_report(
        golden_rel,
        mean[:n_rel],
        labels[:n_rel],
        realizations=None,
        groups=_release_groups(config),
        units="g/s",
    )
    rm.sd_t = sd[:n_rel]
    if config.kind == "INV4":
        details["levels"] = per_level
        details["alpha_hat"] = {k: v["alpha_hat"] for k, v in per_level.items()}
    location = None
    if config.kind == "INV2":
        cands = inv2_candidates(gm, config.golden.s2_cell, config.inv2_candidates)
        raw = (float(mean[n_rel]), float(mean[n_rel + 1]))
        location = decode_location(*raw, [cell_to_location(c) for c in cands])
        details["location_raw"] = list(raw)
        details["location_decoded"] = list(location)
        details["location_true"] = list(config.golden.s2_location)
        details["location_correct"] = tuple(location) == tuple(int(v) for v in config.golden.s2_location)
    zero_level = next((v for v in per_level.values() if v["alpha"] == 0), None)
    if zero_level is not None:
        est0 = np.asarray(zero_level["estimated"])[:n_rel]
        details["forward_consistency"] = _forward_consistency(model, config, est0, location)
    return ScenarioReport(config.kind, config.to_dict(), labels, actual, mean, sd, rm, details, _member_summary(ensemble))


def heldout_test(model: AquiferModel, config: ScenarioConfig, ensemble: LMEnsembleRegressor) -> dict:
    """FWD1 surrogate accuracy on fresh Latin hypercube releases."""
    sm = golden_model(model, config)
    bounds = scenario_bounds(model, config)
    R = lhs(config.heldout_samples, sm.n_release_values, bounds, seed=[config.dataset_seed, 7919])
    O = simulate_batch(sm, R)
    P = ensemble.predict(R)
    per_sample = [metrics.nrmse(o, p) for o, p in zip(O, P)]
    return {
        "n_samples": int(len(R)),
        "nrmse_mean_percent": float(np.mean(per_sample)),
        "nrmse_max_percent": float(np.max(per_sample)),
        "nrmse_pooled_percent": metrics.nrmse(O.ravel(), P.ravel()),
    }


def surrogate_timing(model: AquiferModel, config: ScenarioConfig, ensemble: LMEnsembleRegressor, repeats: int = 20) -> dict:
    """Best-of-``repeats`` wall time of one ensemble prediction vs one forward model run."""
    sm = golden_model(model, config)
    x = config.golden.vector(config.source_ids)[None, :]
    rel = ReleaseHistory.from_vector(sm, x[0])

    def best(fn, n):
        times = []
        for _ in range(n):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return min(times)

    t_ann = best(lambda: ensemble.predict(x), repeats)
    t_sim = best(lambda: simulate_transport(sm, solve_steady_flow(sm), rel), max(3, repeats // 4))
    return {"ensemble_predict_s": t_ann, "forward_simulation_s": t_sim, "speedup": t_sim / t_ann}


# Orchestration ----------------------------------------------------------------


def run_scenario(
    model: AquiferModel,
    config: ScenarioConfig,
    dataset: Dataset | None = None,
    jobs: int = 1,
    timing: bool = True,
) -> ScenarioReport:
    """Generate (or reuse) data, train the ensemble and evaluate the golden test.

    ``dataset`` must be a clean dataset from :func:`generate_dataset` for the
    same kind; noise and column reduction are applied here.
    """
    t0 = time.perf_counter()
    if dataset is None:
        dataset = generate_dataset(model, config, jobs=jobs)
    if dataset.metadata.get("kind", config.kind) != config.kind:
        raise LayoutError(f"dataset is for {dataset.metadata.get('kind')}, scenario is {config.kind}")
    t1 = time.perf_counter()
    train_ds, mask = training_inputs(dataset, config)
    ensemble = train_ensemble(
        train_ds.inputs,
        train_ds.targets,
        n_hidden=config.hidden,
        n_r=config.n_networks,
        base_seed=config.train_seed,
        n_jobs=jobs,
        max_epochs=config.max_epochs,
        max_fail=config.max_fail,
    )
    ensemble.metadata_ = {"target_labels": list(train_ds.target_labels), "input_labels": list(train_ds.input_labels)}
    t2 = time.perf_counter()
    report = evaluate_scenario(model, config, ensemble, mask)
    report.details["dataset_bounds"] = dataset.metadata.get("bounds")
    report.timings = {"dataset_s": t1 - t0, "training_s": t2 - t1, "evaluation_s": time.perf_counter() - t2}
    if config.kind == "FWD1" and timing:
        report.timings.update(surrogate_timing(model, config, ensemble))
    report.ensemble = ensemble
    report.mask = mask
    return report


# Report files ---------------------------------------------------------------


def render_report(report: ScenarioReport) -> str:
    cfg = report.config
    lines = [
        f"Scenario {report.kind}",
        f"alpha={cfg['alpha']}  N={cfg['n_samples']}  hidden={cfg['hidden']}  networks={cfg['n_networks']}  "
        f"seeds: dataset={cfg['dataset_seed']} train={cfg['train_seed']} noise={cfg['noise_seed']}",
        "",
    ]
    title = "Predicted concentrations (g/m3 = mg/L)" if report.kind == "FWD1" else "Release rates (g/s)"
    lines.append(metrics.render_table(report.release_metrics, title))
    d = report.details
    if "heldout" in d:
        h = d["heldout"]
        lines.append(
            f"Held-out test ({h['n_samples']} samples): mean NRMSE {h['nrmse_mean_percent']:.3f}%  "
            f"max {h['nrmse_max_percent']:.3f}%  pooled {h['nrmse_pooled_percent']:.3f}%"
        )
    if "location_decoded" in d:
        lines.append(
            f"Source location (zeta, eta): raw ({d['location_raw'][0]:.3f}, {d['location_raw'][1]:.3f})  "
            f"decoded {tuple(d['location_decoded'])}  true {tuple(d['location_true'])}"
        )
    if "levels" in d:
        lines.append("alpha   alpha_hat   decoded   NRMSE(%)")
        for v in d["levels"].values():
            lines.append(
                f"{v['alpha']:<7g} {v['alpha_hat']:<11.5f} {v['alpha_decoded']:<9g} {v['metrics']['NRMSE_percent']:.3f}"
            )
    if "dropped_columns" in d:
        lines.append(f"Near-zero input columns dropped: {d['dropped_columns']} (kept {d['kept_columns']})")
    if "forward_consistency" in d:
        f = d["forward_consistency"]
        lines.append(
            f"Forward consistency: observation NRMSE {f['observation_nrmse_percent']:.3f}% vs "
            f"release NRMSE {f['release_nrmse_percent']:.3f}% -> {'holds' if f['holds'] else 'violated'}"
        )
    bad = [m for m in report.members if not m["converged"]]
    lines.append(f"Members: {len(report.members)} trained, {len(bad)} stopped on the damping cap")
    for m in report.members:
        lines.append(
            f"  seed {m['seed']}: {m['epochs']} epochs (best {m['best_epoch']}), stop={m['stop_reason']}, "
            f"val MSE {m['val_loss']:.3e}"
        )
    return "\n".join(lines) + "\n"


def plot_data_csv(report: ScenarioReport) -> str:
    """Bar-chart series: actual, estimate and +-1 SD_t bounds per unknown."""
    rows = ["label,actual,estimated,lower,upper"]
    for lab, a, e, s in zip(report.labels, report.actual, report.estimated, report.sd_t):
        rows.append(f"{lab},{a!r},{e!r},{e - s!r},{e + s!r}")
    return "\n".join(rows) + "\n"


def write_report(report: ScenarioReport, out_dir: str | Path) -> dict[str, Path]:
    """Write text, metrics, plot-data and JSON report files plus a timings file."""
    out = Path(out_dir)
    files = {
        "report": (out / "report.txt", render_report(report)),
        "metrics": (out / "metrics.csv", metrics.render_csv(report.release_metrics)),
        "plot_data": (out / "plot_data.csv", plot_data_csv(report)),
        "json": (out / "report.json", json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"),
        "timings": (out / "timings.json", json.dumps(report.timings, indent=1, sort_keys=True) + "\n"),
    }
    for path, text in files.values():
        _atomic_write(path, text)
    return {k: p for k, (p, _) in files.items()}
