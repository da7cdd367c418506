"""Command-line interface: ``gwann <subcommand> ...``.

Subcommands
-----------
simulate      forward flow + transport for release rows in a CSV file
gen-dataset   Latin hypercube dataset for a scenario
train         ensemble of LM-trained networks on a dataset
evaluate      golden-test report for a trained ensemble
run-scenario  all of the above in one go

Exit status: 0 on success, 1 on input/solver errors, 2 on usage errors,
3 when every artifact was written but an invariant check failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .ann import load_ensemble, save_ensemble, train_ensemble
from .ann.persistence import ensemble_to_dict
from .aquifer import ModelConfigError, default_model_path, load_model
from .flow import solve_steady_flow
from .layout import KINDS, ScenarioConfig
from .sampling import Dataset, SamplingError, _atomic_write, generate_dataset, load_dataset, save_dataset
from .scenarios import evaluate_scenario, run_scenario, training_inputs, write_report
from .transport import ReleaseHistory, TransportSimulator, export_snapshots, observation_labels, release_labels

EXIT_ERROR = 1
EXIT_CHECK_FAILED = 3
MASS_BALANCE_TOL = 0.005


class CLIError(Exception):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(path: Path, command: str, args: argparse.Namespace, seeds: dict, outputs: dict, started: str):
    outputs = {k: Path(v) for k, v in outputs.items()}
    manifest = {
        "format_version": 1,
        "tool": "gwann",
        "tool_version": __version__,
        "command": command,
        "arguments": {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"},
        "seeds": seeds,
        "artifacts": {k: {"path": str(p), "sha256": _sha256(p)} for k, p in outputs.items()},
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _atomic_write(path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _model(args):
    return load_model(args.model or default_model_path())


def _scenario_config(args, kind=None) -> ScenarioConfig:
    seed = getattr(args, "seed", 0)
    fields = {
        "kind": kind or args.scenario,
        "alpha": getattr(args, "alpha", 0.0) or 0.0,
        "dataset_seed": seed if getattr(args, "dataset_seed", None) is None else args.dataset_seed,
        "train_seed": seed if getattr(args, "train_seed", None) is None else args.train_seed,
        "noise_seed": seed if getattr(args, "noise_seed", None) is None else args.noise_seed,
    }
    for flag, name in (("n", "n_samples"), ("hidden", "hidden"), ("networks", "n_networks"), ("epochs", "max_epochs"), ("max_fail", "max_fail"), ("safety", "safety")):
        val = getattr(args, flag, None)
        if val is not None:
            fields[name] = val
    return ScenarioConfig(**fields)


# simulate ----------------------------------------------------------------------


def read_releases(path: Path) -> tuple[list[str], np.ndarray]:
    """Release CSV: a header of ``<source>_p<k>`` labels, then one row per simulation."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        header = [h.strip() for h in rows[0]]
        values = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except (OSError, IndexError, ValueError) as exc:
        raise CLIError(f"cannot parse releases file {path}: {exc}") from exc
    if values.size == 0 or values.ndim != 2 or values.shape[1] != len(header):
        raise CLIError(f"releases file {path} needs a header and at least one complete row")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise CLIError("release rates must be finite and non-negative")
    return header, values


def cmd_simulate(args) -> int:
    started = _now()
    model = _model(args)
    header, values = read_releases(args.releases)
    sources = []
    for lab in header:
        sid = lab.rsplit("_p", 1)[0]
        if sid not in sources:
            sources.append(sid)
    try:
        model = model.with_sources([model.source(s) for s in sources])
    except KeyError as exc:
        raise CLIError(str(exc)) from exc
    if header != release_labels(model):
        raise CLIError(f"release columns must be {release_labels(model)}")
    flow = solve_steady_flow(model)
    sim = TransportSimulator(model, flow)
    rows, ok = [], True
    for i, r in enumerate(values):
        res = sim.run(ReleaseHistory.from_vector(model, r), snapshots=bool(args.snapshots))
        mb = res.mass_balance
        ok &= mb.relative_error <= MASS_BALANCE_TOL
        print(
            f"row {i}: injected {mb.injected:.6g} g, stored {mb.stored:.6g} g, outflow {mb.outflow:.6g} g, "
            f"relative balance error {mb.relative_error:.2e}"
        )
        rows.append(res.observations.values)
        if args.snapshots:
            export_snapshots(res, Path(args.snapshots) / f"row{i}")
    out = Path(args.out)
    ds = Dataset(
        np.asarray(values),
        np.asarray(rows),
        release_labels(model),
        observation_labels(model),
        {"kind": "observations", "model": model.name, "units": "g/m3"},
    )
    save_dataset(ds, out)
    _write_manifest(out.with_name(out.name + ".manifest.json"), "simulate", args, {}, {"observations": out}, started)
    return 0 if ok else EXIT_CHECK_FAILED


# gen-dataset -------------------------------------------------------------------


def cmd_gen_dataset(args) -> int:
    started = _now()
    model = _model(args)
    config = _scenario_config(args)
    ds = generate_dataset(model, config, jobs=args.jobs)
    out = Path(args.out)
    path, desc = save_dataset(ds, out)
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "gen-dataset",
        args,
        {"dataset_seed": config.dataset_seed},
        {"dataset": path, "descriptor": desc},
        started,
    )
    print(f"wrote {len(ds)} samples ({len(ds.input_labels)} inputs, {len(ds.target_labels)} targets) to {path}")
    return 0


# train ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    started = _now()
    if not Path(args.dataset).exists():
        raise CLIError(f"dataset {args.dataset} not found")
    ds = load_dataset(args.dataset)
    kind = ds.metadata.get("kind")
    if kind not in KINDS:
        raise CLIError("dataset descriptor does not name a scenario kind")
    base = ScenarioConfig.from_dict(ds.metadata["scenario"]) if "scenario" in ds.metadata else ScenarioConfig(kind)
    changes = {}
    for flag, name in (("alpha", "alpha"), ("hidden", "hidden"), ("networks", "n_networks"), ("epochs", "max_epochs"), ("max_fail", "max_fail")):
        val = getattr(args, flag)
        if val is not None:
            changes[name] = val
    changes["train_seed"] = args.seed
    changes["noise_seed"] = args.seed if args.noise_seed is None else args.noise_seed
    config = base.replace(**changes)
    train_ds, mask = training_inputs(ds, config)
    ens = train_ensemble(
        train_ds.inputs,
        train_ds.targets,
        n_hidden=config.hidden,
        n_r=config.n_networks,
        base_seed=config.train_seed,
        n_jobs=args.jobs,
        max_epochs=config.max_epochs,
        max_fail=config.max_fail,
    )
    meta = {
        "scenario": config.to_dict(),
        "input_labels": train_ds.input_labels,
        "target_labels": train_ds.target_labels,
        "input_mask": None if mask is None else [bool(v) for v in mask],
        "dataset_sha256": _sha256(Path(args.dataset)),
    }
    out = Path(args.out)
    _atomic_write(out, json.dumps(ensemble_to_dict(ens, meta), indent=1, sort_keys=True))
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "train",
        args,
        {"train_seed": config.train_seed, "member_seeds": ens.seeds_, "noise_seed": config.noise_seed},
        {"ensemble": out, "dataset": Path(args.dataset)},
        started,
    )
    for k, log in enumerate(ens.training_logs_):
        print(f"member {k}: {log.epochs} epochs, stop={log.stop_reason}, val MSE {log.val_loss:.3e}")
    return 0


# evaluate / run-scenario ----------------------------------------------------------


def _checks(report) -> bool:
    fc = report.details.get("forward_consistency")
    return fc is None or fc["holds"]


def cmd_evaluate(args) -> int:
    started = _now()
    if not Path(args.ensemble).exists():
        raise CLIError(f"ensemble {args.ensemble} not found")
    ens = load_ensemble(args.ensemble)
    meta = ens.metadata_
    config = ScenarioConfig.from_dict(meta["scenario"])
    if args.alpha is not None:
        config = config.replace(alpha=args.alpha)
    mask = None if meta.get("input_mask") is None else np.asarray(meta["input_mask"], dtype=bool)
    model = _model(args)
    report = evaluate_scenario(model, config, ens, mask)
    paths = write_report(report, args.out_dir)
    print(Path(paths["report"]).read_text(), end="")
    _write_manifest(Path(args.out_dir) / "manifest.json", "evaluate", args, {"noise_seed": config.noise_seed}, {**paths, "ensemble": Path(args.ensemble)}, started)
    return 0 if _checks(report) else EXIT_CHECK_FAILED


def cmd_run_scenario(args) -> int:
    started = _now()
    model = _model(args)
    config = _scenario_config(args)
    out_dir = Path(args.out_dir)
    if args.dataset:
        dataset = load_dataset(args.dataset)
    else:
        dataset = generate_dataset(model, config, jobs=args.jobs)
    report = run_scenario(model, config, dataset=dataset, jobs=args.jobs)
    paths = write_report(report, out_dir)
    ds_path, desc_path = save_dataset(dataset, out_dir / "dataset.csv")
    ens_path = out_dir / "ensemble.json"
    meta = {
        "scenario": config.to_dict(),
        "input_labels": report.ensemble.metadata_["input_labels"],
        "target_labels": report.ensemble.metadata_["target_labels"],
        "input_mask": None if report.mask is None else [bool(v) for v in report.mask],
    }
    save_ensemble(report.ensemble, ens_path, meta)
    print(Path(paths["report"]).read_text(), end="")
    if "speedup" in report.timings:
        t = report.timings
        print(
            f"Surrogate timing: ensemble {t['ensemble_predict_s'] * 1e3:.3f} ms vs forward model "
            f"{t['forward_simulation_s'] * 1e3:.3f} ms ({t['speedup']:.0f}x faster)"
        )
    _write_manifest(
        out_dir / "manifest.json",
        "run-scenario",
        args,
        {"dataset_seed": config.dataset_seed, "train_seed": config.train_seed, "noise_seed": config.noise_seed},
        {**paths, "dataset": ds_path, "descriptor": desc_path, "ensemble": ens_path},
        started,
    )
    return 0 if _checks(report) else EXIT_CHECK_FAILED


# parser ---------------------------------------------------------------------------


def _kind(value: str) -> str:
    v = value.upper()
    if v not in KINDS:
        raise argparse.ArgumentTypeError(f"unknown scenario {value!r} (choose from {', '.join(k.lower() for k in KINDS)})")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gwann", description="Groundwater source identification with LM-trained networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, jobs=True):
        sp.add_argument("--model", type=Path, help="aquifer config (YAML); default: shipped default_aquifer")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    def hyper(sp):
        sp.add_argument("--hidden", type=int, help="hidden neurons (default 10)")
        sp.add_argument("--networks", type=int, help="ensemble size (default 10)")
        sp.add_argument("--epochs", type=int, help="maximum LM epochs (default 1000)")
        sp.add_argument("--max-fail", dest="max_fail", type=int, help="validation checks (default 6)")

    s = sub.add_parser("simulate", help="forward-simulate release rows")
    common(s, seed=False, jobs=False)
    s.add_argument("--releases", type=Path, required=True, help="CSV with a header of S1_p1.. labels")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--snapshots", type=Path, help="directory for concentration grids at observation times")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("gen-dataset", help="generate a Latin hypercube dataset")
    common(g)
    g.add_argument("scenario", type=_kind)
    g.add_argument("--n", type=int, help="dataset size (default per scenario)")
    g.add_argument("--safety", type=float, help="release bound safety factor")
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_gen_dataset)

    t = sub.add_parser("train", help="train a network ensemble on a dataset")
    common(t)
    hyper(t)
    t.add_argument("--dataset", type=Path, required=True)
    t.add_argument("--alpha", type=float, help="input noise level for INV1-INV3")
    t.add_argument("--noise-seed", dest="noise_seed", type=int)
    t.add_argument("--out", type=Path, required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="evaluate an ensemble on the golden test")
    common(e, seed=False, jobs=False)
    e.add_argument("--ensemble", type=Path, required=True)
    e.add_argument("--alpha", type=float, help="override the golden-test noise level")
    e.add_argument("--out-dir", dest="out_dir", type=Path, required=True)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("run-scenario", help="dataset, training and evaluation in one run")
    common(r)
    hyper(r)
    r.add_argument("scenario", type=_kind)
    r.add_argument("--alpha", type=float, default=0.0)
    r.add_argument("--n", type=int, help="dataset size (default per scenario)")
    r.add_argument("--safety", type=float, help="release bound safety factor")
    r.add_argument("--dataset-seed", dest="dataset_seed", type=int)
    r.add_argument("--train-seed", dest="train_seed", type=int)
    r.add_argument("--noise-seed", dest="noise_seed", type=int)
    r.add_argument("--dataset", type=Path, help="reuse a clean dataset instead of generating one")
    r.add_argument("--out-dir", dest="out_dir", type=Path, required=True)
    r.set_defaults(func=cmd_run_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CLIError, ModelConfigError, SamplingError, ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"gwann {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
