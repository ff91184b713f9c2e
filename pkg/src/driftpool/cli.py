"""Command-line front end: run, compare, generate, purity.

Configuration precedence is defaults < config file (`key = value`
lines, # comments) < explicit CLI flags. A run can also be driven by a
saved JSON manifest, which pins every input and reproduces its results
bit for bit. Exit codes: 0 success, 2 validation problems, 3 runtime
failures, 4 file or data-format problems. Set DRIFTPOOL_LOG=debug|info
for progress logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

from . import engine
from .data import (
    ConceptSpec,
    SyntheticSpec,
    default_stream_spec,
    generate,
    load_csv,
    write_labels_csv,
    write_series_csv,
)
from .errors import (
    ColumnNotFoundError,
    DriftpoolError,
    RowParseError,
    ValidationError,
)
from .manifest import (
    RunManifest,
    build_bundle,
    load_manifest,
    parse_config_file,
    read_bundle,
    resolve_series,
    save_manifest,
    split_cep_settings,
    write_bundle,
)
from .pool import CepConfig

log = logging.getLogger("driftpool.cli")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


# --- run --------------------------------------------------------------------

def cmd_run(manifest: RunManifest, out_dir: str | None = None,
            log_forecasts: bool = False) -> dict:
    """Execute one manifest; write the bundle when an output dir is known."""
    source, labels = resolve_series(manifest)
    config = manifest.engine_config(log_forecasts=log_forecasts)
    log.info("running %s on %s (%d points)", manifest.forecaster, source.origin, source.n)
    result = engine.run(source.values, config)
    bundle = build_bundle(manifest, result, source.n)
    target = out_dir if out_dir is not None else manifest.out_dir
    if target is not None:
        paths = write_bundle(bundle, target, labels=labels)
        save_manifest(manifest, Path(target) / "manifest.json")
        log.info("wrote %s", paths["results"])
    agg = bundle["aggregate"]
    print(
        f"mean_mse={agg['mean_mse']:.6g} instances={agg['n_instances']} "
        f"pool={agg['final_pool_size']} evolutions={agg['total_evolutions']} "
        f"eliminations={agg['total_eliminations']} hash={bundle['config_hash'][:12]}"
    )
    return bundle


def _manifest_from_args(args) -> RunManifest:
    settings = parse_config_file(args.config) if args.config else {}
    cep_kwargs, other = split_cep_settings(settings)

    # CLI flags override config-file values.
    if args.no_evolution:
        cep_kwargs["evolution"] = False
    if args.no_elimination:
        cep_kwargs["elimination"] = False
    if args.no_abandonment:
        cep_kwargs["gradient_abandonment"] = False
    if args.no_lr_adjust:
        cep_kwargs["optimizer_adjustment"] = False
    if args.local_only:
        cep_kwargs["use_global_gene"] = False
    if args.global_only:
        cep_kwargs["use_local_gene"] = False
    if args.max_pool is not None:
        cep_kwargs["max_pool_size"] = args.max_pool
    if args.score is not None:
        cep_kwargs["retrieval_score"] = args.score

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return other.get(key, default)

    lookback = pick(args.lookback, "lookback", None)
    horizon = pick(args.horizon, "horizon", None)
    if lookback is None or horizon is None:
        raise ValidationError("--lookback and --horizon are required (flag or config file)")
    data_path = args.data if args.data else other.get("data")
    if data_path is None:
        raise ValidationError("--data is required unless --manifest is given")

    return RunManifest(
        data={
            "kind": "csv",
            "path": str(data_path),
            "column": str(pick(args.column, "column", "0")),
            "has_header": False if args.no_header else other.get("has_header", True),
        },
        lookback=int(lookback),
        horizon=int(horizon),
        forecaster=pick(args.forecaster, "forecaster", "linear"),
        hidden=int(pick(args.hidden, "hidden", 32)),
        cep=CepConfig(**cep_kwargs),
        lr_raw=pick(args.lr, "lr_raw", None),
        warm_epochs=int(pick(args.warm_epochs, "warm_epochs", 5)),
        seed=int(pick(args.seed, "seed", 0)),
        normalize=pick(args.normalize, "normalize", "off"),
        out_dir=args.out,
    )


def _run_command(args) -> int:
    if args.manifest:
        manifest = load_manifest(args.manifest)
    else:
        manifest = _manifest_from_args(args)
    cmd_run(manifest, out_dir=args.out, log_forecasts=args.log_forecasts)
    return EXIT_OK


# --- compare ------------------------------------------------------------------

def cmd_compare(manifests: list[RunManifest], names: list[str] | None = None,
                out_dir: str | None = None) -> list[dict]:
    """Run every manifest and report mean MSE deltas against the first one."""
    if len(manifests) < 2:
        raise ValidationError("compare needs at least 2 manifests")
    head = manifests[0]
    for i, m in enumerate(manifests[1:], start=2):
        if m.data != head.data or m.lookback != head.lookback or m.horizon != head.horizon:
            raise ValidationError(
                f"manifest #{i} differs from the baseline in data/lookback/horizon"
            )
    names = names if names is not None else [f"manifest{i}" for i in range(len(manifests))]
    rows = []
    for name, m in zip(names, manifests):
        source, _ = resolve_series(m)
        result = engine.run(source.values, m.engine_config())
        rows.append({"name": name, "mean_mse": result.mean_mse})
    base = rows[0]["mean_mse"]
    for row in rows:
        row["delta_pct"] = (row["mean_mse"] - base) / base * 100.0

    width = max(len(r["name"]) for r in rows)
    print(f"{'manifest':<{width}}  {'mean_mse':>12}  {'delta':>9}")
    for i, row in enumerate(rows):
        delta = "-" if i == 0 else f"{row['delta_pct']:+.2f}%"
        print(f"{row['name']:<{width}}  {row['mean_mse']:>12.6f}  {delta:>9}")

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "compare.csv", "w", encoding="utf-8") as fh:
            fh.write("manifest,mean_mse,delta_pct\n")
            for row in rows:
                fh.write(f"{row['name']},{row['mean_mse']:.17g},{row['delta_pct']:.2f}\n")
    return rows


def _compare_command(args) -> int:
    manifests = [load_manifest(p) for p in args.manifests]
    names = [Path(p).stem for p in args.manifests]
    if len(set(names)) != len(names):  # disambiguate colliding file stems
        names = ["/".join(Path(p).parts[-2:]) for p in args.manifests]
    cmd_compare(manifests, names=names, out_dir=args.out)
    return EXIT_OK


# --- generate -----------------------------------------------------------------

def _spec_from_json(path: str | Path, seed: int | None) -> SyntheticSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    try:
        concepts = tuple(ConceptSpec(**c) for c in d["concepts"])
        schedule = tuple((int(i), int(n)) for i, n in d["schedule"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: bad synthetic spec: {exc}") from exc
    use_seed = seed if seed is not None else int(d.get("seed", 0))
    return SyntheticSpec(concepts=concepts, schedule=schedule, seed=use_seed)


def cmd_generate(spec: SyntheticSpec, out_dir: str | Path) -> dict:
    """Write values.csv and labels.csv for a synthetic spec; print a summary."""
    stream = generate(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    values_path = out / "values.csv"
    labels_path = out / "labels.csv"
    write_series_csv(values_path, stream.values)
    write_labels_csv(labels_path, stream.labels)

    print(f"points={len(stream.values)} segments={len(spec.schedule)} seed={spec.seed}")
    for idx, concept in enumerate(spec.concepts):
        mask = stream.labels == idx
        if mask.any():
            seg_vals = stream.values[mask]
            print(
                f"concept {idx}: level={concept.level} points={int(mask.sum())} "
                f"mean={seg_vals.mean():.4f} std={seg_vals.std():.4f}"
            )
    return {"values": values_path, "labels": labels_path, "n": len(stream.values)}


def _generate_command(args) -> int:
    if args.spec:
        spec = _spec_from_json(args.spec, args.seed)
    else:
        spec = default_stream_spec(
            noise_sigma=args.noise, seed=args.seed if args.seed is not None else 0
        )
    cmd_generate(spec, args.out)
    return EXIT_OK


# --- purity -------------------------------------------------------------------

def instance_label(labels: np.ndarray, t: int, lookback: int) -> int | None:
    """Strict-majority concept of the input window; None when tied (no majority)."""
    window = labels[t:t + lookback]
    counts = Counter(window.tolist())
    top = counts.most_common(2)
    if len(top) > 1 and top[0][1] == top[1][1]:
        return None
    return int(top[0][0])


def compute_purity(records: list[dict], labels: np.ndarray, lookback: int,
                   tau_safe: int, skip_safety: bool = False) -> dict:
    """Fraction of instances routed to an entry whose majority concept matches.

    Instances whose input window is split evenly between concepts have no
    majority label and are left out of the calculation. With skip_safety,
    each entry's first tau_safe served instances are also left out.
    """
    if not records:
        raise ValidationError("no records to score")
    needed = max(r["t"] for r in records) + lookback
    if len(labels) < needed:
        raise ValidationError(
            f"length mismatch: records need {needed} label points, got {len(labels)}"
        )
    counted: list[tuple[int, int]] = []  # (entry_id, label)
    n_ties = 0
    n_safety = 0
    serves: dict[int, int] = defaultdict(int)
    for rec in sorted(records, key=lambda r: r["t"]):
        entry = rec["entry_id"]
        serves[entry] += 1
        if skip_safety and serves[entry] <= tau_safe:
            n_safety += 1
            continue
        label = instance_label(labels, rec["t"], lookback)
        if label is None:
            n_ties += 1
            continue
        counted.append((entry, label))
    if not counted:
        raise ValidationError("no instances with an unambiguous concept label")

    per_entry: dict[int, Counter] = defaultdict(Counter)
    for entry, label in counted:
        per_entry[entry][label] += 1
    majority = {
        entry: min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        for entry, c in per_entry.items()
    }
    matches = sum(1 for entry, label in counted if majority[entry] == label)
    entries_report = {
        entry: {
            "instances": sum(c.values()),
            "majority": majority[entry],
            "matches": sum(n for lab, n in c.items() if lab == majority[entry]),
        }
        for entry, c in sorted(per_entry.items())
    }
    return {
        "purity": matches / len(counted),
        "n_counted": len(counted),
        "n_excluded_ties": n_ties,
        "n_excluded_safety": n_safety,
        "entries": entries_report,
    }


def cmd_purity(results_path: str | Path, labels_path: str | Path,
               skip_safety: bool = False) -> dict:
    """Score how cleanly a labeled synthetic run routed instances to entries."""
    bundle = read_bundle(results_path)
    labels_source = load_csv(labels_path, "label", has_header=True)
    labels = labels_source.values.astype(np.int64)
    n_points = bundle.get("n_points")
    if n_points is not None and len(labels) != n_points:
        raise ValidationError(
            f"length mismatch: run covered {n_points} points, labels file has {len(labels)}"
        )
    lookback = bundle["manifest"]["lookback"]
    tau_safe = bundle["manifest"]["cep"]["tau_safe"]
    report = compute_purity(bundle["records"], labels, lookback, tau_safe,
                            skip_safety=skip_safety)
    print(
        f"purity={report['purity']:.4f} counted={report['n_counted']} "
        f"ties_excluded={report['n_excluded_ties']} "
        f"safety_excluded={report['n_excluded_safety']}"
    )
    for entry, info in report["entries"].items():
        print(
            f"entry {entry}: served={info['instances']} majority={info['majority']} "
            f"matches={info['matches']}"
        )
    return report


def _purity_command(args) -> int:
    cmd_purity(args.results, args.labels, skip_safety=args.skip_safety)
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftpool",
        description="Streaming forecasting with a pool of concept-specialized models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one run and write a results bundle")
    p_run.add_argument("--manifest", help="JSON manifest pinning the whole run")
    p_run.add_argument("--data", help="CSV file with the input series")
    p_run.add_argument("--column", help="column name or zero-based index")
    p_run.add_argument("--no-header", action="store_true", help="file has no header row")
    p_run.add_argument("--lookback", type=int)
    p_run.add_argument("--horizon", type=int)
    p_run.add_argument("--forecaster", choices=("naive", "linear", "mlp"))
    p_run.add_argument("--hidden", type=int, help="MLP hidden width")
    p_run.add_argument("--config", help="flat key = value config file")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--lr", type=float, help="raw learning rate")
    p_run.add_argument("--warm-epochs", type=int, dest="warm_epochs")
    p_run.add_argument("--normalize", choices=("off", "warm_segment", "whole"))
    p_run.add_argument("--out", help="output directory for the results bundle")
    p_run.add_argument("--no-evolution", action="store_true")
    p_run.add_argument("--no-elimination", action="store_true")
    p_run.add_argument("--no-abandonment", action="store_true")
    p_run.add_argument("--no-lr-adjust", action="store_true")
    p_run.add_argument("--local-only", action="store_true", help="disable the global gene")
    p_run.add_argument("--global-only", action="store_true", help="disable the local gene")
    p_run.add_argument("--max-pool", type=int, help="FIFO cap on pool size")
    p_run.add_argument("--score", choices=("euclidean", "mle"), help="retrieval score")
    p_run.add_argument("--log-forecasts", action="store_true",
                       help="store full forecasts in the bundle")
    p_run.set_defaults(func=_run_command)

    p_cmp = sub.add_parser("compare", help="run several manifests and tabulate deltas")
    p_cmp.add_argument("manifests", nargs="+", help="manifest JSON files (first = baseline)")
    p_cmp.add_argument("--out", help="directory for compare.csv")
    p_cmp.set_defaults(func=_compare_command)

    p_gen = sub.add_parser("generate", help="write a synthetic labeled stream as CSV")
    p_gen.add_argument("--spec", help="JSON spec file (default: built-in recurring stream)")
    p_gen.add_argument("--seed", type=int, help="override the spec seed")
    p_gen.add_argument("--noise", type=float, default=0.25,
                       help="noise sigma for the built-in spec")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.set_defaults(func=_generate_command)

    p_pur = sub.add_parser("purity", help="score routing quality on a labeled run")
    p_pur.add_argument("--results", required=True, help="results.json from a run")
    p_pur.add_argument("--labels", required=True, help="labels.csv of the same stream")
    p_pur.add_argument("--skip-safety", action="store_true",
                       help="ignore each entry's first tau_safe served instances")
    p_pur.set_defaults(func=_purity_command)

    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("DRIFTPOOL_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ColumnNotFoundError, RowParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DriftpoolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
