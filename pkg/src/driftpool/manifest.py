"""Run manifests and results bundles: the serialized face of the engine.

A manifest pins everything a run depends on, so re-running it
reproduces the result bit for bit; its hash doubles as a result
provenance tag. Bundles are written as one self-describing JSON file
plus flat CSV extracts (per-instance errors, gene trajectories) that
external plotting can consume directly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .data import (
    ConceptSpec,
    SeriesSource,
    SyntheticSpec,
    generate,
    load_csv,
    normalize,
    write_labels_csv,
)
from .engine import EngineConfig, RunResult
from .errors import ValidationError
from .pool import CepConfig

SCHEMA_VERSION = 1

NORMALIZE_MODES = ("off", "warm_segment", "whole")


@dataclass(frozen=True)
class RunManifest:
    """Fully serializable description of one run."""

    data: dict
    lookback: int
    horizon: int
    forecaster: str = "linear"
    hidden: int = 32
    cep: CepConfig = field(default_factory=CepConfig)
    lr_raw: float | None = None
    warm_epochs: int = 5
    seed: int = 0
    normalize: str = "off"
    out_dir: str | None = None

    def __post_init__(self):
        if self.normalize not in NORMALIZE_MODES:
            raise ValidationError(
                f"normalize must be one of {NORMALIZE_MODES}, got {self.normalize!r}"
            )
        if not isinstance(self.data, dict):
            raise ValidationError("data must be an object with a 'kind' field")
        kind = self.data.get("kind")
        if kind == "csv":
            if "path" not in self.data or "column" not in self.data:
                raise ValidationError("data.kind=csv requires data.path and data.column")
        elif kind == "synthetic":
            self.synthetic_spec()  # validates
        else:
            raise ValidationError(f"data.kind must be csv or synthetic, got {kind!r}")

    def synthetic_spec(self) -> SyntheticSpec:
        if self.data.get("kind") != "synthetic":
            raise ValidationError("manifest data is not synthetic")
        try:
            concepts = tuple(ConceptSpec(**c) for c in self.data["concepts"])
            schedule = tuple((int(i), int(d)) for i, d in self.data["schedule"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad synthetic data spec: {exc}") from exc
        return SyntheticSpec(concepts=concepts, schedule=schedule,
                             seed=int(self.data.get("seed", 0)))

    def to_dict(self) -> dict:
        d = {
            "data": self.data,
            "lookback": self.lookback,
            "horizon": self.horizon,
            "forecaster": self.forecaster,
            "hidden": self.hidden,
            "cep": dataclasses.asdict(self.cep),
            "lr_raw": self.lr_raw,
            "warm_epochs": self.warm_epochs,
            "seed": self.seed,
            "normalize": self.normalize,
        }
        if self.out_dir is not None:
            d["out_dir"] = self.out_dir
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown manifest fields: {sorted(unknown)}")
        for key in ("data", "lookback", "horizon"):
            if key not in d:
                raise ValidationError(f"manifest is missing required field {key!r}")
        cep_dict = d.get("cep", {})
        if not isinstance(cep_dict, dict):
            raise ValidationError("cep must be an object of threshold/switch fields")
        cep_known = {f.name for f in dataclasses.fields(CepConfig)}
        cep_unknown = set(cep_dict) - cep_known
        if cep_unknown:
            raise ValidationError(f"unknown cep fields: {sorted(cep_unknown)}")
        cep = CepConfig(**cep_dict)
        kwargs = {k: v for k, v in d.items() if k != "cep"}
        return cls(cep=cep, **kwargs)

    def config_hash(self) -> str:
        """Hash of everything that affects the result (the output dir does not)."""
        payload = self.to_dict()
        payload.pop("out_dir", None)
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def engine_config(self, log_forecasts: bool = False) -> EngineConfig:
        return EngineConfig(
            lookback=self.lookback,
            horizon=self.horizon,
            cep=self.cep,
            forecaster=self.forecaster,
            hidden=self.hidden,
            lr_raw=self.lr_raw,
            warm_epochs=self.warm_epochs,
            seed=self.seed,
            log_forecasts=log_forecasts,
        )


def save_manifest(manifest: RunManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str | Path) -> RunManifest:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ValidationError(f"{path}: manifest must be a JSON object")
    return RunManifest.from_dict(d)


def resolve_series(manifest: RunManifest) -> tuple[SeriesSource, np.ndarray | None]:
    """Materialize the manifest's data source; labels only exist for synthetic."""
    if manifest.data["kind"] == "csv":
        source = load_csv(
            manifest.data["path"],
            str(manifest.data["column"]),
            bool(manifest.data.get("has_header", True)),
        )
        labels = None
    else:
        spec = manifest.synthetic_spec()
        stream = generate(spec)
        source = stream.source(seed=spec.seed)
        labels = stream.labels
    if manifest.normalize != "off":
        source, _, _ = normalize(source, manifest.normalize)
    return source, labels


# --- flat key = value config files -----------------------------------------

_CONFIG_COERCERS: dict[str, Any] = {
    "tau_mu": float, "tau_gene": float, "tau_l": float, "tau_safe": int,
    "tau_e": float, "tau_lr": float, "t_lr": int, "scope_s": int,
    "retrieval_score": str, "evolution": bool, "elimination": bool,
    "gradient_abandonment": bool, "optimizer_adjustment": bool,
    "use_local_gene": bool, "use_global_gene": bool, "max_pool_size": int,
    "lookback": int, "horizon": int, "forecaster": str, "hidden": int,
    "lr_raw": float, "warm_epochs": int, "seed": int, "normalize": str,
    "data": str, "column": str, "has_header": bool,
}

_CEP_KEYS = {
    "tau_mu", "tau_gene", "tau_l", "tau_safe", "tau_e", "tau_lr", "t_lr",
    "scope_s", "retrieval_score", "evolution", "elimination",
    "gradient_abandonment", "optimizer_adjustment", "use_local_gene",
    "use_global_gene", "max_pool_size",
}


def _coerce_bool(raw: str, key: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValidationError(f"config key {key}: expected a boolean, got {raw!r}")


def parse_config_file(path: str | Path) -> dict:
    """Parse `key = value` lines (# starts a comment) into typed settings."""
    settings: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValidationError(f"{path} line {line_no}: expected key = value")
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in _CONFIG_COERCERS:
                raise ValidationError(f"{path} line {line_no}: unknown key {key!r}")
            if raw.lower() in ("none", ""):
                settings[key] = None
                continue
            coerce = _CONFIG_COERCERS[key]
            try:
                settings[key] = _coerce_bool(raw, key) if coerce is bool else coerce(raw)
            except ValueError:
                raise ValidationError(
                    f"{path} line {line_no}: cannot parse {raw!r} for {key}"
                ) from None
    return settings


def split_cep_settings(settings: dict) -> tuple[dict, dict]:
    """Partition parsed settings into CepConfig kwargs and the rest."""
    cep = {k: v for k, v in settings.items() if k in _CEP_KEYS}
    other = {k: v for k, v in settings.items() if k not in _CEP_KEYS}
    return cep, other


# --- results bundles --------------------------------------------------------

def build_bundle(manifest: RunManifest, result: RunResult, n_points: int) -> dict:
    created = [{"id": 0, "t": None, "parent": None}]  # the warm-up seed entry
    created += [
        {"id": r.selected_entry_id, "t": r.t, "parent": r.evolved_from}
        for r in result.records if r.evolved
    ]
    eliminated = [
        {"id": eid, "t": r.t}
        for r in result.records for eid in r.eliminated_ids
    ]
    records = []
    for r in result.records:
        rec = {
            "t": r.t,
            "entry_id": r.selected_entry_id,
            "mse": r.mse,
            "evolved": r.evolved,
            "abandoned": r.abandoned,
            "eliminated_ids": list(r.eliminated_ids),
            "pool_size": r.pool_size,
            "gene_mu": r.gene_mu,
            "gene_sigma": r.gene_sigma,
        }
        if r.forecast is not None:
            rec["forecast"] = list(r.forecast)
        records.append(rec)
    return {
        "schema_version": SCHEMA_VERSION,
        "config_hash": manifest.config_hash(),
        "manifest": manifest.to_dict(),
        "n_points": n_points,
        "aggregate": {
            "mean_mse": result.mean_mse,
            "n_instances": len(result.records),
            "final_pool_size": result.final_pool_size,
            "total_evolutions": result.total_evolutions,
            "total_eliminations": result.total_eliminations,
        },
        "events": {"created": created, "eliminated": eliminated},
        "records": records,
    }


def write_bundle(bundle: dict, out_dir: str | Path, labels: np.ndarray | None = None) -> dict:
    """Write results.json plus the flat CSV extracts; returns the file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.json",
        "instances": out / "instances.csv",
        "trajectories": out / "trajectories.csv",
    }
    with open(paths["results"], "w", encoding="utf-8") as fh:
        json.dump(bundle, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["instances"], "w", encoding="utf-8") as fh:
        fh.write("t,entry_id,mse,evolved,abandoned,pool_size\n")
        for r in bundle["records"]:
            fh.write(
                f"{r['t']},{r['entry_id']},{r['mse']:.17g},"
                f"{int(r['evolved'])},{int(r['abandoned'])},{r['pool_size']}\n"
            )
    with open(paths["trajectories"], "w", encoding="utf-8") as fh:
        fh.write("t,entry_id,mu,sigma\n")
        for r in bundle["records"]:
            fh.write(f"{r['t']},{r['entry_id']},{r['gene_mu']:.17g},{r['gene_sigma']:.17g}\n")
    if labels is not None:
        paths["labels"] = out / "labels.csv"
        write_labels_csv(paths["labels"], labels)
    return paths


def read_bundle(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        bundle = json.load(fh)
    if not isinstance(bundle, dict) or "records" not in bundle:
        raise ValidationError(f"{path}: not a results bundle")
    return bundle
