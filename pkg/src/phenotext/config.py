"""Pipeline configuration: a flat ``key = value`` file and a content hash.

Every artifact a run produces carries the SHA-256 of the canonical JSON form
of the config that produced it — embedded as a ``config_hash`` field in JSON
artifacts, or in a ``<path>.meta.json`` sidecar for formats whose layout is
pinned (corpora, CSV tables, binary embeddings).  Reruns with the same config
and inputs can then be recognized by hash equality alone.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


@dataclass
class PipelineConfig:
    train_path: str = ""
    test_path: str = ""
    corpus_format: str = "jsonl"  # "jsonl" | "n2c2_xml"
    lexicon_path: str = ""  # empty -> bundled gazetteer
    consolidate: bool = True
    top_k: int = 250
    n_components: int = 7
    knn_k: int = 27
    svm_c: float = 1.0
    svm_kernel: str = "rbf"
    svm_gamma: str = "scale"  # "scale" or a positive float literal
    svm_tol: float = 1e-3
    svm_max_passes: int = 100
    mlp_hidden: tuple = (32, 16, 8, 4, 2, 1)
    dropout_rate: float = 0.25
    learning_rate: float = 0.001
    lr_floor: float = 0.00005
    lr_reduce_factor: float = 0.5
    lr_patience: int = 10
    early_stop_patience: int = 25
    min_delta: float = 1e-4
    max_epochs: int = 500
    restart_f1_threshold: float = 0.6
    max_restarts: int = 5
    batch_size: int = 32
    seed: int = 0
    embeddings_train: str = ""  # optional PHEB1 path enabling the lstm branch
    embeddings_test: str = ""
    out_dir: str = "run_out"

    def __post_init__(self):
        self.mlp_hidden = tuple(int(h) for h in self.mlp_hidden)
        if self.corpus_format not in ("jsonl", "n2c2_xml"):
            raise ConfigError(f"unknown corpus_format {self.corpus_format!r}")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.n_components < 1:
            raise ConfigError("n_components must be >= 1")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be >= 1")
        if self.svm_gamma != "scale":
            try:
                g = float(self.svm_gamma)
            except ValueError:
                raise ConfigError(
                    f"svm_gamma must be 'scale' or a number, got {self.svm_gamma!r}"
                ) from None
            if g <= 0:
                raise ConfigError("numeric svm_gamma must be positive")
        if bool(self.embeddings_train) != bool(self.embeddings_test):
            raise ConfigError(
                "embeddings_train and embeddings_test must be given together"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mlp_hidden"] = list(self.mlp_hidden)
        return d

    def gamma_value(self):
        return "scale" if self.svm_gamma == "scale" else float(self.svm_gamma)


def _coerce(name: str, raw: str, kind: type, where: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(int(p) for p in raw.split(",") if p.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {name}: {exc}") from exc


def _field_kinds() -> dict[str, type]:
    defaults = PipelineConfig()
    return {f.name: type(getattr(defaults, f.name)) for f in fields(PipelineConfig)}


def load_config(path) -> PipelineConfig:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    kinds = _field_kinds()
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key, raw = (p.strip() for p in line.split("=", 1))
            if key not in kinds:
                raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
            values[key] = _coerce(key, raw, kinds[key], f"{path}: line {lineno}")
    return PipelineConfig(**values)


def apply_overrides(cfg: PipelineConfig, overrides: dict[str, str]) -> PipelineConfig:
    """New config with string overrides coerced onto it (CLI flags win)."""
    kinds = _field_kinds()
    values = cfg.to_dict()
    for key, raw in overrides.items():
        if key not in kinds:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, str(raw), kinds[key], f"override {key}")
    return PipelineConfig(**values)


def save_config(cfg: PipelineConfig, path) -> None:
    lines = [f"{k} = {_render(v)}" for k, v in cfg.to_dict().items()]
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(str(p) for p in v)
    return str(v)


def config_hash(cfg) -> str:
    """SHA-256 hex digest of the canonical (sorted, compact) JSON form."""
    d = cfg.to_dict() if isinstance(cfg, PipelineConfig) else dict(cfg)
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_meta_sidecar(artifact_path, cfg_hash: str, extra: dict | None = None) -> None:
    """Provenance sidecar for artifacts whose own format is pinned."""
    meta = {"config_hash": cfg_hash}
    if extra:
        meta.update(extra)
    path = f"{artifact_path}.meta.json"
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
