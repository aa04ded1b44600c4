"""Experiment configuration and the flat ``section.key = value`` file format.

Sections map to config dataclasses: ``walk`` (WalkConfig), ``lr`` (LrConfig),
``gru`` (GruConfig), ``gbdt`` (GbdtConfig) and ``experiment``.  A
comma-separated value under ``gbdt`` turns that field into a grid axis.
Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .gbdt import GbdtConfig
from .gru import GruConfig
from .linear import LrConfig
from .node2vec import WalkConfig

METHODS = ("LR", "HS", "WS", "AUTH", "LR+AUTH", "HS+AUTH", "WS+AUTH")

DEFAULT_GBDT_AXES: dict[str, tuple] = {
    "learning_rate": (0.05, 0.1),
    "max_depth": (3, 5),
    "min_samples_leaf": (10, 20),
    "rounds": (100, 200),
}


@dataclass
class ExperimentConfig:
    walk: WalkConfig = field(default_factory=WalkConfig)
    lr: LrConfig = field(default_factory=LrConfig)
    gru: GruConfig = field(default_factory=GruConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    gbdt_axes: dict[str, tuple] = field(default_factory=lambda: dict(DEFAULT_GBDT_AXES))
    embedding_dims: int = 200
    embedding_file: str | None = None
    # cut n-grams from the raw text instead of the normalised tokens
    ngram_raw_text: bool = False
    folds: int = 10
    inner_folds: int = 5
    methods: tuple[str, ...] = METHODS
    seed: int = 0

    def validate(self) -> None:
        self.walk.validate()
        self.lr.validate()
        self.gru.validate()
        for c in self.gbdt_grid():
            c.validate()
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
        if self.folds < 2 or self.inner_folds < 2 or self.embedding_dims < 1:
            raise ConfigError("folds and inner_folds must be >= 2, embedding_dims >= 1")

    def gbdt_grid(self) -> list[GbdtConfig]:
        """Cartesian product of the axes, later axes varying fastest."""
        names = list(self.gbdt_axes)
        return [replace(self.gbdt, **dict(zip(names, combo)))
                for combo in itertools.product(*(self.gbdt_axes[n] for n in names))]

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(self, seed=seed, walk=replace(self.walk, seed=seed), lr=replace(self.lr, seed=seed),
                       gru=replace(self.gru, seed=seed), gbdt=replace(self.gbdt, seed=seed))

    def as_dict(self) -> dict[str, Any]:
        return {
            "walk": dataclasses.asdict(self.walk),
            "lr": dataclasses.asdict(self.lr),
            "gru": dataclasses.asdict(self.gru),
            "gbdt": dataclasses.asdict(self.gbdt),
            "gbdt_axes": {k: list(v) for k, v in self.gbdt_axes.items()},
            "experiment": {"embedding_dims": self.embedding_dims, "embedding_file": self.embedding_file,
                           "ngram_raw_text": self.ngram_raw_text,
                           "folds": self.folds, "inner_folds": self.inner_folds,
                           "methods": list(self.methods), "seed": self.seed},
        }

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def full_config() -> ExperimentConfig:
    return ExperimentConfig()


def desk_config() -> ExperimentConfig:
    """Reduced settings for the synthetic corpus on a single laptop core.

    Profiles keep 200 dimensions; walks are shorter and training runs fewer
    epochs.  The GRU runs at d = 25 with 32 hidden units, and GBDT uses one
    fixed configuration instead of the grid.
    """
    return ExperimentConfig(
        walk=WalkConfig(walk_length=40, walks_per_node=10, window=5, epochs=5),
        gru=GruConfig(hidden_units=32, batch_size=64),
        gbdt=GbdtConfig(rounds=100, learning_rate=0.1, max_depth=3, min_samples_leaf=10),
        gbdt_axes={},
        embedding_dims=25,
    )


PRESETS = {"full": full_config, "desk": desk_config}


def _convert(raw: str, like: Any, key: str) -> Any:
    if raw.lower() in ("none", "null", ""):
        return None
    if isinstance(like, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(like, int) or like is None and raw.lstrip("-").isdigit():
            return int(raw)
        if isinstance(like, float) or like is None:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str, base: ExperimentConfig | None = None, source: str = "<config>") -> ExperimentConfig:
    cfg = base if base is not None else full_config()
    sections = {"walk": cfg.walk, "lr": cfg.lr, "gru": cfg.gru, "gbdt": cfg.gbdt}
    updates: dict[str, dict[str, Any]] = {k: {} for k in sections}
    axes = dict(cfg.gbdt_axes)
    top: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "preset":
            if raw not in PRESETS:
                raise ConfigError(f"{source}:{lineno}: unknown preset {raw!r}")
            if lineno != 1 and (any(updates.values()) or top):
                raise ConfigError(f"{source}:{lineno}: 'preset' must come before other keys")
            cfg = PRESETS[raw]()
            sections = {"walk": cfg.walk, "lr": cfg.lr, "gru": cfg.gru, "gbdt": cfg.gbdt}
            axes = dict(cfg.gbdt_axes)
            continue
        section, _, name = key.partition(".")
        if section in sections:
            obj = sections[section]
            names = {f.name for f in fields(obj)}
            if name not in names:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            like = getattr(obj, name)
            if name == "max_bins":
                like = 0
            parts = [p.strip() for p in raw.split(",")]
            values = [_convert(p, like, key) for p in parts]
            if section == "gbdt" and len(values) > 1:
                axes[name] = tuple(values)
            else:
                if len(values) > 1:
                    raise ConfigError(f"{source}:{lineno}: only gbdt keys accept lists")
                updates[section][name] = values[0]
                if section == "gbdt":
                    axes.pop(name, None)
        elif section == "experiment":
            if name == "methods":
                top[name] = tuple(p.strip() for p in raw.split(",") if p.strip())
            elif name == "embedding_file":
                top[name] = None if raw.lower() in ("", "none") else raw
            elif name == "ngram_raw_text":
                top[name] = _convert(raw, False, key)
            elif name in ("embedding_dims", "folds", "inner_folds", "seed"):
                top[name] = _convert(raw, 0, key)
            else:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        else:
            raise ConfigError(f"{source}:{lineno}: unknown section in {key!r}")
    try:
        cfg = replace(cfg,
                      walk=replace(cfg.walk, **updates["walk"]),
                      lr=replace(cfg.lr, **updates["lr"]),
                      gru=replace(cfg.gru, **updates["gru"]),
                      gbdt=replace(cfg.gbdt, **updates["gbdt"]),
                      gbdt_axes=axes, **top)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg.validate()
    return cfg


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), base, str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config_text` (round-trips every field)."""
    lines = []
    for section in ("walk", "lr", "gru", "gbdt"):
        obj = getattr(cfg, section)
        for f in fields(obj):
            if section == "gbdt" and f.name in cfg.gbdt_axes:
                continue
            lines.append(f"{section}.{f.name} = {_fmt(getattr(obj, f.name))}")
    for name, values in cfg.gbdt_axes.items():
        lines.append(f"gbdt.{name} = " + ", ".join(_fmt(v) for v in values))
    lines.append(f"experiment.embedding_dims = {cfg.embedding_dims}")
    lines.append(f"experiment.embedding_file = {cfg.embedding_file or 'none'}")
    lines.append(f"experiment.ngram_raw_text = {_fmt(cfg.ngram_raw_text)}")
    lines.append(f"experiment.folds = {cfg.folds}")
    lines.append(f"experiment.inner_folds = {cfg.inner_folds}")
    lines.append("experiment.methods = " + ",".join(cfg.methods))
    lines.append(f"experiment.seed = {cfg.seed}")
    return "\n".join(lines) + "\n"


def _fmt(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)
