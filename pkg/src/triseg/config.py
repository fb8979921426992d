"""Experiment configuration: a flat key = value text format and seed fan-out.

Example config file:

    mode = tri
    lambda = 0.1
    pairs = 1-3,1-4,4-2
    correlation_levels = 3
    seed = 7
    epochs = 60
    data = synthetic
    count = 50
    shape = 32,32,32
    preset = desk
"""

import hashlib
from dataclasses import dataclass, fields, replace

from .backbone import NetworkConfig, desk_config, paper_config
from .fusion import DEFAULT_PAIRS, EXPRESSIONS, oriented_pairs
from .network import MODES


class ConfigError(ValueError):
    pass


def seed_for(master_seed, label):
    """Deterministic per-component seed derived from the master seed."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2 ** 63)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "tri"
    lam: float = 0.1
    pairs: tuple = DEFAULT_PAIRS
    pair_direction: str = "forward"
    correlation_levels: tuple = None  # None -> deepest level
    expression: str = "nonlinear"
    lr: float = 5e-4
    lr_factor: float = 0.5
    lr_patience: int = 10
    early_stop_patience: int = 50
    test_fraction: float = 0.2
    seed: int = 0
    epochs: int = 60
    data: str = "synthetic"  # or a directory of .mmv files
    count: int = 50
    shape: tuple = (32, 32, 32)
    noise: float = 0.3
    preset: str = "desk"
    dropout: float = 0.2
    modality_scalar: bool = False
    deterministic: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.expression not in EXPRESSIONS:
            raise ConfigError(f"expression must be one of {EXPRESSIONS}")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.preset not in ("desk", "paper"):
            raise ConfigError(f"preset must be desk or paper, got {self.preset!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")

    def normalized(self):
        """Apply the mode invariants: baseline has no correlation placement,
        dual has no pairs; tri defaults its placement to the deepest level."""
        cfg = self
        if cfg.mode == "baseline":
            cfg = replace(cfg, pairs=(), correlation_levels=())
        elif cfg.mode == "dual":
            cfg = replace(cfg, pairs=(), correlation_levels=())
        elif cfg.correlation_levels is None:
            cfg = replace(cfg, correlation_levels=(cfg.network().levels,))
        return cfg

    def network(self) -> NetworkConfig:
        base = desk_config if self.preset == "desk" else paper_config
        return base(input_shape=tuple(self.shape), dropout=self.dropout,
                    modality_scalar=self.modality_scalar)

    def training_pairs(self):
        return oriented_pairs(self.pairs, self.pair_direction) if self.mode == "tri" else ()

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            key = "lambda" if f.name == "lam" else f.name
            lines.append(f"{key} = {_format_value(v)}")
        return "\n".join(lines) + "\n"

    def config_hash(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _format_value(v):
    if v is None:
        return "default"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ",".join(f"{i}-{j}" for i, j in v)
        return ",".join(str(x) for x in v)
    return str(v)


_FIELD_ALIASES = {"lambda": "lam"}


def _parse_value(name, text, py_type):
    text = text.strip()
    if text == "default":
        return None
    if name == "pairs":
        if not text:
            return ()
        try:
            return tuple(tuple(int(x) for x in p.split("-")) for p in text.split(","))
        except ValueError:
            raise ConfigError(f"cannot parse pairs {text!r} (expected like 1-3,1-4)")
    if name in ("correlation_levels", "shape"):
        if not text:
            return ()
        return tuple(int(x) for x in text.split(","))
    if py_type is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean {name} = {text!r}")
    if py_type is int:
        return int(text)
    if py_type is float:
        return float(text)
    return text


def parse_config(text) -> ExperimentConfig:
    """Parse the flat key = value format ('#' starts a comment)."""
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        name = _FIELD_ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        py_type = {"int": int, "float": float, "bool": bool, "str": str}.get(
            known[name] if isinstance(known[name], str) else known[name].__name__, str)
        values[name] = _parse_value(name, val, py_type)
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc))


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        fh.write(cfg.to_text())
