"""Line-oriented ``key = value`` experiment configuration.

Keys carry a dotted block prefix (``online.n_pt = 100``). Blank lines and
``#`` comments are ignored. Lists are comma separated. Unknown keys are
reported as warnings rather than errors.
"""
from dataclasses import asdict, dataclass, field, fields
import hashlib
import json
from pathlib import Path

from .errors import ConfigError

BLOCKS = ("oracle", "gp", "bo", "al", "online")
REQUIRED_BLOCKS = {
    "generate": ("oracle", "bo"),
    "offline": ("oracle", "al"),
    "online": ("oracle", "online"),
    "report": ("oracle", "gp"),
}


@dataclass
class OracleBlock:
    mode: str = "coupled"
    dim: int = 12
    lows: tuple = (0.0,)
    highs: tuple = (1.0,)
    base_power: float = 10000.0
    weights: tuple = (50.0,)
    center: tuple = ()  # empty means box midpoint
    coupling: float = 10.0
    amplitude: float = 0.0
    frequencies: tuple = (6.283185307179586,)
    latency: float = 0.0


@dataclass
class GPBlock:
    nu: float = 0.5
    length_scale: float = 0.75
    signal_variance: float = 1.0
    noise_variance: float = 1e-6
    search: bool = True
    grid_nu: tuple = (0.5, 1.5, 2.5)
    grid_length_scale: tuple = (0.25, 0.75, 2.0, 4.0, 8.0, 16.0)
    grid_signal_variance: tuple = (1.0, 10.0, 100.0)
    grid_noise_variance: tuple = (1e-6,)
    folds: int = 5
    test_fraction: float = 0.2


@dataclass
class BOBlock:
    n_init: int = 20
    n_iters: int = 180
    n_candidates: int = 512
    local_fraction: float = 0.5
    local_scales: tuple = (0.2, 0.05, 0.01)
    nu: float = 2.5
    length_scale: float = 2.0
    signal_variance: float = 1.0
    noise_variance: float = 1e-6


@dataclass
class ALBlock:
    strategy: str = "both"
    init_size: int = 5
    n_rounds: int = -1  # -1: until the pool is exhausted
    test_fraction: float = 0.2
    budget_fraction: float = 0.3
    rmse_tolerance: float = 0.05


@dataclass
class OnlineBlock:
    n_pt: tuple = (100,)
    n_tot: int = 400
    baseline_n_tot: int = -1  # -1: same as n_tot
    stop_target: float = float("nan")  # absolute power; nan means use stop_gap_fraction
    stop_gap_fraction: float = 0.01
    pretrain_variance: str = "in_sample"
    confirm_improvements: bool = False
    max_call_ratio: float = 0.6
    min_pass_rate: float = 0.8


@dataclass
class ExperimentConfig:
    oracle: OracleBlock = field(default_factory=OracleBlock)
    gp: GPBlock = field(default_factory=GPBlock)
    bo: BOBlock = field(default_factory=BOBlock)
    al: ALBlock = field(default_factory=ALBlock)
    online: OnlineBlock = field(default_factory=OnlineBlock)
    seeds: tuple = (0,)
    output_dir: str = "results"
    present_blocks: tuple = ()
    warnings: list = field(default_factory=list)

    def to_dict(self):
        d = {name: asdict(getattr(self, name)) for name in BLOCKS}
        d["seeds"] = list(self.seeds)
        return d

    def config_hash(self):
        """Hash of every resolved experiment value (output location excluded)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(text, default):
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        items = [t.strip() for t in text.split(",") if t.strip()]
        kind = type(default[0]) if default else float
        return tuple(kind(t) for t in items)
    return text.strip()


def parse_lines(lines, command=None):
    cfg = ExperimentConfig()
    errors, warnings = [], []
    present = set()
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key = value, got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key in ("seeds", "output_dir"):
            try:
                if key == "seeds":
                    cfg.seeds = tuple(int(s) for s in value.split(",") if s.strip())
                else:
                    cfg.output_dir = value
            except ValueError as exc:
                errors.append(f"{key}: {exc}")
            continue
        block_name, _, attr = key.partition(".")
        if block_name not in BLOCKS or not attr:
            warnings.append(f"line {lineno}: unknown key {key!r} ignored")
            continue
        block = getattr(cfg, block_name)
        attr = attr.replace(".", "_")
        names = {f.name for f in fields(block)}
        if attr not in names:
            warnings.append(f"line {lineno}: unknown key {key!r} ignored")
            continue
        present.add(block_name)
        try:
            setattr(block, attr, _convert(value, getattr(block, attr)))
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
    cfg.present_blocks = tuple(sorted(present))
    cfg.warnings = warnings
    errors.extend(validate(cfg, command))
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config(path, command=None) -> ExperimentConfig:
    """Read and validate a config file; every violation is reported at once."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_lines(path.read_text().splitlines(), command)


def _expand(values, dim):
    return tuple(values) * dim if len(values) == 1 else tuple(values)


def validate(cfg: ExperimentConfig, command=None):
    errs = []
    if command is not None:
        for block in REQUIRED_BLOCKS.get(command, ()):
            if block not in cfg.present_blocks:
                errs.append(f"missing block {block!r} required by {command!r}")
    if not cfg.seeds:
        errs.append("seeds must be non-empty")

    o = cfg.oracle
    if o.mode not in ("quadratic", "coupled"):
        errs.append(f"oracle.mode must be quadratic or coupled, got {o.mode!r}")
    if o.dim < 1:
        errs.append("oracle.dim must be >= 1")
    lows, highs = _expand(o.lows, o.dim), _expand(o.highs, o.dim)
    if len(lows) != o.dim or len(highs) != o.dim:
        errs.append(f"oracle.lows/oracle.highs must have 1 or {o.dim} entries")
    else:
        bad = [j for j in range(o.dim) if not lows[j] < highs[j]]
        if bad:
            errs.append(f"oracle.lows >= oracle.highs in dimensions {bad}")
    for name in ("weights", "frequencies"):
        if len(getattr(o, name)) not in (1, o.dim):
            errs.append(f"oracle.{name} must have 1 or {o.dim} entries")
    if o.center and len(o.center) not in (1, o.dim):
        errs.append(f"oracle.center must have 1 or {o.dim} entries")
    if o.latency < 0:
        errs.append("oracle.latency must be >= 0")

    g = cfg.gp
    for name, value in (("gp.nu", g.nu), ("bo.nu", cfg.bo.nu)):
        if value not in (0.5, 1.5, 2.5):
            errs.append(f"{name} must be 0.5, 1.5 or 2.5")
    if any(v not in (0.5, 1.5, 2.5) for v in g.grid_nu):
        errs.append("gp.grid.nu entries must be 0.5, 1.5 or 2.5")
    if g.folds < 2:
        errs.append("gp.folds must be >= 2")
    if not 0 < g.test_fraction < 1:
        errs.append("gp.test_fraction must be in (0, 1)")

    b = cfg.bo
    if b.n_init < 2:
        errs.append("bo.n_init must be >= 2")
    if b.n_iters < 0:
        errs.append("bo.n_iters must be >= 0")
    if b.n_candidates < 1:
        errs.append("bo.n_candidates must be >= 1")
    if not 0 <= b.local_fraction <= 1:
        errs.append("bo.local_fraction must be in [0, 1]")

    a = cfg.al
    if a.strategy not in ("both", "max_variance", "random"):
        errs.append(f"al.strategy must be both, max_variance or random, got {a.strategy!r}")
    if a.init_size < 1:
        errs.append("al.init_size must be >= 1")
    if not 0 < a.test_fraction < 1:
        errs.append("al.test_fraction must be in (0, 1)")

    on = cfg.online
    if not on.n_pt:
        errs.append("online.n_pt must list at least one value")
    for n_pt in on.n_pt:
        if n_pt < 2:
            errs.append(f"online.n_pt={n_pt} must be >= 2")
        if n_pt >= on.n_tot:
            errs.append(f"online.n_pt={n_pt} must be < online.n_tot={on.n_tot}")
    if on.pretrain_variance not in ("in_sample", "loo", "prequential"):
        errs.append("online.pretrain_variance must be in_sample, loo or prequential")
    return errs


def bounds_of(cfg: ExperimentConfig):
    from .oracle import Bounds
    o = cfg.oracle
    return Bounds(_expand(o.lows, o.dim), _expand(o.highs, o.dim))
