"""Experiment configuration, key-value config files and config hashing."""
import dataclasses
import hashlib
import json
from dataclasses import dataclass

from ..errors import ConfigError

ESTIMATORS = ("sw_omp", "dl_cs_ce", "refined")


@dataclass
class ExperimentConfig:
    """Every knob of a simulation run. Grid sizes left at 0 default to 2N (8N when refining)."""

    n_t: int = 16
    n_r: int = 64
    l_t: int = 2
    l_r: int = 4
    k: int = 16
    k_p: int = 4
    g_t: int = 0
    g_r: int = 0
    g_t_r: int = 0
    g_r_r: int = 0
    n_paths: int = 16
    n_c: int = 16
    n_q: int = 2
    rolloff: float = 0.8
    ts: float = 1.0
    m_list: tuple = (100,)
    snr_db: tuple = (-15.0, -10.0, -5.0, 0.0, 5.0)
    trials: int = 200
    seed: int = 0
    estimators: tuple = ESTIMATORS
    weights: str = ""
    eps_mult: float = 1.0
    on_grid: bool = False
    n_s: int = 2
    refine_on: str = "residual"
    refine_normalize: bool = True
    success_mode: str = "auto"
    genie: bool = True
    workers: int = 1
    dataset_channels: int = 500
    val_fraction: float = 0.3
    epochs: int = 10
    batch_size: int = 256
    lr: float = 0.01
    patience: int = 10
    bench_runs: int = 20
    bench_snr_db: float = -5.0

    def __post_init__(self):
        self.g_t = self.g_t or 2 * self.n_t
        self.g_r = self.g_r or 2 * self.n_r
        self.g_t_r = self.g_t_r or 8 * self.n_t
        self.g_r_r = self.g_r_r or 8 * self.n_r
        self.m_list = tuple(int(m) for m in self.m_list)
        self.snr_db = tuple(float(s) for s in self.snr_db)
        self.estimators = tuple(self.estimators)
        self.validate()

    def validate(self):
        if not (1 <= self.l_t < self.n_t and 1 <= self.l_r < self.n_r):
            raise ConfigError("hybrid constraint requires 1 <= L_t < N_t and 1 <= L_r < N_r")
        if not 1 <= self.k_p <= self.k:
            raise ConfigError(f"K_p must lie in [1, K={self.k}], got {self.k_p}")
        if self.g_t < self.n_t or self.g_r < self.n_r:
            raise ConfigError("detection grids must be at least as large as the arrays")
        if self.g_t_r < self.g_t or self.g_r_r < self.g_r:
            raise ConfigError("refinement grids must be at least as fine as the detection grids")
        if self.n_paths < 1 or self.n_c < 1 or self.n_q < 1 or self.trials < 1:
            raise ConfigError("L, N_c, N_Q and trials must all be >= 1")
        if not self.m_list or min(self.m_list) < 1:
            raise ConfigError("M list must contain positive frame counts")
        if not self.snr_db:
            raise ConfigError("SNR grid is empty")
        if not 0 <= self.rolloff <= 1:
            raise ConfigError("rolloff must lie in [0, 1]")
        if not self.eps_mult > 0:
            raise ConfigError("eps multiplier must be positive")
        if not 1 <= self.n_s <= min(self.n_t, self.n_r):
            raise ConfigError("N_s must lie in [1, min(N_t, N_r)]")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        if self.refine_on not in ("observations", "residual"):
            raise ConfigError("refine_on must be 'observations' or 'residual'")
        if self.success_mode not in ("auto", "exact", "neighborhood"):
            raise ConfigError("success_mode must be auto, exact or neighborhood")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in [0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return ExperimentConfig(**data)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def hash(self):
        """Short digest of every field except run-time-only ones."""
        data = self.to_dict()
        data.pop("workers")
        blob = json.dumps(data, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def uses_dl(self):
        return any(e in ("dl_cs_ce", "refined") for e in self.estimators)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(raw)
            return low in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if name in ("m_list",):
                return tuple(int(s) for s in items)
            if name in ("snr_db",):
                return tuple(float(s) for s in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_overrides(pairs):
    """Turn ``{key: text}`` into typed config values."""
    defaults = ExperimentConfig()
    out = {}
    for key, raw in pairs.items():
        key = key.strip().replace("-", "_").lower()
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _convert(key, raw, getattr(defaults, key))
    return out


def parse_config_text(text):
    """``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    pairs = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs[key] = value
    return parse_overrides(pairs)


def load_config(path=None, overrides=None):
    values = {}
    if path:
        try:
            with open(path) as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise OSError(f"cannot read config file {path}: {exc.strerror}") from exc
    values.update(overrides or {})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_echo(cfg):
    """JSON text written next to results so every row can be traced to its config."""
    return json.dumps({"config_hash": cfg.hash(), "config": cfg.to_dict()},
                      indent=2, sort_keys=True, default=list)
