"""Plain-text run configuration (``key = value`` lines, ``#`` comments)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .analysis_cavity import CavityParams
from .dsp import DEFAULT_BLOCK, DEFAULT_NU, DEFAULT_RF_RATE, DEFAULT_SAMPLE_RATE, WINDOWS
from .errors import MalformedInputError, ParameterError
from .opo import OpoParams

MAX_SEED = 2 ** 64 - 1

_OPO_KEYS = {f.name: f.name for f in dataclasses.fields(OpoParams)}
_CAVITY_KEYS = {"cavity_bandwidth": "bandwidth", "cavity_detuning": "detuning",
                "analysis_freq": "analysis_freq"}


@dataclass(frozen=True)
class RunConfig:
    opo: OpoParams = field(default_factory=OpoParams)
    cavity: CavityParams = field(default_factory=CavityParams)
    sample_rate: float = DEFAULT_SAMPLE_RATE
    nu: float = DEFAULT_NU
    rf_rate: float = DEFAULT_RF_RATE
    block_size: int = DEFAULT_BLOCK
    n_samples: int = 500_000
    window: str = "amplitude"
    calibration: float = 1.0
    seed: int = 0
    output: Optional[str] = None

    def __post_init__(self):
        if not self.sample_rate > 0 or not self.rf_rate > 0 or not self.nu > 0:
            raise ParameterError("sample_rate, rf_rate and nu must be > 0")
        if self.block_size < 2:
            raise ParameterError(f"block_size={self.block_size} must be >= 2")
        if self.n_samples < 1:
            raise ParameterError(f"n_samples={self.n_samples} must be >= 1")
        if self.window not in WINDOWS:
            raise ParameterError(f"window={self.window!r} must be one of {sorted(WINDOWS)}")
        if not self.calibration > 0:
            raise ParameterError(f"calibration={self.calibration} must be > 0")
        check_seed(self.seed)

    @property
    def keys(self) -> tuple:
        return KEYS

    def to_text(self) -> str:
        lines = [f"{k} = {_format_value(v)}" for k, v in flat_items(self)]
        return "\n".join(lines) + "\n"


_TOP = {f.name: f.type for f in dataclasses.fields(RunConfig) if f.name not in ("opo", "cavity")}
KEYS = tuple(_OPO_KEYS) + tuple(_CAVITY_KEYS) + tuple(_TOP)


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise ParameterError(f"seed={seed!r} must be an unsigned 64-bit integer")
    return seed


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def flat_items(cfg: RunConfig) -> list:
    items = [(k, getattr(cfg.opo, k)) for k in _OPO_KEYS]
    items += [(k, getattr(cfg.cavity, a)) for k, a in _CAVITY_KEYS.items()]
    items += [(k, getattr(cfg, k)) for k in _TOP]
    return items


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key == "optical_freqs":
        if raw.lower() in ("", "none"):
            return None
        parts = [p for p in raw.replace(",", " ").split()]
        if len(parts) != 3:
            raise ValueError("expected three frequencies w0,w1,w2")
        return tuple(float(p) for p in parts)
    if key in ("window",):
        return raw
    if key == "output":
        return raw or None
    if key in ("block_size", "n_samples"):
        return int(raw)
    if key == "seed":
        return int(raw, 0)
    return float(raw)


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse config text into ``{key: value}``; values are converted, not validated."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise MalformedInputError(f"expected key = value, got {stripped!r}", lineno, source)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in KEYS:
            raise MalformedInputError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise MalformedInputError(f"duplicate key {key!r}", lineno, source)
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise MalformedInputError(f"bad value for {key}: {raw!r} ({exc})", lineno, source) from None
    return values


def build_config(values: Mapping, base: Optional[RunConfig] = None) -> RunConfig:
    """Apply ``values`` on top of ``base``; every physical invariant is re-checked."""
    base = base or RunConfig()
    unknown = [k for k in values if k not in KEYS]
    if unknown:
        raise ParameterError(f"unknown key {unknown[0]!r}")
    opo = {k: v for k, v in values.items() if k in _OPO_KEYS}
    cav = {_CAVITY_KEYS[k]: v for k, v in values.items() if k in _CAVITY_KEYS}
    top = {k: v for k, v in values.items() if k in _TOP}
    return dataclasses.replace(base, opo=dataclasses.replace(base.opo, **opo),
                               cavity=dataclasses.replace(base.cavity, **cav), **top)


def load_config(path, overrides: Optional[Mapping] = None) -> RunConfig:
    """Read a config file (or defaults when ``path`` is None) and apply overrides."""
    values = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise MalformedInputError(f"cannot read config: {exc}", source=str(p)) from None
        values = parse_config(text, str(p))
    values.update(overrides or {})
    return build_config(values)
