"""Effect-chain configuration: parsing, canonical rendering, graph building.

Line format, one effect per line::

    # comment
    rate=44100 gain=1.0
    stress K=0.8 g=0.7 D=50000
    infinite_echo alpha=0.5 R=100ms
    reverb rt60=1.0 combs=1310,1636,1813,1927 allpass=347:0.7,113:0.7

The optional header line (``rate=`` and/or ``gain=``) must precede the first
effect.  Delays are integer samples; a ``ms`` suffix converts milliseconds
at the header rate, rounding to the nearest sample.  The same content may be
given as a JSON object ``{"rate": .., "gain": .., "effects": [{"kind": ..,
key: value, ...}]}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .dsp import DEFAULT_CAPACITY, ConfigurationError
from .effects import (
    STRESS_PRESETS,
    EchoParams,
    EffectGraph,
    Node,
    ParameterError,
    ReverbConfig,
    Series,
    StressParams,
    _reverb_element,
    default_chorus_taps,
    make_allpass,
    make_chorus,
    make_comb,
    make_infinite_echo,
    make_multi_echo,
    make_reverberated_chorus,
    make_stress_generator,
)

DEFAULT_RATE = 44100

KINDS = ("multi_echo", "infinite_echo", "comb", "allpass", "reverb", "stress",
         "chorus", "reverberated_chorus")
ALIASES = {"echo": "infinite_echo"}


class ConfigError(ConfigurationError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


@dataclass
class EffectSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class ChainConfig:
    effects: list[EffectSpec] = field(default_factory=list)
    sample_rate_hz: int = DEFAULT_RATE
    output_gain: float = 1.0


# ---------------------------------------------------------------------------
# value parsers; each takes (text, rate) and returns the canonical value


def _float(text: str, rate: int) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _delay(text: str, rate: int) -> int:
    text = text.strip()
    if text.endswith("ms"):
        ms = float(text[:-2])
        return int(math.floor(ms * rate / 1000.0 + 0.5))
    v = float(text)
    if v != int(v):
        raise ValueError(f"delay {text!r} is not a whole number of samples")
    return int(v)


def _int(text: str, rate: int) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _delays(text: str, rate: int) -> tuple[int, ...]:
    return tuple(_delay(t, rate) for t in text.split(","))


def _floats(text: str, rate: int) -> tuple[float, ...]:
    return tuple(_float(t, rate) for t in text.split(","))


def _taps(text: str, rate: int) -> tuple[tuple[int, float], ...]:
    if text.strip() in ("", "none"):
        return ()
    out = []
    for item in text.split(","):
        d, sep, g = item.partition(":")
        if not sep:
            raise ValueError(f"tap {item!r} is not delay:gain")
        out.append((_delay(d, rate), _float(g, rate)))
    return tuple(out)


def _opt_float(text: str, rate: int) -> float | None:
    return None if text.strip().lower() == "none" else _float(text, rate)


def _opt_floats(text: str, rate: int) -> tuple[float, ...] | None:
    return None if text.strip().lower() == "none" else _floats(text, rate)


_REVERB_FIELDS: dict[str, Callable] = {
    "rt60": _opt_float, "combs": _delays, "comb_gains": _opt_floats, "allpass": _taps,
    "dry": _float, "early": _taps, "wet": _float,
}

SCHEMA: dict[str, dict[str, Callable]] = {
    "multi_echo": {"alpha": _float, "R": _delay, "N": _int},
    "infinite_echo": {"alpha": _float, "R": _delay},
    "comb": {"g": _float, "R": _delay},
    "allpass": {"g": _float, "R": _delay},
    "stress": {"K": _float, "g": _float, "D": _delay},
    "chorus": {"taps": _taps},
    "reverb": _REVERB_FIELDS,
    "reverberated_chorus": {"taps": _taps, **_REVERB_FIELDS},
}
REQUIRED = {
    "multi_echo": ("alpha", "R", "N"),
    "infinite_echo": ("alpha", "R"),
    "comb": ("g", "R"),
    "allpass": ("g", "R"),
    "stress": ("K", "g", "D"),
}


def _reverb_defaults() -> dict[str, Any]:
    d = ReverbConfig()
    return {"rt60": d.rt60_s, "combs": d.comb_delays, "comb_gains": None,
            "allpass": tuple(zip(d.allpass_delays, d.allpass_gains)),
            "dry": d.dry_gain, "early": d.early_taps, "wet": d.wet_gain}


def reverb_config_from(params: dict[str, Any]) -> ReverbConfig:
    ap = params["allpass"]
    return ReverbConfig(
        comb_delays=tuple(params["combs"]),
        comb_gains=None if params["comb_gains"] is None else tuple(params["comb_gains"]),
        allpass_delays=tuple(d for d, _ in ap),
        allpass_gains=tuple(g for _, g in ap),
        dry_gain=params["dry"],
        early_taps=tuple(params["early"]),
        rt60_s=params["rt60"],
        wet_gain=params["wet"],
    )


def _complete(kind: str, params: dict[str, Any], rate: int, line: int | None) -> dict[str, Any]:
    for key in REQUIRED.get(kind, ()):
        if key not in params:
            raise ConfigError(f"{kind} requires '{key}'", line, key)
    if kind in ("reverb", "reverberated_chorus"):
        params = {**_reverb_defaults(), **params}
        if params["rt60"] is not None:
            params["comb_gains"] = None
    if kind in ("chorus", "reverberated_chorus") and "taps" not in params:
        params["taps"] = default_chorus_taps(rate)
    return params


def element_for(spec: EffectSpec, rate: int, capacity: int = DEFAULT_CAPACITY):
    """Graph element for one effect; raises ParameterError on bad values."""
    p = spec.params
    kind = spec.kind
    if kind == "multi_echo":
        return Node(make_multi_echo(EchoParams(p["alpha"], p["R"], p["N"])), capacity)
    if kind == "infinite_echo":
        return Node(make_infinite_echo(EchoParams(p["alpha"], p["R"])), capacity)
    if kind == "comb":
        return Node(make_comb(p["g"], p["R"]), capacity)
    if kind == "allpass":
        return Node(make_allpass(p["g"], p["R"]), capacity)
    if kind == "stress":
        return Node(make_stress_generator(StressParams(p["K"], p["g"], p["D"])), capacity)
    if kind == "chorus":
        return Node(make_chorus(p["taps"]), capacity)
    if kind == "reverb":
        return _reverb_element(reverb_config_from(p), rate, capacity)
    if kind == "reverberated_chorus":
        return make_reverberated_chorus(p["taps"], reverb_config_from(p), rate, capacity).root
    raise ParameterError(f"unknown effect kind {kind!r}")


def _effect_from_pairs(kind: str, pairs: list[tuple[str, str]], rate: int,
                       line: int | None) -> EffectSpec:
    kind = ALIASES.get(kind, kind)
    if kind not in SCHEMA:
        raise ConfigError(f"unknown effect kind {kind!r} (expected one of {', '.join(KINDS)})",
                          line)
    schema = SCHEMA[kind]
    params: dict[str, Any] = {}
    for key, text in pairs:
        if kind == "stress" and key == "preset":
            if text not in STRESS_PRESETS:
                raise ConfigError(f"unknown preset {text!r}", line, key)
            pre = STRESS_PRESETS[text]
            params.update(K=pre.K, g=pre.g, D=pre.D)
            continue
        if key not in schema:
            raise ConfigError(f"unknown parameter for {kind}", line, key)
        try:
            params[key] = schema[key](text, rate)
        except ValueError as exc:
            raise ConfigError(f"bad value {text!r}: {exc}", line, key) from None
    spec = EffectSpec(kind, _complete(kind, params, rate, line))
    try:
        element_for(spec, rate)
    except ParameterError as exc:
        raise ConfigError(f"{kind}: {exc}", line) from None
    return spec


def _split_pairs(tokens: list[str], line: int) -> list[tuple[str, str]]:
    pairs = []
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise ConfigError(f"expected key=value, got {tok!r}", line)
        pairs.append((key, value))
    return pairs


def _parse_lines(text: str, default_rate: int) -> ChainConfig:
    cfg = ChainConfig(sample_rate_hz=default_rate)
    seen_effect = False
    for n, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        if "=" in tokens[0]:
            if seen_effect:
                raise ConfigError("header line must precede the first effect", n)
            for key, value in _split_pairs(tokens, n):
                try:
                    if key == "rate":
                        cfg.sample_rate_hz = _int(value, 0)
                        if cfg.sample_rate_hz <= 0:
                            raise ValueError("must be positive")
                    elif key == "gain":
                        cfg.output_gain = _float(value, 0)
                    else:
                        raise ConfigError("unknown header field", n, key)
                except ValueError as exc:
                    raise ConfigError(f"bad value {value!r}: {exc}", n, key) from None
            continue
        seen_effect = True
        cfg.effects.append(
            _effect_from_pairs(tokens[0], _split_pairs(tokens[1:], n), cfg.sample_rate_hz, n))
    return cfg


def _json_token(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, (list, tuple)):
        return ",".join(":".join(_json_token(v) for v in item) if isinstance(item, (list, tuple))
                        else _json_token(item) for item in value)
    return str(value)


def _parse_json(text: str, default_rate: int) -> ChainConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("structured config must be a JSON object")
    cfg = ChainConfig(sample_rate_hz=int(obj.get("rate", default_rate)),
                      output_gain=float(obj.get("gain", 1.0)))
    for i, item in enumerate(obj.get("effects", [])):
        if not isinstance(item, dict) or "kind" not in item:
            raise ConfigError(f"effects[{i}] needs a 'kind'")
        pairs = [(k, _json_token(v)) for k, v in item.items() if k != "kind"]
        cfg.effects.append(_effect_from_pairs(item["kind"], pairs, cfg.sample_rate_hz, None))
    return cfg


def parse_chain_config(text: str, default_rate: int = DEFAULT_RATE) -> ChainConfig:
    """Parse either form; ``default_rate`` applies when no rate is given."""
    if text.lstrip().startswith("{"):
        return _parse_json(text, default_rate)
    return _parse_lines(text, default_rate)


# ---------------------------------------------------------------------------
# rendering


def _render_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        raise TypeError("booleans are not config values")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if not value:
            return "none"
        if isinstance(value[0], tuple):
            return ",".join(f"{d}:{g!r}" for d, g in value)
        return ",".join(_render_value(v) for v in value)
    raise TypeError(f"cannot render {value!r}")


def render_chain_config(cfg: ChainConfig) -> str:
    """Canonical line form; ``parse_chain_config`` inverts it exactly."""
    lines = [f"rate={cfg.sample_rate_hz} gain={cfg.output_gain!r}"]
    for spec in cfg.effects:
        parts = [spec.kind] + [f"{k}={_render_value(v)}" for k, v in spec.params.items()]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def config_to_json(cfg: ChainConfig) -> str:
    def plain(v):
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        return v
    return json.dumps({
        "rate": cfg.sample_rate_hz, "gain": cfg.output_gain,
        "effects": [{"kind": s.kind, **{k: plain(v) for k, v in s.params.items()}}
                    for s in cfg.effects],
    }, indent=2)


def build_graph(cfg: ChainConfig, capacity: int = DEFAULT_CAPACITY) -> EffectGraph:
    elements = [element_for(s, cfg.sample_rate_hz, capacity) for s in cfg.effects]
    return EffectGraph(Series(elements), cfg.sample_rate_hz, gain=cfg.output_gain,
                       name=" -> ".join(s.kind for s in cfg.effects) or "identity")
