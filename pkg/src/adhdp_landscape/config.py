"""
Experiment configuration as flat ``block.key = value`` text.

Blocks are ``environment``, ``agent``, ``recorder`` and ``analysis``; ``seed``
and ``format_version`` sit at top level. Lists are space separated, booleans
are ``true``/``false``. Keys left out of a file keep their defaults, unknown
keys are rejected.
"""

import difflib
from dataclasses import dataclass, field, fields, replace
from importlib import resources

from .agent import EnvConfig, VariantConfig, variant_preset
from .errors import ConfigError
from .recorder import FORMAT_VERSION

PRESET_NAMES = tuple(f"variant{i}{suffix}" for suffix in ("", "_desk") for i in range(1, 5))
DESK_EPISODES = 20
DESK_STEPS = 1000


@dataclass(frozen=True)
class RecorderConfig:
    actor_sample_period: int = 100
    probe_period: int = 10
    probe_cap: int = 50_000


@dataclass(frozen=True)
class AnalysisConfig:
    resolution: int = 41
    range_scale: float = 1.2
    n_ref: int = 2048
    n_actor_probes: int = 512
    state_stride: int = 10
    probe_seed: int = 0

    def __post_init__(self):
        if self.resolution < 1 or self.n_ref < 1 or self.n_actor_probes < 1 or self.state_stride < 1:
            raise ValueError("resolution, probe counts and state_stride must be >= 1")
        if not self.range_scale >= 1:
            raise ValueError("range_scale must be >= 1 so the grid covers every snapshot")


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: VariantConfig = field(default_factory=VariantConfig)
    recorder: RecorderConfig = field(default_factory=RecorderConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    seed: int = 0


# environment keys map onto nested dataclasses; (attribute path, type)
_ENV_KEYS = {
    "inertia": (("inertia",), "floats9"),
    "dt": (("dt",), float),
    "steps_per_episode": (("steps_per_episode",), int),
    "episodes": (("episodes",), int),
    "initial_axis": (("initial_axis",), "floats3"),
    "initial_angle_deg": (("initial_angle_deg",), float),
    "initial_omega": (("initial_omega",), "floats3"),
    "k_att": (("cost", "k_att"), float),
    "k_rate": (("cost", "k_rate"), float),
    "k_torque": (("cost", "k_torque"), float),
    "attitude_error_limit": (("termination", "attitude_error_limit"), float),
    "omega_norm_limit": (("termination", "omega_norm_limit"), float),
    "penalty": (("termination", "penalty"), float),
}


def _field_types(cls):
    defaults = cls()
    out = {}
    for f in fields(cls):
        v = getattr(defaults, f.name)
        out[f.name] = "ints" if isinstance(v, tuple) else type(v)
    return out


_BLOCK_TYPES = {
    "agent": _field_types(VariantConfig),
    "recorder": _field_types(RecorderConfig),
    "analysis": _field_types(AnalysisConfig),
}


def valid_keys():
    keys = ["format_version", "seed"]
    keys += [f"environment.{k}" for k in _ENV_KEYS]
    for block, types in _BLOCK_TYPES.items():
        keys += [f"{block}.{k}" for k in types]
    return keys


def _parse_value(key, text, kind):
    try:
        if kind is bool:
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(f"expected true or false, got {text!r}")
            return low == "true"
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind == "ints":
            return tuple(int(t) for t in text.split())
        n = int(kind[len("floats"):])
        vals = tuple(float(t) for t in text.split())
        if len(vals) != n:
            raise ValueError(f"expected {n} numbers, got {len(vals)}")
        return vals
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config(text, base=None, source="<config>"):
    """Parse config text on top of ``base`` (defaults if omitted)."""
    cfg = base if base is not None else ExperimentConfig()
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in valid_keys():
            hint = difflib.get_close_matches(key, valid_keys(), n=1, cutoff=0.0)
            suffix = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}{suffix}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value

    if "format_version" in raw and raw["format_version"] != str(FORMAT_VERSION):
        raise ConfigError(f"format_version: unsupported version {raw['format_version']!r}")

    seed = _parse_value("seed", raw["seed"], int) if "seed" in raw else cfg.seed

    env_kw = {"cost": {}, "termination": {}}
    blocks = {b: {} for b in _BLOCK_TYPES}
    for key, value in raw.items():
        if key.startswith("environment."):
            name = key.split(".", 1)[1]
            path, kind = _ENV_KEYS[name]
            v = _parse_value(key, value, kind)
            if len(path) == 2:
                env_kw[path[0]][path[1]] = v
            else:
                env_kw[path[0]] = v
        elif "." in key:
            block, name = key.split(".", 1)
            blocks[block][name] = _parse_value(key, value, _BLOCK_TYPES[block][name])

    try:
        cost = replace(cfg.env.cost, **env_kw.pop("cost"))
        term = replace(cfg.env.termination, **env_kw.pop("termination"))
    except ValueError as exc:
        raise ConfigError(f"environment: {exc}") from None
    out = {}
    for block, obj, kw in (("environment", cfg.env, dict(env_kw, cost=cost, termination=term)),
                           ("agent", cfg.agent, blocks["agent"]),
                           ("recorder", cfg.recorder, blocks["recorder"]),
                           ("analysis", cfg.analysis, blocks["analysis"])):
        try:
            out[block] = replace(obj, **kw)
        except ValueError as exc:
            raise ConfigError(f"{block}: {exc}") from None
    return ExperimentConfig(out["environment"], out["agent"], out["recorder"], out["analysis"], seed)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def dump_config(cfg):
    """Complete, round-trippable text form of ``cfg``."""
    lines = [f"format_version = {FORMAT_VERSION}", f"seed = {cfg.seed}"]
    for name, (path, _) in _ENV_KEYS.items():
        obj = cfg.env
        for p in path:
            obj = getattr(obj, p)
        lines.append(f"environment.{name} = {_fmt(obj)}")
    for block, obj in (("agent", cfg.agent), ("recorder", cfg.recorder), ("analysis", cfg.analysis)):
        for f in fields(obj):
            lines.append(f"{block}.{f.name} = {_fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def build_preset(name):
    """Construct a preset in code (the shipped files are dumps of these)."""
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    variant = name.removesuffix("_desk")
    env = EnvConfig()
    if name.endswith("_desk"):
        env = replace(env, episodes=DESK_EPISODES, steps_per_episode=DESK_STEPS)
    return ExperimentConfig(env=env, agent=variant_preset(variant))


def load_preset(name):
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    text = resources.files("adhdp_landscape").joinpath("presets", f"{name}.cfg").read_text()
    return parse_config(text, source=f"preset {name}")


def load_config(path, base=None):
    with open(path) as fh:
        return parse_config(fh.read(), base=base, source=str(path))
