"""Flat TOML configuration for simulation runs.

Every key is optional; missing keys fall back to the reference settings
(N=512, L_cp=64, 20-tap line, P=10, r=0.8, k in [3, 13], g in [0.1, 1],
P_f=1e-3, L=4, zeta=50). Example::

    snr_grid = [0, 10, 20, 30]
    trials = 2000
    r = 0.7
    seed = 7
"""

import hashlib
import json
import sys

from .channel import ChannelConfig
from .estimation import SensingConfig
from .harness import MethodVariant, SimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ConfigError", "load_config", "config_from_mapping", "config_to_dict", "config_digest"]


class ConfigError(ValueError):
    pass


# key -> (expected type, description used in error messages)
_KEYS = {
    "N": (int, "number of subcarriers"),
    "L_cp": (int, "cyclic prefix length"),
    "tap_line_length": (int, "tapped delay line length"),
    "P": (int, "number of resolvable paths"),
    "r": (float, "LoS probability, valid range [0, 1]"),
    "k_min": (float, "minimum Rician factor"),
    "k_max": (float, "maximum Rician factor"),
    "g_min": (float, "minimum large-scale factor"),
    "g_max": (float, "maximum large-scale factor"),
    "nlos_unit_variance": (bool, "unit per-tap diffuse variance"),
    "P_f": (float, "false-alarm probability, valid range (0, 1)"),
    "L": (int, "reference window parameter, >= 2"),
    "zeta": (float, "kurtosis threshold, > 0"),
    "snr_grid": (list, "SNR grid in dB"),
    "trials": (int, "trials per point, >= 1"),
    "seed": (int, "master seed, unsigned 64-bit"),
    "methods": (list, "method variants"),
}


def _check_type(key, value):
    expected, desc = _KEYS[key]
    ok = {
        int: isinstance(value, int) and not isinstance(value, bool),
        float: isinstance(value, (int, float)) and not isinstance(value, bool),
        bool: isinstance(value, bool),
        list: isinstance(value, list),
    }[expected]
    if not ok:
        raise ConfigError(f"{key}: expected {expected.__name__} ({desc}), got {value!r}")


def config_from_mapping(data):
    """Build a validated :class:`SimConfig` from a flat key/value mapping."""
    unknown = sorted(set(data) - set(_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    for key, value in data.items():
        _check_type(key, value)

    d = ChannelConfig()
    s = SensingConfig()
    base = SimConfig()
    get = data.get

    if "snr_grid" in data:
        bad = [v for v in data["snr_grid"] if isinstance(v, bool) or not isinstance(v, (int, float))]
        if bad or not data["snr_grid"]:
            raise ConfigError(f"snr_grid: expected a non-empty list of numbers, got {data['snr_grid']!r}")
    if "methods" in data:
        valid = [m.value for m in MethodVariant]
        for m in data["methods"]:
            if m not in valid:
                raise ConfigError(f"methods: unknown variant {m!r}; valid: {', '.join(valid)}")

    try:
        channel = ChannelConfig(
            N=get("N", d.N),
            L_cp=get("L_cp", d.L_cp),
            tap_line_length=get("tap_line_length", d.tap_line_length),
            P=get("P", d.P),
            r=float(get("r", d.r)),
            k_range=(float(get("k_min", d.k_range[0])), float(get("k_max", d.k_range[1]))),
            g_range=(float(get("g_min", d.g_range[0])), float(get("g_max", d.g_range[1]))),
            nlos_unit_variance=get("nlos_unit_variance", d.nlos_unit_variance),
        )
        sensing = SensingConfig(
            N=channel.N,
            L_cp=channel.L_cp,
            zeta=float(get("zeta", s.zeta)),
            P_f=float(get("P_f", s.P_f)),
            L=get("L", s.L),
        )
        return SimConfig(
            channel=channel,
            sensing=sensing,
            snr_grid_db=tuple(get("snr_grid", base.snr_grid_db)),
            trials_per_point=get("trials", base.trials_per_point),
            methods=tuple(get("methods", [m.value for m in base.methods])),
            master_seed=get("seed", base.master_seed),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: cannot parse config: {exc}") from exc
    try:
        return config_from_mapping(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_to_dict(cfg):
    """Fully resolved config as a flat mapping using the file's key names."""
    ch, se = cfg.channel, cfg.sensing
    return {
        "N": ch.N,
        "L_cp": ch.L_cp,
        "tap_line_length": ch.tap_line_length,
        "P": ch.P,
        "r": ch.r,
        "k_min": ch.k_range[0],
        "k_max": ch.k_range[1],
        "g_min": ch.g_range[0],
        "g_max": ch.g_range[1],
        "nlos_unit_variance": ch.nlos_unit_variance,
        "P_f": se.P_f,
        "L": se.L,
        "zeta": se.zeta,
        "snr_grid": list(cfg.snr_grid_db),
        "trials": cfg.trials_per_point,
        "seed": cfg.master_seed,
        "methods": [m.value for m in cfg.methods],
    }


def config_digest(cfg):
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
