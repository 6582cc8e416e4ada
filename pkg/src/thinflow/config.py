"""Flat INI-style configuration with sections mirroring the module names.

Every key has a default; unknown sections or keys are hard errors so typos
cannot silently fall back to defaults.  The fully resolved configuration is
re-rendered deterministically (17 significant digits) for provenance echoes.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .initial_data import BubbleConfig
from .key_integral import PolarQuadrature
from .solver import SolverConfig
from .util import fmt_float


class ConfigError(Exception):
    """Invalid configuration file or override."""


DEFAULTS = {
    "spectral_field": {
        "N": 256,
    },
    "initial_data": {
        "l0": 2,
        "n": 2,
        "epsilon": 0.125,
        "amplitude": 1.0,
        "small_scale_amplitude": 1.0,
        "background_amplitude": 1.0,
        "bg_outer": 5.0 / 16.0,
        "bg_inner": 7.0 / 16.0,
        "allow_underresolved": True,
    },
    "solver": {
        "cfl_number": 0.4,
        "max_dt": 5e-3,
        "cadence": 0.02,
        "fixed_dt": 0.0,  # 0 means adaptive CFL stepping
        "tail_threshold": 1e-6,
        "dealias": True,
        "checkpoint_every": 0.25,
    },
    "lagrangian": {
        "tracer_count": 0,
        "tracer_seed": 0,
    },
    "key_integral": {
        "n_radial": 96,
        "n_angular": 64,
        "r_min": 1e-4,
        "radii": "0.05,0.1,0.2",
        "b_region_lo": 0.05,
        "b_region_hi": 0.5,
    },
    "experiments": {
        "n_list": "2,3,4,5",
        "pairing": "gap",
        "pair_c": 2.0,
        "pair_prefactor": 1e-3,
        "kappa": 0.5,
        "T": 1.0,
        "N_max": 1024,
        "workers": 1,
    },
}


def _convert(section: str, key: str, raw, default):
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            if str(raw).lower() in ("1", "true", "yes", "on"):
                return True
            if str(raw).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(str(raw), 0)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc


@dataclass
class RunConfig:
    """Resolved union of all module configurations, with provenance."""

    values: dict
    source_path: str | None = None
    overrides: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.values[section][key]

    # ---- typed views -----------------------------------------------------

    @property
    def N(self) -> int:
        return self.values["spectral_field"]["N"]

    def bubble_config(self) -> BubbleConfig:
        d = self.values["initial_data"]
        return BubbleConfig(
            l0=d["l0"], n=d["n"], eps=d["epsilon"], amplitude=d["amplitude"],
            small_scale_amplitude=d["small_scale_amplitude"],
            background_amplitude=d["background_amplitude"],
            bg_outer=d["bg_outer"], bg_inner=d["bg_inner"],
        )

    def solver_config(self) -> SolverConfig:
        d = self.values["solver"]
        return SolverConfig(
            cfl_number=d["cfl_number"], dealias=d["dealias"], max_dt=d["max_dt"],
            cadence=d["cadence"],
            fixed_dt=d["fixed_dt"] if d["fixed_dt"] > 0 else None,
            tail_threshold=d["tail_threshold"],
        )

    def quadrature(self) -> PolarQuadrature:
        d = self.values["key_integral"]
        return PolarQuadrature(n_radial=d["n_radial"], n_angular=d["n_angular"],
                               r_min=d["r_min"])

    def radii(self) -> list:
        raw = self.values["key_integral"]["radii"]
        return [float(x) for x in str(raw).split(",") if x.strip()]

    def n_list(self) -> list:
        raw = self.values["experiments"]["n_list"]
        out = [int(x) for x in str(raw).split(",") if x.strip()]
        if not out:
            raise ConfigError("experiments.n_list is empty")
        return out

    def experiment_plan(self):
        from .experiments import ExperimentPlan

        e = self.values["experiments"]
        d = self.values["initial_data"]
        return ExperimentPlan(
            n_list=tuple(self.n_list()), l0=d["l0"], eps=d["epsilon"],
            amplitude=d["amplitude"],
            small_scale_amplitude=d["small_scale_amplitude"],
            background_amplitude=d["background_amplitude"],
            bg_outer=d["bg_outer"], bg_inner=d["bg_inner"],
            T=e["T"], N_max=e["N_max"], pairing=e["pairing"], pair_c=e["pair_c"],
            pair_prefactor=e["pair_prefactor"], kappa=e["kappa"],
            cadence=self.values["solver"]["cadence"],
            cfl_number=self.values["solver"]["cfl_number"],
            max_dt=self.values["solver"]["max_dt"],
            tail_threshold=self.values["solver"]["tail_threshold"],
        )

    # ---- rendering -------------------------------------------------------

    def resolved_text(self) -> str:
        lines = []
        for section in sorted(self.values):
            lines.append(f"[{section}]")
            for key in sorted(self.values[section]):
                v = self.values[section][key]
                if isinstance(v, bool):
                    s = "true" if v else "false"
                elif isinstance(v, float):
                    s = fmt_float(v)
                else:
                    s = str(v)
                lines.append(f"{key} = {s}")
            lines.append("")
        return "\n".join(lines)


def parse_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a config file and apply "section.key" overrides (which win).

    A missing path means all defaults; unknown sections or keys raise
    ConfigError naming the offender.
    """
    values = {s: dict(kv) for s, kv in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keys are case-sensitive (e.g. T vs t)
        try:
            with open(path, "r") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        for section in parser.sections():
            if section not in values:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in values[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                values[section][key] = _convert(section, key, raw, DEFAULTS[section][key])
    for dotted, raw in (overrides or {}).items():
        if raw is None:
            continue
        if "." not in dotted:
            raise ConfigError(f"override key must be section.key, got {dotted!r}")
        section, key = dotted.split(".", 1)
        if section not in values or key not in values[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        values[section][key] = _convert(section, key, raw, DEFAULTS[section][key])
    return RunConfig(values=values, source_path=path, overrides=dict(overrides or {}))
