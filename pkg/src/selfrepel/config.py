"""Run configuration: one YAML file with model/sim/ensemble/analysis/output/bench
sections, plus ``section.key=value`` overrides from the command line."""

import copy

import numpy as np
import yaml

from .errors import ConfigError, ModelError
from .integrate import SimConfig
from .model import ModelSpec
from .montecarlo import EnsembleConfig
from .serialize import config_hash

DEFAULTS = {
    "model": {"n": None, "a": [1.0], "u0": None, "v0": None},
    "sim": {"dt": 0.01, "t_end": 400.0, "seed": 20261016,
            "representation": "reduced", "record_stride": 1, "scheme": "euler"},
    "ensemble": {"n_paths": 4000, "init": "stationary", "observation_step": 10.0,
                 "observation_times": None, "burn_in": None, "chunk_size": 1000,
                 "autocov_max_lag": 20.0, "autocov_lag_step": 0.1},
    "analysis": {"alpha": 0.01, "bound_margin": 0.2,
                 "generator_variant": "ito-corrected",
                 "generator_samples": 1_000_000,
                 "generator_functions": ["c1", "s1", "c1^2", "s1^2", "c1*s1",
                                         "c1^4"],
                 "invariant_source": "simulation", "invariant_samples": 2000,
                 "invariant_dt": 0.005, "invariant_horizon": 2000.0,
                 "invariant_paths": 8, "invariant_burn_in": 50.0,
                 "invariant_spacing_factor": 5.0, "invariant_scheme": "euler",
                 "clt_times": [100.0, 200.0, 400.0], "clt_eps": None,
                 "lln_time": 200.0, "min_r2": 0.9},
    "output": {"dir": "out", "plots": True},
    "bench": {"dt": 0.01, "horizons": [10.0, 50.0, 250.0], "repeats": 3},
}


def _check_keys(data, defaults, where=""):
    if not isinstance(data, dict):
        raise ConfigError("section %s must be a mapping" % (where or "<root>"))
    for key, value in data.items():
        path = "%s.%s" % (where, key) if where else key
        if key not in defaults:
            raise ConfigError("unknown configuration key %r" % path)
        if isinstance(defaults[key], dict):
            _check_keys(value, defaults[key], path)


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(out.get(key), dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def parse_override(text):
    """``"sim.dt=0.005"`` -> ``{"sim": {"dt": 0.005}}``."""
    if "=" not in text:
        raise ConfigError("override %r is not of the form section.key=value"
                          % text)
    key, raw = text.split("=", 1)
    parts = key.strip().split(".")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError("cannot parse override value %r: %s" % (raw, exc))
    out = value
    for part in reversed(parts):
        out = {part: out}
    return out


class RunConfig:
    """Validated, fully-resolved configuration for one CLI invocation."""

    def __init__(self, data=None):
        data = data or {}
        _check_keys(data, DEFAULTS)
        self.data = _merge(DEFAULTS, data)
        self._build()

    @classmethod
    def load(cls, path=None, overrides=()):
        data = {}
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    data = yaml.safe_load(fh) or {}
            except OSError as exc:
                raise ConfigError("cannot read config %s: %s" % (path, exc))
            except yaml.YAMLError as exc:
                raise ConfigError("config %s is not valid YAML: %s" % (path, exc))
        for item in overrides:
            ov = parse_override(item) if isinstance(item, str) else item
            _check_keys(ov, DEFAULTS)
            data = _merge(data, ov)
        return cls(data)

    def _build(self):
        model = {k: v for k, v in self.data["model"].items() if v is not None}
        try:
            self.spec = ModelSpec.from_dict(model)
        except ModelError as exc:
            raise ConfigError("model: %s" % exc) from exc
        try:
            self.sim = SimConfig(**self.data["sim"]).validate()
        except TypeError as exc:
            raise ConfigError("sim: %s" % exc)
        self.analysis = self.data["analysis"]
        self.output = self.data["output"]
        self.bench = self.data["bench"]

    @property
    def seed(self):
        return int(self.sim.seed)

    @property
    def hash(self):
        # where results are written does not change what is computed
        return config_hash({k: v for k, v in self.data.items() if k != "output"})

    def observation_times(self):
        ens = self.data["ensemble"]
        if ens["observation_times"] is not None:
            times = [float(t) for t in ens["observation_times"]]
        else:
            step = float(ens["observation_step"])
            times = list(np.arange(0.0, self.sim.t_end + 1e-9, step))
        for t in self.analysis["clt_times"] + [self.analysis["lln_time"]]:
            if t is not None and float(t) <= self.sim.t_end + 1e-9:
                times.append(float(t))
        times = sorted(set(round(t, 9) for t in times))
        return tuple(times)

    def ensemble_config(self, autocov=True):
        ens = self.data["ensemble"]
        cfg = EnsembleConfig(
            n_paths=int(ens["n_paths"]), spec=self.spec, sim=self.sim,
            observation_times=self.observation_times(), init=ens["init"],
            burn_in=ens["burn_in"], chunk_size=int(ens["chunk_size"]),
            autocov_max_lag=ens["autocov_max_lag"] if autocov else None,
            autocov_lag_step=float(ens["autocov_lag_step"]))
        return cfg.validate()

    def to_dict(self):
        return copy.deepcopy(self.data)
