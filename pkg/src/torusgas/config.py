"""Strict JSON run configuration.

Unknown keys are rejected at every level and every constraint violation
names the offending key, so a config typo can never silently fall back to a
default.  Regime presets expand into model-section defaults which explicit
model keys may still override.
"""

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import ModelParams
from .spectral import Grid
from .timestepping import PRESETS as INIT_PRESETS
from .timestepping import Forcing, StepControl

#: Model-parameter regimes named after the global-existence cases they probe.
REGIME_PRESETS = {
    "nonlocal_s53": dict(c_nl=1.0, c_loc=0.0, alpha=0.0, gamma=1.0, s=1.75),
    "local_gamma_gt1": dict(c_nl=0.0, c_loc=1.0, alpha=1.0, gamma=2.0, s=1.5),
    "local_alpha_gt_half": dict(c_nl=0.0, c_loc=1.0, alpha=0.75, gamma=1.0, s=1.5),
    "hybrid_s32": dict(c_nl=1.0, c_loc=1.0, alpha=1.0, gamma=1.0, s=1.75),
    "bd_global": dict(c_nl=1.0, c_loc=1.0, alpha=0.25, gamma=2.0, s=1.75),
    "hybrid_flock": dict(c_nl=1.0, c_loc=1.0, alpha=0.25, gamma=1.0, s=1.75),
}


@dataclass(frozen=True)
class InitConfig:
    preset: str = "perturbed_constant"
    seed: int = 0
    epsilon: float = 0.1
    mode: int = 1


@dataclass(frozen=True)
class DiagnosticsConfig:
    hierarchy_depth: int = 2
    double_integral_cadence: int = 1


@dataclass(frozen=True)
class OutputConfig:
    path: str | None = None
    format: str = "jsonl"
    snapshot_times: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    model: ModelParams
    init: InitConfig
    control: StepControl
    force: Forcing
    diagnostics: DiagnosticsConfig
    output: OutputConfig
    preset: str | None = None

    def to_dict(self) -> dict:
        """Fully-expanded config document; parse(json(to_dict())) round-trips."""
        doc = {
            "grid": {"n": self.grid.n},
            "model": {
                "c_p": self.model.c_p, "gamma": self.model.gamma,
                "c_mu": self.model.c_mu, "alpha": self.model.alpha,
                "c_nl": self.model.c_nl, "c_loc": self.model.c_loc,
                "s": self.model.s, "tau": self.model.tau,
                "rho_bar": self.model.rho_bar,
            },
            "init": {"preset": self.init.preset, "seed": self.init.seed,
                     "epsilon": self.init.epsilon, "mode": self.init.mode},
            "control": {"cfl": self.control.cfl, "t_final": self.control.t_final,
                        "record_every": self.control.record_every,
                        "vacuum_floor": self.control.vacuum_floor,
                        "dt_min": self.control.dt_min, "dt_max": self.control.dt_max},
            "force": {"kind": self.force.kind, "amplitude": self.force.amplitude,
                      "mode": self.force.mode, "frequency": self.force.frequency},
            "diagnostics": {"hierarchy_depth": self.diagnostics.hierarchy_depth,
                            "double_integral_cadence": self.diagnostics.double_integral_cadence},
            "output": {"path": self.output.path, "format": self.output.format,
                       "snapshot_times": list(self.output.snapshot_times)},
        }
        if self.preset is not None:
            doc["preset"] = self.preset
        return doc


def _type_name(typ):
    return {int: "an integer", float: "a number", str: "a string", list: "a list"}[typ]


class _Section:
    def __init__(self, name: str, raw):
        if not isinstance(raw, dict):
            raise ConfigError(f"{name}: must be an object")
        self.name = name
        self.raw = dict(raw)

    def take(self, key, typ, default, check=None, constraint=""):
        path = f"{self.name}.{key}" if self.name else key
        if key not in self.raw:
            value = default
        else:
            value = self.raw.pop(key)
            if value is None and default is None:
                return None  # explicit null is allowed only for optional keys
            if typ is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if not isinstance(value, typ) or isinstance(value, bool) and typ is not bool:
                raise ConfigError(f"{path}: must be {_type_name(typ)}, got {value!r}")
        if value is not None and typ is float and not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite, got {value!r}")
        if check is not None and value is not None and not check(value):
            raise ConfigError(f"{path}: must {constraint}, got {value!r}")
        return value

    def close(self):
        if self.raw:
            key = sorted(self.raw)[0]
            path = f"{self.name}.{key}" if self.name else key
            raise ConfigError(f"unknown key {path!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a UTF-8 JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> RunConfig:
    top = _Section("", doc)
    preset = top.take("preset", str, None, lambda v: v in REGIME_PRESETS,
                      f"be one of {sorted(REGIME_PRESETS)}")
    model_defaults = dict(c_p=1.0, gamma=1.0, c_mu=1.0, alpha=0.0, c_nl=0.0,
                          c_loc=1.0, s=1.5, tau=0.0, rho_bar=1.0)
    if preset is not None:
        model_defaults.update(REGIME_PRESETS[preset])

    sec = _Section("grid", top.take("grid", dict, {}))
    n = sec.take("n", int, 128, lambda v: v >= 8 and v % 2 == 0, "be even and >= 8")
    sec.close()
    grid = Grid(n)

    sec = _Section("model", top.take("model", dict, {}))
    m = {
        "c_p": sec.take("c_p", float, model_defaults["c_p"], lambda v: v >= 0, "be >= 0"),
        "gamma": sec.take("gamma", float, model_defaults["gamma"], lambda v: v > 0, "be > 0"),
        "c_mu": sec.take("c_mu", float, model_defaults["c_mu"], lambda v: v > 0, "be > 0"),
        "alpha": sec.take("alpha", float, model_defaults["alpha"], lambda v: v >= 0, "be >= 0"),
        "c_nl": sec.take("c_nl", float, model_defaults["c_nl"], lambda v: v >= 0, "be >= 0"),
        "c_loc": sec.take("c_loc", float, model_defaults["c_loc"], lambda v: v >= 0, "be >= 0"),
        "s": sec.take("s", float, model_defaults["s"], lambda v: 0.0 < v < 2.0, "lie in (0, 2)"),
        "tau": sec.take("tau", float, model_defaults["tau"], lambda v: v >= 0, "be >= 0"),
        "rho_bar": sec.take("rho_bar", float, model_defaults["rho_bar"], lambda v: v > 0, "be > 0"),
    }
    sec.close()
    if not m["tau"] < m["s"]:
        raise ConfigError(f"model.tau: must be < model.s, got {m['tau']!r}")
    if m["c_nl"] + m["c_loc"] <= 0:
        raise ConfigError("model.c_nl: c_nl + c_loc must be > 0 (some dissipation present)")
    params = ModelParams(**m)

    sec = _Section("init", top.take("init", dict, {}))
    init = InitConfig(
        preset=sec.take("preset", str, "perturbed_constant",
                        lambda v: v in INIT_PRESETS, f"be one of {sorted(INIT_PRESETS)}"),
        seed=sec.take("seed", int, 0, lambda v: v >= 0, "be >= 0"),
        epsilon=sec.take("epsilon", float, 0.1, lambda v: v >= 0, "be >= 0"),
        mode=sec.take("mode", int, 1, lambda v: v >= 1, "be >= 1"),
    )
    sec.close()

    sec = _Section("control", top.take("control", dict, {}))
    control = StepControl(
        cfl=sec.take("cfl", float, 0.4, lambda v: 0 < v <= 1, "lie in (0, 1]"),
        t_final=sec.take("t_final", float, 1.0, lambda v: v >= 0, "be >= 0"),
        record_every=sec.take("record_every", int, 1, lambda v: v >= 1, "be >= 1"),
        vacuum_floor=sec.take("vacuum_floor", float, 1e-8, lambda v: v > 0, "be > 0"),
        dt_min=sec.take("dt_min", float, 1e-10, lambda v: v > 0, "be > 0"),
        dt_max=sec.take("dt_max", float, 1e-2, lambda v: v > 0, "be > 0"),
    )
    sec.close()

    sec = _Section("force", top.take("force", dict, {}))
    force = Forcing(
        kind=sec.take("kind", str, "zero", lambda v: v in Forcing.KINDS,
                      f"be one of {sorted(Forcing.KINDS)}"),
        amplitude=sec.take("amplitude", float, 0.0),
        mode=sec.take("mode", int, 1, lambda v: v >= 1, "be >= 1"),
        frequency=sec.take("frequency", float, 1.0),
    )
    sec.close()

    sec = _Section("diagnostics", top.take("diagnostics", dict, {}))
    diags = DiagnosticsConfig(
        hierarchy_depth=sec.take("hierarchy_depth", int, 2,
                                 lambda v: 1 <= v <= 4, "lie in [1, 4]"),
        double_integral_cadence=sec.take("double_integral_cadence", int, 1,
                                         lambda v: v >= 1, "be >= 1"),
    )
    sec.close()

    sec = _Section("output", top.take("output", dict, {}))
    path = sec.take("path", str, None)
    fmt = sec.take("format", str, "jsonl", lambda v: v == "jsonl", "be 'jsonl'")
    snaps = sec.take("snapshot_times", list, [])
    for i, t in enumerate(snaps):
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t) or t < 0:
            raise ConfigError(f"output.snapshot_times[{i}]: must be a finite time >= 0, got {t!r}")
    output = OutputConfig(path=path, format=fmt, snapshot_times=tuple(float(t) for t in snaps))
    sec.close()

    top.close()
    return RunConfig(grid=grid, model=params, init=init, control=control,
                     force=force, diagnostics=diags, output=output, preset=preset)


def default_config() -> RunConfig:
    return config_from_dict({})
