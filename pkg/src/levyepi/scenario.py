"""Scenario bundles, built-in presets and the flat ``key = value`` file format.

A scenario file looks like::

    name = my-run
    p = 2.5
    model.lambda_h = 0.5
    noise.sigma1 = 0.269
    jumps.atom.0.mass = 1.0
    jumps.atom.0.xi1 = -0.75
    init.s = 0.2
    sim.dt = 0.001

Blank lines and lines starting with ``#`` are ignored. Omitted ``noise``,
``jumps``, ``sim`` and ``p`` keys take their defaults; every ``model`` and
``init`` key is required except ``model.a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .engine import PositivityPolicy, SimConfig
from .model import AssumptionError, JumpAtom, JumpMeasure, ModelParams, NoiseParams, State

__all__ = [
    "Scenario",
    "ScenarioError",
    "PRESETS",
    "preset",
    "load_scenario",
    "save_scenario",
    "scenario_to_mapping",
    "scenario_from_mapping",
]


class ScenarioError(ValueError):
    """A scenario could not be parsed or failed validation."""


@dataclass(frozen=True)
class Scenario:
    name: str
    model: ModelParams
    noise: NoiseParams = field(default_factory=NoiseParams)
    jumps: JumpMeasure = field(default_factory=JumpMeasure)
    p: float = 2.5
    init: State = State(0.2, 0.1, 0.3, 0.4)
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if not self.name or not str(self.name).strip():
            raise ScenarioError("name must be nonempty")
        if not (math.isfinite(self.p) and self.p > 2):
            raise ScenarioError(f"p must be > 2, got {self.p!r}")
        init = State(*[float(v) for v in self.init])
        if any(not math.isfinite(v) or v < 0 for v in init):
            raise ScenarioError(f"init must be finite and nonnegative, got {tuple(init)}")
        object.__setattr__(self, "init", init)

    def with_sim(self, **changes) -> "Scenario":
        return replace(self, sim=replace(self.sim, **changes))


_EXTINCTION_MODEL = ModelParams(lambda_h=0.5, b=3.0, beta=0.15, mu_h=0.8, rho0=0.8, rho1=0.02,
                                lambda_m=0.6, beta_m=0.55, mu_m=0.9)

PRESETS = {
    "table1-extinction": Scenario(
        name="table1-extinction",
        model=_EXTINCTION_MODEL,
        noise=NoiseParams((0.269, 0.25, 0.25, 0.13)),
        jumps=JumpMeasure.single((-0.75, 0.8, -0.9, 0.85)),
        init=State(0.2, 0.1, 0.3, 0.4),
        sim=SimConfig(dt=1e-3, t_end=200.0),
    ),
    "table1-persistence": Scenario(
        name="table1-persistence",
        model=_EXTINCTION_MODEL.replace(lambda_h=0.85, b=7.0, beta=0.65, rho1=0.25, mu_m=0.88),
        noise=NoiseParams((0.269, 0.25, 0.245, 0.14)),
        jumps=JumpMeasure.single((-0.75, 0.78, -0.9, 0.85)),
        init=State(0.2, 0.1, 0.3, 0.4),
        sim=SimConfig(dt=1e-3, t_end=500.0),
    ),
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


_MODEL_KEYS = tuple(f.name for f in fields(ModelParams))
_INIT_KEYS = ("s", "i", "s_m", "i_m")
_SIM_KEYS = ("dt", "t_end", "seed", "record_stride", "positivity_policy", "saturated")


def scenario_to_mapping(scenario: Scenario) -> dict:
    """Flat ``{dotted key: text}`` view of a scenario. Floats use ``repr`` so they round-trip."""
    out = {"name": scenario.name, "p": repr(float(scenario.p))}
    for key in _MODEL_KEYS:
        out[f"model.{key}"] = repr(float(getattr(scenario.model, key)))
    for k, s in enumerate(scenario.noise.sigma, start=1):
        out[f"noise.sigma{k}"] = repr(float(s))
    for n, atom in enumerate(scenario.jumps.atoms):
        out[f"jumps.atom.{n}.mass"] = repr(float(atom.mass))
        for k, x in enumerate(atom.xi, start=1):
            out[f"jumps.atom.{n}.xi{k}"] = repr(float(x))
    for key, value in zip(_INIT_KEYS, scenario.init):
        out[f"init.{key}"] = repr(float(value))
    sim = scenario.sim
    out["sim.dt"] = repr(float(sim.dt))
    out["sim.t_end"] = repr(float(sim.t_end))
    out["sim.seed"] = str(sim.seed)
    out["sim.record_stride"] = str(sim.record_stride)
    out["sim.positivity_policy"] = sim.positivity_policy.value
    out["sim.saturated"] = "true" if sim.saturated else "false"
    return out


def _float(key, text, where=""):
    try:
        return float(text)
    except ValueError:
        raise ScenarioError(f"{where}{key}: expected a number, got {text!r}") from None


def _bool(key, text, where=""):
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ScenarioError(f"{where}{key}: expected true/false, got {text!r}")


def scenario_from_mapping(items: dict, lines: dict | None = None) -> Scenario:
    """Build a validated scenario from a flat mapping. ``lines`` maps keys to source line numbers."""
    lines = lines or {}

    def where(key):
        return f"line {lines[key]}: " if key in lines else ""

    model_kw, init, atoms, sim_kw = {}, {}, {}, {}
    sigma = [0.0, 0.0, 0.0, 0.0]
    name = items.get("name", "custom")
    p = _float("p", items["p"], where("p")) if "p" in items else 2.5
    for key, text in items.items():
        parts = key.split(".")
        if key in ("name", "p"):
            continue
        if parts[0] == "model" and len(parts) == 2 and parts[1] in _MODEL_KEYS:
            model_kw[parts[1]] = _float(key, text, where(key))
        elif parts[0] == "noise" and len(parts) == 2 and parts[1] in ("sigma1", "sigma2", "sigma3", "sigma4"):
            sigma[int(parts[1][-1]) - 1] = _float(key, text, where(key))
        elif parts[0] == "init" and len(parts) == 2 and parts[1] in _INIT_KEYS:
            init[parts[1]] = _float(key, text, where(key))
        elif parts[0] == "jumps" and len(parts) == 4 and parts[1] == "atom" and parts[2].isdigit() \
                and parts[3] in ("mass", "xi1", "xi2", "xi3", "xi4"):
            atoms.setdefault(int(parts[2]), {})[parts[3]] = (key, _float(key, text, where(key)))
        elif parts[0] == "sim" and len(parts) == 2 and parts[1] in _SIM_KEYS:
            field_name = parts[1]
            if field_name in ("dt", "t_end"):
                sim_kw[field_name] = _float(key, text, where(key))
            elif field_name in ("seed", "record_stride"):
                try:
                    sim_kw[field_name] = int(text)
                except ValueError:
                    raise ScenarioError(f"{where(key)}{key}: expected an integer, got {text!r}") from None
            elif field_name == "saturated":
                sim_kw[field_name] = _bool(key, text, where(key))
            else:
                try:
                    sim_kw[field_name] = PositivityPolicy(text.strip())
                except ValueError:
                    choices = ", ".join(p.value for p in PositivityPolicy)
                    raise ScenarioError(f"{where(key)}{key}: expected one of {choices}, got {text!r}") from None
        else:
            raise ScenarioError(f"{where(key)}unknown key {key!r}")

    missing = [f"model.{k}" for k in _MODEL_KEYS if k != "a" and k not in model_kw]
    missing += [f"init.{k}" for k in _INIT_KEYS if k not in init]
    if missing:
        raise ScenarioError(f"missing required keys: {', '.join(missing)}")
    if sorted(atoms) != list(range(len(atoms))):
        raise ScenarioError(f"jump atoms must be numbered 0..n-1, got {sorted(atoms)}")

    try:
        model = ModelParams(**model_kw)
        noise = NoiseParams(tuple(sigma))
        built = []
        for n in range(len(atoms)):
            spec = atoms[n]
            absent = [k for k in ("mass", "xi1", "xi2", "xi3", "xi4") if k not in spec]
            if absent:
                raise ScenarioError(f"jumps.atom.{n}: missing {', '.join(absent)}")
            for k in range(1, 5):
                key, value = spec[f"xi{k}"]
                if value <= -1:
                    raise AssumptionError("A2", f"{where(key)}{key}={value} must be > -1")
            built.append(JumpAtom(spec["mass"][1], tuple(spec[f"xi{k}"][1] for k in range(1, 5))))
        sim = SimConfig(**sim_kw)
        return Scenario(name=name, model=model, noise=noise, jumps=JumpMeasure(tuple(built)),
                        p=p, init=State(*(init[k] for k in _INIT_KEYS)), sim=sim)
    except ScenarioError:
        raise
    except AssumptionError as exc:
        raise ScenarioError(f"assumption {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    items, lines = {}, {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ScenarioError(f"{source}: line {number}: expected 'key = value', got {raw!r}")
        if key in items:
            raise ScenarioError(f"{source}: line {number}: duplicate key {key!r}")
        items[key] = value
        lines[key] = number
    try:
        return scenario_from_mapping(items, lines)
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc


def load_scenario(source) -> Scenario:
    """Load a preset by name or a scenario file by path."""
    source = str(source)
    if source in PRESETS:
        return PRESETS[source]
    try:
        with open(source) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ScenarioError(f"no preset or file named {source!r}; presets: "
                            f"{', '.join(sorted(PRESETS))}") from None
    return parse_scenario(text, source)


def save_scenario(scenario: Scenario, path):
    with open(path, "w") as fh:
        for key, value in scenario_to_mapping(scenario).items():
            fh.write(f"{key} = {value}\n")
