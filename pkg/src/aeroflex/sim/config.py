"""Scenario configuration: INI-style text with ``[section]`` headers.

Every key is addressed as ``section.key``; see ``KEYS`` for the full list
and README for the meaning of each entry. Unknown keys are rejected.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..solvers import ForcingSequence, NewtonConfig


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, msg, line=None, key=None):
        where = []
        if key:
            where.append(f"key {key!r}")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)
        self.line = line
        self.key = key


class ValidationError(ConfigError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _vec3(text: str) -> tuple:
    parts = [float(p) for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) != 3:
        raise ValueError(f"expected three components, got {text!r}")
    return tuple(parts)


# key -> (parser, default); a default of None means required / optional-with-logic
KEYS = {
    "geometry.L": (float, 10.0),
    "geometry.c": (float, 1.0),
    "geometry.t": (float, 0.008),
    "material.E": (float, 7.0e10),
    "material.G": (float, 2.63e10),
    "material.rho": (float, 2.7e3),
    "flow.v_inf": (float, None),
    "flow.alpha": (float, 15.0),
    "flow.rho_f": (float, 1.225),
    "mesh.m_s": (int, 50),
    "mesh.m_a": (int, 50),
    "mesh.n_a": (int, 4),
    "time.dt": (float, None),
    "time.delta_l": (float, None),
    "time.t_final": (float, 3.0),
    "aero.cutoff": (float, 0.01),
    "aero.transfer_radius": (float, 0.501),
    "aero.fd_eps": (float, 1e-6),
    "structure.geometric_nonlinearity": (_bool, True),
    "structure.torsion_scale": (float, 1000.0),
    "structure.gravity": (_vec3, (0.0, 0.0, 0.0)),
    "solver.variant": (str, "exact"),
    "solver.tol": (float, 1e-8),
    "solver.max_steps": (int, 50),
    "solver.damping": (str, "full_step"),
    "solver.armijo_c": (float, 1e-4),
    "solver.max_refinements": (int, 50),
    "solver.forcing": (str, "variant1"),
    "run.seed": (int, 0),
    "run.estimate_contraction": (_bool, False),
    "output.directory": (str, ""),
    "output.dump_wake": (_bool, False),
}


@dataclass(frozen=True)
class SimConfig:
    length: float = 10.0
    chord: float = 1.0
    thickness: float = 0.008
    youngs_modulus: float = 7.0e10
    shear_modulus: float = 2.63e10
    density: float = 2.7e3
    v_inf: float = 45.0
    alpha_deg: float = 15.0
    rho_f: float = 1.225
    m_s: int = 50
    m_a: int = 50
    n_a: int = 4
    dt: float = 0.25 / 45.0
    t_final: float = 3.0
    cutoff: float = 0.01
    transfer_radius: float = 0.501
    fd_eps: float = 1e-6
    geometric_nonlinearity: bool = True
    torsion_scale: float = 1000.0
    gravity: tuple = (0.0, 0.0, 0.0)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    forcing: ForcingSequence = field(default_factory=ForcingSequence)
    seed: int = 0
    estimate_contraction: bool = False
    output_dir: str = ""
    dump_wake: bool = False

    def __post_init__(self):
        validate(self)

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_final / self.dt + 1e-9))

    @property
    def alpha(self) -> float:
        return math.radians(self.alpha_deg)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def with_solver(self, variant=None, forcing=None, tol=None) -> "SimConfig":
        newton = self.newton
        if variant is not None or tol is not None:
            newton = dataclasses.replace(newton, **{k: v for k, v in
                                                   (("variant", variant), ("tol", tol)) if v is not None})
        return dataclasses.replace(self, newton=newton, forcing=forcing or self.forcing)


def validate(cfg: SimConfig) -> None:
    positive = ["length", "chord", "thickness", "youngs_modulus", "shear_modulus", "density",
                "rho_f", "dt", "t_final", "transfer_radius", "fd_eps"]
    for name in positive:
        val = getattr(cfg, name)
        if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
            raise ValidationError(f"{name} must be positive and finite, got {val!r}")
    if not (math.isfinite(cfg.v_inf) and cfg.v_inf >= 0):
        raise ValidationError(f"v_inf must be finite and >= 0, got {cfg.v_inf!r}")
    if cfg.cutoff < 0:
        raise ValidationError(f"cutoff must be >= 0, got {cfg.cutoff}")
    if cfg.torsion_scale < 0:
        raise ValidationError(f"torsion_scale must be >= 0, got {cfg.torsion_scale}")
    if cfg.m_s < 2 or cfg.m_a < 1 or cfg.n_a < 1:
        raise ValidationError(f"mesh sizes invalid: m_s={cfg.m_s} (>= 2), m_a={cfg.m_a}, n_a={cfg.n_a} (>= 1)")
    if cfg.t_final < cfg.dt:
        raise ValidationError(f"t_final ({cfg.t_final}) must be >= dt ({cfg.dt})")


def _line_of(text: str, section: str, key: str | None = None):
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", line):
            return no
    return None


def load_config(source: str) -> SimConfig:
    """Parse and validate configuration text."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(source)
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from exc

    raw = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            dotted = f"{section}.{key}"
            if dotted not in KEYS:
                raise ParseError("unknown key", line=_line_of(source, section, key), key=dotted)
            try:
                raw[dotted] = KEYS[dotted][0](value)
            except ValueError as exc:
                raise ParseError(f"bad value {value!r}: {exc}",
                                 line=_line_of(source, section, key), key=dotted) from exc
    vals = {k: raw.get(k, default) for k, (_, default) in KEYS.items()}

    if vals["flow.v_inf"] is None:
        hint = " (dt underdetermined: time.delta_l needs flow.v_inf)" if vals["time.delta_l"] is not None else ""
        raise ParseError("missing required key" + hint, key="flow.v_inf")
    if vals["time.dt"] is not None:
        dt = vals["time.dt"]
    elif vals["time.delta_l"] is not None:
        if not vals["flow.v_inf"] > 0:
            raise ValidationError("flow.v_inf must be positive to derive dt from time.delta_l")
        dt = vals["time.delta_l"] / vals["flow.v_inf"]
    else:
        raise ParseError("one of time.dt or time.delta_l is required", key="time.dt")

    try:
        newton = NewtonConfig(tol=vals["solver.tol"], max_steps=vals["solver.max_steps"],
                              variant=vals["solver.variant"], damping=vals["solver.damping"],
                              armijo_c=vals["solver.armijo_c"],
                              max_refinements=vals["solver.max_refinements"])
        forcing = ForcingSequence.parse(vals["solver.forcing"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc

    return SimConfig(
        length=vals["geometry.L"], chord=vals["geometry.c"], thickness=vals["geometry.t"],
        youngs_modulus=vals["material.E"], shear_modulus=vals["material.G"],
        density=vals["material.rho"], v_inf=vals["flow.v_inf"], alpha_deg=vals["flow.alpha"],
        rho_f=vals["flow.rho_f"], m_s=vals["mesh.m_s"], m_a=vals["mesh.m_a"], n_a=vals["mesh.n_a"],
        dt=dt, t_final=vals["time.t_final"], cutoff=vals["aero.cutoff"],
        transfer_radius=vals["aero.transfer_radius"], fd_eps=vals["aero.fd_eps"],
        geometric_nonlinearity=vals["structure.geometric_nonlinearity"],
        torsion_scale=vals["structure.torsion_scale"], gravity=tuple(vals["structure.gravity"]),
        newton=newton, forcing=forcing, seed=vals["run.seed"],
        estimate_contraction=vals["run.estimate_contraction"],
        output_dir=vals["output.directory"], dump_wake=vals["output.dump_wake"])


def load_config_file(path) -> SimConfig:
    return load_config(Path(path).read_text())


PLATE_PRESET = """\
# Flexible aluminium plate, hinged at both ends, torsion fixed at the left end.
[geometry]
L = 10.0
c = 1.0
t = 0.008

[material]
E = 7.0e10
G = 2.63e10
rho = 2700.0

[flow]
v_inf = 45.0
alpha = 15.0
rho_f = 1.225

[mesh]
m_s = 50
m_a = 50
n_a = 4

[time]
delta_l = 0.25
t_final = 3.0

[aero]
cutoff = 0.01
transfer_radius = 0.501

[structure]
torsion_scale = 1000.0

[solver]
variant = exact
tol = 1e-8
forcing = variant1
"""

REDUCED_PRESET = PLATE_PRESET.replace("m_s = 50", "m_s = 10").replace(
    "m_a = 50", "m_a = 10").replace("n_a = 4", "n_a = 2").replace("t_final = 3.0", "t_final = 0.5")

PRESETS = {"plate": PLATE_PRESET, "reduced": REDUCED_PRESET}


def preset(name: str) -> SimConfig:
    try:
        return load_config(PRESETS[name])
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}, expected one of {sorted(PRESETS)}") from None


def gravity_vector(cfg: SimConfig) -> np.ndarray:
    return np.asarray(cfg.gravity, dtype=float)
