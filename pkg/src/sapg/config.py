"""Experiment configuration files.

An experiment file is INI-style text with the sections ``[instance]``,
``[sapg]``, ``[spg]``, ``[subgrad]`` and ``[run]``.  Every key is optional
except the physical scalars ``E``, ``V0`` and ``x_min`` of ``[instance]``,
which must be written out explicitly.  See ``PAPER_CONFIG`` for the full set
of keys with their default values.
"""

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional

from .errors import ConfigError
from .solvers import Algorithm, SolverConfig
from .truss import InstanceConfig

__all__ = ["RunConfig", "ExperimentConfig", "PAPER_CONFIG", "load_config", "parse_config"]

PAPER_CONFIG = """\
# Truss robust compliance experiment (defaults reproduce the reference setup).
[instance]
cols = 9
rows = 3
spacing = 1.0            # m, distance between nearest nodes
level = 1                # neighbour level of the ground structure
supports = bottom        # bottom | left | corners
load_node = 4, 2         # (col, row) of the loaded node
load_layout = single     # single | spread
spread_nodes = 10
horizontal_axis = 2e5    # N
vertical_axis = 2.78e5   # N
axis_mode = full         # full: axes are diameters; semi: semi-axes
E = 2e11                 # Pa
V0 = 0.1                 # m^3
x_min = 1e-8             # m^2
eig = jacobi             # jacobi | lapack

[sapg]
mu0 = 1.0
L = 1e5
Lprime = 0.0

[spg]
mu0 = 1.0
L = 1e6
Lprime = 0.0
mu_exponent = -0.5

[subgrad]
step_c = 1e-6

[run]
iterations = 4000
stride = 1
output_dir = out
seed = 42
surrogate_iters = 40000  # 0 disables the long reference run
timing = false           # write wall-clock seconds into the trace files
"""

REQUIRED = {"instance": ("E", "V0", "x_min")}


@dataclass(frozen=True)
class RunConfig:
    iterations: int = 4000
    stride: int = 1
    output_dir: str = "out"
    seed: int = 42
    surrogate_iters: int = 40000
    reference: Optional[float] = None
    timing: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    instance: InstanceConfig = field(default_factory=InstanceConfig)
    solvers: Dict[Algorithm, SolverConfig] = field(default_factory=dict)
    run: RunConfig = field(default_factory=RunConfig)

    def solver(self, algorithm):
        """Solver settings for `algorithm` with the run-level budget and stride applied."""
        algorithm = Algorithm(algorithm)
        base = self.solvers.get(algorithm, SolverConfig(algorithm=algorithm))
        return replace(
            base,
            max_iters=self.run.iterations,
            trace_every=self.run.stride,
            reference_optimum=self.run.reference,
            record_time=self.run.timing,
        )


def _line_index(text):
    """Map (section, key) -> 1-based line number."""
    index = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, None), lineno)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", stripped)
        if m and section is not None:
            index[(section, m.group(1).strip())] = lineno
    return index


class _Reader:
    def __init__(self, parser, lines):
        self.parser = parser
        self.lines = lines
        self.used = set()

    def get(self, section, key, convert, default):
        if not self.parser.has_option(section, key):
            return default
        self.used.add((section, key))
        raw = self.parser.get(section, key)
        try:
            return convert(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"[{section}] {key} = {raw!r}: {exc}", key=key, line=self.lines.get((section, key))
            ) from None


def _bool(raw):
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _pair(raw):
    parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
    if len(parts) != 2:
        raise ValueError("expected two integers 'col, row'")
    return int(parts[0]), int(parts[1])


def _choice(*options):
    def convert(raw):
        v = raw.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v

    return convert


def _optional_float(raw):
    v = raw.strip().lower()
    return None if v in ("", "none", "auto") else float(v)


KNOWN = {
    "instance": {
        "cols", "rows", "spacing", "level", "supports", "load_node", "load_layout", "spread_nodes",
        "horizontal_axis", "vertical_axis", "axis_mode", "E", "V0", "x_min", "eig",
    },
    "sapg": {"mu0", "L", "Lprime"},
    "spg": {"mu0", "L", "Lprime", "mu_exponent"},
    "subgrad": {"step_c"},
    "run": {"iterations", "stride", "output_dir", "seed", "surrogate_iters", "reference", "timing"},
}


def parse_config(text, source="<config>"):
    """Parse experiment text into an :class:`ExperimentConfig`.

    Raises ConfigError naming the offending key (and its line when known).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}", line=getattr(exc, "lineno", None)) from None
    lines = _line_index(text)

    for section in parser.sections():
        if section not in KNOWN:
            raise ConfigError(f"unknown section [{section}]", key=section, line=lines.get((section, None)))
        for key in parser.options(section):
            if key not in KNOWN[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=key, line=lines.get((section, key)))
    for section, keys in REQUIRED.items():
        for key in keys:
            if not parser.has_option(section, key):
                raise ConfigError(f"missing required key {key!r} in [{section}]", key=key)

    r = _Reader(parser, lines)
    d = InstanceConfig()
    s = "instance"
    instance = InstanceConfig(
        cols=r.get(s, "cols", int, d.cols),
        rows=r.get(s, "rows", int, d.rows),
        spacing=r.get(s, "spacing", float, d.spacing),
        level=r.get(s, "level", int, d.level),
        supports=r.get(s, "supports", _choice("bottom", "left", "corners"), d.supports),
        load_node=r.get(s, "load_node", _pair, d.load_node),
        load_layout=r.get(s, "load_layout", _choice("single", "spread"), d.load_layout),
        spread_nodes=r.get(s, "spread_nodes", int, d.spread_nodes),
        horizontal_axis=r.get(s, "horizontal_axis", float, d.horizontal_axis),
        vertical_axis=r.get(s, "vertical_axis", float, d.vertical_axis),
        axis_mode=r.get(s, "axis_mode", _choice("full", "semi"), d.axis_mode),
        young_modulus=r.get(s, "E", float, d.young_modulus),
        volume_budget=r.get(s, "V0", float, d.volume_budget),
        x_min=r.get(s, "x_min", float, d.x_min),
        eig_method=r.get(s, "eig", _choice("jacobi", "lapack"), d.eig_method),
    )

    solvers = {}
    for algo, section, default_L in ((Algorithm.SAPG, "sapg", 1e5), (Algorithm.SPG, "spg", 1e6)):
        kwargs = dict(
            algorithm=algo,
            mu0=r.get(section, "mu0", float, 1.0),
            L=r.get(section, "L", float, default_L),
            Lprime=r.get(section, "Lprime", float, 0.0),
        )
        if algo is Algorithm.SPG:
            kwargs["spg_mu_exponent"] = r.get(section, "mu_exponent", float, -0.5)
        solvers[algo] = _solver(kwargs, section, lines)
    solvers[Algorithm.SUBGRAD] = _solver(
        dict(algorithm=Algorithm.SUBGRAD, subgrad_step_c=r.get("subgrad", "step_c", float, 1e-6)), "subgrad", lines
    )

    dr = RunConfig()
    s = "run"
    run = RunConfig(
        iterations=r.get(s, "iterations", int, dr.iterations),
        stride=r.get(s, "stride", int, dr.stride),
        output_dir=r.get(s, "output_dir", str, dr.output_dir),
        seed=r.get(s, "seed", int, dr.seed),
        surrogate_iters=r.get(s, "surrogate_iters", int, dr.surrogate_iters),
        reference=r.get(s, "reference", _optional_float, dr.reference),
        timing=r.get(s, "timing", _bool, dr.timing),
    )
    if run.iterations < 0:
        raise ConfigError("iterations must be nonnegative", key="iterations", line=lines.get(("run", "iterations")))
    if run.stride < 1:
        raise ConfigError("stride must be at least 1", key="stride", line=lines.get(("run", "stride")))
    if run.surrogate_iters < 0:
        raise ConfigError("surrogate_iters must be nonnegative", key="surrogate_iters")
    return ExperimentConfig(instance, solvers, run)


def _solver(kwargs, section, lines):
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}", key=section, line=lines.get((section, None))) from None


def load_config(path=None):
    """Read an experiment file; ``None`` gives the built-in defaults."""
    if path is None:
        return parse_config(PAPER_CONFIG, "<defaults>")
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))
