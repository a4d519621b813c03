"""Experiment configuration: a flat ``key = value`` format with ``[section]`` headers.

Grammar (one construct per line)::

    file     := { line }
    line     := blank | comment | header | entry
    comment  := ('#' | ';') any-text
    header   := '[' name ']'            name := word { '.' word }
    entry    := key '=' value            key := word
    value    := item { ',' item }
    item     := expression | word
    word     := [A-Za-z0-9_:.+-]+

An ``expression`` is arithmetic on numbers and the constant ``pi`` with
``+ - * / **`` and parentheses (``2*pi``, ``42/128``).  Inline comments are
not supported; ``#`` is only special at the start of a line.  Keys are
case-sensitive.  Repeating a section or a key inside a section is an error.

Parsing yields a :class:`RawConfig` (ordered sections of ordered string
values).  :func:`dump` writes it back in canonical form and
``parse_text(dump(raw)) == raw`` holds for every parsed config.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .multipatch_core import PlanMode

RawConfig = Dict[str, Dict[str, str]]

_HEADER = re.compile(r"^\[\s*([A-Za-z0-9_]+(?:\.[A-Za-z0-9_]+)*)\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z0-9_]+)\s*=\s*(.*)$")

EXPERIMENTS = ("interpolation", "advection", "stability", "coefficients", "convergence")


# ---------------------------------------------------------------------------
# text level
# ---------------------------------------------------------------------------


def parse_text(text: str, source: str = "<config>") -> RawConfig:
    """Split config text into ordered sections of raw string values."""
    raw: RawConfig = {}
    current: Optional[str] = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = _HEADER.match(s)
        if m:
            current = m.group(1)
            if current in raw:
                raise ConfigError(f"{source}:{lineno}: section [{current}] repeated")
            raw[current] = {}
            continue
        m = _ENTRY.match(s)
        if not m:
            raise ConfigError(f"{source}:{lineno}: expected '[section]' or 'key = value', got {s!r}")
        if current is None:
            raise ConfigError(f"{source}:{lineno}: entry before the first section")
        key, value = m.group(1), m.group(2).strip()
        if key in raw[current]:
            raise ConfigError(f"{source}:{lineno}: key {key!r} repeated in [{current}]")
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        raw[current][key] = " ".join(value.split())
    return raw


def dump(raw: RawConfig) -> str:
    """Canonical text of a raw config."""
    out = []
    for name, entries in raw.items():
        out.append(f"[{name}]")
        out.extend(f"{k} = {v}" for k, v in entries.items())
        out.append("")
    return "\n".join(out)


def merge(base: RawConfig, override: RawConfig) -> RawConfig:
    """Sectionwise key override; sections of ``override`` absent in ``base`` are appended."""
    out = {k: dict(v) for k, v in base.items()}
    for name, entries in override.items():
        out.setdefault(name, {}).update(entries)
    return out


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    raise ValueError("unsupported expression")


def number(text: str, what: str = "value") -> float:
    """Evaluate a numeric item (``0.3``, ``2*pi``, ``405/100000``)."""
    try:
        v = _eval_node(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError, TypeError):
        raise ConfigError(f"{what}: cannot read {text!r} as a number") from None
    if not math.isfinite(v):
        raise ConfigError(f"{what}: {text!r} is not finite")
    return v


def integer(text: str, what: str = "value") -> int:
    v = number(text, what)
    if v != int(v):
        raise ConfigError(f"{what}: {text!r} is not an integer")
    return int(v)


def items(text: str) -> List[str]:
    return [t.strip() for t in text.split(",")]


def boolean(text: str, what: str = "value") -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{what}: expected true/false, got {text!r}")


# ---------------------------------------------------------------------------
# typed level
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatchSpec:
    """One patch: ``(start, end, cells)`` per direction, uniform cells."""

    name: str
    r: Tuple[float, ...]
    theta: Tuple[float, ...]

    def points(self, refine: float = 1.0):
        return tuple(_axis_points(ax, refine, f"patch {self.name}") for ax in (self.r, self.theta))


def _axis_points(spec, refine, what):
    start, end, cells = spec
    n = cells * refine
    if n != int(n) or n < 1:
        raise ConfigError(f"{what}: refinement {refine} gives a non-integer cell count")
    return np.linspace(start, end, int(n) + 1)


@dataclass(frozen=True)
class MappingSpec:
    kind: str = "czarny"
    epsilon: float = 0.3
    elongation: float = 1.4


@dataclass(frozen=True)
class AdvectionSpec:
    dt: float = 0.01
    t_final: float = 2.0
    tracer: str = "rk3"
    omega: float = 2.0 * math.pi
    center_r: float = 0.5
    center_theta: float = 0.0
    radius: float = 0.3
    snapshot_every: int = 0
    boundary_tol: float = 1e-6


@dataclass(frozen=True)
class StabilitySpec:
    n_patches: int = 5
    n_cells: int = 3
    shifts: Tuple[float, float, int] = (0.001, 0.999, 999)
    probe_shift: float = 405.0 / 100000.0
    c1: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    ``raw`` keeps the text-level config; :meth:`echo` writes it back and
    ``ExperimentConfig.from_text(cfg.echo()) == cfg``.
    """

    experiment: str
    name: str
    output: str
    seed: int
    mapping: MappingSpec
    bc_r: str
    bc_theta: str
    patches: Tuple[PatchSpec, ...]
    twins: Tuple[PatchSpec, ...]
    modes: Tuple[PlanMode, ...]
    cross: str
    eval_grid: Tuple[int, int]
    advection: AdvectionSpec
    stability: StabilitySpec
    coefficient_ns: Tuple[int, ...]
    coefficient_dx: float
    refinements: Tuple[float, ...]
    eval_points: int
    max_cells: int
    raw: Tuple[Tuple[str, Tuple[Tuple[str, str], ...]], ...] = field(repr=False, compare=True)

    # construction -----------------------------------------------------------

    @classmethod
    def from_raw(cls, raw: RawConfig) -> "ExperimentConfig":
        return _build(raw)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        return _build(parse_text(text, source))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        return cls.from_text(text, str(p))

    # views --------------------------------------------------------------------

    def raw_dict(self) -> RawConfig:
        return {k: dict(v) for k, v in self.raw}

    def echo(self) -> str:
        return dump(self.raw_dict())

    def with_overrides(self, override: RawConfig) -> "ExperimentConfig":
        return _build(merge(self.raw_dict(), override))


def _get(raw, section, key, default=None):
    return raw.get(section, {}).get(key, default)


def _axis_spec(text, what):
    parts = items(text)
    if len(parts) != 3:
        raise ConfigError(f"{what}: expected 'start, end, cells', got {text!r}")
    a, b = number(parts[0], what), number(parts[1], what)
    n = integer(parts[2], what)
    if not b > a:
        raise ConfigError(f"{what}: end must exceed start")
    if n < 1:
        raise ConfigError(f"{what}: need at least one cell")
    return (a, b, n)


def _patches(raw, prefix):
    out = []
    for name, entries in raw.items():
        if not name.startswith(prefix + "."):
            continue
        pname = name[len(prefix) + 1 :]
        unknown = set(entries) - {"r", "theta"}
        if unknown:
            raise ConfigError(f"[{name}]: unknown keys {sorted(unknown)}")
        if "r" not in entries or "theta" not in entries:
            raise ConfigError(f"[{name}]: both 'r' and 'theta' are required")
        out.append(PatchSpec(pname, _axis_spec(entries["r"], f"[{name}] r"), _axis_spec(entries["theta"], f"[{name}] theta")))
    return tuple(out)


_KNOWN = {
    "experiment": {"kind", "name", "output", "seed"},
    "mapping": {"kind", "epsilon", "elongation"},
    "domain": {"bc_r", "bc_theta"},
    "plan": {"modes", "cross"},
    "interpolation": {"eval_grid"},
    "advection": {"dt", "t_final", "tracer", "omega", "center_r", "center_theta", "radius", "snapshot_every", "boundary_tol"},
    "stability": {"n_patches", "n_cells", "shifts", "probe_shift", "c1"},
    "coefficients": {"n", "dx"},
    "convergence": {"refinements", "eval_points", "max_cells"},
}


def _build(raw: RawConfig) -> ExperimentConfig:
    for name, entries in raw.items():
        if name.startswith(("patch.", "twin.")):
            continue
        if name not in _KNOWN:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(entries) - _KNOWN[name]
        if unknown:
            raise ConfigError(f"[{name}]: unknown keys {sorted(unknown)}")

    kind = _get(raw, "experiment", "kind")
    if kind is None:
        raise ConfigError("[experiment] kind is required")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"[experiment] kind must be one of {EXPERIMENTS}, got {kind!r}")

    mk = _get(raw, "mapping", "kind", "czarny")
    if mk not in ("czarny", "circular", "identity"):
        raise ConfigError(f"[mapping] kind {mk!r} unknown")
    mapping = MappingSpec(
        mk,
        number(_get(raw, "mapping", "epsilon", "0.3"), "[mapping] epsilon"),
        number(_get(raw, "mapping", "elongation", "1.4"), "[mapping] elongation"),
    )
    if mk == "czarny" and not 0.0 < mapping.epsilon < 2.0:
        raise ConfigError("[mapping] epsilon must lie in (0, 2)")

    bc_r = _get(raw, "domain", "bc_r", "greville")
    bc_t = _get(raw, "domain", "bc_theta", "periodic")
    for what, bc in (("bc_r", bc_r), ("bc_theta", bc_t)):
        if bc not in ("greville", "hermite", "periodic"):
            raise ConfigError(f"[domain] {what} must be greville, hermite or periodic")

    try:
        modes = tuple(PlanMode.parse(m) for m in items(_get(raw, "plan", "modes", "exact")))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[plan] modes: {exc}") from None
    cross = _get(raw, "plan", "cross", "auto")
    if cross not in ("auto", "r", "theta"):
        raise ConfigError("[plan] cross must be auto, r or theta")

    eg = items(_get(raw, "interpolation", "eval_grid", "301, 400"))
    if len(eg) != 2:
        raise ConfigError("[interpolation] eval_grid: expected 'n_r, n_theta'")
    eval_grid = (integer(eg[0], "eval_grid"), integer(eg[1], "eval_grid"))
    if min(eval_grid) < 2:
        raise ConfigError("[interpolation] eval_grid needs at least 2 points per direction")

    a = raw.get("advection", {})
    adv = AdvectionSpec(
        dt=number(a.get("dt", "0.01"), "[advection] dt"),
        t_final=number(a.get("t_final", "2.0"), "[advection] t_final"),
        tracer=a.get("tracer", "rk3"),
        omega=number(a.get("omega", "2*pi"), "[advection] omega"),
        center_r=number(a.get("center_r", "0.5"), "[advection] center_r"),
        center_theta=number(a.get("center_theta", "0"), "[advection] center_theta"),
        radius=number(a.get("radius", "0.3"), "[advection] radius"),
        snapshot_every=integer(a.get("snapshot_every", "0"), "[advection] snapshot_every"),
        boundary_tol=number(a.get("boundary_tol", "1e-6"), "[advection] boundary_tol"),
    )
    if not adv.dt > 0.0:
        raise ConfigError("[advection] dt must be positive")
    if adv.t_final < 0.0:
        raise ConfigError("[advection] t_final must be non-negative")
    if adv.tracer not in ("rk3", "exact_logical"):
        raise ConfigError("[advection] tracer must be rk3 or exact_logical")
    if adv.snapshot_every < 0 or adv.radius <= 0.0:
        raise ConfigError("[advection] snapshot_every must be >= 0 and radius > 0")

    s = raw.get("stability", {})
    sh = items(s.get("shifts", "0.001, 0.999, 999"))
    if len(sh) != 3:
        raise ConfigError("[stability] shifts: expected 'first, last, count'")
    stab = StabilitySpec(
        n_patches=integer(s.get("n_patches", "5"), "[stability] n_patches"),
        n_cells=integer(s.get("n_cells", "3"), "[stability] n_cells"),
        shifts=(number(sh[0], "shifts"), number(sh[1], "shifts"), integer(sh[2], "shifts")),
        probe_shift=number(s.get("probe_shift", "405/100000"), "[stability] probe_shift"),
        c1=boolean(s.get("c1", "true"), "[stability] c1"),
    )
    if stab.n_patches < 1 or stab.n_cells < 1 or stab.shifts[2] < 1:
        raise ConfigError("[stability] n_patches, n_cells and the shift count must be positive")
    if not (0.0 <= stab.shifts[0] <= stab.shifts[1] < stab.n_cells and 0.0 <= stab.probe_shift < stab.n_cells):
        raise ConfigError("[stability] shifts must lie in [0, n_cells)")

    c = raw.get("coefficients", {})
    ns = tuple(integer(t, "[coefficients] n") for t in items(c.get("n", "5, 10, 15, 20, 25, 30")))
    if min(ns) < 1:
        raise ConfigError("[coefficients] n values must be positive")
    cdx = number(c.get("dx", "1"), "[coefficients] dx")
    if not cdx > 0.0:
        raise ConfigError("[coefficients] dx must be positive")

    v = raw.get("convergence", {})
    refinements = tuple(number(t, "[convergence] refinements") for t in items(v.get("refinements", "0.5, 1, 2, 4, 8")))
    if any(f <= 0.0 for f in refinements) or list(refinements) != sorted(set(refinements)):
        raise ConfigError("[convergence] refinements must be positive and strictly increasing")
    eval_points = integer(v.get("eval_points", "200000"), "[convergence] eval_points")
    max_cells = integer(v.get("max_cells", str(2048 * 2048)), "[convergence] max_cells")
    if eval_points < 1 or max_cells < 1:
        raise ConfigError("[convergence] eval_points and max_cells must be positive")

    patches = _patches(raw, "patch")
    twins = _patches(raw, "twin")
    if kind in ("interpolation", "advection", "convergence") and not patches:
        raise ConfigError(f"experiment {kind!r} needs at least one [patch.NAME] section")

    return ExperimentConfig(
        experiment=kind,
        name=_get(raw, "experiment", "name", kind),
        output=_get(raw, "experiment", "output", "out"),
        seed=integer(_get(raw, "experiment", "seed", "0"), "[experiment] seed"),
        mapping=mapping,
        bc_r=bc_r,
        bc_theta=bc_t,
        patches=patches,
        twins=twins,
        modes=modes,
        cross=cross,
        eval_grid=eval_grid,
        advection=adv,
        stability=stab,
        coefficient_ns=ns,
        coefficient_dx=cdx,
        refinements=refinements,
        eval_points=eval_points,
        max_cells=max_cells,
        raw=tuple((k, tuple(e.items())) for k, e in raw.items()),
    )


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def preset_names() -> List[str]:
    root = resources.files("mpspline") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    res = resources.files("mpspline") / "presets" / f"{name}.cfg"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return res.read_text()


def load_preset(name: str) -> ExperimentConfig:
    return ExperimentConfig.from_text(preset_text(name), f"preset:{name}")
