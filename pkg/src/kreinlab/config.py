"""Run configuration: a versioned INI file with a closed schema.

Example::

    [format]
    version = 1

    [domain]
    lower = -1, -1
    upper = 1, 1

    [mesh]
    resolution = 64, 64

    [measure.horizontal]
    kind = segment
    start = -1, 0
    end = 1, 0

    [solver]
    k = 10

Numbers may be written as fractions (``1/3``).  Unknown sections or keys are
rejected.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .measure import AreaComponent, AtomComponent, Box, IFSComponent, Measure, MeasureError, SegmentComponent

FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


def _num(s: str) -> float:
    try:
        return float(Fraction(s.strip()))
    except (ValueError, ZeroDivisionError):
        try:
            return float(s)
        except ValueError:
            raise ConfigError(f"not a number: {s!r}") from None


def _vec(s: str) -> tuple[float, ...]:
    return tuple(_num(p) for p in s.split(",") if p.strip())


def _vecs(s: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_vec(p) for p in s.split(";") if p.strip())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    kind: str
    params: dict

    def build(self):
        p = self.params
        w = p.get("weight", 1.0)
        try:
            if self.kind == "area":
                return AreaComponent(Box(p["lower"], p["upper"]), w)
            if self.kind == "segment":
                return SegmentComponent(p["start"], p["end"], w)
            if self.kind == "atom":
                return AtomComponent(p["point"], w)
            if self.kind == "ifs":
                return IFSComponent(p["ratios"], p["shifts"], p["probs"], int(p.get("depth", 6)), w,
                                    p.get("anchor"))
        except KeyError as exc:
            raise ConfigError(f"[measure.{self.name}] missing key {exc.args[0]!r}") from None
        raise ConfigError(f"[measure.{self.name}] unknown kind {self.kind!r}")


_COMPONENT_KEYS = {
    "area": {"lower": _vec, "upper": _vec},
    "segment": {"start": _vec, "end": _vec},
    "atom": {"point": _vec},
    "ifs": {"ratios": _vec, "shifts": _vecs, "probs": _vec, "depth": lambda s: int(s), "anchor": _vec},
}


@dataclass(frozen=True)
class RunConfig:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: tuple[int, ...]
    components: tuple[ComponentSpec, ...]
    k: int = 10
    tol: float = 1e-8
    max_iter: int | None = None
    cluster_tol: float = 1e-3
    tol_rel: float = 1e-8
    green_enable: bool = True
    green_order: int = 6
    nodes_per_unit: float = 64.0
    cells_per_axis: int = 32
    example: str | None = None
    bumps: int = 20
    output: str = "run"
    seed: int = 0
    name: str = field(default="", compare=False)

    @property
    def domain(self) -> Box:
        return Box(self.lower, self.upper)

    def measure(self) -> Measure:
        try:
            return Measure(tuple(c.build() for c in self.components), self.domain, self.name)
        except MeasureError as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, seed: int | None = None, output: str | None = None) -> "RunConfig":
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if output is not None:
            out = replace(out, output=str(output))
        return out

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("name")
        d["components"] = [{"name": c.name, "kind": c.kind, **{k: _jsonable(v) for k, v in c.params.items()}}
                           for c in self.components]
        return {k: _jsonable(v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        """Inverse of :meth:`as_dict` (used to rebuild a run from its report)."""
        d = dict(d)
        comps = []
        for c in d.pop("components"):
            c = dict(c)
            name, kind = c.pop("name"), c.pop("kind")
            params = {k: (tuple(tuple(x) if isinstance(x, list) else x for x in v) if isinstance(v, list) else v)
                      for k, v in c.items()}
            comps.append(ComponentSpec(name, kind, params))
        for key in ("lower", "upper", "resolution"):
            d[key] = tuple(d[key])
        return cls(components=tuple(comps), **d)

    def digest(self) -> str:
        """SHA-256 of the canonical config, excluding the output location."""
        d = self.as_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


_SECTIONS = {
    "format": {"version": int},
    "domain": {"lower": _vec, "upper": _vec},
    "mesh": {"resolution": lambda s: tuple(int(p) for p in s.split(",") if p.strip())},
    "solver": {"k": int, "tol": _num, "max_iter": int, "cluster_tol": _num},
    "nodal": {"tol_rel": _num},
    "green": {"enable": _bool, "order": int, "nodes_per_unit": _num, "cells_per_axis": int},
    "validate": {"example": str, "bumps": int},
    "output": {"directory": str},
    "run": {"seed": int},
}

_FIELD = {
    ("solver", "k"): "k", ("solver", "tol"): "tol", ("solver", "max_iter"): "max_iter",
    ("solver", "cluster_tol"): "cluster_tol", ("nodal", "tol_rel"): "tol_rel",
    ("green", "enable"): "green_enable", ("green", "order"): "green_order",
    ("green", "nodes_per_unit"): "nodes_per_unit", ("green", "cells_per_axis"): "cells_per_axis",
    ("validate", "example"): "example", ("validate", "bumps"): "bumps",
    ("output", "directory"): "output", ("run", "seed"): "seed",
}


def parse_config(text: str, name: str = "") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None

    values: dict = {}
    comps = []
    for sec in cp.sections():
        if sec.startswith("measure."):
            cname = sec.split(".", 1)[1]
            items = dict(cp[sec])
            kind = items.pop("kind", None)
            if kind not in _COMPONENT_KEYS:
                raise ConfigError(f"[{sec}] kind must be one of {sorted(_COMPONENT_KEYS)}")
            allowed = {**_COMPONENT_KEYS[kind], "weight": _num}
            params = {}
            for key, raw in items.items():
                if key not in allowed:
                    raise ConfigError(f"[{sec}] unknown key {key!r}")
                try:
                    params[key] = allowed[key](raw)
                except ValueError as exc:
                    raise ConfigError(f"[{sec}] {key}: {exc}") from None
            comps.append(ComponentSpec(cname, kind, params))
            continue
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp[sec].items():
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"[{sec}] unknown key {key!r}")
            try:
                values[(sec, key)] = _SECTIONS[sec][key](raw.strip())
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from None

    version = values.get(("format", "version"))
    if version != FORMAT_VERSION:
        raise ConfigError(f"[format] version must be {FORMAT_VERSION}, got {version!r}")
    for req in [("domain", "lower"), ("domain", "upper"), ("mesh", "resolution")]:
        if req not in values:
            raise ConfigError(f"[{req[0]}] {req[1]} is required")
    if not comps:
        raise ConfigError("at least one [measure.<name>] section is required")

    lower, upper = values[("domain", "lower")], values[("domain", "upper")]
    res = values[("mesh", "resolution")]
    if len(lower) != len(upper) or len(lower) not in (1, 2):
        raise ConfigError("domain must be an interval or a rectangle")
    if len(res) == 1 and len(lower) == 2:
        res = (res[0], res[0])
    if len(res) != len(lower):
        raise ConfigError("resolution must give one count per axis")
    kw = {_FIELD[key]: v for key, v in values.items() if key in _FIELD}
    if kw.get("max_iter", 1) <= 0:
        kw["max_iter"] = None
    if kw.get("example", "").lower() in ("", "none"):
        kw.pop("example", None)
    cfg = RunConfig(tuple(lower), tuple(upper), tuple(res), tuple(comps), name=name, **kw)
    _check(cfg)
    return cfg


def _check(cfg: RunConfig) -> None:
    if any(n < 2 for n in cfg.resolution):
        raise ConfigError("resolution must be >= 2 per axis")
    if cfg.k < 1:
        raise ConfigError("solver k must be >= 1")
    for label, v in [("solver tol", cfg.tol), ("cluster_tol", cfg.cluster_tol), ("nodal tol_rel", cfg.tol_rel),
                     ("green nodes_per_unit", cfg.nodes_per_unit)]:
        if not v > 0:
            raise ConfigError(f"{label} must be > 0")
    if cfg.green_order < 0 or cfg.cells_per_axis < 1 or cfg.bumps < 0:
        raise ConfigError("green order, cells_per_axis and validate bumps must be nonnegative")
    try:
        Box(cfg.lower, cfg.upper)
    except (ValueError, MeasureError) as exc:
        raise ConfigError(str(exc)) from None
    cfg.measure()


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text, p.stem)
