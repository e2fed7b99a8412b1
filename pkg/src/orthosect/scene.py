"""Scene files and reports.

A scene is a strict JSON document holding named tetrahedra, optional named
pedal chains, optional tolerance overrides and free-form metadata. Floats
round-trip bit-exactly (shortest decimal serialization, up to 17
significant digits). Reports mirror a command run: the echoed command,
structured results, and verdicts that are recomputable from the recorded
numbers and tolerances alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .errors import SceneError
from .geom_core import Point
from .orthology import Tetrahedron
from .pedal import PedalChain

_TOP_LEVEL_KEYS = {"tetrahedra", "chains", "tolerance", "metadata"}
_CHAIN_KEYS = {"host", "feet", "sources", "closure_spread"}
_EDGE_NAMES = ("12", "13", "14", "23", "24", "34")


@dataclass(frozen=True, eq=False)
class SceneChain:
    host_name: str
    chain: PedalChain


@dataclass(eq=False)
class Scene:
    tetrahedra: Dict[str, Tetrahedron] = field(default_factory=dict)
    chains: Dict[str, SceneChain] = field(default_factory=dict)
    eps_abs: Optional[float] = None
    eps_rel: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def tetrahedron(self, name: str) -> Tetrahedron:
        if name not in self.tetrahedra:
            raise SceneError(f"no tetrahedron named {name!r} in scene "
                             f"(have: {sorted(self.tetrahedra)})")
        return self.tetrahedra[name]


def _reject_nonfinite(value):
    raise SceneError(f"non-finite number {value!r} in scene file")


def _no_duplicate_keys(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise SceneError(f"duplicate name {key!r} in scene file")
        out[key] = value
    return out


def _check_point(value, where: str) -> Point:
    if (not isinstance(value, (list, tuple)) or len(value) != 3
            or not all(isinstance(c, (int, float)) for c in value)):
        raise SceneError(f"{where}: expected a 3-number coordinate, got {value!r}")
    if not all(math.isfinite(float(c)) for c in value):
        raise SceneError(f"{where}: non-finite coordinate {value!r}")
    return Point(float(value[0]), float(value[1]), float(value[2]))


def _parse_tetrahedron(name: str, value) -> Tetrahedron:
    where = f"tetrahedra.{name}"
    if not isinstance(value, list) or len(value) != 4:
        raise SceneError(f"{where}: expected 4 vertices, got "
                         f"{len(value) if isinstance(value, list) else type(value).__name__}")
    return Tetrahedron(tuple(_check_point(v, f"{where}[{i}]") for i, v in enumerate(value)))


def _parse_chain(name: str, value, tetrahedra: Dict[str, Tetrahedron]) -> SceneChain:
    where = f"chains.{name}"
    if not isinstance(value, dict):
        raise SceneError(f"{where}: expected an object")
    unknown = set(value) - _CHAIN_KEYS
    if unknown:
        raise SceneError(f"{where}: unknown fields {sorted(unknown)}")
    missing = _CHAIN_KEYS - set(value)
    if missing:
        raise SceneError(f"{where}: missing fields {sorted(missing)}")
    host_name = value["host"]
    if host_name not in tetrahedra:
        raise SceneError(f"{where}.host: unknown tetrahedron {host_name!r}")
    feet_raw = value["feet"]
    if not isinstance(feet_raw, dict) or set(feet_raw) != set(_EDGE_NAMES):
        raise SceneError(f"{where}.feet: expected exactly the keys {_EDGE_NAMES}")
    feet = {frozenset((int(k[0]), int(k[1]))): _check_point(v, f"{where}.feet.{k}")
            for k, v in feet_raw.items()}
    sources_raw = value["sources"]
    if not isinstance(sources_raw, list) or len(sources_raw) != 4:
        raise SceneError(f"{where}.sources: expected 4 points")
    sources = tuple(_check_point(v, f"{where}.sources[{i}]")
                    for i, v in enumerate(sources_raw))
    closure = value["closure_spread"]
    if not isinstance(closure, (int, float)) or not math.isfinite(float(closure)):
        raise SceneError(f"{where}.closure_spread: expected a finite number")
    chain = PedalChain(host=tetrahedra[host_name], feet=feet, sources=sources,
                       closure_spread=float(closure))
    return SceneChain(host_name=host_name, chain=chain)


def scene_from_dict(doc, strict: bool = True) -> Scene:
    if not isinstance(doc, dict):
        raise SceneError("scene root must be a JSON object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if strict and unknown:
        raise SceneError(f"unknown top-level fields {sorted(unknown)}")
    tets_raw = doc.get("tetrahedra", {})
    if not isinstance(tets_raw, dict):
        raise SceneError("tetrahedra: expected an object of name -> 4x3 array")
    tetrahedra = {str(name): _parse_tetrahedron(str(name), v)
                  for name, v in tets_raw.items()}
    chains = {str(name): _parse_chain(str(name), v, tetrahedra)
              for name, v in doc.get("chains", {}).items()}
    eps_abs = eps_rel = None
    if "tolerance" in doc:
        tol_raw = doc["tolerance"]
        if not isinstance(tol_raw, dict) or set(tol_raw) - {"eps_abs", "eps_rel"}:
            raise SceneError('tolerance: expected {"eps_abs": ..., "eps_rel": ...}')
        eps_abs = float(tol_raw["eps_abs"]) if "eps_abs" in tol_raw else None
        eps_rel = float(tol_raw["eps_rel"]) if "eps_rel" in tol_raw else None
        for label, v in (("eps_abs", eps_abs), ("eps_rel", eps_rel)):
            if v is not None and (not math.isfinite(v) or v <= 0):
                raise SceneError(f"tolerance.{label}: must be a positive finite number")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SceneError("metadata: expected an object")
    return Scene(tetrahedra=tetrahedra, chains=chains,
                 eps_abs=eps_abs, eps_rel=eps_rel, metadata=metadata)


def load_scene(path, strict: bool = True) -> Scene:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh, parse_constant=_reject_nonfinite,
                            object_pairs_hook=_no_duplicate_keys)
    except OSError as exc:
        raise SceneError(f"cannot read scene file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(f"malformed JSON in {path}: line {exc.lineno} "
                         f"column {exc.colno}: {exc.msg}") from exc
    return scene_from_dict(doc, strict=strict)


def _point_list(p: Point) -> List[float]:
    return [p.x, p.y, p.z]


def scene_to_dict(scene: Scene) -> dict:
    doc: Dict[str, Any] = {
        "tetrahedra": {name: [_point_list(v) for v in tet.vertices]
                       for name, tet in scene.tetrahedra.items()},
    }
    if scene.chains:
        doc["chains"] = {}
        for name, sc in scene.chains.items():
            feet = {"".join(str(i) for i in sorted(key)): _point_list(p)
                    for key, p in sc.chain.feet.items()}
            doc["chains"][name] = {
                "host": sc.host_name,
                "feet": {k: feet[k] for k in _EDGE_NAMES},
                "sources": [_point_list(p) for p in sc.chain.sources],
                "closure_spread": sc.chain.closure_spread,
            }
    if scene.eps_abs is not None or scene.eps_rel is not None:
        tol = {}
        if scene.eps_abs is not None:
            tol["eps_abs"] = scene.eps_abs
        if scene.eps_rel is not None:
            tol["eps_rel"] = scene.eps_rel
        doc["tolerance"] = tol
    if scene.metadata:
        doc["metadata"] = scene.metadata
    return doc


def dumps_canonical(doc) -> str:
    """Deterministic JSON encoding used for scenes and reports."""
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(scene_to_dict(scene)))


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    value: float
    tolerance: float
    op: str = "<="  # how value relates to tolerance when passing

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "value": self.value, "tolerance": self.tolerance, "op": self.op}


@dataclass(eq=False)
class Report:
    command: List[str]
    results: Dict[str, Any] = field(default_factory=dict)
    verdicts: List[Verdict] = field(default_factory=list)
    error: Optional[str] = None
    wall_time_s: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(v.passed for v in self.verdicts)

    def add_verdict(self, name: str, value: float, tolerance: float,
                    passed: Optional[bool] = None, op: str = "<=") -> None:
        if passed is None:
            passed = {"<=": value <= tolerance,
                      ">=": value >= tolerance,
                      "==": value == tolerance}[op]
        self.verdicts.append(Verdict(name=name, passed=bool(passed),
                                     value=float(value), tolerance=float(tolerance),
                                     op=op))

    def to_dict(self, include_timing: bool = False) -> dict:
        doc = {
            "command": list(self.command),
            "results": self.results,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "passed": self.passed,
        }
        if self.error is not None:
            doc["error"] = self.error
        if include_timing and self.wall_time_s is not None:
            doc["wall_time_s"] = self.wall_time_s
        return doc

    def to_json(self, include_timing: bool = False) -> str:
        return dumps_canonical(self.to_dict(include_timing=include_timing))
