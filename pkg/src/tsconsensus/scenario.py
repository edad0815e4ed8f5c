"""JSON scenario files: parsing, validation and the built-in examples."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import jsonschema

from .certify import CertifyConfig
from .spectral import GammaSpec
from .system import DynamicsSpec, StabilitySystem, TrajectorySpec
from .timescale import FamilySpec, TimeScale, build_explicit, build_family

BUILTIN = ("ex1", "ex2", "ex5", "ex6", "ex8", "ex9", "inline1")

_NUM = {"type": "number"}
_GAMMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "polynomial", "cosine", "inverse_graininess", "per_branch"]},
        "value": _NUM,
        "coeffs": {"type": "array", "items": _NUM, "minItems": 1},
        "offset": _NUM,
        "amplitude": _NUM,
        "scattered": {"$ref": "#/$defs/gamma"},
        "dense": {"$ref": "#/$defs/gamma"},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "constant"}}}, "then": {"required": ["value"]}},
        {"if": {"properties": {"kind": {"const": "polynomial"}}}, "then": {"required": ["coeffs"]}},
        {"if": {"properties": {"kind": {"const": "cosine"}}}, "then": {"required": ["offset", "amplitude"]}},
        {"if": {"properties": {"kind": {"const": "per_branch"}}}, "then": {"required": ["scattered", "dense"]}},
    ],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"gamma": _GAMMA},
    "type": "object",
    "required": ["name", "timescale", "B", "gamma", "F", "lip", "epsilon0", "horizon"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "notes": {"type": "array", "items": {"type": "string"}},
        "timescale": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "intervals"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "explicit"},
                        "intervals": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                        },
                        "unbounded_tail": {"type": "boolean"},
                        "horizon": _NUM,
                        "continuation": {"enum": ["scattered", "dense", "mixed"]},
                    },
                },
                {
                    "type": "object",
                    "required": ["type", "name"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "family"},
                        "name": {"enum": ["ex1", "ex2", "ex5", "ex6", "ex8", "ex9"]},
                        "index_start": {"type": "integer"},
                        "index_max": {"type": "integer"},
                        "inner_index_max": {"type": "integer"},
                    },
                },
            ]
        },
        "B": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": _NUM, "minItems": 1},
        },
        "gamma": {"$ref": "#/$defs/gamma"},
        "F": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["zero", "linear", "linear_decay", "scaled_linear", "sine_field"]},
                "a": _NUM,
                "variant": {"enum": ["inv_t2", "inv_sqrt_t"]},
            },
        },
        "lip": {"type": "number", "minimum": 0},
        "leader": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {"kind": {"enum": ["zero", "constant"]}, "value": _NUM},
        },
        "epsilon0": {"type": "array", "items": _NUM, "minItems": 1},
        "horizon": _NUM,
        "config": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "dense_samples": {"type": "integer", "minimum": 1},
                "decay_factor": {"type": "number", "exclusiveMinimum": 0},
                "tail_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "bounded_factor": {"type": "number", "exclusiveMinimum": 0},
                "series_exponent": {"type": "number", "exclusiveMinimum": 0},
                "lipschitz_samples": {"type": "integer", "minimum": 1},
                "prerequisites": {"enum": ["enforce", "as_published"]},
                "stated": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"delta": _NUM, "m_star": _NUM, "mu_star": _NUM},
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


class ScenarioError(ValueError):
    pass


class UnknownExample(ScenarioError):
    pass


def _tuple2(rows) -> tuple:
    return tuple(tuple(float(v) for v in r) for r in rows)


@dataclass(frozen=True)
class Scenario:
    name: str
    timescale: dict
    B: tuple[tuple[float, ...], ...]
    gamma: GammaSpec
    F: DynamicsSpec
    lip: float
    epsilon0: tuple[float, ...]
    horizon: float
    leader: TrajectorySpec = field(default_factory=TrajectorySpec)
    config: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        errors = sorted(_VALIDATOR.iter_errors(d), key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ScenarioError(f"scenario field {where}: {e.message}")
        n = len(d["B"])
        if any(len(row) != n for row in d["B"]):
            raise ScenarioError(f"scenario field B: expected a {n}x{n} matrix")
        if len(d["epsilon0"]) != n:
            raise ScenarioError(f"scenario field epsilon0: expected {n} entries, got {len(d['epsilon0'])}")
        ts_frag = json.loads(json.dumps(d["timescale"]))
        sc = cls(
            name=d["name"],
            timescale=ts_frag,
            B=_tuple2(d["B"]),
            gamma=GammaSpec.from_dict(d["gamma"]),
            F=DynamicsSpec.from_dict(d["F"]),
            lip=float(d["lip"]),
            epsilon0=tuple(float(v) for v in d["epsilon0"]),
            horizon=float(d["horizon"]),
            leader=TrajectorySpec.from_dict(d.get("leader", {"kind": "zero"})),
            config=json.loads(json.dumps(d.get("config", {}))),
            notes=tuple(d.get("notes", ())),
        )
        try:
            t0 = sc.build_timescale().t0
        except ValueError as exc:
            raise ScenarioError(f"scenario field timescale: {exc}") from exc
        if not sc.horizon > t0:
            raise ScenarioError(f"scenario field horizon: {sc.horizon!r} must exceed T0={t0!r}")
        return sc

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "timescale": self.timescale,
            "B": [list(r) for r in self.B],
            "gamma": self.gamma.to_dict(),
            "F": self.F.to_dict(),
            "lip": self.lip,
            "leader": self.leader.to_dict(),
            "epsilon0": list(self.epsilon0),
            "horizon": self.horizon,
        }
        if self.config:
            d["config"] = self.config
        if self.notes:
            d["notes"] = list(self.notes)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def with_horizon(self, horizon: float) -> "Scenario":
        return replace(self, horizon=float(horizon))

    def build_timescale(self) -> TimeScale:
        """The scale clipped to ``[T0, horizon]``."""
        frag = self.timescale
        if frag["type"] == "explicit":
            ts = build_explicit(frag["intervals"], frag.get("unbounded_tail", False), None, frag.get("continuation"))
        else:
            spec = FamilySpec(frag["name"], frag.get("index_start"), frag.get("index_max"), frag.get("inner_index_max"))
            ts = build_family(spec)
        return ts.windowed(self.horizon)

    def system(self) -> StabilitySystem:
        return StabilitySystem(
            B=self.B, gamma=self.gamma, lip=self.lip, F=self.F, leader=self.leader, epsilon0=self.epsilon0
        )

    @property
    def h(self) -> float:
        return float(self.config.get("h", 1e-3))

    @property
    def dense_samples(self) -> int:
        return int(self.config.get("dense_samples", 64))

    def certify_config(self) -> CertifyConfig:
        keys = ("decay_factor", "tail_fraction", "bounded_factor", "series_exponent", "lipschitz_samples",
                "prerequisites")
        kw = {k: self.config[k] for k in keys if k in self.config}
        return CertifyConfig(dense_samples=512, stated=dict(self.config.get("stated", {})), **kw)


def parse_scenario(text: str) -> Scenario:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return Scenario.from_dict(d)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def load_builtin(name: str) -> Scenario:
    if name not in BUILTIN:
        raise UnknownExample(f"unknown example {name!r}; choose from {', '.join(BUILTIN)}")
    text = resources.files("tsconsensus.scenarios").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return parse_scenario(text)
