"""Scenario configuration files (JSON) and their validation."""

from __future__ import annotations

import json
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, model_validator
from pydantic import ValidationError as PydanticValidationError

from .beamsplitter import ATOM_NORM_TOL, Tuning
from .fock import CoherentMixture

CONFIG_SCHEMA_VERSION = 1
DEFAULT_N_MAX = 40
DEFAULT_CLONE_KAPPA = -1.0

SCENARIOS = ("clone", "broadcast", "steady_state", "attenuate", "discriminate")


class ConfigError(Exception):
    """Base for configuration problems; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, path: str = ""):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where, path)


class ValidationError(ConfigError):
    pass


def _to_complex(v: Any) -> complex:
    if isinstance(v, complex):
        return v
    if isinstance(v, bool):
        raise ValueError("boolean is not a complex number")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    if isinstance(v, dict) and set(v) <= {"re", "im"}:
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    raise ValueError(f"cannot read {v!r} as a complex number; use a number, [re, im] or '1+2j'")


Complex = Annotated[
    complex,
    BeforeValidator(_to_complex),
    PlainSerializer(lambda z: [z.real, z.imag], return_type=list),
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TuningSpec(_Strict):
    kappa: Optional[Complex] = None
    alpha: Optional[Complex] = None
    beta: Optional[Complex] = None
    r: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        atom = (self.alpha, self.beta)
        if any(x is not None for x in atom) and any(x is None for x in atom):
            raise ValueError("alpha and beta must be given together")
        if self.alpha is not None:
            norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
            if abs(norm - 1) > ATOM_NORM_TOL:
                raise ValueError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
            if self.beta == 0:
                raise ValueError("beta = 0 leaves kappa = alpha/(beta r) undefined")
            implied = self.alpha / (self.beta * (self.r or 1.0))
            if self.kappa is not None and abs(implied - self.kappa) > 1e-9 * max(1.0, abs(implied)):
                raise ValueError(f"kappa {self.kappa} inconsistent with alpha/(beta r) = {implied}")
        elif self.kappa is None:
            raise ValueError("give kappa or (alpha, beta[, r])")
        return self

    def resolve(self) -> Tuning:
        if self.alpha is not None:
            return Tuning.from_atom(self.alpha, self.beta, self.r or 1.0)
        return Tuning.from_kappa(self.kappa, self.r or 1.0)


class ChannelSpec(_Strict):
    g: float = Field(default=1.0, gt=0)
    r: float = Field(default=1.0, gt=0)
    tau: float = Field(default=1.0, ge=0)
    include_stark: bool = True
    alpha: Optional[Complex] = None
    beta: Optional[Complex] = None


class MonteCarloSpec(_Strict):
    n_samples: int = Field(default=100_000, ge=1)
    seed: int = Field(ge=0)
    workers: int = Field(default=1, ge=1)


class Tolerances(_Strict):
    tol: float = Field(default=1e-8, gt=0)
    tail: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=10_000, ge=1)


MixtureTerms = list[tuple[float, Complex]]


class ScenarioConfig(_Strict):
    schema_version: int = CONFIG_SCHEMA_VERSION
    scenario: Literal["clone", "broadcast", "steady_state", "attenuate", "discriminate"]
    n_max: int = Field(default=DEFAULT_N_MAX, ge=1)
    gamma: Optional[Complex] = None
    tuning: Optional[TuningSpec] = None
    attenuation: Optional[Union[float, list[float]]] = None
    mixtures: dict[str, MixtureTerms] = Field(default_factory=dict)
    input: Optional[str] = None
    target: Optional[str] = None
    rho: Optional[str] = None
    sigma: Optional[str] = None
    channel: Optional[ChannelSpec] = None
    monte_carlo: Optional[MonteCarloSpec] = None
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @model_validator(mode="after")
    def _scenario_rules(self):
        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        for name, terms in self.mixtures.items():
            try:
                CoherentMixture(tuple(terms))
            except ValueError as exc:
                raise ValueError(f"mixture {name!r}: {exc}") from None
        for field in ("input", "target", "rho", "sigma"):
            ref = getattr(self, field)
            if ref is not None and ref not in self.mixtures:
                raise ValueError(f"{field} refers to undefined mixture {ref!r}")

        sc = self.scenario
        needs = {
            "clone": ["gamma"],
            "broadcast": ["input"],
            "steady_state": [],
            "attenuate": ["rho", "attenuation"],
            "discriminate": ["rho", "sigma", "attenuation", "monte_carlo"],
        }[sc]
        for field in needs:
            if getattr(self, field) is None:
                hint = " (seeds are mandatory for reproducibility)" if field == "monte_carlo" else ""
                raise ValueError(f"scenario {sc!r} requires {field!r}{hint}")
        if sc != "discriminate" and self.monte_carlo is not None:
            raise ValueError("monte_carlo only applies to scenario 'discriminate'")
        if sc != "steady_state" and self.channel is not None:
            raise ValueError("channel only applies to scenario 'steady_state'")
        ch = self.channel
        if ch is not None and (ch.alpha is not None or ch.beta is not None):
            if ch.alpha is None or ch.beta is None:
                raise ValueError("channel.alpha and channel.beta must be given together")
            norm = abs(ch.alpha) ** 2 + abs(ch.beta) ** 2
            if abs(norm - 1) > ATOM_NORM_TOL:
                raise ValueError(f"channel atom state: |alpha|^2 + |beta|^2 = {norm!r}, expected 1")
            if ch.beta == 0:
                raise ValueError("channel.beta = 0 leaves kappa = alpha/(beta r) undefined")
            if self.tuning is not None:
                raise ValueError("give the atom state either in channel or in tuning, not both")
        if ch is not None and self.tuning is not None and self.tuning.r is not None and self.tuning.r != ch.r:
            raise ValueError("tuning.r and channel.r disagree")
        if sc == "discriminate" and isinstance(self.attenuation, list):
            raise ValueError("discriminate takes a single attenuation A")
        for A in self.attenuation_values():
            if not 0 < A <= 1:
                raise ValueError(f"attenuation A must lie in (0, 1], got {A}")
        return self

    def attenuation_values(self) -> list[float]:
        if self.attenuation is None:
            return []
        return list(self.attenuation) if isinstance(self.attenuation, list) else [self.attenuation]

    def mixture(self, name: str) -> CoherentMixture:
        return CoherentMixture(tuple(self.mixtures[name]))

    def resolved_tuning(self) -> Tuning | None:
        ch = self.channel
        r = ch.r if ch is not None else 1.0
        if self.tuning is not None:
            if self.tuning.alpha is None and self.tuning.r is None:
                return Tuning.from_kappa(self.tuning.kappa, r)
            return self.tuning.resolve()
        if ch is not None and ch.alpha is not None:
            return Tuning.from_atom(ch.alpha, ch.beta, ch.r)
        if self.scenario in ("clone", "broadcast", "steady_state"):
            return Tuning.from_kappa(DEFAULT_CLONE_KAPPA, r)
        return None

    def resolved(self) -> dict:
        """Full config with defaults, as plain JSON data."""
        data = self.model_dump(mode="json")
        if self.scenario == "steady_state" and self.channel is None:
            data["channel"] = ChannelSpec().model_dump(mode="json")
        t = self.resolved_tuning()
        if t is not None:
            data["tuning"] = {
                "kappa": [t.kappa.real, t.kappa.imag],
                "alpha": [t.alpha.real, t.alpha.imag],
                "beta": [t.beta.real, t.beta.imag],
                "r": t.r,
            }
        return data


def _loc(loc: tuple) -> str:
    return ".".join(str(p) for p in loc)


def validate_config(data: Any) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    try:
        return ScenarioConfig.model_validate(data)
    except PydanticValidationError as exc:
        err = exc.errors()[0]
        msg = err["msg"].removeprefix("Value error, ")
        raise ValidationError(msg, _loc(err["loc"])) from None


def parse_config(text: str | bytes, overrides: list[str] | tuple[str, ...] = ()) -> ScenarioConfig:
    """Parse UTF-8 JSON text, apply ``key.path=value`` overrides, validate."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"config is not UTF-8: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    for item in overrides:
        apply_override(data, item)
    return validate_config(data)


def apply_override(data: dict, item: str) -> None:
    """Set ``a.b.c=value`` in nested dicts; ``value`` is JSON if it parses, else a string."""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ParseError(f"override {item!r} is not key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = data
    for i, p in enumerate(parts[:-1]):
        nxt = node.get(p)
        if nxt is None:
            nxt = node[p] = {}
        if not isinstance(nxt, dict):
            raise ParseError(f"cannot descend into non-object {p!r}", path=".".join(parts[: i + 1]))
        node = nxt
    node[parts[-1]] = value


def complex_pair(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and complex numbers to JSON data."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return complex_pair(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj
