"""Experiment configuration: validation with field paths, hashing and object construction."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .apriori import AprioriMeasure, apriori_from_dict
from .errors import ConfigInvalid
from .potential import Potential, potential_from_dict
from .space import SpaceKind
from .weights import WeightSequence, weights_from_dict


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SpaceConfig(_Section):
    kind: Literal["c0", "lp"] = "lp"
    p: float | None = 2.0

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "lp" and (self.p is None or self.p < 1):
            raise ValueError("l^p needs p >= 1")
        return self


class WeightsConfig(_Section):
    kind: Literal["constant", "periodic", "explicit", "block_family"]
    alpha: float | None = None
    values: list[float] | None = None
    period: int | None = None
    a: float | None = None
    b: float | None = None
    runs: tuple[int, int] | None = None
    c: float | None = None
    c_prime: float | None = None
    horizon_K: int | None = None

    @model_validator(mode="after")
    def _check(self):
        need = {"constant": ["alpha"], "periodic": ["values"], "explicit": ["values"], "block_family": ["a", "b"]}
        missing = [f for f in need[self.kind] if getattr(self, f) is None]
        if missing:
            raise ValueError(f"{self.kind} weights need {', '.join(missing)}")
        return self


class AprioriConfig(_Section):
    kind: Literal["gaussian", "student_t", "atoms"] = "gaussian"
    mean: float = 0.0
    variance: float = Field(1.0, gt=0)
    df: float | None = None
    scale: float = Field(1.0, gt=0)
    values: list[float] | None = None
    probs: list[float] | None = None
    quadrature_order: int | None = Field(None, ge=1)
    tail_class: dict | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "student_t" and self.df is None:
            raise ValueError("student_t needs df")
        if self.kind == "atoms" and (self.values is None or self.probs is None):
            raise ValueError("atoms need values and probs")
        return self


class PotentialConfig(_Section):
    kind: Literal["builtin", "cylinder"] = "builtin"
    name: str | None = None
    params: dict[str, Any] = Field(default_factory=dict)
    rank: int | None = Field(None, ge=1)
    expression: str | None = None
    table: dict | None = None
    sup_bound: float | None = None
    lip: float | None = None
    alpha: float = 1.0
    normalize: Literal["none", "eigen"] = "none"

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "builtin" and not self.name:
            raise ValueError("builtin potential needs a name")
        if self.kind == "cylinder" and (self.rank is None or (self.expression is None) == (self.table is None)):
            raise ValueError("cylinder potential needs rank and exactly one of expression or table")
        return self


class SolverConfig(_Section):
    grid: int = Field(41, ge=1)
    clamp_mass: float = Field(1e-6, gt=0, lt=1)
    rank: int | None = Field(None, ge=1)
    s_schedule: list[float] = Field(default_factory=lambda: [0.9, 0.99, 0.999, 0.9999])
    tol: float = Field(1e-10, gt=0)


class GibbsConfig(_Section):
    particles: int = Field(10_000, ge=1)
    iters: int = Field(30, ge=0)
    candidates: int = Field(32, ge=1)
    seed: int | None = Field(None, ge=0)
    max_depth: int = Field(40, ge=1)
    record_every: int = Field(5, ge=1)
    start: list[float] = Field(default_factory=lambda: [0.0])
    start_prime: list[float] | None = None


class MetricConfig(_Section):
    a: Literal["auto"] | float = "auto"
    alpha: float = Field(1.0, gt=0, le=1)


class PairConfig(_Section):
    x: list[float]
    y: list[float]
    n: int | None = Field(None, ge=1)


class ContractConfig(_Section):
    particles: int = Field(2048, ge=2, le=2048)
    local: PairConfig | None = None
    n_grid: list[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    triples: list[PairConfig] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self):
        for t in self.triples:
            if t.n is None:
                raise ValueError("every global triple needs n")
        return self


class TailsConfig(_Section):
    epsilon: float = Field(0.5, gt=0)
    horizon: int = Field(100, ge=4)
    growth: dict | None = None


class OutputsConfig(_Section):
    dir: str = "out"
    formats: list[Literal["json", "jsonl", "bin"]] = Field(default_factory=lambda: ["json", "jsonl", "bin"])


class ExperimentConfig(_Section):
    name: str = "experiment"
    space: SpaceConfig = Field(default_factory=SpaceConfig)
    weights: WeightsConfig
    apriori: AprioriConfig = Field(default_factory=AprioriConfig)
    potential: PotentialConfig = Field(default_factory=lambda: PotentialConfig(name="zero"))
    solver: SolverConfig = Field(default_factory=SolverConfig)
    gibbs: GibbsConfig = Field(default_factory=GibbsConfig)
    metric: MetricConfig = Field(default_factory=MetricConfig)
    contract: ContractConfig = Field(default_factory=ContractConfig)
    tails: TailsConfig = Field(default_factory=TailsConfig)
    outputs: OutputsConfig = Field(default_factory=OutputsConfig)

    # -- construction -------------------------------------------------------

    def build_space(self) -> SpaceKind:
        return SpaceKind(None) if self.space.kind == "c0" else SpaceKind(self.space.p)

    def build_weights(self) -> WeightSequence:
        return weights_from_dict(self.weights.model_dump())

    def build_apriori(self) -> AprioriMeasure:
        d = self.apriori.model_dump()
        if d["tail_class"] is None:
            d.pop("tail_class")
        if d["quadrature_order"] is None:
            d.pop("quadrature_order")
        return apriori_from_dict(d)

    def build_potential(self, m: AprioriMeasure | None = None) -> Potential:
        d = self.potential.model_dump(exclude={"normalize"})
        return potential_from_dict(d, m or self.build_apriori(), self.build_space())

    def canonical(self) -> str:
        """Canonical JSON of everything that affects results (the output section does not)."""
        return json.dumps(self.model_dump(mode="json", exclude={"outputs"}), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _paths(err: ValidationError) -> list[dict]:
    return [{"path": ".".join(str(p) for p in e["loc"]) or "<root>", "message": e["msg"]} for e in err.errors()]


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a mapping; errors carry dotted field paths."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        errs = _paths(exc)
        msg = "; ".join(f"{e['path']}: {e['message']}" for e in errs)
        raise ConfigInvalid(f"invalid config: {msg}", errs) from None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}", [{"path": "<root>", "message": str(exc)}]) from None
    if not isinstance(data, dict):
        raise ConfigInvalid("config must be a JSON object", [{"path": "<root>", "message": "not an object"}])
    return parse_config(data)


def with_overrides(cfg: ExperimentConfig, **flags) -> ExperimentConfig:
    """Apply non-None CLI overrides to the ``gibbs`` and ``outputs`` sections and revalidate."""
    data = cfg.model_dump()
    g = data["gibbs"]
    for key in ("seed", "particles", "iters", "candidates"):
        if flags.get(key) is not None:
            g[key] = flags[key]
    if flags.get("out") is not None:
        data["outputs"]["dir"] = str(flags["out"])
    return parse_config(data)
