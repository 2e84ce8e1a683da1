"""Scenario configuration: TOML files validated against a strict schema.

Every table rejects unknown keys, so a typo fails loudly with the offending
location instead of silently falling back to a default. Receiver variants are
short strings of the form ``<postdist>[@M]/<detector>``:

* ``postdist`` is one of ``none``, ``mm``, ``vs``, ``gpr``, ``nn``;
* ``@M`` optionally overrides the memory depth for that variant;
* ``detector`` is ``single`` (nominal branch), ``best`` (branch with the
  highest training-block rate) or ``dassd`` (all branches jointly).

``conventional`` is shorthand for ``none/single`` and ``linear`` for the same
receiver behind an ideal linear PA.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

POSTDISTORTERS = ("none", "mm", "vs", "gpr", "nn")
DETECTORS = ("single", "best", "dassd")
_VARIANT_RE = re.compile(r"^(?P<pd>[a-z]+)(?:@(?P<m>\d+))?(?:/(?P<det>[a-z]+))?$")


class ConfigError(ValueError):
    """Invalid scenario file; the message names the offending key."""


@dataclass(frozen=True)
class VariantSpec:
    name: str
    postdist: str
    detector: str
    memory_depth: int | None = None
    linear_pa: bool = False

    def depth(self, default: int) -> int:
        return default if self.memory_depth is None else self.memory_depth


def parse_variant(name: str) -> VariantSpec:
    if name == "conventional":
        return VariantSpec(name, "none", "single")
    if name == "linear":
        return VariantSpec(name, "none", "single", linear_pa=True)
    m = _VARIANT_RE.match(name)
    if m is None:
        raise ValueError(f"malformed receiver variant {name!r}")
    pd, det = m["pd"], m["det"] or "single"
    if pd not in POSTDISTORTERS:
        raise ValueError(f"variant {name!r}: unknown post-distorter {pd!r}, choose from {POSTDISTORTERS}")
    if det not in DETECTORS:
        raise ValueError(f"variant {name!r}: unknown detector {det!r}, choose from {DETECTORS}")
    if pd == "mm" and det == "dassd":
        raise ValueError(f"variant {name!r}: the MM metric is scalar and cannot drive the branch-joint detector")
    depth = int(m["m"]) if m["m"] else None
    if depth is not None and (pd in ("none", "mm") or depth < 1):
        raise ValueError(f"variant {name!r}: memory depth only applies to vs, gpr and nn (M >= 1)")
    return VariantSpec(name, pd, det, depth)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioSection(_Section):
    name: str
    kind: Literal["link", "spectrum"] = "link"
    description: str = ""
    seed: int = Field(0, ge=0)
    trials: int = Field(20, ge=1)


class ModulationSection(_Section):
    order: int = 64

    @field_validator("order")
    @classmethod
    def _square(cls, v):
        side = int(round(v**0.5))
        if v < 4 or side * side != v or side & (side - 1):
            raise ValueError("order must be a square power of two (4, 16, 64, ...)")
        return v


class PulseSection(_Section):
    roll_off: float = Field(0.3, ge=0.0, le=1.0)
    span: int = Field(20, ge=4)
    sps: int = Field(4, ge=1)


class LayoutSection(_Section):
    n_data: int = Field(1024, ge=1)
    n_cp: int = Field(32, ge=0)
    n_cs: int = Field(16, ge=0)
    n_ft: int = Field(512, ge=1)
    n_st: int = Field(4096, ge=1)


class SalehSection(_Section):
    g0: float = 2.0
    a_sat: float = 1.0
    alpha: float = 2.0
    beta: float = 1.0


class PaSection(_Section):
    model: Literal["linear", "saleh", "memory_poly"] = "saleh"
    backoff_db: list[float] = Field(default_factory=list)
    saleh: SalehSection = SalehSection()


class ChannelSection(_Section):
    profile: Literal["awgn", "symbol_sparse", "dense_exponential"] = "awgn"
    span_symbols: int = Field(16, ge=1)


class FdeSection(_Section):
    l_b: int = Field(4, ge=1)
    l_f: int = Field(16, ge=1)


class GprSection(_Section):
    n_segments: int = Field(4, ge=1)
    max_iter: int = Field(200, ge=1)


class NnSection(_Section):
    hidden: int = Field(30, ge=1)
    epochs: int = Field(100, ge=1)
    lambda_init: float = Field(1e-3, gt=0)


class VolterraSection(_Section):
    cubic: bool = True


class ReceiverSection(_Section):
    variants: list[str] = Field(default_factory=lambda: ["conventional"])
    memory_depth: int = Field(2, ge=1)
    mm_min_hits: int = Field(20, ge=1)
    fde: FdeSection = FdeSection()
    gpr: GprSection = GprSection()
    nn: NnSection = NnSection()
    volterra: VolterraSection = VolterraSection()

    @field_validator("variants")
    @classmethod
    def _variants(cls, v):
        if not v:
            raise ValueError("at least one receiver variant is required")
        if len(set(v)) != len(v):
            raise ValueError("duplicate receiver variants")
        for name in v:
            parse_variant(name)
        return v


class SweepSection(_Section):
    snr_db: list[float] = Field(default_factory=lambda: [50.0])


class MetricsSection(_Section):
    outage_threshold: Optional[float] = None
    scatter_points: int = Field(0, ge=0)


class SpectrumSection(_Section):
    profiles: list[Literal["symbol_sparse", "dense_exponential"]] = Field(
        default_factory=lambda: ["symbol_sparse", "dense_exponential"])
    n_symbols: int = Field(100_000, ge=1)
    segment_len: int = Field(1024, ge=8)
    min_fade_db: float = 20.0
    min_cancellation_db: float = 20.0
    max_draws: int = Field(200, ge=1)


class OutputSection(_Section):
    save_models: bool = False


class ScenarioConfig(_Section):
    scenario: ScenarioSection
    modulation: ModulationSection = ModulationSection()
    pulse: PulseSection = PulseSection()
    layout: LayoutSection = LayoutSection()
    pa: PaSection = PaSection()
    channel: ChannelSection = ChannelSection()
    receiver: ReceiverSection = ReceiverSection()
    sweep: SweepSection = SweepSection()
    metrics: MetricsSection = MetricsSection()
    spectrum: SpectrumSection = SpectrumSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _consistent(self):
        lay, ch, fde = self.layout, self.channel, self.receiver.fde
        if self.pa.model != "linear" and not self.pa.backoff_db:
            raise ValueError("pa.backoff_db: a nonlinear PA needs at least one backoff value")
        if self.pa.model == "linear" and self.pa.backoff_db:
            raise ValueError("pa.backoff_db: the linear PA has no saturation, leave the grid empty")
        span = 1 if ch.profile == "awgn" else ch.span_symbols
        if lay.n_cp < span - 1:
            raise ValueError(f"layout.n_cp={lay.n_cp} shorter than the channel span {span} minus one")
        if lay.n_cs < fde.l_b - 1:
            raise ValueError(f"layout.n_cs={lay.n_cs} shorter than receiver.fde.l_b - 1")
        if max(lay.n_cp, lay.n_cs) > lay.n_data:
            raise ValueError("layout: cyclic extension longer than the data block")
        if lay.n_ft < fde.l_b + fde.l_f:
            raise ValueError("layout.n_ft too short for the channel estimate")
        t = self.metrics.outage_threshold
        if t is not None and not 0 < t <= self.bits_per_symbol:
            raise ValueError(f"metrics.outage_threshold must lie in (0, {self.bits_per_symbol}]")
        return self

    @property
    def bits_per_symbol(self) -> int:
        return self.modulation.order.bit_length() - 1

    @property
    def variants(self) -> list[VariantSpec]:
        return [parse_variant(v) for v in self.receiver.variants]

    @property
    def backoffs(self) -> list[float | None]:
        return list(self.pa.backoff_db) or [None]

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, seed: int | None = None, trials: int | None = None,
                       variant_filter: str | None = None) -> "ScenarioConfig":
        """Copy with CLI overrides applied; the result is re-validated."""
        from fnmatch import fnmatchcase

        data = self.model_dump(mode="python")
        if seed is not None:
            data["scenario"]["seed"] = seed
        if trials is not None:
            data["scenario"]["trials"] = trials
        if variant_filter:
            pats = [p.strip() for p in variant_filter.split(",") if p.strip()]
            keep = [v for v in data["receiver"]["variants"] if any(fnmatchcase(v, p) for p in pats)]
            if not keep:
                raise ConfigError(f"variant filter {variant_filter!r} matches none of {data['receiver']['variants']}")
            data["receiver"]["variants"] = keep
        return _validate(data, "<overrides>")


def _format_error(exc: ValidationError, source: str) -> str:
    lines = [f"invalid scenario {source}:"]
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "\n".join(lines)


def _validate(data: dict, source: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc, source)) from None


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return _validate(data, source)


def preset_names() -> list[str]:
    root = resources.files("scfde.harness") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_text(name: str) -> str:
    path = resources.files("scfde.harness") / "presets" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text(encoding="utf-8")


def load_config(source) -> ScenarioConfig:
    """Load a scenario from a file path or a preset name."""
    if isinstance(source, ScenarioConfig):
        return source
    p = Path(source)
    if p.suffix == ".toml" or p.exists():
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        return parse_config(p.read_text(encoding="utf-8"), str(p))
    return parse_config(preset_text(str(source)), f"preset {source}")
