"""Pipeline configuration: JSON serialization and dotted CLI overrides.

One config object wires every stage (descriptors, retrieval, loss,
optimizer, degradation, synthetic guides) plus run-level settings.  A
single global seed fans out through deterministic child seeds, so any
subcommand is reproducible in isolation.  Overrides address fields by
dotted path (for example optim.iterations or retrieval.keep); a few
spelling aliases are accepted for common shorthands.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace

from .degrade import DegradationSpec
from .descriptors import DescriptorConfig
from .retrieval import RetrievalConfig
from .warp import OptimConfig, WarpLossWeights

_SECTION_ALIASES = {"warp": "optim"}
_FIELD_ALIASES = {
    ("optim", "iters"): "iterations",
    ("optim", "lr"): "step",
    ("retrieval", "k"): "keep",
    ("retrieval", "rho"): "expand_radius",
}


@dataclass(frozen=True)
class GuideConfig:
    """Synthetic guide drawing bounds (used when no guide files are given).

    Each guide draws a rotation in [-rotation_deg, rotation_deg], per-axis
    translations in [-translate_px, translate_px], a scale factor in
    [1 - scale_jitter, 1 + scale_jitter] and photometric jitter bounds
    passed straight to the generator.  All-zero bounds give the identity
    view.
    """

    rotation_deg: float = 0.0
    translate_px: float = 0.0
    scale_jitter: float = 0.0
    gain_jitter: float = 0.0
    offset_jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.rotation_deg < 0 or self.translate_px < 0:
            raise ValueError("guide draw bounds must be nonnegative")
        if not 0 <= self.scale_jitter < 1:
            raise ValueError(f"scale_jitter must lie in [0, 1), got {self.scale_jitter}")
        if not 0 <= self.gain_jitter < 1:
            raise ValueError(f"gain_jitter must lie in [0, 1), got {self.gain_jitter}")
        if not 0 <= self.offset_jitter <= 0.5:
            raise ValueError(f"offset_jitter must lie in [0, 0.5], got {self.offset_jitter}")


@dataclass(frozen=True)
class PipelineConfig:
    """Full pipeline wiring for the command-line entry points."""

    proxies: tuple[str, ...] = ()
    guides: tuple[str, ...] = ()
    out_dir: str = "out"
    seed: int = 0
    jobs: int = 1
    ratio: int = 3
    guides_per_proxy: int = 3
    stencil: int = 7
    temperature: float = 1.0
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    loss: WarpLossWeights = field(default_factory=WarpLossWeights)
    optim: OptimConfig = field(default_factory=OptimConfig)
    degradation: DegradationSpec = field(default_factory=lambda: DegradationSpec(kind="gaussian_noniid"))
    guide: GuideConfig = field(default_factory=GuideConfig)

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")
        if self.ratio < 0:
            raise ValueError(f"ratio must be nonnegative, got {self.ratio}")
        if self.guides_per_proxy < 1:
            raise ValueError(f"guides_per_proxy must be at least 1, got {self.guides_per_proxy}")
        if self.stencil < 1 or self.stencil % 2 == 0:
            raise ValueError(f"stencil must be odd and positive, got {self.stencil}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        object.__setattr__(self, "proxies", tuple(self.proxies))
        object.__setattr__(self, "guides", tuple(self.guides))

    def to_json(self) -> dict:
        payload = {
            "proxies": list(self.proxies),
            "guides": list(self.guides),
            "out_dir": self.out_dir,
            "seed": self.seed,
            "jobs": self.jobs,
            "ratio": self.ratio,
            "guides_per_proxy": self.guides_per_proxy,
            "stencil": self.stencil,
            "temperature": self.temperature,
            "descriptor": dataclasses.asdict(self.descriptor),
            "retrieval": dataclasses.asdict(self.retrieval),
            "loss": dataclasses.asdict(self.loss),
            "optim": dataclasses.asdict(self.optim),
            "degradation": self.degradation.to_json(),
            "guide": dataclasses.asdict(self.guide),
        }
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "PipelineConfig":
        data = dict(payload)
        sections = {
            "descriptor": DescriptorConfig,
            "retrieval": RetrievalConfig,
            "loss": WarpLossWeights,
            "optim": OptimConfig,
            "guide": GuideConfig,
        }
        kwargs = {}
        for name, ctor in sections.items():
            if name in data:
                kwargs[name] = ctor(**data.pop(name))
        if "degradation" in data:
            kwargs["degradation"] = DegradationSpec.from_json(data.pop("degradation"))
        for name in ("proxies", "guides"):
            if name in data:
                data[name] = tuple(data[name])
        kwargs.update(data)
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def apply_overrides(self, overrides: dict[str, str]) -> "PipelineConfig":
        """Apply dotted-path string overrides with field-typed coercion."""
        config = self
        for dotted, raw in overrides.items():
            config = _apply_one(config, dotted, raw)
        return config


def _coerce(raw: str, current) -> object:
    if isinstance(current, bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean from {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        parts = [p for p in raw.split(",") if p != ""]
        if current and isinstance(current[0], float):
            return tuple(float(p) for p in parts)
        if current and isinstance(current[0], int):
            return tuple(int(p) for p in parts)
        return tuple(parts)
    return raw


def _apply_one(config: PipelineConfig, dotted: str, raw: str) -> PipelineConfig:
    parts = dotted.split(".")
    if len(parts) == 1:
        name = parts[0]
        if not hasattr(config, name):
            raise KeyError(f"unknown config field {dotted!r}")
        return replace(config, **{name: _coerce(raw, getattr(config, name))})
    if len(parts) != 2:
        raise KeyError(f"override paths have at most two components, got {dotted!r}")
    section, fieldname = parts
    section = _SECTION_ALIASES.get(section, section)
    fieldname = _FIELD_ALIASES.get((section, fieldname), fieldname)
    if not hasattr(config, section):
        raise KeyError(f"unknown config section {section!r}")
    sub = getattr(config, section)
    if not dataclasses.is_dataclass(sub):
        raise KeyError(f"config field {section!r} is not a section")
    if not hasattr(sub, fieldname):
        raise KeyError(f"unknown field {fieldname!r} in section {section!r}")
    new_sub = replace(sub, **{fieldname: _coerce(raw, getattr(sub, fieldname))})
    return replace(config, **{section: new_sub})
