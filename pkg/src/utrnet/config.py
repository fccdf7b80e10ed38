"""Plain-text configuration: ``[section]`` headers with flat ``key = value`` pairs.

Recognised sections are ``model``, ``train``, ``synth``, ``augment`` and
``experiment``.  Values are parsed against the type of the matching dataclass
default, so ``rtl = false`` and ``overlap_range = 0.0, 0.25`` both work.
Command-line overrides are applied on top, and :func:`write_effective_config`
records the merged result next to a run's outputs.
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path
from typing import Dict, Mapping, Optional

from .exceptions import ContractError
from .model import ModelConfig
from .synthgen import AugmentationConfig, SynthConfig
from .trainer import TrainConfig

Sections = Dict[str, Dict[str, str]]

SECTIONS = ("model", "train", "synth", "augment", "experiment")

EXPERIMENT_DEFAULTS = {
    "seeds": "0, 1, 2",
    "n_train": "256",
    "n_test": "128",
    "max_iter": "3000",
    "batch_size": "8",
    "max_words": "1",
    "highres_backbone": "unet",
    "lowres_backbone": "lowres-baseline",
}


def read_config(path: Optional[str]) -> Sections:
    sections: Sections = {name: {} for name in SECTIONS}
    if path is None:
        return sections
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ContractError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ContractError(f"malformed config file {path}: {exc}".replace("\n", " ")) from None
    for name in parser.sections():
        if name not in sections:
            raise ContractError(f"{path}: unknown section [{name}]; expected one of {', '.join(SECTIONS)}")
        sections[name].update(parser[name])
    return sections


def merge(sections: Sections, section: str, overrides: Mapping[str, object]) -> None:
    for key, value in overrides.items():
        if value is not None:
            sections.setdefault(section, {})[key] = str(value)


def _parse(raw: str, default, key: str):
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            parts = [p.strip() for p in text.strip("()[]").split(",") if p.strip()]
            kind = type(default[0]) if default else float
            return tuple(kind(p) for p in parts)
        if default is None:
            if text.lower() in ("none", ""):
                return None
            try:
                return float(text)
            except ValueError:
                return tuple(int(p) for p in text.strip("()[]").split(","))
        return text
    except ValueError:
        raise ContractError(f"config key {key!r}: cannot parse {raw!r}") from None


def _build(cls, values: Mapping[str, str], section: str, **fixed):
    defaults = cls(**fixed)
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = dict(fixed)
    for key, raw in values.items():
        if key not in known or key in fixed:
            raise ContractError(f"unknown key {key!r} in [{section}]")
        kwargs[key] = _parse(raw, getattr(defaults, key), f"{section}.{key}")
    return cls(**kwargs)


def model_config(sections: Sections) -> ModelConfig:
    return _build(ModelConfig, sections.get("model", {}), "model")


def train_config(sections: Sections) -> TrainConfig:
    return _build(TrainConfig, sections.get("train", {}), "train", model=model_config(sections))


def synth_config(sections: Sections) -> SynthConfig:
    aug = _build(AugmentationConfig, sections.get("augment", {}), "augment")
    return _build(SynthConfig, sections.get("synth", {}), "synth", augmentation=aug)


def experiment_settings(sections: Sections) -> Dict[str, object]:
    values = dict(EXPERIMENT_DEFAULTS)
    for key, raw in sections.get("experiment", {}).items():
        if key not in values:
            raise ContractError(f"unknown key {key!r} in [experiment]")
        values[key] = raw
    return {
        "seeds": tuple(int(s) for s in str(values["seeds"]).split(",") if s.strip()),
        "n_train": int(values["n_train"]),
        "n_test": int(values["n_test"]),
        "max_iter": int(values["max_iter"]),
        "batch_size": int(values["batch_size"]),
        "max_words": int(values["max_words"]),
        "highres_backbone": str(values["highres_backbone"]).strip(),
        "lowres_backbone": str(values["lowres_backbone"]).strip(),
    }


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, (tuple, list)):
        return ", ".join(_render(v) for v in value)
    return str(value)


def write_effective_config(path, blocks: Mapping[str, Mapping[str, object]]) -> None:
    """Write fully-resolved settings in the same format :func:`read_config` reads."""
    lines = []
    for section, values in blocks.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_render(v)}" for k, v in values.items())
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def flat_fields(obj, skip=()) -> Dict[str, object]:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj) if f.name not in skip}
