"""TOML model configuration.

Sections: ``[arrivals]`` (``rate``, ``batch_pmf``), ``[service.b1]`` and
``[service.b2]`` (``family`` plus its parameters; b2 defaults to b1),
``[costs]``, ``[damage]`` (``j1``, ``j2``) and ``[control]`` (``level``
plus optional ``c``, ``rho12_limit``, ``c_min``, ``c_max``, ``tol``).
When ``control.c`` is given, B1 is rescaled so that ``rho1 = 1 + c/level``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import tomli

from .errors import ModelError
from .model import BatchDistribution, ConstantCost, DamModel, cost_from_dict, service_from_dict

KNOWN_SECTIONS = {"arrivals", "service", "costs", "damage", "control"}


class ConfigError(ModelError):
    """Configuration file or override problem, with a location."""


@dataclass(frozen=True)
class RunConfig:
    model: DamModel
    control: dict[str, Any] = field(default_factory=dict)
    raw: dict[str, Any] = field(default_factory=dict)


def parse_override(text: str) -> tuple[list[str], Any]:
    """``section.key=value`` with the value read as a TOML literal (bare strings allowed)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, val = text.split("=", 1)
    path = [p.strip() for p in key.strip().split(".") if p.strip()]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = tomli.loads(f"v = {val.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = val.strip()
    return path, value


def apply_overrides(tree: dict[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    out = copy.deepcopy(tree)
    for ov in overrides:
        path, value = parse_override(ov)
        node = out
        for p in path[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {ov!r}: {p!r} is not a section")
        node[path[-1]] = value
    return out


def _section(tree: dict[str, Any], name: str) -> dict[str, Any]:
    sec = tree.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def model_from_tree(tree: dict[str, Any]) -> RunConfig:
    unknown = set(tree) - KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    where = "arrivals"
    try:
        arr = _section(tree, "arrivals")
        if "rate" not in arr:
            raise ConfigError("[arrivals] needs 'rate'")
        batches = BatchDistribution(arr.get("batch_pmf", [1.0]))
        service = _section(tree, "service")
        where = "service.b1"
        if "b1" not in service:
            raise ConfigError("[service.b1] is required")
        b1 = service_from_dict(service["b1"])
        where = "service.b2"
        b2 = service_from_dict(service["b2"]) if "b2" in service else b1
        where = "costs"
        costs_tree = _section(tree, "costs")
        costs = cost_from_dict(costs_tree) if costs_tree else ConstantCost(0.0)
        where = "damage"
        dmg = _section(tree, "damage")
        where = "control"
        ctl = dict(_section(tree, "control"))
        if "level" not in ctl:
            raise ConfigError("[control] needs 'level'")
        level = ctl["level"]
        lam = arr["rate"]
        if "c" in ctl:
            b1 = b1.with_mean((1.0 + float(ctl["c"]) / level) / (float(lam) * batches.mean))
        where = "model"
        m = DamModel(lam, batches, b1, b2, level, dmg.get("j1", 0.0), dmg.get("j2", 0.0), costs)
    except ConfigError:
        raise
    except ModelError as exc:
        raise ConfigError(f"[{where}] {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from None
    return RunConfig(m, ctl, tree)


def load_config(path: str | Path, overrides: Iterable[str] = ()) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    try:
        tree = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return model_from_tree(apply_overrides(tree, overrides))
