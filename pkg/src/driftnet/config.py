"""YAML experiment configuration with strict schema checking.

Schema (every key optional unless marked required)::

    name: str                      # label used in output file names
    model:
      recipe: ou | confined        # required
      params: {...}                # recipe specific, see MODEL_PARAMS
    class:
      q: int
      dims: [d_0, ..., d_{q+1}]
      active: [t_0, ..., t_q]
      smooth: [beta_0, ..., beta_q]
      holder_k: float
    grid:                          # required, list of cells
      - {n: int, delta: float, substeps: int}
    train: {steps, step_size, decay, momentum, max_grad_norm, batch, restarts,
            projection_every, relaxed_factor, init, extend}
    architecture:
      source: auto | explicit
      depth, width, s: int         # explicit only
      F: float                     # defaults to max(holder_k, 1)
      constants: {c_L_upper, c_p, c_s_lower, c_s_upper}
    copies: int                    # independent paths per risk estimate
    seeds: [int, ...]
    output: {dir: str}

Unknown keys are rejected; a key one edit away from a known one is named
as a suggestion.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

MODEL_PARAMS = {
    "ou": {"theta": 1.0, "sigma": 1.0, "dim": 1, "coord": 1, "x0": 0.0},
    "confined": {
        "composition": "single-layer-polynomial",
        "options": {},
        "composition_seed": 0,
        "radial_rate": 1.0,
        "sigma": 1.0,
        "coord": 1,
        "x0": 0.0,
    },
}
COMPOSITION_OPTIONS = ("coefs", "coords", "control_points")
COMPOSITIONS = ("single-layer-polynomial", "additive", "product-of-splines")

_REQUIRED = object()

SCHEMA: dict[str, Any] = {
    "name": ("str", "experiment"),
    "model": {"recipe": ("str", _REQUIRED), "params": ("dict", {})},
    "class": {
        "q": ("int", 0),
        "dims": ("intlist", [1, 1]),
        "active": ("intlist", [1]),
        "smooth": ("floatlist", [1.0]),
        "holder_k": ("float", 1.0),
    },
    "grid": ("cells", _REQUIRED),
    "train": {
        "steps": ("int", 400),
        "step_size": ("float", 0.05),
        "decay": ("optfloat", None),
        "momentum": ("float", 0.9),
        "max_grad_norm": ("optfloat", 1.0),
        "batch": ("optint", None),
        "restarts": ("int", 5),
        "projection_every": ("int", 10),
        "relaxed_factor": ("int", 4),
        "init": ("str", "zeros_plus_sparse"),
        "extend": ("bool", True),
    },
    "architecture": {
        "source": ("str", "auto"),
        "depth": ("optint", None),
        "width": ("optint", None),
        "s": ("optint", None),
        "F": ("optfloat", None),
        "constants": {
            "c_L_upper": ("float", 64.0),
            "c_p": ("float", 1.0),
            "c_s_lower": ("float", 1.0),
            "c_s_upper": ("float", 4.0),
        },
    },
    "copies": ("int", 4),
    "seeds": ("intlist", [0]),
    "output": {"dir": ("str", "out")},
}
CELL_KEYS = {"n": ("int", _REQUIRED), "delta": ("float", _REQUIRED), "substeps": ("int", 50)}


def osa_distance(a: str, b: str) -> int:
    """Optimal string alignment distance (adjacent transpositions count once)."""
    rows, cols = len(a) + 1, len(b) + 1
    d = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        d[i][0] = i
    for j in range(cols):
        d[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                d[i][j] = min(d[i][j], d[i - 2][j - 2] + 1)
    return d[-1][-1]


def _unknown(key: str, known, where: str) -> str:
    near = sorted(k for k in known if osa_distance(str(key), k) == 1)
    hint = f"; did you mean {near[0]!r}?" if near else ""
    return f"{where}: unknown key {key!r}{hint}"


def _coerce(kind: str, value, where: str, errors: list):
    def bad(what):
        errors.append(f"{where}: expected {what}, got {value!r}")
        return None

    if kind.startswith("opt"):
        if value is None:
            return None
        kind = kind[3:]
    if kind == "str":
        return value if isinstance(value, str) else bad("a string")
    if kind == "bool":
        return value if isinstance(value, bool) else bad("true or false")
    if kind == "int":
        return value if isinstance(value, int) and not isinstance(value, bool) else bad("an integer")
    if kind == "float":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        return bad("a number")
    if kind == "dict":
        return copy.deepcopy(value) if isinstance(value, dict) else bad("a mapping")
    if kind in ("intlist", "floatlist"):
        if not isinstance(value, list):
            return bad("a list")
        inner = "int" if kind == "intlist" else "float"
        out = [_coerce(inner, v, f"{where}[{i}]", errors) for i, v in enumerate(value)]
        return out
    raise AssertionError(kind)


def _walk(schema: dict, tree, where: str, errors: list) -> dict:
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        errors.append(f"{where or 'config'}: expected a mapping")
        tree = {}
    for key in tree:
        if key not in schema:
            errors.append(_unknown(key, schema, where or "config"))
    out = {}
    for key, spec in schema.items():
        path = f"{where}.{key}" if where else key
        if isinstance(spec, dict):
            out[key] = _walk(spec, tree.get(key), path, errors)
            continue
        kind, default = spec
        if key not in tree:
            if default is _REQUIRED:
                errors.append(f"{path}: required key missing")
                out[key] = None
            else:
                out[key] = copy.deepcopy(default)
            continue
        if kind == "cells":
            out[key] = _cells(tree[key], path, errors)
        else:
            out[key] = _coerce(kind, tree[key], path, errors)
    return out


def _cells(value, where: str, errors: list) -> list:
    if not isinstance(value, list) or not value:
        errors.append(f"{where}: expected a nonempty list of cells")
        return []
    cells = []
    for i, item in enumerate(value):
        cell = _walk(CELL_KEYS, item, f"{where}[{i}]", errors)
        n, delta = cell["n"], cell["delta"]
        if isinstance(n, int) and isinstance(delta, float):
            if not (0 < delta <= 1.0) or n * delta < 2.0:
                errors.append(
                    f"{where}[{i}]: n = {n}, Δ = {delta:g} violates the sampling regime (Δ ≤ 1 and nΔ ≥ 2)"
                )
        if isinstance(cell["substeps"], int) and cell["substeps"] < 1:
            errors.append(f"{where}[{i}].substeps: must be at least 1")
        cells.append(cell)
    return cells


def _check_semantics(cfg: dict, errors: list) -> None:
    recipe = cfg["model"]["recipe"]
    if recipe is not None and recipe not in MODEL_PARAMS:
        errors.append(f"model.recipe: unknown recipe {recipe!r}; choose from {sorted(MODEL_PARAMS)}")
    elif recipe is not None:
        given = cfg["model"]["params"] or {}
        merged = copy.deepcopy(MODEL_PARAMS[recipe])
        for key, value in given.items():
            if key not in merged:
                errors.append(_unknown(key, merged, "model.params"))
            else:
                merged[key] = value
        if recipe == "confined":
            if merged["composition"] not in COMPOSITIONS:
                errors.append(f"model.params.composition: unknown composition {merged['composition']!r}")
            opts = merged["options"]
            if not isinstance(opts, dict):
                errors.append("model.params.options: expected a mapping")
            else:
                for key in opts:
                    if key not in COMPOSITION_OPTIONS:
                        errors.append(_unknown(key, COMPOSITION_OPTIONS, "model.params.options"))
        cfg["model"]["params"] = merged

    arch = cfg["architecture"]
    if arch["source"] not in ("auto", "explicit"):
        errors.append(f"architecture.source: expected 'auto' or 'explicit', got {arch['source']!r}")
    if arch["source"] == "explicit":
        for key in ("depth", "width", "s"):
            if arch[key] is None:
                errors.append(f"architecture.{key}: required when source is 'explicit'")
    if isinstance(cfg["copies"], int) and cfg["copies"] < 2:
        errors.append("copies: must be at least 2")
    if isinstance(cfg["seeds"], list) and not cfg["seeds"]:
        errors.append("seeds: must list at least one seed")
    cls = cfg["class"]
    if all(isinstance(cls[k], list) for k in ("dims", "active", "smooth")) and isinstance(cls["q"], int):
        q = cls["q"]
        if len(cls["dims"]) != q + 2 or len(cls["active"]) != q + 1 or len(cls["smooth"]) != q + 1:
            errors.append("class: dims needs q+2 entries, active and smooth need q+1")


@dataclass(frozen=True)
class ExperimentConfig:
    tree: dict

    def __getitem__(self, key):
        return self.tree[key]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.tree)

    def dump(self) -> str:
        return yaml.safe_dump(self.tree, sort_keys=True, allow_unicode=True)

    def with_overrides(self, **top) -> "ExperimentConfig":
        tree = self.to_dict()
        tree.update(top)
        return parse_config(tree)


def parse_config(source) -> ExperimentConfig:
    """Parse YAML text, a file path or an already loaded mapping.

    Raises:
        ConfigError: carrying every violation found, not just the first.
    """
    if isinstance(source, dict):
        tree = copy.deepcopy(source)
    else:
        text = source
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).is_file()):
            text = Path(source).read_text(encoding="utf-8")
        try:
            tree = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError([f"malformed YAML: {exc}"]) from exc
    errors: list[str] = []
    cfg = _walk(SCHEMA, tree, "", errors)
    _check_semantics(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(cfg)
