"""
config.py — key = value experiment configuration.

Config files are UTF-8 `key = value` lines with `#` comments, read with the
python-dotenv parser so every binding keeps its line number. Values are
validated through ExperimentConfig; every failure is reported as a
ConfigError naming the offending key and line.

Example:

    system = baker
    system.alpha = 1/3
    k = 1e6
    n_grid = 1000, 2000, 5000
    observables = g1, g2
    alpha = 4
"""

from __future__ import annotations

import io
import logging
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from dotenv.parser import parse_stream
from pydantic import ValidationError

from src.errors import ConfigError
from src.state import ExperimentConfig, IfsBranch

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "EVT_OUTPUT_DIR"

TOP_LEVEL_KEYS = {
    "system",
    "observables",
    "alpha",
    "C",
    "k",
    "n_grid",
    "ensemble",
    "centers",
    "seed",
    "burn_in",
    "bootstrap_B",
    "min_block",
    "start_jitter",
    "families",
    "output_dir",
}

# system.<field> keys accepted per system kind
SYSTEM_KEYS: Dict[str, Tuple[str, ...]] = {
    "cantor": ("w", "start"),
    "sierpinski": ("start",),
    "weighted_ifs": ("branches", "w", "start"),
    "baker": ("alpha", "gamma_a", "gamma_b", "start"),
    "henon": ("a", "b", "start"),
    "lozi": ("a", "b", "start"),
}

INT_KEYS = {"k", "ensemble", "centers", "seed", "burn_in", "bootstrap_B", "min_block"}
FLOAT_KEYS = {"alpha", "C", "start_jitter"}


# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------


def _number(text: str) -> Fraction:
    """Exact parse of '0.3', '1e6', '-2' or '1/3'."""
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return Fraction(num.strip()) / Fraction(den.strip())
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def parse_float(text: str) -> float:
    return float(_number(text))


def parse_int(text: str) -> int:
    value = _number(text)
    if value.denominator != 1:
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def parse_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def parse_branches(text: str) -> List[IfsBranch]:
    """Comma-separated `a:lambda:w` triples; `a` may be `x;y` for 2-D offsets."""
    branches = []
    for item in parse_list(text):
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"branch {item!r} is not of the form a:lambda:w")
        offset = [parse_float(c) for c in parts[0].split(";")]
        branches.append(
            IfsBranch(offset=offset, ratio=parse_float(parts[1]), weight=parse_float(parts[2]))
        )
    return branches


def _weighted_cantor_branches(w: float) -> List[IfsBranch]:
    return [
        IfsBranch(offset=[0.0], ratio=1.0 / 3.0, weight=w),
        IfsBranch(offset=[2.0 / 3.0], ratio=1.0 / 3.0, weight=1.0 - w),
    ]


# ---------------------------------------------------------------------------
# Bindings
# ---------------------------------------------------------------------------


def _bindings(text: str) -> Dict[str, Tuple[str, int]]:
    """key -> (value, line) with duplicate and syntax checks."""
    out: Dict[str, Tuple[str, int]] = {}
    for binding in parse_stream(io.StringIO(text)):
        line = binding.original.line
        if binding.error:
            raise ConfigError(f"cannot parse {binding.original.string.strip()!r}", line=line)
        if binding.key is None:
            continue
        if binding.value is None or not binding.value.strip():
            raise ConfigError("missing value", key=binding.key, line=line)
        if binding.key in out:
            raise ConfigError(
                f"duplicate key, first set on line {out[binding.key][1]}",
                key=binding.key,
                line=line,
            )
        out[binding.key] = (binding.value.strip(), line)
    return out


def _system_payload(bindings: Mapping[str, Tuple[str, int]]) -> Dict[str, Any]:
    if "system" not in bindings:
        raise ConfigError("required key is missing", key="system")
    kind, line = bindings["system"]
    if kind not in SYSTEM_KEYS:
        raise ConfigError(f"unknown system {kind!r}, expected one of {sorted(SYSTEM_KEYS)}", "system", line)

    payload: Dict[str, Any] = {"kind": kind}
    for key, (value, line) in bindings.items():
        if not key.startswith("system."):
            continue
        field = key.split(".", 1)[1]
        if field not in SYSTEM_KEYS[kind]:
            raise ConfigError(f"not a parameter of {kind}", key=key, line=line)
        try:
            if field == "start":
                payload["start"] = [parse_float(v) for v in parse_list(value)]
            elif field == "branches":
                payload["branches"] = parse_branches(value)
            else:
                payload[field] = parse_float(value)
        except (ValueError, ValidationError) as exc:
            raise ConfigError(str(exc), key=key, line=line) from exc

    if kind == "weighted_ifs":
        if "w" in payload and "branches" in payload:
            raise ConfigError(
                "give either system.w or system.branches", "system.w", bindings["system.w"][1]
            )
        if "w" in payload:
            try:
                payload["branches"] = _weighted_cantor_branches(payload.pop("w"))
            except ValidationError as exc:
                raise ConfigError(str(exc), "system.w", bindings["system.w"][1]) from exc
        elif "branches" not in payload:
            raise ConfigError("weighted_ifs needs system.w or system.branches", "system", line)
    return payload


def _error_key(loc: Tuple[Any, ...], message: str = "") -> str:
    """Map a pydantic error location back to a config key."""
    if not loc:
        # model-level validators carry the key in their message
        for key in ("n_grid", "observables", "k"):
            if key in message:
                return key
        return "system"
    head = str(loc[0])
    if head == "system":
        # ("system", "<kind>", "<field>", ...)
        if len(loc) >= 3:
            field = str(loc[2])
            return "system.branches" if field in ("branches", "branch_list") else f"system.{field}"
        if "weight" in message or "offset" in message:
            return "system.branches"
        return "system"
    if head == "observables" and len(loc) >= 3:
        return str(loc[2]) if str(loc[2]) in ("alpha", "C") else "observables"
    return head


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def parse_config(text: str, overrides: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Validated ExperimentConfig from config text.

    `overrides` are applied after the file (CLI flags and the output-dir
    environment variable); they are reported with no line number.
    """
    bindings = _bindings(text)
    for key, value in (overrides or {}).items():
        bindings[key] = (str(value), 0)

    for key, (_, line) in bindings.items():
        if key in TOP_LEVEL_KEYS or key.startswith("system."):
            continue
        raise ConfigError("unknown key", key=key, line=line or None)

    payload: Dict[str, Any] = {"system": _system_payload(bindings)}

    obs_kwargs: Dict[str, float] = {}
    kinds: List[str] = ["g1", "g2", "g3"]
    for key, (value, line) in bindings.items():
        if key == "system" or key.startswith("system."):
            continue
        try:
            if key in INT_KEYS:
                payload[key] = parse_int(value)
            elif key in FLOAT_KEYS:
                if key in ("alpha", "C"):
                    obs_kwargs[key] = parse_float(value)
                else:
                    payload[key] = parse_float(value)
            elif key == "n_grid":
                payload[key] = [parse_int(v) for v in parse_list(value)]
            elif key == "observables":
                kinds = parse_list(value)
            elif key == "families":
                payload[key] = parse_list(value)
            else:
                payload[key] = value
        except ValueError as exc:
            raise ConfigError(str(exc), key=key, line=line or None) from exc

    if "k" not in payload:
        raise ConfigError("required key is missing", key="k")

    try:
        payload["observables"] = [{"kind": kind, **obs_kwargs} for kind in kinds]
        config = ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = _error_key(tuple(first.get("loc", ())), first.get("msg", ""))
        line = bindings.get(key, (None, None))[1]
        raise ConfigError(first.get("msg", str(exc)), key=key, line=line or None) from exc

    logger.debug("Parsed config: %s", config.model_dump(mode="json"))
    return config


def load_config(path: str, overrides: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Read and parse a config file; EVT_OUTPUT_DIR overrides output_dir."""
    text = Path(path).read_text(encoding="utf-8")
    merged: Dict[str, str] = {}
    env_dir = os.getenv(OUTPUT_DIR_ENV)
    if env_dir:
        merged["output_dir"] = env_dir
    merged.update(overrides or {})
    config = parse_config(text, merged)
    logger.info("Loaded config %s (system=%s, k=%d)", path, config.system_tag, config.k)
    return config


def config_echo(config: ExperimentConfig) -> Dict[str, Any]:
    """The fully resolved config, defaults included, as JSON-ready data."""
    echo = config.model_dump(mode="json", by_alias=True)
    echo["burn_in"] = config.effective_burn_in
    return echo
