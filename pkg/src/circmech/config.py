"""Strict YAML scenario configuration.

Every key is checked against a schema.  Unknown keys, wrong types and
missing required keys each raise their own error carrying the dotted key
path and the line it was found on (or the line of the enclosing section
for missing keys).  Defaults fill in only keys that have one listed here.

Layout::

    scenario: comparative_statics
    seed: 42
    output:            # optional
      dir: out
      format: csv      # csv | json
    params:
      tau_grid: [0, 0.5, 1, 2]
      enforcement:     # optional; baseline values below
        cost_coeff: 1.0
"""

from __future__ import annotations

import difflib
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .rng import SEED_MAX

SCENARIOS = (
    "comparative_statics",
    "disclosure_equilibrium",
    "elicitation",
    "correlation_collapse",
    "saito_epoch",
    "construct_analysis",
)
FORMATS = ("csv", "json")

REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if key:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ConfigFileNotFound(ConfigError, FileNotFoundError):
    pass


class ConfigSyntaxError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    def __init__(self, key: str, line: int | None, suggestion: str | None):
        self.suggestion = suggestion
        hint = f" (did you mean '{suggestion}'?)" if suggestion else ""
        super().__init__(f"unknown key{hint}", key, line)


class TypeMismatchError(ConfigError):
    pass


class MissingKeyError(ConfigError):
    pass


@dataclass(frozen=True)
class Field:
    kind: str  # int | float | str | bool | floats | enum | section
    default: Any = REQUIRED
    choices: tuple = ()
    schema: dict | None = None
    length: int | None = None


ENFORCEMENT_SCHEMA = {
    "cost_coeff": Field("float", 1.0),
    "cost_exponent": Field("float", 1.0),
    "risk_scale": Field("float", 100.0),
    "trust_sensitivity": Field("float", 1.0),
    "security_scale": Field("float", 1.0),
}


def _enforcement() -> Field:
    return Field("section", {}, schema=ENFORCEMENT_SCHEMA)


PARAM_SCHEMAS: dict[str, dict[str, Field]] = {
    "comparative_statics": {
        "enforcement": _enforcement(),
        "tau_grid": Field("floats"),
    },
    "disclosure_equilibrium": {
        "enforcement": _enforcement(),
        "n_agents": Field("int"),
        "tau": Field("float"),
        "tau_spread": Field("float", 0.0),
        "honesty": Field("float", 0.9),
        "value": Field("float", 1.0),
        "surplus_offer": Field("float", 0.5),
        # None: half the settlement value
        "loss": Field("float", None),
        "initial_security": Field("float", 1.0),
        "target_retreat": Field("float", 0.1),
        "gain": Field("float", 0.05),
        # None: [0, upper search bracket of the enforcement model]
        "security_bounds": Field("floats", None, length=2),
        "max_rounds": Field("int", 5000),
    },
    "elicitation": {
        "enforcement": _enforcement(),
        "n_agents": Field("int"),
        "tau_max": Field("float", 4.0),
        "grid_points": Field("int", 10),
        "value": Field("float", 1.0),
    },
    "correlation_collapse": {
        "exploit_fraction": Field("float"),
        "signal_noise": Field("float", 0.2),
        "learning_rate": Field("float", 1.0),
        "rounds": Field("int", 1500),
        "deals_per_round": Field("int", 100),
        "window_rounds": Field("int", 50),
        "mimic_rate": Field("float", 0.01),
        "honor_gain": Field("float", 1.0),
        "betrayal_loss": Field("float", 1.0),
        "initial_weight": Field("float", 1.0),
        "initial_mimicry": Field("float", 0.7),
    },
    "saito_epoch": {
        "nodes": Field("int"),
        "rounds": Field("int"),
        "tx_per_round": Field("int", 5),
        "max_path_length": Field("int", 3),
        "fee_mean": Field("float", 1.0),
        "threshold": Field("float", 2.0),
        "difficulty": Field("float", 0.05),
        "payout_miner_fraction": Field("float", 0.5),
        "initial_wealth": Field("float", 100.0),
    },
    "construct_analysis": {
        "construct": Field("str"),
        "taxonomy": Field("str", None),
    },
}

OUTPUT_SCHEMA = {
    "dir": Field("str", "out"),
    "format": Field("enum", "csv", choices=FORMATS),
}


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int
    params: dict
    output_dir: str = "out"
    output_format: str = "csv"
    source: Path | None = None
    sha256: str = ""
    run_index: int = 0
    raw: dict = field(default_factory=dict, repr=False)


def _line(node: yaml.Node) -> int:
    return node.start_mark.line + 1


_constructor = yaml.SafeLoader("")


def _scalar(node: yaml.Node) -> Any:
    return _constructor.construct_object(node, deep=True)


def _convert(node: yaml.Node, fld: Field, key: str) -> Any:
    line = _line(node)
    if fld.kind == "section":
        return _section(node, fld.schema, key)
    if fld.kind == "floats":
        if not isinstance(node, yaml.SequenceNode):
            raise TypeMismatchError("expected a list of numbers", key, line)
        values = [_convert(item, Field("float"), f"{key}[{i}]") for i, item in enumerate(node.value)]
        if fld.length is not None and len(values) != fld.length:
            raise TypeMismatchError(f"expected exactly {fld.length} numbers", key, line)
        return values
    if not isinstance(node, yaml.ScalarNode):
        raise TypeMismatchError(f"expected a {fld.kind} scalar", key, line)
    value = _scalar(node)
    if fld.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatchError(f"expected an integer, got {node.value!r}", key, line)
        return value
    if fld.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatchError(f"expected a number, got {node.value!r}", key, line)
        return float(value)
    if fld.kind == "bool":
        if not isinstance(value, bool):
            raise TypeMismatchError(f"expected true/false, got {node.value!r}", key, line)
        return value
    if fld.kind == "str":
        if not isinstance(value, str):
            raise TypeMismatchError(f"expected a string, got {node.value!r}", key, line)
        return value
    if fld.kind == "enum":
        if value not in fld.choices:
            raise TypeMismatchError(
                f"expected one of {', '.join(fld.choices)}, got {node.value!r}", key, line
            )
        return value
    raise AssertionError(fld.kind)


def _section(node: yaml.Node, schema: dict[str, Field], path: str) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise TypeMismatchError("expected a mapping", path or None, _line(node))
    out: dict[str, Any] = {}
    for key_node, value_node in node.value:
        key = _scalar(key_node)
        full = f"{path}.{key}" if path else str(key)
        if key not in schema:
            close = difflib.get_close_matches(str(key), list(schema), n=1, cutoff=0.5)
            raise UnknownKeyError(full, _line(key_node), close[0] if close else None)
        if key in out:
            raise ConfigError("duplicate key", full, _line(key_node))
        out[key] = _convert(value_node, schema[key], full)
    for key, fld in schema.items():
        if key in out:
            continue
        full = f"{path}.{key}" if path else key
        if fld.default is REQUIRED:
            raise MissingKeyError("missing required key", full, _line(node))
        if fld.kind == "section":
            empty = yaml.MappingNode("tag:yaml.org,2002:map", [], node.start_mark, node.end_mark)
            out[key] = _section(empty, fld.schema, full)
        else:
            out[key] = fld.default
    return out


def parse_config_text(text: str, source: Path | None = None) -> ScenarioConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigSyntaxError(str(getattr(exc, "problem", exc)), None, mark.line + 1 if mark else None) from None
    if root is None:
        raise MissingKeyError("missing required key", "scenario", 1)
    if not isinstance(root, yaml.MappingNode):
        raise TypeMismatchError("top level must be a mapping", None, _line(root))

    scenario_node = next((v for k, v in root.value if _scalar(k) == "scenario"), None)
    if scenario_node is None:
        raise MissingKeyError("missing required key", "scenario", _line(root))
    scenario = _convert(scenario_node, Field("enum", choices=SCENARIOS), "scenario")

    schema = {
        "scenario": Field("enum", choices=SCENARIOS),
        "seed": Field("int"),
        "output": Field("section", {}, schema=OUTPUT_SCHEMA),
        "params": Field("section", REQUIRED if _has_required(PARAM_SCHEMAS[scenario]) else {},
                        schema=PARAM_SCHEMAS[scenario]),
    }
    top = _section(root, schema, "")
    seed = top["seed"]
    if not 0 <= seed <= SEED_MAX:
        line = next(_line(v) for k, v in root.value if _scalar(k) == "seed")
        raise TypeMismatchError("seed must be a 64-bit unsigned integer", "seed", line)
    return ScenarioConfig(
        scenario=scenario,
        seed=seed,
        params=top["params"],
        output_dir=top["output"]["dir"],
        output_format=top["output"]["format"],
        source=source,
        sha256=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        raw=top,
    )


def _has_required(schema: dict[str, Field]) -> bool:
    return any(f.default is REQUIRED for f in schema.values())


def parse_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigFileNotFound(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=path)
