"""Scenario file parsing.

A scenario is a line-oriented ``key = value`` file with five sections:
``[scenario]``, ``[kernel]``, ``[selection]``, ``[emission]`` and
``[demand]``.  The demand section holds one entry per line in the form
``origin,dest,rate,guided_fraction,start,end``.  Blank lines and lines
starting with ``#`` are ignored.  Unknown sections or keys are errors.
"""

from __future__ import annotations

from pathlib import Path

from . import behavior, kernels
from .engine import EmissionConfig, ScenarioConfig
from .errors import ScenarioError
from .network import DemandEntry

_SECTIONS = ("scenario", "kernel", "selection", "emission", "demand")

_SCENARIO_KEYS = {
    "network": str,
    "steps": int,
    "warmup": int,
    "seed": int,
    "mode": str,
    "strategy": str,
    "gain": float,
    "pretrip_only": bool,
    "expire_epsilon": float,
    "max_age": int,
    "att_window": int,
    "conv_window": int,
    "conv_cv": float,
}

_SELECTION_KEYS = ("bias", "w_serv", "w_tra", "w_user", "x_serv", "x_user")

_EMISSION_KEYS = ("period", "f", "change_threshold")

_KERNEL_KEYS = ("type", "dt", "mt", "ct", "x_radius", "mx", "cx", "v")


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ScenarioError(f"key {key!r}: expected true/false, got {raw!r}")


def _coerce(raw: str, kind, key: str):
    if kind is bool:
        return _parse_bool(raw, key)
    try:
        return kind(raw)
    except ValueError:
        raise ScenarioError(f"key {key!r}: cannot parse {raw!r} as {kind.__name__}")


def _split_sections(text: str) -> dict[str, list[tuple[int, str]]]:
    sections: dict[str, list[tuple[int, str]]] = {}
    current: list[tuple[int, str]] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ScenarioError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ScenarioError(f"line {lineno}: duplicate section [{name}]")
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise ScenarioError(f"line {lineno}: content before any section header")
        current.append((lineno, line))
    return sections


def _key_values(lines: list[tuple[int, str]], allowed, section: str) -> dict[str, str]:
    result: dict[str, str] = {}
    for lineno, line in lines:
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value' in [{section}]")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key not in allowed:
            raise ScenarioError(f"line {lineno}: unknown key {key!r} in [{section}]")
        if key in result:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r} in [{section}]")
        result[key] = value
    return result


def parse_kernel(section: dict[str, str]) -> kernels.KernelSpec:
    if "type" not in section:
        raise ScenarioError("[kernel] section requires a 'type' key")
    family = section["type"].strip().lower()
    params = {
        key: _coerce(value, float, key)
        for key, value in section.items()
        if key != "type"
    }
    return kernels.build_kernel(family, params)


def parse_scenario(text: str, base_dir: str | Path = ".") -> ScenarioConfig:
    sections = _split_sections(text)
    for required in ("scenario", "kernel", "demand"):
        if required not in sections:
            raise ScenarioError(f"missing required section [{required}]")

    raw = _key_values(sections["scenario"], _SCENARIO_KEYS, "scenario")
    values = {
        key: _coerce(raw[key], kind, key) for key, kind in _SCENARIO_KEYS.items() if key in raw
    }
    for required in ("network", "steps"):
        if required not in values:
            raise ScenarioError(f"[scenario] requires key {required!r}")

    mode_name = values.get("mode", "descriptive").lower()
    try:
        mode = behavior.Mode(mode_name)
    except ValueError:
        raise ScenarioError(f"unknown mode {mode_name!r} (descriptive|prescriptive)")

    strategy_name = values.get("strategy", "min_perceived_cost").lower()
    if strategy_name == "min_perceived_cost":
        strategy: behavior.ReactionStrategy = behavior.MinPerceivedCost()
    elif strategy_name == "equilibrium_feedback":
        strategy = behavior.EquilibriumFeedback(gain=values.get("gain", 0.5))
    else:
        raise ScenarioError(
            f"unknown strategy {strategy_name!r} "
            "(min_perceived_cost|equilibrium_feedback)"
        )

    kernel = parse_kernel(_key_values(sections["kernel"], _KERNEL_KEYS, "kernel"))

    sel = {
        key: _coerce(value, float, key)
        for key, value in _key_values(
            sections.get("selection", []), _SELECTION_KEYS, "selection"
        ).items()
    }
    selection = behavior.SelectionModel(
        bias=sel.get("bias", 0.0),
        w_serv=sel.get("w_serv", 1.0),
        w_tra=sel.get("w_tra", 1.0),
        w_user=sel.get("w_user", 1.0),
    )

    emi = _key_values(sections.get("emission", []), _EMISSION_KEYS, "emission")
    threshold = _coerce(emi["change_threshold"], float, "change_threshold") if "change_threshold" in emi else 0.2
    if "period" in emi and "f" in emi:
        raise ScenarioError("[emission] takes either 'period' or 'f', not both")
    if "f" in emi:
        emission = EmissionConfig.from_frequency(
            _coerce(emi["f"], float, "f"), change_threshold=threshold
        )
    else:
        emission = EmissionConfig(
            period=_coerce(emi["period"], int, "period") if "period" in emi else 1,
            change_threshold=threshold,
        )

    demand: list[DemandEntry] = []
    for lineno, line in sections["demand"]:
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 6:
            raise ScenarioError(
                f"line {lineno}: demand entry needs "
                "'origin,dest,rate,guided_fraction,start,end'"
            )
        try:
            demand.append(
                DemandEntry(
                    origin=int(parts[0]),
                    dest=int(parts[1]),
                    rate=float(parts[2]),
                    guided_fraction=float(parts[3]),
                    window=(int(parts[4]), int(parts[5])),
                )
            )
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from exc

    network_path = Path(values["network"])
    if not network_path.is_absolute():
        network_path = Path(base_dir) / network_path

    return ScenarioConfig(
        network=str(network_path),
        demand=demand,
        kernel=kernel,
        steps=values["steps"],
        warmup=values.get("warmup", 0),
        seed=values.get("seed", 0),
        selection=selection,
        strategy=strategy,
        mode=mode,
        emission=emission,
        pretrip_only=values.get("pretrip_only", False),
        expire_epsilon=values.get("expire_epsilon", 1e-4),
        max_age=values.get("max_age"),
        x_serv=sel.get("x_serv", 1.0),
        x_user=sel.get("x_user", 0.5),
        att_window=values.get("att_window", 20),
        conv_window=values.get("conv_window", 50),
        conv_cv=values.get("conv_cv", 0.05),
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), base_dir=path.parent)
