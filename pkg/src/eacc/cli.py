"""Scenario files, run orchestration and trace/summary output.

Scenario files are TOML with the sections below. Every key is optional
except ``topology.n``. Per-device keys take a scalar (applied to all devices)
or a list of length ``n``; per-link keys take a scalar or an ``n x n`` list of
lists indexed ``[from][to]``.

``[topology]``
    ``n`` devices, ``receivers`` (list of device indices; default all).
``[mode]``
    ``network`` (``"cellular_d2d"`` or ``"wifi_d2d"``), ``policy``
    (``"eacc"``, ``"no-coop"``, ``"coop"``), ``enumeration_limit``.
``[constants]``
    ``M``, ``r_max``, ``d_max`` and ``e_max`` (packets/slot), ``utility``
    (``"log"`` or ``"power"``), ``epsilon``, ``exponent``.
``[channel]``
    ``source_p``, ``d2d_p`` (ON probabilities), ``source_rate``,
    ``d2d_rate`` (packets/slot while ON).
``[battery]``
    ``initial_level``, ``threshold`` (fractions), ``credit_rate``
    (credits/slot), ``drain_per_processed``, ``drain_per_transmitted``
    (fraction of a full battery per packet), ``joules_per_processed``,
    ``joules_per_transmitted``.
``[workload]``
    ``alpha`` (per-link rate shaper), ``work_factor`` (per device, >= 1),
    ``arrivals`` (fixed packets/slot per device; replaces flow control).
``[run]``
    ``slots``, ``seed``, ``report_period`` (slots), ``warmup`` (slots).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import tomli
import tomli_w

from .channel import ChannelConfig, NetworkMode
from .control import ControllerConstants, UtilitySpec
from .energy import BatteryModel
from .engine import (
    Policy,
    ScenarioConfig,
    SummaryAccumulator,
    Summary,
    TraceRecord,
    initial_state,
    step,
)
from .model import ConfigError

_SCHEMA = {
    "topology": {"n", "receivers"},
    "mode": {"network", "policy", "enumeration_limit"},
    "constants": {"M", "r_max", "d_max", "e_max", "utility", "epsilon", "exponent"},
    "channel": {"source_p", "source_rate", "d2d_p", "d2d_rate"},
    "battery": {
        "initial_level",
        "threshold",
        "credit_rate",
        "drain_per_processed",
        "drain_per_transmitted",
        "joules_per_processed",
        "joules_per_transmitted",
    },
    "workload": {"alpha", "work_factor", "arrivals"},
    "run": {"slots", "seed", "report_period", "warmup"},
}

_BATTERY_FIELDS = {
    "initial_level": "initial_level",
    "threshold": "threshold",
    "credit_rate": "credit_rate_above",
    "drain_per_processed": "drain_per_processed",
    "drain_per_transmitted": "drain_per_transmitted",
    "joules_per_processed": "joules_per_processed",
    "joules_per_transmitted": "joules_per_transmitted",
}


class ScenarioParseError(ConfigError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        super().__init__(f"line {lineno}: {message}" if lineno else message)
        self.lineno = lineno


def _number(v, key: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    return float(v)


def _integer(v, key: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return v


def _per_device(v, n: int, key: str) -> np.ndarray:
    if isinstance(v, list):
        if len(v) != n:
            raise ConfigError(f"{key}: expected {n} values, got {len(v)}")
        return np.array([_number(a, key) for a in v])
    return np.full(n, _number(v, key))


def _per_link(v, n: int, key: str) -> np.ndarray:
    if isinstance(v, list):
        if len(v) != n or any(not isinstance(r, list) or len(r) != n for r in v):
            raise ConfigError(f"{key}: expected an {n} x {n} list of lists")
        return np.array([[_number(a, key) for a in r] for r in v])
    return np.full((n, n), _number(v, key))


def _flat(a) -> tuple[float, ...]:
    return tuple(float(v) for v in a)


def _nested(a) -> tuple[tuple[float, ...], ...]:
    return tuple(_flat(r) for r in a)


def _enum(cls, v, key: str):
    try:
        return cls(v)
    except ValueError:
        allowed = ", ".join(repr(m.value) for m in cls)
        raise ConfigError(f"{key}: expected one of {allowed}, got {v!r}") from None


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build and validate a config from a parsed scenario document."""
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"{section}: unknown section")
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")

    top = doc.get("topology", {})
    if "n" not in top:
        raise ConfigError("topology.n: required key missing")
    n = _integer(top["n"], "topology.n")
    if n < 1:
        raise ConfigError("topology.n: must be >= 1")
    receivers = top.get("receivers", list(range(n)))
    if not isinstance(receivers, list):
        raise ConfigError("topology.receivers: expected a list of device indices")
    receivers = tuple(_integer(r, "topology.receivers") for r in receivers)

    mode = doc.get("mode", {})
    network = _enum(NetworkMode, mode.get("network", "cellular_d2d"), "mode.network")
    policy = _enum(Policy, mode.get("policy", "eacc"), "mode.policy")
    limit = _integer(mode.get("enumeration_limit", 4), "mode.enumeration_limit")

    c = doc.get("constants", {})
    kind = c.get("utility", "log")
    if kind not in ("log", "power"):
        raise ConfigError(f"constants.utility: expected 'log' or 'power', got {kind!r}")
    utility = UtilitySpec(
        kind=kind,
        epsilon=_number(c.get("epsilon", 1e-6), "constants.epsilon"),
        exponent=_number(c.get("exponent", 0.5), "constants.exponent"),
    )
    constants = ControllerConstants(
        m=_number(c.get("M", 500.0), "constants.M"),
        r_max=_flat(_per_device(c.get("r_max", 100.0), n, "constants.r_max")),
        d_max=_flat(_per_device(c.get("d_max", 100.0), n, "constants.d_max")),
        e_max=_nested(_per_link(c.get("e_max", 100.0), n, "constants.e_max")),
        utility=utility,
    )

    ch = doc.get("channel", {})
    d2d_p = _per_link(ch.get("d2d_p", 1.0), n, "channel.d2d_p")
    d2d_rate = _per_link(ch.get("d2d_rate", 100.0), n, "channel.d2d_rate")
    np.fill_diagonal(d2d_p, 0.0)
    np.fill_diagonal(d2d_rate, 0.0)
    channel = ChannelConfig(
        source_p=_flat(_per_device(ch.get("source_p", 1.0), n, "channel.source_p")),
        source_rate=_flat(_per_device(ch.get("source_rate", 100.0), n, "channel.source_rate")),
        d2d_p=_nested(d2d_p),
        d2d_rate=_nested(d2d_rate),
    )

    b = doc.get("battery", {})
    defaults = BatteryModel()
    columns = {
        field: _per_device(b.get(key, getattr(defaults, field)), n, f"battery.{key}")
        for key, field in _BATTERY_FIELDS.items()
    }
    battery = tuple(
        BatteryModel(**{field: float(col[i]) for field, col in columns.items()}) for i in range(n)
    )

    w = doc.get("workload", {})
    arrivals = w.get("arrivals")
    r = doc.get("run", {})
    cfg = ScenarioConfig(
        n_devices=n,
        constants=constants,
        channel=channel,
        battery=battery,
        alpha=_nested(_per_link(w.get("alpha", 1.0), n, "workload.alpha")),
        work_factor=_flat(_per_device(w.get("work_factor", 1.0), n, "workload.work_factor")),
        receivers=receivers,
        mode=network,
        arrivals=None if arrivals is None else _flat(_per_device(arrivals, n, "workload.arrivals")),
        report_period=_integer(r.get("report_period", 5), "run.report_period"),
        slots=_integer(r.get("slots", 1000), "run.slots"),
        seed=_integer(r.get("seed", 0), "run.seed"),
        policy=policy,
        enumeration_limit=limit,
        warmup=_integer(r.get("warmup", 0), "run.warmup"),
    )
    cfg.validate()
    return cfg


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document.

    Raises ``ScenarioParseError`` (with ``lineno``) on malformed TOML and
    ``ConfigError`` naming the key on invalid values.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioParseError(str(exc), getattr(exc, "lineno", None)) from None
    return config_from_dict(doc)


def serialize_scenario(config: ScenarioConfig) -> str:
    """Full-form scenario text; ``parse_scenario`` restores an equal config."""
    bats = config.battery
    doc = {
        "topology": {"n": config.n_devices, "receivers": list(config.receivers)},
        "mode": {
            "network": config.mode.value,
            "policy": config.policy.value,
            "enumeration_limit": config.enumeration_limit,
        },
        "constants": {
            "M": config.constants.m,
            "r_max": list(config.constants.r_max),
            "d_max": list(config.constants.d_max),
            "e_max": [list(r) for r in config.constants.e_max],
            "utility": config.constants.utility.kind,
            "epsilon": config.constants.utility.epsilon,
            "exponent": config.constants.utility.exponent,
        },
        "channel": {
            "source_p": list(config.channel.source_p),
            "source_rate": list(config.channel.source_rate),
            "d2d_p": [list(r) for r in config.channel.d2d_p],
            "d2d_rate": [list(r) for r in config.channel.d2d_rate],
        },
        "battery": {
            key: [getattr(b, field) for b in bats] for key, field in _BATTERY_FIELDS.items()
        },
        "workload": {
            "alpha": [list(r) for r in config.alpha],
            "work_factor": list(config.work_factor),
        },
        "run": {
            "slots": config.slots,
            "seed": config.seed,
            "report_period": config.report_period,
            "warmup": config.warmup,
        },
    }
    if config.arrivals is not None:
        doc["workload"]["arrivals"] = list(config.arrivals)
    return tomli_w.dumps(doc)


def load_scenario(path) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text())


def _fmt(v) -> str:
    return repr(float(v))


def trace_header(n: int) -> str:
    cols = ["slot"]
    cols += [f"delivered_{i}" for i in range(n)]
    cols += [f"y_{i}" for i in range(n)]
    cols += ["backlog_total"]
    cols += [f"battery_{i}" for i in range(n)]
    cols += [f"joules_{i}" for i in range(n)]
    return ",".join(cols)


def trace_line(rec: TraceRecord) -> str:
    parts = [str(rec.slot)]
    parts += [_fmt(v) for v in rec.delivered]
    parts += [_fmt(v) for v in rec.decision.y]
    parts.append(_fmt(rec.backlog_total))
    parts += [_fmt(v) for v in rec.batteries]
    parts += [_fmt(v) for v in rec.joules]
    return ",".join(parts)


def summary_lines(summary: Summary, config: ScenarioConfig) -> list[str]:
    n = config.n_devices
    out = [
        f"policy={config.policy.value}",
        f"seed={config.seed}",
        f"slots={summary.slots}",
        f"warmup={summary.warmup}",
    ]
    out += [f"mean_delivered_{i}={_fmt(summary.mean_delivered_rate[i])}" for i in range(n)]
    out += [f"mean_admitted_{i}={_fmt(summary.mean_admitted_rate[i])}" for i in range(n)]
    out += [f"delivered_bps_{i}={_fmt(v)}" for i, v in enumerate(summary.delivered_bps())]
    out.append(f"sum_utility={_fmt(summary.sum_utility)}")
    out.append(f"mean_backlog={_fmt(summary.mean_backlog)}")
    out += [f"cumulative_joules_{i}={_fmt(summary.cumulative_joules[i])}" for i in range(n)]
    return out


def _open_out(path: Path, name: str):
    try:
        path.mkdir(parents=True, exist_ok=True)
        return open(path / name, "w", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path / name}: {exc.strerror or exc}") from exc


def emit_trace(trace: Iterable[TraceRecord], summary: Summary, path, config: ScenarioConfig):
    """Write ``trace.csv`` and ``summary.txt`` into directory ``path``."""
    path = Path(path)
    with _open_out(path, "trace.csv") as f:
        f.write(trace_header(config.n_devices) + "\n")
        for rec in trace:
            f.write(trace_line(rec) + "\n")
    with _open_out(path, "summary.txt") as f:
        f.write("\n".join(summary_lines(summary, config)) + "\n")
    return path / "trace.csv", path / "summary.txt"


def _run(config: ScenarioConfig, out: Optional[Path], verify: bool):
    """Run the scenario, streaming the trace to ``out`` when given.

    With ``verify`` every slot whose reports are fresh is checked against the
    brute-force oracle. Returns the summary and ``(checked, failed)``.
    """
    from . import oracle

    acc = SummaryAccumulator(config)
    state = initial_state(config)
    checked = failed = 0
    f = None
    if out is not None:
        f = _open_out(out, "trace.csv")
        f.write(trace_header(config.n_devices) + "\n")
    try:
        for _ in range(config.slots):
            before = state
            state, rec = step(state, config)
            acc.add(rec)
            if f is not None:
                f.write(trace_line(rec) + "\n")
            if verify and rec.slot % config.report_period == 0 and rec.activations is not None:
                pre = replace(before, credits=rec.credits, reported_u=before.u)
                ok = oracle.verify_maxweight(
                    pre,
                    rec.decision,
                    rec.activations,
                    config.constants,
                    1.0,
                    d_max=config.d_max_effective,
                    receivers=config.receivers,
                )
                checked += 1
                failed += not ok
    finally:
        if f is not None:
            f.close()
    summary = acc.result()
    if out is not None:
        with _open_out(out, "summary.txt") as g:
            g.write("\n".join(summary_lines(summary, config)) + "\n")
    return summary, (checked, failed)


def _vec_str(v) -> str:
    return "[" + ", ".join(f"{a:.4f}" for a in v) + "]"


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eacc", description="Run an EaCC scenario.")
    p.add_argument("--scenario", required=True, help="scenario TOML file")
    p.add_argument("--policy", choices=[m.value for m in Policy], help="override mode.policy")
    p.add_argument("--slots", type=int, help="override run.slots")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--out", help="directory for trace.csv and summary.txt")
    p.add_argument("--oracle", action="store_true", help="also solve the utility optimum and print the gap")
    p.add_argument("--resolution", type=float, default=0.01, help="oracle grid step (default 0.01)")
    p.add_argument("--verify", action="store_true", help="check decisions against brute force (n <= 2)")
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = load_scenario(args.scenario)
        over = {}
        if args.policy is not None:
            over["policy"] = Policy(args.policy)
        if args.slots is not None:
            over["slots"] = args.slots
        if args.seed is not None:
            over["seed"] = args.seed
        if over:
            config = replace(config, **over)
            config.validate()
        if args.verify and config.n_devices > 2:
            raise ConfigError("--verify: brute-force checks need n <= 2")
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        out = Path(args.out) if args.out else None
        summary, (checked, failed) = _run(config, out, args.verify)
        print(
            f"policy={config.policy.value} slots={summary.slots} "
            f"delivered={_vec_str(summary.mean_delivered_rate)} "
            f"admitted={_vec_str(summary.mean_admitted_rate)} "
            f"utility={summary.sum_utility:.6g} backlog={summary.mean_backlog:.6g}"
        )
        if args.oracle:
            from . import oracle

            model = oracle.AverageModel.from_config(config)
            y_star, value = oracle.solve_num(model, config.constants.utility, args.resolution)
            gap = oracle.utility_gap(summary, value)
            print(
                f"oracle y_bar={_vec_str(summary.mean_admitted_rate)} "
                f"y_star={_vec_str(y_star)} gap={gap:.6g}"
            )
        if args.verify:
            print(f"verify checked={checked} failed={failed}")
            if failed:
                return 1
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
