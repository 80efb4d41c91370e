"""Command-line interface.

One JSON document configures a run; subcommands share it.  ``scan``
optimizes a distance grid and writes the fixed-schema CSV, ``point``
evaluates or optimizes a single distance and prints JSON, ``validate``
checks the document and exits, ``lp-dump`` renders one decoy program as
text.  Exit codes: 0 success, 1 computation failure, 2 configuration or
usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Any, Mapping

from .channel import expected_counts
from .core import (
    VARIANT_3INT,
    VARIANT_4INT,
    VARIANTS,
    ChannelParams,
    EpsilonBudget,
    ProtocolConfig,
)
from .engine import (
    KeyRateResult,
    eve_worst_case,
    optimize_keyrate,
    scan_distances,
    trace_distances,
)
from .lp import (
    OBJECTIVES_3INT,
    OBJECTIVES_4INT,
    build_lp_3int,
    build_lp_4int,
    dump_lp,
)
from .tha import CASES, LEAK_MODES, ThaConfig

OUTPUT_DIR_ENV = "MDILEAK_OUTPUT_DIR"

CSV_COLUMNS = (
    "L_km",
    "rate",
    "ell",
    "n00_L",
    "n11_L",
    "e_ph_U",
    "path",
    "gamma_s",
    "gamma_v",
    "gamma_w",
    "p_s",
    "p_v",
    "p_w",
    "p_0",
    "p_Z",
    "p_X",
    "p_Zac",
    "theta_v",
    "theta_w",
    "delta_theta_pm",
    "status",
)

_PARAM_KEYS = (
    "gamma_s",
    "gamma_v",
    "gamma_w",
    "p_s",
    "p_v",
    "p_w",
    "p_0",
    "p_Z",
    "p_X",
    "p_Zac",
)


class ConfigError(ValueError):
    """The run document violates the schema or is semantically invalid."""


def _check_keys(
    obj: Mapping[str, Any], where: str, required: tuple[str, ...],
    optional: tuple[str, ...] = (),
) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"missing key {key!r} in {where}")


def _number(obj: Mapping[str, Any], key: str, where: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}.{key} must be finite")
    return value


def _integer(obj: Mapping[str, Any], key: str, where: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer")
    return value


class RunConfig:
    """Validated run document."""

    def __init__(self, doc: Mapping[str, Any]) -> None:
        _check_keys(
            doc, "config",
            required=("variant", "N", "channel", "tha"),
            optional=(
                "epsilon", "scan", "point", "seed", "restarts", "workers",
                "S_cut", "P_cut", "output",
            ),
        )
        self.variant = doc["variant"]
        if self.variant not in VARIANTS:
            raise ConfigError(f"config.variant must be one of {VARIANTS}")
        self.N = _number(doc, "N", "config")
        if self.N <= 0:
            raise ConfigError("config.N must be positive")

        ch = doc["channel"]
        _check_keys(
            ch, "config.channel",
            required=("e_d", "p_d", "eta_det", "alpha", "f_EC"),
        )
        self.channel = ChannelParams(
            e_d=_number(ch, "e_d", "config.channel"),
            p_d=_number(ch, "p_d", "config.channel"),
            eta_det=_number(ch, "eta_det", "config.channel"),
            alpha=_number(ch, "alpha", "config.channel"),
            f_EC=_number(ch, "f_EC", "config.channel"),
            L=0.0,
        )

        tha = doc["tha"]
        _check_keys(tha, "config.tha", required=("case", "I_max", "mode"))
        self.case = tha["case"]
        if self.case not in CASES:
            raise ConfigError(f"config.tha.case must be one of {CASES}")
        self.I_max = _number(tha, "I_max", "config.tha")
        if self.I_max < 0:
            raise ConfigError("config.tha.I_max must be non-negative")
        self.mode = tha["mode"]
        if self.mode not in LEAK_MODES:
            raise ConfigError(f"config.tha.mode must be one of {LEAK_MODES}")

        eps = doc.get("epsilon", {})
        _check_keys(
            eps, "config.epsilon", required=(),
            optional=("eps_total", "eps_cor"),
        )
        self.budget = EpsilonBudget(
            eps_total=(
                _number(eps, "eps_total", "config.epsilon")
                if "eps_total" in eps else 1e-10
            ),
            eps_cor=(
                _number(eps, "eps_cor", "config.epsilon")
                if "eps_cor" in eps else 1e-15
            ),
        )

        self.scan = None
        if "scan" in doc:
            sc = doc["scan"]
            _check_keys(
                sc, "config.scan", required=("L_min", "L_max", "L_step")
            )
            l_min = _number(sc, "L_min", "config.scan")
            l_max = _number(sc, "L_max", "config.scan")
            l_step = _number(sc, "L_step", "config.scan")
            if l_min < 0 or l_max < l_min or l_step <= 0:
                raise ConfigError("config.scan range is invalid")
            self.scan = (l_min, l_max, l_step)

        self.point_L = None
        self.point_params = None
        if "point" in doc:
            pt = doc["point"]
            _check_keys(
                pt, "config.point", required=("L",), optional=("params",)
            )
            self.point_L = _number(pt, "L", "config.point")
            if self.point_L < 0:
                raise ConfigError("config.point.L must be non-negative")
            if "params" in pt:
                params = pt["params"]
                _check_keys(
                    params, "config.point.params", required=_PARAM_KEYS
                )
                self.point_params = {
                    key: _number(params, key, "config.point.params")
                    for key in _PARAM_KEYS
                }

        self.seed = _integer(doc, "seed", "config") if "seed" in doc else 0
        self.restarts = (
            _integer(doc, "restarts", "config") if "restarts" in doc else 8
        )
        if self.restarts < 0:
            raise ConfigError("config.restarts must be non-negative")
        self.workers = (
            _integer(doc, "workers", "config") if "workers" in doc else None
        )
        if self.workers is not None and self.workers < 1:
            raise ConfigError("config.workers must be at least 1")
        self.s_cut = _integer(doc, "S_cut", "config") if "S_cut" in doc else 10
        self.p_cut = _integer(doc, "P_cut", "config") if "P_cut" in doc else 20
        if self.s_cut < 0 or self.p_cut < 1:
            raise ConfigError("config cutoffs are invalid")
        self.output = doc.get("output", "scan.csv")
        if not isinstance(self.output, str) or not self.output:
            raise ConfigError("config.output must be a non-empty string")

    def distances(self) -> list[float]:
        if self.scan is None:
            raise ConfigError("this command needs a config.scan section")
        l_min, l_max, l_step = self.scan
        values = []
        k = 0
        while True:
            value = l_min + k * l_step
            if value > l_max + 1e-9:
                break
            values.append(value)
            k += 1
        return values

    def protocol_config(self, params: Mapping[str, float]) -> ProtocolConfig:
        return ProtocolConfig(
            variant=self.variant,
            N=self.N,
            gamma_s=params["gamma_s"],
            gamma_v=params["gamma_v"],
            gamma_w=params["gamma_w"],
            p_s=params["p_s"],
            p_v=params["p_v"],
            p_w=params["p_w"],
            p_0=params["p_0"],
            p_Z=params["p_Z"],
            p_X=params["p_X"],
            p_Zac=params["p_Zac"],
            S_cut=self.s_cut,
            P_cut=self.p_cut,
        )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    try:
        return RunConfig(doc)
    except ValueError as exc:
        # ProtocolConfig/ChannelParams/EpsilonBudget validation errors are
        # configuration errors too.
        raise ConfigError(str(exc)) from exc


def _output_path(name: str) -> str:
    override = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        return os.path.join(override, os.path.basename(name))
    return name


def _row(l_km: float, result: KeyRateResult) -> list[str]:
    values: list[Any] = [
        l_km,
        result.rate,
        result.ell,
        result.components["n00_L"],
        result.components["n11_L"],
        result.components["e_ph_U"],
        result.path,
        result.user_params["gamma_s"],
        result.user_params["gamma_v"],
        result.user_params["gamma_w"],
        result.user_params["p_s"],
        result.user_params["p_v"],
        result.user_params["p_w"],
        result.user_params["p_0"],
        result.user_params["p_Z"],
        result.user_params["p_X"],
        result.user_params["p_Zac"],
        result.eve_params["theta_v"],
        result.eve_params["theta_w"],
        result.eve_params["delta_theta_pm"],
        result.status,
    ]
    return [repr(v) if isinstance(v, float) else str(v) for v in values]


def write_csv(path: str, rows: list[tuple[float, KeyRateResult]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for l_km, result in rows:
            writer.writerow(_row(l_km, result))


def cmd_scan(cfg: RunConfig, output: str | None) -> int:
    rows = scan_distances(
        cfg.variant,
        cfg.N,
        cfg.channel,
        cfg.distances(),
        cfg.case,
        cfg.I_max,
        cfg.mode,
        cfg.budget,
        seed=cfg.seed,
        restarts=cfg.restarts,
        s_cut=cfg.s_cut,
        p_cut=cfg.p_cut,
        workers=cfg.workers,
    )
    path = _output_path(output if output is not None else cfg.output)
    write_csv(path, rows)
    for l_km, result in rows:
        print(f"L={l_km:g} rate={result.rate!r} path={result.path}")
    print(f"wrote {path}")
    return 0


def _result_json(l_km: float, result: KeyRateResult) -> str:
    doc = {
        "L_km": l_km,
        "rate": result.rate,
        "ell": result.ell,
        "path": result.path,
        "status": result.status,
        "components": dict(result.components),
        "user_params": dict(result.user_params),
        "eve_params": dict(result.eve_params),
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def cmd_point(cfg: RunConfig) -> int:
    if cfg.point_L is None:
        raise ConfigError("the point command needs a config.point section")
    import dataclasses

    channel = dataclasses.replace(cfg.channel, L=cfg.point_L)
    if cfg.point_params is not None:
        config = cfg.protocol_config(cfg.point_params)
        result = eve_worst_case(
            config, channel, cfg.case, cfg.I_max, cfg.mode, cfg.budget
        )
    else:
        result, _ = optimize_keyrate(
            cfg.variant, cfg.N, channel, cfg.case, cfg.I_max, cfg.mode,
            cfg.budget, seed=cfg.seed, restarts=cfg.restarts,
            s_cut=cfg.s_cut, p_cut=cfg.p_cut,
        )
    print(_result_json(cfg.point_L, result))
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    print("ok")
    return 0


def cmd_lp_dump(cfg: RunConfig, objective: str | None) -> int:
    if cfg.point_L is None or cfg.point_params is None:
        raise ConfigError(
            "lp-dump needs config.point with an explicit params block"
        )
    import dataclasses
    import math as _math

    config = cfg.protocol_config(cfg.point_params)
    channel = dataclasses.replace(cfg.channel, L=cfg.point_L)
    tha = ThaConfig.for_config(
        cfg.case, cfg.I_max, config,
        theta_v=_math.pi, theta_w=_math.pi, theta_Z=_math.pi,
    )
    observed = expected_counts(config, channel)
    dists = trace_distances(config, tha, cfg.mode)
    if cfg.variant == VARIANT_3INT:
        names = OBJECTIVES_3INT
        builder = build_lp_3int
    else:
        names = OBJECTIVES_4INT
        builder = build_lp_4int
    if objective is None:
        objective = names[0]
    if objective not in names:
        raise ConfigError(f"objective must be one of {names}")
    instance = builder(observed, dists, config, cfg.budget, objective)
    sys.stdout.write(dump_lp(instance))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mdileak",
        description="Finite-key rates for decoy-state MDI-QKD with leaky sources",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_scan = sub.add_parser("scan", help="optimize a distance grid, write CSV")
    p_scan.add_argument("config")
    p_scan.add_argument("--output", default=None)

    p_point = sub.add_parser("point", help="evaluate one distance, print JSON")
    p_point.add_argument("config")

    p_val = sub.add_parser("validate", help="check the run document")
    p_val.add_argument("config")

    p_dump = sub.add_parser("lp-dump", help="render one decoy program as text")
    p_dump.add_argument("config")
    p_dump.add_argument("--objective", default=None)

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "scan":
            return cmd_scan(cfg, args.output)
        if args.command == "point":
            return cmd_point(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "lp-dump":
            return cmd_lp_dump(cfg, args.objective)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # computation failures map to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
