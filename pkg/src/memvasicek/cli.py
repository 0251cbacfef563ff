"""Command-line front end: yield-data ingestion, pricing runs, and
plot-ready CSV/JSON outputs.

Configuration comes from an optional JSON file plus command-line flags;
flags win.  All rates are decimals internally; ``--percent`` converts at
the ingestion boundary only.  Exit codes: 0 success, 2 input error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from typing import Sequence

import numpy as np

from .calibration import QuoteSet, calibrate
from .model import (ModelParams, ModelState, affine_coefficients, affine_price,
                    bond_price, yield_at)
from .numerics import NumericalError
from .options import OptionSpec, call_price, put_price, sigma_sq
from .pde import PdeGrid, default_grid, solve, surface_to_csv, value_at
from .simulation import SimConfig, mc_bond_price, paths_to_csv, simulate

__all__ = ["parse_quotes", "run", "main"]

_PARAM_KEYS = ("a", "b", "sigma", "p", "q", "r0")


def parse_quotes(path: str, percent: bool = False) -> QuoteSet:
    """Read a quotes CSV with header ``maturity_years,yield``.

    Rows are sorted by maturity; duplicate maturities, malformed rows and
    empty files are rejected with the offending line number.
    """
    with open(path, newline="", encoding="utf-8-sig") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty quotes file") from None
        if [c.strip() for c in header] != ["maturity_years", "yield"]:
            raise ValueError(
                f"{path}:1: expected header 'maturity_years,yield', "
                f"got {','.join(header)!r}")
        pairs: list[tuple[float, float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                maturity = float(row[0])
                rate = float(row[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from None
            pairs.append((maturity, rate / 100.0 if percent else rate))
    if not pairs:
        raise ValueError(f"{path}: no quotes found")
    seen = set()
    for maturity, _ in pairs:
        if maturity in seen:
            raise ValueError(f"{path}: duplicate maturity {maturity}")
        seen.add(maturity)
    return QuoteSet.from_pairs(pairs)


def _require(config: dict, key: str):
    if key not in config or config[key] is None:
        raise ValueError(f"missing required option '{key}'")
    return config[key]


def _params_from(config: dict) -> ModelParams:
    return ModelParams(**{k: float(_require(config, k)) for k in _PARAM_KEYS})


def _open_out(path: str | None):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _write_rows(path: str | None, header: list[str], rows) -> None:
    stream, owned = _open_out(path)
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if owned:
            stream.close()


def _cmd_bond(config: dict) -> int:
    params = _params_from(config)
    T = float(_require(config, "maturity"))
    state0 = ModelState(t=0.0, r=params.r0, u=0.0)
    price = bond_price(state0, T, params)
    print(f"P(0,{T!r}) = {price!r}")
    print(f"Y(0,{T!r}) = {yield_at(state0, T, params)!r}")
    return 0


def _cmd_option(config: dict) -> int:
    params = _params_from(config)
    spec = OptionSpec(S=float(_require(config, "expiry")),
                      T=float(_require(config, "bond_maturity")),
                      K=float(_require(config, "strike")), kind="call")
    total_var = sigma_sq(spec, params)
    call = call_price(spec, params)
    put = put_price(dataclasses.replace(spec, kind="put"), params)
    print(f"call = {call!r}")
    print(f"put = {put!r}")
    print(f"sigma_sq = {total_var!r}")
    if total_var > 0.0:
        state0 = ModelState(t=0.0, r=params.r0, u=0.0)
        ratio = bond_price(state0, spec.T, params) / (
            spec.K * bond_price(state0, spec.S, params))
        d_plus = (np.log(ratio) + 0.5 * total_var) / np.sqrt(total_var)
        print(f"d_plus = {float(d_plus)!r}")
        print(f"d_minus = {float(d_plus - np.sqrt(total_var))!r}")
    return 0


def _cmd_curve(config: dict) -> int:
    params = _params_from(config)
    state0 = ModelState(t=0.0, r=params.r0, u=0.0)
    quotes = None
    if config.get("quotes"):
        quotes = parse_quotes(config["quotes"], percent=bool(config.get("percent")))
        maturities = [q.maturity for q in quotes]
    else:
        t_min = float(config.get("t_min", 1.0 / 12.0))
        t_max = float(config.get("t_max", 20.0))
        n_points = int(config.get("points", 60))
        maturities = list(np.linspace(t_min, t_max, n_points))

    header = ["T", "Y_model"]
    columns = [[yield_at(state0, T, params) for T in maturities]]
    if config.get("with_vasicek_fit"):
        if quotes is None:
            raise ValueError("--with-vasicek-fit requires --quotes")
        fit = calibrate(quotes, n_restarts=int(config.get("restarts", 20)),
                        seed=int(config.get("seed", 0)), restrict_p_zero=True)
        fit_state = ModelState(t=0.0, r=fit.params.r0, u=0.0)
        header.append("Y_vasicek_fit")
        columns.append([yield_at(fit_state, T, fit.params) for T in maturities])
    if quotes is not None:
        header.append("y_market")
        columns.append(list(quotes.rates))
    rows = [[repr(float(T))] + [repr(float(col[i])) for col in columns]
            for i, T in enumerate(maturities)]
    _write_rows(config.get("out"), header, rows)
    return 0


def _cmd_simulate(config: dict) -> int:
    params = _params_from(config)
    cfg = SimConfig(horizon=float(_require(config, "horizon")),
                    n_steps=int(config.get("steps", 256)),
                    n_paths=int(config.get("paths", 10000)),
                    seed=int(config.get("seed", 42)),
                    scheme=str(config.get("scheme", "euler")))
    estimate = mc_bond_price(params, cfg.horizon, cfg)
    state0 = ModelState(t=0.0, r=params.r0, u=0.0)
    exact = bond_price(state0, cfg.horizon, params)
    print(f"mc_bond_price = {estimate.estimate!r}")
    print(f"std_error = {estimate.std_error!r}")
    print(f"closed_form = {exact!r}")
    if config.get("paths_out"):
        paths = simulate(params, cfg)
        with open(config["paths_out"], "w", encoding="utf-8") as handle:
            paths_to_csv(paths, handle)
    return 0


def _cmd_pde_price(config: dict) -> int:
    params = _params_from(config)
    payoff = str(config.get("payoff", "bond"))
    S = float(_require(config, "expiry"))
    r0_min = float(config.get("r0_min", 0.0))
    r0_max = float(config.get("r0_max", 0.1))
    r0_step = float(config.get("r0_step", 0.01))
    if r0_step <= 0.0 or r0_max < r0_min:
        raise ValueError("need r0_step > 0 and r0_max >= r0_min")
    sweep = list(np.arange(r0_min, r0_max + 0.5 * r0_step, r0_step))

    base = default_grid(params, S,
                        width_sd=float(config.get("width_sd", 6.0)),
                        nx=int(config.get("nx", 201)),
                        ny=int(config.get("ny", 201)),
                        n_time=int(config.get("n_time", 400)))
    lo = min(float(base.x_nodes[0]), r0_min)
    hi = max(float(base.x_nodes[-1]), r0_max)
    grid = PdeGrid(x_nodes=np.linspace(lo, hi, base.x_nodes.size),
                   y_nodes=base.y_nodes, n_time=base.n_time, S=S)

    if payoff == "bond":
        terminal = lambda x, y: np.ones(np.broadcast(x, y).shape)

        def exact(r0: float) -> float:
            return bond_price(ModelState(t=0.0, r=r0, u=0.0), S,
                              dataclasses.replace(params, r0=r0))
    elif payoff == "call":
        T = float(_require(config, "bond_maturity"))
        K = float(_require(config, "strike"))
        coeffs = affine_coefficients(S, T, params)
        terminal = lambda x, y: np.maximum(affine_price(coeffs, x, y) - K, 0.0)

        def exact(r0: float) -> float:
            return call_price(OptionSpec(S=S, T=T, K=K, kind="call"),
                              dataclasses.replace(params, r0=r0))
    else:
        raise ValueError(f"unknown payoff {payoff!r} (expected 'bond' or 'call')")

    solution = solve(params, S, terminal, grid)
    rows = [[repr(float(r0)), repr(value_at(solution, float(r0), 0.0)),
             repr(exact(float(r0)))] for r0 in sweep]
    _write_rows(config.get("out"), ["r0", "pde_value", "exact_value"], rows)
    return 0


def _cmd_calibrate(config: dict) -> int:
    quotes = parse_quotes(_require(config, "quotes"),
                          percent=bool(config.get("percent")))
    result = calibrate(quotes,
                       n_restarts=int(config.get("restarts", 20)),
                       seed=int(config.get("seed", 0)),
                       restrict_p_zero=bool(config.get("vasicek_only")))
    payload = {
        "a": result.params.a,
        "b": result.params.b,
        "sigma": result.params.sigma,
        "p": result.params.p,
        "q": result.params.q,
        "r0": result.params.r0,
        "sse": result.sse,
        "converged": result.converged,
        "residuals": [float(r) for r in result.residuals],
    }
    text = json.dumps(payload, indent=2)
    if config.get("out") in (None, "-"):
        print(text)
    else:
        with open(config["out"], "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    return 0


_COMMANDS = {
    "curve": _cmd_curve,
    "bond": _cmd_bond,
    "option": _cmd_option,
    "simulate": _cmd_simulate,
    "pde-price": _cmd_pde_price,
    "calibrate": _cmd_calibrate,
}


def run(command: str, config: dict) -> int:
    """Execute one CLI command against a fully merged configuration dict."""
    if command not in _COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    return _COMMANDS[command](config)


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    for key in _PARAM_KEYS:
        parser.add_argument(f"--{key}", type=float, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memvasicek",
        description="Memory-extended Vasicek short rate model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None,
                       help="JSON file with defaults; flags override it")
        p.add_argument("--dump-config", default=None,
                       help="write the merged effective config to this path")

    p = sub.add_parser("bond", help="print P(0,T) and Y(0,T)")
    common(p)
    _add_param_flags(p)
    p.add_argument("--maturity", type=float, default=None)

    p = sub.add_parser("option", help="print bond option prices")
    common(p)
    _add_param_flags(p)
    p.add_argument("--expiry", type=float, default=None)
    p.add_argument("--bond-maturity", type=float, default=None)
    p.add_argument("--strike", type=float, default=None)

    p = sub.add_parser("curve", help="write the model yield curve as CSV")
    common(p)
    _add_param_flags(p)
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--quotes", default=None)
    p.add_argument("--percent", action="store_true", default=None)
    p.add_argument("--with-vasicek-fit", action="store_true", default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="Monte Carlo bond price and path dump")
    common(p)
    _add_param_flags(p)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scheme", choices=["euler", "exact_gaussian"], default=None)
    p.add_argument("--paths-out", default=None)

    p = sub.add_parser("pde-price", help="PDE vs closed form over an r0 sweep")
    common(p)
    _add_param_flags(p)
    p.add_argument("--payoff", choices=["bond", "call"], default=None)
    p.add_argument("--expiry", type=float, default=None)
    p.add_argument("--bond-maturity", type=float, default=None)
    p.add_argument("--strike", type=float, default=None)
    p.add_argument("--r0-min", type=float, default=None)
    p.add_argument("--r0-max", type=float, default=None)
    p.add_argument("--r0-step", type=float, default=None)
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--n-time", type=int, default=None)
    p.add_argument("--width-sd", type=float, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("calibrate", help="least-squares yield curve fit")
    common(p)
    p.add_argument("--quotes", default=None)
    p.add_argument("--percent", action="store_true", default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--vasicek-only", action="store_true", default=None)
    p.add_argument("--out", default=None)

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    merged: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            loaded = json.load(handle)
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        merged.update(loaded)
    skip = {"command", "config", "dump_config"}
    for key, value in vars(args).items():
        if key not in skip and value is not None:
            merged[key] = value
    return merged


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _merge_config(args)
        if args.dump_config:
            with open(args.dump_config, "w", encoding="utf-8") as handle:
                json.dump(config, handle, indent=2, sort_keys=True)
                handle.write("\n")
        return run(args.command, config)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
