"""Command-line front end.

Every run writes a CSV and a ``<name>.manifest.json`` beside it. Exit
status: 0 on success, 1 for configuration errors (bad flags, unreadable or
malformed files), 2 when a numerical precondition fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from . import __version__
from .channel import (ChannelError, load_channel, make_adder_mac, make_binary_erasure_mac,
                      validate)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(Exception):
    pass


class NumericError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# -- argument helpers -----------------------------------------------------------

def _floats(text) -> list:
    try:
        if isinstance(text, (list, tuple)):
            return [float(t) for t in text]
        if isinstance(text, (int, float)):
            return [float(text)]
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}")


def _ints(text: str) -> list:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}")


def _grid(text: str) -> np.ndarray:
    """'start:stop:step' (stop included) or a comma list."""
    if ":" not in text:
        return np.array(_floats(text))
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise ConfigError(f"grid must look like start:stop:step, got {text!r}")
    if step <= 0 or stop < start:
        raise ConfigError(f"empty grid {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def _channel(spec: str):
    name = str(spec).lower()
    if name == "bemac":
        return make_binary_erasure_mac()
    if name.startswith("adder"):
        k = int(name[5:] or 2)
        return make_adder_mac(k)
    try:
        return load_channel(spec)
    except FileNotFoundError:
        raise ConfigError(f"channel file not found: {spec}")
    except OSError as exc:
        raise ConfigError(f"cannot read channel file {spec}: {exc}")
    except ChannelError as exc:
        raise ConfigError(f"invalid channel file {spec}: {exc}")


def _per_user(values, k: int, name: str) -> tuple:
    if len(values) == 1:
        values = values * k
    if len(values) != k:
        raise ConfigError(f"{name} needs 1 or {k} values, got {len(values)}")
    return tuple(values)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _write_csv(rows, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    Path(path).write_text(buf.getvalue())


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")


# -- subcommands ------------------------------------------------------------------

def max_forwarding_split(c_in, c_out) -> tuple:
    """Largest total forwarded rate c0 with c0_j <= C_in^j and sum_{i != j} c0_i <= C_out^j."""
    k = len(c_in)
    a = np.ones((k, k)) - np.eye(k)
    res = linprog(-np.ones(k), A_ub=a, b_ub=np.asarray(c_out), bounds=[(0, c) for c in c_in], method="highs")
    return tuple(float(max(v, 0.0)) for v in res.x)


def cmd_region(args, cfg) -> tuple:
    from .region import (CfConfig, forwarding_envelope, max_weighted_sum, outer_bound,
                         outer_envelope, forwarding_bound)

    mac = _channel(cfg.get("channel", args.channel))
    k = mac.k
    c_in = _per_user(_floats(cfg.get("c_in", args.c_in)), k, "c_in")
    c_out = _per_user(_floats(cfg.get("c_out", args.c_out)), k, "c_out")
    weights = _per_user(_floats(cfg.get("weights", args.weights)), k, "weights")
    seed = int(cfg.get("seed", args.seed))
    conf = CfConfig(c_in, c_out)
    c0 = max_forwarding_split(c_in, c_out)
    zero = CfConfig((0.0,) * k, (0.0,) * k)
    rows = [("bound", "weighted_sum") + tuple(f"R{j + 1}" for j in range(k))]
    for name, fn in (("no_cooperation", lambda: outer_envelope(mac, zero, weights, seed=seed)),
                     ("forwarding", lambda: forwarding_envelope(mac, c0, weights, seed=seed)),
                     ("outer", lambda: outer_envelope(mac, conf, weights, seed=seed))):
        env = fn()
        if not np.isfinite(env.value):
            raise NumericError(f"{name}: no feasible distribution found")
        region = outer_bound(mac, zero if name == "no_cooperation" else conf, env.pmf) \
            if name != "forwarding" else forwarding_bound(env.pmf, c0, mac)
        best = max_weighted_sum(region, weights)
        rows.append((name, env.value) + tuple(float(r) for r in best.rates))
    return rows, seed


def cmd_gain(args, cfg) -> tuple:
    from .gain import GainError, gain_curve, make_family

    mac = _channel(cfg.get("channel", args.channel))
    c_in = _per_user(_floats(cfg.get("c_in", args.c_in)), mac.k, "c_in")
    hs = _floats(cfg.get("h", args.h))
    if not hs or min(hs) <= 0:
        raise ConfigError("h values must be positive")
    v = cfg.get("v", args.v)
    v = None if v is None else _per_user(_floats(v), mac.k, "v")
    seed = int(cfg.get("seed", args.seed))
    try:
        fam = make_family(mac, c_in, float(cfg.get("epsilon", args.epsilon)), v=v, seed=seed)
        pts = gain_curve(fam, mac, hs)
    except GainError as exc:
        raise NumericError(str(exc))
    rows = [("h", "lambda_star", "r_sum", "g", "slope_ratio", "phi_sum")]
    rows += [(p.h, p.lambda_star, p.r_sum, p.g, p.slope_ratio, p.phi_sum) for p in pts]
    return rows, seed


def cmd_gaussian2(args, cfg) -> tuple:
    from .gaussian2 import Gaussian2Error, figure2_data

    grid = _grid(str(cfg.get("grid", args.grid)))
    try:
        data = figure2_data(grid, float(cfg.get("gamma1", args.gamma1)), float(cfg.get("gamma2", args.gamma2)),
                            grid=int(cfg.get("opt_grid", args.opt_grid)))
    except Gaussian2Error as exc:
        raise NumericError(str(exc))
    rows = [("c_out", "full_gain", "forwarding_gain", "sqrt_term")]
    rows += [tuple(float(v) for v in r) for r in data]
    return rows, int(cfg.get("seed", args.seed))


def _target(cfg, args):
    from .covering import doubly_symmetric_target

    dist = cfg.get("distribution")
    if dist is None:
        return doubly_symmetric_target(float(cfg.get("crossover", args.crossover)))
    try:
        p = np.asarray(dist, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError("distribution must be a nested numeric array over (U0, U_1..U_k, U_{k+1})")
    if p.ndim < 3 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ConfigError("distribution must be a pmf with axes (U0, U_1..U_k, U_{k+1})")
    return p


def cmd_covering(args, cfg) -> tuple:
    from .covering import (BudgetError, TypicalityCheck, covering_phase_curve, default_delta,
                           phase_rows)

    p = _target(cfg, args)
    k = p.ndim - 2
    n = int(cfg.get("n", args.n))
    delta = cfg.get("delta", args.delta)
    delta = default_delta(n) if delta is None else float(delta)
    rates = cfg.get("rates", args.rates)
    if isinstance(rates, str):
        grid = [_per_user(_floats(r), k, "rates") for r in rates.split(";") if r.strip()]
    else:
        grid = [_per_user([float(x) for x in (r if isinstance(r, list) else [r])], k, "rates") for r in rates]
    seed = int(cfg.get("seed", args.seed))
    try:
        pts = covering_phase_curve(p, TypicalityCheck(p, delta, n), grid, int(cfg.get("trials", args.trials)), seed)
    except BudgetError as exc:
        raise NumericError(str(exc))
    return phase_rows(pts), seed


def cmd_codec(args, cfg) -> tuple:
    from .codec import CodecError, error_rows, estimate_error, product_code_spec
    from .covering import BudgetError

    mac = _channel(cfg.get("channel", args.channel))
    rates = _per_user(_floats(cfg.get("rates", args.rates)), mac.k, "rates")
    ns = cfg.get("n", args.n)
    ns = [int(x) for x in ns] if isinstance(ns, list) else _ints(str(ns))
    seed = int(cfg.get("seed", args.seed))
    trials = int(cfg.get("trials", args.trials))
    marg = [np.full(s, 1.0 / s) for s in mac.input_sizes]
    ests = []
    try:
        for n in ns:
            ests.append(estimate_error(product_code_spec(mac, marg, rates, n, seed), trials))
    except BudgetError as exc:
        raise NumericError(str(exc))
    except CodecError as exc:
        raise ConfigError(str(exc))
    return error_rows(ests), seed


def cmd_validate(args, cfg) -> tuple:
    mac = _channel(args.channel_file)
    bad = validate(mac)
    if bad is not None:
        raise ConfigError(f"invalid channel: {bad}")
    rows = [("k", "input_sizes", "output_size", "costs"),
            (mac.k, " ".join(map(str, mac.input_sizes)), mac.output_size, mac.costs is not None)]
    return rows, 0


COMMANDS = {
    "region": cmd_region,
    "gain": cmd_gain,
    "gaussian2": cmd_gaussian2,
    "covering": cmd_covering,
    "codec": cmd_codec,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfmac", description="Cooperation-facilitator MAC toolkit.")
    parser.add_argument("--version", action="version", version=f"cfmac {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, default_out):
        p.add_argument("--config", help="JSON file whose keys override the flags")
        p.add_argument("--out", default=default_out, help="CSV output path")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("region", help="max weighted sums of the no-cooperation, forwarding and outer bounds")
    common(p, "region.csv")
    p.add_argument("--channel", default="bemac")
    p.add_argument("--c-in", default="0.2")
    p.add_argument("--c-out", default="0.2")
    p.add_argument("--weights", default="1")

    p = sub.add_parser("gain", help="sum-rate gain curve of the mixture family")
    common(p, "gain.csv")
    p.add_argument("--channel", default="bemac")
    p.add_argument("--c-in", default="1")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--v", default=None)
    p.add_argument("--h", default="1e-2,1e-3,1e-4")

    p = sub.add_parser("gaussian2", help="two-user Gaussian sum-rate gains versus c_out")
    common(p, "gaussian2.csv")
    p.add_argument("--gamma1", type=float, default=100.0)
    p.add_argument("--gamma2", type=float, default=100.0)
    p.add_argument("--grid", default="0:0.01:0.001")
    p.add_argument("--opt-grid", type=int, default=64)

    p = sub.add_parser("covering", help="covering success fraction over a rate grid")
    common(p, "covering.csv")
    p.add_argument("--crossover", type=float, default=0.0)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--rates", default="0.3,0.3;0.5,0.5;0.7,0.7")
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("codec", help="block error rate of the random code with uniform product inputs")
    common(p, "codec.csv")
    p.add_argument("--channel", default="bemac")
    p.add_argument("--rates", default="0.6")
    p.add_argument("--n", default="16")
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("validate", help="check a channel JSON file")
    common(p, None)
    p.add_argument("channel_file")
    return parser


def run(argv=None) -> int:
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("a subcommand is required: " + ", ".join(COMMANDS))
        cfg = _load_config(args.config)
        rows, seed = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical precondition failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.command == "validate":
        print(f"{args.channel_file}: valid {rows[1][0]}-user channel")
    if args.out is None:
        return EXIT_OK
    try:
        _write_csv(rows, args.out)
        manifest = {
            "subcommand": args.command,
            "config": args.config,
            "output": str(args.out),
            "seed": seed,
            "version": __version__,
            "started": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "wall_clock_s": round(time.perf_counter() - start, 3),
            "argv": list(sys.argv[1:] if argv is None else argv),
        }
        manifest_path(args.out).write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main() -> None:
    sys.exit(run())
