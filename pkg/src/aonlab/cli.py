"""Command-line entry point: ``aonlab {sweep,rate,kl,immse,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiment import default_beta_grid, emit_csv, emit_meta, sweep
from .information import (
    Report,
    check_rate_hypotheses,
    i_mmse_check,
    kl_curve,
    kl_properties,
    load_rate_constant,
    rate_function,
)
from .model import ConfigError, LambdaScale, Mode, ProblemConfig

EXIT_OK, EXIT_USAGE, EXIT_PROPERTY = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_problem(ap: argparse.ArgumentParser, p: int = 12, k: int = 2) -> None:
    ap.add_argument("--p", type=int, default=p)
    ap.add_argument("--k", type=int, default=k)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lambda-scale", choices=[s.value for s in LambdaScale], default=LambdaScale.TWO_LOG_M.value)
    ap.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FULL_TENSOR.value)


def _config(args, beta: float = 0.0) -> ProblemConfig:
    return ProblemConfig(
        p=args.p, k=args.k, d=args.d, mode=args.mode, lambda_scale=args.lambda_scale, beta=beta, seed=args.seed
    )


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="aonlab", description="Exact-enumeration experiments for sparse tensor PCA.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sw = sub.add_parser("sweep", parents=[common], help="Monte-Carlo risk sweep over beta; writes CSV and <out>.meta.json")
    _add_problem(sw)
    sw.add_argument("--beta-min", type=float, default=0.25)
    sw.add_argument("--beta-max", type=float, default=2.0)
    sw.add_argument("--beta-steps", type=int, default=8)
    sw.add_argument("--trials", type=int, default=500)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out", required=True)

    rt = sub.add_parser("rate", parents=[common], help="exact overlap rate function and hypothesis margins")
    _add_problem(rt)
    rt.add_argument("--constant", type=float, default=None, help="constant in sqrt(t) - C/lambda_n")
    rt.add_argument("--out")

    kl = sub.add_parser("kl", parents=[common], help="Monte-Carlo KL curve D/lambda_n over a beta grid")
    _add_problem(kl)
    kl.add_argument("--beta-min", type=float, default=0.0)
    kl.add_argument("--beta-max", type=float, default=2.0)
    kl.add_argument("--beta-steps", type=int, default=8)
    kl.add_argument("--samples", type=int, default=2000)
    kl.add_argument("--out")

    im = sub.add_parser("immse", parents=[common], help="I-MMSE finite-difference consistency check")
    _add_problem(im, p=10)
    im.add_argument("--beta", type=float, default=1.0)
    im.add_argument("--h", type=float, default=0.1)
    im.add_argument("--samples", type=int, default=5000)
    im.add_argument("--scheme", choices=["central", "forward"], default="central")
    im.add_argument("--out")

    vf = sub.add_parser("verify", parents=[common], help="run the property and oracle suites")
    vf.add_argument("--json", action="store_true", help="print one JSON report per line")
    vf.add_argument("--suite", action="append", help="run only the named suite(s)")
    return ap


def _cmd_sweep(args) -> int:
    if args.beta_steps < 1:
        raise ConfigError("--beta-steps must be >= 1")
    if not 0 <= args.beta_min <= args.beta_max:
        raise ConfigError("need 0 <= --beta-min <= --beta-max")
    if args.beta_steps > 1 and args.beta_min == 0:
        grid = np.linspace(0.0, args.beta_max, args.beta_steps)
    else:
        grid = default_beta_grid(args.beta_steps, args.beta_min, args.beta_max)
    cfg = _config(args)
    result = sweep(cfg, grid, args.trials, workers=args.workers)
    csv_path = emit_csv(result, args.out)
    meta_path = emit_meta(result, args.out)
    logging.getLogger("aonlab").info("wrote %s and %s", csv_path, meta_path)
    if not result.all_margins_ok:
        print("warning: estimator-inequality margin below -3 sigma", file=sys.stderr)
    return EXIT_OK


def _cmd_rate(args) -> int:
    cfg = _config(args)
    rf = rate_function(cfg)
    constant = load_rate_constant() if args.constant is None else args.constant
    check = check_rate_hypotheses(rf, cfg.lambda_n, constant)
    record = {
        "operation": "rate_function",
        "config": cfg.to_dict(),
        "inputs": {"constant": constant},
        "thresholds": rf.thresholds.tolist(),
        "tail_log_probs": rf.tail_log_probs.tolist(),
        "rate_values": rf.rate_values.tolist(),
        "margin": check.min_margin_sqrt,
        "check": check.to_dict(),
    }
    _emit(json.dumps(record, sort_keys=True), args.out)
    return EXIT_OK


def _cmd_kl(args) -> int:
    cfg = _config(args)
    betas = np.linspace(args.beta_min, args.beta_max, args.beta_steps)
    curve = kl_curve(cfg, betas, args.samples)
    lines = []
    for beta, est, se in zip(curve.betas, curve.kl_over_lambda, curve.stderrs):
        rec = Report("kl_curve", cfg.with_beta(float(beta)).to_dict(), {"samples": args.samples}, float(est), float(se))
        lines.append(rec.to_json())
    props = kl_properties(curve)
    lines.append(json.dumps({"operation": "kl_properties", **props}, sort_keys=True))
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def _cmd_immse(args) -> int:
    rep = i_mmse_check(_config(args), args.beta, args.h, args.samples, scheme=args.scheme)
    _emit(rep.to_json(), args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import SUITES

    names = args.suite or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s): {', '.join(unknown)}")
    ok = True
    for name in names:
        rep = SUITES[name]()
        ok &= rep.passed
        if args.json:
            print(json.dumps(rep.to_dict(), sort_keys=True))
        else:
            status = "PASS" if rep.passed else "FAIL"
            print(f"{status}  {name:32s} cases={rep.cases_run:<7d} max_abs_discrepancy={rep.max_abs_discrepancy:.3g}")
    return EXIT_OK if ok else EXIT_PROPERTY


COMMANDS = {"sweep": _cmd_sweep, "rate": _cmd_rate, "kl": _cmd_kl, "immse": _cmd_immse, "verify": _cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"aonlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
