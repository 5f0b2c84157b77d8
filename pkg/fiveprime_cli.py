#!/usr/bin/env python3
"""
fiveprime CLI - command line interface for the five-prime inequality toolkit
"""
import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
import traceback
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

import counting
import decomp
import exppair
import expsum
import quadrature
from acceptance_runner import AcceptanceRunner
from errors import FiveprimeError, InvalidParamsError
from params import SystemParams, classify_region, derive_scales, load_params_config, mid_band_ratio
from primes import arithmetic_tables, chebyshev_weight, psi
from storage import RunRecorder, TableStore
from storage.run_records import write_csv, write_dict_rows, write_grid, write_json, write_solutions

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

THREADS_ENV = "FIVEPRIME_THREADS"
PARAM_FLAGS = ("c", "d", "alpha", "beta", "N1", "N2", "lambda_cut", "eta", "log_power")


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: Optional[SystemParams]
    options: Dict[str, Any] = field(default_factory=dict)
    threads: int = 1
    seed: int = 0
    out: Optional[str] = None

    def validate(self) -> "RunConfig":
        problems = []
        if self.threads < 1:
            problems.append(f"threads must be >= 1, got {self.threads}")
        if not 0 <= self.seed < 2 ** 64:
            problems.append(f"seed must fit in 64 bits, got {self.seed}")
        if problems:
            raise InvalidParamsError(problems)
        if self.params is not None:
            self.params.validate()
        return self

    def digest(self) -> str:
        document = {
            "command": self.command,
            "params": asdict(self.params) if self.params is not None else None,
            "options": self.options,
            "threads": self.threads,
            "seed": self.seed,
        }
        blob = json.dumps(document, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def format_json_output(data: Any, indent: int = 2) -> str:
    return json.dumps(data, indent=indent, ensure_ascii=False, default=str)


def print_success(message: str):
    print(f"✅ {message}", file=sys.stderr)


def print_error(message: str):
    print(f"❌ {message}", file=sys.stderr)


def print_info(message: str):
    print(f"ℹ️  {message}", file=sys.stderr)


def emit(config: RunConfig, recorder: RunRecorder, document: Any) -> None:
    """JSON to --out when given, stdout otherwise."""
    if config.out:
        recorder.add_output(write_json(config.out, document))
    else:
        print(format_json_output(document))


# --- parameter resolution ----------------------------------------------------

def resolve_document(args) -> Dict[str, Any]:
    document = load_params_config(args.config)
    for name in PARAM_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            document[name] = value
    return document


def resolve_params(args, document: Dict[str, Any]) -> SystemParams:
    """SystemParams from the document, picking N1/N2 from --X and --ratio when absent.

    Picked targets get alpha and beta bracketing the ratio unless --alpha or
    --beta are given. --ratio defaults to the middle of the attainable band.
    """
    if document.get("N1") is None or document.get("N2") is None:
        if args.X is None:
            raise InvalidParamsError(["N1 and N2 are not configured; pass --X (and --ratio) or --N1/--N2"])
        c, d, lambda_cut = document["c"], document["d"], document["lambda_cut"]
        ratio = args.ratio if args.ratio is not None else mid_band_ratio(c, d, args.X, lambda_cut)
        picked = SystemParams.for_experiment(
            c, d, args.X, ratio, lambda_cut=lambda_cut, eta=document["eta"], log_power=document["log_power"]
        )
        document = dict(
            document,
            N1=picked.N1,
            N2=picked.N2,
            alpha=args.alpha if args.alpha is not None else picked.alpha,
            beta=args.beta if args.beta is not None else picked.beta,
        )
    if args.X is not None:
        document = dict(document, X=args.X)
    return SystemParams.from_dict(document).validate()


def needs_params(args) -> bool:
    return args.command in NEEDS_PARAMS or bool(getattr(args, "sup", False))


def _need_X(args) -> float:
    if args.X is None:
        raise InvalidParamsError(["--X is required for this command"])
    return args.X


def _store() -> TableStore:
    return TableStore()


# --- commands ----------------------------------------------------------------

def cmd_primes(args, config: RunConfig, recorder: RunRecorder) -> int:
    document = config.options["document"]
    X = _need_X(args)
    started = time.perf_counter()
    table = _store().load_or_sieve(X, document["lambda_cut"], document["c"], document["d"], threads=config.threads)
    recorder.time("sieve", time.perf_counter() - started)
    summary = {
        "X": X,
        "lambda_cut": document["lambda_cut"],
        "count": len(table),
        "first": int(table.primes[0]) if len(table) else None,
        "last": int(table.primes[-1]) if len(table) else None,
        "chebyshev_weight": chebyshev_weight(table),
    }
    if args.psi:
        summary["psi"] = psi(arithmetic_tables(int(X)), int(X))
    if args.list:
        summary["primes"] = table.primes.tolist()
    emit(config, recorder, summary)
    return EXIT_OK


def cmd_expsum(args, config: RunConfig, recorder: RunRecorder) -> int:
    document = config.options["document"]
    c, d = document["c"], document["d"]
    if args.sweep:
        rows = expsum.mean_square_sweep(
            [int(k) for k in args.sweep.split(",")], c, d, document["lambda_cut"], document["eta"], kind=args.kind
        )
        if config.out:
            recorder.add_output(write_dict_rows(config.out, rows))
        else:
            print(format_json_output(rows))
        return EXIT_OK

    if args.sup:
        return _expsum_sup(args, config, recorder)

    X = _need_X(args)
    table = _store().load_or_sieve(X, document["lambda_cut"], c, d, threads=config.threads)
    if args.fourth_moment:
        if args.eps1 is None or args.eps2 is None:
            raise InvalidParamsError(["--fourth-moment needs --eps1 and --eps2"])
        started = time.perf_counter()
        value = expsum.fourth_moment(table, c, d, args.eps1, args.eps2)
        recorder.time("fourth_moment", time.perf_counter() - started)
        emit(config, recorder, {"X": X, "eps1": args.eps1, "eps2": args.eps2, "primes": len(table), "fourth_moment": value})
        return EXIT_OK
    if args.grid:
        started = time.perf_counter()
        grid = expsum.grid_eval(table, c, d, expsum.GridSpec.parse(args.grid), threads=config.threads)
        recorder.time("grid_eval", time.perf_counter() - started)
        if config.out:
            recorder.add_output(write_grid(config.out, grid))
            print_success(f"Wrote {grid.values.size} grid values to {config.out}")
        else:
            print(format_json_output(
                {"nx": grid.x_points.size, "ny": grid.y_points.size,
                 "max_modulus": grid.max_modulus(), "params_digest": grid.params_digest}
            ))
        return EXIT_OK

    value = expsum.eval_S(table, c, d, args.x, args.y)
    emit(config, recorder, {"x": args.x, "y": args.y, "re": value.re, "im": value.im, "modulus": abs(value)})
    return EXIT_OK


def _expsum_sup(args, config: RunConfig, recorder: RunRecorder) -> int:
    params = config.params
    scales = derive_scales(params, args.eps1, args.eps2)
    if args.grid:
        spec = expsum.GridSpec.parse(args.grid)
    elif math.isfinite(scales.K1) and math.isfinite(scales.K2):
        # 2K on each side so the grid crosses into Omega3
        spec = expsum.GridSpec(-2 * scales.K1, 2 * scales.K1, 81, -2 * scales.K2, 2 * scales.K2, 81)
    else:
        raise InvalidParamsError(["--sup without --grid needs positive windows"])
    table = _store().load_or_sieve(scales.X, params.lambda_cut, params.c, params.d, threads=config.threads)
    started = time.perf_counter()
    report = expsum.sup_modulus(table, params.c, params.d, scales, spec, threads=config.threads)
    recorder.time("sup_modulus", time.perf_counter() - started)
    emit(config, recorder, dict(asdict(report), X=scales.X, nx=spec.nx, ny=spec.ny))
    return EXIT_OK


def cmd_regions(args, config: RunConfig, recorder: RunRecorder) -> int:
    scales = derive_scales(config.params, args.eps1, args.eps2)
    document = {"scales": asdict(scales)}
    if args.x is not None and args.y is not None:
        document["point"] = {"x": args.x, "y": args.y, "region": classify_region(scales, args.x, args.y).value}
    emit(config, recorder, document)
    return EXIT_OK


def cmd_exppair(args, config: RunConfig, recorder: RunRecorder) -> int:
    if args.word is None and not args.bounds:
        raise InvalidParamsError(["exppair needs --word or --bounds"])
    document: Dict[str, Any] = {}
    if args.word is not None:
        pair = exppair.apply_word(args.word)
        document["pair"] = exppair.pair_record(args.word, pair)
        print_success(f"{args.word}: kappa={pair.kappa} lam={pair.lam}")
    if args.bounds:
        started = time.perf_counter()
        reports = {
            "td": exppair.fit_td_bound(),
            "vdc_first": exppair.fit_vdc_first(seed=config.seed, threads=config.threads),
            "vdc_second": exppair.fit_vdc_second(seed=config.seed, threads=config.threads),
            "zhai_first": exppair.fit_zhai_first(seed=config.seed, threads=config.threads),
            "kratzel": exppair.fit_kratzel(seed=config.seed, threads=config.threads),
        }
        recorder.time("fits", time.perf_counter() - started)
        document["bounds"] = {name: r.to_dict() for name, r in reports.items()}
    emit(config, recorder, document)
    return EXIT_OK


def cmd_hb_verify(args, config: RunConfig, recorder: RunRecorder) -> int:
    started = time.perf_counter()
    error = decomp.hb_verify_range(args.k, args.nmax)
    recorder.time("hb_verify_range", time.perf_counter() - started)
    document: Dict[str, Any] = {"k": args.k, "n_max": args.nmax, "max_error": error}
    if args.coefficients is not None:
        document["coefficients"] = _block_norms(args.k, args.coefficients)
    emit(config, recorder, document)
    if error > args.tolerance:
        print_error(f"identity error {error:.3g} above {args.tolerance:g}")
        return EXIT_FAILED
    return EXIT_OK


def _block_norms(k: int, M: float) -> List[Dict[str, float]]:
    """sum |a(m)|^2 / (M (log M)^(j^2-1)) for the Moebius blocks j = 1..k, cut at (2M)^(1/k)."""
    if not M >= 2.0:
        raise InvalidParamsError([f"--coefficients needs M >= 2, got {M!r}"])
    z = (2.0 * M) ** (1.0 / k)
    rows = []
    for j in range(1, k + 1):
        coeffs = decomp.block_coefficients(M, z, j)
        rows.append({"j": j, "M": M, "z": z, "norm_ratio": decomp.coefficient_norm_ratio(coeffs, M, (j * j - 1) / 2.0)})
    return rows


def cmd_classify(args, config: RunConfig, recorder: RunRecorder) -> int:
    X = _need_X(args)
    R = args.R if args.R is not None else X
    th = decomp.thresholds(X, R)
    checks = th.check_invariants()
    rng = np.random.default_rng(config.seed)
    rows = []
    for profile in decomp.random_profiles(X, args.count, rng):
        label = decomp.classify_blocks(profile, th)
        rows.append([
            ";".join(repr(b) for b in profile), label.kind, label.case,
            " ".join(map(str, label.n_blocks)), repr(label.M), repr(label.N),
        ])
    if config.out:
        recorder.add_output(write_csv(config.out, ["blocks", "kind", "case", "n_blocks", "M", "N"], rows))
    summary = {
        "X": X,
        "R": R,
        "thresholds": {"A": th.frakA, "B": th.frakB, "C": th.frakC},
        "checks": checks,
        "cases": {str(case): sum(1 for r in rows if r[2] == case) for case in (1, 2, 3)},
    }
    print(format_json_output(summary))
    return EXIT_OK if all(checks.values()) else EXIT_FAILED


def cmd_search(args, config: RunConfig, recorder: RunRecorder) -> int:
    params = config.params
    table = _store().load_or_sieve(params.support_X, params.lambda_cut, params.c, params.d, threads=config.threads)
    if args.method == "smoothed":
        result = counting.smoothed_count(table, params, args.eps1, args.eps2, threads=config.threads)
    elif args.method == "exhaustive":
        result = counting.exhaustive_count(table, params, args.eps1, args.eps2, mode=args.mode)
    else:
        result = counting.mitm_count(table, params, args.eps1, args.eps2, mode=args.mode, threads=config.threads)
    recorder.time("count", result.elapsed)
    summary = result.to_dict()
    status = EXIT_OK
    if args.certify and args.method != "smoothed":
        report = counting.certify_records(result.solutions, params, args.eps1, args.eps2, mode=args.mode)
        summary["certification"] = asdict(report)
        if not report.all_inside:
            print_error("a reported solution fails the extended-precision window check")
            status = EXIT_FAILED
    if config.out:
        recorder.add_output(write_solutions(config.out, result.solutions))
    print(format_json_output(summary))
    return status


def cmd_scaling(args, config: RunConfig, recorder: RunRecorder) -> int:
    document = config.options["document"]
    Xs = [float(v) for v in args.Xs.split(",")]
    report = counting.scaling_sweep(
        Xs, document["c"], document["d"], eps=args.eps, ratio=args.ratio,
        lambda_cut=document["lambda_cut"], threads=config.threads,
    )
    if config.out:
        recorder.add_output(write_dict_rows(config.out, list(report.rows)))
    print(format_json_output({"rows": list(report.rows), "slope": report.slope, "expected_slope": report.expected_slope}))
    if args.tolerance is not None and not abs(report.slope - report.expected_slope) <= args.tolerance:
        print_error(f"slope {report.slope:.3f} differs from {report.expected_slope:.3f} by more than {args.tolerance}")
        return EXIT_FAILED
    return EXIT_OK


def cmd_integrate(args, config: RunConfig, recorder: RunRecorder) -> int:
    params = config.params
    scales = derive_scales(params, args.eps1, args.eps2)
    table = _store().load_or_sieve(scales.X, params.lambda_cut, params.c, params.d, threads=config.threads)
    steps = (args.step_x, args.step_y) if args.step_x and args.step_y else None
    started = time.perf_counter()
    if args.report:
        report = quadrature.region_report(table, params, scales, steps, method=args.method, threads=config.threads)
        document = report.to_dict()
        if config.out:
            ratios = [[r.region, r.value.re, r.value.im, abs(r.value)] for r in (report.d1, report.d2, report.d3, report.total)]
            recorder.add_output(write_csv(config.out + ".csv", ["region", "re", "im", "modulus"], ratios))
    else:
        result = quadrature.integrate_D(
            table, params, scales, args.region, steps, method=args.method, threads=config.threads
        )
        document = result.to_dict()
    recorder.time("integrate", time.perf_counter() - started)
    emit(config, recorder, document)
    return EXIT_OK


def cmd_verify(args, config: RunConfig, recorder: RunRecorder) -> int:
    runner = AcceptanceRunner(args.cases, threads=config.threads, seed=config.seed)
    runner.load_cases(only=args.only)
    runner.run_all()
    runner.print_summary()
    if config.out:
        recorder.add_output(runner.save_results(config.out))
    return EXIT_OK if runner.all_passed() else EXIT_FAILED


COMMANDS: Dict[str, Callable[..., int]] = {
    "primes": cmd_primes,
    "expsum": cmd_expsum,
    "regions": cmd_regions,
    "exppair": cmd_exppair,
    "hb-verify": cmd_hb_verify,
    "classify": cmd_classify,
    "search": cmd_search,
    "scaling": cmd_scaling,
    "integrate": cmd_integrate,
    "verify": cmd_verify,
}

# commands whose params must be complete (N1, N2 resolved and validated)
NEEDS_PARAMS = {"regions", "search", "integrate"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON parameter document")
    common.add_argument("--out", help="Output file; a run manifest is written next to it")
    common.add_argument("--threads", type=int, default=None, help=f"Worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--seed", type=int, default=0, help="Seed for randomized checks")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose output")
    common.add_argument("--c", type=float, help="Exponent c")
    common.add_argument("--d", type=float, help="Exponent d")
    common.add_argument("--alpha", type=float, help="Lower ratio bound")
    common.add_argument("--beta", type=float, help="Upper ratio bound")
    common.add_argument("--N1", type=float, help="Target N1")
    common.add_argument("--N2", type=float, help="Target N2")
    common.add_argument("--lambda-cut", dest="lambda_cut", type=float, help="Support cutoff lambda")
    common.add_argument("--eta", type=float, help="Offset eta in tau1, tau2")
    common.add_argument("--log-power", dest="log_power", type=int, help="Power of log X in the windows")
    common.add_argument("--X", type=float, help="Prime support bound X")
    common.add_argument(
        "--ratio", type=float, help="N2 / N1^(d/c) when targets are picked (default: middle of the attainable band)"
    )

    parser = argparse.ArgumentParser(
        prog="fiveprime",
        description="fiveprime - numerical toolkit for |sum p_i^c - N1| < eps1, |sum p_i^d - N2| < eps2 in five primes",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Primes in (lambda X, X] with their log weight
  fiveprime primes --X 100 --lambda-cut 0.1

  # S(x, y) on a grid, written as CSV
  fiveprime expsum --X 400 --grid -0.01,0.01,101,-0.01,0.01,101 --out grid.csv

  # Exponent pair of a process word
  fiveprime exppair --word BAAB

  # Heath-Brown identity over n <= 10^4
  fiveprime hb-verify --k 2 --nmax 10000

  # Count solutions by meet in the middle
  fiveprime search --X 400 --eps1 0.5 --eps2 0.5 --log-power 0

  # Region pieces of the smoothed integral
  fiveprime integrate --X 40 --lambda-cut 0.5 --eps1 2 --eps2 2 --log-power 0 --report

  # Acceptance suite
  fiveprime verify
        """,
    )
    sub = parser.add_subparsers(dest="command", help="Available commands")

    p = sub.add_parser("primes", parents=[common], help="Sieve the prime support")
    p.add_argument("--list", action="store_true", help="Include the primes in the output")
    p.add_argument("--psi", action="store_true", help="Also report psi(X)")

    p = sub.add_parser("expsum", parents=[common], help="Evaluate S(x, y) at a point, on a grid, or sweep mean squares")
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--y", type=float, default=0.0)
    p.add_argument("--grid", help="x_min,x_max,nx,y_min,y_max,ny")
    p.add_argument("--sweep", help="Comma-separated log2 X values for a mean-square sweep")
    p.add_argument("--kind", choices=["interval", "smoothed"], default="interval")
    p.add_argument("--fourth-moment", dest="fourth_moment", action="store_true", help="Smoothed fourth moment of S")
    p.add_argument("--sup", action="store_true", help="Largest |S| over the intermediate region on --grid")
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)

    p = sub.add_parser("regions", parents=[common], help="Derived scales and region of a point")
    p.add_argument("--x", type=float)
    p.add_argument("--y", type=float)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)

    p = sub.add_parser("exppair", parents=[common], help="Exponent pair words and empirical bound fits")
    p.add_argument("--word", help="Process word such as BAAB or BA^2B")
    p.add_argument("--bounds", action="store_true", help="Fit the empirical bound constants")

    p = sub.add_parser("hb-verify", parents=[common], help="Check the Heath-Brown identity against Lambda")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--nmax", type=int, default=10000)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--coefficients", type=float, metavar="M", help="Also report block coefficient norms at scale M")

    p = sub.add_parser("classify", parents=[common], help="Classify random block profiles as Type I / II")
    p.add_argument("--R", type=float, help="Frequency scale (default X)")
    p.add_argument("--count", type=int, default=100)

    p = sub.add_parser("search", parents=[common], help="Count prime 5-tuples inside the windows")
    p.add_argument("--eps1", type=float, required=True)
    p.add_argument("--eps2", type=float, required=True)
    p.add_argument("--mode", choices=[counting.INDICATOR, counting.LOGWINDOW], default=counting.INDICATOR)
    p.add_argument("--method", choices=["mitm", "exhaustive", "smoothed"], default="mitm")
    p.add_argument("--certify", action="store_true", help="Re-check solutions in extended precision")

    p = sub.add_parser("scaling", parents=[common], help="Weighted counts across X and their log2 slope")
    p.add_argument("--Xs", default="200,400,800")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--tolerance", type=float, help="Fail when the slope is further than this from 5-c-d")

    p = sub.add_parser("integrate", parents=[common], help="Quadrature of the smoothed integral")
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--region", default=quadrature.ALL, choices=[quadrature.ALL, "Omega1", "Omega2", "Omega3"])
    p.add_argument("--step-x", dest="step_x", type=float)
    p.add_argument("--step-y", dest="step_y", type=float)
    p.add_argument("--method", choices=[quadrature.AUTO, quadrature.SEPARABLE, quadrature.GRID], default=quadrature.AUTO)
    p.add_argument("--report", action="store_true", help="All three regions and their ratios")

    p = sub.add_parser("verify", parents=[common], help="Run the acceptance suite")
    p.add_argument("--cases", default=os.path.join(os.path.dirname(os.path.abspath(__file__)), "tests", "acceptance"))
    p.add_argument("--only", help="Comma-separated case names")

    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    value = os.environ.get(THREADS_ENV, "1")
    try:
        return int(value)
    except ValueError:
        raise InvalidParamsError([f"{THREADS_ENV} must be an integer, got {value!r}"])


def dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    configure_logging(args.verbose)
    try:
        document = resolve_document(args)
        params = resolve_params(args, document) if needs_params(args) else None
        options = {k: v for k, v in vars(args).items() if k not in ("command", "out", "threads", "seed", "verbose")}
        options["document"] = document
        config = RunConfig(
            command=args.command, params=params, options=options,
            threads=_threads(args), seed=args.seed, out=args.out,
        ).validate()
        recorder = RunRecorder(args.command, config.digest(), out=config.out)
        status = COMMANDS[args.command](args, config, recorder)
        recorder.write_manifest()
        return status
    except FiveprimeError as e:
        print_error(str(e))
        if args.verbose:
            traceback.print_exc()
        return EXIT_USAGE
    except OSError as e:
        print_error(f"I/O error: {e}")
        return EXIT_USAGE


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
