"""Command-line interface: ``tskm project|sweep|bench|gradcheck|generate``.

Exit codes: 0 success, 1 usage or validation error, 2 non-convergence (or a
failed gradient check).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time

import numpy as np

from . import oracle
from .autodiff import UnsupportedVariant, check_path, expected_gradient_check, path_jacobian
from .generators import gen_feasible_mixed, gen_infeasible_start
from .model import ParseError, ValidationError, load_system, save_result, save_system
from .nullspace import InconsistentEqualities, InfeasibleFullRank
from .pipeline import naive_solve, tskm_solve
from .skm import AUTO, SkmConfig, Variant, derive_seed, make_rng, resolve_beta

EXIT_OK, EXIT_USAGE, EXIT_NOCONV = 0, 1, 2
GRAD_TOL = 1e-5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _beta(text):
    if text == AUTO:
        return AUTO
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be 'auto' or an integer, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _add_skm_flags(p, variant=True):
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--beta", type=_beta, default=AUTO)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--check-every", type=int, default=10)
    if variant:
        p.add_argument("--variant", choices=[v.value for v in Variant], default="basic")
    p.add_argument("--sampling", choices=["with", "without"], default="with")
    p.add_argument("--seed", type=int, default=0)


def _config(args, **overrides) -> SkmConfig:
    kw = dict(
        delta=args.delta,
        beta=args.beta,
        max_iters=args.max_iters,
        tolerance=args.tol,
        check_every=args.check_every,
        variant=getattr(args, "variant", "basic"),
        sampling=args.sampling,
        seed=args.seed,
    )
    kw.update(overrides)
    try:
        return SkmConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _timed(fn, *args):
    t0 = time.perf_counter_ns()
    out = fn(*args)
    return out, time.perf_counter_ns() - t0


def instance_seed(seed: int, dim: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, dim, trial]).generate_state(1, np.uint64)[0])


def make_instance(dim, p, q, seed, trial, violation_scale=100.0):
    s = instance_seed(seed, dim, trial)
    system = gen_feasible_mixed(dim, p, q, s)
    return system.with_y0(gen_infeasible_start(system, s, violation_scale))


# --- commands ---------------------------------------------------------------


def cmd_project(args) -> int:
    config = _config(args)
    system = load_system(args.input)
    solver = naive_solve if args.naive else tskm_solve
    result = solver(system, config)
    if args.output:
        save_result(result, args.output)
    else:
        import json

        print(json.dumps(result.to_dict()))
    print(
        f"termination={result.termination.value} iterations={result.iterations} "
        f"max_ineq_violation={result.max_ineq_violation!r} max_eq_violation={result.max_eq_violation!r} "
        f"distance_moved={result.distance_moved!r}"
    )
    return EXIT_OK if result.ok else EXIT_NOCONV


def parse_values(text: str, param: str):
    """``lo:hi:step`` (inclusive) or a comma list; beta also takes ``auto``, ``sqrt`` and ``p``."""
    text = text.strip()
    if ":" in text:
        try:
            lo, hi, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise UsageError(f"bad range {text!r}") from None
        if step <= 0 or hi < lo:
            raise UsageError(f"bad range {text!r}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        values = [round(lo + i * step, 12) for i in range(count)]
    else:
        values = []
        for tok in text.split(","):
            tok = tok.strip()
            if param == "beta" and tok in ("auto", "sqrt", "p"):
                values.append(tok)
                continue
            try:
                values.append(float(tok))
            except ValueError:
                raise UsageError(f"bad value {tok!r}") from None
    if param == "beta":
        out = []
        for v in values:
            if isinstance(v, float):
                if v < 1 or v != int(v):
                    raise UsageError(f"beta values must be positive integers, got {v}")
                v = int(v)
            out.append(v)
        return out
    return values


def _beta_for(token, p):
    if token == "sqrt":
        return max(1, int(round(math.sqrt(p))))
    if token == "p":
        return p
    if token == "auto":
        return resolve_beta(AUTO, p)
    return int(token)


def cmd_sweep(args) -> int:
    values = parse_values(args.values, args.param)
    base = _config(args)
    header = ["param_value", "dim", "trial", "iterations", "wall_time_ns", "max_violation", "distance_moved", "oracle_distance"]
    instances = {}
    for dim in args.dims:
        p = q = dim // 2
        if q >= dim:
            raise UsageError(f"dim {dim} too small")
        for trial in range(args.trials):
            system = make_instance(dim, p, q, args.seed, trial, args.violation_scale)
            dist = None
            if dim <= oracle.MAX_N and p <= oracle.MAX_P:
                dist = oracle.project_exact(system).distance
            instances[dim, trial] = (system, dist)
    rows = []
    for value in values:
        for dim in args.dims:
            for trial in range(args.trials):
                system, dist = instances[dim, trial]
                seed = derive_seed(args.seed, trial)
                if args.param == "delta":
                    try:
                        cfg = SkmConfig(**{**base.__dict__, "delta": float(value), "seed": seed})
                    except ValueError as exc:
                        raise UsageError(str(exc)) from exc
                    shown = float(value)
                else:
                    b = _beta_for(value, max(system.p, 1))
                    cfg = SkmConfig(**{**base.__dict__, "beta": b, "seed": seed})
                    shown = value if isinstance(value, str) else int(value)
                result, ns = _timed(tskm_solve, system, cfg)
                rows.append(
                    [
                        shown,
                        dim,
                        trial,
                        result.iterations,
                        None if args.no_timing else ns,
                        max(result.max_ineq_violation, result.max_eq_violation),
                        result.distance_moved,
                        dist,
                    ]
                )
    _write_csv(args.csv, header, rows)
    print(f"wrote {len(rows)} rows to {args.csv}")
    return EXIT_OK


BENCH_MODES = {
    "tskm": ("tskm", Variant.BASIC),
    "basic": ("tskm", Variant.BASIC),
    "naive": ("naive", Variant.BASIC),
    "gskm": ("tskm", Variant.GSKM),
    "nskm": ("tskm", Variant.NSKM),
    "mskm": ("tskm", Variant.MSKM),
}


def cmd_bench(args) -> int:
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    unknown = [m for m in modes if m not in BENCH_MODES]
    if unknown:
        raise UsageError(f"unknown modes: {', '.join(unknown)}")
    base = _config(args)
    header = [
        "mode",
        "dim",
        "trial",
        "iterations",
        "wall_time_ns",
        "max_ineq_violation",
        "max_eq_violation",
        "distance_moved",
        "termination",
    ]
    rows = []
    stats = {}
    for dim in args.dims:
        for trial in range(args.trials):
            system = make_instance(dim, dim, dim // 2, args.seed, trial, args.violation_scale)
            for mode in modes:
                path, variant = BENCH_MODES[mode]
                cfg = SkmConfig(**{**base.__dict__, "variant": variant, "seed": derive_seed(args.seed, trial)})
                solver = naive_solve if path == "naive" else tskm_solve
                result, ns = _timed(solver, system, cfg)
                rows.append(
                    [
                        mode,
                        dim,
                        trial,
                        result.iterations,
                        None if args.no_timing else ns,
                        result.max_ineq_violation,
                        result.max_eq_violation,
                        result.distance_moved,
                        result.termination.value,
                    ]
                )
                stats.setdefault((dim, mode), []).append((result.iterations, ns))
    _write_csv(args.csv, header, rows)
    ref = modes[0] if modes else None
    for dim in args.dims:
        for mode in modes:
            its, ns = zip(*stats[dim, mode]) if stats.get((dim, mode)) else ((0,), (0,))
            r_its, r_ns = zip(*stats[dim, ref]) if stats.get((dim, ref)) else ((0,), (0,))
            ratio_it = np.median(its) / max(np.median(r_its), 1)
            line = f"dim={dim} mode={mode} median_iterations={np.median(its):g} iter_ratio_vs_{ref}={ratio_it:.3g}"
            if not args.no_timing:
                line += f" median_wall_ms={np.median(ns) / 1e6:.3f} time_ratio_vs_{ref}={np.median(ns) / max(np.median(r_ns), 1):.3g}"
            print(line)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if not args.eps > 0:
        raise UsageError("eps must be positive")
    if args.paths < 1:
        raise UsageError("paths must be positive")
    config = _config(args, variant="basic")
    system = load_system(args.input)
    rows = []
    worst, excluded = 0.0, 0
    for i in range(args.paths):
        cfg = config.with_seed(derive_seed(config.seed, i))
        _, pj = path_jacobian(system, cfg, track_growth=False)
        chk = check_path(system, cfg, args.eps, pj)
        excluded += chk.excluded
        if not chk.excluded:
            worst = max(worst, chk.max_error)
        for j, err in enumerate(chk.rel_errors):
            rows.append([i, cfg.seed, j, float(err), int(chk.excluded), chk.reason])
    if args.csv:
        _write_csv(args.csv, ["path", "seed", "coordinate", "rel_error", "excluded", "reason"], rows)
    probe = make_rng(config.seed).standard_normal(system.n)
    probe /= np.linalg.norm(probe)
    try:
        report = expected_gradient_check(system, config, args.paths, probe, args.eps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    per_path_ok = worst <= GRAD_TOL
    print(f"paths={args.paths} excluded={excluded} max_rel_error={worst!r} per_path={'pass' if per_path_ok else 'FAIL'}")
    print(
        f"expectation max_gap={float(np.max(report.gap))!r} allowed={float(np.min(report.allowed))!r} "
        f"expectation={'pass' if report.passed else 'FAIL'}"
    )
    return EXIT_OK if per_path_ok and report.passed else EXIT_NOCONV


def cmd_generate(args) -> int:
    if args.q >= args.n:
        raise UsageError("need q < n")
    system = gen_feasible_mixed(args.n, args.p, args.q, args.seed, args.margin)
    if args.violation_scale > 0:
        system = system.with_y0(gen_infeasible_start(system, args.seed, args.violation_scale))
    save_system(system, args.output)
    print(f"wrote n={system.n} p={system.p} q={system.q} system to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tskm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("project", help="repair the point in a problem file")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--naive", action="store_true", help="skip the null-space transform")
    _add_skm_flags(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("sweep", help="sweep delta or beta over generated instances")
    p.add_argument("--param", choices=["delta", "beta"], required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--dims", type=_int_list, required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--csv", required=True)
    p.add_argument("--violation-scale", type=float, default=100.0)
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_ns empty (byte-stable output)")
    _add_skm_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="compare solve modes on matched instances")
    p.add_argument("--dims", type=_int_list, required=True)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--modes", default="tskm,naive")
    p.add_argument("--csv", required=True)
    p.add_argument("--violation-scale", type=float, default=100.0)
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_ns empty (byte-stable output)")
    _add_skm_flags(p, variant=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gradcheck", help="check path derivatives against finite differences")
    p.add_argument("--input", required=True)
    p.add_argument("--paths", type=int, default=200)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--csv")
    p.add_argument("--variant", choices=[v.value for v in Variant], default="basic")
    _add_skm_flags(p, variant=False)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("generate", help="write a random feasible system with an infeasible start")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--violation-scale", type=float, default=100.0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "variant", "basic") != "basic" and args.command == "gradcheck":
        print(f"tskm: error: {UnsupportedVariant('gradcheck supports the basic variant only')}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ParseError, ValidationError, InconsistentEqualities, InfeasibleFullRank, ValueError) as exc:
        print(f"tskm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"tskm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
