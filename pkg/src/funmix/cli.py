"""Command-line surface: simulate / unmix / eval / prune.

Exit codes: 0 success, 1 usage error, 2 numerical or runtime error.  The
optional environment variable ``FUNMIX_THREADS`` caps BLAS worker
parallelism (default: all available cores); outputs are byte-identical for
identical inputs either way, timing lines in diagnostics aside.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
import time
from pathlib import Path

from .metrics import prune_library, sre
from .simulate import SimulationConfig, generate_dataset
from .solvers import AdmmParams, fasun, fclsu_admm, suns
from . import io as fio

__all__ = ["cli_dispatch", "main"]


class _UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funmix",
        description="Library-based hyperspectral unmixing: synthetic scenes, "
                    "ADMM solvers, evaluation, and library pruning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset bundle")
    sim.add_argument("--kind", choices=("purity", "dc1"), required=True)
    sim.add_argument("--pixels", type=int, help="pixel count (purity datasets)")
    sim.add_argument("--side", type=int, help="scene side length (dc1 datasets)")
    sim.add_argument("--endmembers", type=int, required=True, metavar="R")
    sim.add_argument("--rho", type=float, help="pixel purity level in (1/sqrt(R), 1]")
    sim.add_argument("--snr", type=float, help="target SNR in dB (omit for noiseless)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--library", required=True, metavar="PATH")
    sim.add_argument("--out", required=True, metavar="DIR")
    sim.set_defaults(func=_cmd_simulate)

    unmix = sub.add_parser("unmix", help="run a solver on a scene")
    unmix.add_argument("--method", choices=("fclsu", "fasun", "suns"), required=True)
    unmix.add_argument("--input", required=True, metavar="Y.fumx")
    unmix.add_argument("--library", metavar="D.fumx")
    unmix.add_argument("--endmember-matrix", metavar="E.fumx",
                       help="known endmember spectra (fclsu only)")
    unmix.add_argument("--r", type=int, help="number of endmembers (fasun/suns)")
    unmix.add_argument("--mu-a", type=float)
    unmix.add_argument("--mu-b1", type=float)
    unmix.add_argument("--mu-b2", type=float)
    unmix.add_argument("--lambda", dest="lam", type=float)
    unmix.add_argument("--outer", type=int, metavar="T")
    unmix.add_argument("--inner-a", type=int, metavar="T1")
    unmix.add_argument("--inner-b", type=int, metavar="T2")
    unmix.add_argument("--tol", type=float)
    unmix.add_argument("--profile", choices=("simulated", "real"), default="simulated")
    unmix.add_argument("--out", required=True, metavar="DIR")
    unmix.set_defaults(func=_cmd_unmix)

    ev = sub.add_parser("eval", help="print abundance SRE in dB")
    ev.add_argument("--true", dest="true_path", required=True, metavar="A.fumx")
    ev.add_argument("--est", dest="est_path", required=True, metavar="A.fumx")
    ev.set_defaults(func=_cmd_eval)

    pr = sub.add_parser("prune", help="drop library atoms closer than an angle floor")
    pr.add_argument("--library", required=True, metavar="D.fumx")
    pr.add_argument("--min-angle", type=float, default=4.44, metavar="DEG")
    pr.add_argument("--out", required=True, metavar="D_pruned.fumx")
    pr.set_defaults(func=_cmd_prune)

    return parser


def _cmd_simulate(args) -> int:
    if args.kind == "purity":
        if args.pixels is None:
            raise _UsageError("--pixels is required for --kind purity")
        if args.rho is None:
            raise _UsageError("--rho is required for --kind purity")
        n = args.pixels
    else:
        if args.side is None:
            raise _UsageError("--side is required for --kind dc1")
        n = args.side
    D = fio.read_matrix(args.library)
    config = SimulationConfig(kind=args.kind, n=n, r=args.endmembers,
                              rho=args.rho, snr_db=args.snr, seed=args.seed)
    bundle = generate_dataset(config, D)
    out = fio.write_bundle(args.out, bundle)
    print(f"wrote bundle to {out}")
    return 0


def _build_params(args, method: str) -> AdmmParams:
    overrides = {}
    for flag, field in (("mu_a", "mu_a"), ("mu_b1", "mu_b1"), ("mu_b2", "mu_b2"),
                        ("lam", "lam"), ("outer", "T"), ("inner_a", "T1"),
                        ("inner_b", "T2"), ("tol", "tol")):
        value = getattr(args, flag)
        if value is not None:
            overrides[field] = value
    return AdmmParams.for_profile(args.profile, method, **overrides)


def _cmd_unmix(args) -> int:
    method = args.method
    params = _build_params(args, method)
    Y = fio.read_matrix(args.input)
    started = time.perf_counter()
    if method == "fclsu":
        if args.endmember_matrix is None:
            raise _UsageError("--endmember-matrix is required for --method fclsu")
        E = fio.read_matrix(args.endmember_matrix)
        result = fclsu_admm(Y, E, params)
    else:
        if args.library is None:
            raise _UsageError(f"--library is required for --method {method}")
        if args.r is None:
            raise _UsageError(f"--r is required for --method {method}")
        D = fio.read_matrix(args.library)
        solver = fasun if method == "fasun" else suns
        result = solver(Y, D, args.r, params)
    elapsed = time.perf_counter() - started

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fio.write_matrix(out / "A_raw.fumx", result.A_raw)
    fio.write_matrix(out / "A_feasible.fumx", result.A_feasible)
    if result.B_hat is not None:
        fio.write_matrix(out / "B.fumx", result.B_hat)
    fio.write_matrix(out / "E.fumx", result.E_hat)
    _write_diagnostics(out / "diagnostics.txt", method, params, result, elapsed)
    print(f"wrote results to {out}")
    return 0


def _write_diagnostics(path: Path, method: str, params: AdmmParams, result, elapsed: float) -> None:
    diag = result.diagnostics
    res = diag.residuals
    lines = [
        f"method = {method}",
        f"iterations = {diag.iterations}",
        f"mu_a = {params.mu_a!r}",
        f"mu_b1 = {params.mu_b1!r}",
        f"mu_b2 = {params.mu_b2!r}",
        f"lambda = {params.lam!r}",
        f"asc_dev_max = {diag.asc_dev_max!r}",
        f"residual_a_split = {res.a_split!r}",
        f"residual_b_split = {'none' if res.b_split is None else repr(res.b_split)}",
        f"residual_db_split = {'none' if res.db_split is None else repr(res.db_split)}",
        f"wall_time_s = {elapsed!r}",
    ]
    if diag.objective_history:
        lines.append(f"objective_final = {diag.objective_history[-1]!r}")
    lines.extend(
        f"objective {i} {value!r}" for i, value in enumerate(diag.objective_history)
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_eval(args) -> int:
    A_true = fio.read_matrix(args.true_path)
    A_hat = fio.read_matrix(args.est_path)
    report = sre(A_true, A_hat)
    print(f"SRE (dB): {report.sre_db!r}")
    return 0


def _cmd_prune(args) -> int:
    D = fio.read_matrix(args.library)
    pruned, kept = prune_library(D, args.min_angle)
    fio.write_matrix(args.out, pruned)
    print(f"kept {len(kept)} of {D.shape[1]} atoms: {','.join(str(i) for i in kept)}")
    return 0


def _thread_cap():
    """Context manager honoring FUNMIX_THREADS (BLAS worker cap)."""
    raw = os.environ.get("FUNMIX_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        limit = int(raw)
        if limit < 1:
            raise ValueError
    except ValueError:
        print(f"warning: ignoring invalid FUNMIX_THREADS={raw!r}", file=sys.stderr)
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        print("warning: threadpoolctl unavailable, FUNMIX_THREADS ignored", file=sys.stderr)
        return contextlib.nullcontext()
    return threadpool_limits(limits=limit)


def cli_dispatch(argv) -> int:
    """Parse and run one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:  # argparse handles --help and usage errors by exiting
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        with _thread_cap():
            return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
