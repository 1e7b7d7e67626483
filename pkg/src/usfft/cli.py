"""Command line: run experiments, baselines, self-tests and post-processing.

Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 self-test failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import post as pp
from .config import ConfigError, ExperimentConfig
from .detect import Approximant, parse_archive, usfft, write_archive
from .freq import FormatError, nnz_partition
from .pde import Mesh, as_blackbox, sample_parameters

log = logging.getLogger("usfft")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3


class InputError(ValueError):
    """User input that cannot be processed (maps to exit code 1)."""


def _comment(cfg_hash: str, seed) -> str:
    return f"config={cfg_hash} seed={seed}"


def _sampler(model, periodization):
    return lambda rng, n: sample_parameters(model, rng, n, periodization)


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def _report_bundle(cfg: ExperimentConfig, app: Approximant, out: Path, summary: dict,
                   workers: int) -> dict:
    """Archive, CSVs and summary shared by ``run`` and ``baseline``."""
    model, mesh, per = cfg.model(), cfg.mesh(), cfg.periodization()
    chash, seed = cfg.config_hash(), cfg.seed
    comment = _comment(chash, seed)
    out.mkdir(parents=True, exist_ok=True)
    write_archive(out / "approximant.txt", app,
                  {"mesh": mesh.n, "seed": seed, "config": chash})
    values = pp.expectation(app)
    _write(out / "expectation.csv", pp.expectation_csv(values, mesh.nodes, comment))
    gsi = pp.gsi_by_nnz(app)
    sizes = {l: len(part) for l, part in nnz_partition(app.frequencies).items()}
    _write(out / "gsi.csv", pp.gsi_csv(gsi, mesh.nodes, sizes, comment))
    post_cfg = cfg.raw["post"]
    sampler = _sampler(model, per)
    reference = None
    if post_cfg["n_test"] > 0 or post_cfg["n_mc"] > 0:
        reference = as_blackbox(model, mesh, None, workers=workers)
    if post_cfg["n_test"] > 0:
        t0 = time.perf_counter()
        report = pp.error_report(app, reference, post_cfg["n_test"], seed + 1, sampler)
        log.info("error report: %.1f s", time.perf_counter() - t0)
        _write(out / "errors.csv", pp.errors_csv(report, mesh.nodes, comment))
        summary["errors"] = {"n_test": report.n_test, "max_err1": report.max_err1,
                             "max_err2": report.max_err2, "max_errinf": report.max_errinf}
    if post_cfg["n_mc"] > 0:
        mean, stderr = pp.mc_expectation(reference, post_cfg["n_mc"], seed + 2, sampler)
        _write(out / "expectation_mc.csv", pp.mc_csv(values, mean, stderr, mesh.nodes, comment))
        inside = np.abs(values - mean) <= 3 * stderr
        summary["mc"] = {"n_mc": post_cfg["n_mc"], "within_3_stderr": float(inside.mean())}
    if reference is not None:
        summary["reference_solves"] = reference.distinct
        reference.solver.close()
    summary["J_sizes"] = {str(l): n for l, n in sorted(sizes.items())}
    summary["config_hash"] = chash
    summary["seed"] = seed
    _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_run(args) -> int:
    cfg = _load(args)
    model, mesh, per = cfg.model(), cfg.mesh(), cfg.periodization()
    det = cfg.detection()
    out = Path(args.out or cfg.raw["output"])
    bb = as_blackbox(model, mesh, per, workers=args.workers)
    t0 = time.perf_counter()
    try:
        app = usfft(bb, det, per, nodes_xy=mesh.nodes)
    finally:
        bb.solver.close()
    elapsed = time.perf_counter() - t0
    info = app.info
    summary = {
        "command": "run",
        "distinct_solves": bb.distinct,
        "samples": info["samples"],
        "steps": info["steps"],
        "nI": info["nI"],
        "s": info["s"],
        "q": info["q"],
    }
    summary = _report_bundle(cfg, app, out, summary, args.workers)
    print(f"run: |I|={info['nI']} q={info['q']:.3f} solves={bb.distinct} "
          f"detection {elapsed:.1f} s -> {out}")
    if "errors" in summary:
        print(f"max err2={summary['errors']['max_err2']:.3e} "
              f"max errinf={summary['errors']['max_errinf']:.3e}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _load(args)
    model, mesh, per = cfg.model(), cfg.mesh(), cfg.periodization()
    d = model.d_y
    fset = pp.baseline_index_set(args.kind, args.N, d, args.q)
    if len(fset) == 0:
        raise InputError(f"index set {args.kind} with N={args.N} is empty; increase N")
    out = Path(args.out or cfg.raw["output"])
    bb = as_blackbox(model, mesh, per, workers=args.workers)
    try:
        app = pp.fixed_set_approximation(bb, fset, cfg.seed, per, nodes_xy=mesh.nodes)
    finally:
        bb.solver.close()
    summary = {"command": "baseline", "kind": args.kind, "N": args.N, "q": args.q,
               "distinct_solves": bb.distinct, "samples": app.info["samples"],
               "nI": len(fset), "lattices": app.info["lattices"]}
    _report_bundle(cfg, app, out, summary, args.workers)
    print(f"baseline {args.kind}: |I|={len(fset)} solves={bb.distinct} -> {out}")
    return EXIT_OK


def _read_archive(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return parse_archive(text)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def cmd_post(args) -> int:
    app, header = _read_archive(args.archive)
    nodes_xy = Mesh(int(header["mesh"])).nodes if "mesh" in header else None
    comment = _comment(header["config"], header["seed"]) if "config" in header and "seed" in header else None
    if args.what == "expectation":
        text = pp.expectation_csv(pp.expectation(app), nodes_xy, comment)
    elif args.what == "gsi":
        gsi = pp.gsi_by_nnz(app)
        sizes = {l: len(part) for l, part in nnz_partition(app.frequencies).items()}
        text = pp.gsi_csv(gsi, nodes_xy, sizes, comment)
    else:
        if not args.points:
            raise InputError("post evaluate needs --points FILE")
        try:
            pts = np.loadtxt(args.points, delimiter=",", ndmin=2, comments="#")
        except (OSError, ValueError) as exc:
            raise InputError(f"{args.points}: {exc}") from None
        values = app.evaluate(pts)
        rows = ["j,g,re,im"]
        for j in range(values.shape[1]):
            for g in range(values.shape[0]):
                z = values[g, j]
                rows.append(f"{j + 1},{g + 1},{float(z.real)!r},{float(z.imag)!r}")
        text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all
    results = run_all(seed=args.seed, inject_small=args.inject_small)
    failed = 0
    for name, passed, total, notes in results:
        status = "ok" if passed == total else "FAILED"
        print(f"{name}: {passed}/{total} passed {status}")
        for note in notes:
            print(f"  {note}")
        failed += passed != total
    return EXIT_OK if failed == 0 else EXIT_SELFTEST


def _load(args) -> ExperimentConfig:
    if not args.config:
        raise InputError("--config is required")
    return ExperimentConfig.load(args.config).with_seed(args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="usfft", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="experiment JSON file")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="solver processes (default: logical cores)")
        p.add_argument("--out", help="output directory or file")

    p = sub.add_parser("run", help="detect frequencies and write the report bundle")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", help="coefficients on an a-priori index set")
    common(p)
    p.add_argument("--kind", required=True, choices=pp.BASELINE_KINDS)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--q", type=int, default=1)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("post", help="recompute quantities from a stored approximant")
    p.add_argument("archive")
    p.add_argument("what", choices=("expectation", "gsi", "evaluate"))
    p.add_argument("--points", help="CSV of parameter points for 'evaluate'")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_post)

    p = sub.add_parser("selftest", help="exact-recovery and property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-small", action="store_true",
                   help="add a coefficient below the threshold to the recovery fixtures")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (ConfigError, FormatError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # runtime failures carry their step context in the message
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
