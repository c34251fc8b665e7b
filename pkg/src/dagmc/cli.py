"""Command-line entry point: ``dagmc model.model [override.model ...] [-e TEXT ...]``."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .build import prepare
from .errors import DagmcError
from .io import format_report, open_sink
from .modelang import merge_overrides, parse_model, parse_model_file
from .sampler import run, trace_columns


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dagmc",
        description="Adaptive Metropolis-within-Gibbs sampling of a graphical model.",
    )
    p.add_argument("models", nargs="+", help="model files; later files override earlier ones")
    p.add_argument("-e", "--eval", dest="fragments", action="append", default=[], metavar="TEXT",
                   help="model-language fragment applied after all files (repeatable)")
    p.add_argument("--seed", type=int, help="random seed (overrides para.seed)")
    p.add_argument("--out", help="trace file; .csv for text, anything else for binary")
    p.add_argument("--thin", type=int, help="keep every THIN-th post-burn-in sweep in the trace")
    p.add_argument("--niter", type=int, help="post-burn-in sweeps (overrides para.niter)")
    p.add_argument("--nburn", type=int, help="burn-in sweeps (overrides para.nburn)")
    p.add_argument("--chains", type=int, default=1, help="independent chains with seeds seed, seed+1, ...")
    return p


def load_model(paths, fragments):
    files = []
    for path in paths:
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        files.append(parse_model_file(path))
    files += [parse_model(text, source="<-e>") for text in fragments]
    return merge_overrides(files[0], files[1:])


def chain_path(path, index, nchains):
    if path is None or nchains == 1:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}.{index + 1}{ext}"


def run_chain(paths, fragments, overrides, outfile, thin):
    """Build and run one chain; returns the report.  Picklable for worker processes."""
    prepared = prepare(load_model(paths, fragments), **overrides)
    cfg = prepared.config
    outfile = outfile or cfg.outfile
    sinks = []
    if outfile:
        sinks.append(open_sink(outfile, trace_columns(prepared.graph, prepared.functional), thin or cfg.thin))
    try:
        return run(prepared.graph, prepared.blocks, cfg, prepared.functional, sinks)
    finally:
        for s in sinks:
            s.close()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.chains < 1:
        print("error: --chains must be at least 1", file=sys.stderr)
        return 2
    try:
        base_cfg = prepare(load_model(args.models, args.fragments),
                           niter=args.niter, nburn=args.nburn, thin=args.thin).config
        seed = base_cfg.seed if args.seed is None else args.seed
        outfile = args.out or base_cfg.outfile
        jobs = []
        for i in range(args.chains):
            overrides = dict(niter=args.niter, nburn=args.nburn, thin=args.thin, seed=seed + i)
            jobs.append((args.models, args.fragments, overrides, chain_path(outfile, i, args.chains), args.thin))
        if args.chains == 1:
            reports = [run_chain(*jobs[0])]
        else:
            with ProcessPoolExecutor(max_workers=min(args.chains, os.cpu_count() or 1)) as pool:
                reports = list(pool.map(run_chain, *zip(*jobs)))
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc.args[0]}", file=sys.stderr)
        return 1
    except DagmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for i, report in enumerate(reports):
        if args.chains > 1:
            print(f"Chain {i + 1} (seed {seed + i}):")
        sys.stdout.write(format_report(report))
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
    if args.chains > 1 and reports[0].functional_average is not None:
        pooled = np.mean([r.functional_average for r in reports], axis=0)
        print("Pooled functional average = [ " + " ".join(f"{v:.6f}" for v in pooled) + " ]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
