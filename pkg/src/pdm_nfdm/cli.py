"""Command line entry point ``pdm-nfdm``.

Verbs::

    pdm-nfdm run <config.ini | preset> [--out records.jsonl] [--workers N]
    pdm-nfdm validate <config.ini | preset>
    pdm-nfdm plot <records.jsonl> <plots.ini> [--out-dir DIR]
    pdm-nfdm nft roundtrip <signal-file> [--first-order]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from .errors import ConfigurationError, NfdmError, NumericalError
from .experiment import (
    PRESETS,
    load_config,
    parameter_table,
    preset,
    read_records,
    run_experiment,
    validate_config,
    write_records,
)
from .fiber import FiberParams, FieldState, normalization_scales
from .nft import DualPolSignal, inverse_nft, nft_spectrum

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("pdm_nfdm")


def _configs(target: str):
    if not os.path.exists(target) and target in PRESETS:
        return preset(target)
    return [load_config(target)]


def cmd_validate(args) -> int:
    for cfg in _configs(args.config):
        validate_config(cfg, warn=lambda msg: print(f"warning: {msg}"))
        print(parameter_table(cfg))
        print()
    return EXIT_OK


def cmd_run(args) -> int:
    configs = _configs(args.config)
    for cfg in configs:
        validate_config(cfg, warn=lambda msg: print(f"warning: {msg}", file=sys.stderr))
    out = args.out or os.path.splitext(os.path.basename(args.config))[0] + ".jsonl"
    records = []
    for cfg in configs:
        progress = None
        if not args.quiet:
            progress = lambda done, total, name=cfg.experiment_id: print(
                f"{name}: {done}/{total}", file=sys.stderr
            )
        records += run_experiment(cfg, workers=args.workers, progress=progress)
    write_records(records, out)
    failed = sum(1 for r in records if r["kind"] == "realization" and r.get("error"))
    print(f"wrote {len(records)} records to {out} ({failed} failed realizations)")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import emit_plots, load_plot_spec

    records = read_records(args.records)
    for path in emit_plots(records, load_plot_spec(args.spec), args.out_dir):
        print(path)
    return EXIT_OK


def cmd_nft_roundtrip(args) -> int:
    """Forward NFT, inverse NFT and forward again; prints both relative errors."""
    from .signal_io import read_signal

    sig = read_signal(args.signal)
    if isinstance(sig, FieldState):
        scales = normalization_scales(FiberParams())
        grid = type(sig.grid)(sig.grid.t_start / scales.t0, sig.grid.n_samples, sig.grid.dt / scales.t0)
        sig = DualPolSignal(sig.a1 / scales.a0, sig.a2 / scales.a0, grid)
    cs = nft_spectrum(sig)
    back = inverse_nft(cs, sig.grid, exact_step=not args.first_order)
    cs2 = nft_spectrum(back)
    t_err = np.linalg.norm(back.stacked - sig.stacked) / max(np.linalg.norm(sig.stacked), 1e-300)
    s_err = np.linalg.norm(cs2.stacked - cs.stacked) / max(np.linalg.norm(cs.stacked), 1e-300)
    print(f"samples            {sig.grid.n_samples}")
    print(f"energy             {sig.energy():.6g}")
    print(f"time-domain error  {t_err:.3e}")
    print(f"spectral error     {s_err:.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdm-nfdm", description="PDM-NFDM / OFDM link simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run an experiment config or preset")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config and print its parameter table")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    pl = sub.add_parser("plot", help="render plots from records")
    pl.add_argument("records")
    pl.add_argument("spec")
    pl.add_argument("--out-dir", default=".")
    pl.set_defaults(func=cmd_plot)

    n = sub.add_parser("nft", help="NFT debugging tools")
    nsub = n.add_subparsers(dest="nft_verb", required=True)
    rt = nsub.add_parser("roundtrip", help="NFT -> INFT -> NFT of a signal file")
    rt.add_argument("signal")
    rt.add_argument("--first-order", action="store_true", help="use the first-order layer-peeling step")
    rt.set_defaults(func=cmd_nft_roundtrip)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigurationError, NfdmError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
