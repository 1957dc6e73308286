"""Figures and CSV tables from experiment records.

A plot spec is an INI file with one ``[plot NAME]`` section per figure::

    [plot fig5]
    kind = q_vs_power            ; q_vs_power | ber_vs_osnr | q_vs_taps
    experiments = fig5-nfdm, fig5-ofdm
    power_dbm = 0.5              ; optional filter, q_vs_taps only

Each section produces ``NAME.svg`` and ``NAME.csv`` in the output directory.
Only aggregate records are plotted.
"""
from __future__ import annotations

import configparser
import csv
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigurationError  # noqa: E402
from .experiment import best_q  # noqa: E402

KINDS = {
    # kind: (x field, y label)
    "q_vs_power": ("power_dbm", "Q [dB]"),
    "ber_vs_osnr": ("osnr_db", "BER"),
    "q_vs_taps": ("n_taps", "Q [dB]"),
}
X_LABELS = {"power_dbm": "launch power [dBm]", "osnr_db": "OSNR [dB / 0.1 nm]", "n_taps": "equalizer taps"}


@dataclass(frozen=True)
class PlotSpec:
    name: str
    kind: str
    experiments: Tuple[str, ...]
    power_dbm: Optional[float] = None


def load_plot_spec(path) -> List[PlotSpec]:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read plot spec {path}: {exc}") from exc
    specs = []
    for section in parser.sections():
        head, _, name = section.partition(" ")
        if head != "plot" or not name.strip():
            raise ConfigurationError(f"plot spec sections must be named [plot NAME], got [{section}]")
        sec = parser[section]
        kind = sec.get("kind", "").strip()
        if kind not in KINDS:
            raise ConfigurationError(f"[{section}] kind must be one of {sorted(KINDS)}")
        exps = tuple(e.strip() for e in sec.get("experiments", "").split(",") if e.strip())
        if not exps:
            raise ConfigurationError(f"[{section}] lists no experiments")
        power = sec.getfloat("power_dbm") if "power_dbm" in sec else None
        specs.append(PlotSpec(name.strip(), kind, exps, power))
    if not specs:
        raise ConfigurationError(f"{path}: no [plot NAME] sections")
    return specs


def _y_value(rec: dict, kind: str) -> Optional[float]:
    if kind == "ber_vs_osnr":
        return rec.get("ber")
    return best_q(rec)


def select_curves(records: Sequence[dict], spec: PlotSpec) -> Dict[str, List[tuple]]:
    """``{experiment_id: [(x, y, ci_low, ci_high), ...]}`` sorted by x; missing y values dropped."""
    xfield = KINDS[spec.kind][0]
    curves: Dict[str, List[tuple]] = {}
    for r in records:
        if r.get("kind") != "aggregate" or r.get("experiment_id") not in spec.experiments:
            continue
        if spec.power_dbm is not None and abs(r.get("power_dbm", float("nan")) - spec.power_dbm) > 1e-9:
            continue
        x, y = r.get(xfield), _y_value(r, spec.kind)
        if x is None or y is None:
            continue
        curves.setdefault(r["experiment_id"], []).append((x, y, r.get("ber_ci_low"), r.get("ber_ci_high")))
    return {k: sorted(v) for k, v in curves.items()}


def emit_plots(records: Sequence[dict], specs: Sequence[PlotSpec], out_dir=".") -> List[str]:
    """Write one SVG and one CSV per spec; returns the written paths.

    Raises
    ------
    ConfigurationError
        When a spec selects no data points (nothing is written for it).
    """
    written = []
    os.makedirs(out_dir, exist_ok=True)
    for spec in specs:
        curves = select_curves(records, spec)
        if not curves:
            raise ConfigurationError(f"plot {spec.name!r} selects no aggregate records")
        xfield, ylabel = KINDS[spec.kind]
        csv_path = os.path.join(out_dir, f"{spec.name}.csv")
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["experiment_id", xfield, "ber" if spec.kind == "ber_vs_osnr" else "q_db", "ber_ci_low", "ber_ci_high"])
            for exp in spec.experiments:
                for row in curves.get(exp, []):
                    w.writerow([exp, *row])
        fig, ax = plt.subplots(figsize=(5, 3.6))
        for exp in spec.experiments:
            pts = curves.get(exp)
            if not pts:
                continue
            xs, ys = [p[0] for p in pts], [p[1] for p in pts]
            ax.plot(xs, ys, marker="o", label=exp)
        if spec.kind == "ber_vs_osnr":
            ax.set_yscale("log")
        ax.set_xlabel(X_LABELS[xfield])
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        svg_path = os.path.join(out_dir, f"{spec.name}.svg")
        fig.savefig(svg_path, format="svg")
        plt.close(fig)
        written += [svg_path, csv_path]
    return written
