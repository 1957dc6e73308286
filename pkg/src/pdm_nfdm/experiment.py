"""Experiment configuration, orchestration and result records.

An experiment sweeps launch power (or received OSNR at a fixed power) for one
transmission scheme over one channel model. Every (sweep point, realization)
pair draws its own random stream from ``SeedSequence([master_seed, point,
realization])``, so records do not depend on scheduling or the worker count.
"""
from __future__ import annotations

import configparser
import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, NfdmError
from .fiber import (
    FieldState,
    FiberParams,
    dbm_to_watt,
    gamma_eff,
    noise_loading,
    normalization_scales,
    ssfm_propagate,
    watt_to_dbm,
)
from .metrics import ber_from_counts, evm, q_from_evm
from .pmd import aggregate_dgd, sample_pmd_realization
from .transceiver import (
    BurstConfig,
    burst_support,
    cd_compensate,
    dbp,
    demap_frame,
    equalize_spectrum,
    estimate_guard,
    frame_bursts,
    nfdm_modulate,
    nfdm_receive_spectrum,
    nfdm_spectrum,
    ofdm_demodulate,
    ofdm_modulate,
    pseudo_time,
    qhat_to_u,
    random_frames,
    split_bursts,
    train_equalizer,
    u_decode,
    apply_equalizer,
    SymbolFrame,
)

log = logging.getLogger(__name__)

MODES = ("nfdm", "ofdm", "ofdm+dbp")
MODELS = ("b2b", "lossless", "lossy", "transformed-lossless", "lossy+pmd")
DECODE_GAMMAS = ("eff", "plain")
THREADS_ENV = "NFDM_THREADS"
PS_PER_SQRT_KM = 1e-12 / math.sqrt(1e3)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep of one scheme over one channel model.

    Attributes
    ----------
    power_dbm : tuple of float
        Launch powers (burst average over all polarizations, see
        :meth:`BurstConfig.amplitude_for_power`).
    osnr_db : tuple of float, optional
        When given, noise is loaded at the receiver to each OSNR (0.1 nm
        reference bandwidth) and amplifier noise is switched off.
    n_taps : tuple of int
        Equalizer lengths evaluated on every realization. Empty disables the
        equalizer and the training burst.
    decode_gamma : str
        Kerr coefficient the NFT scales use on lossy links: ``"eff"`` for the
        path average, ``"plain"`` for the fiber value.
    """

    experiment_id: str = "experiment"
    mode: str = "nfdm"
    model: str = "lossy"
    link: FiberParams = field(default_factory=FiberParams)
    burst: BurstConfig = field(default_factory=BurstConfig)
    power_dbm: Tuple[float, ...] = (-3.0,)
    osnr_db: Optional[Tuple[float, ...]] = None
    n_bursts: int = 8
    n_realizations: int = 20
    master_seed: int = 1
    n_taps: Tuple[int, ...] = ()
    dbp_steps_per_span: int = 10
    step_size: float = 500.0
    decode_gamma: str = "eff"
    ase_noise: bool = True

    def __post_init__(self):
        object.__setattr__(self, "power_dbm", tuple(float(p) for p in self.power_dbm))
        if self.osnr_db is not None:
            object.__setattr__(self, "osnr_db", tuple(float(o) for o in self.osnr_db))
        object.__setattr__(self, "n_taps", tuple(int(n) for n in self.n_taps))

    @property
    def uses_equalizer(self) -> bool:
        return len(self.n_taps) > 0

    def sweep_points(self) -> List[Tuple[float, Optional[float]]]:
        if self.osnr_db is None:
            return [(p, None) for p in self.power_dbm]
        return [(p, o) for p in self.power_dbm for o in self.osnr_db]

    def channel(self) -> FiberParams:
        """Fiber actually simulated for the configured model."""
        if self.model in ("lossless",):
            return replace(self.link.lossless(), pmd_coeff=0.0)
        if self.model == "transformed-lossless":
            return replace(self.link.transformed_lossless(), pmd_coeff=0.0)
        if self.model == "lossy":
            return replace(self.link, pmd_coeff=0.0)
        return self.link

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# validation and the parameter table


def validate_config(cfg: ExperimentConfig, warn=log.warning) -> ExperimentConfig:
    """Check cross-field invariants and return the normalized config.

    Raises
    ------
    ConfigurationError
        One message per violated invariant, joined.
    """
    problems = []
    if cfg.mode not in MODES:
        problems.append(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.model not in MODELS:
        problems.append(f"model must be one of {MODELS}, got {cfg.model!r}")
    if cfg.decode_gamma not in DECODE_GAMMAS:
        problems.append(f"decode_gamma must be one of {DECODE_GAMMAS}")
    if not cfg.power_dbm:
        problems.append("power sweep is empty")
    if any(not math.isfinite(p) for p in cfg.power_dbm):
        problems.append("powers must be finite")
    if cfg.osnr_db is not None and (not cfg.osnr_db or any(math.isnan(o) for o in cfg.osnr_db)):
        problems.append("osnr sweep must be a non-empty list of numbers")
    if cfg.n_bursts < 1:
        problems.append("n_bursts must be >= 1")
    if cfg.n_realizations < 1:
        problems.append("n_realizations must be >= 1")
    if any(n < 1 for n in cfg.n_taps):
        problems.append("equalizer tap counts must be >= 1")
    if cfg.dbp_steps_per_span < 1:
        problems.append("dbp_steps_per_span must be >= 1")
    if not cfg.step_size > 0:
        problems.append("step_size must be positive")
    if cfg.model == "lossy+pmd" and cfg.step_size > cfg.link.section_length:
        problems.append("step_size must not exceed the PMD section length")
    if cfg.model == "lossy+pmd" and not cfg.uses_equalizer:
        problems.append("the lossy+pmd model needs at least one equalizer tap count")
    if cfg.mode != "nfdm" and cfg.burst.n_polarizations == 1 and cfg.model == "lossy+pmd":
        problems.append("single-polarization runs cannot use the PMD model")
    if problems:
        raise ConfigurationError("; ".join(problems))
    need, _ = estimate_guard(cfg.link.beta2, cfg.link.total_length, cfg.burst.baud_rate)
    if cfg.model != "b2b" and cfg.burst.guard_duration < need:
        warn(
            f"guard {cfg.burst.guard_duration * 1e9:.2f} ns is shorter than the dispersive "
            f"memory {need * 1e9:.2f} ns; bursts will interact"
        )
    return cfg


def parameter_table(cfg: ExperimentConfig) -> str:
    """Human-readable table of the resolved physical and normalized parameters."""
    link, burst = cfg.link, cfg.burst
    g_eff = gamma_eff(link.gamma, link.alpha, link.span_length)
    scales = decoding_scales(cfg)
    guard, with_margin = estimate_guard(link.beta2, link.total_length, burst.baud_rate)
    rows = [
        ("experiment", cfg.experiment_id),
        ("mode / model", f"{cfg.mode} / {cfg.model}"),
        ("alpha", f"{link.alpha_db_km:.4g} dB/km ({link.alpha:.4e} Np/m)"),
        ("beta2", f"{link.beta2 * 1e27:.4g} ps^2/km"),
        ("gamma", f"{link.gamma * 1e3:.4g} 1/(W km)"),
        ("gamma_eff", f"{g_eff * 1e3:.4g} 1/(W km)"),
        ("spans", f"{link.n_spans} x {link.span_length / 1e3:.4g} km"),
        ("D_PMD", f"{link.pmd_coeff / PS_PER_SQRT_KM:.4g} ps/sqrt(km)"),
        ("noise figure", f"{link.noise_figure_db:.4g} dB"),
        ("subcarriers", f"{burst.n_subcarriers} x {burst.modulation}"),
        ("burst / guard", f"{burst.burst_duration * 1e9:.4g} ns / {burst.guard_duration * 1e9:.4g} ns"),
        ("baud rate", f"{burst.baud_rate / 1e9:.4g} GBaud"),
        ("burst rate per pol", f"{burst.burst_bit_rate_per_pol / 1e9:.4g} Gbit/s"),
        ("effective rate", f"{burst.effective_bit_rate / 1e9:.4g} Gbit/s"),
        ("sample rate", f"{burst.sample_rate / 1e9:.4g} GHz"),
        ("dispersive memory", f"{guard * 1e9:.4g} ns ({with_margin * 1e9:.4g} ns with margin)"),
        ("T0 (time unit)", f"{scales.t0 * 1e12:.4g} ps"),
        ("A0 (amplitude unit)", f"{scales.a0:.4g} sqrt(W)"),
        ("Z0 (distance unit)", f"{scales.z0 / 1e3:.4g} km"),
        ("NFT samples", f"{burst.nft_samples}"),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def decoding_scales(cfg: ExperimentConfig):
    """Normalization used by the NFT transceiver for the configured model."""
    if cfg.model in ("lossy", "lossy+pmd"):
        return normalization_scales(cfg.link, use_gamma_eff=cfg.decode_gamma == "eff")
    return normalization_scales(cfg.channel())


# ---------------------------------------------------------------------------
# INI files


_LINK_KEYS = {
    "alpha_db_per_km": "alpha_db_km",
    "beta2_ps2_per_km": "beta2_ps2_km",
    "gamma_per_w_per_km": "gamma_per_w_km",
    "span_length_km": "span_km",
    "n_spans": "n_spans",
    "pmd_ps_per_sqrt_km": "pmd_ps_sqrt_km",
    "section_length_km": "section_km",
    "noise_figure_db": "noise_figure_db",
    "center_frequency_thz": "center_thz",
}

_BURST_KEYS = {
    "n_subcarriers": ("n_subcarriers", int, 1.0),
    "burst_duration_ns": ("burst_duration", float, 1e-9),
    "guard_duration_ns": ("guard_duration", float, 1e-9),
    "oversampling": ("oversampling", int, 1.0),
    "inft_guard_factor": ("inft_guard_factor", int, 1.0),
    "modulation": ("modulation", str, None),
    "n_polarizations": ("n_polarizations", int, 1.0),
    "u_map": ("u_map", str, None),
    "exact_inverse": ("exact_inverse", "bool", None),
}


def _float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _int_list(text: str) -> Tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from parsed INI sections.

    Sections ``[experiment]``, ``[link]`` and ``[burst]``; every key carries
    its unit in the name. ``preset`` in ``[experiment]`` starts from a named
    preset and the remaining keys override it.
    """
    try:
        exp = parser["experiment"] if parser.has_section("experiment") else {}
        base = ExperimentConfig()
        if "preset" in exp:
            base = preset(exp["preset"])[0]
        link_kw = {}
        if parser.has_section("link"):
            for key, value in parser["link"].items():
                if key not in _LINK_KEYS:
                    raise ConfigurationError(f"unknown [link] key {key!r}")
                link_kw[_LINK_KEYS[key]] = int(value) if key == "n_spans" else float(value)
        link = base.link
        if link_kw:
            current = dict(
                alpha_db_km=base.link.alpha_db_km,
                beta2_ps2_km=base.link.beta2 * 1e27,
                gamma_per_w_km=base.link.gamma * 1e3,
                span_km=base.link.span_length / 1e3,
                n_spans=base.link.n_spans,
                pmd_ps_sqrt_km=base.link.pmd_coeff / PS_PER_SQRT_KM,
                section_km=base.link.section_length / 1e3,
                noise_figure_db=base.link.noise_figure_db,
                center_thz=base.link.center_frequency / 1e12,
            )
            current.update(link_kw)
            link = FiberParams.from_engineering_units(**current)
        burst_kw = {}
        if parser.has_section("burst"):
            sec = parser["burst"]
            for key in sec:
                if key not in _BURST_KEYS:
                    raise ConfigurationError(f"unknown [burst] key {key!r}")
                name, kind, unit = _BURST_KEYS[key]
                if kind == "bool":
                    burst_kw[name] = sec.getboolean(key)
                elif kind is str:
                    burst_kw[name] = sec[key].strip()
                elif kind is int:
                    burst_kw[name] = int(sec[key])
                else:
                    burst_kw[name] = float(sec[key]) * unit
        burst = replace(base.burst, **burst_kw) if burst_kw else base.burst

        kw = dict(link=link, burst=burst)
        for key, value in exp.items():
            if key == "preset":
                continue
            if key == "power_dbm":
                kw["power_dbm"] = _float_list(value)
            elif key == "power_mw":
                mw = _float_list(value)
                if any(p <= 0 for p in mw):
                    raise ConfigurationError("power_mw values must be positive")
                kw["power_dbm"] = tuple(10 * math.log10(p) for p in mw)
            elif key == "osnr_db":
                kw["osnr_db"] = _float_list(value) if value.strip() else None
            elif key == "n_taps":
                kw["n_taps"] = _int_list(value)
            elif key in ("n_bursts", "n_realizations", "master_seed", "dbp_steps_per_span"):
                kw[key] = int(value)
            elif key == "n_pmd_realizations":
                kw["n_realizations"] = int(value)
            elif key == "step_size_m":
                kw["step_size"] = float(value)
            elif key == "ase_noise":
                kw["ase_noise"] = exp.getboolean(key) if hasattr(exp, "getboolean") else value == "true"
            elif key in ("experiment_id", "mode", "model", "decode_gamma"):
                kw[key] = value.strip()
            else:
                raise ConfigurationError(f"unknown [experiment] key {key!r}")
        for s in parser.sections():
            if s not in ("experiment", "link", "burst"):
                raise ConfigurationError(f"unknown section [{s}]")
        return replace(base, **kw)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad configuration value: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from exc
    return config_from_parser(parser)


# ---------------------------------------------------------------------------
# presets


def preset(name: str) -> List[ExperimentConfig]:
    """Named experiment families at full published scale (long runs)."""
    nfdm_powers = tuple(np.arange(-6.0, 7.5, 1.5))
    ofdm_powers = tuple(np.arange(-12.0, 1.5, 1.5))
    pmd_link = lambda d: FiberParams(pmd_coeff=d * PS_PER_SQRT_KM)
    if name == "fig3":
        osnr = tuple(np.arange(10.0, 26.0, 2.0))
        common = dict(power_dbm=(-3.1,), osnr_db=osnr, n_bursts=64, n_realizations=1, ase_noise=False)
        return [
            ExperimentConfig("fig3-b2b", model="b2b", **common),
            ExperimentConfig("fig3-lossless", model="lossless", **common),
            ExperimentConfig("fig3-lossy-gamma", model="lossy", decode_gamma="plain", **common),
            ExperimentConfig("fig3-lossy-gamma-eff", model="lossy", **common),
            ExperimentConfig("fig3-transformed-lossless", model="transformed-lossless", **common),
        ]
    if name == "fig4":
        powers = tuple(np.arange(-12.0, 6.0, 1.5))
        return [
            ExperimentConfig("fig4-pdm", power_dbm=powers, n_bursts=64, n_realizations=1),
            ExperimentConfig(
                "fig4-single",
                burst=BurstConfig(n_polarizations=1, inft_guard_factor=1),
                power_dbm=powers,
                n_bursts=64,
                n_realizations=1,
            ),
        ]
    if name == "fig5":
        return [
            ExperimentConfig("fig5-nfdm", power_dbm=nfdm_powers, n_realizations=120),
            ExperimentConfig("fig5-ofdm", mode="ofdm", power_dbm=ofdm_powers, n_realizations=120),
            ExperimentConfig("fig5-ofdm-dbp", mode="ofdm+dbp", power_dbm=ofdm_powers + nfdm_powers[5:], n_realizations=120),
        ]
    if name == "fig6":
        taps = (1, 2, 3, 4, 5, 7, 9, 13, 17)
        return [
            ExperimentConfig(
                f"fig6-dpmd-{d:g}",
                model="lossy+pmd",
                link=pmd_link(d),
                power_dbm=(0.5,),
                n_taps=taps,
                n_realizations=120,
            )
            for d in (0.0, 0.1, 0.2)
        ]
    if name == "fig7":
        return [
            ExperimentConfig("fig7-no-birefringence", power_dbm=nfdm_powers, n_realizations=120),
            ExperimentConfig(
                "fig7-dpmd-0", model="lossy+pmd", link=pmd_link(0.0), power_dbm=nfdm_powers, n_taps=(5,), n_realizations=120
            ),
            ExperimentConfig(
                "fig7-dpmd-0.2", model="lossy+pmd", link=pmd_link(0.2), power_dbm=nfdm_powers, n_taps=(5,), n_realizations=120
            ),
        ]
    raise ConfigurationError(f"unknown preset {name!r}; known: fig3, fig4, fig5, fig6, fig7")


PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig7")


# ---------------------------------------------------------------------------
# one realization


def realization_seed(master_seed: int, point: int, realization: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(point), int(realization)])


def _transmit(cfg: ExperimentConfig, frames: Sequence[SymbolFrame], amp: float, scales) -> FieldState:
    if cfg.mode == "nfdm":
        slots = [nfdm_modulate(f, cfg.burst, scales, amp) for f in frames]
    else:
        slots = [ofdm_modulate(f, cfg.burst, amp) for f in frames]
    return frame_bursts(slots)


def _channel(cfg: ExperimentConfig, tx: FieldState, rng, pmd_rng, osnr: Optional[float]):
    """Propagate; returns (rx field, pmd realization or None)."""
    pmd = None
    link = cfg.channel()
    if cfg.model == "b2b":
        rx = tx
    elif cfg.model in ("lossless", "transformed-lossless"):
        rx = ssfm_propagate(tx, link, step_size=cfg.step_size, amplify=False, noise=False)
    else:
        if cfg.model == "lossy+pmd":
            pmd = sample_pmd_realization(link, pmd_rng)
        noise = cfg.ase_noise and osnr is None
        rx = ssfm_propagate(tx, link, pmd=pmd, rng=rng, step_size=cfg.step_size, amplify=True, noise=noise)
    if osnr is not None:
        rx = noise_loading(rx, osnr, rng, signal_bandwidth=cfg.burst.baud_rate)
    return rx, pmd


def _ofdm_receive(cfg: ExperimentConfig, rx: FieldState) -> FieldState:
    link = cfg.channel()
    if cfg.model == "b2b":
        return rx
    if cfg.mode == "ofdm+dbp":
        return dbp(rx, link, cfg.dbp_steps_per_span, amplified=cfg.model in ("lossy", "lossy+pmd"))
    return cd_compensate(rx, link.beta2, link.total_length)


def _receive(cfg, rx_slots, scales) -> list:
    """Per-burst receiver output before equalization: spectra (NFDM) or sample blocks (OFDM)."""
    if cfg.mode == "nfdm":
        distance = 0.0 if cfg.model == "b2b" else cfg.link.total_length / scales.z0
        return [nfdm_receive_spectrum(s, cfg.burst, scales, distance) for s in rx_slots]
    return [s.stacked for s in rx_slots]


def _decode(cfg, frames, received, amp, scales, n_taps) -> List[SymbolFrame]:
    """Symbols of every burst; the first burst trains the equalizer when ``n_taps``."""
    burst = cfg.burst
    if cfg.mode == "nfdm":
        grid = burst.nft_grid(scales)
        spectra = received
        if n_taps:
            ref = pseudo_time(nfdm_spectrum(frames[0], burst, scales, amp), grid)
            eq = train_equalizer(ref, pseudo_time(spectra[0], grid), n_taps, burst_support(burst))
            spectra = [equalize_spectrum(eq, cs, grid) for cs in spectra]
        return [u_decode(qhat_to_u(cs, 1 - 1e-9, burst.u_map), burst, grid, amp / scales.a0) for cs in spectra]
    slots = received
    if n_taps:
        ref = ofdm_modulate(frames[0], burst, amp).stacked
        off = burst.burst_offset_in_slot()
        eq = train_equalizer(ref, slots[0], n_taps, slice(off, off + burst.samples_per_burst))
        slots = [apply_equalizer(eq, s) for s in slots]
    grid = burst.slot_grid()
    return [ofdm_demodulate(FieldState.from_stacked(s, grid), burst, amp) for s in slots]


def run_realization(cfg: ExperimentConfig, point: int, realization: int) -> List[dict]:
    """Records of one (sweep point, realization); one per equalizer length."""
    power, osnr = cfg.sweep_points()[point]
    seq = realization_seed(cfg.master_seed, point, realization)
    # separate streams so that models sharing a sweep point see the same bits and noise
    bits_rng, noise_rng, pmd_rng = (np.random.default_rng(s) for s in seq.spawn(3))
    base = dict(
        kind="realization",
        experiment_id=cfg.experiment_id,
        mode=cfg.mode,
        model=cfg.model,
        n_polarizations=cfg.burst.n_polarizations,
        point=point,
        realization=realization,
        seed=int(seq.generate_state(1)[0]),
        power_dbm=power,
        osnr_db=osnr,
    )
    taps_list = cfg.n_taps or (0,)
    try:
        scales = decoding_scales(cfg)
        amp = cfg.burst.amplitude_for_power(dbm_to_watt(power))
        n_frames = cfg.n_bursts + (1 if cfg.uses_equalizer else 0)
        frames = random_frames(n_frames, cfg.burst, bits_rng)
        tx = _transmit(cfg, frames, amp, scales)
        tx_power = tx.energy() / (n_frames * cfg.burst.burst_duration)
        rx, pmd = _channel(cfg, tx, noise_rng, pmd_rng, osnr)
        if cfg.mode != "nfdm":
            rx = _ofdm_receive(cfg, rx)
        received = _receive(cfg, split_bursts(rx, cfg.burst), scales)
        dgd = aggregate_dgd(pmd) if pmd is not None else None
    except NfdmError as exc:
        return [dict(base, n_taps=t or None, error=f"{type(exc).__name__}: {exc}") for t in taps_list]

    records = []
    skip = 1 if cfg.uses_equalizer else 0
    for taps in taps_list:
        rec = dict(base, n_taps=taps or None)
        try:
            decoded = _decode(cfg, frames, received, amp, scales, taps)
            tx_bits = np.concatenate([demap_frame(f, cfg.burst) for f in frames[skip:]])
            rx_bits = np.concatenate([demap_frame(f, cfg.burst) for f in decoded[skip:]])
            sent = np.concatenate([f.symbols[:, : cfg.burst.n_polarizations].ravel() for f in frames[skip:]])
            got = np.concatenate([f.symbols[:, : cfg.burst.n_polarizations].ravel() for f in decoded[skip:]])
            b = ber_from_counts(int(np.count_nonzero(tx_bits != rx_bits)), tx_bits.size)
            e = evm(sent, got)
            rec.update(
                bits=b.bits_compared,
                bit_errors=b.bit_errors,
                ber=b.ber,
                q_db=b.q_db,
                evm_db=e,
                q_evm_db=q_from_evm(e),
                tx_power_dbm=watt_to_dbm(tx_power),
                dgd_ps=None if dgd is None else dgd * 1e12,
                error=None,
            )
        except NfdmError as exc:
            rec.update(error=f"{type(exc).__name__}: {exc}")
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# aggregation


def aggregate(records: Iterable[dict]) -> List[dict]:
    """One record per (experiment, point, taps), pooling bits over realizations.

    A pure function of the realization records: the order of the input does
    not matter.
    """
    groups: Dict[tuple, List[dict]] = {}
    for r in records:
        if r.get("kind") != "realization":
            continue
        key = (r["experiment_id"], r["point"], r.get("n_taps"))
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], -1 if k[2] is None else k[2])):
        rs = sorted(groups[key], key=lambda r: r["realization"])
        ok = [r for r in rs if r.get("error") is None]
        first = rs[0]
        agg = dict(
            kind="aggregate",
            experiment_id=first["experiment_id"],
            mode=first["mode"],
            model=first["model"],
            n_polarizations=first["n_polarizations"],
            point=first["point"],
            power_dbm=first["power_dbm"],
            osnr_db=first["osnr_db"],
            n_taps=first.get("n_taps"),
            n_realizations=len(rs),
            n_failed=len(rs) - len(ok),
        )
        if ok:
            bits = sum(r["bits"] for r in ok)
            errors = sum(r["bit_errors"] for r in ok)
            b = ber_from_counts(errors, bits)
            mse = float(np.mean([10 ** (r["evm_db"] / 10) for r in ok]))
            e = 10 * math.log10(mse)
            agg.update(
                bits=bits,
                bit_errors=errors,
                ber=b.ber,
                ber_ci_low=b.ci_low,
                ber_ci_high=b.ci_high,
                q_db=b.q_db,
                evm_db=e,
                q_evm_db=q_from_evm(e),
                tx_power_dbm=float(np.mean([r["tx_power_dbm"] for r in ok])),
            )
        out.append(agg)
    return out


def best_q(rec: dict) -> Optional[float]:
    """BER-derived Q, falling back to the EVM estimate when no bit erred."""
    return rec.get("q_db") if rec.get("q_db") is not None else rec.get("q_evm_db")


# ---------------------------------------------------------------------------
# orchestration


def worker_count(requested: Optional[int] = None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {cap!r}") from exc
    return max(1, n)


def _run_task(args):
    cfg, point, realization = args
    return run_realization(cfg, point, realization)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None, progress=None) -> List[dict]:
    """All realization records followed by the per-point aggregates.

    Output order is fixed (point, realization, taps) whatever the pool size.
    """
    validate_config(cfg)
    tasks = [(cfg, p, r) for p in range(len(cfg.sweep_points())) for r in range(cfg.n_realizations)]
    n = min(worker_count(workers), len(tasks))
    results: List[List[dict]] = []
    if n <= 1:
        for t in tasks:
            results.append(_run_task(t))
            if progress:
                progress(len(results), len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            for res in pool.map(_run_task, tasks):
                results.append(res)
                if progress:
                    progress(len(results), len(tasks))
    records = [r for res in results for r in res]
    return records + aggregate(records)


def write_records(records: Iterable[dict], path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True, allow_nan=False) + "\n")


def read_records(path) -> List[dict]:
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}:{i}: not a JSON record ({exc})") from exc
    return out
