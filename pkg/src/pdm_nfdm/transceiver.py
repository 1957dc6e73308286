"""TX/RX digital signal processing for PDM-NFDM and PDM-OFDM.

Both schemes share the same subcarrier multiplexing. OFDM places the
subcarriers in the physical spectrum of a burst. NFDM builds the same burst in
a "pseudo-time" domain, maps it to the nonlinear-frequency grid with the
linear (low-power) limit of the scattering map, and warps the U domain onto
the continuous spectrum (see :func:`u_to_qhat`) before the inverse NFT. At low
power the two transmitters therefore produce the same waveform.

Every burst is centered in its slot of ``burst + guard`` duration. NFT
windows are centered on the slot, with ``t = 0`` at the slot center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DivergenceError, DomainError, FramingError, IllConditionedTrainingError
from .fiber import (
    KERR_AVERAGE,
    FieldState,
    FiberParams,
    NormalizationScales,
    _split_step_segment,
    angular_frequencies,
)
from .nft import (
    A_FLOOR,
    ContinuousSpectrum,
    DualPolSignal,
    TimeGrid,
    forward_nft,
    inverse_nft,
    propagate_spectrum,
    scattering_to_spectrum,
)

BITS_PER_SYMBOL = {"qam16": 4}
U_MAPS = ("saturating", "energy")
GUARD_MARGIN = 1.2

# Gray-coded 16-QAM: two bits per axis, levels -3, -1, 1, 3
_GRAY_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0])  # index = 2*b0 + b1
_QAM16_SCALE = 1.0 / math.sqrt(10.0)


@dataclass(frozen=True)
class BurstConfig:
    """Burst layout shared by the OFDM and NFDM transceivers.

    Attributes
    ----------
    n_subcarriers : int
    burst_duration, guard_duration : float
        Seconds.
    oversampling : int
        Simulation sample rate as a multiple of the occupied bandwidth.
    inft_guard_factor : int
        NFT window length in slots; the slot is zero padded symmetrically.
    modulation : str
    n_polarizations : int
        1 transmits on the first polarization only.
    u_map : str
        U-domain to continuous-spectrum map, see :func:`u_to_qhat`.
    exact_inverse : bool
        Use the exact Ablowitz-Ladik step inversion in the NFDM transmitter
        (see :func:`pdm_nfdm.nft.inverse_nft`).
    """

    n_subcarriers: int = 112
    burst_duration: float = 2e-9
    guard_duration: float = 18e-9
    oversampling: int = 4
    inft_guard_factor: int = 2
    modulation: str = "qam16"
    n_polarizations: int = 2
    u_map: str = "energy"
    exact_inverse: bool = True

    def __post_init__(self):
        if self.modulation not in BITS_PER_SYMBOL:
            raise ConfigurationError(f"unknown modulation {self.modulation!r}")
        if self.n_subcarriers < 1 or self.oversampling < 1 or self.inft_guard_factor < 1:
            raise ConfigurationError("n_subcarriers, oversampling and inft_guard_factor must be >= 1")
        if self.n_polarizations not in (1, 2):
            raise ConfigurationError("n_polarizations must be 1 or 2")
        _check_map(self.u_map)
        if not (self.burst_duration > 0 and self.guard_duration >= 0):
            raise ConfigurationError("burst duration must be positive and guard non-negative")
        for name, dur in [("burst", self.burst_duration), ("guard", self.guard_duration)]:
            n = dur * self.sample_rate
            if abs(n - round(n)) > 1e-6:
                raise ConfigurationError(f"{name} duration is not an integer number of samples")

    @property
    def bits_per_symbol(self) -> int:
        return BITS_PER_SYMBOL[self.modulation]

    @property
    def symbol_duration(self) -> float:
        """Slot length: burst plus guard."""
        return self.burst_duration + self.guard_duration

    @property
    def baud_rate(self) -> float:
        return self.n_subcarriers / self.burst_duration

    @property
    def sample_rate(self) -> float:
        return self.oversampling * self.baud_rate

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def samples_per_burst(self) -> int:
        return int(round(self.burst_duration * self.sample_rate))

    @property
    def samples_per_slot(self) -> int:
        return int(round(self.symbol_duration * self.sample_rate))

    @property
    def nft_samples(self) -> int:
        return self.inft_guard_factor * self.samples_per_slot

    @property
    def bits_per_burst(self) -> int:
        return self.n_subcarriers * self.bits_per_symbol * self.n_polarizations

    @property
    def burst_bit_rate_per_pol(self) -> float:
        return self.baud_rate * self.bits_per_symbol

    @property
    def effective_bit_rate(self) -> float:
        return self.bits_per_burst / self.symbol_duration

    def burst_offset_in_slot(self) -> int:
        return (self.samples_per_slot - self.samples_per_burst) // 2

    def slot_offset_in_nft(self) -> int:
        return (self.nft_samples - self.samples_per_slot) // 2

    def slot_grid(self) -> TimeGrid:
        """Physical grid of one slot, centered so the NFT window shares its origin."""
        t_start = (self.slot_offset_in_nft() - self.nft_samples // 2) * self.dt
        return TimeGrid(t_start, self.samples_per_slot, self.dt)

    def nft_grid(self, scales: NormalizationScales) -> TimeGrid:
        """Normalized NFT window, ``t = 0`` at sample ``nft_samples // 2``."""
        return TimeGrid.centered(self.nft_samples, self.dt / scales.t0)

    def subcarrier_bins(self) -> np.ndarray:
        """DFT bins of the subcarriers within a burst, ordered from lowest frequency."""
        k = np.arange(self.n_subcarriers) - self.n_subcarriers // 2
        return np.mod(k, self.samples_per_burst)

    def amplitude_for_power(self, power: float) -> float:
        """Per-symbol amplitude for launch power ``power`` (W, all polarizations).

        Launch power is the mean power of the linear (OFDM) burst over the
        burst duration, excluding the guard. For NFDM the same amplitude is
        used in the U domain, so both schemes share one power axis.
        """
        return math.sqrt(power / (self.n_polarizations * self.n_subcarriers))


@dataclass
class SymbolFrame:
    """Symbols of one burst: ``symbols[k, p]`` for subcarrier k and polarization p."""

    symbols: np.ndarray
    bits: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# constellation


def qam16_constellation() -> np.ndarray:
    """All 16 points, indexed by the 4-bit Gray label ``b0 b1 b2 b3``."""
    labels = np.arange(16)
    bits = (labels[:, None] >> np.arange(3, -1, -1)) & 1
    return _qam16_map(bits.ravel()).reshape(16)


def _qam16_map(bits: np.ndarray) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64).reshape(-1, 4)
    re = _GRAY_LEVELS[2 * b[:, 0] + b[:, 1]]
    im = _GRAY_LEVELS[2 * b[:, 2] + b[:, 3]]
    return (re + 1j * im) * _QAM16_SCALE


def _axis_bits(x: np.ndarray) -> np.ndarray:
    """Hard decision on one axis (levels -3..3 unscaled) to two Gray bits."""
    level = np.clip(np.floor(x / 2.0) + 2, 0, 3).astype(np.int64)  # 0..3 for -3,-1,1,3
    b0 = (level >= 2).astype(np.uint8)
    b1 = ((level == 1) | (level == 2)).astype(np.uint8)
    return np.stack([b0, b1], axis=-1)


def qam16_demap(symbols: np.ndarray) -> np.ndarray:
    """Minimum-distance decision and Gray demapping, 4 bits per symbol."""
    s = np.asarray(symbols).ravel() / _QAM16_SCALE
    return np.concatenate([_axis_bits(s.real), _axis_bits(s.imag)], axis=-1).reshape(-1).astype(np.uint8)


def qam16_decide(symbols: np.ndarray) -> np.ndarray:
    """Nearest constellation point of every symbol."""
    s = np.asarray(symbols) / _QAM16_SCALE
    snap = lambda x: np.clip(2 * np.floor(x / 2.0) + 1, -3, 3)
    return (snap(s.real) + 1j * snap(s.imag)) * _QAM16_SCALE


def map_bits(bits: np.ndarray, config: BurstConfig) -> SymbolFrame:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size != config.bits_per_burst:
        raise FramingError(f"expected {config.bits_per_burst} bits per burst, got {bits.size}")
    syms = _qam16_map(bits).reshape(config.n_polarizations, config.n_subcarriers).T
    out = np.zeros((config.n_subcarriers, 2), complex)
    out[:, : config.n_polarizations] = syms
    return SymbolFrame(out, bits)


def demap_frame(frame: SymbolFrame, config: BurstConfig) -> np.ndarray:
    syms = np.asarray(frame.symbols)
    if syms.shape != (config.n_subcarriers, 2):
        raise FramingError(f"frame must have shape ({config.n_subcarriers}, 2)")
    return qam16_demap(syms[:, : config.n_polarizations].T)


def random_frames(n_bursts: int, config: BurstConfig, rng: np.random.Generator) -> List[SymbolFrame]:
    return [map_bits(rng.integers(0, 2, config.bits_per_burst, dtype=np.uint8), config) for _ in range(n_bursts)]


# ---------------------------------------------------------------------------
# subcarrier multiplexing


def _burst_waveform(frame: SymbolFrame, config: BurstConfig) -> np.ndarray:
    """Unit-amplitude burst ``sum_k X_k exp(2j pi k t / T0)`` sampled over T0, shape (2, n)."""
    n = config.samples_per_burst
    spec = np.zeros((2, n), complex)
    spec[:, config.subcarrier_bins()] = np.asarray(frame.symbols).T
    return np.fft.ifft(spec, axis=-1) * n


def _burst_symbols(burst: np.ndarray, config: BurstConfig) -> np.ndarray:
    spec = np.fft.fft(burst, axis=-1) / config.samples_per_burst
    return spec[:, config.subcarrier_bins()].T


def ofdm_modulate(frame: SymbolFrame, config: BurstConfig, amplitude: float = 1.0) -> FieldState:
    """One OFDM slot: zero-padded inverse DFT burst centered in its guard interval."""
    a = np.zeros((2, config.samples_per_slot), complex)
    off = config.burst_offset_in_slot()
    a[:, off : off + config.samples_per_burst] = amplitude * _burst_waveform(frame, config)
    return FieldState.from_stacked(a, config.slot_grid())


def ofdm_demodulate(slot: FieldState, config: BurstConfig, amplitude: float = 1.0) -> SymbolFrame:
    if slot.grid.n_samples != config.samples_per_slot:
        raise FramingError("slot length does not match the burst configuration")
    off = config.burst_offset_in_slot()
    burst = slot.stacked[:, off : off + config.samples_per_burst] / amplitude
    return SymbolFrame(_burst_symbols(burst, config))


# ---------------------------------------------------------------------------
# U domain


def born_forward(u: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Linear-limit spectrum ``U(lam) = -conj(sum_k u_k dt exp(2j lam (t_k + dt/2)))``.

    This is the first-order (small signal) approximation of ``qhat`` of the
    pseudo-time signal ``u`` on the paired spectral grid.
    """
    n = grid.n_samples
    lam = grid.spectral_grid().lambdas
    sign = (-1.0) ** np.arange(n)
    s = np.fft.ifft(u * sign, axis=-1) * n * np.exp(2j * lam * (grid.t_start + grid.dt / 2))
    return -np.conj(s * grid.dt)


def born_inverse(big_u: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Exact inverse of :func:`born_forward`."""
    n = grid.n_samples
    lam = grid.spectral_grid().lambdas
    sign = (-1.0) ** np.arange(n)
    s = -np.conj(big_u) / grid.dt * np.exp(-2j * lam * (grid.t_start + grid.dt / 2))
    return np.fft.fft(s, axis=-1) / n * sign


def u_encode(frame: SymbolFrame, config: BurstConfig, grid: TimeGrid, amplitude: float = 1.0) -> ContinuousSpectrum:
    """Multiplex the frame in pseudo-time and map it onto the nonlinear-frequency grid.

    ``amplitude`` is the normalized per-symbol amplitude. The returned pair
    holds U (not qhat) on ``grid.spectral_grid()``.
    """
    if grid.n_samples != config.nft_samples:
        raise ConfigurationError("NFT grid does not match the burst configuration")
    u = np.zeros((2, grid.n_samples), complex)
    off = config.slot_offset_in_nft() + config.burst_offset_in_slot()
    u[:, off : off + config.samples_per_burst] = amplitude * _burst_waveform(frame, config)
    big_u = born_forward(u, grid)
    return ContinuousSpectrum(big_u[0], big_u[1], grid.spectral_grid())


def u_decode(big_u: ContinuousSpectrum, config: BurstConfig, grid: TimeGrid, amplitude: float = 1.0) -> SymbolFrame:
    if not big_u.grid.is_paired_with(grid) or grid.n_samples != config.nft_samples:
        raise ConfigurationError("U-domain grid does not match the burst configuration")
    u = born_inverse(big_u.stacked, grid) / amplitude
    return SymbolFrame(_burst_symbols(u[:, burst_support(config)], config))


def _check_map(mapping: str) -> None:
    if mapping not in U_MAPS:
        raise ConfigurationError(f"unknown U-domain map {mapping!r}; expected one of {U_MAPS}")


def u_to_qhat(big_u: ContinuousSpectrum, mapping: str = "saturating") -> ContinuousSpectrum:
    """Map U onto the continuous spectrum, keeping the phase of U.

    ``"saturating"`` uses ``|qhat|^2 = 1 - exp(-|U|^2)``, which keeps
    ``|qhat| < 1``. ``"energy"`` uses ``|qhat|^2 = exp(|U|^2) - 1``, for which
    the focusing energy identity makes the single-polarization signal energy
    exactly proportional to the U-domain energy.
    """
    _check_map(mapping)
    u = big_u.stacked
    if mapping == "saturating":
        mag = np.sqrt(-np.expm1(-np.abs(u) ** 2))
    else:
        mag = np.sqrt(np.expm1(np.abs(u) ** 2))
    q = mag * np.exp(1j * np.angle(u))
    return ContinuousSpectrum(q[0], q[1], big_u.grid)


def qhat_to_u(
    cs: ContinuousSpectrum, saturate: Optional[float] = None, mapping: str = "saturating"
) -> ContinuousSpectrum:
    """Inverse of :func:`u_to_qhat`.

    The saturating map requires ``|qhat| < 1``. With ``saturate`` set,
    magnitudes at or above 1 are clipped to ``saturate`` instead of raising
    (used at the receiver, where noise can push samples outside the
    invertible region). The energy map is defined everywhere.
    """
    _check_map(mapping)
    q = cs.stacked
    mag = np.abs(q)
    if mapping == "energy":
        u = np.sqrt(np.log1p(mag**2)) * np.exp(1j * np.angle(q))
        return ContinuousSpectrum(u[0], u[1], cs.grid)
    if np.any(mag >= 1):
        if saturate is None:
            p, k = np.unravel_index(int(np.argmax(mag)), mag.shape)
            raise DomainError(f"|qhat_{p + 1}| = {mag[p, k]:.6f} >= 1 at spectral index {k}")
        mag = np.minimum(mag, saturate)
    u = np.sqrt(-np.log1p(-(mag**2))) * np.exp(1j * np.angle(q))
    return ContinuousSpectrum(u[0], u[1], cs.grid)


# ---------------------------------------------------------------------------
# NFDM transmitter / receiver


def _pad_slot(slot: FieldState, config: BurstConfig) -> np.ndarray:
    if slot.grid.n_samples != config.samples_per_slot:
        raise FramingError("slot length does not match the burst configuration")
    a = np.zeros((2, config.nft_samples), complex)
    off = config.slot_offset_in_nft()
    a[:, off : off + config.samples_per_slot] = slot.stacked
    return a


def nfdm_spectrum(
    frame: SymbolFrame, config: BurstConfig, scales: NormalizationScales, amplitude: float = 1.0
) -> ContinuousSpectrum:
    """Continuous spectrum the transmitter assigns to ``frame`` (also the training reference)."""
    grid = config.nft_grid(scales)
    return u_to_qhat(u_encode(frame, config, grid, amplitude / scales.a0), config.u_map)


def nfdm_modulate(
    frame: SymbolFrame, config: BurstConfig, scales: NormalizationScales, amplitude: float = 1.0
) -> FieldState:
    """One NFDM slot. ``amplitude`` is the physical per-symbol amplitude in sqrt(W)."""
    grid = config.nft_grid(scales)
    q = inverse_nft(nfdm_spectrum(frame, config, scales, amplitude), grid, exact_step=config.exact_inverse)
    off = config.slot_offset_in_nft()
    a = q.stacked[:, off : off + config.samples_per_slot] * scales.a0
    return FieldState.from_stacked(a, config.slot_grid())


def nfdm_receive_spectrum(
    slot: FieldState, config: BurstConfig, scales: NormalizationScales, link_distance: float
) -> ContinuousSpectrum:
    """Slot -> continuous spectrum with the channel filter over ``link_distance`` (normalized) removed."""
    a = _pad_slot(slot, config)
    if config.n_polarizations == 1:
        a[1] = 0
    grid = config.nft_grid(scales)
    sig = DualPolSignal(a[0] / scales.a0, a[1] / scales.a0, grid)
    cs = scattering_to_spectrum(forward_nft(sig), A_FLOOR)
    return propagate_spectrum(cs, -link_distance, -1)


def nfdm_demodulate(
    slot: FieldState,
    config: BurstConfig,
    scales: NormalizationScales,
    link_distance: float,
    amplitude: float = 1.0,
    equalizer: Optional["EqualizerTaps"] = None,
    saturate: Optional[float] = 1 - 1e-9,
) -> SymbolFrame:
    """Invert :func:`nfdm_modulate` after a link of normalized length ``link_distance``.

    The optional MIMO equalizer acts on the continuous spectrum, between the
    channel filter and the U-domain map.
    """
    cs = nfdm_receive_spectrum(slot, config, scales, link_distance)
    grid = config.nft_grid(scales)
    if equalizer is not None:
        cs = equalize_spectrum(equalizer, cs, grid)
    big_u = qhat_to_u(cs, saturate, config.u_map)
    return u_decode(big_u, config, grid, amplitude / scales.a0)


# ---------------------------------------------------------------------------
# framing


def frame_bursts(slots: Sequence[FieldState]) -> FieldState:
    """Concatenate slots into one frame on a centered physical grid."""
    if not slots:
        raise FramingError("no bursts to frame")
    n = slots[0].grid.n_samples
    dt = slots[0].grid.dt
    if any(s.grid.n_samples != n or s.grid.dt != dt for s in slots):
        raise FramingError("all slots must share one grid")
    a = np.concatenate([s.stacked for s in slots], axis=-1)
    return FieldState.from_stacked(a, TimeGrid.centered(a.shape[1], dt))


def split_bursts(fld: FieldState, config: BurstConfig) -> List[FieldState]:
    n = config.samples_per_slot
    total = fld.grid.n_samples
    if total % n:
        raise FramingError(f"frame of {total} samples is not a whole number of {n}-sample slots")
    a = fld.stacked
    grid = config.slot_grid()
    return [FieldState.from_stacked(a[:, k * n : (k + 1) * n], grid, fld.position) for k in range(total // n)]


def estimate_guard(beta2: float, total_length: float, bandwidth: float, margin: float = GUARD_MARGIN):
    """Dispersive memory ``2 pi |beta2| L B`` and the same with the safety margin."""
    if bandwidth < 0 or total_length < 0:
        raise ConfigurationError("bandwidth and length must be non-negative")
    dt = 2 * math.pi * abs(beta2) * total_length * bandwidth
    return dt, dt * margin


# ---------------------------------------------------------------------------
# linear and nonlinear compensation for OFDM


def cd_compensate(fld: FieldState, beta2: float, total_length: float) -> FieldState:
    """Undo the accumulated dispersion with an all-pass phase."""
    omega = angular_frequencies(fld.grid)
    h = np.exp(0.5j * beta2 * omega**2 * total_length)
    a = np.fft.ifft(np.fft.fft(fld.stacked, axis=-1) * h, axis=-1)
    return FieldState.from_stacked(a, fld.grid, fld.position)


def dbp(fld: FieldState, params: FiberParams, steps_per_span: int, amplified: bool = True) -> FieldState:
    """Digital backpropagation: the split-step link model run backwards.

    Each span is first stripped of its amplifier gain (when ``amplified``) and
    then integrated with negated dispersion, loss and Kerr coefficient. The
    effective step length of the lossy model weights the nonlinearity by the
    path-averaged power within every step.
    """
    if steps_per_span < 1:
        raise ConfigurationError("steps_per_span must be >= 1")
    omega = angular_frequencies(fld.grid)
    kerr = KERR_AVERAGE * params.gamma
    spec = np.fft.fft(fld.stacked, axis=-1)
    step = params.span_length / steps_per_span
    for _ in range(params.n_spans):
        if amplified:
            spec = spec / math.sqrt(params.span_gain)
        spec = _split_step_segment(spec, omega, -params.beta2, -params.alpha, -kerr, params.span_length, step)
    if not np.all(np.isfinite(spec)):
        raise DivergenceError(0.0)
    return FieldState.from_stacked(np.fft.ifft(spec, axis=-1), fld.grid, 0.0)


# ---------------------------------------------------------------------------
# least-squares 2x2 MIMO equalizer


@dataclass
class EqualizerTaps:
    """Circular 2x2 FIR: ``y[:, n] = sum_j taps[j] @ x[:, n - (j - delay)]``."""

    taps: np.ndarray
    delay: int

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=complex)
        if self.taps.ndim != 3 or self.taps.shape[1:] != (2, 2) or self.taps.shape[0] < 1:
            raise ConfigurationError("taps must have shape (n_taps, 2, 2) with n_taps >= 1")

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]

    @classmethod
    def identity(cls, n_taps: int = 1) -> "EqualizerTaps":
        taps = np.zeros((n_taps, 2, 2), complex)
        delay = (n_taps - 1) // 2
        taps[delay] = np.eye(2)
        return cls(taps, delay)


def _regressor(x: np.ndarray, n_taps: int, delay: int) -> np.ndarray:
    """Columns ``x_q[n - (j - delay)]`` for j in taps, q in polarizations."""
    cols = [np.roll(x[q], j - delay) for j in range(n_taps) for q in range(2)]
    return np.stack(cols, axis=-1)


def train_equalizer(
    tx_ref: np.ndarray, rx: np.ndarray, n_taps: int, support: Optional[slice] = None, rcond: float = 1e-10
) -> EqualizerTaps:
    """Least-squares taps mapping ``rx`` onto ``tx_ref`` (both (2, n) sample streams).

    ``support`` restricts the fit to the samples that carry the training
    burst. Fitting over a mostly empty window would let the noise there bias
    the taps towards zero.
    """
    tx_ref = np.asarray(tx_ref, dtype=complex)
    rx = np.asarray(rx, dtype=complex)
    if tx_ref.shape != rx.shape or tx_ref.ndim != 2 or tx_ref.shape[0] != 2:
        raise ConfigurationError("training streams must both have shape (2, n)")
    if n_taps < 1:
        raise ConfigurationError("n_taps must be >= 1")
    delay = (n_taps - 1) // 2
    x = _regressor(rx, n_taps, delay)
    y = tx_ref.T
    if support is not None:
        x, y = x[support], y[support]
    if x.shape[0] < 4 * n_taps:
        raise IllConditionedTrainingError(f"{x.shape[0]} training samples cannot fit {n_taps} 2x2 taps")
    sol, _, rank, sv = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1] or sv[-1] <= rcond * sv[0]:
        raise IllConditionedTrainingError(f"training matrix rank {rank} < {x.shape[1]} unknowns")
    # sol[(j, q), p] -> taps[j, p, q]
    taps = sol.reshape(n_taps, 2, 2).transpose(0, 2, 1)
    return EqualizerTaps(taps, delay)


def apply_equalizer(eq: EqualizerTaps, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    y = np.zeros_like(x)
    for j in range(eq.n_taps):
        y += eq.taps[j] @ np.roll(x, j - eq.delay, axis=-1)
    return y


def pseudo_time(cs: ContinuousSpectrum, grid: TimeGrid) -> np.ndarray:
    """Pseudo-time stream of a spectral pair (the domain in which the equalizer FIR acts).

    Adjacent samples are ``dt`` apart, so a differential delay of ``tau``
    spans ``tau / dt`` taps.
    """
    return born_inverse(cs.stacked, grid)


def burst_support(config: BurstConfig) -> slice:
    """Pseudo-time samples of the NFT window occupied by the burst."""
    off = config.slot_offset_in_nft() + config.burst_offset_in_slot()
    return slice(off, off + config.samples_per_burst)


def equalize_spectrum(eq: EqualizerTaps, cs: ContinuousSpectrum, grid: TimeGrid) -> ContinuousSpectrum:
    y = born_forward(apply_equalizer(eq, pseudo_time(cs, grid)), grid)
    return ContinuousSpectrum(y[0], y[1], cs.grid)
