"""Physical-units fiber channel: Manakov(-PMD) split-step propagation.

Conventions
-----------
Fields are complex envelopes in sqrt(W) sampled on a :class:`TimeGrid` in
seconds. Spectra use numpy's FFT sign (``A(t) = sum_w A~(w) exp(1j w t)``),
so with that convention the propagation equation reads

    dA/dz = -alpha/2 A + 1j beta2/2 d2A/dt2 - 1j (8/9) gamma |A|^2 A

which, for beta2 < 0, normalizes to ``j q_z = q_tt + 2|q|^2 q`` (focusing).
``alpha`` is the power attenuation in Np/m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.constants import h as PLANCK

from .errors import ConfigurationError, DivergenceError
from .nft import DualPolSignal, TimeGrid
from .pmd import PmdRealization, jones_matrices

KERR_AVERAGE = 8.0 / 9.0
DB_PER_NEPER = 10.0 / math.log(10.0)
OSNR_REFERENCE_BANDWIDTH = 12.5e9  # 0.1 nm at 1550 nm


def db_per_km_to_np_per_m(alpha_db_km: float) -> float:
    return alpha_db_km / DB_PER_NEPER / 1e3


def np_per_m_to_db_per_km(alpha: float) -> float:
    return alpha * DB_PER_NEPER * 1e3


def dbm_to_watt(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watt_to_dbm(p: float) -> float:
    return 10.0 * math.log10(p / 1e-3)


@dataclass(frozen=True)
class FiberParams:
    """Link parameters in SI units.

    Attributes
    ----------
    alpha : float
        Power attenuation in Np/m.
    beta2 : float
        Group-velocity dispersion in s^2/m (sign included).
    gamma : float
        Kerr coefficient in 1/(W m).
    span_length : float
        Amplifier spacing in m.
    n_spans : int
    pmd_coeff : float
        PMD parameter in s/sqrt(m).
    section_length : float
        Length of a coarse-step PMD section in m.
    noise_figure_db : float
    center_frequency : float
        Carrier frequency in Hz.
    """

    alpha: float = db_per_km_to_np_per_m(0.2)
    beta2: float = -21.5e-27
    gamma: float = 1.3e-3
    span_length: float = 80e3
    n_spans: int = 25
    pmd_coeff: float = 0.0
    section_length: float = 1e3
    noise_figure_db: float = 6.2
    center_frequency: float = 193.55e12

    def __post_init__(self):
        if not self.span_length > 0:
            raise ConfigurationError("span_length must be positive")
        if int(self.n_spans) != self.n_spans or self.n_spans < 0:
            raise ConfigurationError("n_spans must be a non-negative integer")
        if not (0 < self.section_length <= self.span_length):
            raise ConfigurationError("section_length must lie in (0, span_length]")
        if self.pmd_coeff < 0:
            raise ConfigurationError("pmd_coeff must be non-negative")
        if self.alpha < 0:
            raise ConfigurationError("alpha must be non-negative")

    @classmethod
    def from_engineering_units(
        cls,
        alpha_db_km: float = 0.2,
        beta2_ps2_km: float = -21.5,
        gamma_per_w_km: float = 1.3,
        span_km: float = 80.0,
        n_spans: int = 25,
        pmd_ps_sqrt_km: float = 0.0,
        section_km: float = 1.0,
        noise_figure_db: float = 6.2,
        center_thz: float = 193.55,
    ) -> "FiberParams":
        return cls(
            alpha=db_per_km_to_np_per_m(alpha_db_km),
            beta2=beta2_ps2_km * 1e-27,
            gamma=gamma_per_w_km * 1e-3,
            span_length=span_km * 1e3,
            n_spans=n_spans,
            pmd_coeff=pmd_ps_sqrt_km * 1e-12 / math.sqrt(1e3),
            section_length=section_km * 1e3,
            noise_figure_db=noise_figure_db,
            center_frequency=center_thz * 1e12,
        )

    @property
    def total_length(self) -> float:
        return self.span_length * self.n_spans

    @property
    def alpha_db_km(self) -> float:
        return np_per_m_to_db_per_km(self.alpha)

    @property
    def span_gain(self) -> float:
        """Linear power gain that exactly compensates one span."""
        return math.exp(self.alpha * self.span_length)

    def lossless(self) -> "FiberParams":
        return replace(self, alpha=0.0)

    def transformed_lossless(self) -> "FiberParams":
        """Lossless link with the path-averaged Kerr coefficient of the lossy one."""
        return replace(self, alpha=0.0, gamma=gamma_eff(self.gamma, self.alpha, self.span_length))


def gamma_eff(gamma: float, alpha: float, span_length: float) -> float:
    """Path-averaged Kerr coefficient ``gamma (1 - exp(-alpha L)) / (alpha L)``."""
    if not span_length > 0:
        raise ConfigurationError("span_length must be positive")
    x = alpha * span_length
    if x == 0:
        return gamma
    return gamma * -math.expm1(-x) / x


@dataclass(frozen=True)
class NormalizationScales:
    """Time, amplitude and distance units of the normalized Manakov equation."""

    t0: float
    a0: float
    z0: float


def normalization_scales(
    params: FiberParams, use_gamma_eff: bool = False, z0: Optional[float] = None
) -> NormalizationScales:
    """Scales mapping the physical equation onto ``j q_z = q_tt + 2|q|^2 q``.

    ``z0`` defaults to one span length.
    """
    z0 = params.span_length if z0 is None else z0
    if params.beta2 == 0:
        raise ConfigurationError("normalization requires non-zero dispersion")
    g = gamma_eff(params.gamma, params.alpha, params.span_length) if use_gamma_eff else params.gamma
    if not g > 0:
        raise ConfigurationError("normalization requires a positive Kerr coefficient")
    if not z0 > 0:
        raise ConfigurationError("z0 must be positive")
    t0 = math.sqrt(abs(params.beta2) * z0 / 2)
    a0 = math.sqrt(2 / (KERR_AVERAGE * g * z0))
    return NormalizationScales(t0, a0, z0)


@dataclass
class FieldState:
    """Dual-polarization field in sqrt(W) on a physical time grid (seconds)."""

    a1: np.ndarray
    a2: np.ndarray
    grid: TimeGrid
    position: float = 0.0

    def __post_init__(self):
        self.a1 = np.asarray(self.a1, dtype=complex)
        self.a2 = np.asarray(self.a2, dtype=complex)
        n = self.grid.n_samples
        if self.a1.shape != (n,) or self.a2.shape != (n,):
            raise ConfigurationError(f"field components must have shape ({n},)")
        if not (np.all(np.isfinite(self.a1)) and np.all(np.isfinite(self.a2))):
            raise ConfigurationError("field samples must be finite")

    @classmethod
    def from_stacked(cls, a: np.ndarray, grid: TimeGrid, position: float = 0.0) -> "FieldState":
        return cls(a[0], a[1], grid, position)

    @property
    def stacked(self) -> np.ndarray:
        return np.vstack([self.a1, self.a2])

    def power(self) -> float:
        """Mean total power over the grid (both polarizations), W."""
        return float(np.mean(np.abs(self.a1) ** 2 + np.abs(self.a2) ** 2))

    def energy(self) -> float:
        return float(np.sum(np.abs(self.a1) ** 2 + np.abs(self.a2) ** 2) * self.grid.dt)


def normalize(fld: FieldState, scales: NormalizationScales) -> DualPolSignal:
    g = fld.grid
    grid = TimeGrid(g.t_start / scales.t0, g.n_samples, g.dt / scales.t0)
    return DualPolSignal(fld.a1 / scales.a0, fld.a2 / scales.a0, grid)


def denormalize(sig: DualPolSignal, scales: NormalizationScales, position: float = 0.0) -> FieldState:
    g = sig.grid
    grid = TimeGrid(g.t_start * scales.t0, g.n_samples, g.dt * scales.t0)
    return FieldState(sig.q1 * scales.a0, sig.q2 * scales.a0, grid, position)


def angular_frequencies(grid: TimeGrid) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(grid.n_samples, grid.dt)


def _effective_length(alpha: float, dz: float) -> float:
    """Integral of the power profile over a step, relative to its midpoint value."""
    if alpha == 0:
        return dz
    return 2.0 / alpha * math.sinh(alpha * dz / 2)


def _linear_operator(omega: np.ndarray, beta2: float, alpha: float, dz: float) -> np.ndarray:
    return np.exp(-0.5j * beta2 * omega**2 * dz - 0.5 * alpha * dz)


def _split_step_segment(
    spec: np.ndarray, omega: np.ndarray, beta2: float, alpha: float, kerr: float, length: float, step: float
) -> np.ndarray:
    """Symmetric split-step over ``length`` in the frequency domain.

    Adjacent linear half steps are merged, so each step costs two FFT pairs.
    """
    n_steps = max(1, int(math.ceil(length / step - 1e-9)))
    dz = length / n_steps
    half = _linear_operator(omega, beta2, alpha, dz / 2)
    full = half * half
    dz_eff = _effective_length(alpha, dz)
    spec = spec * half
    for i in range(n_steps):
        a = np.fft.ifft(spec, axis=-1)
        if kerr != 0:
            # overflow is caught per span by the caller
            with np.errstate(over="ignore", invalid="ignore"):
                power = np.abs(a[0]) ** 2 + np.abs(a[1]) ** 2
                a *= np.exp(-1j * kerr * dz_eff * power)
        spec = np.fft.fft(a, axis=-1)
        spec *= full if i < n_steps - 1 else half
    return spec


def _segment_points(span_start: float, span_end: float, section_length: float, with_sections: bool) -> list:
    pts = [span_start, span_end]
    if with_sections:
        k0 = int(math.ceil(span_start / section_length - 1e-9))
        k = k0
        while k * section_length < span_end - 1e-9:
            pts.append(k * section_length)
            k += 1
    pts = sorted(set(round(p, 9) for p in pts))
    return pts


def ssfm_propagate(
    fld: FieldState,
    params: FiberParams,
    pmd: Optional[PmdRealization] = None,
    rng: Optional[np.random.Generator] = None,
    step_size: float = 100.0,
    amplify: bool = False,
    noise: bool = True,
) -> FieldState:
    """Propagate a field through ``params.n_spans`` spans.

    Parameters
    ----------
    fld : FieldState
        Launch field; its ``position`` is ignored and the output sits at the
        link end.
    pmd : PmdRealization, optional
        Coarse-step PMD. Each section boundary applies the section rotation
        and phase, then its DGD, then the section is integrated.
    rng : numpy.random.Generator, optional
        Required when ``amplify`` and ``noise`` are both set.
    step_size : float
        Maximum split-step length in m.
    amplify : bool
        Insert an EDFA with gain ``exp(alpha * span_length)`` after every span.
    noise : bool
        Add ASE noise in the amplifiers.
    """
    if not step_size > 0:
        raise ConfigurationError("step_size must be positive")
    if pmd is not None:
        if step_size > pmd.section_length + 1e-9:
            raise ConfigurationError("step_size must not exceed the PMD section length")
        expected = int(math.ceil(params.total_length / pmd.section_length - 1e-9))
        if len(pmd) != expected:
            raise ConfigurationError(f"PMD realization has {len(pmd)} sections, link needs {expected}")
        jones = jones_matrices(pmd)
    if amplify and noise and rng is None:
        raise ConfigurationError("an rng is required for amplifier noise")

    omega = angular_frequencies(fld.grid)
    kerr = KERR_AVERAGE * params.gamma
    spec = np.fft.fft(fld.stacked, axis=-1)
    for span in range(params.n_spans):
        start = span * params.span_length
        end = start + params.span_length
        pts = _segment_points(start, end, params.section_length, pmd is not None)
        for z_a, z_b in zip(pts[:-1], pts[1:]):
            if pmd is not None:
                k = int(round(z_a / pmd.section_length))
                if abs(k * pmd.section_length - z_a) < 1e-6:
                    spec = jones[k] @ spec
                    half_delay = np.exp(0.5j * omega * pmd.sections[k].dgd)
                    spec[0] *= half_delay
                    spec[1] *= np.conj(half_delay)
            spec = _split_step_segment(spec, omega, params.beta2, params.alpha, kerr, z_b - z_a, step_size)
        if not np.all(np.isfinite(spec)):
            raise DivergenceError(end)
        if amplify:
            out = FieldState.from_stacked(np.fft.ifft(spec, axis=-1), fld.grid, end)
            out = edfa_amplify(
                out,
                10 * math.log10(params.span_gain),
                params.noise_figure_db,
                rng,
                params.center_frequency,
                noise=noise,
            )
            spec = np.fft.fft(out.stacked, axis=-1)
    return FieldState.from_stacked(np.fft.ifft(spec, axis=-1), fld.grid, params.total_length)


def ssfm_normalized(sig: DualPolSignal, distance: float, step: float, s: int = -1) -> DualPolSignal:
    """Split-step solution of ``j q_z = -s q_tt + 2|q|^2 q`` (lossless, normalized).

    ``s = -1`` is the focusing case used throughout.
    """
    omega = angular_frequencies(sig.grid)
    # -s q_tt term: in normalized units beta2 -> 2 s, kerr -> 2
    spec = _split_step_segment(np.fft.fft(sig.stacked, axis=-1), omega, 2.0 * s, 0.0, 2.0, distance, step)
    out = np.fft.ifft(spec, axis=-1)
    return DualPolSignal(out[0], out[1], sig.grid)


def ase_variance_per_quadrature(
    gain: float, noise_figure_db: float, center_frequency: float, sample_rate: float
) -> float:
    """``(G - 1) h nu F / 2 * B / 2``: white ASE over the simulated band, per polarization."""
    f_lin = 10.0 ** (noise_figure_db / 10.0)
    return (gain - 1.0) * PLANCK * center_frequency * f_lin / 2.0 * sample_rate / 2.0


def edfa_amplify(
    fld: FieldState,
    gain_db: float,
    noise_figure_db: float,
    rng: Optional[np.random.Generator],
    center_frequency: float = 193.55e12,
    noise: bool = True,
) -> FieldState:
    """Lumped amplifier: scale by ``sqrt(G)`` and add white ASE on both polarizations."""
    gain = 10.0 ** (gain_db / 10.0)
    if gain < 1:
        raise ConfigurationError("amplifier gain must be >= 0 dB")
    a = fld.stacked * math.sqrt(gain)
    if noise and gain > 1:
        if rng is None:
            raise ConfigurationError("an rng is required for amplifier noise")
        sigma = math.sqrt(ase_variance_per_quadrature(gain, noise_figure_db, center_frequency, 1 / fld.grid.dt))
        a = a + sigma * (rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape))
    return FieldState.from_stacked(a, fld.grid, fld.position)


def analytic_osnr_db(
    launch_power_dbm: float,
    span_loss_db: float,
    noise_figure_db: float,
    n_spans: int,
    center_frequency: float = 193.55e12,
    reference_bandwidth: float = OSNR_REFERENCE_BANDWIDTH,
) -> float:
    """Link-budget OSNR of a chain of identical amplified spans."""
    h_nu_b_dbm = 10 * math.log10(PLANCK * center_frequency * reference_bandwidth / 1e-3)
    return launch_power_dbm - span_loss_db - noise_figure_db - 10 * math.log10(n_spans) - h_nu_b_dbm


def noise_psd(fld: FieldState, signal_bandwidth: float, guard: float = 1.5) -> float:
    """Noise power spectral density (W/Hz, both polarizations) from out-of-band bins.

    Bins with ``|f| > guard * signal_bandwidth / 2`` are treated as noise only.
    """
    n = fld.grid.n_samples
    fs = 1.0 / fld.grid.dt
    f = np.fft.fftfreq(n, fld.grid.dt)
    mask = np.abs(f) > guard * signal_bandwidth / 2
    if not mask.any():
        raise ConfigurationError("no out-of-band bins: simulation bandwidth too small for the OSNR estimate")
    psd = np.sum(np.abs(np.fft.fft(fld.stacked, axis=-1)) ** 2, axis=0) / (n * fs)
    return float(np.mean(psd[mask]))


def measure_osnr(
    fld: FieldState,
    signal_bandwidth: float,
    reference_bandwidth: float = OSNR_REFERENCE_BANDWIDTH,
    guard: float = 1.5,
) -> float:
    """OSNR (linear) with the signal power taken as total minus estimated noise power."""
    n0 = noise_psd(fld, signal_bandwidth, guard)
    p_total = fld.power()
    p_sig = p_total - n0 / fld.grid.dt
    if n0 == 0:
        return math.inf
    return p_sig / (n0 * reference_bandwidth)


def noise_loading(
    fld: FieldState,
    target_osnr_db: float,
    rng: np.random.Generator,
    reference_bandwidth: float = OSNR_REFERENCE_BANDWIDTH,
    signal_bandwidth: Optional[float] = None,
) -> FieldState:
    """Add white Gaussian noise whose PSD alone sets the OSNR to ``target_osnr_db``.

    The signal power is the mean field power, minus the out-of-band noise
    estimate when ``signal_bandwidth`` is given. Noise already on the field is
    left in place, so repeated loading accumulates.
    """
    if math.isinf(target_osnr_db) and target_osnr_db > 0:
        return FieldState(fld.a1.copy(), fld.a2.copy(), fld.grid, fld.position)
    p_sig = fld.power()
    if signal_bandwidth is not None:
        p_sig -= noise_psd(fld, signal_bandwidth) / fld.grid.dt
    if not p_sig > 0:
        raise ConfigurationError("noise loading needs a positive signal power")
    n0 = p_sig / (reference_bandwidth * 10.0 ** (target_osnr_db / 10.0))
    # n0 covers both polarizations: per polarization n0/2, per quadrature n0/4 * fs
    sigma = math.sqrt(n0 / 4.0 / fld.grid.dt)
    a = fld.stacked
    a = a + sigma * (rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape))
    return FieldState.from_stacked(a, fld.grid, fld.position)
