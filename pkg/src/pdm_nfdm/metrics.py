"""Link quality metrics: BER, Q-factor, EVM, OSNR, Maxwell fits and tap counts."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import special, stats

from .errors import ConfigurationError, DegenerateFitError, UndefinedQError

EVM_FLOOR_DB = -100.0
MIN_MAXWELL_SAMPLES = 100
# mean + 3 std of the DGD covers 98.7 % of a Maxwell law (1.3 % outage)
COVERAGE_STDS = 3.0


@dataclass(frozen=True)
class BerRecord:
    """Bit-error count with its 95 % Wilson interval.

    ``q_db`` is None when the BER is outside the domain of :func:`q_from_ber`
    (zero errors or ``ber >= 0.5``).
    """

    bits_compared: int
    bit_errors: int
    ber: float
    q_db: Optional[float]
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if not 0 <= self.bit_errors <= self.bits_compared:
            raise ValueError("bit_errors must lie in [0, bits_compared]")


def wilson_interval(errors: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    if n <= 0:
        raise ConfigurationError("cannot form an interval from zero bits")
    ci = stats.binomtest(int(errors), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def ber(tx_bits, rx_bits) -> BerRecord:
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.shape != rx.shape:
        raise ConfigurationError(f"bit streams differ in length ({tx.size} vs {rx.size})")
    if tx.size == 0:
        raise ConfigurationError("empty bit streams")
    return ber_from_counts(int(np.count_nonzero(tx != rx)), tx.size)


def ber_from_counts(bit_errors: int, bits_compared: int) -> BerRecord:
    rate = bit_errors / bits_compared
    lo, hi = wilson_interval(bit_errors, bits_compared)
    q = q_from_ber(rate) if 0 < rate < 0.5 else None
    return BerRecord(int(bits_compared), int(bit_errors), rate, q, lo, hi)


def q_from_ber(ber_value: float) -> float:
    """Gaussian-equivalent Q factor ``20 log10(sqrt(2) erfcinv(2 ber))`` in dB."""
    if not 0 < ber_value < 0.5:
        raise UndefinedQError(f"Q is undefined for ber = {ber_value!r}; need 0 < ber < 0.5")
    return float(20 * np.log10(np.sqrt(2) * special.erfcinv(2 * ber_value)))


def qam16_ber_from_snr(snr: float) -> float:
    """Gray-coded square 16-QAM bit error rate on an AWGN channel (nearest-neighbour approximation)."""
    return float(0.375 * special.erfc(np.sqrt(snr / 10)))


def q_from_evm(evm_db: float) -> Optional[float]:
    """Q implied by the EVM when the error is Gaussian (used where too few bits err to count)."""
    b = qam16_ber_from_snr(10 ** (-evm_db / 10))
    return q_from_ber(b) if 0 < b < 0.5 else None


def evm(tx_symbols, rx_symbols, scale_invariant: bool = False) -> float:
    """RMS error vector over RMS reference, in dB, floored at ``EVM_FLOOR_DB``.

    With ``scale_invariant`` the received symbols are first scaled by the
    least-squares complex gain onto the reference.
    """
    tx = np.asarray(tx_symbols, dtype=complex).ravel()
    rx = np.asarray(rx_symbols, dtype=complex).ravel()
    if tx.shape != rx.shape:
        raise ConfigurationError("symbol frames differ in size")
    ref = np.vdot(tx, tx).real
    if ref == 0:
        raise ConfigurationError("reference frame has zero power")
    if scale_invariant:
        den = np.vdot(rx, rx).real
        if den > 0:
            rx = rx * (np.vdot(rx, tx) / den)
    err = np.vdot(rx - tx, rx - tx).real
    if err <= ref * 10 ** (EVM_FLOOR_DB / 10):
        return EVM_FLOOR_DB
    return float(10 * np.log10(err / ref))


def osnr_db(fld, signal_bandwidth: float, reference_bandwidth: float = 12.5e9, guard: float = 1.5) -> float:
    from .fiber import measure_osnr

    return float(10 * np.log10(measure_osnr(fld, signal_bandwidth, reference_bandwidth, guard)))


# ---------------------------------------------------------------------------
# Maxwell-distributed DGD


@dataclass(frozen=True)
class MaxwellFit:
    mean: float
    rms: float
    scale: float
    ks_statistic: float
    p_value: float


def maxwell_scale_from_rms(rms: float) -> float:
    """scipy's Maxwell ``scale`` for a law with the given rms (``E x^2 = 3 scale^2``)."""
    return rms / math.sqrt(3.0)


def maxwell_fit(samples) -> MaxwellFit:
    """Rms-matched Maxwell law and the KS test of the samples against it."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_MAXWELL_SAMPLES:
        raise DegenerateFitError(f"need at least {MIN_MAXWELL_SAMPLES} samples, got {x.size}")
    rms = float(np.sqrt(np.mean(x**2)))
    if rms == 0 or not np.isfinite(rms):
        raise DegenerateFitError("samples have zero or non-finite rms")
    scale = maxwell_scale_from_rms(rms)
    ks = stats.kstest(x, stats.maxwell(scale=scale).cdf)
    return MaxwellFit(float(np.mean(x)), rms, scale, float(ks.statistic), float(ks.pvalue))


def dgd_coverage(d_pmd: float, total_length: float, outage: Optional[float] = None) -> float:
    """DGD interval the equalizer has to span for a Maxwell law with rms ``d_pmd sqrt(L)``.

    By default mean plus three standard deviations (about 1.3 % outage);
    with ``outage`` set, the ``1 - outage`` quantile instead.
    """
    if d_pmd < 0 or total_length < 0:
        raise ConfigurationError("d_pmd and total_length must be non-negative")
    rms = d_pmd * math.sqrt(total_length)
    if rms == 0:
        return 0.0
    law = stats.maxwell(scale=maxwell_scale_from_rms(rms))
    if outage is None:
        return float(law.mean() + COVERAGE_STDS * law.std())
    if not 0 < outage < 1:
        raise ConfigurationError("outage must lie in (0, 1)")
    return float(law.ppf(1 - outage))


def required_taps(
    d_pmd: float, total_length: float, sample_rate: float, outage: Optional[float] = None
) -> int:
    """Equalizer taps spanning the DGD coverage interval at tap spacing ``1 / sample_rate``."""
    if sample_rate <= 0:
        raise ConfigurationError("sample_rate must be positive")
    interval = dgd_coverage(d_pmd, total_length, outage)
    return max(1, int(math.ceil(interval * sample_rate - 1e-9)))


# ---------------------------------------------------------------------------
# records


@dataclass
class MetricRecord:
    """One JSON-lines result row."""

    experiment_id: str
    seed: int
    power_dbm: Optional[float]
    ber: Optional[float]
    q_db: Optional[float]
    evm_db: Optional[float]
    osnr_db: Optional[float]
    extra: Optional[dict] = None

    def to_json(self) -> str:
        d = asdict(self)
        extra = d.pop("extra") or {}
        d.update(extra)
        return json.dumps(d, sort_keys=True, allow_nan=False, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")
