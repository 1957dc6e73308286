"""Coarse-step emulation of polarization-mode dispersion.

The fiber is cut into fixed-length sections. Each section starts with a
random rotation of the polarization state to a uniformly distributed point
on the Poincare sphere, followed by a uniform random phase between the two
components in the new frame and a differential group delay (DGD) drawn from a
zero-mean Gaussian.

Stokes components are ordered (s1, s2, s3) with s1 the x/y axis, so the DGD
operator ``diag(exp(1j w tau / 2), exp(-1j w tau / 2))`` has its PMD vector
along s1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError

# per-section DGD std = D_PMD * sqrt(section_length) * DGD_STD_SCALE.
# With isotropic random rotations the cross terms of the PMD-vector sum vanish
# in expectation, so E|tau|^2 = sum(E dgd_k^2) = D^2 L exactly: the scale is 1.
DGD_STD_SCALE = 1.0

# (s1, s2, s3) <-> Pauli matrices (sigma_z, sigma_x, sigma_y)
_PAULI = np.array(
    [
        [[1, 0], [0, -1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class PmdSection:
    """One constant-birefringence section.

    Attributes
    ----------
    theta, phi : float
        Polar and azimuthal angle of the point on the Poincare sphere the x
        polarization is rotated to.
    phase : float
        Differential phase applied in the rotated frame.
    dgd : float
        Differential group delay of the section in seconds (may be negative).
    """

    theta: float
    phi: float
    phase: float
    dgd: float

    def jones_matrix(self) -> np.ndarray:
        """Frequency-independent part: rotation followed by the phase."""
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        e = np.exp(1j * self.phi)
        rotation = np.array([[c, -np.conj(e) * s], [e * s, c]])
        retarder = np.diag([np.exp(0.5j * self.phase), np.exp(-0.5j * self.phase)])
        return retarder @ rotation


@dataclass(frozen=True)
class PmdRealization:
    sections: tuple
    section_length: float
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.section_length > 0:
            raise ConfigurationError("section_length must be positive")
        object.__setattr__(self, "sections", tuple(self.sections))
        if not all(np.isfinite(s.dgd) for s in self.sections):
            raise ConfigurationError("dgd values must be finite")

    def __len__(self):
        return len(self.sections)


def n_sections(total_length: float, section_length: float) -> int:
    return int(math.ceil(total_length / section_length - 1e-9))


def sample_pmd_realization(params, rng: np.random.Generator, seed: Optional[int] = None) -> PmdRealization:
    """Draw a coarse-step PMD realization for the whole link described by ``params``."""
    if params.pmd_coeff < 0:
        raise ConfigurationError("pmd_coeff must be non-negative")
    n = n_sections(params.total_length, params.section_length)
    cos_theta = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0.0, 2 * np.pi, n)
    phase = rng.uniform(0.0, 2 * np.pi, n)
    std = params.pmd_coeff * math.sqrt(params.section_length) * DGD_STD_SCALE
    dgd = rng.normal(0.0, 1.0, n) * std
    sections = [
        PmdSection(float(np.arccos(ct)), float(p), float(ph), float(d))
        for ct, p, ph, d in zip(cos_theta, phi, phase, dgd)
    ]
    return PmdRealization(tuple(sections), params.section_length, seed)


def mueller_matrix(u: np.ndarray) -> np.ndarray:
    """Stokes-space rotation(s) induced by 2x2 unitary matrices ``u`` (..., 2, 2)."""
    uh = np.conj(np.swapaxes(u, -1, -2))
    return 0.5 * np.real(np.einsum("iab,...bc,jcd,...da->...ij", _PAULI, u, _PAULI, uh))


def jones_matrices(pmd: PmdRealization) -> np.ndarray:
    """Stacked frequency-independent section operators, shape (n_sections, 2, 2)."""
    if not pmd.sections:
        return np.zeros((0, 2, 2), complex)
    theta = np.array([s.theta for s in pmd.sections])
    phi = np.array([s.phi for s in pmd.sections])
    phase = np.array([s.phase for s in pmd.sections])
    c, sn, e = np.cos(theta / 2), np.sin(theta / 2), np.exp(1j * phi)
    p = np.exp(0.5j * phase)
    u = np.empty((len(theta), 2, 2), complex)
    u[:, 0, 0] = p * c
    u[:, 0, 1] = -p * np.conj(e) * sn
    u[:, 1, 0] = np.conj(p) * e * sn
    u[:, 1, 1] = np.conj(p) * c
    return u


def pmd_vector(pmd: PmdRealization) -> np.ndarray:
    """First-order PMD vector of the concatenated sections (seconds).

    Section k acts as DGD_k @ U_k, so the vector updates as
    ``omega <- R(U_k) omega + dgd_k * s1``.
    """
    rotations = mueller_matrix(jones_matrices(pmd))
    omega = np.zeros(3)
    for rot, sec in zip(rotations, pmd.sections):
        omega = rot @ omega
        omega[0] += sec.dgd
    return omega


def aggregate_dgd(pmd: PmdRealization) -> float:
    return float(np.linalg.norm(pmd_vector(pmd)))


def save_pmd_realization(pmd: PmdRealization, path) -> None:
    """Write one line per section: ``index theta phi phase dgd_ps``."""
    lines = [f"# section_length_m {pmd.section_length!r}", f"# seed {pmd.seed}"]
    for i, s in enumerate(pmd.sections):
        lines.append(f"{i} {s.theta!r} {s.phi!r} {s.phase!r} {s.dgd * 1e12!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_pmd_realization(path) -> PmdRealization:
    section_length = None
    seed = None
    sections = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            if key == "section_length_m":
                section_length = float(value)
            elif key == "seed" and value != "None":
                seed = int(value)
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ConfigurationError(f"malformed PMD section line: {raw!r}")
        _, theta, phi, phase, dgd_ps = fields
        sections.append(PmdSection(float(theta), float(phi), float(phase), float(dgd_ps) * 1e-12))
    if section_length is None:
        raise ConfigurationError("PMD file lacks the section_length header")
    return PmdRealization(tuple(sections), section_length, seed)


def maxwell_rms_to_mean(rms: float) -> float:
    """Mean of a Maxwell law with the given rms value."""
    return rms * math.sqrt(8 / (3 * math.pi))

