import math

import numpy as np
import pytest
from scipy import stats

from oracles import maxwell_samples
from pdm_nfdm.errors import ConfigurationError
from pdm_nfdm.fiber import FiberParams
from pdm_nfdm.pmd import (
    PmdRealization,
    PmdSection,
    aggregate_dgd,
    jones_matrices,
    load_pmd_realization,
    maxwell_rms_to_mean,
    mueller_matrix,
    sample_pmd_realization,
    save_pmd_realization,
)


def link(pmd_ps=0.1, n_spans=25):
    return FiberParams.from_engineering_units(pmd_ps_sqrt_km=pmd_ps, n_spans=n_spans)


def test_section_count():
    assert len(sample_pmd_realization(link(), np.random.default_rng(0))) == 2000
    p = FiberParams.from_engineering_units(span_km=80, n_spans=1, section_km=3.0)
    assert len(sample_pmd_realization(p, np.random.default_rng(0))) == 27


def test_zero_coefficient_keeps_rotations():
    r = sample_pmd_realization(link(0.0, 1), np.random.default_rng(1))
    assert all(s.dgd == 0 for s in r.sections)
    assert len({s.theta for s in r.sections}) == len(r)


def test_deterministic():
    a = sample_pmd_realization(link(), np.random.default_rng(7))
    b = sample_pmd_realization(link(), np.random.default_rng(7))
    assert a == b


def test_jones_matrices_unitary():
    r = sample_pmd_realization(link(n_spans=1), np.random.default_rng(2))
    u = jones_matrices(r)
    eye = np.einsum("nab,ncb->nac", u, u.conj())
    np.testing.assert_allclose(eye, np.broadcast_to(np.eye(2), eye.shape), atol=1e-14)
    np.testing.assert_allclose(u[5], r.sections[5].jones_matrix(), atol=1e-15)


def test_rotation_points_uniform_on_sphere():
    r = sample_pmd_realization(link(n_spans=25), np.random.default_rng(3))
    # image of the x polarization in Stokes space
    s = mueller_matrix(jones_matrices(r))[:, :, 0]
    np.testing.assert_allclose(np.linalg.norm(s, axis=1), 1.0, atol=1e-12)
    for k in range(3):
        assert stats.kstest(s[:, k], stats.uniform(-1, 2).cdf).pvalue > 0.01


def test_mueller_is_rotation():
    r = sample_pmd_realization(link(n_spans=1), np.random.default_rng(4))
    m = mueller_matrix(jones_matrices(r))
    np.testing.assert_allclose(np.einsum("nij,nkj->nik", m, m), np.broadcast_to(np.eye(3), m.shape), atol=1e-13)
    np.testing.assert_allclose(np.linalg.det(m), 1.0, atol=1e-13)


def test_aggregate_trivial():
    zero = PmdRealization((PmdSection(0.3, 1.0, 2.0, 0.0),) * 5, 1e3)
    assert aggregate_dgd(zero) == 0.0
    one = PmdRealization((PmdSection(1.1, 0.2, 0.7, -3e-12),), 1e3)
    assert aggregate_dgd(one) == pytest.approx(3e-12)


def test_aligned_sections_add():
    # identity rotations and no phase: DGDs add linearly
    secs = tuple(PmdSection(0.0, 0.0, 0.0, 1e-12) for _ in range(4))
    assert aggregate_dgd(PmdRealization(secs, 1e3)) == pytest.approx(4e-12)


def test_maxwell_statistics():
    rng = np.random.default_rng(2024)
    p = link(0.1)
    dgd = np.array([aggregate_dgd(sample_pmd_realization(p, rng)) for _ in range(1000)])
    rms_expected = 0.1e-12 * math.sqrt(2000)
    rms = math.sqrt(np.mean(dgd**2))
    assert rms == pytest.approx(rms_expected, rel=0.05)
    assert np.mean(dgd) / rms == pytest.approx(math.sqrt(8 / (3 * math.pi)), rel=0.02)
    scale = rms_expected / math.sqrt(3)
    assert stats.kstest(dgd, stats.maxwell(scale=scale).cdf).pvalue > 0.01


def test_scipy_maxwell_parametrization():
    x = maxwell_samples(2.0, 4000, np.random.default_rng(0))
    assert stats.kstest(x, stats.maxwell(scale=2.0 / math.sqrt(3)).cdf).pvalue > 0.01
    assert maxwell_rms_to_mean(2.0) == pytest.approx(stats.maxwell(scale=2.0 / math.sqrt(3)).mean())


def test_text_round_trip(tmp_path):
    r = sample_pmd_realization(link(0.2, 1), np.random.default_rng(5), seed=5)
    path = tmp_path / "pmd.txt"
    save_pmd_realization(r, path)
    back = load_pmd_realization(path)
    assert back.seed == 5 and back.section_length == r.section_length and len(back) == len(r)
    for a, b in zip(r.sections, back.sections):
        assert (a.theta, a.phi, a.phase) == (b.theta, b.phi, b.phase)
        assert b.dgd == pytest.approx(a.dgd, rel=1e-15)
    first = path.read_text().splitlines()[2].split()
    assert first[0] == "0" and len(first) == 5


def test_malformed_file(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# section_length_m 1000.0\n0 1 2\n")
    with pytest.raises(ConfigurationError):
        load_pmd_realization(path)
