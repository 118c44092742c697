import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrrf import OpticalMedium, SourceDetectorConfig, diagonalize, specific_intensity
from mrrf.planewave import (ConvergenceError, TransverseWavevector, decay_rate, dual_basis,
                            eta_vectors, evanescent_mode, greens_from_plane_waves, kappa,
                            kappa_normal_incidence, kappa_planar_source)
from mrrf.spectral import ModeIndex
from mrrf.special_functions import lm_index

FROZEN = json.loads((Path(__file__).parent / "data" / "frozen_oracles.json").read_text())


@pytest.fixture(scope="module")
def frozen_decomp():
    ref = FROZEN["kappa_simpson"]
    med = OpticalMedium.from_transport_units(ref["g"], ref["absorption_ratio"])
    return diagonalize(med, ref["lmax"], block_dim=ref["block_dim"])


@pytest.fixture(scope="module")
def pw_decomp():
    return diagonalize(OpticalMedium.from_transport_units(0.5, 0.5), 4, block_dim=200)


@pytest.mark.parametrize("z", ["0.7", "-0.7"])
def test_kappa_matches_frozen_simpson(frozen_decomp, z):
    ref = FROZEN["kappa_simpson"]
    vals = ref["values"][z]
    K_ref = np.array(vals["re"]) + 1j * np.array(vals["im"])
    K = kappa(frozen_decomp, TransverseWavevector(ref["q"], ref["phi_q"]), float(z)).values
    assert np.max(np.abs(K - K_ref) / np.abs(K_ref)) < 1e-8


def test_wavevector_roundtrip():
    qv = TransverseWavevector.from_vector([0.3, -0.4])
    assert qv.q == pytest.approx(0.5)
    assert np.allclose(qv.vector, [0.3, -0.4])
    assert np.allclose((-qv).vector, [-0.3, 0.4])
    with pytest.raises(ValueError):
        TransverseWavevector(-1.0)


def test_decay_rate():
    assert decay_rate(0.5, 0.0) == pytest.approx(2.0)
    assert np.allclose(decay_rate(np.array([1.0, 0.5]), 1.0), [math.sqrt(2), math.sqrt(5)])
    with pytest.raises(ValueError):
        decay_rate(0.0, 1.0)


def test_planar_source_is_zero_q_limit(pw_decomp):
    for z in (0.8, -1.3):
        a = kappa_planar_source(pw_decomp, z).values
        b = kappa(pw_decomp, TransverseWavevector(0.0), z).values
        assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


def test_planar_source_is_diagonal_in_m(pw_decomp):
    K = kappa_planar_source(pw_decomp, 1.1).values
    for l, m in [(2, 1), (3, -2)]:
        for lp, mp in [(2, 0), (4, 2)]:
            assert K[lm_index(l, m), lm_index(lp, mp)] == 0


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 4.0), st.floats(0.2, 3.0).flatmap(lambda z: st.sampled_from([z, -z])),
       st.integers(0, 4), st.integers(0, 4))
def test_normal_incidence_form(pw_decomp, q, z, l, lp):
    a = kappa_normal_incidence(pw_decomp, q, z, l, lp)
    b = kappa(pw_decomp, TransverseWavevector(q, 0.0), z).element(l, 0, lp, 0)
    assert abs(a - b) <= 1e-10 * max(abs(b), 1e-300)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0, 2 * math.pi), st.floats(0.2, 3.0))
def test_kappa_azimuthal_covariance(pw_decomp, q, phi, z):
    # rotating q by phi multiplies elements by exp(-i (m - m') phi)
    K0 = kappa(pw_decomp, TransverseWavevector(q, 0.0), z, 3).values
    K1 = kappa(pw_decomp, TransverseWavevector(q, phi), z, 3).values
    ms = np.array([m for l in range(4) for m in range(-l, l + 1)])
    ph = np.exp(-1j * np.subtract.outer(ms, ms) * phi)
    assert np.allclose(K1, K0 * ph, rtol=1e-12, atol=1e-15 * np.abs(K0).max())


def test_kappa_z_zero_rejected(pw_decomp):
    with pytest.raises(ValueError):
        kappa(pw_decomp, TransverseWavevector(0.5), 0.0)


def test_evanescent_mode_mirror_identity(pw_decomp):
    # reflecting z -> -z and s_z -> -s_z carries I^(+) of (-M, n) into I^(-) of (M, n)
    qv = TransverseWavevector(0.7, 0.4)
    r = np.array([0.3, -0.2, 0.9])
    s = np.array([0.2, 0.5, 0.6])
    rm = r * [1, 1, -1]
    sm = s * [1, 1, -1]
    for M, n in [(0, 0), (1, 0), (-2, 3), (3, 1)]:
        minus = evanescent_mode(pw_decomp, qv, ModeIndex(M, n), "-", rm, sm)
        plus = evanescent_mode(pw_decomp, qv, ModeIndex(-M, n), "+", r, s)
        assert minus == pytest.approx((-1) ** (M % 2) * plus, rel=1e-12)


def test_evanescent_mode_decays_with_depth(pw_decomp):
    qv = TransverseWavevector(0.5, 0.0)
    s = np.array([0.0, 0.0, 1.0])
    mode = ModeIndex(0, 0)
    a = evanescent_mode(pw_decomp, qv, mode, "+", [0, 0, 1.0], s)
    b = evanescent_mode(pw_decomp, qv, mode, "+", [0, 0, 2.0], s)
    Q = decay_rate(pw_decomp.block(0).eigenvalues[0], 0.5)
    assert b / a == pytest.approx(math.exp(-Q), rel=1e-12)


def test_eta_underflow_cut(pw_decomp):
    full = eta_vectors(pw_decomp, 1.0)
    cut = eta_vectors(pw_decomp, 1.0, z_cut=200.0)
    assert cut.lam.size < full.lam.size
    assert np.all(200.0 / cut.lam < 745)


def test_dual_basis_biorthogonal():
    d = diagonalize(OpticalMedium.from_transport_units(0.8, 0.1), 5, truncated=True)
    for q in (0.0, 0.7, 3.0):
        D = dual_basis(d, q)
        E = D.eta.eta
        N = E.shape[1]
        assert np.allclose(D.zeta.conj().T @ E, np.eye(N), atol=1e-10)
        assert np.allclose(D.zeta_tilde.conj().T @ E, 0, atol=1e-10)


def test_dual_basis_needs_truncation(pw_decomp):
    with pytest.raises(ValueError):
        dual_basis(pw_decomp, 0.5)


def test_plane_waves_reproduce_real_space(pw_decomp):
    cfg = SourceDetectorConfig([0.1, -0.2, 0.0], [0.3, 0.2, 0.9], [0.4, 0.3, 3.0],
                               [-0.2, 0.4, 0.8], 4)
    ref = specific_intensity(cfg, pw_decomp)
    val, est = greens_from_plane_waves(pw_decomp, cfg, return_estimate=True)
    assert abs(val - ref) < 1e-6 * abs(ref)
    assert est < 1e-6 * abs(ref)


def test_plane_waves_below_source(pw_decomp):
    cfg = SourceDetectorConfig([0, 0, 0.0], [0, 0.6, 0.8], [0.2, 0, -3.0], [0.3, 0, -0.9], 3)
    ref = specific_intensity(cfg, pw_decomp)
    assert greens_from_plane_waves(pw_decomp, cfg) == pytest.approx(ref, rel=1e-6)


def test_wrong_branch_is_detected(pw_decomp):
    # negative control: swapping the decaying branches must not reproduce G
    cfg = SourceDetectorConfig([0, 0, 0.0], [0, 0, 1.0], [0, 0, 3.0], [0, 0.6, 0.8], 3)
    ref = specific_intensity(cfg, pw_decomp)
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            bad = greens_from_plane_waves(pw_decomp, cfg, n_q=40, flip_sign=True)
        except Exception:
            return
    assert not abs(bad - ref) < 1e-3 * abs(ref)


def test_quadrature_failure_raises(pw_decomp):
    cfg = SourceDetectorConfig([0, 0, 0.0], [0, 0, 1.0], [0.5, 0, 2.0], [0, 0.6, 0.8], 3)
    with pytest.raises(ConvergenceError):
        greens_from_plane_waves(pw_decomp, cfg, n_q=6, rtol=1e-10)


def test_plane_wave_needs_vertical_offset(pw_decomp):
    cfg = SourceDetectorConfig([0, 0, 0.0], [0, 0, 1.0], [1.0, 0, 0.0], [1.0, 0, 0], 3)
    with pytest.raises(ValueError):
        greens_from_plane_waves(pw_decomp, cfg)
