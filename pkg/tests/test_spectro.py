import warnings

import numpy as np
import pytest

from qpt.dense import (
    basis_state,
    build_map,
    build_x_layer,
    eigendecompose,
    uniform_state,
)
from qpt.errors import AliasingError, AliasingWarning
from qpt.lm import LmSettings
from qpt.modes import Couplings, wrap_phase
from qpt.spectro import (
    PowerSpectrum,
    TimeSeries,
    controlled_u_series,
    detect_peaks,
    dft,
    gauge_align,
    nearest_match_rms,
    predicted_spectrum,
    reconstruct_from_traces,
    reconstruct_levels,
    simulate_series,
)


def _map_and_decomp(theta, chi, n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(Couplings(theta, chi), n)
    return U, eigendecompose(U)


def test_simulate_series_first_sample_and_eigenstate():
    U, d = _map_and_decomp(0.05, 0.04, 3)
    psi0 = uniform_state(3)
    s = simulate_series(U, psi0, basis_index=2, M=16)
    assert s.samples[0] == pytest.approx(abs(psi0.amplitudes[2]) ** 2, abs=1e-14)
    eig = d.vectors[:, 3]
    from qpt.dense import SpinState

    s = simulate_series(U, SpinState(3, eig / np.linalg.norm(eig)), basis_index=1, M=32)
    assert np.ptp(s.samples) < 1e-13  # single phase: constant series


def test_simulate_series_matches_matrix_power_oracle():
    U, _ = _map_and_decomp(0.05, 0.2, 4)
    psi0 = uniform_state(4)
    M = 2048
    series = simulate_series(U, psi0, basis_index=0, M=M)
    psi = psi0.amplitudes.copy()
    brute = np.empty(M)
    for m in range(M):
        brute[m] = abs(psi[0]) ** 2
        psi = U.matrix @ psi
    assert np.abs(series.samples - brute).max() < 1e-10


def test_simulate_series_eigen_vs_power_small_cases():
    rng = np.random.default_rng(11)
    for n, M in ((2, 64), (4, 128), (6, 256)):
        bound = 1.0 / n
        t, c = rng.uniform(-0.9, 0.9, 2) * bound
        U, _ = _map_and_decomp(t, c, n)
        amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        amps /= np.linalg.norm(amps)
        from qpt.dense import SpinState

        psi0 = SpinState(n, amps)
        series = simulate_series(U, psi0, basis_index=1, M=M)
        psi = amps.copy()
        brute = np.empty(M)
        for m in range(M):
            brute[m] = abs(psi[1]) ** 2
            psi = U.matrix @ psi
        assert np.abs(series.samples - brute).max() < 1e-10


def test_simulate_series_aliasing_rejected():
    U, _ = _map_and_decomp(0.3, 0.1, 4)  # 0.3 >= 1/4
    with pytest.raises(AliasingError):
        simulate_series(U, uniform_state(4), 0, 64)
    # configurable k_int admits the same couplings
    s = simulate_series(U, uniform_state(4), 0, 64, k_int=2.0)
    assert len(s) == 64


def test_dft_constant_and_cosine():
    const = TimeSeries("return_probability", np.full(64, 0.7))
    spec = dft(const)
    nz = spec.magnitudes > 1e-10
    assert nz.sum() == 1
    assert spec.frequencies[np.argmax(spec.magnitudes)] == 0.0

    m = np.arange(128)
    w0 = 2 * np.pi * 9 / 128
    spec = dft(TimeSeries("return_probability", np.cos(w0 * m)))
    peaks = spec.frequencies[spec.magnitudes > 1e-9]
    assert np.allclose(np.sort(peaks), [-w0, w0], atol=1e-12)


def test_dft_parseval_and_inverse():
    rng = np.random.default_rng(12)
    x = rng.normal(size=200)
    spec = dft(TimeSeries("return_probability", x))
    lhs = np.sum(spec.magnitudes**2) / len(x)
    rhs = np.sum(x**2)
    assert lhs == pytest.approx(rhs, rel=1e-9)
    assert np.abs(np.fft.ifft(np.fft.fft(x)) - x).max() < 1e-10
    assert np.all(np.diff(spec.frequencies) > 0)
    assert np.all(spec.frequencies > -np.pi) and np.all(spec.frequencies <= np.pi)


def test_detect_peaks_sinusoids():
    m = np.arange(256)
    w1, w2 = 2 * np.pi * 20 / 256, 2 * np.pi * 60 / 256
    spec = dft(TimeSeries("x", np.cos(w1 * m)))
    pl = detect_peaks(spec, threshold_rel=0.5, min_separation=0.01)
    assert len(pl.peaks) == 2
    assert np.allclose(sorted(f for f, _ in pl.peaks), [-w1, w1], atol=1e-12)

    spec = dft(TimeSeries("x", np.cos(w1 * m) + 0.8 * np.cos(w2 * m)))
    pl = detect_peaks(spec, threshold_rel=0.1, min_separation=0.01)
    assert len(pl.peaks) == 4
    mags = [mg for _, mg in pl.peaks]
    assert mags == sorted(mags, reverse=True)
    # min_separation thins neighbouring candidates
    pl = detect_peaks(spec, threshold_rel=0.1, min_separation=2 * abs(w2 - w1))
    freqs = [f for f, _ in pl.peaks]
    for i, f in enumerate(freqs):
        for g in freqs[i + 1:]:
            assert abs(f - g) >= 2 * abs(w2 - w1)


def test_detect_peaks_empty_and_validation():
    spec = PowerSpectrum(frequencies=np.array([]), magnitudes=np.array([]))
    assert detect_peaks(spec, 0.5, 0.1).peaks == []
    with pytest.raises(ValueError):
        detect_peaks(spec, 1.5, 0.1)


def test_map_peaks_lie_on_level_differences():
    U, d = _map_and_decomp(0.05, 0.2, 4)
    series = simulate_series(U, uniform_state(4), basis_index=0, M=1024)
    spec = dft(series)
    # threshold above the Dirichlet sidelobe floor of off-grid lines
    pl = detect_peaks(spec, threshold_rel=0.05, min_separation=4 * spec.bin_width)
    assert len(pl.peaks) >= 3
    diffs = (d.phases[:, None] - d.phases[None, :]).ravel()
    for f, _ in pl.peaks:
        assert np.min(np.abs(diffs - f)) <= spec.bin_width


def test_predicted_spectrum_trivia():
    spec = predicted_spectrum([0.3], [1.0], [1.0], 64)
    assert (spec.magnitudes > 1e-10).sum() == 1  # single level: DC only
    spec = predicted_spectrum([0.0, 2 * np.pi * 7 / 64], [1.0, 1.0], [0.5, 0.5], 64)
    nz = spec.frequencies[spec.magnitudes > 1e-9]
    gap = 2 * np.pi * 7 / 64
    assert np.allclose(np.sort(nz), [-gap, 0.0, gap], atol=1e-12)


def test_predicted_spectrum_matches_simulation():
    U, d = _map_and_decomp(0.05, 0.2, 4)
    psi0 = uniform_state(4)
    M = 512
    observed = dft(simulate_series(U, psi0, 0, M))
    ov_i = d.vectors[0, :]
    ov_psi = d.vectors.conj().T @ psi0.amplitudes
    model = predicted_spectrum(d.phases, ov_i, ov_psi, M)
    assert np.abs(model.magnitudes - observed.magnitudes).max() < 1e-9


def test_reconstruct_levels_synthetic_three_level():
    truth = np.array([0.0, 0.31, 0.52])
    weights = np.array([0.5, 0.3, 0.2])
    spec = predicted_spectrum(truth, weights, np.ones(3), 512)
    rec = reconstruct_levels(spec, 3)
    aligned, _, _ = gauge_align(rec.levels, truth)
    assert np.abs(np.sort(aligned) - truth).max() < 1e-6


def test_reconstruct_levels_init_truth_fixed_point():
    truth = np.array([0.0, 0.27, 0.61, 0.9])
    weights = np.array([0.4, 0.3, 0.2, 0.1])
    spec = predicted_spectrum(truth, weights, np.ones(4), 512)
    rec = reconstruct_levels(spec, 4, init=list(truth))
    aligned, _, _ = gauge_align(rec.levels, truth)
    assert np.abs(np.sort(aligned) - truth).max() < 1e-6


def test_reconstruct_levels_gauge_stability_and_sign():
    n, M = 3, 2048
    st = LmSettings(max_iter=300, ftol=1e-15, gtol=1e-13)
    U, d = _map_and_decomp(0.05, 0.04, n)
    psi0 = basis_state(n, 1)
    spec = dft(simulate_series(U, psi0, 1, M))
    rec1 = reconstruct_levels(spec, 2**n, settings=st)
    assert rec1.residual_norm < 1e-8
    aligned, _, rms = gauge_align(rec1.levels, d.phases)
    assert rms < 1e-5
    # shifting the whole spectrum is invisible to the return-probability data
    from qpt.dense import DenseUnitary

    U2 = DenseUnitary(n, np.exp(-1j * 0.2) * U.matrix, theta=U.theta, chi=U.chi)
    spec2 = dft(simulate_series(U2, psi0, 1, M))
    rec2 = reconstruct_levels(spec2, 2**n, settings=st)
    assert np.abs(rec1.levels - rec2.levels).max() < 1e-9
    # global sign flip of the couplings negates the spectrum; gauge-aligned
    # reconstructions agree
    U3, _ = _map_and_decomp(-0.05, -0.04, n)
    spec3 = dft(simulate_series(U3, psi0, 1, M))
    rec3 = reconstruct_levels(spec3, 2**n, settings=st)
    aligned, _, rms = gauge_align(rec3.levels, rec1.levels)
    assert rms < 1e-6


def test_reconstruct_levels_validation():
    spec = predicted_spectrum([0.0, 0.3], [1, 1], [1, 1], 16)
    with pytest.raises(ValueError):
        reconstruct_levels(spec, 16)  # M not >> levels


def test_controlled_u_series_trivia():
    _, d = _map_and_decomp(0.05, 0.04, 3)
    re_s, im_s = controlled_u_series(d, 32)
    assert re_s.samples[0] == pytest.approx(1.0, abs=1e-14)
    assert im_s.samples[0] == pytest.approx(0.0, abs=1e-14)
    d1 = eigendecompose(build_x_layer(0.3, 1))
    re1, im1 = controlled_u_series(d1, 16)
    m = np.arange(16)
    assert np.abs(re1.samples - np.cos(0.3 * m)).max() < 1e-12
    assert np.abs(im1.samples).max() < 1e-12


def test_trace_dft_peaks_at_eigenphases():
    _, d = _map_and_decomp(0.05, 0.04, 3)
    M = 2048
    re_s, im_s = controlled_u_series(d, M)
    rec = reconstruct_from_traces(re_s, im_s)
    binw = 2 * np.pi / M
    for p in d.phases:
        assert np.min(np.abs(rec.levels - p)) <= binw


def test_reconstruct_from_traces_identity_and_field():
    d = eigendecompose(build_x_layer(0.0, 3))
    re_s, im_s = controlled_u_series(d, 64)
    rec = reconstruct_from_traces(re_s, im_s)
    assert len(rec.levels) == 8
    assert np.abs(rec.levels).max() < 1e-12
    assert rec.degeneracies.tolist() == [8]

    d = eigendecompose(build_x_layer(0.1, 2))
    M = 1024
    re_s, im_s = controlled_u_series(d, M)
    rec = reconstruct_from_traces(re_s, im_s)
    assert rec.degeneracies.tolist() == [1, 2, 1]
    assert np.allclose(rec.weights, [0.25, 0.5, 0.25], atol=1e-3)
    assert np.allclose(np.sort(rec.levels), [-0.2, 0.0, 0.0, 0.2], atol=2 * np.pi / M)


def test_trace_sign_convention_asymmetric_spectrum():
    # synthetic decomposition with an asymmetric multiset pins the sign
    from qpt.dense import EigenDecomp

    phases = np.array([0.1, 0.3, 0.3, 0.5])
    d = EigenDecomp(phases=phases, vectors=np.eye(4, dtype=complex))
    re_s, im_s = controlled_u_series(d, 4096)
    re_s.meta["n_qubits"] = 2
    im_s.meta["n_qubits"] = 2
    rec = reconstruct_from_traces(re_s, im_s)
    assert np.allclose(np.sort(rec.levels), np.sort(phases), atol=2 * np.pi / 4096)


def test_nearest_match_rms_helper():
    assert nearest_match_rms([0.0, 1.0], [0.0, 1.0, 1.0]) == 0.0
    assert nearest_match_rms([0.0], [0.5]) == pytest.approx(0.5)
