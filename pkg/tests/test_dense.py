import math
import warnings

import numpy as np
import pytest

from qpt.dense import (
    SpinState,
    basis_state,
    bond_sums,
    build_map,
    build_x_layer,
    build_zz_layer,
    concurrence,
    eigendecompose,
    entanglement_sweep,
    exact_even_ground_state,
    ground_degeneracy,
    ground_state,
    parity_sector_phases,
    reduced_density,
    trace_moment,
    uniform_state,
    unitarity_defect,
)
from qpt.errors import AliasingWarning, CapacityError
from qpt.modes import (
    Couplings,
    assemble_all_phases,
    assemble_parity_phases,
    exact_sector_ground_phase,
    ground_phase,
    periodic_grid,
    wrap_phase,
)


def _brute_bond_sum(index, n, periodic=True):
    bits = [(index >> (n - 1 - j)) & 1 for j in range(n)]
    s = [1 - 2 * b for b in bits]
    total = 0
    bonds = range(n) if periodic else range(n - 1)
    for j in bonds:
        total += s[j] * s[(j + 1) % n]
    return total


def test_zz_layer_aligned_string():
    n, chi = 5, 0.37
    U = build_zz_layer(chi, n)
    assert U.matrix[0, 0] == pytest.approx(np.exp(-1j * chi * n), abs=1e-14)


def test_zz_layer_two_sites_double_bond():
    U = build_zz_layer(0.3, 2)
    expect = np.exp(-1j * np.array([0.6, -0.6, -0.6, 0.6]))
    assert np.allclose(np.diag(U.matrix), expect, atol=1e-14)


def test_zz_layer_brute_force_enumeration():
    chi, n = np.pi / 4, 3
    U = build_zz_layer(chi, n)
    idx_010 = 0b010
    assert U.matrix[idx_010, idx_010] == pytest.approx(
        np.exp(-1j * chi * _brute_bond_sum(idx_010, n)), abs=1e-14
    )
    for n in (2, 3, 5):
        for periodic in (True, False):
            sums = bond_sums(n, periodic)
            for i in range(2**n):
                assert sums[i] == _brute_bond_sum(i, n, periodic)


def test_x_layer_examples():
    assert np.allclose(build_x_layer(0.0, 3).matrix, np.eye(8), atol=1e-15)
    U1 = build_x_layer(np.pi / 2, 1).matrix
    assert np.allclose(U1, -1j * np.array([[0, 1], [1, 0]]), atol=1e-14)
    d = eigendecompose(build_x_layer(0.1, 2))
    assert np.allclose(d.phases, [-0.2, 0.0, 0.0, 0.2], atol=1e-12)


def test_build_map_limits_and_unitarity():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(Couplings(0.4, 0.0), 3)
        assert np.allclose(U.matrix, build_x_layer(0.4, 3).matrix, atol=1e-14)
        U = build_map(Couplings(0.0, 0.4), 3)
        assert np.allclose(U.matrix, build_zz_layer(0.4, 3).matrix, atol=1e-14)
        U = build_map(Couplings(0.2, 0.3), 4)
    m = U.matrix
    assert np.abs(m @ m.conj().T - np.eye(16)).max() < 1e-12
    assert unitarity_defect(U) < 1e-12


def test_capacity_ceiling():
    with pytest.raises(CapacityError):
        build_x_layer(0.1, 13)
    with pytest.raises(CapacityError):
        build_zz_layer(0.1, 13)


def test_aliasing_warning_emitted():
    with pytest.warns(AliasingWarning):
        build_map(Couplings(0.9, 0.9), 6)


def test_eigendecompose_identity_and_residual():
    ident = build_x_layer(0.0, 2)
    d = eigendecompose(ident)
    assert np.allclose(d.phases, 0.0, atol=1e-14)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(Couplings(0.7, 0.3), 4)
    d = eigendecompose(U)
    assert np.all(np.diff(d.phases) >= 0)
    for n in range(16):
        res = U.matrix @ d.vectors[:, n] - np.exp(-1j * d.phases[n]) * d.vectors[:, n]
        assert np.linalg.norm(res) < 1e-8
    assert np.abs(d.vectors.conj().T @ d.vectors - np.eye(16)).max() < 1e-10


def test_spectrum_invariant_under_global_flip():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(Couplings(0.45, 0.8), 4)
    flip = np.zeros((16, 16))
    for s in range(16):
        flip[15 ^ s, s] = 1.0
    conj = flip @ U.matrix @ flip
    p1 = np.sort(wrap_phase(-np.angle(np.linalg.eigvals(U.matrix))))
    p2 = np.sort(wrap_phase(-np.angle(np.linalg.eigvals(conj))))
    assert np.abs(p1 - p2).max() < 1e-10


@pytest.mark.parametrize("n", [4, 6, 8])
def test_free_fermion_crosscheck_both_sectors(n):
    c = Couplings(0.15, -0.15)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(c, n)
    for even, sector in ((True, "even"), (False, "odd")):
        dense_ph = parity_sector_phases(U, even)
        analytic = assemble_parity_phases(c, n, sector)
        assert len(dense_ph) == 2 ** (n - 1)
        assert np.abs(wrap_phase(dense_ph - analytic)).max() < 1e-8
    d = eigendecompose(U)
    assert np.abs(wrap_phase(d.phases - assemble_all_phases(c, n))).max() < 1e-8


def test_ground_state_field_only():
    U = build_map(Couplings(0.3, 0.0), 2)
    d = eigendecompose(U)
    g = ground_state(d)
    assert d.phases[0] == pytest.approx(-0.6, abs=1e-12)
    # product of single-site sigma_x eigenvectors of eigenvalue -1
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    target = np.kron(minus, minus)
    assert abs(np.vdot(target, g.amplitudes)) == pytest.approx(1.0, abs=1e-10)


def test_ground_state_exchange_only_tie_break():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(Couplings(0.0, 0.3), 4)
    d = eigendecompose(U)
    assert d.phases[0] == pytest.approx(-1.2, abs=1e-12)
    assert ground_degeneracy(d) == 2  # |0101> and |1010>
    g = ground_state(d)
    assert abs(g.amplitudes[0b0101]) == pytest.approx(1.0, abs=1e-10)


def test_reduced_density_products():
    rho = reduced_density(basis_state(4, 0), 0)
    assert np.allclose(rho, np.diag([1.0, 0, 0, 0]), atol=1e-14)
    amps = np.zeros(16, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    ghz = SpinState(4, amps)
    for site in range(4):
        rho = reduced_density(ghz, site)
        assert np.allclose(rho, np.diag([0.5, 0, 0, 0.5]), atol=1e-14)


def test_reduced_density_matches_index_sum_oracle():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(Couplings.from_polar(1.9, 0.6), 6)
    g = exact_even_ground_state(U)
    rho = reduced_density(g, 0)
    # brute-force: rho[ab, cd] = sum_rest psi[a,b,rest] conj(psi[c,d,rest])
    psi = g.amplitudes.reshape([2] * 6)
    brute = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for b in range(2):
            for cc in range(2):
                for dd in range(2):
                    brute[2 * a + b, 2 * cc + dd] = np.sum(
                        psi[a, b] * psi[cc, dd].conj()
                    )
    assert np.abs(rho - brute).max() < 1e-12
    assert np.abs(rho - rho.conj().T).max() < 1e-12
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-10
    # wrap-around pair (N-1, 0)
    rho_wrap = reduced_density(g, 5)
    psi_rolled = np.moveaxis(psi, [5, 0], [0, 1]).reshape(4, -1)
    assert np.abs(rho_wrap - psi_rolled @ psi_rolled.conj().T).max() < 1e-12


def test_concurrence_reference_states():
    assert concurrence(np.diag([1.0, 0, 0, 0])) == 0.0
    bell = np.zeros((4, 4))
    bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
    assert concurrence(bell) == pytest.approx(1.0, abs=1e-12)
    assert concurrence(np.diag([0.5, 0, 0, 0.5])) == pytest.approx(0.0, abs=1e-12)


def test_concurrence_bounds_and_local_unitary_invariance():
    rng = np.random.default_rng(7)
    for _ in range(25):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho).real
        cval = concurrence(rho)
        assert 0.0 <= cval <= 1.0 + 1e-12
        q1, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        q2, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        u = np.kron(q1, q2)
        assert concurrence(u @ rho @ u.conj().T) == pytest.approx(cval, abs=1e-10)


def test_entanglement_sweep_product_limit_and_determinism():
    rows = entanglement_sweep(0.4, np.array([0.0, 1e-7, 2e-7]), 4)
    for _, e, _ in rows:
        # chi = 0 axis: product ground state (1e-5 is the noise floor of
        # the concurrence formula: sqrt of eigenvalue roundoff)
        assert e < 1e-5
    grid = np.linspace(0.3, 1.2, 7)
    rows1 = entanglement_sweep(1.1, grid, 4)
    rows2 = entanglement_sweep(1.1, grid, 4)
    assert rows1 == rows2


def test_trace_moment_examples():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(Couplings(0.2, 0.1), 4)
    d = eigendecompose(U)
    assert trace_moment(d, 0) == pytest.approx(1.0, abs=1e-14)
    d1 = eigendecompose(build_x_layer(0.37, 1))
    for m in (1, 2, 7):
        assert trace_moment(d1, m) == pytest.approx(math.cos(m * 0.37), abs=1e-12)
    um = np.eye(16, dtype=complex)
    for m in range(65):
        assert trace_moment(d, m) == pytest.approx(np.trace(um) / 16, abs=1e-10)
        um = um @ U.matrix


def test_dense_ground_phase_matches_momentum_core():
    # aliasing-safe: direct comparison of the smallest dense phase
    c = Couplings.from_polar(0.1, 0.3)
    U = build_map(c, 10)
    phases = np.sort(wrap_phase(-np.angle(np.linalg.eigvals(U.matrix))))
    per_site = abs(phases[0] - ground_phase(c, periodic_grid(10))) / 10
    assert per_site < 1e-3
    # r = 0.5 wraps modulo 2 pi at N = 10; compare against the analytic
    # per-mode signature through the wrapped distance of the exact ground
    c = Couplings.from_polar(0.5, 0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(c, 10)
    phases = wrap_phase(-np.angle(np.linalg.eigvals(U.matrix)))
    target = ground_phase(c, periodic_grid(10))
    nearest = np.min(np.abs(wrap_phase(phases - target)))
    assert nearest / 10 < 5e-3


def test_exact_even_ground_matches_min_phase_when_safe():
    c = Couplings.from_polar(0.05, 0.7)
    U = build_map(c, 6)
    d = eigendecompose(U)
    g_min = ground_state(d)
    g_exact = exact_even_ground_state(U)
    assert abs(np.vdot(g_min.amplitudes, g_exact.amplitudes)) == pytest.approx(1.0, abs=1e-8)
    assert wrap_phase(exact_sector_ground_phase(c, 6, "even")) == pytest.approx(
        d.phases[0], abs=1e-10
    )


def test_uniform_state_normalized():
    s = uniform_state(5)
    assert np.sum(np.abs(s.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        SpinState(2, np.array([1.0, 1.0, 0, 0], dtype=complex))
