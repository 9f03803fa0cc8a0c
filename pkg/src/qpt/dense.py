"""Exact dense construction and diagonalization of the map on up to 12 qubits.

Basis conventions: computational basis index i encodes spins left-to-right,
qubit 0 in the most significant bit (matching repeated numpy.kron); spin
value s = +1 for bit 0.  The map is built literally as the gate sequence
U = ZZ(chi) . X(theta), the theta layer acting first on the state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

from .errors import AliasingWarning, CapacityError, EigensolverError
from .modes import Couplings, exact_sector_ground_phase, wrap_phase

MAX_QUBITS = 12


@dataclass(frozen=True)
class DenseUnitary:
    n_qubits: int
    matrix: np.ndarray
    theta: float | None = None
    chi: float | None = None
    periodic: bool | None = None


@dataclass(frozen=True)
class EigenDecomp:
    """Phases ascending in (-pi, pi]; column n of `vectors` satisfies
    U v_n = exp(-i phases[n]) v_n."""

    phases: np.ndarray
    vectors: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.phases)


@dataclass(frozen=True)
class SpinState:
    n_qubits: int
    amplitudes: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state not normalized: sum |amp|^2 = {norm!r}")


def basis_state(n_qubits: int, index: int) -> SpinState:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[index] = 1.0
    return SpinState(n_qubits, amps, label=f"basis:{index}")


def uniform_state(n_qubits: int) -> SpinState:
    amps = np.full(2**n_qubits, 2.0 ** (-n_qubits / 2.0), dtype=complex)
    return SpinState(n_qubits, amps, label="uniform")


def _check_capacity(n_qubits: int) -> None:
    if n_qubits > MAX_QUBITS:
        raise CapacityError(
            f"{n_qubits} qubits exceeds the dense ceiling of {MAX_QUBITS}; "
            "use the momentum-space solver instead"
        )


def bond_sums(n_qubits: int, periodic: bool = True) -> np.ndarray:
    """sum_n s_n s_{n+1} per basis string, s = 1 - 2*bit."""
    idx = np.arange(2**n_qubits)
    bits = (idx[:, None] >> (n_qubits - 1 - np.arange(n_qubits))) & 1
    s = 1 - 2 * bits
    if periodic:
        return (s * np.roll(s, -1, axis=1)).sum(axis=1)
    return (s[:, :-1] * s[:, 1:]).sum(axis=1)


def zz_phases(chi: float, n_qubits: int, periodic: bool = True) -> np.ndarray:
    """Diagonal of exp(-i H_chi) as a vector."""
    if n_qubits < 2:
        raise ValueError("zz layer needs at least 2 qubits")
    _check_capacity(n_qubits)
    return np.exp(-1j * chi * bond_sums(n_qubits, periodic))


def build_zz_layer(chi: float, n_qubits: int, periodic: bool = True) -> DenseUnitary:
    """exp(-i chi sum_n sz_n sz_{n+1}); the N=2 periodic ring counts its
    single bond twice, per the literal n = 1..N sum."""
    return DenseUnitary(n_qubits, np.diag(zz_phases(chi, n_qubits, periodic)), chi=chi)


def build_x_layer(theta: float, n_qubits: int) -> DenseUnitary:
    """N-fold tensor power of exp(-i theta sx)."""
    if n_qubits < 1:
        raise ValueError("x layer needs at least 1 qubit")
    _check_capacity(n_qubits)
    r = np.array(
        [[np.cos(theta), -1j * np.sin(theta)], [-1j * np.sin(theta), np.cos(theta)]],
        dtype=complex,
    )
    return DenseUnitary(n_qubits, reduce(np.kron, [r] * n_qubits), theta=theta)


def build_map(c: Couplings, n_qubits: int, periodic: bool = True,
              k_int: float = 1.0) -> DenseUnitary:
    """U(chi, theta) = ZZ(chi) . X(theta) as matrices (theta layer acts first)."""
    if n_qubits < 2:
        raise ValueError("map needs at least 2 qubits")
    _check_capacity(n_qubits)
    if max(abs(c.theta), abs(c.chi)) >= k_int / n_qubits:
        warnings.warn(
            f"couplings violate the aliasing bound max(|theta|,|chi|) < "
            f"{k_int / n_qubits:.4g}; quasi-energies wrap modulo 2*pi",
            AliasingWarning,
        )
    mat = zz_phases(c.chi, n_qubits, periodic)[:, None] * build_x_layer(
        c.theta, n_qubits
    ).matrix
    return DenseUnitary(n_qubits, mat, theta=c.theta, chi=c.chi, periodic=periodic)


def unitarity_defect(U: DenseUnitary, n_probe: int = 8) -> float:
    """max |(U U+ - I)| entry; spot-checked on random columns above 8 qubits."""
    m = U.matrix
    if U.n_qubits <= 8:
        return float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))
    rng = np.random.default_rng(0)
    cols = rng.choice(m.shape[0], size=n_probe, replace=False)
    probe = m.conj().T[:, cols]
    return float(np.max(np.abs(m @ probe - np.eye(m.shape[0])[:, cols])))


def eigendecompose(U: DenseUnitary) -> EigenDecomp:
    """Phases and orthonormal eigenvectors via a complex Schur (normal-matrix)
    factorization; phases from atan2 of the diagonal expectations <v|U|v>."""
    if unitarity_defect(U) > 1e-8:
        raise ValueError("matrix is not unitary to 1e-8; refusing to decompose")
    try:
        t, z = scipy.linalg.schur(U.matrix, output="complex")
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise EigensolverError(
            f"Schur failed: {exc}; cond(U) = {np.linalg.cond(U.matrix):.3e}"
        ) from exc
    diag = np.diag(t)
    phases = wrap_phase(-np.arctan2(diag.imag, diag.real))
    order = np.argsort(phases, kind="stable")
    return EigenDecomp(phases=phases[order], vectors=z[:, order])


def ground_state(decomp: EigenDecomp) -> SpinState:
    """Eigenvector of the smallest phase in (-pi, pi]; ties break by index.

    At couplings violating the aliasing bound the smallest wrapped phase
    need not be the physical ground state; see `exact_ground_index`.
    """
    v = decomp.vectors[:, 0]
    n = int(np.log2(len(v)))
    return SpinState(n, v / np.linalg.norm(v), label="ground")


def ground_degeneracy(decomp: EigenDecomp, tol: float = 1e-10) -> int:
    """Number of phases within tol of the smallest one."""
    return int(np.sum(np.abs(decomp.phases - decomp.phases[0]) <= tol))


def trace_moment(decomp: EigenDecomp, m: int) -> complex:
    """Tr(U^m) / 2^N = sum_n exp(-i m E_n) / 2^N."""
    if m < 0:
        raise ValueError("m must be >= 0")
    return complex(np.sum(np.exp(-1j * m * decomp.phases)) / decomp.n_states)


def reduced_density(state: SpinState, site: int) -> np.ndarray:
    """4x4 density matrix of qubits (site, site+1 mod N); Hermitian, trace 1."""
    n = state.n_qubits
    if not 0 <= site < n:
        raise ValueError("site out of range")
    nxt = (site + 1) % n
    psi = state.amplitudes.reshape([2] * n)
    psi = np.moveaxis(psi, [site, nxt], [0, 1])
    m = psi.reshape(4, -1)
    return m @ m.conj().T


_SYY = np.kron(
    np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]])
)


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence C = max(0, l1 - l2 - l3 - l4) of a 4x4 density."""
    rho_tilde = _SYY @ rho.conj() @ _SYY
    lam = np.linalg.eigvals(rho @ rho_tilde)
    lam = np.sqrt(np.clip(lam.real, 0.0, None))
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def parity_isometry(n_qubits: int, even: bool = True) -> np.ndarray:
    """Columns span the +1 (even) or -1 block of the global flip X^(x)N."""
    dim = 2**n_qubits
    sign = 1.0 if even else -1.0
    cols = np.empty((dim, dim // 2), dtype=complex)
    j = 0
    for s in range(dim):
        sb = (dim - 1) ^ s
        if s < sb:
            v = np.zeros(dim, dtype=complex)
            v[s] = 1.0 / np.sqrt(2.0)
            v[sb] = sign / np.sqrt(2.0)
            cols[:, j] = v
            j += 1
    return cols


def parity_sector_phases(U: DenseUnitary, even: bool = True) -> np.ndarray:
    """Sorted eigenphases of one global-spin-flip parity block (2^(N-1) values)."""
    v = parity_isometry(U.n_qubits, even)
    w = v.conj().T @ U.matrix @ v
    lam = np.linalg.eigvals(w)
    return np.sort(wrap_phase(-np.angle(lam)))


def exact_even_ground_state(U: DenseUnitary) -> SpinState:
    """Ground state of the map, selected inside the even-parity block.

    The physical ground of the periodic even-N ring lives in the global
    spin-flip +1 sector (antiperiodic fermions).  It is identified by its
    exact unwrapped phase from the free-fermion construction, which keeps
    the selection correct when the spectrum wraps modulo 2*pi
    (aliasing-violating couplings); ties break by eigenvector index.
    Requires a map built by `build_map` (couplings recorded).
    """
    if U.theta is None or U.chi is None:
        raise ValueError("exact ground selection needs the map's couplings")
    c = Couplings(U.theta, U.chi)
    target = wrap_phase(exact_sector_ground_phase(c, U.n_qubits, "even"))
    iso = parity_isometry(U.n_qubits, even=True)
    w = iso.conj().T @ U.matrix @ iso
    t, z = scipy.linalg.schur(w, output="complex")
    phases = wrap_phase(-np.angle(np.diag(t)))
    idx = int(np.argmin(np.abs(wrap_phase(phases - target))))
    v = iso @ z[:, idx]
    return SpinState(U.n_qubits, v / np.linalg.norm(v), label="ground")


def entanglement_sweep(
    r: float, phi_grid, n_qubits: int, periodic: bool = True
) -> list[tuple[float, float, float]]:
    """(phi, concurrence, d concurrence/d phi) of the ground state's
    nearest-neighbour marginal (site 0 by translation invariance).

    The derivative is a central difference on the grid (one-sided at the
    ends).  The ground state is the exact even-sector one, which matches
    the smallest-phase state whenever the aliasing bound holds.
    """
    phi_grid = np.asarray(phi_grid, dtype=float)
    if n_qubits > MAX_QUBITS:
        raise CapacityError(f"{n_qubits} qubits exceeds the dense ceiling")
    conc = np.empty(len(phi_grid))
    for i, phi in enumerate(phi_grid):
        conc[i] = _sweep_point(r, phi, n_qubits, periodic)
    deriv = np.gradient(conc, phi_grid)
    return [(float(p), float(e), float(d)) for p, e, d in zip(phi_grid, conc, deriv)]


def _sweep_point(r: float, phi: float, n_qubits: int, periodic: bool) -> float:
    c = Couplings.from_polar(r, phi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = build_map(c, n_qubits, periodic)
    g = exact_even_ground_state(U)
    return concurrence(reduced_density(g, 0))
