"""Closed-form free-fermion solver for the separated Ising map.

The map U(chi, theta) = exp(-i H_chi) exp(-i H_theta) acts on a ring of N
spins with H_chi = chi * sum_n sz_n sz_{n+1} and H_theta = theta * sum_n sx_n.
A Jordan-Wigner transformation makes both layers quadratic in fermions, and
the map factorises over momentum pairs {k, -k}.  Each pair factor is a
rotation in the su(2) algebra spanned by the pair operators nu_1, nu_2, nu_3,
which gives every per-mode quantity in closed form:

    eta_k   = cos(theta) cos(chi) - cos(k) sin(theta) sin(chi)
    E_k     = arccos(eta_k)                      (quasi-energy, in [0, pi])
    kappa_k = arccos(eta_k) / sqrt(1 - eta_k^2)  (effective-Hamiltonian scale)
    gamma_k = rotation-axis 3-vector, kappa_k * |gamma_k| = E_k

Conventions:

* eigenvalue phases follow U|phi> = exp(-i E)|phi>, E in (-pi, pi];
* polar couplings are theta = r cos(phi), chi = r sin(phi), so the
  theta = chi critical line sits at phi = pi/4;
* `ground_phase` is the per-mode sum -sum_k E_k at the bare couplings (the
  analytic signature used for the critical-point figures);
* exact finite-N parity blocks carry doubled couplings per {k, -k} pair;
  `assemble_parity_phases` reproduces the dense spectrum of the spin map to
  machine precision (even sector <-> antiperiodic grid, odd <-> periodic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from .errors import SingularityError, SingularMapError

# kappa switches to its Taylor series here to avoid 0/0 at eta -> 1
_KAPPA_SERIES_EDGE = 1.0 - 1e-6


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    w = np.mod(np.asarray(x, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return w if w.ndim else float(w)


@dataclass(frozen=True)
class Couplings:
    """Field strength theta and exchange strength chi, both in radians."""

    theta: float
    chi: float

    @classmethod
    def from_polar(cls, r: float, phi: float) -> "Couplings":
        return cls(theta=r * math.cos(phi), chi=r * math.sin(phi))

    @property
    def r(self) -> float:
        return math.hypot(self.theta, self.chi)

    @property
    def phi(self) -> float:
        return math.atan2(self.chi, self.theta)

    def flipped(self) -> "Couplings":
        return Couplings(-self.theta, -self.chi)


class Sector(str, Enum):
    PERIODIC = "periodic"
    ANTIPERIODIC = "antiperiodic"


@dataclass(frozen=True)
class MomentumGrid:
    """Discrete momentum grid; all k in [-pi, pi), exactly n_sites values."""

    n_sites: int
    sector: Sector
    k_values: np.ndarray

    def __len__(self) -> int:
        return self.n_sites


def periodic_grid(n_sites: int) -> MomentumGrid:
    """k = 2 pi m / N for m = -N/2 .. (N-2)/2 (odd N uses the centred range)."""
    if n_sites < 1:
        raise ValueError("n_sites must be positive")
    m = np.arange(-(n_sites // 2), n_sites - n_sites // 2)
    k = 2.0 * np.pi * m / n_sites
    return MomentumGrid(n_sites, Sector.PERIODIC, k)


def antiperiodic_grid(n_sites: int) -> MomentumGrid:
    """k = pi (2m+1) / N; half-integer modes of the even fermion-parity sector."""
    if n_sites < 1:
        raise ValueError("n_sites must be positive")
    m = np.arange(-(n_sites // 2), n_sites - n_sites // 2)
    k = np.pi * (2 * m + 1) / n_sites
    k = np.mod(k + np.pi, 2.0 * np.pi) - np.pi  # odd N wraps the k = pi mode
    return MomentumGrid(n_sites, Sector.ANTIPERIODIC, np.sort(k))


@dataclass(frozen=True)
class ModeData:
    k: float
    eta: float
    kappa: float
    gamma: np.ndarray
    energy: float


def mode_eta(c: Couplings, k):
    """eta_k = cos(theta)cos(chi) - cos(k) sin(theta)sin(chi), clipped to [-1, 1]."""
    e = np.cos(c.theta) * np.cos(c.chi) - np.cos(k) * np.sin(c.theta) * np.sin(c.chi)
    e = np.clip(e, -1.0, 1.0)
    return e if np.ndim(k) else float(e)


def mode_kappa(eta, eps_singular: float = 1e-9):
    """arccos(eta)/sqrt(1 - eta^2), continuous at eta = 1 (value 1).

    Near eta = 1 the ratio is evaluated through its Taylor series in
    u = 1 - eta to avoid the 0/0; eta at (or numerically at) -1 raises,
    since kappa diverges at the pi quasi-energy boundary.
    """
    e = np.asarray(eta, dtype=float)
    if np.any(e <= -1.0 + eps_singular):
        raise SingularityError(
            "kappa diverges: eta within %.1e of the -1 boundary" % eps_singular
        )
    out = np.empty_like(e)
    near = e > _KAPPA_SERIES_EDGE
    u = 1.0 - e[near]
    out[near] = 1.0 + u / 3.0 + 2.0 * u * u / 15.0 + 2.0 * u**3 / 35.0
    rest = ~near
    out[rest] = np.arccos(e[rest]) / np.sqrt(1.0 - e[rest] ** 2)
    return out if out.ndim else float(out)


def mode_gamma(c: Couplings, k):
    """Rotation-axis vector of the combined per-mode rotation.

    gamma_k = (sin k cos(theta) sin(chi), -sin k sin(theta) sin(chi),
               sin(theta)cos(chi) + cos k cos(theta) sin(chi));
    |gamma_k| = sqrt(1 - eta_k^2) so that kappa_k |gamma_k| = E_k.
    """
    k = np.asarray(k, dtype=float)
    st, ct = math.sin(c.theta), math.cos(c.theta)
    sx, cx = math.sin(c.chi), math.cos(c.chi)
    g = np.stack(
        [
            np.sin(k) * ct * sx,
            -np.sin(k) * st * sx,
            st * cx + np.cos(k) * ct * sx,
        ],
        axis=-1,
    )
    return g


def quasi_energy(c: Couplings, k):
    """E_k = arccos(eta_k), in [0, pi]."""
    e = np.arccos(mode_eta(c, k))
    return e if np.ndim(k) else float(e)


def mode_data(c: Couplings, k: float) -> ModeData:
    eta = mode_eta(c, k)
    return ModeData(
        k=float(k),
        eta=eta,
        kappa=mode_kappa(eta),
        gamma=mode_gamma(c, k),
        energy=quasi_energy(c, k),
    )


def ground_phase(c: Couplings, grid: MomentumGrid) -> float:
    """Per-mode ground argument Omega^(1) = -sum_k E_k (extensive, negative)."""
    if len(grid) == 0:
        raise ValueError("grid must be non-empty")
    return -float(np.sum(quasi_energy(c, grid.k_values)))


def _omega(r: float, phi: float, grid: MomentumGrid) -> float:
    return ground_phase(Couplings.from_polar(r, phi), grid)


def d1_ground_phase(r: float, phi: float, grid: MomentumGrid, h: float = 1e-3) -> float:
    """Central first difference of Omega^(1) in phi at fixed r."""
    if h <= 0:
        raise ValueError("h must be positive")
    return (_omega(r, phi + h, grid) - _omega(r, phi - h, grid)) / (2.0 * h)


def d2_ground_phase(r: float, phi: float, grid: MomentumGrid, h: float = 1e-3) -> float:
    """Central second difference of Omega^(1) in phi at fixed r.

    Omega is negative and concave at the transition, so this dips to large
    negative values at phi = pi/4; the critical point is located by the
    argmax of the magnitude (see `critical_phi`).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    return (
        _omega(r, phi + h, grid) - 2.0 * _omega(r, phi, grid) + _omega(r, phi - h, grid)
    ) / (h * h)


def critical_phi(phis, d2_values) -> float:
    """phi at the singular curvature response: argmax of -d2(Omega).

    Ties break toward smaller phi (argmax returns the first maximum).
    """
    phis = np.asarray(phis, dtype=float)
    d2 = np.asarray(d2_values, dtype=float)
    return float(phis[np.argmax(-d2)])


def bulk_grid(n_sites: int) -> MomentumGrid:
    """Periodic grid with the k = -pi boundary mode removed.

    Matches the integral cutoff at pi - pi/N used for the log-divergence
    analysis: the boundary mode is gapless on the theta = chi line and
    contributes a |phi - pi/4| kink rather than curvature.
    """
    g = periodic_grid(n_sites)
    keep = np.abs(np.abs(g.k_values) - np.pi) > 0.5 * np.pi / n_sites
    return MomentumGrid(int(keep.sum()), Sector.PERIODIC, g.k_values[keep])


def spectral_gap(c: Couplings, grid: MomentumGrid) -> float:
    """min_k E_k over the grid."""
    if len(grid) == 0:
        raise ValueError("grid must be non-empty")
    return float(np.min(quasi_energy(c, grid.k_values)))


@dataclass(frozen=True)
class FourierCoeffs:
    """Cosine coefficients of kappa_k: kappa_k = sum_l a_l cos(l k)."""

    couplings: Couplings
    a: np.ndarray
    n_quadrature: int


def fourier_coeffs(c: Couplings, l_max: int, n_quadrature: int | None = None) -> FourierCoeffs:
    """a_0 = (1/pi) int_0^pi kappa dk, a_l = (2/pi) int_0^pi kappa cos(lk) dk.

    Composite trapezoid on a uniform grid of `n_quadrature` points over
    [0, pi] (spectrally accurate: kappa is smooth and even-periodic as long
    as eta stays off the -1 boundary).
    """
    if l_max < 0:
        raise ValueError("l_max must be >= 0")
    if n_quadrature is None:
        n_quadrature = max(8 * l_max, 256)
    if n_quadrature < 8 * l_max:
        raise ValueError("n_quadrature must be at least 8 * l_max")
    eta_min = min(mode_eta(c, 0.0), mode_eta(c, np.pi))
    if eta_min <= -1.0 + 1e-9:
        raise SingularityError("kappa singular on the k grid (eta reaches -1)")
    k = np.linspace(0.0, np.pi, n_quadrature)
    kap = mode_kappa(mode_eta(c, k))
    w = np.full(n_quadrature, k[1] - k[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    ls = np.arange(l_max + 1)
    a = (2.0 / np.pi) * (np.cos(np.outer(ls, k)) @ (kap * w))
    a[0] *= 0.5
    return FourierCoeffs(couplings=c, a=a, n_quadrature=n_quadrature)


def reconstruct_kappa(coeffs: FourierCoeffs, k):
    """Evaluate the truncated cosine series sum_l a_l cos(lk)."""
    k = np.asarray(k, dtype=float)
    ls = np.arange(len(coeffs.a))
    return np.cos(np.multiply.outer(k, ls)) @ coeffs.a


class HbarTermWeights(NamedTuple):
    """Range-l amplitudes of the effective Hamiltonian's fermionic terms.

    pairing      : cos(theta) sin(chi) sector, (c+ c+ - c c) at range l
    pairing_skew : -sin(theta) sin(chi) sector, (c+ c+ + c c) at range l
    hopping      : (c+ c - c c+) at range l
    """

    l: int
    pairing: float
    pairing_skew: float
    hopping: float


def hbar_term_weights(coeffs: FourierCoeffs) -> list[HbarTermWeights]:
    """Amplitudes of range-l terms from the a_l series (l = 1 .. l_max - 1).

    The sine expansion of kappa_k sin k gives the range-l coefficient
    (a_{l-1} - a_{l+1})/2 with an extra a_0/2 at l = 1 (the l = 0 series
    term carries a full a_0).  Hopping mixes the bare a_l with the same
    combination.  All weights decay at the rate of a_l.
    """
    a = coeffs.a
    if len(a) < 3:
        raise ValueError("need l_max >= 2 to form term weights")
    c = coeffs.couplings
    st, ct = math.sin(c.theta), math.cos(c.theta)
    sx, cx = math.sin(c.chi), math.cos(c.chi)
    out = []
    for l in range(1, len(a) - 1):
        comb = 0.5 * (a[l - 1] - a[l + 1])
        even = 0.5 * (a[l - 1] + a[l + 1])
        if l == 1:
            comb += 0.5 * a[0]
            even += 0.5 * a[0]
        out.append(
            HbarTermWeights(
                l=l,
                pairing=ct * sx * comb,
                pairing_skew=-st * sx * comb,
                hopping=st * cx * a[l] + ct * sx * even,
            )
        )
    return out


@dataclass(frozen=True)
class IsingParams:
    """Transverse-Ising couplings (J exchange, B field) with B + J = theta + chi."""

    J: float
    B: float


def ising_map(c: Couplings) -> IsingParams:
    """Universality-class parameter map J = -(theta+chi) sin(chi)/sin(theta+chi)."""
    s = c.theta + c.chi
    if abs(s) < 1e-8:
        scale = 1.0 + s * s / 6.0  # s / sin(s)
    else:
        sin_s = math.sin(s)
        if abs(sin_s) < 1e-12:
            raise SingularMapError("theta + chi = n*pi (n != 0): map is singular")
        scale = s / sin_s
    J = -math.sin(c.chi) * scale
    return IsingParams(J=J, B=s - J)


def ising_quasi_energy(B: float, J: float, k):
    """Transverse-Ising dispersion 2 sqrt((B + J cos k)^2 + J^2 sin^2 k)."""
    k = np.asarray(k, dtype=float)
    e = 2.0 * np.sqrt((B + J * np.cos(k)) ** 2 + (J * np.sin(k)) ** 2)
    return e if e.ndim else float(e)


def ising_ground_phase(B: float, J: float, grid: MomentumGrid) -> float:
    """Per-mode Ising ground argument -sum_k eps_k/2 (eps_k the 2sqrt form)."""
    if len(grid) == 0:
        raise ValueError("grid must be non-empty")
    return -0.5 * float(np.sum(ising_quasi_energy(B, J, grid.k_values)))


# ---------------------------------------------------------------------------
# pair-block matrices and the composition oracle
# ---------------------------------------------------------------------------

def _pair_nu_matrices() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """nu_1, nu_2, nu_3 as explicit 4x4 matrices on the {k, -k} pair Fock space.

    Built from literal fermionic C_k, C_{-k} (two-mode Jordan-Wigner), then
    permuted into the basis order |0>, C_k+|0>, C_-k+|0>, C_k+ C_-k+|0>.
    """
    a = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # annihilation
    z = np.diag([1.0, -1.0]).astype(complex)
    i2 = np.eye(2, dtype=complex)
    ck = np.kron(a, i2)
    cmk = np.kron(z, a)
    ckh, cmkh = ck.conj().T, cmk.conj().T
    nu1 = -1j * (ckh @ cmkh + ck @ cmk)
    nu2 = -ckh @ cmkh + ck @ cmk
    nu3 = ckh @ ck + cmkh @ cmk - np.eye(4, dtype=complex)
    perm = [0, 2, 1, 3]  # tensor order (n_k, n_-k) -> spec basis order
    p = np.eye(4)[:, perm]
    return tuple(p.T @ m @ p for m in (nu1, nu2, nu3))


_NU1, _NU2, _NU3 = _pair_nu_matrices()


def mode_block_oracle(c: Couplings, k: float) -> tuple[np.ndarray, np.ndarray]:
    """(composed, closed_form) 4x4 unitaries of the per-mode su(2) composition.

    composed    = exp(-i A_k) exp(-i B_k) with A_k = chi (cos k + alpha . nu),
                  alpha = (sin k, 0, cos k), B_k = theta nu_3;
    closed_form = exp(-i chi cos k) exp(-i kappa_k gamma_k . nu).

    The two agree entrywise to machine precision; this is the machine check
    of the eta/kappa/gamma closed forms.
    """
    a_mat = c.chi * (
        math.cos(k) * np.eye(4, dtype=complex) + math.sin(k) * _NU1 + math.cos(k) * _NU3
    )
    b_mat = c.theta * _NU3
    composed = expm(-1j * a_mat) @ expm(-1j * b_mat)
    g = mode_gamma(c, k)
    kap = mode_kappa(mode_eta(c, k))
    closed = np.exp(-1j * c.chi * math.cos(k)) * expm(
        -1j * kap * (g[0] * _NU1 + g[1] * _NU2 + g[2] * _NU3)
    )
    return composed, closed


# ---------------------------------------------------------------------------
# exact finite-N parity-sector assembly
# ---------------------------------------------------------------------------

def pair_phase_options(c: Couplings, k: float) -> list[tuple[float, int]]:
    """(phase, occupancy parity) options of one {k, -k} pair block, k in (0, pi).

    The pair carries both the k and -k terms of the fermionic sums, i.e.
    doubled couplings: scalar 2 chi cos k, rotation angle arccos(eta(2theta,
    2chi, k)).  Parity 0 entries are the even-occupancy branch, parity 1 the
    two single-occupancy states.
    """
    scal = 2.0 * c.chi * math.cos(k)
    e2 = math.acos(mode_eta(Couplings(2.0 * c.theta, 2.0 * c.chi), k))
    return [(scal - e2, 0), (scal + e2, 0), (scal, 1), (scal, 1)]


def _unpaired_options(c: Couplings, k: float) -> list[tuple[float, int]]:
    # self-conjugate mode (k = 0 or -pi): no pairing term, single couplings
    return [(-c.theta, 0), (2.0 * c.chi * math.cos(k) + c.theta, 1)]


def assemble_parity_phases(c: Couplings, n_sites: int, sector: str = "even") -> np.ndarray:
    """Sorted eigenphase multiset of one parity block of the dense map.

    even sector (global spin flip +1, even fermion number): antiperiodic
    grid, all modes paired; odd sector: periodic grid with the unpaired
    k = 0 and k = -pi modes.  Phases are wrapped to (-pi, pi].  Matches the
    dense spin-space map exactly at any coupling strength.
    """
    if n_sites % 2 != 0:
        raise ValueError("parity assembly requires an even number of sites")
    if sector not in ("even", "odd"):
        raise ValueError("sector must be 'even' or 'odd'")
    if sector == "even":
        grid = antiperiodic_grid(n_sites)
        groups = [
            pair_phase_options(c, k)
            for k in grid.k_values
            if 0.0 < k < np.pi - 1e-12
        ]
        want = 0
    else:
        grid = periodic_grid(n_sites)
        groups = [
            pair_phase_options(c, k)
            for k in grid.k_values
            if 0.0 < k < np.pi - 1e-12
        ]
        groups += [
            _unpaired_options(c, k)
            for k in grid.k_values
            if k == 0.0 or abs(abs(k) - np.pi) < 1e-12
        ]
        want = 1
    phases = np.array([0.0])
    parity = np.array([0])
    for opts in groups:
        p = np.array([o[0] for o in opts])
        q = np.array([o[1] for o in opts])
        phases = (phases[:, None] + p[None, :]).ravel()
        parity = (parity[:, None] + q[None, :]).ravel() % 2
    return np.sort(wrap_phase(phases[parity == want]))


def assemble_all_phases(c: Couplings, n_sites: int) -> np.ndarray:
    """Sorted eigenphases of the full dense map from both parity sectors."""
    return np.sort(
        np.concatenate(
            [
                assemble_parity_phases(c, n_sites, "even"),
                assemble_parity_phases(c, n_sites, "odd"),
            ]
        )
    )


def _pair_angle(c: Couplings, k: float) -> float:
    return math.acos(mode_eta(Couplings(2.0 * c.theta, 2.0 * c.chi), k))


def exact_sector_ground_phase(c: Couplings, n_sites: int, sector: str = "even") -> float:
    """Unwrapped ground phase of one parity sector of the finite map.

    Unlike `ground_phase` (the per-mode analytic signature), this is the
    exact total phase of the sector's lowest state, valid at any coupling;
    it equals a dense eigenphase modulo 2 pi.
    """
    if n_sites % 2 != 0:
        raise ValueError("exact ground phase requires an even number of sites")
    if sector == "even":
        ap = antiperiodic_grid(n_sites).k_values
        return float(
            sum(
                2.0 * c.chi * math.cos(k) - _pair_angle(c, k)
                for k in ap
                if 0.0 < k < np.pi - 1e-12
            )
        )
    if sector != "odd":
        raise ValueError("sector must be 'even' or 'odd'")
    per = periodic_grid(n_sites).k_values
    pair_ks = [k for k in per if 0.0 < k < np.pi - 1e-12]
    base = sum(2.0 * c.chi * math.cos(k) - _pair_angle(c, k) for k in pair_ks)
    flips = [_pair_angle(c, k) for k in pair_ks]
    best = np.inf
    for o0 in (0, 1):
        for opi in (0, 1):
            v = base
            v += -c.theta if o0 == 0 else 2.0 * c.chi + c.theta
            v += -c.theta if opi == 0 else -2.0 * c.chi + c.theta
            if (o0 + opi) % 2 == 1:
                best = min(best, v)
            elif flips:
                best = min(best, v + min(flips))
    return float(best)


def exact_ground_phase(c: Couplings, n_sites: int) -> float:
    """Unwrapped ground phase of the finite map (minimum over both sectors)."""
    return min(
        exact_sector_ground_phase(c, n_sites, "even"),
        exact_sector_ground_phase(c, n_sites, "odd"),
    )
