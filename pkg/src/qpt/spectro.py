"""Spectroscopic signals of the map and quasi-energy spectrum reconstruction.

Two measurable channels are simulated noiselessly:

* return probabilities |<i|U^m|psi0>|^2, whose power spectrum peaks at the
  level differences E_n - E_n' (weights are gauge-invariant products
  <i|phi_n><phi_n|psi0>, so only differences are observable);
* controlled-U trace moments Tr(U^m)/2^N, whose complex DFT exposes the
  eigenphases directly with bin amplitude degeneracy/2^N.

`reconstruct_levels` fits level positions (and nonnegative weights) to the
observed power spectrum with the package Levenberg-Marquardt solver.  The
automatic initial guess assembles candidate levels from the strongest
refined peaks (each gap is tried on both sides of the anchor, scored by
consistency of its implied cross differences against the full peak set) and
is extended matching-pursuit style: after each fit the strongest unexplained
residual peak proposes one more level until the spectrum is explained.

Exact level degeneracies are invisible to a single return-probability
series (only distinct positions and their total weights enter the signal),
so reconstructed multiplicities are reported by weight-ranked duplication.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dense import DenseUnitary, EigenDecomp, SpinState, eigendecompose
from .errors import AliasingError, RankDeficiencyError, ReconstructionError, SingularNormalMatrixError
from .lm import LeastSquaresProblem, LmSettings, lm_minimize
from .modes import wrap_phase


@dataclass(frozen=True)
class TimeSeries:
    kind: str  # return_probability | trace_real | trace_imag
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class PowerSpectrum:
    """DFT bins ordered by ascending frequency; frequencies 2*pi*j/M mapped
    to (-pi, pi]."""

    frequencies: np.ndarray
    magnitudes: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def bin_width(self) -> float:
        return 2.0 * np.pi / len(self.frequencies)


@dataclass(frozen=True)
class PeakList:
    peaks: list  # (frequency, magnitude), magnitude-descending


@dataclass(frozen=True)
class ReconstructedSpectrum:
    """Levels ascending, offset gauge-fixed by levels[0] = 0."""

    levels: np.ndarray
    gauge: tuple
    weights: np.ndarray
    residual_norm: float
    status: str
    degeneracies: np.ndarray | None = None


def aliasing_limit(n_qubits: int, k_int: float = 1.0) -> float:
    return k_int / n_qubits


def simulate_series(
    U: DenseUnitary,
    psi0: SpinState,
    basis_index: int,
    M: int,
    k_int: float = 1.0,
    decomp: EigenDecomp | None = None,
) -> TimeSeries:
    """|<i|U^m|psi0>|^2 for m = 0..M-1 via the eigen-expansion.

    Enforces the aliasing bound max(|theta|,|chi|) < k_int/N when the map
    carries its couplings (hard error in this module).
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    if not 0 <= basis_index < 2**U.n_qubits:
        raise ValueError("basis_index out of range")
    if U.theta is not None and U.chi is not None:
        bound = aliasing_limit(U.n_qubits, k_int)
        worst = max(abs(U.theta), abs(U.chi))
        if worst >= bound:
            raise AliasingError(
                f"max(|theta|,|chi|) = {worst:.4g} >= k_int/N = {bound:.4g}; "
                f"reduce couplings below {bound:.4g} or raise k_int"
            )
    decomp = decomp or eigendecompose(U)
    weights = decomp.vectors[basis_index, :] * (decomp.vectors.conj().T @ psi0.amplitudes)
    m = np.arange(M)
    z = np.exp(-1j * np.outer(m, decomp.phases)) @ weights
    return TimeSeries(
        kind="return_probability",
        samples=np.abs(z) ** 2,
        meta={
            "n_qubits": U.n_qubits,
            "theta": U.theta,
            "chi": U.chi,
            "basis_index": basis_index,
            "initial_state": psi0.label,
            "k_int": k_int,
        },
    )


def _bin_order(M: int) -> tuple[np.ndarray, np.ndarray]:
    freqs = 2.0 * np.pi * np.arange(M) / M
    freqs = np.where(freqs > np.pi, freqs - 2.0 * np.pi, freqs)
    order = np.argsort(freqs, kind="stable")
    return freqs[order], order


def dft(series: TimeSeries) -> PowerSpectrum:
    """Magnitudes of the standard DFT over m, bins reported on (-pi, pi]."""
    x = np.asarray(series.samples)
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    freqs, order = _bin_order(len(x))
    return PowerSpectrum(
        frequencies=freqs,
        magnitudes=np.abs(np.fft.fft(x))[order],
        meta=dict(series.meta),
    )


def complex_dft(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(frequencies, complex bins) of a complex series, frequency-ascending."""
    freqs, order = _bin_order(len(z))
    return freqs, np.fft.fft(np.asarray(z, dtype=complex))[order]


def detect_peaks(spec: PowerSpectrum, threshold_rel: float, min_separation: float) -> PeakList:
    """Local maxima above threshold_rel * max, greedily thinned so accepted
    peaks are at least min_separation apart (magnitude-descending)."""
    if not 0.0 < threshold_rel < 1.0:
        raise ValueError("threshold_rel must be in (0, 1)")
    mags = spec.magnitudes
    if len(mags) == 0 or mags.max() == 0.0:
        return PeakList(peaks=[])
    thr = threshold_rel * mags.max()
    cands = []
    n = len(mags)
    for i in range(n):
        left = mags[i - 1] if i > 0 else -np.inf
        right = mags[i + 1] if i < n - 1 else -np.inf
        if mags[i] > left and mags[i] > right and mags[i] >= thr:
            cands.append((float(spec.frequencies[i]), float(mags[i])))
    cands.sort(key=lambda p: (-p[1], p[0]))
    accepted: list[tuple[float, float]] = []
    for f, m in cands:
        if all(abs(f - f2) >= min_separation for f2, _ in accepted):
            accepted.append((f, m))
    return PeakList(peaks=accepted)


def _refined_peaks(freqs: np.ndarray, mags: np.ndarray, thr_abs: float) -> list[tuple[float, float]]:
    """Local maxima with two-bin Dirichlet interpolation of frequency and
    amplitude (circular neighbours; bins are periodic in (-pi, pi])."""
    n = len(mags)
    binw = 2.0 * np.pi / n
    out = []
    for i in range(n):
        left, right = mags[(i - 1) % n], mags[(i + 1) % n]
        if mags[i] > left and mags[i] > right and mags[i] >= thr_abs:
            nb_right = right >= left
            rho = (right if nb_right else left) / mags[i]
            d = rho / (1.0 + rho)
            f = freqs[i] + (d if nb_right else -d) * binw
            corr = abs(np.sinc(d))
            out.append((float(f), float(mags[i] / max(corr, 1e-12))))
    out.sort(key=lambda p: (-p[1], p[0]))
    return out


def predicted_spectrum(levels, overlaps_i, overlaps_psi, M: int) -> PowerSpectrum:
    """Model power spectrum of |sum_n w_n exp(-i m E_n)|^2 with
    w_n = overlaps_i[n] * overlaps_psi[n]; the fit's forward model."""
    levels = np.asarray(levels, dtype=float)
    w = np.asarray(overlaps_i) * np.asarray(overlaps_psi)
    if len(levels) != len(w):
        raise ValueError("levels and overlap lists must have equal length")
    m = np.arange(M)
    z = np.exp(-1j * np.outer(m, levels)) @ w
    return dft(TimeSeries(kind="return_probability", samples=np.abs(z) ** 2,
                          meta={"synthetic": True}))


def controlled_u_series(decomp: EigenDecomp, M: int) -> tuple[TimeSeries, TimeSeries]:
    """(real, imaginary) channels of Tr(U^m)/2^N via phase sums."""
    if M < 2:
        raise ValueError("M must be >= 2")
    m = np.arange(M)
    z = np.exp(-1j * np.outer(m, decomp.phases)).sum(axis=1) / decomp.n_states
    n_qubits = int(round(math.log2(decomp.n_states)))
    meta = {"n_qubits": n_qubits}
    return (
        TimeSeries(kind="trace_real", samples=z.real.copy(), meta=meta),
        TimeSeries(kind="trace_imag", samples=z.imag.copy(), meta=meta),
    )


def _dirichlet(d: float, M: int) -> float:
    if abs(d) < 1e-12:
        return 1.0
    return abs(math.sin(math.pi * d) / (M * math.sin(math.pi * d / M)))


def reconstruct_from_traces(
    real_series: TimeSeries, imag_series: TimeSeries
) -> ReconstructedSpectrum:
    """Read eigenphases (and degeneracies) off the complex trace series.

    The DFT of Tr(U^m)/2^N has amplitude degeneracy/2^N at each eigenphase.
    Peaks are refined by two-bin interpolation, scallop-corrected, kept
    above the 0.5/2^N threshold, and degeneracies rounded to the nearest
    integer multiple of 1/2^N.  No gauge ambiguity beyond the 2*pi wrap.
    """
    z = np.asarray(real_series.samples) + 1j * np.asarray(imag_series.samples)
    M = len(z)
    n_qubits = real_series.meta.get("n_qubits")
    if n_qubits is None:
        raise ValueError("trace series meta must carry n_qubits")
    dim = 2**n_qubits
    freqs, bins = complex_dft(z)
    amps = np.abs(bins) / M
    binw = 2.0 * np.pi / M
    levels, degs, weights = [], [], []
    n = len(amps)
    for i in range(n):
        left, right = amps[(i - 1) % n], amps[(i + 1) % n]
        if amps[i] > left and amps[i] > right:
            nb_right = right >= left
            rho = (right if nb_right else left) / amps[i]
            d = rho / (1.0 + rho)
            amp = amps[i] / max(_dirichlet(d, M), 1e-12)
            if amp >= 0.5 / dim:
                f = freqs[i] + (d if nb_right else -d) * binw
                deg = max(int(round(amp * dim)), 1)
                levels.append(-f)  # tone exp(-i E m) sits at frequency -E
                degs.append(deg)
                weights.append(amp)
    if sum(degs) != dim:
        warnings.warn(
            f"degeneracy accounting found {sum(degs)} levels, expected {dim}",
            UserWarning,
        )
    expanded = np.concatenate([[lv] * dg for lv, dg in zip(levels, degs)]) if levels else np.array([])
    expanded = np.sort(wrap_phase(expanded))
    order = np.argsort(levels)
    return ReconstructedSpectrum(
        levels=expanded,
        gauge=("absolute", +1),
        weights=np.asarray(weights)[order] if levels else np.array([]),
        residual_norm=0.0,
        status="direct",
        degeneracies=np.asarray(degs)[order] if levels else np.array([]),
    )


# ---------------------------------------------------------------------------
# level reconstruction from the return-probability power spectrum
# ---------------------------------------------------------------------------

def _consistency(cand: float, levels: np.ndarray, gap_freqs: np.ndarray, tol: float) -> float:
    """Mean mismatch between |cand - level| differences and the peak set."""
    s, cnt = 0.0, 0
    for lv in levels:
        d = abs(cand - lv)
        if d < tol:
            continue
        i = np.searchsorted(gap_freqs, d)
        err = min(
            abs(gap_freqs[min(i, len(gap_freqs) - 1)] - d),
            abs(gap_freqs[max(i - 1, 0)] - d),
        )
        s += min(err, 5.0 * tol)
        cnt += 1
    return s / max(cnt, 1)


def _turnpike_init(pos_peaks, all_gaps: np.ndarray, m_levels: int, tol: float) -> np.ndarray:
    """Anchor a level at 0 and greedily place gaps on whichever side keeps
    the implied pairwise differences consistent with the observed peaks."""
    levels = [0.0]
    placements = [(f * s, mag) for f, mag in pos_peaks for s in (+1, -1)]
    while len(levels) < m_levels and placements:
        scored = sorted(
            (( _consistency(c, np.array(levels), all_gaps, tol), -mag, c)
             for c, mag in placements)
        )
        s_best, _, c_best = scored[0]
        if s_best > 0.6 * tol:
            break
        levels.append(c_best)
        placements = [(c, m) for c, m in placements if abs(c - c_best) > tol]
    return np.array(levels)  # anchor first


def _model_mags(lev_free: np.ndarray, w_sqrt: np.ndarray, m: np.ndarray,
                order: np.ndarray) -> np.ndarray:
    lev = np.concatenate([[0.0], lev_free])
    w = w_sqrt**2
    z = np.exp(-1j * np.outer(m, lev)) @ w
    return np.abs(np.fft.fft(np.abs(z) ** 2))[order]


def _fit_once(mags, m, order, lev_free, w_sqrt, settings):
    n_lev = len(lev_free) + 1

    def residual(params):
        return _model_mags(params[: n_lev - 1], params[n_lev - 1 :], m, order) - mags

    x0 = np.concatenate([lev_free, w_sqrt])
    try:
        res = lm_minimize(LeastSquaresProblem(residual), x0, settings)
    except SingularNormalMatrixError as exc:
        raise RankDeficiencyError(
            "reconstruction Jacobian is rank deficient; try fewer levels"
        ) from exc
    lev = np.concatenate([[0.0], res.params[: n_lev - 1]])
    return lev, res.params[n_lev - 1 :], res


def reconstruct_levels(
    observed: PowerSpectrum,
    m_levels: int,
    init="auto",
    settings: LmSettings | None = None,
    max_pursuit_rounds: int | None = None,
) -> ReconstructedSpectrum:
    """Fit `m_levels` quasi-energies to an observed power spectrum.

    Residual: model minus observed bin magnitudes over all bins (levels plus
    square-rooted nonnegative weights as parameters; the first level is
    pinned to 0 during the fit).  With init='auto' the guess is assembled by
    the turnpike placement and extended by matching pursuit; a supplied init
    (list of m_levels values) goes straight to a single fit.

    Gauge of the result: levels ascending, shifted so levels[0] = 0; sign
    flipped, when needed, so the largest-weight level sits in the lower half
    of the ladder (recorded in `gauge`).
    """
    mags = np.asarray(observed.magnitudes, dtype=float)
    M = len(mags)
    if m_levels < 2:
        raise ValueError("m_levels must be >= 2")
    if M < 2 * (2 * m_levels - 1):
        raise ValueError("spectrum too short: need M >> m_levels (overdetermined fit)")
    settings = settings or LmSettings(max_iter=200, ftol=1e-15, gtol=1e-13)
    m = np.arange(M)
    _, order = _bin_order(M)
    freqs = observed.frequencies
    binw = observed.bin_width
    data_norm = float(np.linalg.norm(mags))
    dc = float(mags[np.argmin(np.abs(freqs))])

    if isinstance(init, str) and init == "auto":
        peaks = _refined_peaks(freqs, mags, 1e-7 * mags.max())
        pos = [(f, mg) for f, mg in peaks if f > 0.3 * binw]
        all_gaps = np.sort(np.array([f for f, _ in pos])) if pos else np.array([0.0])
        lev = _turnpike_init(pos[:30], all_gaps, m_levels, 1.2 * binw)
    else:
        lev = np.asarray(init, dtype=float)
        if len(lev) != m_levels:
            raise ValueError("init must supply m_levels values")
        lev = lev - lev[0]
        peaks, all_gaps = [], np.array([0.0])

    w_sqrt = np.full(len(lev), (max(dc, 1e-300) / (M * len(lev))) ** 0.25)
    lev_free = lev[1:]
    if max_pursuit_rounds is None:
        max_pursuit_rounds = 2 * m_levels
    res = None
    for _ in range(max_pursuit_rounds):
        lev_fit, ws_fit, res = _fit_once(mags, m, order, lev_free, w_sqrt, settings)
        if res.residual_norm <= 1e-8 * data_norm or len(lev_fit) >= m_levels:
            break
        if not (isinstance(init, str) and init == "auto"):
            break
        # matching pursuit: strongest unexplained gap proposes one more level
        resid = mags - _model_mags(lev_fit[1:], ws_fit, m, order)
        rp = _refined_peaks(freqs, np.abs(resid), 0.02 * np.abs(resid).max())
        rp_pos = [(f, mg) for f, mg in rp if f > 0.3 * binw]
        new_level = None
        for g, _ in rp_pos[:6]:
            cands = []
            for lv in lev_fit:
                for s in (+1, -1):
                    c = lv + s * g
                    if np.min(np.abs(lev_fit - c)) < 1.2 * binw:
                        continue
                    cands.append((_consistency(c, lev_fit, all_gaps, 1.2 * binw), c))
            if cands:
                cands.sort()
                if cands[0][0] < 0.9 * binw or new_level is None:
                    if cands[0][0] < 0.9 * binw:
                        new_level = cands[0][1]
                        break
                    new_level = new_level if new_level is not None else cands[0][1]
        if new_level is None:
            break
        lev_free = np.concatenate([lev_fit[1:], [new_level]])
        w_sqrt = np.concatenate([ws_fit, [0.3 * np.abs(ws_fit).max()]])
    if res is None:
        raise ReconstructionError("no fit was performed")
    if res.status == "max_iter" and res.residual_norm > 1e-6 * data_norm:
        raise ReconstructionError(
            f"LM hit max_iter with residual {res.residual_norm:.3e}"
        )
    weights = ws_fit**2
    # prune weightless levels (positions unconstrained by the data)
    keep = weights >= 1e-6 * max(weights.max(), 1e-300)
    keep[0] = True
    lev_kept, w_kept = lev_fit[keep], weights[keep]
    # pad to m_levels at the strongest positions (degeneracy is unobservable
    # in a single series; padded copies carry zero weight)
    by_weight = np.argsort(-w_kept)
    lev_full = list(lev_kept)
    w_full = list(w_kept)
    i = 0
    while len(lev_full) < m_levels:
        lev_full.append(lev_kept[by_weight[i % len(by_weight)]])
        w_full.append(0.0)
        i += 1
    lev_full = np.array(lev_full[:m_levels])
    w_full = np.array(w_full[:m_levels])
    # sign convention: largest-weight level in the lower half of the ladder
    order_lv = np.argsort(lev_full, kind="stable")
    rank_of_max = int(np.argsort(order_lv)[int(np.argmax(w_full))])
    sign = -1 if rank_of_max > (m_levels - 1) / 2 else +1
    lev_full = sign * lev_full
    order_lv = np.argsort(lev_full, kind="stable")
    lev_sorted = lev_full[order_lv]
    w_sorted = w_full[order_lv]
    return ReconstructedSpectrum(
        levels=lev_sorted - lev_sorted[0],
        gauge=("offset_zero", sign),
        weights=w_sorted,
        residual_norm=res.residual_norm,
        status=res.status,
    )


def gauge_align(levels, reference) -> tuple[np.ndarray, int, float]:
    """Best (aligned levels, sign, rms) matching `reference` under the
    offset + global-sign gauge; minimizes nearest-match RMS."""
    reference = np.sort(np.asarray(reference, dtype=float))
    best = None
    for sign in (+1, -1):
        lv = np.sort(sign * np.asarray(levels, dtype=float))
        starts = {
            float(np.mean(reference) - np.mean(lv)),
            float(reference[0] - lv[0]),
            float(reference[-1] - lv[-1]),
        }
        if len(lv) == len(reference):
            starts.add(float(np.mean(reference - lv)))
        for shift0 in starts:
            shift = shift0
            for _ in range(4):
                d = [reference[np.argmin(np.abs(reference - (x + shift)))] - (x + shift)
                     for x in lv]
                shift += float(np.mean(d))
            rms = nearest_match_rms(lv + shift, reference)
            if best is None or rms < best[2]:
                best = (lv + shift, sign, rms)
    return best


def nearest_match_rms(levels, reference) -> float:
    """RMS over reference entries of the distance to the nearest level."""
    lv = np.asarray(levels, dtype=float)
    return float(
        np.sqrt(np.mean([np.min(np.abs(lv - r)) ** 2 for r in np.asarray(reference)]))
    )
