"""Render the six result figures from qpt CSV files.

Each figure id expects a fixed input schema (validated by column name; the
trailing `status` column of qpt sweeps is tolerated and failed rows are
skipped).  Rendering is deterministic: fixed canvas, fonts and colormap,
axis ranges derived from the data alone, pinned PNG metadata.

phi axes are labelled in multiples of pi/4.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_IDS = (
    "a_coeff",
    "comparing",
    "6q_d2phase",
    "6q_entanglement",
    "q6_eigens",
    "q4_fourier",
)

_FIGSIZE = (6.4, 4.4)
_DPI = 130
_PNG_META = {"Software": "qpt-fig"}


class SchemaError(ValueError):
    """Input CSV does not carry the columns the figure id expects."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    inputs: tuple
    output: str


@dataclass(frozen=True)
class RenderInfo:
    figure_id: str
    output: str
    n_series: int
    n_overlays: int


def _read_table(path) -> dict[str, np.ndarray]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    if "status" in header:
        si = header.index("status")
        rows = [r for r in rows if r[si] == "ok"]
        if not rows:
            raise SchemaError(f"{path}: no successful rows")
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        if name == "status":
            continue
        cols[name] = np.array([float(r[j]) for r in rows])
    return cols


def _require(cols: dict, names, path) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")


def _phi_axis(ax, phi):
    ticks = np.arange(0.0, phi.max() + 1e-9, np.pi / 4)
    labels = ["0"] + [f"{i}π/4" if i > 1 else "π/4" for i in range(1, len(ticks))]
    labels = [lab.replace("2π/4", "π/2").replace("4π/4", "π") for lab in labels]
    ax.set_xticks(ticks)
    ax.set_xticklabels(labels[: len(ticks)])
    ax.set_xlabel("φ")


def _new_axes():
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    return fig, ax


def _save(fig, path) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_META)
    plt.close(fig)


def _render_a_coeff(spec: FigureSpec) -> RenderInfo:
    cols = _read_table(spec.inputs[0])
    _require(cols, ("theta", "chi", "l", "a_l", "bound"), spec.inputs[0])
    fig, ax = _new_axes()
    pairs = sorted(set(zip(cols["theta"], cols["chi"])))
    for theta, chi in pairs:
        sel = (cols["theta"] == theta) & (cols["chi"] == chi) & (cols["l"] >= 1)
        order = np.argsort(cols["l"][sel])
        ls = cols["l"][sel][order]
        ax.semilogy(ls, np.abs(cols["a_l"][sel][order]), marker="o", ms=3,
                    label=f"θ={theta:g}, χ={chi:g}")
        ax.semilogy(ls, cols["bound"][sel][order], ls="--", lw=0.8, color="grey")
    ax.set_xlabel("l")
    ax.set_ylabel("$a_l$")
    ax.legend(fontsize=8)
    _save(fig, spec.output)
    return RenderInfo("a_coeff", spec.output, n_series=len(pairs), n_overlays=len(pairs))


def _render_comparing(spec: FigureSpec) -> RenderInfo:
    if len(spec.inputs) < 2:
        raise SchemaError("comparing needs --in (map sweep) and --in2 (ising sweep)")
    model = _read_table(spec.inputs[0])
    ising = _read_table(spec.inputs[1])
    for cols, path in ((model, spec.inputs[0]), (ising, spec.inputs[1])):
        _require(cols, ("phi", "d2_omega1"), path)
    fig, ax = _new_axes()
    ax.plot(model["phi"], model["d2_omega1"], "-", color="black", label="map")
    ax.plot(ising["phi"], ising["d2_omega1"], "--", color="grey", label="Ising")
    _phi_axis(ax, model["phi"])
    ax.set_ylabel("$d^2\\Omega^{(1)}/d\\varphi^2$")
    ax.legend()
    _save(fig, spec.output)
    return RenderInfo("comparing", spec.output, n_series=2, n_overlays=0)


def _render_6q_d2phase(spec: FigureSpec) -> RenderInfo:
    cols = _read_table(spec.inputs[0])
    _require(cols, ("phi", "d2_omega1"), spec.inputs[0])
    fig, ax = _new_axes()
    ax.plot(cols["phi"], cols["d2_omega1"], "-", color="black")
    _phi_axis(ax, cols["phi"])
    ax.set_ylabel("$d^2\\Omega^{(1)}/d\\varphi^2$")
    _save(fig, spec.output)
    return RenderInfo("6q_d2phase", spec.output, n_series=1, n_overlays=0)


def _render_6q_entanglement(spec: FigureSpec) -> RenderInfo:
    cols = _read_table(spec.inputs[0])
    _require(cols, ("phi", "concurrence", "d_concurrence"), spec.inputs[0])
    fig, ax = _new_axes()
    ax.plot(cols["phi"], cols["d_concurrence"], "-", color="black")
    _phi_axis(ax, cols["phi"])
    ax.set_ylabel("$d\\mathcal{E}/d\\varphi$")
    _save(fig, spec.output)
    return RenderInfo("6q_entanglement", spec.output, n_series=1, n_overlays=0)


def _render_q6_eigens(spec: FigureSpec, n_lowest: int = 8) -> RenderInfo:
    cols = _read_table(spec.inputs[0])
    _require(cols, ("phi", "e_0"), spec.inputs[0])
    levels = sorted(
        (int(name[2:]) for name in cols if name.startswith("e_")),
    )[:n_lowest]
    fig, ax = _new_axes()
    for i in levels:
        ax.plot(cols["phi"], cols[f"e_{i}"], "-", lw=0.9)
    _phi_axis(ax, cols["phi"])
    ax.set_ylabel("$E_n$")
    _save(fig, spec.output)
    return RenderInfo("q6_eigens", spec.output, n_series=len(levels), n_overlays=0)


def _render_q4_fourier(spec: FigureSpec) -> RenderInfo:
    cols = _read_table(spec.inputs[0])
    _require(cols, ("theta", "bin_freq", "magnitude"), spec.inputs[0])
    thetas = np.unique(cols["theta"])
    freqs = np.unique(cols["bin_freq"])
    grid = np.zeros((len(freqs), len(thetas)))
    ti = np.searchsorted(thetas, cols["theta"])
    fi = np.searchsorted(freqs, cols["bin_freq"])
    grid[fi, ti] = cols["magnitude"]
    fig, ax = _new_axes()
    # white bands = large component, on a log intensity scale
    intensity = np.log10(grid + 1e-12)
    ax.imshow(
        intensity,
        origin="lower",
        aspect="auto",
        cmap="gray",
        extent=(thetas.min(), thetas.max(), freqs.min(), freqs.max()),
        interpolation="nearest",
    )
    n_overlays = 0
    if len(spec.inputs) > 1:
        eig = _read_table(spec.inputs[1])
        _require(eig, ("theta", "e_0"), spec.inputs[1])
        names = sorted((n for n in eig if n.startswith("e_")), key=lambda s: int(s[2:]))
        energies = np.vstack([eig[n] for n in names])  # levels x theta
        for a in range(len(names)):
            for b in range(len(names)):
                if a == b:
                    continue
                ax.plot(eig["theta"], energies[a] - energies[b],
                        color="grey", lw=0.3, alpha=0.5)
                n_overlays += 1
    ax.set_xlim(thetas.min(), thetas.max())
    ax.set_ylim(freqs.min(), freqs.max())
    ax.set_xlabel("θ")
    ax.set_ylabel("frequency (rad/step)")
    _save(fig, spec.output)
    return RenderInfo("q4_fourier", spec.output, n_series=1, n_overlays=n_overlays)


_RENDERERS = {
    "a_coeff": _render_a_coeff,
    "comparing": _render_comparing,
    "6q_d2phase": _render_6q_d2phase,
    "6q_entanglement": _render_6q_entanglement,
    "q6_eigens": _render_q6_eigens,
    "q4_fourier": _render_q4_fourier,
}


def render(spec: FigureSpec) -> RenderInfo:
    """Render one figure id; raises SchemaError on missing columns or empty
    input, writes no image in that case."""
    if spec.figure_id not in _RENDERERS:
        raise SchemaError(
            f"unknown figure id {spec.figure_id!r}; expected one of {', '.join(FIGURE_IDS)}"
        )
    if not spec.inputs:
        raise SchemaError("at least one input CSV is required")
    return _RENDERERS[spec.figure_id](spec)
