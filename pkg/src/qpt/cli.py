"""qpt command line: parameter sweeps, CSV emission and run manifests.

Commands: sweep-energy, gap, coeffs, dense-sweep, entanglement,
spectroscopy, reconstruct, traces, crosscheck.  Every run writes one CSV
(with a trailing `status` column; per-point failures become rows and the
run continues) plus a key=value sidecar manifest written before the data.
Grid points are evaluated in parallel (QPT_WORKERS or --workers) and rows
are emitted in grid order, so output bytes do not depend on scheduling.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .csvio import append_manifest, write_csv, write_manifest
from .errors import AliasingWarning, QptError, UsageError
from .lm import LmSettings
from .modes import (
    Couplings,
    antiperiodic_grid,
    assemble_parity_phases,
    d1_ground_phase,
    d2_ground_phase,
    exact_ground_phase,
    fourier_coeffs,
    ground_phase,
    ising_ground_phase,
    periodic_grid,
    quasi_energy,
    spectral_gap,
    wrap_phase,
)
from . import dense
from . import spectro


@dataclass
class GridRange:
    start: float
    end: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.count, endpoint=False)


def parse_range(text: str) -> GridRange:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be start:end:count, got {text!r}")
    try:
        start, end, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}: {exc}") from exc
    if count < 1 or not np.isfinite([start, end]).all():
        raise UsageError(f"bad range {text!r}")
    if end == start:
        raise UsageError(f"empty range {text!r} (start == end)")
    return GridRange(start, end, count)


@dataclass
class RunConfig:
    command: str
    out: str
    workers: int = 0  # 0 = cpu count
    seed: int = 0
    n_sites: int | None = None
    n_qubits: int | None = None
    r: float | None = None
    phi: GridRange | None = None
    theta: float | None = None
    theta_range: GridRange | None = None
    chi: float | None = None
    h: float = 1e-3
    samples: int = 2048
    k_int: float = 1.0
    l_max: int = 10
    n_quadrature: int | None = None
    pairs: str | None = None
    levels: int | None = None
    basis_index: int = 0
    psi: str = "uniform"
    model: str = "map"      # sweep-energy: map | ising
    backend: str = "analytic"  # sweep-energy: analytic | exact
    open_chain: bool = False


_COMMANDS = (
    "sweep-energy",
    "gap",
    "coeffs",
    "dense-sweep",
    "entanglement",
    "spectroscopy",
    "reconstruct",
    "traces",
    "crosscheck",
)

_FLOAT_KEYS = {"r", "theta", "chi", "h", "k_int"}
_INT_KEYS = {"workers", "seed", "n_sites", "n_qubits", "samples", "l_max",
             "n_quadrature", "levels", "basis_index"}
_RANGE_KEYS = {"phi", "theta_range"}
_BOOL_KEYS = {"open_chain"}


def _read_config_file(path: str) -> dict:
    out = {}
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise UsageError(f"config line must be key=value: {ln!r}")
        key, val = ln.split("=", 1)
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _coerce(key: str, val):
    if isinstance(val, (GridRange, int, float, bool)) or val is None:
        return val
    if key in _RANGE_KEYS:
        return parse_range(val)
    if key in _FLOAT_KEYS:
        return float(val)
    if key in _INT_KEYS:
        return int(val)
    if key in _BOOL_KEYS:
        return str(val).lower() in ("1", "true", "yes")
    return val


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qpt",
        description="Numerical laboratory for the separated Ising unitary map.",
    )
    sub = ap.add_subparsers(dest="command")
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--config", help="key=value config file; flags override")
        p.add_argument("--workers", type=int, help="parallel workers (default: cores; QPT_WORKERS overrides)")
        p.add_argument("--seed", type=int, help="seed echoed into the manifest")
        p.add_argument("--n", dest="n_sites", type=int, help="number of sites (momentum-space commands)")
        p.add_argument("--qubits", dest="n_qubits", type=int, help="number of qubits (dense commands)")
        p.add_argument("--r", type=float, help="coupling magnitude r")
        p.add_argument("--phi", type=parse_range, help="phi sweep start:end:count (end exclusive)")
        p.add_argument("--theta", help="theta (scalar, or start:end:count sweep where supported)")
        p.add_argument("--chi", type=float, help="chi (scalar)")
        p.add_argument("--h", type=float, help="finite-difference step in phi")
        p.add_argument("--samples", type=int, help="number of time samples M")
        p.add_argument("--k-int", dest="k_int", type=float, help="aliasing bound constant k_int")
        p.add_argument("--lmax", dest="l_max", type=int, help="largest Fourier order")
        p.add_argument("--quad", dest="n_quadrature", type=int, help="quadrature points")
        p.add_argument("--pairs", help="coeffs: comma list of theta:chi pairs")
        p.add_argument("--levels", type=int, help="reconstruct: number of levels to fit")
        p.add_argument("--basis-index", dest="basis_index", type=int, help="measured basis state index i")
        p.add_argument("--psi", help="initial state: uniform | basis:<j>")
        p.add_argument("--model", choices=("map", "ising"), help="sweep-energy dispersion")
        p.add_argument("--backend", choices=("analytic", "exact"), help="sweep-energy backend")
        p.add_argument("--open-chain", dest="open_chain", action="store_const", const=True,
                       help="open boundary for dense layers")
    return ap


def parse_config(argv) -> RunConfig:
    """Parse argv (plus optional --config file; flags override file values)."""
    ap = _build_parser()
    ns = ap.parse_args(argv)
    if ns.command is None:
        raise UsageError("missing command; see qpt --help")
    known = {f.name for f in fields(RunConfig)}
    merged: dict = {}
    if ns.config:
        for key, val in _read_config_file(ns.config).items():
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
            merged[key] = val
    for key, val in vars(ns).items():
        if key in ("command", "config") or val is None:
            continue
        merged[key] = val
    # --theta doubles as a sweep range for theta-parameterized sweeps
    theta_val = merged.pop("theta", None)
    if theta_val is not None:
        if isinstance(theta_val, str) and ":" in theta_val:
            merged["theta_range"] = theta_val
        else:
            merged["theta"] = float(theta_val)
    cfg = RunConfig(command=ns.command, out="")
    for key, val in merged.items():
        setattr(cfg, key, _coerce(key, val))
    if not cfg.out:
        raise UsageError("missing required parameter: --out")
    if cfg.workers == 0:
        cfg.workers = int(os.environ.get("QPT_WORKERS", str(os.cpu_count() or 1)))
    _validate(cfg)
    return cfg


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) is None:
            raise UsageError(f"{cfg.command}: missing required parameter --{name.replace('_', '-')}")


def _validate(cfg: RunConfig) -> None:
    polar = cfg.r is not None or cfg.phi is not None
    cartesian = cfg.theta is not None or cfg.theta_range is not None or cfg.chi is not None
    if polar and cartesian:
        raise UsageError("conflicting parameterizations: give (r, phi) or (theta, chi), not both")
    if cfg.command in ("sweep-energy", "gap"):
        _require(cfg, "n_sites", "r", "phi")
        if cfg.command == "sweep-energy" and cfg.phi.count < 2:
            raise UsageError("sweep-energy: phi needs at least 2 steps for derivatives")
        if cfg.backend == "exact" and cfg.n_sites % 2 != 0:
            raise UsageError("sweep-energy --backend exact requires even --n")
    elif cfg.command == "coeffs":
        _require(cfg, "pairs")
    elif cfg.command in ("dense-sweep", "entanglement"):
        _require(cfg, "n_qubits")
        if cfg.command == "dense-sweep":
            if not ((cfg.r is not None and cfg.phi is not None)
                    or (cfg.chi is not None and cfg.theta_range is not None)):
                raise UsageError("dense-sweep: give --r with --phi, or --chi with --theta range")
        else:
            _require(cfg, "r", "phi")
            if cfg.phi.count < 2:
                raise UsageError("entanglement: phi needs at least 2 steps for derivatives")
    elif cfg.command == "spectroscopy":
        _require(cfg, "n_qubits", "chi")
        if cfg.theta_range is None and cfg.theta is None:
            raise UsageError("spectroscopy: missing required parameter --theta")
    elif cfg.command in ("reconstruct", "traces"):
        _require(cfg, "n_qubits", "theta", "chi")
    elif cfg.command == "crosscheck":
        _require(cfg, "n_qubits", "theta", "chi")
        if cfg.n_qubits % 2 != 0:
            raise UsageError("crosscheck: --qubits must be even (parity sectors)")


def _psi_state(cfg: RunConfig) -> dense.SpinState:
    if cfg.psi == "uniform":
        return dense.uniform_state(cfg.n_qubits)
    if cfg.psi.startswith("basis:"):
        return dense.basis_state(cfg.n_qubits, int(cfg.psi.split(":", 1)[1]))
    raise UsageError(f"unknown --psi {cfg.psi!r} (use uniform or basis:<j>)")


# ---------------------------------------------------------------------------
# per-point workers (module level: picklable)
# ---------------------------------------------------------------------------

def _pt_sweep_energy(args):
    r, phi, n, h, model, backend = args
    if backend == "exact":
        def omega(p):
            return exact_ground_phase(Couplings.from_polar(r, p), n)
    elif model == "ising":
        grid = periodic_grid(n)

        def omega(p):
            c = Couplings.from_polar(r, p)
            return ising_ground_phase(c.theta, c.chi, grid)
    else:
        grid = periodic_grid(n)

        def omega(p):
            return ground_phase(Couplings.from_polar(r, p), grid)

    w0 = omega(phi)
    wp, wm = omega(phi + h), omega(phi - h)
    return (phi, w0, (wp - wm) / (2 * h), (wp - 2 * w0 + wm) / (h * h))


def _pt_gap(args):
    r, phi, n = args
    return (phi, spectral_gap(Couplings.from_polar(r, phi), periodic_grid(n)))


def _pt_coeffs(args):
    theta, chi, l_max, n_quadrature = args
    fc = fourier_coeffs(Couplings(theta, chi), l_max, n_quadrature)
    ss = np.sin(theta) * np.sin(chi)
    c_scale = fc.a[1] / ss if ss != 0 else 0.0
    return [
        (theta, chi, l, float(fc.a[l]), float(c_scale * ss**l) if ss != 0 else 0.0)
        for l in range(l_max + 1)
    ]


def _pt_dense_phases(args):
    theta, chi, n_qubits, periodic, sweep_val = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = dense.build_map(Couplings(theta, chi), n_qubits, periodic)
    decomp = dense.eigendecompose(U)
    return (sweep_val, *[float(p) for p in decomp.phases])


def _pt_entanglement(args):
    r, phi, n_qubits, periodic = args
    return dense._sweep_point(r, phi, n_qubits, periodic)


def _pt_spectroscopy(args):
    theta, chi, n_qubits, M, k_int, basis_index, psi_label = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = dense.build_map(Couplings(theta, chi), n_qubits)
    psi0 = (dense.uniform_state(n_qubits) if psi_label == "uniform"
            else dense.basis_state(n_qubits, int(psi_label.split(":", 1)[1])))
    series = spectro.simulate_series(U, psi0, basis_index, M, k_int=k_int)
    spec = spectro.dft(series)
    return [(theta, float(f), float(mg)) for f, mg in zip(spec.frequencies, spec.magnitudes)]


# ---------------------------------------------------------------------------
# sweep runner
# ---------------------------------------------------------------------------

def _run_points(fn, args_list, workers: int):
    """Evaluate fn over args_list; (ok, payload) per point, input order kept."""
    def safe(a):
        try:
            return (True, fn(a))
        except Exception as exc:  # per-point failure becomes a status row
            return (False, f"{type(exc).__name__}: {exc}")

    if workers <= 1 or len(args_list) <= 1:
        return [safe(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_SafeCall(fn), args_list, chunksize=max(1, len(args_list) // (4 * workers))))


class _SafeCall:
    def __init__(self, fn):
        self.fn = fn

    def __call__(self, a):
        try:
            return (True, self.fn(a))
        except Exception as exc:
            return (False, f"{type(exc).__name__}: {exc}")


def _emit(cfg: RunConfig, header: list[str], results, manifest_extra: dict) -> int:
    """Write manifest then CSV; returns exit code (0 iff all points ok)."""
    t0 = time.perf_counter()
    manifest = {
        "command": cfg.command,
        "code_version": __version__,
        "workers": cfg.workers,
        "seed": cfg.seed,
        "layer_order": "theta_layer_first_then_zz",
        "phase_convention": "U|phi> = exp(-i E)|phi>, E in (-pi, pi]",
        "float_format": "%.17g",
    }
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None or f.name in ("command", "out", "workers", "seed"):
            continue
        manifest[f.name] = f"{v.start}:{v.end}:{v.count}" if isinstance(v, GridRange) else v
    manifest.update(manifest_extra)
    write_manifest(cfg.out, manifest)
    rows = []
    n_fail = 0
    for ok, payload in results:
        if ok:
            if isinstance(payload, list):  # multi-row point
                rows.extend([(*r, "ok") for r in payload])
            else:
                rows.append((*payload, "ok"))
        else:
            n_fail += 1
            rows.append(tuple([""] * len(header[:-1])) + (f"error: {payload}",))
    write_csv(cfg.out, header, rows)
    append_manifest(cfg.out, {"wall_time_s": time.perf_counter() - t0, "failed_points": n_fail})
    return 0 if n_fail == 0 else 1


def run_sweep(cfg: RunConfig) -> int:
    """Dispatch one configured command; returns the process exit code."""
    if cfg.command == "sweep-energy":
        phis = cfg.phi.values()
        args = [(cfg.r, p, cfg.n_sites, cfg.h, cfg.model, cfg.backend) for p in phis]
        res = _run_points(_pt_sweep_energy, args, cfg.workers)
        return _emit(cfg, ["phi", "omega1", "d_omega1", "d2_omega1", "status"], res,
                     {"grid_sector": "periodic", "dispersion": cfg.model, "backend": cfg.backend})

    if cfg.command == "gap":
        phis = cfg.phi.values()
        args = [(cfg.r, p, cfg.n_sites) for p in phis]
        res = _run_points(_pt_gap, args, cfg.workers)
        return _emit(cfg, ["phi", "delta", "status"], res, {"grid_sector": "periodic"})

    if cfg.command == "coeffs":
        pair_list = []
        for chunk in cfg.pairs.split(","):
            t_str, c_str = chunk.split(":")
            pair_list.append((float(t_str), float(c_str)))
        args = [(t, c, cfg.l_max, cfg.n_quadrature) for t, c in pair_list]
        res = _run_points(_pt_coeffs, args, cfg.workers)
        return _emit(cfg, ["theta", "chi", "l", "a_l", "bound", "status"], res,
                     {"bound_column": "a_1/(sin theta sin chi) * (sin theta sin chi)^l"})

    if cfg.command == "dense-sweep":
        if cfg.phi is not None:
            sweep_name, values = "phi", cfg.phi.values()
            args = []
            for p in values:
                c = Couplings.from_polar(cfg.r, p)
                args.append((c.theta, c.chi, cfg.n_qubits, not cfg.open_chain, p))
        else:
            sweep_name, values = "theta", cfg.theta_range.values()
            args = [(t, cfg.chi, cfg.n_qubits, not cfg.open_chain, t) for t in values]
        res = _run_points(_pt_dense_phases, args, cfg.workers)
        header = [sweep_name] + [f"e_{i}" for i in range(2**cfg.n_qubits)] + ["status"]
        return _emit(cfg, header, res, {"sweep_variable": sweep_name})

    if cfg.command == "entanglement":
        phis = cfg.phi.values()
        args = [(cfg.r, p, cfg.n_qubits, not cfg.open_chain) for p in phis]
        res = _run_points(_pt_entanglement, args, cfg.workers)
        # grid-coupled derivative: post-pass over the ordered concurrences
        conc = np.array([p if ok else np.nan for ok, p in res], dtype=float)
        deriv = np.gradient(conc, phis) if len(phis) > 1 else np.zeros_like(conc)
        rows = []
        for (ok, payload), p, e, d in zip(res, phis, conc, deriv):
            rows.append((True, (float(p), float(e), float(d))) if ok else (False, payload))
        return _emit(cfg, ["phi", "concurrence", "d_concurrence", "status"], rows,
                     {"ground_selection": "even-sector exact phase", "site": 0})

    if cfg.command == "spectroscopy":
        thetas = cfg.theta_range.values() if cfg.theta_range is not None else [cfg.theta]
        args = [(t, cfg.chi, cfg.n_qubits, cfg.samples, cfg.k_int, cfg.basis_index, cfg.psi)
                for t in thetas]
        res = _run_points(_pt_spectroscopy, args, cfg.workers)
        return _emit(cfg, ["theta", "bin_freq", "magnitude", "status"], res,
                     {"initial_state": cfg.psi, "basis_index": cfg.basis_index})

    if cfg.command == "reconstruct":
        return _run_reconstruct(cfg)

    if cfg.command == "traces":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AliasingWarning)
            U = dense.build_map(Couplings(cfg.theta, cfg.chi), cfg.n_qubits)
        re_s, im_s = spectro.controlled_u_series(dense.eigendecompose(U), cfg.samples)
        rows = [(True, (m, float(a), float(b)))
                for m, (a, b) in enumerate(zip(re_s.samples, im_s.samples))]
        return _emit(cfg, ["m", "re", "im", "status"], rows, {})

    if cfg.command == "crosscheck":
        c = Couplings(cfg.theta, cfg.chi)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AliasingWarning)
            U = dense.build_map(c, cfg.n_qubits)
        dense_ph = dense.parity_sector_phases(U, even=True)
        analytic = assemble_parity_phases(c, cfg.n_qubits, "even")
        rows = [
            (True, (i, float(d), float(a), float(wrap_phase(d - a))))
            for i, (d, a) in enumerate(zip(dense_ph, analytic))
        ]
        return _emit(cfg, ["k", "phase_dense", "phase_analytic", "diff", "status"], rows,
                     {"sector": "even", "grid_sector": "antiperiodic",
                      "k_column": "rank index of the sorted even-sector phases"})

    raise UsageError(f"unknown command {cfg.command!r}")


def _run_reconstruct(cfg: RunConfig) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        U = dense.build_map(Couplings(cfg.theta, cfg.chi), cfg.n_qubits)
    psi0 = _psi_state(cfg)
    series = spectro.simulate_series(U, psi0, cfg.basis_index, cfg.samples, k_int=cfg.k_int)
    spec = spectro.dft(series)
    m_levels = cfg.levels or 2**cfg.n_qubits
    rec = spectro.reconstruct_levels(spec, m_levels,
                                     settings=LmSettings(max_iter=400, ftol=1e-15, gtol=1e-13))
    rows = [
        (True, (i, float(e), float(w), rec.residual_norm))
        for i, (e, w) in enumerate(zip(rec.levels, rec.weights))
    ]
    return _emit(cfg, ["level_index", "energy", "weight", "residual_norm", "status"], rows,
                 {"gauge": f"offset_zero;sign={rec.gauge[1]}", "lm_status": rec.status,
                  "initial_state": cfg.psi, "basis_index": cfg.basis_index})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        return run_sweep(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except QptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
