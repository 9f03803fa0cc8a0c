"""Generates the acceptance-run CSVs once per session through the qpt CLI
(the primary package's external interface)."""

import subprocess
import sys

import pytest

PI_2 = "1.5707963267948966"


def _qpt(args):
    proc = subprocess.run(
        [sys.executable, "-m", "qpt.cli", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, f"qpt {' '.join(args)} failed: {proc.stderr}"


@pytest.fixture(scope="session")
def acceptance_csvs(tmp_path_factory):
    root = tmp_path_factory.mktemp("csv")
    paths = {
        "a_coeff": root / "a_coeff.csv",
        "comparing_map": root / "comparing_map.csv",
        "comparing_ising": root / "comparing_ising.csv",
        "6q_d2phase": root / "d2_6q.csv",
        "6q_entanglement": root / "ent_6q.csv",
        "q6_eigens": root / "eig_6q.csv",
        "q4_fourier": root / "fourier_4q.csv",
        "q4_eigens": root / "eig_4q.csv",
    }
    _qpt(["coeffs", "--pairs", "0.5:0.5,0.8:0.8,1.0:1.0,1.3:1.3", "--lmax", "10",
          "--out", str(paths["a_coeff"])])
    _qpt(["sweep-energy", "--n", "200", "--r", "1.9", "--phi", f"0:{PI_2}:300",
          "--out", str(paths["comparing_map"])])
    _qpt(["sweep-energy", "--n", "200", "--r", "1.9", "--phi", f"0:{PI_2}:300",
          "--model", "ising", "--out", str(paths["comparing_ising"])])
    _qpt(["sweep-energy", "--n", "6", "--r", "1.9", "--phi", f"0:{PI_2}:150",
          "--backend", "exact", "--out", str(paths["6q_d2phase"])])
    _qpt(["entanglement", "--qubits", "6", "--r", "1.9", "--phi", "0.01:1.56:100",
          "--out", str(paths["6q_entanglement"])])
    _qpt(["dense-sweep", "--qubits", "6", "--r", "1.9", "--phi", f"0:{PI_2}:60",
          "--out", str(paths["q6_eigens"])])
    _qpt(["spectroscopy", "--qubits", "4", "--chi", "0.2", "--theta", "0:0.5:26",
          "--samples", "2048", "--k-int", "2", "--out", str(paths["q4_fourier"])])
    _qpt(["dense-sweep", "--qubits", "4", "--chi", "0.2", "--theta", "0:0.5:26",
          "--out", str(paths["q4_eigens"])])
    return paths
