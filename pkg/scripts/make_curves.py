"""Write plot-ready CSV tables for the mixing and decay experiments.

Outputs (in ``--out``):
  pauli_mixing.csv   k, measured trace distance, bound, doubled bound
  bose_mixing.csv    n, measured, displayed bound
  gibbs_kappa.csv    beta, kappa (w != v count), kappa (count with self), empirical rate
"""

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qcurv.channels import ising_chain
from qcurv.curvature import gibbs_contraction_certificate, pauli_mixing_check
from qcurv.cvmodels import BeamSplitterSpec, bose_channel, mixing_table, thermal_state
from qcurv.channels import random_pauli_spec
from qcurv.matcore import random_density


@dataclass
class CurveConfig:
    out: Path
    seed: int = 0
    pauli_qubits: int = 2
    pauli_steps: int = 20
    bose_cutoff: int = 16
    bose_lambda: float = 0.5
    bose_steps: int = 8
    betas: tuple = (0.0, 0.01, 0.02, 0.03, 0.04, 0.05)
    gibbs_sites: int = 3


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def pauli_curve(cfg, rng):
    spec = random_pauli_spec(cfg.pauli_qubits, rng)
    res = pauli_mixing_check(spec, random_density(2 ** cfg.pauli_qubits, rng), cfg.pauli_steps)
    rows = [(r["k"], r["measured"], r["bound"], 2 * r["bound"]) for r in res["rows"]]
    _write(cfg.out / "pauli_mixing.csv", ["k", "measured", "bound", "doubled_bound"], rows)


def bose_curve(cfg, rng):
    N, K = cfg.bose_cutoff, cfg.bose_cutoff // 2
    spec = BeamSplitterSpec(cfg.bose_lambda, thermal_state(1.0, N), N)
    states = []
    for _ in range(2):
        r = np.zeros((N + 1, N + 1), complex)
        r[:K + 1, :K + 1] = random_density(K + 1, rng)
        states.append(r)
    rows = mixing_table(spec, states[0], states[1], cfg.bose_steps, ch=bose_channel(spec))
    _write(cfg.out / "bose_mixing.csv", ["n", "measured", "bound"],
           [(r["n"], r["measured"], r["bound"]) for r in rows])


def gibbs_curve(cfg, rng):
    rows = []
    for beta in cfg.betas:
        r = gibbs_contraction_certificate(ising_chain(cfg.gibbs_sites), beta, rng=rng, samples=5,
                                          cb_mode="bound")
        rows.append((beta, r["kappa"], r["kappa_including_self"], r["empirical_rate"]))
    _write(cfg.out / "gibbs_kappa.csv", ["beta", "kappa", "kappa_including_self", "empirical_rate"], rows)


def main(argv=None):
    p = argparse.ArgumentParser(description="Write CSV tables for mixing and decay curves.")
    p.add_argument("--out", type=Path, default=Path("curves"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-gibbs", action="store_true", help="skip the slower Gibbs sweep")
    a = p.parse_args(argv)
    cfg = CurveConfig(out=a.out, seed=a.seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    pauli_curve(cfg, rng)
    bose_curve(cfg, rng)
    if not a.skip_gibbs:
        gibbs_curve(cfg, rng)
    return 0


if __name__ == "__main__":
    sys.exit(main())
