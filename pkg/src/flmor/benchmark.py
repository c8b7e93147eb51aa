"""Timing of the structured index-1 Sylvester route against elimination.

Both paths solve the same equation ``A X + E X Â^T + F = 0`` of the
eliminated system: the dense path forms ``A = J1 - J2 J4^{-1} J3`` and
solves with dense shifted LUs, the sparse path factors the augmented
pencil ``[[J1 + s E1, J2], [J3, J4]]`` directly. The instance family is
synthetic (see :func:`flmor.systems.generate_random_index1`).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from flmor.sylvester import solve_index1, solve_semi_generalized
from flmor.systems import eliminate_algebraic, generate_random_index1

FAMILY_LABEL = "synthetic index-1 family (banded sparse coupling, bandwidth 5, diagonally dominant J4)"
BANDWIDTH = 5


@dataclass(frozen=True)
class BenchmarkRow:
    n1: int
    n2: int
    t_dense_path: float
    t_sparse_path: float
    agreement: float

    @property
    def ratio(self):
        return self.t_dense_path / self.t_sparse_path


def _best_of(fn, repeats):
    best, out = np.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def time_instance(n1, n2, r=10, seed=0, repeats=3):
    sys = generate_random_index1(n1, n2, p=2, m=2, seed=seed, decades=1.0, bandwidth=BANDWIDTH)
    rng = np.random.default_rng([seed, n1, n2])
    a = rng.standard_normal((r, r))
    a_hat = a - (np.max(np.linalg.eigvals(a).real) + 1.0) * np.eye(r)
    F = sys.reduced_input() @ rng.standard_normal((sys.p, r))

    def dense():
        el = eliminate_algebraic(sys)
        return solve_semi_generalized(el.A, el.E, a_hat, F)

    def sparse():
        return solve_index1(sys, a_hat, F)

    td, Xd = _best_of(dense, repeats)
    ts, Xs = _best_of(sparse, repeats)
    agree = float(np.linalg.norm(Xd - Xs) / np.linalg.norm(Xd))
    return BenchmarkRow(n1, n2, td, ts, agree)


def run_benchmark(sizes, n2_ratio=0.5, r=10, seed=0, repeats=3):
    return [time_instance(n1, max(1, int(round(n2_ratio * n1))), r, seed, repeats) for n1 in sizes]


def write_benchmark_csv(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {FAMILY_LABEL}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n1", "n2", "t_dense_path", "t_sparse_path"])
        for row in rows:
            w.writerow([row.n1, row.n2, f"{row.t_dense_path:.6f}", f"{row.t_sparse_path:.6f}"])
