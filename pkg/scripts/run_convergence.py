"""Step-size sweeps for the three built-in test problems.

Writes one CSV of (h, max_error) per problem/shape combination into
--out-dir and prints the fitted orders.  Reproduces the solver-accuracy
study: the two kernel-driven problems use the coupled quadrature, the
eigenfunction problem pins the quadrature at reference accuracy so the
sweep measures the stepping error alone.
"""

import argparse
import pathlib

import numpy as np

from gammadde import analysis
from gammadde.fcrk import fcrk4_solve
from gammadde.quadrature import QuadConfig


def sweep(problem, reference, h_values, quad):
    times = np.linspace(problem.t0, problem.t_end, 1001)
    ref_vals = reference(times)
    errors = []
    for h in h_values:
        sol = fcrk4_solve(problem, h, quad=quad)
        errors.append(float(np.max(np.abs(sol.query(times) - ref_vals))))
    return errors


def write_csv(path, h_values, errors):
    with open(path, "w") as fh:
        fh.write("h,max_error\n")
        for h, e in zip(h_values, errors):
            fh.write(f"{h:.17g},{e:.17g}\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="convergence_results")
    args = parser.parse_args()
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    h_values = [0.1, 0.05, 0.025, 0.0125]
    coupled = QuadConfig(xi=(1 / 16) ** 4)

    for j in (1, 4, 7):
        problem = analysis.linear_dde_problem(j)
        errs = sweep(problem, lambda t, j=j: analysis.linear_test_reference(j, t),
                     h_values, coupled)
        rep = analysis.estimate_order(h_values, errs)
        write_csv(out / f"linear_j{j}.csv", h_values, errs)
        print(f"linear j={j}: order {rep.slope:.3f}")

    for j in (3, 8, 14):
        problem = analysis.nonlinear_dde_problem(j)
        errs = sweep(problem, lambda t, j=j: analysis.nonlinear_test_reference(j, t),
                     h_values, coupled)
        rep = analysis.estimate_order(h_values, errs)
        write_csv(out / f"nonlinear_j{j}.csv", h_values, errs)
        print(f"nonlinear j={j}: order {rep.slope:.3f}")

    pinned = QuadConfig(h_int=1 / 2048)
    wide = [0.5, 0.25, 0.125, 0.0625]
    for tau, j, beta in [(4.65, 2.15, 0.5), (3.76, 3.70, 0.35), (4.25, 2.25, 0.71)]:
        problem, lam = analysis.eigenfunction_problem(tau, j, beta)
        errs = sweep(problem, lambda t, lam=lam: np.exp(lam * t), wide, pinned)
        rep = analysis.estimate_order(wide, errs)
        tag = f"{tau}_{j}_{beta}".replace(".", "p")
        write_csv(out / f"eigenfunction_{tag}.csv", wide, errs)
        print(f"eigenfunction ({tau}, {j}, {beta}): order {rep.slope:.3f}")


if __name__ == "__main__":
    main()
