"""End-to-end epidemic workflow: simulate a seeded synthetic outbreak with
a gamma-distributed infectious period, then recover the parameters by
maximum likelihood over the regularized chain.
"""

import argparse
import pathlib
from dataclasses import replace

from gammadde.distributions import Rng
from gammadde.epi import (
    SirParams,
    mle_fit,
    simulate_dataset,
    write_cases_csv,
    write_fit_report,
    write_serial_csv,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=20260811)
    parser.add_argument("--beta", type=float, default=0.5)
    parser.add_argument("--tau", type=float, default=5.0)
    parser.add_argument("--j", type=float, default=4.0)
    parser.add_argument("--eps", type=float, default=1e-3)
    parser.add_argument("--M", type=float, default=1000.0)
    parser.add_argument("--days", type=int, default=120)
    parser.add_argument("--n-serial", type=int, default=100)
    parser.add_argument("--max-evals", type=int, default=500)
    parser.add_argument("--out-dir", default="epi_results")
    args = parser.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    truth = SirParams(
        beta=args.beta,
        tau=args.tau,
        j=args.j,
        eps=args.eps,
        M=args.M,
        obs_times=tuple(float(k) for k in range(1, args.days + 1)),
    )
    data = simulate_dataset(Rng(args.seed), truth, n_serial=args.n_serial)
    write_cases_csv(out / "cases.csv", truth.obs_times, data.cases)
    write_serial_csv(out / "serial.csv", data.serial)
    print(f"simulated {sum(data.cases)} cases, {len(data.serial)} serial intervals")

    init = replace(truth, beta=0.8 * args.beta, tau=0.8 * args.tau, j=max(1.5, args.j - 1.0))
    fit = mle_fit(data, init, max_evals=args.max_evals)
    write_fit_report(out / "fit.json", fit)
    print(
        f"fit: beta={fit.beta:.4f} (truth {args.beta}), tau={fit.tau:.4f} "
        f"(truth {args.tau}), j={fit.j:.3f} (truth {args.j}), eps={fit.eps:.2e} "
        f"(truth {args.eps}); loglik={fit.loglik:.2f} after {fit.n_evals} evaluations"
    )


if __name__ == "__main__":
    main()
