"""Delta-gamma approximation error against full repricing as the horizon shrinks.

Prints, for a single ATM call, the mean absolute gap between the repriced and
the quadratic P&L and the relative error of the quadratic variance.

    python3 scripts/approximation_study.py --samples 200000
"""

import argparse

import numpy as np

from dgmv import FactorModel, McConfig, make_portfolio, simulate_exact
from dgmv.instruments import call, greeks
from dgmv.reduction import reduce_portfolio
from dgmv import moments


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--streams", type=int, default=4)
    args = ap.parse_args()

    inst = [call(0, strike=100.0, vol=0.2, rate=0.05, expiry=1.0)]
    print(f"{'dt':>10} {'E|gap|':>12} {'se':>10} {'ratio':>7} {'var rel err':>12} {'(mc se)':>8}")
    prev = None
    for weeks in (4, 2, 1, 0.5, 0.25):
        dt = weeks / 52
        model = FactorModel(np.array([[400.0]]), dt=dt, levels=np.array([100.0]))
        spec = make_portfolio(inst, [1.0], model)
        est = simulate_exact(spec, model, McConfig(args.samples, args.seed, args.streams))
        qf = reduce_portfolio([greeks(inst[0], model)], [1.0], model)
        var_err = abs(moments.variance(qf) - est.var_est) / est.var_est
        ratio = "" if prev is None else f"{prev / est.approx_gap:7.2f}"
        print(f"{dt:10.5f} {est.approx_gap:12.4e} {est.se_gap:10.2e} {ratio:>7} {var_err:12.2%} {est.se_var / est.var_est:8.2%}")
        prev = est.approx_gap


if __name__ == "__main__":
    main()
