"""Random problem generators shared by the test modules."""

import numpy as np

from dgmv.instruments import GreekBundle
from dgmv.market import FactorModel, validate_factor_model
from dgmv.reduction import MVProblem, QuadraticReduction


def spd(rng, n, floor=0.1):
    a = rng.standard_normal((n, n))
    return a @ a.T + floor * np.eye(n)


def sym(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def model(rng, n, dt=None):
    dt = rng.uniform(0.1, 2.0) if dt is None else dt
    return validate_factor_model(FactorModel(spd(rng, n), dt, rng.uniform(50, 150, n)))


def bundles(rng, n, m):
    return [
        GreekBundle.make(rng.uniform(0.5, 2.0), rng.standard_normal(), rng.standard_normal(n), sym(rng, n))
        for _ in range(m)
    ]


def quadratic_form(rng, n):
    return QuadraticReduction.from_coefficients(
        rng.uniform(-2, 2), rng.standard_normal(n), rng.uniform(-1, 1, n)
    )


def mv_problem(rng, m, target=None):
    return MVProblem(spd(rng, m, floor=0.5), rng.standard_normal(m), rng.uniform(0.5, 2.0, m), rng.uniform(-1, 1), target)
