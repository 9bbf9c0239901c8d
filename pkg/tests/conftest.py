"""Session-scoped fixtures for the heavy Monte Carlo runs.

The long-horizon simulations are shared between the acceptance criteria
and the module tests so each configuration is simulated once per worker
setting.
"""

import numpy as np
import pytest

import evobarrier as eb

CRIT8 = dict(a=1.0, b=0.4, N=2, A=0.6, horizon=10**6, reps=100, seed=20250808)
CRIT9 = dict(N=4, k=1.0, horizon=10**6, reps=200, seed=20250809)
CRIT9_AS = (0.3, 0.8)


@pytest.fixture(scope="session")
def crit8_setup():
    model = eb.example1(CRIT8["a"], CRIT8["b"], CRIT8["N"])
    schedule = eb.make_schedule(model, CRIT8["A"])
    target = eb.limit_distribution(model)
    return model, schedule, target


@pytest.fixture(scope="session")
def crit8_runs(crit8_setup):
    model, schedule, _ = crit8_setup
    return {
        workers: eb.simulate_batch(
            model, schedule, CRIT8["horizon"], CRIT8["reps"], CRIT8["seed"],
            workers=workers,
        )
        for workers in (1, 8)
    }


@pytest.fixture(scope="session")
def crit9_estimates():
    model = eb.example3(CRIT9["N"], CRIT9["k"])
    out = {}
    for A in CRIT9_AS:
        schedule = eb.make_schedule(model, A)
        out[A] = {
            workers: eb.estimate_rate(
                model, schedule, CRIT9["horizon"], CRIT9["reps"], CRIT9["seed"],
                workers=workers,
            )
            for workers in (1, 8)
        }
    return out
