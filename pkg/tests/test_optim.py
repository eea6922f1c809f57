import numpy as np
import pytest

from mublab.numcore import SeededRng
from mublab.optim import NonFiniteObjectiveError, OptimizerSpec, minimize


def test_quadratic_minimum():
    res = minimize(lambda x: (x[0] - 0.3) ** 2, OptimizerSpec([(-1, 1)]), SeededRng(0))
    assert res.x[0] == pytest.approx(0.3, abs=1e-4)
    assert res.fun < 1e-8


def test_bounded_minimum_on_edge():
    res = minimize(lambda x: (x[0] - 5) ** 2, OptimizerSpec([(-1, 1)]), SeededRng(0))
    assert res.x[0] == pytest.approx(1.0, abs=1e-9)


def test_constant_objective_stops_early():
    res = minimize(lambda x: 1.0, OptimizerSpec([(-1, 1)] * 2, max_evals=50), SeededRng(0))
    assert res.fun == 1.0
    assert res.n_evals < 2 * 50


def test_budget_counts_every_call():
    calls = []

    def f(x):
        calls.append(1)
        return float(np.sum(np.cos(3 * x)) + np.sum(x ** 2))

    spec = OptimizerSpec([(-3, 3)] * 3, max_evals=25, restarts=2)
    res = minimize(f, spec, SeededRng(1))
    assert res.n_evals == len(calls) <= 2 * 25


def test_non_finite_raises():
    with pytest.raises(NonFiniteObjectiveError):
        minimize(lambda x: np.nan, OptimizerSpec([(-1, 1)]), SeededRng(0))


def test_never_worse_than_start():
    def rough(x):
        return float(np.sin(7 * x[0]) * np.cos(5 * x[1]) + 0.1 * x[0])

    x0 = np.array([0.2, -0.4])
    res = minimize(rough, OptimizerSpec([(-2, 2)] * 2, max_evals=40), SeededRng(3), x0=x0)
    assert res.fun <= rough(x0)
    assert np.allclose(res.starts[0], x0)
    assert res.fun == pytest.approx(rough(res.x))


def test_deterministic():
    spec = OptimizerSpec([(-2, 2)] * 2, max_evals=60)
    f = lambda x: float(np.sin(3 * x[0]) + x[1] ** 2)
    a, b = minimize(f, spec, SeededRng(9)), minimize(f, spec, SeededRng(9))
    assert a.fun == b.fun and np.array_equal(a.x, b.x)


@pytest.mark.parametrize("kw", [{"max_evals": 0}, {"h": 0.0}, {"restarts": 0}])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        OptimizerSpec([(-1, 1)], **kw)
