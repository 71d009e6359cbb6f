import numpy as np
import pytest

from srbayes.io import TfrSeries
from srbayes.models import transition


def _closed_form(t, tp):
    if t <= tp.gamma:
        return 0.
    if t <= tp.gamma + tp.lambda1:
        return tp.xi * (t - tp.gamma) / tp.lambda1
    if t <= tp.gamma + tp.lambda1 + tp.lambda2:
        return tp.xi
    if t <= tp.end_year:
        return tp.xi * (1 - (t - tp.gamma - tp.lambda1 - tp.lambda2) / tp.lambda3)
    return 0.


def test_transition_params():
    tp = transition.TransitionParams(2001, 10, 5, 10, 0.06)
    assert tp.end_year == 2026
    assert transition.TransitionParams.from_unconstrained(tp.to_unconstrained()).export() == pytest.approx(tp.export())
    assert transition.TransitionParams.from_dict(tp.export()).export() == tp.export()
    assert repr(tp) == "TransitionParams(gamma=2001, lambda1=10, lambda2=5, lambda3=10, xi=0.06)"
    with pytest.raises(ValueError):
        transition.TransitionParams(2001, 0, 5, 10, 0.06)
    with pytest.raises(ValueError):
        transition.TransitionParams(2001, 10, 5, 10, -0.01)


@pytest.mark.parametrize(
    "t, alpha",
    [
        [1990, 0.],  # before the start
        [2001, 0.],  # start
        [2006, 0.03],  # halfway up
        [2011, 0.06],  # plateau start
        [2014, 0.06],  # plateau
        [2016, 0.06],  # plateau end
        [2021, 0.03],  # halfway down
        [2026, 0.],  # end
        [2040, 0.],  # after the end
    ],
)
def test_trapezoid_alpha(t, alpha):
    tp = transition.TransitionParams(2001, 10, 5, 10, 0.06)
    assert transition.trapezoid_alpha(t, tp) == pytest.approx(alpha, abs=1e-12)


def test_trapezoid_randomized():
    rng = np.random.default_rng(0)
    for _ in range(100):
        tp = transition.TransitionParams(
            rng.uniform(1970, 2020), *rng.uniform(0.5, 25, 3), rng.uniform(0.005, 0.2)
        )
        boundaries = np.array([
            tp.gamma, tp.gamma + tp.lambda1, tp.gamma + tp.lambda1 + tp.lambda2, tp.end_year
        ])
        interior = rng.uniform(tp.gamma - 10, tp.end_year + 10, 20)
        points = np.concatenate([boundaries, interior, np.arange(1960, 2061)])
        alpha = transition.trapezoid_alpha(points, tp)
        expected = np.array([_closed_form(t, tp) for t in points])
        assert np.max(np.abs(alpha - expected)) < 1e-12
        assert np.all(alpha >= 0) and np.all(alpha <= tp.xi + 1e-15)
        outside = (points < tp.gamma) | (points > tp.end_year)
        assert np.all(alpha[outside] == 0)


def test_trapezoid_ramp_broadcast():
    years = np.arange(2000, 2030)
    gammas = np.array([[2000.], [2010.]])
    ramp = transition.trapezoid_ramp(years[None, :], gammas, 5., 5., 5.)
    assert ramp.shape == (2, 30)
    assert np.allclose(ramp[1, 10:], transition.trapezoid_ramp(years[:20], 2000., 5., 5., 5.))


@pytest.mark.parametrize(
    "values, expected",
    [
        [{year: 3.5 for year in range(1980, 2051)}, 1980.],  # immediate crossing
        [{year: 5. - 0.1 * (year - 1980) for year in range(1980, 2011)}, 1995.],  # linear interpolation
        [{year: 4. for year in range(1980, 2051)}, 2050.],  # never reached
    ],
)
def test_onset_prior_mean(values, expected):
    tfr = TfrSeries("P1", values)
    assert transition.onset_prior_mean(tfr, 3.5) == pytest.approx(expected, abs=1e-9)
