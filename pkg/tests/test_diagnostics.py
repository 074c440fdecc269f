import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablefield import fields
from stablefield.actions import MixedMovingAverage, RosinskiTriplet, SubGaussianShift
from stablefield.diagnostics import (DispersionVerdict, cube_averages, decide, dispersion_experiment,
                                     empirical_cf, ergodic_average, maxima_growth, scale_fit,
                                     stationarity_test)
from stablefield.errors import DegenerateField, FitUnstable
from stablefield.sas_core import FieldRealization, FiniteWeightedSpace, StableParams, Window, \
    sample_sas, standard_sas
from stablefield.streams import stream


def iid_source(alpha, scale=1.0):
    def draw(window, rng, size):
        return sample_sas(StableParams(alpha, scale), rng, size=(size,) + window.shape)
    return draw


def zero_source(window, rng, size):
    return np.zeros((size,) + window.shape)


def test_ergodic_average_zero_field():
    w = Window.cube(10, 1)
    tr = ergodic_average(FieldRealization(w, np.zeros(w.shape)), "cos", [1, 5, 10])
    assert tr.values.tolist() == [1.0, 1.0, 1.0]


def test_ergodic_average_iid():
    w = Window.cube(200, 1)
    vals = standard_sas(1.2, stream(4, "iid"), size=w.shape)
    real = FieldRealization(w, vals)
    tr = ergodic_average(real, "cos", [200])
    sd = math.sqrt((1 + math.exp(-2 ** 1.2)) / 2 - math.exp(-2)) / math.sqrt(401)
    assert abs(tr.values[0] - math.exp(-1)) < 3 * sd
    assert abs(ergodic_average(real, "sign", [200]).values[0]) < 0.15


def test_ergodic_average_window_too_small():
    w = Window((0,), (10,))
    with pytest.raises(ValueError):
        ergodic_average(FieldRealization(w, np.zeros(w.shape)), "cos", [3])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["cos", "sign", "indicator_positive"]))
def test_cube_average_bounded(seed, h):
    w = Window.cube(6, 2)
    vals = standard_sas(0.6, np.random.default_rng(seed), size=(3,) + w.shape)
    th = cube_averages(vals, w, h, [0, 2, 6])
    assert np.all(np.abs(th) <= 1.0)


def test_decide_thresholds():
    assert decide(0.2) is DispersionVerdict.ERGODIC
    assert decide(0.9) is DispersionVerdict.NON_ERGODIC
    assert decide(0.5) is DispersionVerdict.INCONCLUSIVE
    assert decide(0.5, (0.6, 0.8)) is DispersionVerdict.ERGODIC


def test_dispersion_zero_field():
    res = dispersion_experiment(zero_source, R=30, n_grid=(10, 100), rng=stream(0))
    assert res.verdict is DispersionVerdict.ERGODIC and res.rho == 0.0


def test_dispersion_needs_30_realizations():
    with pytest.raises(ValueError):
        dispersion_experiment(zero_source, R=10)


def test_dispersion_iid_is_ergodic():
    res = dispersion_experiment(iid_source(1.2), R=40, n_grid=(50, 1000), rng=stream(1, "d"))
    assert res.verdict is DispersionVerdict.ERGODIC
    assert [row["n"] for row in res.table()] == [50, 1000]


def test_dispersion_catalog_mma_and_subgauss():
    ys = FiniteWeightedSpace(["a", "b"], [1.0, 0.5])
    kern = np.array([[0.2, 0.5, 1.0, 0.5, 0.2], [0.0, -0.6, 1.0, 0.3, 0.0]])
    tr = RosinskiTriplet(MixedMovingAverage(ys, 1, 2), kern, 1.2)
    assert dispersion_experiment(tr, rng=stream(5, "m")).verdict is DispersionVerdict.ERGODIC
    sg = RosinskiTriplet(SubGaussianShift(1), None, 1.2)
    assert dispersion_experiment(sg, rng=stream(5, "s")).verdict is DispersionVerdict.NON_ERGODIC


# -- characteristic functions ----------------------------------------------------

def test_cf_zero_samples_and_zero_theta():
    est = empirical_cf(np.zeros(100), [0.0, 1.0, 5.0])
    assert np.all(est.values == 1)
    est = empirical_cf(standard_sas(1.0, stream(2), size=1000), [0.0])
    assert est.values[0] == 1.0


def test_cf_alpha_0_8():
    x = standard_sas(0.8, stream(3, "cf"), size=100_000)
    est = empirical_cf(x, [1.0])
    assert abs(est.values[0].real - math.exp(-1)) < 3 * est.se_real[0]
    assert abs(est.values[0].imag) < 3 * est.se_imag[0]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50),
       st.lists(st.floats(-50, 50), min_size=1, max_size=5))
def test_cf_modulus_at_most_one(xs, thetas):
    est = empirical_cf(xs, thetas)
    assert np.all(np.abs(est.values) <= 1 + 1e-12)


def test_empirical_cf_rejects_empty():
    with pytest.raises(ValueError):
        empirical_cf([], [1.0])


def test_scale_fit_cauchy_and_homogeneity():
    x = standard_sas(1.0, stream(6, "cauchy"), size=100_000)
    s = scale_fit(x, 1.0)
    assert 0.95 <= s <= 1.05
    assert scale_fit(3 * x, 1.0) == pytest.approx(3 * s, rel=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 1000))
def test_scale_fit_equivariant(lam, seed):
    x = standard_sas(1.4, np.random.default_rng(seed), size=2000)
    assert scale_fit(lam * x, 1.4) == pytest.approx(lam * scale_fit(x, 1.4), rel=1e-6)


def test_scale_fit_zero_samples_unstable():
    with pytest.raises(FitUnstable):
        scale_fit(np.zeros(2000), 1.0)


# -- stationarity ---------------------------------------------------------------------

def test_stationarity_lag_zero_identical():
    (rep,) = stationarity_test(iid_source(1.1), [0], R=2000, rng=stream(7))
    assert rep.p_value == 1.0 and rep.cf_distance == 0.0


def test_stationarity_negative_control():
    def drift(window, rng, size):
        scale = 1.0 + 0.5 * np.abs(np.arange(window.lo[0], window.hi[0] + 1))
        return standard_sas(1.5, rng, size=(size,) + window.shape) * scale

    (rep,) = stationarity_test(drift, [4], R=10_000, rng=stream(8))
    assert rep.p_value < 0.001


def test_stationarity_mma():
    ys = FiniteWeightedSpace(["a"], [1.0])
    tr = RosinskiTriplet(MixedMovingAverage(ys, 2, 1), np.ones((1, 3, 3)), 1.2)
    reps = stationarity_test(tr, [(1, 0), (2, -3)], R=5000, rng=stream(9))
    assert all(r.p_value > 0.001 for r in reps)


# -- maxima ----------------------------------------------------------------------------

def test_maxima_iid_exponent():
    mg = maxima_growth(iid_source(1.2), [10, 30, 100, 300, 1000, 3000], R=100, rng=stream(10))
    assert abs(mg.exponent - 1 / 1.2) < 0.15


def test_maxima_zero_field_rejected():
    with pytest.raises(DegenerateField):
        maxima_growth(zero_source, [10, 100], R=5, rng=stream(0))
    with pytest.raises(ValueError):
        maxima_growth(zero_source, [10, 50], R=5, rng=stream(0))


# -- field sampling ---------------------------------------------------------------------

def test_sub_gaussian_marginal_scale():
    tr = RosinskiTriplet(SubGaussianShift(1, coordinate_sd=0.7), None, 1.3)
    x, _ = fields.sample_field(tr, Window((0,), (0,)), stream(11), size=100_000)
    sigma = fields.sub_gaussian_scale(tr.family, 1.3)
    assert scale_fit(x.ravel(), 1.3) == pytest.approx(sigma, rel=0.05)


def test_mma_marginal_cf():
    ys = FiniteWeightedSpace(["a", "b"], [1.0, 2.0])
    kern = np.array([[0.3, 1.0, -0.4], [0.0, 0.5, 0.5]])
    tr = RosinskiTriplet(MixedMovingAverage(ys, 1, 1), kern, 0.9)
    x, _ = fields.sample_field(tr, Window((0,), (3,)), stream(12), size=50_000)
    norm = fields.alpha_norm_at_origin(tr)
    for k in range(4):
        c = np.cos(x[:, k])
        assert abs(c.mean() - math.exp(-norm)) < 3.5 * c.std(ddof=1) / math.sqrt(len(c))
