"""Realizations of the stable field generated by a Rosinski triplet."""

import math

import numpy as np
from scipy.special import gamma

from . import markov
from .actions import FiniteDiscrete, MarkovShift, MixedMovingAverage, SubGaussianShift
from .errors import ModelError
from .sas_core import (FieldRealization, LePageConfig, lepage_coefficients, sample_discrete_integral,
                       sample_positive_stable, simulate_frechet_extremal, stable_series_constant,
                       standard_sas)

DEFAULT_TRUNCATION = 10_000


def finite_spectral_matrix(triplet, window):
    return np.array([triplet.spectral_table(t) for t in window.points()])


def _mma(triplet, window, rng, size):
    fam = triplet.family
    R, d, alpha = fam.radius, fam.d, triplet.alpha
    shape = window.shape
    zshape = tuple(n + 2 * R for n in shape)
    out = np.zeros((size,) + shape)
    scale = fam.y_space.weights ** (1.0 / alpha)
    for iy in range(len(fam.y_space)):
        z = standard_sas(alpha, rng, size=(size,) + zshape)
        kern = triplet.kernel[iy] * scale[iy]
        # X_t = sum_r f(y, r) Z_{y, r - t}: lattice coordinates of Z run backwards
        # along each axis, so offset r reads the slice starting at R - r
        for a in np.ndindex(*kern.shape):
            if kern[a] == 0:
                continue
            sl = tuple(slice(2 * R - ai, 2 * R - ai + n) for ai, n in zip(a, shape))
            out += kern[a] * z[(slice(None),) + sl]
    return out


def sub_gaussian_scale(family, alpha):
    """Marginal scale ``(E|p_0|**alpha)**(1/alpha)`` for Gaussian coordinates."""
    sd = family.coordinate_sd
    moment = sd ** alpha * 2 ** (alpha / 2) * gamma((alpha + 1) / 2) / math.sqrt(math.pi)
    return moment ** (1.0 / alpha)


def _sub_gaussian(triplet, window, rng, size):
    alpha = triplet.alpha
    sigma = sub_gaussian_scale(triplet.family, alpha)
    # X_t = A**(1/2) G_t with E exp(-lam A) = exp(-lam**(alpha/2)), G_t ~ N(0, 2 sigma**2)
    a = sample_positive_stable(alpha / 2, rng, size=size)
    g = rng.normal(0.0, math.sqrt(2.0) * sigma, size=(size,) + window.shape)
    return np.sqrt(a).reshape((size,) + (1,) * window.d) * g


def _markov(triplet, window, rng, size, truncation, radius):
    fam = triplet.family
    if window.d != 1:
        raise ModelError("Markov shift fields are indexed by Z (d = 1)")
    alpha = triplet.alpha
    lo, hi = window.lo[0], window.hi[0]
    kernel = triplet.kernel
    out = np.zeros((size, hi - lo + 1))
    masses = {}
    tails = {}
    for cls in fam.classes:
        measure = markov.invariant_measure(cls)
        start = markov.truncation_set(cls, radius)
        m = float(measure.weights(start).sum())
        cfg = LePageConfig(truncation, m)
        coeff, last = lepage_coefficients(alpha, cfg, rng, size)
        norm = (stable_series_constant(alpha) * m) ** (1.0 / alpha)
        level = kernel.level(cls.index) * norm
        anchor = kernel.codes[cls.index]

        def visit(t, codes, coeff=coeff, level=level, anchor=anchor):
            if lo <= t <= hi:
                hit = (codes.reshape(size, truncation) == anchor)
                out[:, t - lo] += level * np.sum(coeff * hit, axis=1)

        markov.walk_two_sided(cls, (lo, hi), rng, size * truncation, visit,
                              initial=[cls.states[c] for c in start] if cls.finite else start,
                              measure=measure)
        masses[cls.index] = m
        tails[cls.index] = (m ** (1.0 / alpha) * last ** (-1.0 / alpha)).tolist()
    return out, {"truncated_mass": masses, "tail_estimate": tails}


def sample_field(triplet, window, rng, size=1, truncation=DEFAULT_TRUNCATION,
                 radius=markov.TRUNCATION_RADIUS):
    """``size`` independent realizations over ``window``: ``(size, *window.shape)``."""
    fam = triplet.family
    if window.d != fam.d:
        raise ModelError(f"window dimension {window.d} != action dimension {fam.d}")
    meta = {"method": fam.kind, "truncation": None}
    if isinstance(fam, FiniteDiscrete):
        mat = finite_spectral_matrix(triplet, window)
        vals = sample_discrete_integral(mat, fam.space, triplet.alpha, rng, size)
        meta["method"] = "discrete"
        return vals.reshape((size,) + window.shape), meta
    if isinstance(fam, MixedMovingAverage):
        return _mma(triplet, window, rng, size), meta
    if isinstance(fam, SubGaussianShift):
        meta["method"] = "sub-gaussian-mixture"
        return _sub_gaussian(triplet, window, rng, size), meta
    if isinstance(fam, MarkovShift):
        vals, extra = _markov(triplet, window, rng, size, truncation, radius)
        meta.update(method="lepage", truncation=truncation, **extra)
        return vals, meta
    raise ModelError(f"cannot simulate {type(fam).__name__}")


def simulate_field(triplet, window, rng, meta=None, **kw):
    vals, info = sample_field(triplet, window, rng, size=1, **kw)
    info.update(meta or {})
    return FieldRealization(window, vals[0], info)


def simulate_frechet_field(triplet, window, rng, meta=None):
    """Max-stable analogue of a FiniteDiscrete triplet (trivial cocycle, f >= 0)."""
    fam = triplet.family
    if not isinstance(fam, FiniteDiscrete):
        raise ModelError("extremal simulation is implemented for FiniteDiscrete triplets")
    return simulate_frechet_extremal(triplet.spectral_table, fam.space, triplet.alpha,
                                     window, rng, meta)


def alpha_norm_at_origin(triplet):
    """``||f_0||_alpha**alpha``, the quantity with ``E cos X_0 = exp(-it)``."""
    fam = triplet.family
    a = triplet.alpha
    if isinstance(fam, FiniteDiscrete):
        return float(np.sum(np.abs(triplet.kernel) ** a * fam.space.weights))
    if isinstance(fam, MixedMovingAverage):
        per_y = np.abs(triplet.kernel).reshape(len(fam.y_space), -1) ** a
        return float(np.sum(per_y.sum(axis=1) * fam.y_space.weights))
    if isinstance(fam, SubGaussianShift):
        return sub_gaussian_scale(fam, a) ** a
    if isinstance(fam, MarkovShift):
        return triplet.kernel.alpha_mass(fam.classes)
    raise ModelError(f"unknown family {type(fam).__name__}")
