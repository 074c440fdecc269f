"""Monte Carlo cross-checks of the symbolic verdicts.

Cube averages ``theta_n = (2n+1)**-d * sum_{|t| <= n} h(X_t)`` converge almost
surely to ``E h(X_0)`` for ergodic fields; for non-ergodic fields the limit is
random.  The dispersion experiment turns that dichotomy into a decision by
comparing the spread of ``theta_n`` across realizations at a small and a large
``n``.
"""

from dataclasses import dataclass, field
import enum

import numpy as np
from scipy import stats

from .actions import RosinskiTriplet
from .errors import DegenerateField, FitUnstable
from .fields import DEFAULT_TRUNCATION, sample_field
from .sas_core import FieldRealization, Window

THRESHOLDS = (0.35, 0.7)

H_FUNCTIONS = {
    "cos": np.cos,
    "sign": np.sign,
    "indicator_positive": lambda x: (np.asarray(x) > 0).astype(float),
}


def resolve_h(h):
    if callable(h):
        return h, getattr(h, "__name__", "h")
    try:
        return H_FUNCTIONS[h], h
    except KeyError:
        raise ValueError(f"unknown h {h!r}; choose from {sorted(H_FUNCTIONS)}") from None


@dataclass
class ErgodicAverageTrace:
    n_grid: tuple
    values: np.ndarray
    h: str = "h"


def _cube_slices(window, n):
    if not all(l <= -n and h >= n for l, h in zip(window.lo, window.hi)):
        raise ValueError(f"window {window.lo}..{window.hi} does not contain the cube of radius {n}")
    return tuple(slice(-n - l, n - l + 1) for l in window.lo)


def cube_averages(values, window, h, n_grid):
    """``(R, len(n_grid))`` cube averages for a stack of realizations ``values``."""
    func, _ = resolve_h(h)
    hv = func(values)
    out = np.empty((hv.shape[0], len(n_grid)))
    axes = tuple(range(1, hv.ndim))
    for k, n in enumerate(n_grid):
        sl = (slice(None),) + _cube_slices(window, n)
        out[:, k] = hv[sl].mean(axis=axes)
    return out


def ergodic_average(realization, h, n_grid):
    n_grid = tuple(int(n) for n in n_grid)
    _, name = resolve_h(h)
    vals = cube_averages(realization.values[None], realization.window, h, n_grid)[0]
    return ErgodicAverageTrace(n_grid, vals, name)


class DispersionVerdict(enum.Enum):
    ERGODIC = "EmpiricallyErgodic"
    NON_ERGODIC = "EmpiricallyNonErgodic"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class DispersionResult:
    verdict: DispersionVerdict
    rho: float
    thresholds: tuple
    n_grid: tuple
    thetas: np.ndarray = field(repr=False)

    @property
    def means(self):
        return self.thetas.mean(axis=0)

    @property
    def sds(self):
        return self.thetas.std(axis=0, ddof=1)

    def table(self):
        return [{"n": n, "mean": float(m), "sd": float(s)}
                for n, m, s in zip(self.n_grid, self.means, self.sds)]

    def to_dict(self):
        return {"verdict": self.verdict.value, "rho": self.rho,
                "thresholds": list(self.thresholds), "table": self.table()}


def _draw(source, window, rng, size, truncation):
    if isinstance(source, RosinskiTriplet):
        vals, _ = sample_field(source, window, rng, size=size, truncation=truncation)
        return vals
    return np.asarray(source(window, rng, size))


def decide(rho, thresholds=THRESHOLDS):
    lo, hi = thresholds
    if rho < lo:
        return DispersionVerdict.ERGODIC
    if rho > hi:
        return DispersionVerdict.NON_ERGODIC
    return DispersionVerdict.INCONCLUSIVE


def dispersion_ratio(thetas):
    sd = thetas.std(axis=0, ddof=1)
    if sd[0] == 0:
        return 0.0 if sd[-1] == 0 else np.inf
    return float(sd[-1] / sd[0])


def dispersion_experiment(source, h="cos", n_grid=(100, 2000), R=50, rng=None,
                          thresholds=THRESHOLDS, truncation=DEFAULT_TRUNCATION, d=None):
    """Spread of theta_n across ``R`` realizations; ``rho = sd(n_max) / sd(n_min)``."""
    if R < 30:
        raise ValueError("dispersion experiments need at least 30 realizations")
    rng = rng if rng is not None else np.random.default_rng()
    n_grid = tuple(sorted(int(n) for n in n_grid))
    d = d or (source.d if isinstance(source, RosinskiTriplet) else 1)
    window = Window.cube(n_grid[-1], d)
    values = _draw(source, window, rng, R, truncation)
    thetas = cube_averages(values, window, h, n_grid)
    rho = dispersion_ratio(thetas)
    return DispersionResult(decide(rho, thresholds), rho, tuple(thresholds), n_grid, thetas)


@dataclass
class CFEstimate:
    theta: np.ndarray
    values: np.ndarray
    se_real: np.ndarray
    se_imag: np.ndarray


def _jackknife_se(x):
    n = len(x)
    loo = (x.sum(axis=0) - x) / (n - 1)
    return np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))


def empirical_cf(samples, theta_grid):
    """Mean of ``exp(i theta x)`` per theta with jackknife standard errors."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("need at least one sample")
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    arg = np.outer(x, theta)
    re, im = np.cos(arg), np.sin(arg)
    values = re.mean(axis=0) + 1j * im.mean(axis=0)
    if x.size > 1:
        se_re, se_im = _jackknife_se(re), _jackknife_se(im)
    else:
        se_re = se_im = np.full(theta.shape, np.inf)
    return CFEstimate(theta, values, se_re, se_im)


FIT_GRID = np.geomspace(0.02, 20.0, 48)


def scale_fit(samples, alpha, band=(0.1, 0.9), return_points=False):
    """Scale estimate from ``-log|cf(theta)| = sigma**alpha * theta**alpha``.

    The theta grid is set relative to the sample median of ``|x|`` so the fit is
    scale-equivariant; only thetas with ``band[0] < |cf| < band[1]`` enter the
    least-squares slope.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 1000:
        raise ValueError("scale_fit needs at least 1000 samples")
    q = np.median(np.abs(x))
    if q == 0:
        raise FitUnstable("median |x| is 0; |cf| is 1 on every usable theta")
    theta = FIT_GRID / q
    mod = np.abs(np.mean(np.exp(1j * np.outer(x, theta)), axis=0))
    keep = (mod > band[0]) & (mod < band[1])
    if keep.sum() < 3:
        raise FitUnstable(f"only {keep.sum()} theta values have |cf| in {band}")
    u = theta[keep] ** alpha
    y = -np.log(mod[keep])
    slope = float(u @ y / (u @ u))
    sigma = slope ** (1.0 / alpha)
    if return_points:
        return sigma, theta[keep], mod[keep]
    return sigma


@dataclass
class LagReport:
    lag: tuple
    ks_statistic: float
    p_value: float
    cf_distance: float

    def to_dict(self):
        return {"lag": list(self.lag), "ks_statistic": self.ks_statistic,
                "p_value": self.p_value, "cf_distance": self.cf_distance}


CF_PAIR_GRID = [(a, b) for a in (-1.0, -0.5, 0.5, 1.0) for b in (-1.0, -0.5, 0.5, 1.0)]


def _joint_cf(x, y):
    return np.array([np.mean(np.exp(1j * (a * x + b * y))) for a, b in CF_PAIR_GRID])


def stationarity_test(source, lags, R=10_000, rng=None, step=None, truncation=200, d=None):
    """Per-lag two-sample KS of X_0 vs X_s and joint-CF distance of the pairs.

    ``step`` is the within-pair offset t in (X_0, X_t) vs (X_s, X_{s+t}); it
    defaults to the first unit vector.
    """
    rng = rng if rng is not None else np.random.default_rng()
    d = d or (source.d if isinstance(source, RosinskiTriplet) else 1)
    lags = [tuple(np.atleast_1d(s).astype(int).tolist()) for s in lags]
    step = tuple(np.atleast_1d(step).astype(int).tolist()) if step is not None else \
        tuple(int(i == 0) for i in range(d))
    pts = [(0,) * d, step]
    for s in lags:
        pts += [s, tuple(a + b for a, b in zip(s, step))]
    lo = tuple(min(p[i] for p in pts) for i in range(d))
    hi = tuple(max(p[i] for p in pts) for i in range(d))
    window = Window(lo, hi)
    values = _draw(source, window, rng, R, truncation)

    def at(t):
        return values[(slice(None),) + window.offset(t)]

    x0, xt = at(pts[0]), at(step)
    out = []
    for s in lags:
        xs = at(s)
        xst = at(tuple(a + b for a, b in zip(s, step)))
        ks = stats.ks_2samp(x0, xs)
        dist = float(np.max(np.abs(_joint_cf(x0, xt) - _joint_cf(xs, xst))))
        out.append(LagReport(s, float(ks.statistic), float(ks.pvalue), dist))
    return out


@dataclass
class MaximaGrowth:
    exponent: float
    ci: tuple
    n_grid: tuple
    medians: np.ndarray

    def to_dict(self):
        return {"exponent": self.exponent, "ci": list(self.ci), "n": list(self.n_grid),
                "median_max": self.medians.tolist()}


def maxima_growth(source, n_grid, R=50, rng=None, truncation=DEFAULT_TRUNCATION, d=None):
    """Log-log slope of the median of ``M_n = max_{|t| <= n} |X_t|`` against n."""
    n_grid = tuple(sorted(int(n) for n in n_grid))
    if n_grid[0] < 1 or n_grid[-1] < 10 * n_grid[0]:
        raise ValueError("n_grid must span at least one decade of positive n")
    rng = rng if rng is not None else np.random.default_rng()
    d = d or (source.d if isinstance(source, RosinskiTriplet) else 1)
    window = Window.cube(n_grid[-1], d)
    values = np.abs(_draw(source, window, rng, R, truncation))
    axes = tuple(range(1, values.ndim))
    medians = np.array([np.median(values[(slice(None),) + _cube_slices(window, n)].max(axis=axes))
                        for n in n_grid])
    if np.any(medians <= 0):
        raise DegenerateField("field maxima vanish; growth exponent undefined")
    fit = stats.linregress(np.log(n_grid), np.log(medians))
    if len(n_grid) > 2:
        half = stats.t.ppf(0.975, len(n_grid) - 2) * fit.stderr
    else:
        half = np.inf
    return MaximaGrowth(float(fit.slope), (float(fit.slope - half), float(fit.slope + half)),
                        n_grid, medians)


def realization_average(realization: FieldRealization, h="cos"):
    func, _ = resolve_h(h)
    return float(np.mean(func(realization.values)))
