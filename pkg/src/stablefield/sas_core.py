"""Symmetric alpha-stable sampling, L^alpha arithmetic and stochastic integrals.

A symmetric alpha-stable (SaS) variable with scale ``sigma`` has characteristic
function ``exp(-sigma**alpha * |theta|**alpha)``.  On a finite weighted space
the integral ``X_t = int f_t dM`` against an SaS random measure with control
measure ``mu`` is exact:

    X_t = sum_s f_t(s) * mu(s)**(1/alpha) * Z_s,    Z_s iid standard SaS.

On non-atomic components (Markov path spaces) the integral is realised with a
truncated LePage series instead.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import itertools
import math

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class StableParams:
    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        check_alpha(self.alpha)
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be finite and >= 0, got {self.scale}")


def check_alpha(alpha):
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in the open interval (0, 2), got {alpha}")
    return float(alpha)


@dataclass(frozen=True)
class FiniteWeightedSpace:
    """Finitely many labelled atoms, each carrying a positive mass."""

    atoms: tuple
    weights: np.ndarray = field(repr=False)

    def __init__(self, atoms, weights):
        atoms = tuple(atoms)
        weights = np.asarray(weights, dtype=float).copy()
        if weights.ndim != 1 or len(weights) != len(atoms):
            raise ValueError("need exactly one weight per atom")
        if len(set(atoms)) != len(atoms):
            raise ValueError("atom labels must be distinct")
        if len(atoms) == 0:
            raise ValueError("space must have at least one atom")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("weights must be finite and strictly positive")
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.atoms)

    def __eq__(self, other):
        return (isinstance(other, FiniteWeightedSpace) and self.atoms == other.atoms
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.atoms, self.weights.tobytes()))

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def index(self, atom):
        return self.atoms.index(atom)


@dataclass(frozen=True)
class Window:
    """Closed hyperrectangle ``lo <= t <= hi`` (componentwise) of Z^d."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("window corners must have the same positive dimension")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError(f"window {lo}..{hi} has zero volume")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, n, d=1):
        return cls((-n,) * d, (n,) * d)

    @property
    def d(self):
        return len(self.lo)

    @property
    def shape(self):
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def volume(self):
        return math.prod(self.shape)

    def points(self):
        """Lattice points in row-major order."""
        return list(itertools.product(*(range(l, h + 1) for l, h in zip(self.lo, self.hi))))

    def contains(self, t):
        return all(l <= x <= h for x, l, h in zip(t, self.lo, self.hi))

    def offset(self, t):
        return tuple(x - l for x, l in zip(t, self.lo))


@dataclass
class FieldRealization:
    window: Window
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.window.shape:
            raise ValueError(f"values shape {self.values.shape} != window shape {self.window.shape}")

    @property
    def d(self):
        return self.window.d

    def __getitem__(self, t):
        return self.values[self.window.offset(t)]


@dataclass(frozen=True)
class LePageConfig:
    truncation: int = 10_000
    total_mass: float = 1.0

    def __post_init__(self):
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise ValueError("truncation J must be a positive integer")
        if not (0 < self.total_mass < math.inf):
            raise ValueError("total_mass must be finite and positive")


# -- sampling -----------------------------------------------------------------

def sample_sas(params, rng, size=None):
    """Chambers-Mallows-Stuck draw(s) from SaS(alpha, scale)."""
    alpha = params.alpha
    if params.scale == 0:
        return 0.0 if size is None else np.zeros(size)
    v = rng.uniform(-np.pi / 2, np.pi / 2, size=size)
    w = rng.standard_exponential(size=size)
    if alpha == 1.0:
        x = np.tan(v)
    else:
        x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
             * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
    x = params.scale * x
    return float(x) if size is None else x


def standard_sas(alpha, rng, size=None):
    return sample_sas(StableParams(alpha, 1.0), rng, size)


def sas_cf(theta, alpha, scale=1.0):
    return np.exp(-(scale ** alpha) * np.abs(theta) ** alpha)


def sample_positive_stable(index, rng, size=None):
    """Totally skewed positive stable law with Laplace transform exp(-lam**index).

    Kanter's representation; ``index`` must lie in (0, 1).
    """
    if not 0 < index < 1:
        raise ValueError("positive stable index must lie in (0, 1)")
    v = rng.uniform(0.0, np.pi, size=size)
    w = rng.standard_exponential(size=size)
    a = (np.sin(index * v) / np.sin(v) ** (1.0 / index)
         * (np.sin((1.0 - index) * v) / w) ** ((1.0 - index) / index))
    return a


def sample_frechet(alpha, rng, size=None):
    """Standard alpha-Frechet draws, P(W <= x) = exp(-x**-alpha)."""
    check_alpha(alpha)
    return rng.standard_exponential(size=size) ** (-1.0 / alpha)


# -- L^alpha arithmetic -------------------------------------------------------

def _weights_of(space):
    return space.weights if isinstance(space, FiniteWeightedSpace) else np.asarray(space, float)


def lp_quasi_norm(f, space, alpha):
    """``(sum_s |f(s)|**alpha * mu(s)) ** (1/alpha)``."""
    w = _weights_of(space)
    f = np.asarray(f, dtype=float)
    if f.shape != w.shape:
        raise ValueError(f"function has {f.shape} entries, space has {w.shape}")
    return float(np.sum(np.abs(f) ** alpha * w) ** (1.0 / alpha))


def combination_scale(spectral, space, alpha):
    """Scale of ``sum_i c_i X_{t_i}`` given pairs ``(c_i, f_{t_i})``."""
    spectral = list(spectral)
    if not spectral:
        raise ValueError("need at least one (coefficient, function) pair")
    total = np.zeros(len(_weights_of(space)))
    for c, f in spectral:
        f = np.asarray(f, dtype=float)
        if f.shape != total.shape:
            raise ValueError("all functions must live on the same space")
        total = total + c * f
    return lp_quasi_norm(total, space, alpha)


# -- integrals on finite spaces -----------------------------------------------

def _spectral_matrix(spectral_family, window, n_atoms):
    if callable(spectral_family):
        rows = [spectral_family(t) for t in window.points()]
    else:
        rows = [spectral_family[t] for t in window.points()]
    mat = np.asarray(rows, dtype=float).reshape(window.volume, -1)
    if mat.shape[1] != n_atoms:
        raise ValueError(f"spectral functions have {mat.shape[1]} entries, space has {n_atoms}")
    return mat


def sample_discrete_integral(matrix, space, alpha, rng, size=None):
    """Joint draws of ``X = matrix @ (mu**(1/alpha) * Z)``; rows index t.

    Returns shape ``(size, n_rows)`` (or ``(n_rows,)`` when ``size`` is None).
    """
    matrix = np.asarray(matrix, dtype=float)
    w = _weights_of(space)
    z = standard_sas(alpha, rng, size=(1 if size is None else size, len(w)))
    x = (z * w ** (1.0 / alpha)) @ matrix.T
    return x[0] if size is None else x


def simulate_discrete_integral(spectral_family, space, alpha, window, rng, meta=None):
    """One realization of ``X_t = int f_t dM`` over ``window``, exact on finite spaces.

    ``spectral_family`` maps a lattice point ``t`` to the array ``f_t`` (a callable
    or a mapping).  A single draw ``Z_s`` per atom is shared by every ``t``.
    """
    check_alpha(alpha)
    mat = _spectral_matrix(spectral_family, window, len(_weights_of(space)))
    values = sample_discrete_integral(mat, space, alpha, rng).reshape(window.shape)
    info = {"method": "discrete", "truncation": None}
    info.update(meta or {})
    return FieldRealization(window, values, info)


def simulate_frechet_extremal(spectral_family, space, alpha, window, rng, meta=None):
    """Extremal integral ``X_t = max_s f_t(s) mu(s)**(1/alpha) W_s`` with Frechet ``W``."""
    check_alpha(alpha)
    w = _weights_of(space)
    mat = _spectral_matrix(spectral_family, window, len(w))
    if np.any(mat < 0):
        raise ValueError("extremal integrals need nonnegative spectral functions")
    frechet = sample_frechet(alpha, rng, size=len(w))
    values = np.max(mat * (w ** (1.0 / alpha) * frechet), axis=1).reshape(window.shape)
    info = {"method": "frechet-extremal", "truncation": None}
    info.update(meta or {})
    return FieldRealization(window, values, info)


# -- LePage series ------------------------------------------------------------

@lru_cache(maxsize=None)
def stable_series_constant(alpha):
    """``K_alpha = 1 / int_0^inf x**-alpha sin(x) dx`` by quadrature."""
    check_alpha(alpha)
    # near zero: x**(1-alpha) * sin(x)/x, handled by the algebraic weight
    head, _ = integrate.quad(lambda x: np.sinc(x / np.pi), 0.0, 1.0,
                             weight="alg", wvar=(1.0 - alpha, 0.0), epsrel=1e-10)
    tail, _ = integrate.quad(lambda x: x ** -alpha, 1.0, np.inf, weight="sin", wvar=1.0,
                             epsrel=1e-10, limlst=200)
    return 1.0 / (head + tail)


def lepage_coefficients(alpha, cfg, rng, size):
    """``(size, J)`` array of ``eps_j * Gamma_j**(-1/alpha)`` and the last arrivals."""
    gammas = np.cumsum(rng.standard_exponential(size=(size, cfg.truncation)), axis=1)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(size, cfg.truncation))
    return signs * gammas ** (-1.0 / alpha), gammas[:, -1]


def sample_lepage_integral(component_sampler, f_evaluator, alpha, cfg, points, rng, size=1):
    """Batched LePage series; returns ``(size, len(points))`` and the tail estimates.

    ``component_sampler(rng, n)`` returns a batch of ``n`` points drawn from the
    normalised component measure; ``f_evaluator(t, batch)`` returns one value per
    point of the batch.
    """
    check_alpha(alpha)
    norm = (stable_series_constant(alpha) * cfg.total_mass) ** (1.0 / alpha)
    out = np.empty((size, len(points)))
    last = np.empty(size)
    # bound memory to ~_CHUNK series terms at a time
    step = max(1, _CHUNK // cfg.truncation)
    for lo in range(0, size, step):
        n = min(step, size - lo)
        coeff, last[lo:lo + n] = lepage_coefficients(alpha, cfg, rng, n)
        batch = component_sampler(rng, n * cfg.truncation)
        for k, t in enumerate(points):
            ft = np.asarray(f_evaluator(t, batch), dtype=float).reshape(n, cfg.truncation)
            out[lo:lo + n, k] = norm * np.sum(coeff * ft, axis=1)
    tail = cfg.total_mass ** (1.0 / alpha) * last ** (-1.0 / alpha)
    return out, tail


_CHUNK = 2_000_000


def simulate_lepage_integral(component_sampler, f_evaluator, alpha, cfg, window, rng, meta=None):
    """One realization of a truncated LePage series over ``window``."""
    values, tail = sample_lepage_integral(component_sampler, f_evaluator, alpha, cfg,
                                          window.points(), rng, size=1)
    info = {"method": "lepage", "truncation": cfg.truncation,
            "total_mass": cfg.total_mass, "tail_estimate": float(tail[0])}
    info.update(meta or {})
    return FieldRealization(window, values[0].reshape(window.shape), info)
