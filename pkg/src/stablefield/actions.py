"""Nonsingular Z^d actions, +/-1 cocycles and Rosinski triplets.

Four action families are representable:

* :class:`FiniteDiscrete` -- commuting permutations of a finite weighted space,
* :class:`MixedMovingAverage` -- translation of the lattice coordinate on Y x Z^d,
* :class:`MarkovShift` -- the left shift on two-sided paths of a recurrent chain,
* :class:`SubGaussianShift` -- the coordinate shift on R^(Z^d) under an iid law.

Group elements are integer d-tuples.  The action obeys ``phi_{u+v} = phi_v o phi_u``
and the spectral functions of a triplet are

    f_t(s) = c_t(s) * (d(mu o phi_t)/dmu (s))**(1/alpha) * f(phi_t(s)).
"""

from dataclasses import dataclass, field
from functools import lru_cache
import itertools
import math

import numpy as np

from .errors import DomainError, FullSupportError, ModelError
from .sas_core import FiniteWeightedSpace, check_alpha, lp_quasi_norm
from . import markov

RTOL = 1e-12


def as_element(t, d):
    if isinstance(t, (int, np.integer)):
        t = (int(t),)
    t = tuple(int(x) for x in t)
    if len(t) != d:
        raise ValueError(f"group element {t} does not have dimension {d}")
    return t


def identity(d):
    return (0,) * d


def add(u, v):
    return tuple(a + b for a, b in zip(u, v))


def lattice_ball(d, r):
    """All t in Z^d with sup-norm at most r."""
    return list(itertools.product(range(-r, r + 1), repeat=d))


# -- points on path spaces ------------------------------------------------------

@dataclass(frozen=True)
class PathSegment:
    """A finite window ``lo .. lo + shape - 1`` of a configuration in C^(Z^d).

    ``label`` carries the ergodic-component tag (the communication class for
    Markov paths); ``None`` elsewhere.
    """

    lo: tuple
    values: np.ndarray = field(compare=False)
    label: object = None

    def __post_init__(self):
        values = np.array(self.values)
        values.flags.writeable = False
        lo = tuple(int(x) for x in np.atleast_1d(self.lo))
        if len(lo) != values.ndim:
            raise ValueError("segment corner and value array disagree on dimension")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lo", lo)

    @property
    def hi(self):
        return tuple(l + n - 1 for l, n in zip(self.lo, self.values.shape))

    def covers(self, u):
        return all(l <= x <= h for x, l, h in zip(u, self.lo, self.hi))

    def at(self, u):
        u = as_element(u, len(self.lo))
        if not self.covers(u):
            raise DomainError(f"coordinate {u} outside recorded window {self.lo}..{self.hi}")
        return self.values[tuple(x - l for x, l in zip(u, self.lo))]

    def shifted(self, t):
        # phi_t(x)(u) = x(u + t): the same values, re-indexed
        seg = PathSegment(tuple(l - s for l, s in zip(self.lo, t)), self.values, self.label)
        if not seg.covers(identity(len(t))):
            raise DomainError(f"shift by {t} leaves no recorded origin in {self.lo}..{self.hi}")
        return seg

    def same_as(self, other):
        return (self.lo == other.lo and self.label == other.label
                and np.array_equal(self.values, other.values))


# -- action families -------------------------------------------------------------

class ActionFamily:
    kind = "abstract"
    d = 1
    measure_preserving = True

    def act(self, t, point):
        raise NotImplementedError

    def rn(self, t, point):
        self.act(t, point)
        return 1.0

    def same_point(self, a, b):
        return a == b


def _perm_power(perm, n):
    out = np.arange(len(perm))
    base = perm if n >= 0 else np.argsort(perm)
    for _ in range(abs(n)):
        out = base[out]
    return out


class FiniteDiscrete(ActionFamily):
    """Z^d acting on a finite weighted space through d commuting permutations.

    ``generators[k]`` gives the image of every atom under the k-th basis vector,
    either as atom labels or as integer indices.
    """

    kind = "finite_discrete"

    def __init__(self, space, generators, check=True):
        if not isinstance(space, FiniteWeightedSpace):
            raise TypeError("FiniteDiscrete needs a FiniteWeightedSpace")
        self.space = space
        self.d = len(generators)
        if self.d < 1:
            raise ModelError("need at least one generator")
        gens = []
        for g in generators:
            g = [space.index(a) if a in space.atoms and not isinstance(a, (int, np.integer))
                 else int(a) for a in g]
            gens.append(np.asarray(g, dtype=int))
        self.generators = tuple(gens)
        self.overrides = {}
        if check:
            self._check()
        w = space.weights
        self.measure_preserving = all(np.allclose(w[g], w, rtol=RTOL, atol=0) for g in gens)

    def _check(self):
        n = len(self.space)
        for k, g in enumerate(self.generators):
            if g.shape != (n,) or sorted(g.tolist()) != list(range(n)):
                raise ModelError(f"generator {k} is not a permutation of the {n} atoms")
        for j, k in itertools.combinations(range(self.d), 2):
            a, b = self.generators[j], self.generators[k]
            if not np.array_equal(a[b], b[a]):
                raise ModelError(f"generators {j} and {k} do not commute")

    @property
    def weights(self):
        return self.space.weights

    @lru_cache(maxsize=4096)
    def map(self, t):
        """Index array of phi_t."""
        t = as_element(t, self.d)
        if t in self.overrides:
            return self.overrides[t]
        out = np.arange(len(self.space))
        for k, n in enumerate(t):
            # phi_{u+v} = phi_v o phi_u; generators commute, so order is immaterial
            out = _perm_power(self.generators[k], n)[out]
        return out

    def act(self, t, point):
        i = self.space.index(point)
        return self.space.atoms[self.map(tuple(as_element(t, self.d)))[i]]

    def rn_table(self, t):
        w = self.space.weights
        return w[self.map(as_element(t, self.d))] / w

    def rn(self, t, point):
        return float(self.rn_table(t)[self.space.index(point)])

    def orbits(self):
        """Orbits as sorted tuples of atom indices, ordered by smallest member."""
        n = len(self.space)
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for g in self.generators:
            for i in range(n):
                a, b = find(i), find(int(g[i]))
                if a != b:
                    parent[max(a, b)] = min(a, b)
        groups = {}
        for i in range(n):
            groups.setdefault(find(i), []).append(i)
        return sorted((tuple(v) for v in groups.values()), key=lambda o: o[0])

    def corrupted(self, t, images):
        """Copy whose table at ``t`` is replaced (negative-control fixtures)."""
        bad = FiniteDiscrete(self.space, self.generators, check=False)
        bad.overrides = dict(self.overrides)
        bad.overrides[as_element(t, self.d)] = np.asarray(images, dtype=int)
        return bad


class MixedMovingAverage(ActionFamily):
    """Translation ``phi_t(y, z) = (y, z + t)`` on Y x Z^d, counting measure on Z^d."""

    kind = "mixed_moving_average"

    def __init__(self, y_space, d, radius):
        if not isinstance(y_space, FiniteWeightedSpace):
            raise TypeError("Y must be a FiniteWeightedSpace")
        if d < 1 or radius < 0:
            raise ModelError("need d >= 1 and radius >= 0")
        self.y_space = y_space
        self.d = int(d)
        self.radius = int(radius)

    def _check_point(self, point):
        y, z = point
        if y not in self.y_space.atoms:
            raise DomainError(f"{y!r} is not an atom of Y")
        return y, as_element(z, self.d)

    def act(self, t, point):
        y, z = self._check_point(point)
        return (y, add(z, as_element(t, self.d)))


class MarkovShift(ActionFamily):
    """Left shift on two-sided paths, one invariant piece per communication class."""

    kind = "markov_shift"
    d = 1

    def __init__(self, chain, anchors=None):
        self.chain = chain
        self.classes = markov.communication_classes(chain, anchors=anchors)

    def act(self, t, point):
        if not isinstance(point, PathSegment):
            raise DomainError("Markov shift points are PathSegment windows")
        return point.shifted(as_element(t, 1))

    def same_point(self, a, b):
        return a.same_as(b)


class SubGaussianShift(ActionFamily):
    """Coordinate shift on R^(Z^d) under an iid Gaussian coordinate law."""

    kind = "sub_gaussian"

    def __init__(self, d=1, coordinate_sd=1.0, base_law="gaussian"):
        if base_law != "gaussian":
            raise ModelError(f"base law {base_law!r} not supported; only atomless gaussian")
        if not coordinate_sd > 0:
            raise ModelError("coordinate_sd must be positive (a point mass is not atomless)")
        self.d = int(d)
        self.coordinate_sd = float(coordinate_sd)
        self.base_law = base_law

    def act(self, t, point):
        if not isinstance(point, PathSegment):
            raise DomainError("sub-Gaussian points are PathSegment windows")
        return point.shifted(as_element(t, self.d))

    def same_point(self, a, b):
        return a.same_as(b)


def apply_action(family, t, point):
    return family.act(as_element(t, family.d), point)


def rn_derivative(family, t, point):
    """Radon-Nikodym derivative d(mu o phi_t)/dmu at ``point``."""
    return family.rn(as_element(t, family.d), point)


# -- cocycles -----------------------------------------------------------------------

class TrivialCocycle:
    def value(self, t, point=None):
        return 1.0

    def table(self, family, t):
        return np.ones(len(family.space))


TRIVIAL = TrivialCocycle()


class FiniteCocycle:
    """+/-1 cocycle on a FiniteDiscrete family, generated from one sign table per generator.

    ``c_{t + e_k}(s) = c_t(s) * c_{e_k}(phi_t(s))`` extends the generator tables
    to all of Z^d.
    """

    def __init__(self, family, generator_signs, check=True):
        if not isinstance(family, FiniteDiscrete):
            raise ModelError("table cocycles need a FiniteDiscrete family")
        signs = np.asarray(generator_signs, dtype=float)
        if signs.shape != (family.d, len(family.space)):
            raise ModelError(f"need {family.d} sign tables of length {len(family.space)}")
        if not np.all(np.abs(signs) == 1):
            raise ModelError("cocycle values must be +1 or -1")
        self.family = family
        self.signs = signs
        self.overrides = {}
        if check:
            for j, k in itertools.combinations(range(family.d), 2):
                gj, gk = family.generators[j], family.generators[k]
                if not np.array_equal(signs[j] * signs[k][gj], signs[k] * signs[j][gk]):
                    raise ModelError(f"sign tables {j} and {k} violate the cocycle identity")

    @lru_cache(maxsize=4096)
    def _table(self, t):
        if t in self.overrides:
            return self.overrides[t]
        fam = self.family
        out = np.ones(len(fam.space))
        pos = identity(fam.d)
        for k, n in enumerate(t):
            step = tuple(int(i == k) for i in range(fam.d))
            for _ in range(abs(n)):
                if n > 0:
                    out = out * self.signs[k][fam.map(pos)]
                    pos = add(pos, step)
                else:
                    pos = tuple(p - s for p, s in zip(pos, step))
                    # c_{-e}(s') = c_e(phi_{-e}(s')); chain through the current position
                    out = out * self.signs[k][fam.map(pos)]
        return out

    def table(self, family, t):
        return self._table(as_element(t, self.family.d))

    def value(self, t, point):
        return float(self.table(self.family, t)[self.family.space.index(point)])

    def corrupted(self, t, signs):
        bad = FiniteCocycle(self.family, self.signs, check=False)
        bad.overrides = dict(self.overrides)
        bad.overrides[as_element(t, self.family.d)] = np.asarray(signs, dtype=float)
        return bad


# -- triplets -------------------------------------------------------------------------

class RosinskiTriplet:
    """(kernel f, action, cocycle) at stability index ``alpha``.

    Kernel layout per family: FiniteDiscrete -- one value per atom;
    MixedMovingAverage -- array ``(|Y|, 2R+1, ..., 2R+1)`` holding ``f(y, z)`` for
    ``|z| <= R``; MarkovShift -- a :class:`markov.MarkovFieldKernel`;
    SubGaussianShift -- ``None`` (the coordinate projection ``x -> x(0)``).
    """

    def __init__(self, family, kernel, alpha, cocycle=TRIVIAL, check=True):
        self.family = family
        self.alpha = check_alpha(alpha)
        self.cocycle = cocycle
        if isinstance(family, FiniteDiscrete):
            kernel = np.asarray(kernel, dtype=float)
            if kernel.shape != (len(family.space),):
                raise ModelError("FiniteDiscrete kernel needs one value per atom")
        elif isinstance(family, MixedMovingAverage):
            kernel = np.asarray(kernel, dtype=float)
            want = (len(family.y_space),) + (2 * family.radius + 1,) * family.d
            if kernel.shape != want:
                raise ModelError(f"MMA kernel must have shape {want}, got {kernel.shape}")
        elif isinstance(family, MarkovShift):
            if kernel is None:
                kernel = markov.markov_field_kernel(family.classes, self.alpha)
        elif isinstance(family, SubGaussianShift):
            kernel = None
        else:
            raise ModelError(f"unsupported action family {type(family).__name__}")
        if not isinstance(cocycle, TrivialCocycle) and not isinstance(family, FiniteDiscrete):
            raise ModelError("non-trivial cocycles are only supported on FiniteDiscrete families")
        self.kernel = kernel
        if check:
            self._check_support()

    def _check_support(self):
        fam = self.family
        if isinstance(fam, FiniteDiscrete):
            if lp_quasi_norm(self.kernel, fam.space, self.alpha) == 0:
                raise FullSupportError("kernel has zero L^alpha norm")
            if not check_full_support(self):
                raise FullSupportError("some orbit never meets the kernel support")
        elif isinstance(fam, MixedMovingAverage):
            rows = np.abs(self.kernel).reshape(len(fam.y_space), -1).sum(axis=1)
            if np.any(rows == 0):
                bad = [fam.y_space.atoms[i] for i in np.flatnonzero(rows == 0)]
                raise FullSupportError(f"kernel vanishes on the fibres of {bad}")

    @property
    def d(self):
        return self.family.d

    def f(self, point):
        fam = self.family
        if isinstance(fam, FiniteDiscrete):
            return float(self.kernel[fam.space.index(point)])
        if isinstance(fam, MixedMovingAverage):
            y, z = fam._check_point(point)
            if max(abs(x) for x in z) > fam.radius:
                return 0.0
            idx = (fam.y_space.index(y),) + tuple(x + fam.radius for x in z)
            return float(self.kernel[idx])
        if isinstance(fam, MarkovShift):
            return self.kernel(point)
        return float(point.at(identity(fam.d)))

    def spectral_table(self, t):
        """``f_t`` on every atom (FiniteDiscrete only)."""
        fam = self.family
        t = as_element(t, fam.d)
        return (self.cocycle.table(fam, t) * fam.rn_table(t) ** (1.0 / self.alpha)
                * self.kernel[fam.map(t)])


def rosinski_spectral(triplet, t, point):
    fam = triplet.family
    t = as_element(t, fam.d)
    image = fam.act(t, point)
    return (triplet.cocycle.value(t, point) * fam.rn(t, point) ** (1.0 / triplet.alpha)
            * triplet.f(image))


# -- structural checks ---------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    checked: int = 0
    skipped: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        return {"name": self.name, "ok": self.ok, "checked": self.checked,
                "skipped": self.skipped, "violations": [str(v) for v in self.violations[:20]],
                "n_violations": len(self.violations)}


def verify_action_axioms(family, sample_points, sample_ts):
    rep = CheckReport("action_axioms")
    ts = [as_element(t, family.d) for t in sample_ts]
    e = identity(family.d)
    for s in sample_points:
        rep.checked += 1
        if not family.same_point(family.act(e, s), s):
            rep.violations.append(f"phi_e({s!r}) != {s!r}")
        for u in ts:
            for v in ts:
                rep.checked += 1
                try:
                    lhs = family.act(add(u, v), s)
                    rhs = family.act(v, family.act(u, s))
                except DomainError:
                    rep.skipped += 1
                    continue
                if not family.same_point(lhs, rhs):
                    rep.violations.append(f"phi_{add(u, v)}({s!r}) != phi_{v}(phi_{u}({s!r}))")
    return rep


def verify_cocycle(cocycle, family, sample_points, sample_ts):
    rep = CheckReport("cocycle_identity")
    ts = [as_element(t, family.d) for t in sample_ts]
    for s in sample_points:
        for u in ts:
            for v in ts:
                rep.checked += 1
                try:
                    lhs = cocycle.value(add(u, v), s)
                    rhs = cocycle.value(u, s) * cocycle.value(v, family.act(u, s))
                except DomainError:
                    rep.skipped += 1
                    continue
                if lhs != rhs:
                    rep.violations.append(f"c_{add(u, v)}({s!r}) = {lhs} != {rhs}")
    return rep


def verify_rn_chain_rule(family, sample_points, sample_ts, rtol=RTOL):
    rep = CheckReport("rn_chain_rule")
    ts = [as_element(t, family.d) for t in sample_ts]
    for s in sample_points:
        for u in ts:
            for v in ts:
                rep.checked += 1
                try:
                    lhs = family.rn(add(u, v), s)
                    rhs = family.rn(u, s) * family.rn(v, family.act(u, s))
                except DomainError:
                    rep.skipped += 1
                    continue
                if not math.isclose(lhs, rhs, rel_tol=rtol, abs_tol=0.0):
                    rep.violations.append(f"RN at {s!r}, u={u}, v={v}: {lhs} != {rhs}")
    return rep


def _require_finite(triplet):
    if not isinstance(triplet.family, FiniteDiscrete):
        raise ModelError("this check needs a FiniteDiscrete family")
    return triplet.family


def check_full_support(triplet):
    """Every atom lies in the support of some ``f o phi_t`` (orbit sweep)."""
    fam = _require_finite(triplet)
    support = np.asarray(triplet.kernel) != 0
    return all(bool(support[list(orbit)].any()) for orbit in fam.orbits())


def distinct_spectra(triplet):
    """Spectral functions ``f_t`` for one ``t`` per distinct pair (phi_t, c_t).

    t -> (phi_t, c_t) is a homomorphism into a finite group, so a breadth-first
    sweep from ``e`` along the generators closes up.
    """
    fam = _require_finite(triplet)
    steps = []
    for k in range(fam.d):
        unit = tuple(int(i == k) for i in range(fam.d))
        steps += [unit, tuple(-x for x in unit)]
    e = identity(fam.d)

    def key(t):
        return fam.map(t).tobytes() + triplet.cocycle.table(fam, t).tobytes()

    seen = {key(e): e}
    frontier = [e]
    while frontier:
        nxt = []
        for t in frontier:
            for s in steps:
                u = add(t, s)
                k = key(u)
                if k not in seen:
                    seen[k] = u
                    nxt.append(u)
        frontier = nxt
    ts = sorted(seen.values(), key=lambda t: (sum(map(abs, t)), t))
    return ts, np.array([triplet.spectral_table(t) for t in ts])


def ratio(num, den):
    """Extended-real ``num / den``: +inf when den == 0 <= num, -inf when den == 0 > num."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.where(num >= 0, np.inf, -np.inf)
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    return out


def check_minimal_finite(triplet):
    """Do the ratios ``f_t / f_u`` separate every pair of atoms?"""
    fam = _require_finite(triplet)
    if not check_full_support(triplet):
        raise FullSupportError("minimality check needs full support")
    n = len(fam.space)
    if n == 1:
        return True
    _, spectra = distinct_spectra(triplet)
    ratios = np.array([ratio(a, b) for a in spectra for b in spectra])
    for i, j in itertools.combinations(range(n), 2):
        same = np.isclose(ratios[:, i], ratios[:, j], rtol=RTOL, atol=0.0)
        if same.all():
            return False
    return True


def transport_triplet(triplet, h, b, target_weights, target_atoms=None):
    """Move a FiniteDiscrete triplet along an atom bijection ``h`` with signs ``b``.

    ``h[i]`` is the target index of source atom ``i``; ``b`` and
    ``target_weights`` are indexed by target atoms.  The new kernel is
    ``b * (d(mu1 o h^-1)/dmu2)**(1/alpha) * f o h^-1``, the action is conjugated
    by ``h`` and the cocycle becomes ``c_t o h^-1 * b * b o phi2_t``.
    """
    fam = _require_finite(triplet)
    n = len(fam.space)
    h = np.asarray(h, dtype=int)
    if h.shape != (n,) or sorted(h.tolist()) != list(range(n)):
        raise ModelError("h must be a bijection of the atoms")
    b = np.asarray(b, dtype=float)
    if b.shape != (n,) or not np.all(np.abs(b) == 1):
        raise ModelError("b must be a +/-1 value per target atom")
    w2 = np.asarray(target_weights, dtype=float)
    if w2.shape != (n,) or np.any(w2 <= 0) or not np.all(np.isfinite(w2)):
        raise ModelError("target weights must be positive on every atom (mu1 o h^-1 ~ mu2)")
    hinv = np.argsort(h)
    atoms = tuple(target_atoms) if target_atoms is not None else fam.space.atoms
    space2 = FiniteWeightedSpace(atoms, w2)
    gens2 = [h[g[hinv]] for g in fam.generators]
    fam2 = FiniteDiscrete(space2, gens2)
    density = fam.space.weights[hinv] / w2
    f2 = b * density ** (1.0 / triplet.alpha) * np.asarray(triplet.kernel)[hinv]
    signs2 = []
    for k in range(fam.d):
        unit = tuple(int(i == k) for i in range(fam.d))
        c1 = triplet.cocycle.table(fam, unit)
        signs2.append(c1[hinv] * b * b[gens2[k]])
    signs2 = np.array(signs2)
    cocycle2 = TRIVIAL if np.all(signs2 == 1) else FiniteCocycle(fam2, signs2)
    return RosinskiTriplet(fam2, f2, triplet.alpha, cocycle2)
