"""Ergodic and Neveu decompositions, freeness, and the central factor ledger.

The ledger records, per ergodic component, the type of the crossed-product
factor ``L^inf(S_y, mu_y) x| Z^d``: a free ergodic measure-preserving
component is type II_1 when it carries an equivalent finite invariant
measure (positive) and type II_inf otherwise.  Components that are not free
are left ``Unclassified`` and taint the ledger.
"""

from dataclasses import dataclass, field
import enum
from fractions import Fraction
import itertools
import math
import warnings

import numpy as np

from . import markov
from .actions import (CheckReport, FiniteDiscrete, MarkovShift, MixedMovingAverage,
                      SubGaussianShift)
from .errors import IndeterminateLedger, ModelError


class FactorType(enum.Enum):
    II1 = "II1"
    II_INF = "IIInfinity"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class ErgodicComponent:
    label: object
    description: str
    mu_mass: float
    positive: bool
    free: bool
    atoms: tuple = ()
    stabilizer: tuple = None

    @property
    def finite_mass(self):
        return math.isfinite(self.mu_mass)


def _stabilizer_witness(fam, orbit):
    """Some t != e fixing a point of ``orbit``, or None."""
    s = orbit[0]
    for k, g in enumerate(fam.generators):
        # the cycle of s under generator k closes after finitely many steps
        n, cur = 1, int(g[s])
        while cur != s:
            cur = int(g[cur])
            n += 1
        t = tuple(n if i == k else 0 for i in range(fam.d))
        if fam.map(t)[s] == s:
            return t
    return None


def ergodic_decomposition(family):
    if isinstance(family, FiniteDiscrete):
        out = []
        for k, orbit in enumerate(family.orbits()):
            atoms = tuple(family.space.atoms[i] for i in orbit)
            witness = _stabilizer_witness(family, orbit)
            out.append(ErgodicComponent(
                label=f"orbit{k}", description=f"orbit {list(atoms)}",
                mu_mass=float(family.space.weights[list(orbit)].sum()),
                positive=True, free=witness is None, atoms=atoms, stabilizer=witness))
        return out
    if isinstance(family, MixedMovingAverage):
        return [ErgodicComponent(label=y, description=f"fibre {{{y}}} x Z^{family.d}",
                                 mu_mass=math.inf, positive=False, free=True)
                for y in family.y_space.atoms]
    if isinstance(family, MarkovShift):
        out = []
        for cls in family.classes:
            rec = markov.classify_recurrence(cls)
            measure = markov.invariant_measure(cls)
            free = cls.size >= 2
            if not free:
                warnings.warn(f"class {cls.index} is a single state: its constant path is fixed "
                              "by every shift, so the action is not free there", stacklevel=2)
            out.append(ErgodicComponent(
                label=cls.index, description=f"class {cls.index} ({rec.value})",
                mu_mass=measure.total_mass, positive=rec is markov.RecurrenceType.POSITIVE,
                free=free, atoms=cls.states or ()))
        return out
    if isinstance(family, SubGaussianShift):
        return [ErgodicComponent(label="sub_gaussian", description="iid coordinate shift",
                                 mu_mass=1.0, positive=True, free=True)]
    raise ModelError(f"cannot decompose {type(family).__name__}")


@dataclass(frozen=True)
class NeveuDecomposition:
    positive_labels: frozenset
    null_labels: frozenset

    def to_dict(self):
        return {"positive": sorted(map(str, self.positive_labels)),
                "null": sorted(map(str, self.null_labels))}


def neveu_decomposition(family, components=None):
    components = components if components is not None else ergodic_decomposition(family)
    return NeveuDecomposition(frozenset(c.label for c in components if c.positive),
                              frozenset(c.label for c in components if not c.positive))


def check_ergodically_free(family, components=None):
    components = components if components is not None else ergodic_decomposition(family)
    flags = {c.label: c.free for c in components}
    return flags, all(flags.values())


@dataclass(frozen=True)
class LedgerEntry:
    factor_type: FactorType
    free: bool
    positive: bool
    mu_mass: float


@dataclass
class CentralLedger:
    entries: dict = field(default_factory=dict)
    counting_measure: bool = True

    @property
    def tainted(self):
        return any(e.factor_type is FactorType.UNCLASSIFIED for e in self.entries.values())

    def signature(self):
        """Multiset of (factor type, finite mass) pairs, as a sorted list."""
        return sorted((e.factor_type.value, math.isfinite(e.mu_mass))
                      for e in self.entries.values())

    def to_dict(self):
        comps = [{"label": str(label), "factor_type": e.factor_type.value,
                  "positive": e.positive, "free": e.free,
                  "mass": e.mu_mass if math.isfinite(e.mu_mass) else "inf"}
                 for label, e in self.entries.items()]
        out = {"components": comps, "admits_no_II1": None, "admits_only_II1": None}
        if not self.tainted:
            out["admits_no_II1"] = admits_no_II1(self)
            out["admits_only_II1"] = admits_only_II1(self)
        return out


def central_ledger(family, components=None):
    components = components if components is not None else ergodic_decomposition(family)
    ledger = CentralLedger()
    for c in components:
        if not c.free:
            ftype = FactorType.UNCLASSIFIED
        elif c.positive:
            ftype = FactorType.II1
        else:
            ftype = FactorType.II_INF
        ledger.entries[c.label] = LedgerEntry(ftype, c.free, c.positive, c.mu_mass)
    return ledger


def _untainted(ledger):
    if ledger.tainted:
        bad = [k for k, e in ledger.entries.items() if e.factor_type is FactorType.UNCLASSIFIED]
        raise IndeterminateLedger(f"components {bad} are not free; factor types unknown")


def admits_no_II1(ledger):
    _untainted(ledger)
    return all(e.factor_type is not FactorType.II1 for e in ledger.entries.values())


def admits_only_II1(ledger):
    _untainted(ledger)
    return all(e.factor_type is FactorType.II1 for e in ledger.entries.values())


def all_subsets(n):
    return [np.array(bits, dtype=bool) for bits in itertools.product((False, True), repeat=n)]


def decomposition_consistency(family, test_sets=None):
    """Exact checks of the ergodic decomposition of a FiniteDiscrete family.

    Mass additivity over components, disjoint covering supports and, when the
    measure is invariant, invariance of every component measure.  Arithmetic
    is exact (weights converted to fractions).
    """
    if not isinstance(family, FiniteDiscrete):
        raise ModelError("decomposition_consistency needs a FiniteDiscrete family")
    n = len(family.space)
    w = [Fraction(float(x)) for x in family.space.weights]
    comps = family.orbits()
    if test_sets is None:
        test_sets = all_subsets(n)
    masks = []
    for B in test_sets:
        B = np.asarray(B)
        if B.dtype != bool:
            mask = np.zeros(n, dtype=bool)
            mask[[family.space.index(a) for a in B]] = True
            B = mask
        masks.append(B)
    rep = CheckReport("decomposition_consistency")

    seen = set()
    for orbit in comps:
        rep.checked += 1
        if seen & set(orbit):
            rep.violations.append(f"orbit {orbit} overlaps another component")
        seen |= set(orbit)
    rep.checked += 1
    if seen != set(range(n)):
        rep.violations.append("components do not cover the atoms")

    def mass(idx):
        return sum((w[i] for i in idx), Fraction(0))

    for B in masks:
        rep.checked += 1
        whole = mass(np.flatnonzero(B))
        parts = sum((mass([i for i in orbit if B[i]]) for orbit in comps), Fraction(0))
        if whole != parts:
            rep.violations.append(f"mass of {np.flatnonzero(B).tolist()}: {whole} != {parts}")

    invariant = all(all(w[int(g[i])] == w[i] for i in range(n)) for g in family.generators)
    if invariant:
        steps = []
        for k in range(family.d):
            unit = tuple(int(i == k) for i in range(family.d))
            steps += [unit, tuple(-x for x in unit)]
        for orbit in comps:
            inside = set(orbit)
            for t in steps:
                image = family.map(t)
                for B in masks:
                    rep.checked += 1
                    # mu_y(phi_t(B)) == mu_y(B)
                    moved = {int(image[i]) for i in np.flatnonzero(B)}
                    if mass(inside & moved) != mass(inside & set(np.flatnonzero(B).tolist())):
                        rep.violations.append(f"component {orbit} not invariant under {t}")
                        break
    return rep
