"""Markov chains behind the shift-action stable processes.

Supported transition specs: finite matrices, birth-death chains on {0, 1, ...}
with constant rates beyond a finite prefix, simple random walks on Z, and
disjoint unions of these.  Every communication class must be closed and the
stationary process needs recurrence; recurrence of the infinite variants is
decided from the rates in closed form.
"""

from dataclasses import dataclass
import enum
import math
import warnings

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ModelError, TransientClassError

TRUNCATION_RADIUS = 50
ROW_TOL = 1e-12


class TransitionSpec:
    pass


@dataclass(frozen=True, eq=False)
class FiniteMatrix(TransitionSpec):
    states: tuple
    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        states = tuple(self.states)
        n = len(states)
        if P.shape != (n, n) or n == 0:
            raise ModelError(f"transition matrix must be {n}x{n}")
        if len(set(states)) != n:
            raise ModelError("state labels must be distinct")
        if np.any(P < 0) or np.any(P > 1):
            raise ModelError("transition probabilities must lie in [0, 1]")
        if np.any(np.abs(P.sum(axis=1) - 1) > ROW_TOL):
            raise ModelError("transition matrix rows must sum to 1")
        P.flags.writeable = False
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "states", states)


@dataclass(frozen=True)
class BirthDeath(TransitionSpec):
    """Birth-death chain on {0, 1, 2, ...}.

    ``birth[k]``/``death[k]`` are the up/down probabilities at state k for the
    listed prefix; from state ``len(birth)`` on they equal ``tail_birth`` and
    ``tail_death``.  ``death[0]`` must be 0.
    """

    birth: tuple
    death: tuple
    tail_birth: float
    tail_death: float

    def __post_init__(self):
        b = tuple(float(x) for x in self.birth)
        q = tuple(float(x) for x in self.death)
        object.__setattr__(self, "birth", b)
        object.__setattr__(self, "death", q)
        if len(b) != len(q):
            raise ModelError("birth and death prefixes must have equal length")
        if q and q[0] != 0:
            raise ModelError("death probability at state 0 must be 0")
        for k, (pk, qk) in enumerate(zip(b, q)):
            if pk <= 0 or (k > 0 and qk <= 0) or pk + qk > 1 + ROW_TOL:
                raise ModelError(f"invalid rates at state {k}: birth={pk}, death={qk}")
        if not (self.tail_birth > 0 and self.tail_death > 0
                and self.tail_birth + self.tail_death <= 1 + ROW_TOL):
            raise ModelError("tail rates must be positive with sum at most 1")

    def up(self, k):
        k = np.asarray(k)
        prefix = np.asarray(self.birth + (self.tail_birth,))
        return prefix[np.minimum(k, len(self.birth))]

    def down(self, k):
        k = np.asarray(k)
        prefix = np.asarray(self.death + (self.tail_death,))
        out = prefix[np.minimum(k, len(self.death))]
        return np.where(k == 0, 0.0, out)


@dataclass(frozen=True)
class SimpleRandomWalk(TransitionSpec):
    p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ModelError("random walk step probability must lie in (0, 1)")


@dataclass(frozen=True)
class DisjointUnion(TransitionSpec):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ModelError("empty chain")
        if any(isinstance(p, DisjointUnion) for p in self.parts):
            raise ModelError("nested unions are not supported")


class RecurrenceType(enum.Enum):
    POSITIVE = "PositiveRecurrent"
    NULL = "NullRecurrent"
    TRANSIENT = "Transient"


@dataclass(frozen=True, eq=False)
class CommunicationClass:
    index: int
    part: TransitionSpec
    states: tuple = None
    anchor: object = 0
    period: int = None
    P: np.ndarray = None

    @property
    def finite(self):
        return self.states is not None

    @property
    def size(self):
        return len(self.states) if self.finite else math.inf

    def code(self, state):
        return self.states.index(state) if self.finite else int(state)


def _period(P):
    n = len(P)
    level = [-1] * n
    level[0] = 0
    queue = [0]
    g = 0
    while queue:
        u = queue.pop(0)
        for v in np.flatnonzero(P[u] > 0):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, level[u] + 1 - level[v])
    return abs(g) if g else 1


def _finite_classes(part):
    adj = part.P > 0
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    out = []
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(len(part.states)), idx)
        if adj[np.ix_(idx, outside)].any():
            names = [part.states[i] for i in idx]
            raise TransientClassError(f"transient class {names}: probability leaks out of it")
        out.append(idx)
    out.sort(key=lambda idx: min(_sort_key(part.states[i]) for i in idx))
    return out


def _sort_key(label):
    return (0, label, "") if isinstance(label, (int, float)) else (1, 0, str(label))


def communication_classes(spec, anchors=None):
    """Closed communication classes, numbered 1, 2, ... in order of appearance.

    ``anchors`` optionally maps a class number to its anchor state; otherwise
    the smallest state label is used.
    """
    anchors = dict(anchors or {})
    parts = spec.parts if isinstance(spec, DisjointUnion) else (spec,)
    classes = []
    for part in parts:
        if isinstance(part, FiniteMatrix):
            for idx in _finite_classes(part):
                states = tuple(sorted((part.states[i] for i in idx), key=_sort_key))
                order = [part.states.index(s) for s in states]
                sub = part.P[np.ix_(order, order)]
                i = len(classes) + 1
                anchor = anchors.get(i, states[0])
                if anchor not in states:
                    raise ModelError(f"anchor {anchor!r} is not a state of class {i}")
                period = _period(sub)
                if period > 1:
                    warnings.warn(f"class {i} has period {period}; it is assumed aperiodic",
                                  stacklevel=2)
                classes.append(CommunicationClass(i, part, states, anchor, period, sub))
        elif isinstance(part, (BirthDeath, SimpleRandomWalk)):
            i = len(classes) + 1
            anchor = int(anchors.get(i, 0))
            if isinstance(part, BirthDeath) and anchor < 0:
                raise ModelError("birth-death anchors must be nonnegative")
            classes.append(CommunicationClass(i, part, None, anchor))
        else:
            raise ModelError(f"unsupported transition spec {type(part).__name__}")
    return classes


def classify_recurrence(cls, spec=None):
    part = cls.part
    if cls.finite:
        return RecurrenceType.POSITIVE
    if isinstance(part, SimpleRandomWalk):
        return RecurrenceType.NULL if part.p == 0.5 else RecurrenceType.TRANSIENT
    # sum_k prod_{j<=k} q_j/p_j diverges iff the tail ratio q/p >= 1;
    # then sum_k pi_k < inf iff the tail ratio p/q < 1
    if part.tail_death < part.tail_birth:
        return RecurrenceType.TRANSIENT
    if part.tail_death > part.tail_birth:
        return RecurrenceType.POSITIVE
    return RecurrenceType.NULL


@dataclass(frozen=True, eq=False)
class InvariantMeasure:
    cls: CommunicationClass
    values: np.ndarray = None
    total_mass: float = math.inf

    def weight(self, state):
        cls = self.cls
        if cls.finite:
            return float(self.values[cls.code(state)])
        return float(self.weights(np.asarray([state]))[0])

    def weights(self, codes):
        """Weights for an array of state codes."""
        cls = self.cls
        codes = np.asarray(codes)
        if cls.finite:
            return self.values[codes]
        if isinstance(cls.part, SimpleRandomWalk):
            return np.ones(codes.shape)
        logpi = _bd_log_weights(cls.part, int(np.max(codes, initial=cls.anchor)) + 1)
        return np.exp(logpi[codes] - logpi[cls.anchor])


def _bd_log_weights(part, n):
    k = np.arange(1, n)
    steps = np.log(part.up(k - 1)) - np.log(part.down(k))
    return np.concatenate([[0.0], np.cumsum(steps)])


def invariant_measure(cls, spec=None):
    """Invariant measure with the anchor weight pinned to 1."""
    if classify_recurrence(cls) is RecurrenceType.TRANSIENT:
        raise TransientClassError(f"class {cls.index} is transient")
    if cls.finite:
        P = cls.P
        n = len(P)
        a = cls.code(cls.anchor)
        A = P.T - np.eye(n)
        A[a] = 0.0
        A[a, a] = 1.0
        rhs = np.zeros(n)
        rhs[a] = 1.0
        pi = np.linalg.solve(A, rhs)
        assert np.all(pi > 0), "irreducible class produced a non-positive invariant vector"
        assert np.max(np.abs(pi @ P - pi)) < 1e-10
        pi.flags.writeable = False
        return InvariantMeasure(cls, pi, float(pi.sum()))
    part = cls.part
    if isinstance(part, SimpleRandomWalk):
        return InvariantMeasure(cls, None, math.inf)
    if part.tail_birth >= part.tail_death:
        return InvariantMeasure(cls, None, math.inf)
    m = len(part.birth)
    logpi = _bd_log_weights(part, max(m, cls.anchor) + 1)
    pi = np.exp(logpi - logpi[cls.anchor])
    r = part.tail_birth / part.tail_death
    # beyond the prefix pi_{m+j} = pi_m * r**j
    total = pi[:m].sum() + pi[m] / (1.0 - r)
    return InvariantMeasure(cls, None, float(total))


# -- path sampling -------------------------------------------------------------------

def truncation_set(cls, radius=TRUNCATION_RADIUS):
    """Codes of the states used to start truncated two-sided paths."""
    if cls.finite:
        return np.arange(len(cls.states))
    lo = cls.anchor - radius
    if isinstance(cls.part, BirthDeath):
        lo = max(lo, 0)
    return np.arange(lo, cls.anchor + radius + 1)


def reversed_kernel(pi, P):
    """Backward transitions ``pi_k p_kj / pi_j`` as a row-stochastic matrix (rows j)."""
    pi = np.asarray(pi, dtype=float)
    R = (P * pi[:, None]).T / pi[:, None]
    if np.any(np.abs(R.sum(axis=1) - 1) > 1e-10):
        raise ModelError("reversed kernel rows do not sum to 1")
    return R


@dataclass(frozen=True, eq=False)
class PathBatch:
    """``states[k, j]`` is the state code of path k at time ``lo + j``."""

    cls: CommunicationClass
    lo: int
    states: np.ndarray

    def __len__(self):
        return len(self.states)

    def column(self, t):
        j = t - self.lo
        if not 0 <= j < self.states.shape[1]:
            raise ValueError(f"time {t} outside sampled range")
        return self.states[:, j]

    def segment(self, k):
        from .actions import PathSegment
        codes = self.states[k]
        vals = np.array([self.cls.states[c] for c in codes]) if self.cls.finite else codes
        return PathSegment((self.lo,), vals, self.cls.index)


class _Stepper:
    def __init__(self, cls, measure):
        self.cls = cls
        part = cls.part
        if cls.finite:
            self.fwd = np.cumsum(cls.P, axis=1)
            self.bwd = np.cumsum(reversed_kernel(measure.values, cls.P), axis=1)
        elif isinstance(part, SimpleRandomWalk):
            self.p = part.p
        else:
            self.part = part
            self.measure = measure

    def step(self, cur, rng, backward):
        u = rng.random(len(cur))
        cls = self.cls
        if cls.finite:
            cum = (self.bwd if backward else self.fwd)[cur]
            return np.minimum((u[:, None] > cum).sum(axis=1), cum.shape[1] - 1)
        if hasattr(self, "p"):
            # pi uniform, so backward up-probability is pi_{j+1} p_{j+1,j} / pi_j = 1 - p
            up = (1 - self.p) if backward else self.p
            return cur + np.where(u < up, 1, -1)
        part = self.part
        if backward:
            w = self.measure.weights
            wc = w(cur)
            up = w(cur + 1) * part.down(cur + 1) / wc
            down = np.where(cur > 0, w(np.maximum(cur - 1, 0)) * part.up(np.maximum(cur - 1, 0)) / wc, 0.0)
            stay = 1.0 - part.up(cur) - part.down(cur)
            if np.any(np.abs(up + down + stay - 1) > 1e-10):
                raise ModelError("reversed kernel rows do not sum to 1")
        else:
            up, down = part.up(cur), part.down(cur)
        return cur + np.where(u < up, 1, np.where(u < up + down, -1, 0))


def _span(window):
    lo, hi = (-window, window) if np.isscalar(window) else window
    return min(int(lo), 0), max(int(hi), 0)


def walk_two_sided(cls, window, rng, size, visit, initial=None, measure=None):
    """Run ``size`` two-sided paths without storing them.

    ``x(0)`` is drawn from pi restricted to the start set F, then the chain runs
    forward to ``hi`` with P and backward to ``lo`` with the reversed kernel.
    ``visit(t, states)`` sees the state codes at every time.  Returns
    ``m_F = sum_{l in F} pi_l``.
    """
    lo, hi = _span(window)
    measure = measure or invariant_measure(cls)
    F = truncation_set(cls) if initial is None else np.asarray(
        [cls.code(s) for s in initial])
    if len(F) == 0:
        raise ModelError("empty initial set")
    w = measure.weights(F)
    mass = float(w.sum())
    start = F[rng.choice(len(F), size=size, p=w / mass)]
    visit(0, start)
    stepper = _Stepper(cls, measure)
    cur = start
    for t in range(1, hi + 1):
        cur = stepper.step(cur, rng, backward=False)
        visit(t, cur)
    cur = start
    for t in range(-1, lo - 1, -1):
        cur = stepper.step(cur, rng, backward=True)
        visit(t, cur)
    return mass


def sample_two_sided_path(cls, window, rng, size=1, initial=None, measure=None):
    """Sample paths on ``window = (lo, hi)`` (or ``L`` for ``[-L, L]``).

    Returns the :class:`PathBatch` and the truncated mass ``m_F``.
    """
    lo, hi = _span(window)
    states = np.empty((size, hi - lo + 1), dtype=np.int64)

    def keep(t, codes):
        states[:, t - lo] = codes

    mass = walk_two_sided(cls, (lo, hi), rng, size, keep, initial, measure)
    return PathBatch(cls, lo, states), mass


# -- the field kernel ------------------------------------------------------------------

class MarkovFieldKernel:
    """``f(x) = sum_i 2**(-i/alpha) 1{x in S_i, x(0) = l_i}``."""

    def __init__(self, classes, alpha):
        self.alpha = alpha
        self.anchors = {c.index: c.anchor for c in classes}
        self.codes = {c.index: c.code(c.anchor) for c in classes}

    def level(self, i):
        return 2.0 ** (-i / self.alpha)

    def __call__(self, point):
        i = point.label
        if i not in self.anchors:
            return 0.0
        return self.level(i) if point.at((0,)) == self.anchors[i] else 0.0

    def batch(self, t, paths):
        i = paths.cls.index
        return self.level(i) * (paths.column(t) == self.codes[i])

    def alpha_mass(self, classes):
        """``int |f|**alpha dmu`` over the given classes (anchor weight 1)."""
        return sum(2.0 ** -c.index for c in classes)


def markov_field_kernel(classes, alpha):
    return MarkovFieldKernel(classes, alpha)
