"""Ergodicity verdicts for stationary SaS fields indexed by Z^d.

Two independent routes reach the verdict:

* Neveu route -- the field is ergodic (equivalently weakly mixing) iff the
  positive part is null, and has no nontrivial ergodic part iff the null part
  is null;
* ledger route -- the same through the central factor ledger: ergodic iff no
  component factor is II_1, completely non-ergodic iff every one is.

The ledger route needs an ergodically free action; on tainted ledgers the
Neveu route alone decides and a warning is attached.
"""

from dataclasses import dataclass, field
import enum

from . import markov
from .actions import MarkovShift, RosinskiTriplet
from .decomposition import (admits_no_II1, admits_only_II1, central_ledger,
                            ergodic_decomposition, neveu_decomposition)
from .errors import IndeterminateLedger, TransientClassError


class VerdictKind(enum.Enum):
    ERGODIC = "ErgodicWeaklyMixing"
    NON_ERGODIC = "CompletelyNonErgodic"
    MIXED = "MixedErgodicity"


class Basis(enum.Enum):
    NEVEU = "NeveuRoute"
    LEDGER = "LedgerRoute"


@dataclass
class Verdict:
    kind: VerdictKind
    basis: Basis
    warnings: list = field(default_factory=list)
    neveu: object = None
    ledger: object = None

    @property
    def ergodic(self):
        return self.kind is VerdictKind.ERGODIC

    def to_dict(self):
        return {"verdict": self.kind.value, "basis": self.basis.value,
                "neveu": self.neveu.to_dict() if self.neveu else None,
                "ledger": self.ledger.to_dict() if self.ledger else None,
                "warnings": list(self.warnings)}


def _from_flags(no_positive, no_null):
    if no_positive and no_null:
        raise AssertionError("empty decomposition: a full-support triplet has a component")
    if no_positive:
        return VerdictKind.ERGODIC
    if no_null:
        return VerdictKind.NON_ERGODIC
    return VerdictKind.MIXED


def neveu_route(neveu):
    return _from_flags(not neveu.positive_labels, not neveu.null_labels)


def ledger_route(ledger):
    return _from_flags(admits_no_II1(ledger), admits_only_II1(ledger))


def classify(triplet):
    family = triplet.family if isinstance(triplet, RosinskiTriplet) else triplet
    components = ergodic_decomposition(family)
    neveu = neveu_decomposition(family, components)
    ledger = central_ledger(family, components)
    kind = neveu_route(neveu)
    notes = []
    try:
        via_ledger = ledger_route(ledger)
    except IndeterminateLedger as exc:
        notes.append(f"ledger route unavailable ({exc}); verdict from the Neveu route")
        return Verdict(kind, Basis.NEVEU, notes, neveu, ledger)
    assert via_ledger is kind, f"route disagreement: Neveu {kind}, ledger {via_ledger}"
    return Verdict(kind, Basis.LEDGER, notes, neveu, ledger)


def classify_markov_field(spec, alpha=None, anchors=None):
    """Verdict straight from the recurrence types of the chain's classes."""
    types = []
    for cls in markov.communication_classes(spec, anchors=anchors):
        rec = markov.classify_recurrence(cls)
        if rec is markov.RecurrenceType.TRANSIENT:
            raise TransientClassError(f"transient class {cls.index}: the field needs recurrence")
        types.append(rec)
    positive = [t is markov.RecurrenceType.POSITIVE for t in types]
    kind = _from_flags(not any(positive), all(positive))
    return Verdict(kind, Basis.NEVEU)


def markov_triplet(spec, alpha, anchors=None):
    return RosinskiTriplet(MarkovShift(spec, anchors=anchors), None, alpha)


class RigidityStatus(enum.Enum):
    CONSISTENT = "CONSISTENT"
    NOT_COMPARABLE = "NOT-COMPARABLE"
    VIOLATION = "VIOLATION"


@dataclass
class RigidityReport:
    status: RigidityStatus
    message: str

    def to_dict(self):
        return {"status": self.status.value, "message": self.message}


def rigidity_check(ledger_a, ledger_b, verdict_a, verdict_b):
    """Ledger-equivalent fields must agree on ergodicity and on complete non-ergodicity."""
    key_a = (admits_no_II1(ledger_a), admits_only_II1(ledger_a))
    key_b = (admits_no_II1(ledger_b), admits_only_II1(ledger_b))
    if key_a != key_b:
        return RigidityReport(RigidityStatus.NOT_COMPARABLE,
                              f"ledgers differ {key_a} vs {key_b}; nothing to check")
    ka, kb = _kind(verdict_a), _kind(verdict_b)
    same_erg = (ka is VerdictKind.ERGODIC) == (kb is VerdictKind.ERGODIC)
    same_cne = (ka is VerdictKind.NON_ERGODIC) == (kb is VerdictKind.NON_ERGODIC)
    if same_erg and same_cne:
        return RigidityReport(RigidityStatus.CONSISTENT, f"both ledgers {key_a}; verdicts agree")
    return RigidityReport(RigidityStatus.VIOLATION,
                          f"ledger-equivalent inputs with verdicts {ka.value} / {kb.value}: "
                          "this indicates an implementation bug")


def _kind(verdict):
    return verdict.kind if isinstance(verdict, Verdict) else VerdictKind(verdict)
