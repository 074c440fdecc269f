"""Exception types shared across the package."""


class ModelError(ValueError):
    """A modelling precondition fails (not a bug, not a config typo)."""


class FullSupportError(ModelError):
    pass


class TransientClassError(ModelError):
    pass


class IndeterminateLedger(ModelError):
    """The central ledger holds a component whose factor type is unknown."""


class DomainError(ValueError):
    """A point lies outside the recorded domain of a path segment."""


class FitUnstable(RuntimeError):
    pass


class DegenerateField(ValueError):
    pass
