"""Exception types shared across the package."""

from __future__ import annotations


class FFError(Exception):
    """Base class for all package errors."""


class NotPrime(FFError, ValueError):
    pass


class FieldTooLarge(FFError, ValueError):
    pass


class CtxMismatch(FFError, TypeError):
    pass


class CharacteristicMismatch(FFError, ValueError):
    pass


class DivisionByZero(FFError, ZeroDivisionError):
    pass


class NotACompanionPower(FFError, ValueError):
    pass


class Singular(FFError, ValueError):
    pass


class DimMismatch(FFError, ValueError):
    pass


class ModelMismatch(FFError, ValueError):
    pass


class NotFeasible(FFError):
    """A scheme precondition failed; ``predicate`` names the failed check."""

    def __init__(self, predicate: str, detail: str = ""):
        self.predicate = predicate
        self.detail = detail
        msg = predicate if not detail else f"{predicate}: {detail}"
        super().__init__(msg)


class OddDimension(FFError, ValueError):
    pass


class RepeatedEigenvalues(FFError, ValueError):
    pass


class NotSymmetric(FFError, ValueError):
    pass


class NoValidChoice(FFError):
    def __init__(self, detail: str = "", instance=None):
        self.instance = instance
        super().__init__(detail or "candidate enumeration exhausted")


class ZeroBlock(FFError):
    """A condensed channel coefficient came out zero."""

    def __init__(self, where: str = ""):
        self.where = where
        super().__init__(f"zero condensed coefficient {where}".strip())


class NotLayered(FFError, ValueError):
    pass


class MissingKeyRelays(FFError, ValueError):
    pass


class ZeroVector(FFError, ValueError):
    pass


class SingularV(FFError, ValueError):
    pass


class MTooLarge(FFError, ValueError):
    pass


class NonIntegerLatency(UserWarning):
    """Latency ``m log p / R0`` is not an integer number of time units."""
