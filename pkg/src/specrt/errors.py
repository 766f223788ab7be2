"""Exception types shared across the toolbox."""

from __future__ import annotations


class SpecializationError(Exception):
    pass


class PinTypeError(SpecializationError):
    pass


class UnknownPoint(SpecializationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NotScalar(SpecializationError):
    pass


class SubstitutionRefused(SpecializationError):
    pass


class GuardOnLocal(SpecializationError):
    pass


class SpecializationTooLarge(SpecializationError):
    pass


class NotPure(SpecializationError):
    pass


class EmptyHotMap(SpecializationError):
    pass


class UnknownFunction(KeyError):
    def __str__(self):
        return Exception.__str__(self)


class AlreadyExploring(RuntimeError):
    pass


class Trap(Exception):
    """A runtime fault inside handler code. Aborts the call, never the process."""

    KINDS = ("div_by_zero", "oob_index", "type", "bad_step")

    def __init__(self, kind: str, function: str | None = None, path: str = ""):
        self.kind = kind
        self.function = function
        self.path = path
        super().__init__(kind)

    @property
    def location(self) -> tuple:
        return (self.function, self.path)

    def __str__(self):
        where = self.function or "?"
        if self.path:
            where += f"@{self.path}"
        return f"trap {self.kind} at {where}"
