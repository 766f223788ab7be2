"""Online specialization of handler code written in a small kernel IR."""

from .engine import Engine, ExecResult
from .errors import (
    AlreadyExploring,
    GuardOnLocal,
    NotPure,
    NotScalar,
    PinTypeError,
    SpecializationError,
    SpecializationTooLarge,
    SubstitutionRefused,
    Trap,
    UnknownFunction,
    UnknownPoint,
)
from .ir import parse_program, pretty_print, validate
from .runtime import Runtime, runtime_init
from .specializer import HotMapSpec, PinSet, SpecPoint, Variant, apply_hot_map, pin_and_specialize

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "ExecResult",
    "Runtime",
    "runtime_init",
    "parse_program",
    "pretty_print",
    "validate",
    "PinSet",
    "SpecPoint",
    "HotMapSpec",
    "Variant",
    "pin_and_specialize",
    "apply_hot_map",
    "Trap",
    "SpecializationError",
    "PinTypeError",
    "UnknownPoint",
    "UnknownFunction",
    "NotScalar",
    "SubstitutionRefused",
    "GuardOnLocal",
    "SpecializationTooLarge",
    "NotPure",
    "AlreadyExploring",
]
