"""Structured exceptions.

Every error carries a ``details`` dict so that callers (and the CLI) can
render a machine-readable report instead of a bare traceback.
"""

from __future__ import annotations

from typing import Any


class ParadiffError(Exception):
    """Base class; ``kind`` names the failure, ``details`` holds measurements."""

    kind = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "message": self.message}
        out.update(self.details)
        return out


class SizeError(ParadiffError):
    kind = "size"


class ParameterError(ParadiffError):
    kind = "parameter"


class PreconditionError(ParadiffError):
    kind = "precondition"


class StructureError(ParadiffError):
    kind = "structure"


class UnsupportedOrderError(ParadiffError):
    kind = "unsupported_order"


class EllipticityError(ParadiffError):
    kind = "ellipticity"


class HypothesisError(ParadiffError):
    kind = "hypothesis"


class ConvergenceError(ParadiffError):
    kind = "convergence"


class DivergenceError(ParadiffError):
    kind = "divergence"


class CapabilityError(ParadiffError):
    kind = "capability"


class ConfigError(ParadiffError):
    kind = "config"
