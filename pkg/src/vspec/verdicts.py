"""Verdicts and property statuses shared by backends, the built-in
verifier, and the proof cache."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .queries import QVar


@dataclass(frozen=True)
class Sat:
    """Satisfiable, with an exact witness over relational variables."""

    witness: tuple[tuple[QVar, Fraction], ...]

    def as_dict(self) -> dict[QVar, Fraction]:
        return dict(self.witness)


@dataclass(frozen=True)
class Unsat:
    pass


Verdict = Sat | Unsat


@dataclass(frozen=True)
class PropertyStatus:
    """Outcome for one property: Verified, Falsified (with witness), or
    NotChecked."""

    kind: str  # "Verified" | "Falsified" | "NotChecked"
    witness: tuple[tuple[QVar, Fraction], ...] = ()

    def __str__(self) -> str:
        return self.kind


VERIFIED = PropertyStatus("Verified")
NOT_CHECKED = PropertyStatus("NotChecked")


def falsified(witness: tuple[tuple[QVar, Fraction], ...]) -> PropertyStatus:
    return PropertyStatus("Falsified", witness)
