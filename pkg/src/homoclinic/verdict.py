"""Three-valued outcome of a verification step."""

from enum import Enum


class Verdict(str, Enum):
    VERIFIED = "verified"
    REFUTED = "refuted"
    UNDETERMINED = "undetermined"

    @property
    def ok(self) -> bool:
        return self is Verdict.VERIFIED

    @staticmethod
    def combine(*verdicts: "Verdict") -> "Verdict":
        """Conjunction: refuted beats undetermined beats verified."""
        vs = list(verdicts)
        if any(v is Verdict.REFUTED for v in vs):
            return Verdict.REFUTED
        if any(v is Verdict.UNDETERMINED for v in vs):
            return Verdict.UNDETERMINED
        return Verdict.VERIFIED

    @property
    def exit_code(self) -> int:
        return {Verdict.VERIFIED: 0, Verdict.REFUTED: 1, Verdict.UNDETERMINED: 2}[self]
