"""Exception types raised across the package."""

from __future__ import annotations


class FormctlError(Exception):
    """Base class for all package errors."""

    def __reduce__(self):
        # subclasses take custom constructor arguments; rebuild from state
        return _rebuild, (self.__class__, self.args, self.__dict__)


def _rebuild(cls, args, state):
    exc = cls.__new__(cls)
    exc.args = args
    exc.__dict__.update(state)
    return exc


class UnassignableFollowers(FormctlError):
    def __init__(self, followers):
        self.followers = sorted(followers)
        super().__init__(f"followers cannot be assigned to a layer: {self.followers}")


class DimensionMismatch(FormctlError):
    pass


class ShapeError(FormctlError):
    pass


class DegenerateNeighborhood(FormctlError):
    def __init__(self, agent, msg=""):
        self.agent = agent
        super().__init__(msg or f"neighbors of agent {agent} are affinely degenerate")


class NotLocalizable(FormctlError):
    def __init__(self, agent=None, msg=""):
        self.agent = agent
        super().__init__(msg or f"agent {agent} is not localizable by its neighbors")


class Singular(FormctlError):
    pass


class OutOfSchedule(FormctlError):
    pass


class ScheduleExhausted(FormctlError):
    pass


class CoincidentAgents(FormctlError):
    def __init__(self, i, j):
        self.pair = (i, j)
        super().__init__(f"agents {i} and {j} coincide")


class NotUnit(FormctlError):
    pass


class NotEmbeddable(FormctlError):
    pass


class RankDeficientWarning(UserWarning):
    """Fewer than d strictly positive eigenvalues in an MDS embedding."""


class AmbiguousNullspace(FormctlError):
    pass


class ZeroReferenceDistance(FormctlError):
    pass


class NoPivot(FormctlError):
    pass


class DegenerateTriangle(FormctlError):
    def __init__(self, triple):
        self.triple = tuple(triple)
        super().__init__(f"degenerate triangle {self.triple}")


class CaseUndetermined(FormctlError):
    pass


class MissingNeighborEstimate(FormctlError):
    pass


class NumericalBlowup(FormctlError):
    pass


class ParseError(FormctlError):
    def __init__(self, section, line, reason):
        self.section = section
        self.line = line
        self.reason = reason
        loc = f"[{section}]" + (f" line {line}" if line is not None else "")
        super().__init__(f"{loc}: {reason}")


class ValidationError(FormctlError):
    def __init__(self, report):
        self.report = report
        super().__init__(str(report))
