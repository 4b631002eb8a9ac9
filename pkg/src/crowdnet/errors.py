"""Typed errors raised across the package.

Every data problem surfaces as a subclass of :class:`CrowdnetError` so the
CLI can map it to exit status 1 with file/line context.
"""

from __future__ import annotations


class CrowdnetError(Exception):
    """Base class for all validation and computation errors."""


class SchemaError(CrowdnetError):
    def __init__(self, message: str, path: str | None = None, line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        where = ""
        if path is not None:
            where = f"{path}:{line_no}: " if line_no is not None else f"{path}: "
        elif line_no is not None:
            where = f"line {line_no}: "
        super().__init__(f"{where}{message}")


class MissingMarketCap(CrowdnetError):
    def __init__(self, stock_id: str, context: str = ""):
        self.stock_id = stock_id
        msg = f"no market cap for stock {stock_id!r}"
        super().__init__(f"{msg} ({context})" if context else msg)


class BadWeight(CrowdnetError):
    def __init__(self, fund_id: str, stock_id: str, value: float, context: str = ""):
        self.fund_id = fund_id
        self.stock_id = stock_id
        self.value = value
        msg = f"weight {value!r} for fund {fund_id!r} / stock {stock_id!r} outside [0, 1]"
        super().__init__(f"{context}: {msg}" if context else msg)


class InvalidSnapshot(CrowdnetError):
    """Aggregate invariant broken (fund weight sum, benchmark sum)."""


class DuplicateKey(CrowdnetError):
    def __init__(self, key: str, date, context: str = ""):
        self.key = key
        self.date = date
        msg = f"duplicate row for ({key}, {date})"
        super().__init__(f"{context}: {msg}" if context else msg)


class NonPositiveLog(CrowdnetError):
    pass


class EmptyGraph(CrowdnetError):
    pass


class KindMismatch(CrowdnetError):
    pass


class UniverseTooSmall(CrowdnetError):
    pass


class MissingFactors(CrowdnetError):
    def __init__(self, stock_id: str, as_of=None):
        self.stock_id = stock_id
        self.as_of = as_of
        super().__init__(f"no factor loadings for stock {stock_id!r} at {as_of}")


class Infeasible(CrowdnetError):
    pass


class NotQuarterEnd(CrowdnetError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"{date} is not a calendar quarter end")


class MissingReturns(CrowdnetError):
    def __init__(self, stock_id: str, date):
        self.stock_id = stock_id
        self.date = date
        super().__init__(f"no return for stock {stock_id!r} in month {date}")


class DegenerateSeries(CrowdnetError):
    pass


class RankDeficient(CrowdnetError):
    pass


class BadConfig(CrowdnetError):
    pass
