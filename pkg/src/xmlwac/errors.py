"""Exception hierarchy shared by the parsers and analyses."""

from __future__ import annotations


class XmlwacError(Exception):
    """Base class for all errors raised by this package."""


class InputError(XmlwacError, ValueError):
    """Malformed or semantically invalid user input (DTD, policy, tree, ops)."""

    def __init__(self, message: str, *, line: int | None = None,
                 col: int | None = None, source: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.source = source
        super().__init__(self._format())

    def _format(self) -> str:
        where = []
        if self.source:
            where.append(self.source)
        if self.line is not None:
            where.append(f"line {self.line}")
            if self.col is not None:
                where.append(f"col {self.col}")
        if where:
            return f"{': '.join([', '.join(where), self.message])}"
        return self.message


class DTDSyntaxError(InputError):
    pass


class DTDError(InputError):
    pass


class UnknownElementError(InputError, KeyError):
    def __str__(self) -> str:  # KeyError would otherwise repr() the message
        return self._format()


class PolicyError(InputError):
    pass


class TreeSyntaxError(InputError):
    pass


class InvalidUpdateError(XmlwacError, ValueError):
    """An update operation is not valid on the tree it is applied to."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        if index is not None:
            message = f"op #{index}: {message}"
        super().__init__(message)


class InternalError(XmlwacError, AssertionError):
    """A postcondition that should be unreachable was violated."""


class InstanceTooLargeError(XmlwacError, ValueError):
    """A brute-force routine was asked to search beyond its feasibility guard."""
