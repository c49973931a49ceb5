"""Exception hierarchy shared by every module of the engine."""


class NumNullsError(Exception):
    """Base class for all engine errors."""


class ConfigError(NumNullsError, ValueError):
    pass


class SchemaError(NumNullsError, ValueError):
    """Malformed database, interval tuple, or world document."""


class MissingNull(NumNullsError, KeyError):
    """A valuation does not cover a null it is applied to."""

    def __str__(self):
        return Exception.__str__(self)


class UnboundVariable(NumNullsError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ParseError(NumNullsError):
    def __init__(self, message, line=1, column=1, expected=()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at line {line}, column {column}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class QueryTypeError(NumNullsError, TypeError):
    """Arity mismatch or out-of-range position; names the offending node."""


class EvalError(NumNullsError):
    pass


class DivByZero(EvalError, ZeroDivisionError):
    pass


class NullComparison(EvalError):
    """Order comparison or arithmetic touched a null during naive evaluation."""


class MultiplicityOverflow(EvalError, OverflowError):
    pass


class SampleError(NumNullsError):
    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"sample {index} aborted: {cause}")


class RewriteError(NumNullsError):
    pass


class ArityOverflow(RewriteError):
    pass


class BlowupLimit(NumNullsError):
    def __init__(self, pairs, cap):
        self.pairs = pairs
        self.cap = cap
        super().__init__(f"conditional world would have {pairs} pairs (cap {cap})")


class WorldError(NumNullsError):
    pass


class NoBranch(WorldError):
    pass


class MultiBranch(WorldError):
    pass


class NotCellDecomposable(NumNullsError):
    pass


class CellLimit(NumNullsError):
    pass


class TooManyNulls(NumNullsError):
    pass
