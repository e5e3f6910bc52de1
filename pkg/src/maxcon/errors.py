"""Exception types raised across the package."""


class MaxconError(ValueError):
    """Base class for all input / numerical errors raised by maxcon."""


class NonPositiveValue(MaxconError):
    def __init__(self, group, index):
        self.group, self.index = group, index
        super().__init__(f"non-positive value at group {group}, index {index}; cannot log-transform")


class EmptyGroup(MaxconError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"group {group} is empty")


class DegenerateVariance(MaxconError):
    """Pooled variance undefined: no within-group degrees of freedom."""


class RowSumNonZero(MaxconError):
    def __init__(self, row, total):
        self.row = row
        super().__init__(f"contrast row {row} sums to {total!r}, not 0")


class ZeroRow(MaxconError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"contrast row {row} is all zero")


class DimensionMismatch(MaxconError):
    pass


class NotSymmetric(MaxconError):
    pass


class IndefiniteMatrix(MaxconError):
    pass


class SingularSigma(MaxconError):
    pass


class ZeroVariance(MaxconError):
    """Pooled variance is exactly zero, so studentized contrasts are undefined."""


class AllTied(MaxconError):
    pass


class BudgetExhausted(MaxconError):
    """Integrator could not reach the requested tolerance within its point budget."""


class MalformedRow(MaxconError):
    def __init__(self, line, reason=""):
        self.line = line
        super().__init__(f"line {line}: malformed row" + (f" ({reason})" if reason else ""))


class UnknownGenotype(MaxconError):
    def __init__(self, line, token):
        self.line, self.token = line, token
        super().__init__(f"line {line}: unknown genotype code {token!r} (expected 0, 1 or 2)")


class DuplicateObservation(MaxconError):
    def __init__(self, snp, subject):
        self.snp, self.subject = snp, subject
        super().__init__(f"duplicate observation for snp {snp!r}, subject {subject!r}")
