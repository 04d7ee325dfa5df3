"""Exception hierarchy shared by the parser, the table layer and both engines."""


class LiftedGBPError(Exception):
    """Base class for every error raised by this package."""


# -- model parsing / validation ------------------------------------------------

class ModelError(LiftedGBPError):
    """Invalid relational model."""


class ModelSyntaxError(ModelError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class UnknownPredicate(ModelError):
    pass


class UnknownDomain(ModelError):
    pass


class TableLengthMismatch(ModelError):
    pass


class NonPositiveValue(ModelError):
    pass


class ArityUnsupported(ModelError):
    pass


class ConstantTerm(ModelError):
    pass


class DomainTooSmall(ModelError):
    pass


class StateSpaceTooLarge(LiftedGBPError):
    pass


# -- factor tables ---------------------------------------------------------------

class TableError(LiftedGBPError):
    pass


class CardinalityMismatch(TableError):
    pass


class ScopeNotContained(TableError):
    pass


class UnknownVariable(TableError):
    pass


class NotABijection(TableError):
    pass


# -- region graphs ---------------------------------------------------------------

class RegionGraphError(LiftedGBPError):
    pass


class OuterRegionsDontCoverFactors(RegionGraphError):
    pass


class NoAssociation(RegionGraphError):
    """A local parent matched no lifted edge (or more than one)."""


class NegativeExponent(RegionGraphError):
    pass


class NoContainingRegion(RegionGraphError):
    pass
