"""Exception hierarchy.

Every error raised by the library derives from :class:`ToricSolitonError` so
batch drivers can catch one type. Each class carries a short ``code`` used in
machine-readable reports.
"""


class ToricSolitonError(Exception):
    code = "error"


# polytope
class PolytopeError(ToricSolitonError, ValueError):
    code = "polytope"


class Unbounded(PolytopeError):
    code = "unbounded"


class Degenerate(PolytopeError):
    code = "degenerate"


class Inconsistent(PolytopeError):
    code = "inconsistent"


class EmptyBox(PolytopeError):
    code = "empty_box"


class NonConvergent(ToricSolitonError, ArithmeticError):
    code = "non_convergent"


class NonPositiveWeight(ToricSolitonError, ValueError):
    code = "non_positive_weight"


# base data
class DimensionMismatch(ToricSolitonError, ValueError):
    code = "dimension_mismatch"


class UnknownPreset(ToricSolitonError, KeyError):
    code = "unknown_preset"


class InvalidForms(ToricSolitonError, ValueError):
    code = "invalid_forms"


# soliton
class NotFano(ToricSolitonError, ValueError):
    code = "not_fano"


class OriginNotInterior(ToricSolitonError, ValueError):
    code = "origin_not_interior"


class MaxIterations(ToricSolitonError, ArithmeticError):
    code = "max_iterations"


# metric1d
class ClosureFailure(ToricSolitonError, ArithmeticError):
    code = "closure_failure"


class NonPositiveProfile(ToricSolitonError, ArithmeticError):
    code = "non_positive_profile"


class GradientOutOfPolytope(ToricSolitonError, ValueError):
    code = "gradient_out_of_polytope"


class SingularHessian(ToricSolitonError, ArithmeticError):
    code = "singular_hessian"


# cli
class ParseError(ToricSolitonError, ValueError):
    code = "parse_error"


class SchemaError(ToricSolitonError, ValueError):
    code = "schema_error"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class IoError(ToricSolitonError, OSError):
    code = "io_error"
