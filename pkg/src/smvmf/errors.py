"""Exception types shared across the package.

Every error carries a stable ``code`` string so the command line layer can
emit machine-readable error records without inspecting exception classes.
"""


class SmvmfError(Exception):
    code = "smvmf.error"


class ConfigParseError(SmvmfError):
    """Run configuration, manifest, or spec file could not be parsed."""

    code = "config.parse_error"


class MismatchedRegions(SmvmfError):
    """A view's column header disagrees with the dataset's region list."""

    code = "dataset.mismatched_regions"


class NonNumericCell(SmvmfError):
    code = "dataset.non_numeric_cell"


class DuplicateSubjectInView(SmvmfError):
    code = "dataset.duplicate_subject_in_view"


class EmptyView(SmvmfError):
    code = "dataset.empty_view"


class AlreadyCentered(SmvmfError):
    code = "dataset.already_centered"


class ViewIndexOutOfRange(SmvmfError):
    code = "dataset.view_index_out_of_range"


class DimensionMismatch(SmvmfError):
    code = "factor_model.dimension_mismatch"


class ConstraintViolated(SmvmfError):
    """Projection blocks drifted off the orthogonality manifold."""

    code = "factor_model.constraint_violated"


class RankTooLarge(SmvmfError):
    code = "solver.rank_too_large"


class DegenerateData(SmvmfError):
    """Input carries too little rank to support the requested model."""

    code = "solver.degenerate_data"


class NotReached(SmvmfError):
    """No candidate shared rank met the variance threshold.

    ``rows`` holds the per-candidate table evaluated before giving up so
    callers can still report the scan.
    """

    code = "model_selection.not_reached"

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class UnknownComponent(SmvmfError):
    code = "stability.unknown_component"


class ExcessiveSubsampleFailures(SmvmfError):
    code = "stability.excessive_subsample_failures"


class SingularCovariance(SmvmfError):
    code = "analysis.singular_covariance"


class DegenerateClass(SmvmfError):
    code = "analysis.degenerate_class"


class RankDeficient(SmvmfError):
    """Raised by the reference polar oracle on rank-deficient input."""

    code = "synthetic.rank_deficient"
