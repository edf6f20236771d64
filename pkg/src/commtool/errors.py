"""Exception taxonomy shared across the package.

HTTP bindings map these onto status codes; everything else raises them
directly so library users get precise failure kinds.
"""


class CommToolError(Exception):
    """Base class for all package errors."""


class ConfigError(CommToolError):
    """Invalid or missing configuration (bad key length, bad env values)."""


class AuthError(CommToolError):
    """Token or credential failed verification."""


class ForbiddenError(CommToolError):
    """Authenticated caller is not allowed to perform the action."""


class NotFoundError(CommToolError):
    """Referenced channel / campaign / recipient / share does not exist."""


class ValidationError(CommToolError):
    """Malformed payload or out-of-domain argument."""


class EditError(CommToolError):
    """Section edit references unknown ids or violates adjacency rules."""


class StateError(CommToolError):
    """Operation not valid in the campaign's current lifecycle state."""


class FeatureError(CommToolError):
    """Feature extraction is missing required layout or frame data."""


class ShapeError(CommToolError):
    """Model input width does not match the architecture."""


class TrainError(CommToolError):
    """Training cannot proceed (e.g. empty dataset)."""


class CVError(CommToolError):
    """Cross-validation cannot be set up (e.g. a single user)."""


class DegenerateError(CommToolError):
    """Regression input is degenerate (constant predictor)."""


class SampleError(CommToolError):
    """Too few samples for the requested statistic."""
