"""Custom exceptions for spectral clustering, voting and evaluation."""

# Exit codes shared by every CLI subcommand
EXIT_INPUT_ERROR = 1
EXIT_NUMERICAL_ERROR = 2

# Centralised default exception messages
EXCEPTION_MESSAGES = {
    # Feature file errors
    "feature_format_error": "Feature file is not a version 1.0 float array file",
    "feature_shape_error": "Feature array must have shape (height, width, channels)",
    "feature_data_error": "Feature array contains NaN or infinite values",
    # Mask and grid errors
    "mask_format_error": "Mask file is not a readable single-channel image",
    "shape_mismatch_error": "Array dimensions do not match",
    "degenerate_feature_error": "Feature vector has zero norm",
    # Parameter errors
    "parameter_error": "Parameter out of range",
    "empty_ground_truth_error": "Ground truth has no foreground, recall is undefined",
    "invalid_permutation_error": "Order is not a permutation of the prediction indices",
    # Batch input errors
    "manifest_error": "Manifest is not a valid feature manifest",
    "file_not_exists_error": "We couldn't find your file",
    "missing_pairs_error": "Prediction and ground-truth directories share no filenames",
    # Numerical errors
    "numerical_error": "Eigensolver failed to converge",
    "gradient_check_error": "Analytic gradient deviates from finite differences",
}


class BaseSpectralVoteError(Exception):
    """Base exception for all spectral-vote failures."""

    exit_code = EXIT_INPUT_ERROR

    def __init__(self, message: str) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class FeatureFormatError(BaseSpectralVoteError):
    """Raised when a feature file has a malformed magic string or header."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["feature_format_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class FeatureShapeError(BaseSpectralVoteError):
    """Raised when a feature array is not three-dimensional."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["feature_shape_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class FeatureDataError(BaseSpectralVoteError):
    """Raised when a feature array holds non-finite values."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["feature_data_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class MaskFormatError(BaseSpectralVoteError):
    """Raised when a mask image cannot be decoded."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["mask_format_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class ShapeMismatchError(BaseSpectralVoteError):
    """Raised when masks, grids or vectors disagree on their dimensions."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["shape_mismatch_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class DegenerateFeatureError(BaseSpectralVoteError):
    """Raised when a grid cell has an all-zero feature vector."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["degenerate_feature_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class ParameterError(BaseSpectralVoteError):
    """Raised when k, a seed or another parameter is out of range."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["parameter_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class EmptyGroundTruthError(BaseSpectralVoteError):
    """Raised when F-beta is requested against an empty ground truth."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["empty_ground_truth_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class InvalidPermutationError(BaseSpectralVoteError):
    """Raised when a ranking order is not a permutation of 0..n_q-1."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["invalid_permutation_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class ManifestError(BaseSpectralVoteError):
    """Raised when a manifest is malformed or misses a requested source."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["manifest_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class FileNotExistsError(BaseSpectralVoteError):
    """Raised when an input file doesn't exist."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["file_not_exists_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class MissingPairsError(BaseSpectralVoteError):
    """Raised when no prediction has a same-named ground truth."""

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["missing_pairs_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class NumericalError(BaseSpectralVoteError):
    """Raised when the eigensolver fails."""

    exit_code = EXIT_NUMERICAL_ERROR

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["numerical_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)


class GradientCheckError(BaseSpectralVoteError):
    """Raised when a gradient check exceeds its tolerance."""

    exit_code = EXIT_NUMERICAL_ERROR

    def __init__(
        self,
        message: str = EXCEPTION_MESSAGES["gradient_check_error"],
    ) -> None:
        """Initialise with custom message."""
        super().__init__(message)
