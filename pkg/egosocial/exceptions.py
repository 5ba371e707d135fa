# Copyright 2024 egosocial developers

__all__ = (
    "EgoSocialError", "ManifestError", "UnknownSchemaError", "DanglingReferenceError",
    "MalformedRecordError", "InvalidDistributionError", "MissingDescriptorError",
    "MissingLabelError", "FitDegenerateError", "NumericalFailureError",
    "TrainingDivergedError", "InsufficientDataError", "InfeasibleSceneError",
    "UnknownReferenceError", "BundleError", "InvalidValueError",
    "ExtrapolationWarning", "SequenceLengthWarning",
)

__doc__ = """This module contains exceptions and warnings raised by egosocial.

Every data error derives from :py:class:`EgoSocialError` so callers (and the
command line) can separate bad input from programming mistakes, which surface as
the built-in :py:class:`ValueError` or :py:class:`TypeError`.
"""


class EgoSocialError(Exception):
    """Base class of every data error raised by egosocial."""
    pass


class ManifestError(EgoSocialError):
    """Exception raised when a dataset manifest:

    * cannot be read
    * is not valid JSON
    * is missing a mandatory field

    The message names the manifest path and, where known, the line.
    """
    pass


class UnknownSchemaError(ManifestError):
    """Exception raised when a manifest, series file or model bundle declares a
    ``schema_version`` this release does not understand.
    """
    pass


class DanglingReferenceError(ManifestError):
    """Exception raised when a manifest references a sequence, descriptor or
    calibration file that does not exist.
    """
    pass


class MalformedRecordError(EgoSocialError):
    """Exception raised when a line of a sequence file:

    * is not valid JSON
    * misses a field of a frame or face observation
    * breaks the strict ``frame_id`` ordering
    * carries an angle outside [-90, 90] degrees or a non-positive face height
    * carries an ``x_pos`` outside [0, 1] or an embedding that is not a unit-norm
      vector of finite numbers

    The message names the sequence and, where known, the frame.
    """
    pass


class InvalidValueError(EgoSocialError, ValueError):
    """Exception raised when a value computed from input data breaks a constraint,
    for example a face-set embedding that is not unit-norm or an event category
    other than formal or informal.

    It is also a :py:class:`ValueError` for callers that validate values directly.
    """
    pass


class InvalidDistributionError(EgoSocialError):
    """Exception raised when an expression probability vector or a pair of
    social trend values is not a valid probability distribution.
    """
    pass


class MissingDescriptorError(EgoSocialError):
    """Exception raised when a categorization series is requested for a sequence
    with a frame that has no global descriptor.
    """
    pass


class MissingLabelError(EgoSocialError):
    """Exception raised when a training or evaluation operation receives a
    sequence, prototype or series without ground truth.
    """
    pass


class FitDegenerateError(EgoSocialError):
    """Exception raised when a model cannot be fitted:

    * fewer than three calibration points, or duplicate heights only
    * constant data for PCA or the augmentation eigenbasis
    """
    pass


class NumericalFailureError(EgoSocialError):
    """Exception raised when a forward or backward pass produces a non-finite value."""
    pass


class TrainingDivergedError(NumericalFailureError):
    """Exception raised when the epoch loss becomes non-finite during training.

    :ivar report: Report of the epochs completed before the divergence.
    :vartype report: egosocial.lstm.TrainReport
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InsufficientDataError(EgoSocialError):
    """Exception raised when an operation needs more data than it received, for
    example stratified cross validation with fewer series per class than folds.
    """
    pass


class InfeasibleSceneError(EgoSocialError):
    """Exception raised when a synthetic scene specification cannot be realised."""
    pass


class UnknownReferenceError(EgoSocialError):
    """Exception raised when a report references a sequence, prototype or
    cluster that is not part of the data it is computed on.
    """
    pass


class BundleError(EgoSocialError):
    """Exception raised when a model bundle is malformed or used for the wrong task."""
    pass


class ExtrapolationWarning(UserWarning):
    """Warning emitted when the distance model is evaluated outside its fitted
    height range or yields a negative distance that is clamped to zero.
    """
    pass


class SequenceLengthWarning(UserWarning):
    """Warning emitted when a loaded sequence is shorter than 20 or longer than 60 frames."""
    pass
