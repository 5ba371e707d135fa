# Copyright 2024 egosocial developers

from .exceptions import (BundleError, DanglingReferenceError, EgoSocialError,
                         FitDegenerateError, InfeasibleSceneError, InvalidValueError,
                         InsufficientDataError, InvalidDistributionError,
                         MalformedRecordError, ManifestError,
                         MissingDescriptorError, MissingLabelError,
                         NumericalFailureError, TrainingDivergedError,
                         UnknownReferenceError, UnknownSchemaError)

__doc__ = """This module contains error definitions for egosocial.

Each entry is a ``(exception class, message template)`` pair turned into an
exception instance by :py:func:`make_exception`.
"""

# ingest
egosocial_err_manifest_unreadable = (ManifestError, "Cannot read manifest {path}: {reason}")
egosocial_err_manifest_not_json = (ManifestError, "{path}:{line}: invalid JSON - {reason}")
egosocial_err_manifest_missing_field = (ManifestError, "{path}:{line}: missing field '{field}'")
egosocial_err_manifest_bad_field = (ManifestError, "{path}:{line}: invalid value for '{field}' - {reason}")
egosocial_err_unknown_schema = (UnknownSchemaError, "{path}:{line}: unknown schema_version {version!r}")
egosocial_err_dangling_reference = (DanglingReferenceError, "{path}:{line}: referenced file does not exist: {target}")
egosocial_err_record_not_json = (MalformedRecordError, "{path}:{line}: invalid JSON in sequence {sequence_id!r} - {reason}")
egosocial_err_record_missing_field = (MalformedRecordError, "{path}:{line}: sequence {sequence_id!r} frame {frame_id}: missing field '{field}'")
egosocial_err_record_bad_value = (MalformedRecordError, "{path}:{line}: sequence {sequence_id!r} frame {frame_id}: {reason}")
egosocial_err_frame_order = (MalformedRecordError, "{path}:{line}: sequence {sequence_id!r}: frame {frame_id} does not follow frame {previous}")
egosocial_err_duplicate_track = (MalformedRecordError, "{path}:{line}: sequence {sequence_id!r} frame {frame_id}: track {track_id!r} observed twice")
egosocial_err_invalid_distribution = (InvalidDistributionError, "Sequence {sequence_id!r} frame {frame_id} track {track_id!r}: {reason}")
egosocial_err_invalid_probs = (InvalidDistributionError, "Invalid expression distribution: {reason}")
egosocial_err_descriptor_index = (MalformedRecordError, "{path}: descriptor index does not match {binary} - {reason}")
egosocial_err_calibration_line = (MalformedRecordError, "{path}:{line}: expected 'height_px distance_cm', got {text!r}")
egosocial_err_series_line = (MalformedRecordError, "{path}:{line}: invalid series record - {reason}")

# signals
egosocial_err_too_few_points = (FitDegenerateError, "Distance model needs at least 3 calibration points, got {count}")
egosocial_err_rank_deficient = (FitDegenerateError, "Distance model needs at least 3 distinct face heights, got {count}")
egosocial_err_non_positive_height = (InvalidValueError, "Face height must be > 0, got {height}")
egosocial_err_unknown_setting = (ValueError, "Unknown feature setting {setting!r}, expected one of {expected}")
egosocial_err_empty_prototype = (InvalidValueError, "Prototype {track_id!r} of sequence {sequence_id!r} has no observation")
egosocial_err_zero_descriptor = (InvalidValueError, "Cannot L2-normalize a zero descriptor")
egosocial_err_bad_quantization = (ValueError, "Quantization factor must be an integer >= 2, got {q}")
egosocial_err_pca_too_few_rows = (FitDegenerateError, "PCA needs at least 2 rows, got {count}")
egosocial_err_pca_constant = (FitDegenerateError, "PCA input has zero total variance")
egosocial_err_bad_fraction = (ValueError, "{name} must lie in {interval}, got {value}")
egosocial_err_missing_descriptor = (MissingDescriptorError, "Sequence {sequence_id!r} frame {frame_id} has no global descriptor")
egosocial_err_dim_mismatch = (InvalidValueError, "Dimension mismatch: expected {expected}, got {got}")
egosocial_err_not_a_subsetting = (ValueError, "Setting {target} cannot be derived from {source}")
egosocial_err_empty_series_set = (InsufficientDataError, "{operation} needs at least one series")

# lstm
egosocial_err_empty_series = (ValueError, "Time-series must contain at least one timestep")
egosocial_err_bad_label = (ValueError, "Label must be 0 or 1, got {label!r}")
egosocial_err_non_finite = (NumericalFailureError, "Non-finite value in {stage}")
egosocial_err_unlabeled_series = (MissingLabelError, "Series {origin} has no label")
egosocial_err_diverged = (TrainingDivergedError, "Training diverged at epoch {epoch}: loss is {loss}")
egosocial_err_bad_config = (ValueError, "Invalid network configuration: {reason}")
egosocial_err_dropout_needs_rng = (ValueError, "Train-mode forward with dropout needs a dropout_mask or an rng")
egosocial_err_not_enough_folds = (InsufficientDataError, "Class {label} has {count} series, stratified {folds}-fold CV needs at least {folds}")
egosocial_err_empty_evaluation = (InsufficientDataError, "Cannot evaluate on an empty series set")
egosocial_err_unknown_preset = (ValueError, "Unknown preset {name!r}, expected one of {expected}")

# augment
egosocial_err_eigen_too_few_frames = (FitDegenerateError, "Eigenbasis needs at least 2 frames, got {count}")
egosocial_err_eigen_zero_covariance = (FitDegenerateError, "Eigenbasis input has zero covariance")
egosocial_err_bad_frozen_dims = (ValueError, "Frozen dimensions {dims} outside series dimension {dim}")
egosocial_err_bad_multiplier = (ValueError, "Augmentation multiplier must be an integer >= 1, got {multiplier}")
egosocial_err_bad_sigma = (ValueError, "Noise sigma must be >= 0, got {sigma}")

# bundle
egosocial_err_bundle_unreadable = (BundleError, "Cannot read model bundle {path}: {reason}")
egosocial_err_bundle_wrong_task = (BundleError, "Model bundle {path} is a {found} model, {expected} required")
egosocial_err_bundle_missing = (BundleError, "Model bundle {path} misses '{field}'")
egosocial_err_bad_precision = (ValueError, "Precision must be 'double' or 'single', got {precision!r}")

# cluster
egosocial_err_faceset_empty = (InvalidValueError, "Face-set {faceset_id} has no embedding")
egosocial_err_faceset_not_unit = (InvalidValueError, "Face-set {faceset_id} embedding {index} is not unit-norm (norm {norm:.9f})")
egosocial_err_no_same_person_pair = (InsufficientDataError, "Cutoff calibration needs at least two face-sets of the same person")
egosocial_err_unknown_sequence = (UnknownReferenceError, "Cluster {cluster_id} references unknown sequence {sequence_id!r}")

# patterns
egosocial_err_days_below_one = (ValueError, "Observation days must be >= 1, got {days}")
egosocial_err_no_events = (InsufficientDataError, "{statistic} is undefined without events")
egosocial_err_bad_trend = (InvalidDistributionError, "Social trend ({formal}, {informal}) is not a distribution")
egosocial_err_bad_category = (InvalidValueError, "Category must be 'formal' or 'informal', got {category!r}")
egosocial_err_bad_event = (InvalidValueError, "Event {sequence_id!r}: {reason}")

# synth
egosocial_err_infeasible_geometry = (InfeasibleSceneError, "o-space radius 0 cannot host {count} interacting people")
egosocial_err_bad_scene = (InfeasibleSceneError, "Invalid scene: {reason}")
egosocial_err_bad_counts = (ValueError, "Sequence counts must be >= 1, got {counts}")

# cli
egosocial_err_bad_document = (MalformedRecordError, "{path}: invalid {kind} document - {reason}")

# pprint
egosocial_err_invalid_align = (ValueError, "Column alignment must be '<', '>' or '^', got {align!r}")
egosocial_err_invalid_column = (TypeError, "Column must be a Column or a tuple, got {column!r}")
egosocial_err_even_columns_required = (ValueError, "KeyValueTable needs an even number of non-padding columns")


def make_exception(arg, **kwarg):
    """Create an exception from a catalog entry.

    :param arg: ``(exception class, message template)`` pair from this module.
    :param kwarg: Values substituted into the template.
    :return: Exception instance, ready to be raised.
    """
    return arg[0](arg[1].format(**kwarg))


def is_data_error(exc):
    """Tell whether *exc* is caused by input data rather than by usage.

    Data errors are every :py:class:`EgoSocialError` and failures to read or
    write a file. Any other :py:class:`ValueError` or :py:class:`TypeError` comes
    from an invalid argument.
    """
    return isinstance(exc, (EgoSocialError, OSError))
