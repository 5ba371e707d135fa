# Copyright 2024 egosocial developers

import json
import logging
import os
import warnings

from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import *
from .errors import make_exception
from .exceptions import ExtrapolationWarning
from .ingest import EXPRESSIONS, Prototype, SequenceRecord, distribution_problem, extract_prototypes

__all__ = (
    "DETECTION_COLUMNS", "DETECTION_SETTINGS", "CATEGORIZATION_SETTINGS", "SETTINGS",
    "QuadraticDistanceModel", "PcaModel", "TimeSeries", "Provenance", "Standardization",
    "fit_distance_model", "estimate_distance", "estimate_distances", "dominant_expression",
    "build_detection_series", "build_detection_set", "quantize_descriptor", "fit_pca", "project",
    "reconstruct", "fit_descriptor_pca", "mean_expression", "build_categorization_series",
    "build_categorization_set", "select_setting", "task_of", "fit_standardization",
    "apply_standardization", "dump_series", "load_series",
)

__doc__ = """This module turns ingested observations into the multi-dimensional
time-series fed to the classifiers.

Detection series have one row per frame in the canonical column order
``(distance, roll, pitch, yaw, expression)``; each detection setting keeps a
subset of those columns. Categorization series hold the PCA projection of the
quantized global descriptor, followed for ``SIC3`` by the mean expression
distribution of the faces in the frame.

.. code-block:: python
   :caption: Example - detection series of every prototype

   from egosocial.ingest import load_calibration_table
   from egosocial.signals import fit_distance_model, build_detection_set

   model = fit_distance_model(load_calibration_table("corpus/calibration.txt"))
   series = build_detection_set(sequences, model, "SID4")
"""

logger = logging.getLogger(__name__)

DETECTION_COLUMNS = ("distance", "roll", "pitch", "yaw", "expression")
EXPRESSION_COLUMN = 4

DETECTION_SETTINGS = {
    "SID1": (0, 3),
    "SID2": (0, 1, 2, 3),
    "SID3": (0, 3, 4),
    "SID4": (0, 1, 2, 3, 4),
}
CATEGORIZATION_SETTINGS = ("SIC1", "SIC2", "SIC3")
SETTINGS = tuple(DETECTION_SETTINGS) + CATEGORIZATION_SETTINGS

SERIES_FORMAT = "egosocial-series"
SERIES_SCHEMA_VERSION = "1"


class QuadraticDistanceModel(NamedTuple):
    """Distance ``d = a*h**2 + b*h + c`` in cm from a face height ``h`` in pixels.

    ``residual`` is the RMS fit error in cm. Heights outside
    ``[height_min - margin, height_max + margin]`` are extrapolated.
    """
    a: float
    b: float
    c: float
    residual: float = 0.0
    height_min: float = 0.0
    height_max: float = float("inf")
    margin: float = 30.0

    @property
    def coefficients(self):
        return (self.a, self.b, self.c)


class PcaModel(NamedTuple):
    """Fitted principal component projection.

    ``components`` is ``output_dim x input_dim`` with orthonormal rows.
    """
    mean: np.ndarray
    components: np.ndarray
    variances: np.ndarray
    retained_variance: float
    threshold: float

    @property
    def input_dim(self):
        return self.components.shape[1]

    @property
    def output_dim(self):
        return self.components.shape[0]


class Provenance(NamedTuple):
    """Origin of an augmented series: source series id, copy index and seed."""
    source: str
    copy: int = 0
    seed: Optional[int] = None


class TimeSeries(NamedTuple):
    setting: str
    matrix: np.ndarray
    sequence_id: str
    track_id: Optional[str] = None
    label: Optional[bool] = None
    provenance: Optional[Provenance] = None

    @property
    def timesteps(self):
        return self.matrix.shape[0]

    @property
    def dim(self):
        return self.matrix.shape[1]

    @property
    def origin(self):
        if self.track_id is None:
            return self.sequence_id
        return f"{self.sequence_id}/{self.track_id}"


class Standardization(NamedTuple):
    """Per-column z-score statistics; ``columns`` lists the standardized columns."""
    columns: Tuple[int, ...]
    mean: Tuple[float, ...]
    scale: Tuple[float, ...]


def task_of(setting: str) -> str:
    """Return ``"detection"`` or ``"categorization"`` for a setting name."""
    if setting in DETECTION_SETTINGS:
        return "detection"
    if setting in CATEGORIZATION_SETTINGS:
        return "categorization"
    raise make_exception(egosocial_err_unknown_setting, setting=setting, expected=", ".join(SETTINGS))


# -- distance ------------------------------------------------------------------

def fit_distance_model(calibration: Iterable[Tuple[float, float]], margin: float = 30.0) -> QuadraticDistanceModel:
    """Least-squares fit of the quadratic height to distance relation.

    :param calibration: ``(height_px, distance_cm)`` pairs.
    :param margin: Extrapolation margin in pixels around the fitted height range.
    :rtype: :py:class:`QuadraticDistanceModel`
    :raises FitDegenerateError: Fewer than three points or fewer than three distinct heights.

    .. code-block:: python
       :caption: Example

       >>> fit_distance_model([(1, 1), (2, 4), (3, 9)]).coefficients
       (1.0, 0.0, 0.0)
    """
    points = np.asarray(list(calibration), dtype=float).reshape(-1, 2)
    if points.shape[0] < 3:
        raise make_exception(egosocial_err_too_few_points, count=points.shape[0])
    heights, distances = points[:, 0], points[:, 1]
    distinct = np.unique(heights).size
    if distinct < 3:
        raise make_exception(egosocial_err_rank_deficient, count=distinct)
    design = np.column_stack((heights ** 2, heights, np.ones_like(heights)))
    coeffs, _, _, _ = np.linalg.lstsq(design, distances, rcond=None)
    fitted = design @ coeffs
    residual = float(np.sqrt(np.mean((distances - fitted) ** 2)))
    a, b, c = (float(v) for v in coeffs)
    model = QuadraticDistanceModel(a=a, b=b, c=c, residual=residual,
                                   height_min=float(heights.min()), height_max=float(heights.max()),
                                   margin=float(margin))
    logger.info("Fitted distance model a=%g b=%g c=%g (rms %.3f cm over %d points)",
                a, b, c, residual, points.shape[0])
    return model


def _warn_extrapolation(message):
    warnings.warn(message, ExtrapolationWarning, stacklevel=3)


def estimate_distances(model: QuadraticDistanceModel, heights) -> np.ndarray:
    """Vectorized :py:func:`estimate_distance`; at most one warning per call."""
    heights = np.asarray(heights, dtype=float)
    if np.any(heights <= 0) or not np.all(np.isfinite(heights)):
        bad = heights[(heights <= 0) | ~np.isfinite(heights)].flat[0]
        raise make_exception(egosocial_err_non_positive_height, height=bad)
    distances = model.a * heights ** 2 + model.b * heights + model.c
    low, high = model.height_min - model.margin, model.height_max + model.margin
    outside = (heights < low) | (heights > high)
    negative = distances < 0
    if np.any(outside) or np.any(negative):
        _warn_extrapolation(
            f"{int(np.count_nonzero(outside))} face height(s) outside the fitted range [{low:g}, {high:g}] px, "
            f"{int(np.count_nonzero(negative))} negative distance(s) clamped to 0")
    return np.maximum(distances, 0.0)


def estimate_distance(model: QuadraticDistanceModel, face_height_px: float) -> float:
    """Distance in cm of a face of the given height.

    Negative results are clamped to 0; both clamping and heights outside the
    fitted range emit :py:class:`~egosocial.exceptions.ExtrapolationWarning`.

    :raises ValueError: The height is not positive.
    """
    return float(estimate_distances(model, [face_height_px])[0])


def dominant_expression(expression_probs) -> int:
    """Index of the most probable expression, 1 (neutral) to 8 (contempt).

    Ties resolve to the lowest index.
    """
    problem = distribution_problem(expression_probs)
    if problem is not None:
        raise make_exception(egosocial_err_invalid_probs, reason=problem)
    return int(np.argmax(np.asarray(expression_probs, dtype=float))) + 1


def _check_setting(setting, allowed):
    if setting not in allowed:
        raise make_exception(egosocial_err_unknown_setting, setting=setting, expected=", ".join(allowed))


def build_detection_series(prototype: Prototype, model: QuadraticDistanceModel, setting: str = "SID4") -> TimeSeries:
    """Build the detection series of one prototype.

    Frames where the person is not visible repeat the last observed row; frames
    before the first observation use the first observed row.

    :param prototype: Prototype from :py:func:`egosocial.ingest.extract_prototypes`.
    :param model: Fitted distance model.
    :param setting: One of ``SID1`` to ``SID4``.
    :rtype: :py:class:`TimeSeries`
    :raises ValueError: The prototype has no observation or the setting is unknown.
    """
    _check_setting(setting, tuple(DETECTION_SETTINGS))
    observed = [o for o in prototype.observations if o is not None]
    if not observed:
        raise make_exception(egosocial_err_empty_prototype, track_id=prototype.track_id,
                             sequence_id=prototype.sequence_id)
    distances = estimate_distances(model, [o.face_height for o in observed])
    rows = np.array([
        (d, o.roll, o.pitch, o.yaw, float(dominant_expression(o.expression_probs)))
        for d, o in zip(distances, observed)
    ])
    positions = np.cumsum([o is not None for o in prototype.observations]) - 1
    matrix = rows[np.maximum(positions, 0)]
    return TimeSeries(
        setting=setting,
        matrix=matrix[:, DETECTION_SETTINGS[setting]],
        sequence_id=prototype.sequence_id,
        track_id=prototype.track_id,
        label=prototype.interacting,
    )


def _require_label(series, require_labels):
    if require_labels and series.label is None:
        raise make_exception(egosocial_err_unlabeled_series, origin=series.origin)
    return series


def build_detection_set(sequences: Iterable[SequenceRecord], model: QuadraticDistanceModel,
                        setting: str = "SID4", require_labels: bool = False) -> List[TimeSeries]:
    """Detection series of every prototype of every sequence, in sequence then track order."""
    result = [
        _require_label(build_detection_series(p, model, setting), require_labels)
        for seq in sequences for p in extract_prototypes(seq)
    ]
    logger.info("Built %d %s detection series", len(result), setting)
    return result


# -- categorization ---------------------------------------------------------------

def quantize_descriptor(f, q: int) -> np.ndarray:
    """Quantize an L2-normalized descriptor: ``floor(q * f / |f|)`` per component.

    :param f: Descriptor; normalized here.
    :param q: Quantization factor, an integer >= 2. Smaller factors give sparser words.
    :rtype: numpy.ndarray of int64
    :raises ValueError: Zero vector or invalid factor.
    """
    if isinstance(q, bool) or not isinstance(q, (int, np.integer)) or q < 2:
        raise make_exception(egosocial_err_bad_quantization, q=q)
    f = np.asarray(f, dtype=float)
    norm = np.linalg.norm(f)
    if norm == 0.0 or not np.isfinite(norm):
        raise make_exception(egosocial_err_zero_descriptor)
    return np.floor(q * (f / norm)).astype(np.int64)


def fit_pca(rows, retained_variance: float = 0.95) -> PcaModel:
    """Fit a PCA keeping the fewest components whose cumulative variance reaches
    *retained_variance* of the total.

    Each component is oriented so that its largest-magnitude entry is positive.

    :param rows: ``n x d`` data matrix, ``n >= 2``.
    :param retained_variance: Fraction in (0, 1].
    :rtype: :py:class:`PcaModel`
    :raises FitDegenerateError: Fewer than two rows or zero total variance.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise make_exception(egosocial_err_pca_too_few_rows, count=rows.shape[0] if rows.ndim else 0)
    if not 0.0 < retained_variance <= 1.0:
        raise make_exception(egosocial_err_bad_fraction, name="retained_variance", interval="(0, 1]",
                             value=retained_variance)
    mean = rows.mean(axis=0)
    centered = rows - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variances = s ** 2 / (rows.shape[0] - 1)
    total = variances.sum()
    # constant columns leave only round-off after centering
    if total <= (np.finfo(float).eps * max(1.0, float(np.abs(rows).max()))) ** 2 * rows.shape[1]:
        raise make_exception(egosocial_err_pca_constant)
    cumulative = np.cumsum(variances) / total
    k = int(np.searchsorted(cumulative, retained_variance - 1e-12)) + 1
    k = min(k, len(variances))
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    model = PcaModel(mean=mean, components=components, variances=variances[:k],
                     retained_variance=float(cumulative[k - 1]), threshold=float(retained_variance))
    logger.info("PCA keeps %d of %d dimensions (%.4f of the variance)", k, rows.shape[1], model.retained_variance)
    return model


def project(pca: PcaModel, rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.shape[-1] != pca.input_dim:
        raise make_exception(egosocial_err_dim_mismatch, expected=pca.input_dim, got=rows.shape[-1])
    return (rows - pca.mean) @ pca.components.T


def reconstruct(pca: PcaModel, coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    if coords.shape[-1] != pca.output_dim:
        raise make_exception(egosocial_err_dim_mismatch, expected=pca.output_dim, got=coords.shape[-1])
    return coords @ pca.components + pca.mean


def _descriptor_words(sequence: SequenceRecord, q: int) -> np.ndarray:
    words = []
    for frame in sequence.frames:
        if frame.descriptor is None:
            raise make_exception(egosocial_err_missing_descriptor, sequence_id=sequence.sequence_id,
                                 frame_id=frame.frame_id)
        words.append(quantize_descriptor(frame.descriptor, q))
    return np.array(words, dtype=float)


def fit_descriptor_pca(sequences: Iterable[SequenceRecord], q: int = 15, retained_variance: float = 0.95) -> PcaModel:
    """Fit the descriptor PCA on the quantized words of every frame of *sequences*."""
    rows = [_descriptor_words(seq, q) for seq in sequences]
    if not rows:
        raise make_exception(egosocial_err_pca_too_few_rows, count=0)
    return fit_pca(np.vstack(rows), retained_variance)


def mean_expression(observations: Sequence) -> np.ndarray:
    """Mean expression distribution of the faces of one frame.

    A frame without faces maps to the neutral one-hot vector.
    """
    if not observations:
        neutral = np.zeros(len(EXPRESSIONS))
        neutral[0] = 1.0
        return neutral
    return np.mean([np.asarray(o.expression_probs, dtype=float) for o in observations], axis=0)


def build_categorization_series(sequence: SequenceRecord, pca: PcaModel, q: int = 15,
                                setting: str = "SIC3") -> TimeSeries:
    """Build the categorization series of one sequence.

    :param sequence: Sequence whose every frame carries a global descriptor.
    :param pca: Descriptor PCA from :py:func:`fit_descriptor_pca`.
    :param q: Quantization factor used when fitting *pca*.
    :param setting: ``SIC1``/``SIC2`` (descriptor only) or ``SIC3`` (plus mean expression).
    :rtype: :py:class:`TimeSeries`
    :raises MissingDescriptorError: A frame has no descriptor.
    """
    _check_setting(setting, CATEGORIZATION_SETTINGS)
    matrix = project(pca, _descriptor_words(sequence, q))
    if setting == "SIC3":
        expressions = np.array([mean_expression(f.observations) for f in sequence.frames])
        matrix = np.hstack((matrix, expressions))
    labels = sequence.labels
    label = None
    if labels is not None and labels.category is not None:
        label = labels.category == "formal"
    return TimeSeries(setting=setting, matrix=matrix, sequence_id=sequence.sequence_id, label=label)


def build_categorization_set(sequences: Iterable[SequenceRecord], pca: PcaModel, q: int = 15,
                             setting: str = "SIC3", require_labels: bool = False) -> List[TimeSeries]:
    result = [
        _require_label(build_categorization_series(seq, pca, q, setting), require_labels)
        for seq in sequences
    ]
    logger.info("Built %d %s categorization series", len(result), setting)
    return result


def select_setting(series: TimeSeries, setting: str) -> TimeSeries:
    """Derive a sub-setting by column selection.

    ``SID4`` yields every detection setting, any detection setting yields the
    settings whose columns it holds, and ``SIC3`` yields ``SIC1``/``SIC2`` by
    dropping the expression columns.

    :raises ValueError: *setting* cannot be derived from ``series.setting``.
    """
    if setting == series.setting:
        return series
    source = series.setting
    if source in DETECTION_SETTINGS and setting in DETECTION_SETTINGS:
        source_columns = DETECTION_SETTINGS[source]
        if not set(DETECTION_SETTINGS[setting]) <= set(source_columns):
            raise make_exception(egosocial_err_not_a_subsetting, target=setting, source=source)
        picks = [source_columns.index(c) for c in DETECTION_SETTINGS[setting]]
        return series._replace(setting=setting, matrix=series.matrix[:, picks])
    if source in CATEGORIZATION_SETTINGS and setting in CATEGORIZATION_SETTINGS and setting != "SIC3":
        if source == "SIC3":
            return series._replace(setting=setting, matrix=series.matrix[:, :-len(EXPRESSIONS)])
        return series._replace(setting=setting)
    raise make_exception(egosocial_err_not_a_subsetting, target=setting, source=source)


# -- standardization --------------------------------------------------------------

def _standardized_columns(setting: str, dim: int) -> Tuple[int, ...]:
    if setting in DETECTION_SETTINGS:
        return tuple(i for i, c in enumerate(DETECTION_SETTINGS[setting]) if c != EXPRESSION_COLUMN)
    if setting == "SIC3":
        return tuple(range(dim - len(EXPRESSIONS)))
    return tuple(range(dim))


def fit_standardization(series_set: Sequence[TimeSeries]) -> Standardization:
    """Column statistics of every frame of *series_set*.

    Expression columns (the dominant index or the mean distribution) are left untouched.
    """
    if not series_set:
        raise make_exception(egosocial_err_empty_series_set, operation="Standardization")
    setting = series_set[0].setting
    stacked = np.vstack([s.matrix for s in series_set])
    columns = _standardized_columns(setting, stacked.shape[1])
    mean = stacked[:, columns].mean(axis=0)
    scale = stacked[:, columns].std(axis=0)
    scale[scale == 0.0] = 1.0
    return Standardization(columns=columns, mean=tuple(float(v) for v in mean),
                           scale=tuple(float(v) for v in scale))


def apply_standardization(stats: Optional[Standardization], matrix: np.ndarray) -> np.ndarray:
    if stats is None or not stats.columns:
        return matrix
    result = np.array(matrix, dtype=float, copy=True)
    columns = list(stats.columns)
    result[:, columns] = (result[:, columns] - np.asarray(stats.mean)) / np.asarray(stats.scale)
    return result


# -- series files -------------------------------------------------------------------

def dump_series(series_set: Iterable[TimeSeries], path) -> int:
    """Write series as JSON lines after a format header; returns the count written."""
    count = 0
    with open(os.fspath(path), "w", encoding="utf-8") as f:
        f.write(json.dumps({"format": SERIES_FORMAT, "schema_version": SERIES_SCHEMA_VERSION}, sort_keys=True))
        f.write("\n")
        for s in series_set:
            doc = {
                "setting": s.setting,
                "sequence_id": s.sequence_id,
                "track_id": s.track_id,
                "label": s.label,
                "matrix": np.asarray(s.matrix, dtype=float).tolist(),
                "provenance": None if s.provenance is None else s.provenance._asdict(),
            }
            f.write(json.dumps(doc, sort_keys=True, separators=(",", ":")))
            f.write("\n")
            count += 1
    return count


def load_series(path) -> List[TimeSeries]:
    """Read a file written by :py:func:`dump_series`.

    :raises UnknownSchemaError: The header declares another format version.
    :raises MalformedRecordError: A record is not a valid series.
    """
    path = os.fspath(path)
    result = []
    with open(path, "r", encoding="utf-8") as f:
        for number, text in enumerate(f, start=1):
            if not text.strip():
                continue
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as e:
                raise make_exception(egosocial_err_series_line, path=path, line=number, reason=e.msg) from None
            if number == 1:
                if doc.get("format") != SERIES_FORMAT:
                    raise make_exception(egosocial_err_series_line, path=path, line=number,
                                         reason="missing series format header")
                if str(doc.get("schema_version")) != SERIES_SCHEMA_VERSION:
                    raise make_exception(egosocial_err_unknown_schema, path=path, line=number,
                                         version=doc.get("schema_version"))
                continue
            try:
                matrix = np.asarray(doc["matrix"], dtype=float)
                setting = doc["setting"]
                provenance = doc.get("provenance")
                series = TimeSeries(
                    setting=setting,
                    matrix=matrix,
                    sequence_id=str(doc["sequence_id"]),
                    track_id=doc.get("track_id"),
                    label=doc.get("label"),
                    provenance=Provenance(**provenance) if provenance is not None else None,
                )
            except (KeyError, TypeError, ValueError) as e:
                raise make_exception(egosocial_err_series_line, path=path, line=number, reason=e) from None
            if setting not in SETTINGS or matrix.ndim != 2 or matrix.shape[0] < 1:
                raise make_exception(egosocial_err_series_line, path=path, line=number,
                                     reason=f"setting {setting!r} with matrix shape {matrix.shape}")
            if setting in DETECTION_SETTINGS and matrix.shape[1] != len(DETECTION_SETTINGS[setting]):
                raise make_exception(egosocial_err_series_line, path=path, line=number,
                                     reason=f"{setting} needs {len(DETECTION_SETTINGS[setting])} columns")
            result.append(series)
    return result
