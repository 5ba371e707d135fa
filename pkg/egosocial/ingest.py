# Copyright 2024 egosocial developers

import json
import logging
import math
import os
import re
import warnings

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from .errors import *
from .errors import make_exception
from .exceptions import SequenceLengthWarning

__all__ = (
    "EXPRESSIONS", "SCHEMA_VERSION", "FrameObservation", "FrameEntry", "SequenceLabels",
    "SequenceRecord", "Prototype", "SequenceFile", "DatasetManifest", "DatasetSummary",
    "load_manifest", "dump_manifest", "iter_sequences", "load_sequences", "load_sequence",
    "dump_sequence", "extract_prototypes", "dataset_summary", "distribution_problem",
    "load_calibration_table", "dump_calibration_table",
)

__doc__ = """This module contains the on-disk dataset format: a JSON manifest, one
JSON-lines file per sequence (header line, then one frame per line) and an
optional sidecar of little-endian 32-bit float global descriptors with a JSON
index mapping rows to frame ids.

.. code-block:: python
   :caption: Example - load a dataset and count prototypes

   from egosocial.ingest import load_manifest, load_sequences, extract_prototypes

   manifest = load_manifest("corpus/manifest.json")
   sequences = load_sequences(manifest)
   prototypes = [p for s in sequences for p in extract_prototypes(s)]
"""

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
SUPPORTED_SCHEMAS = ("1",)

EXPRESSIONS = ("neutral", "happiness", "surprise", "sadness", "anger", "disgust", "fear", "contempt")
CATEGORIES = ("formal", "informal")
PROBABILITY_TOLERANCE = 1e-6
UNIT_NORM_TOLERANCE = 1e-6
DEFAULT_FRAME_INTERVAL_S = 30.0
NOMINAL_LENGTH = (20, 60)


class FrameObservation(NamedTuple):
    """One tracked face in one frame.

    Angles are degrees in [-90, 90]: ``roll`` is the rotation about the camera
    axis, ``pitch`` the nod, ``yaw`` the head turn (0 when facing the camera).
    ``x_pos`` is carried for completeness and never used by a classifier.
    """
    frame_id: int
    track_id: str
    face_height: float
    x_pos: float
    yaw: float
    pitch: float
    roll: float
    expression_probs: Tuple[float, ...]
    embedding: Optional[Tuple[float, ...]] = None


class FrameEntry(NamedTuple):
    frame_id: int
    observations: Tuple[FrameObservation, ...] = ()
    descriptor: Optional[np.ndarray] = None
    timestamp_s: Optional[float] = None


class SequenceLabels(NamedTuple):
    """Ground truth attached to a sequence.

    ``interacting`` maps track ids to the interacting flag, ``persons`` maps track
    ids to a person identity used to calibrate face-set clustering.
    """
    interacting: Mapping[str, bool]
    category: Optional[str] = None
    persons: Mapping[str, str] = {}


class SequenceRecord(NamedTuple):
    """One candidate social event."""
    sequence_id: str
    day_index: int
    frames: Tuple[FrameEntry, ...]
    frame_interval_s: float = DEFAULT_FRAME_INTERVAL_S
    labels: Optional[SequenceLabels] = None

    @property
    def frame_count(self):
        return len(self.frames)

    def track_ids(self) -> List[str]:
        """Distinct track ids in order of first appearance."""
        seen = {}
        for frame in self.frames:
            for obs in frame.observations:
                seen.setdefault(obs.track_id, None)
        return list(seen)


class Prototype(NamedTuple):
    """The observations of one tracked person in one sequence.

    ``observations`` is aligned with ``frame_ids`` (every frame of the
    sequence); frames where the person is not visible hold ``None``.
    """
    sequence_id: str
    track_id: str
    frame_ids: Tuple[int, ...]
    observations: Tuple[Optional[FrameObservation], ...]
    interacting: Optional[bool] = None
    person: Optional[str] = None

    @property
    def observed_count(self):
        return sum(1 for o in self.observations if o is not None)


class SequenceFile(NamedTuple):
    records: str
    descriptors: Optional[str] = None
    descriptor_index: Optional[str] = None


class DatasetManifest(NamedTuple):
    """Fully resolved manifest; every path is absolute."""
    path: str
    schema_version: str
    sequences: Tuple[SequenceFile, ...]
    observation_days: Optional[int] = None
    calibration: Optional[str] = None
    settings: Mapping[str, str] = {}


class DatasetSummary(NamedTuple):
    sequences: int
    prototypes: int
    interacting: int
    formal: int
    informal: int
    persons: int
    days: int


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _line_of(text: str, needle: str) -> int:
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return 1


def distribution_problem(probs, size=len(EXPRESSIONS), tolerance=PROBABILITY_TOLERANCE) -> Optional[str]:
    """Describe why *probs* is not a probability distribution, or return None."""
    values = np.asarray(probs, dtype=float)
    if values.shape != (size,):
        return f"expected {size} probabilities, got shape {values.shape}"
    if not np.all(np.isfinite(values)):
        return "non-finite probability"
    if np.any(values < 0.0) or np.any(values > 1.0):
        return "probability outside [0, 1]"
    total = float(values.sum())
    if abs(total - 1.0) > tolerance:
        return f"probabilities sum to {total!r}"
    return None


# -- manifest -----------------------------------------------------------------

def load_manifest(path) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Relative paths in the manifest are resolved against the manifest directory.

    :param path: Path of the manifest JSON document.
    :type path: str, os.PathLike
    :return: Manifest with absolute paths.
    :rtype: :py:class:`DatasetManifest`
    :raises ManifestError: The file cannot be read, is not JSON or misses a field.
    :raises UnknownSchemaError: ``schema_version`` is not recognised.
    :raises DanglingReferenceError: A referenced file does not exist.
    """
    path = os.path.abspath(os.fspath(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise make_exception(egosocial_err_manifest_unreadable, path=path, reason=e.strerror) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise make_exception(egosocial_err_manifest_not_json, path=path, line=e.lineno, reason=e.msg) from None
    if not isinstance(doc, dict):
        raise make_exception(egosocial_err_manifest_bad_field, path=path, line=1,
                             field="<root>", reason="expected an object")

    def require(field):
        if field not in doc:
            raise make_exception(egosocial_err_manifest_missing_field, path=path, line=1, field=field)
        return doc[field]

    version = str(require("schema_version"))
    if version not in SUPPORTED_SCHEMAS:
        raise make_exception(egosocial_err_unknown_schema, path=path,
                             line=_line_of(text, '"schema_version"'), version=version)

    base = os.path.dirname(path)

    def resolve(ref):
        if not isinstance(ref, str) or not ref:
            raise make_exception(egosocial_err_manifest_bad_field, path=path, line=_line_of(text, str(ref)),
                                 field="path", reason=f"expected a non-empty string, got {ref!r}")
        target = os.path.normpath(os.path.join(base, ref))
        if not os.path.exists(target):
            raise make_exception(egosocial_err_dangling_reference, path=path,
                                 line=_line_of(text, json.dumps(ref)[1:-1]), target=target)
        return target

    entries = require("sequences")
    if not isinstance(entries, list):
        raise make_exception(egosocial_err_manifest_bad_field, path=path, line=_line_of(text, '"sequences"'),
                             field="sequences", reason="expected a list")
    sequences = []
    for entry in entries:
        if isinstance(entry, str):
            entry = {"records": entry}
        if not isinstance(entry, dict) or "records" not in entry:
            raise make_exception(egosocial_err_manifest_missing_field, path=path,
                                 line=_line_of(text, '"sequences"'), field="records")
        descriptors = entry.get("descriptors")
        index = entry.get("descriptor_index")
        if (descriptors is None) != (index is None):
            raise make_exception(egosocial_err_manifest_bad_field, path=path,
                                 line=_line_of(text, str(descriptors or index)), field="descriptors",
                                 reason="descriptors and descriptor_index go together")
        sequences.append(SequenceFile(
            records=resolve(entry["records"]),
            descriptors=resolve(descriptors) if descriptors is not None else None,
            descriptor_index=resolve(index) if index is not None else None,
        ))

    days = doc.get("observation_days")
    if days is not None and (not isinstance(days, int) or isinstance(days, bool) or days < 1):
        raise make_exception(egosocial_err_manifest_bad_field, path=path,
                             line=_line_of(text, '"observation_days"'), field="observation_days",
                             reason="expected an integer >= 1")
    calibration = doc.get("calibration")
    settings = doc.get("settings", {})
    if not isinstance(settings, dict):
        raise make_exception(egosocial_err_manifest_bad_field, path=path, line=_line_of(text, '"settings"'),
                             field="settings", reason="expected an object")

    manifest = DatasetManifest(
        path=path,
        schema_version=version,
        sequences=tuple(sequences),
        observation_days=days,
        calibration=resolve(calibration) if calibration is not None else None,
        settings=dict(settings),
    )
    logger.debug("Loaded manifest %s with %d sequence files", path, len(sequences))
    return manifest


def dump_manifest(manifest: DatasetManifest, path=None) -> str:
    """Write *manifest* in canonical form; paths are stored relative to the manifest.

    :param manifest: Manifest to write.
    :param path: Destination, defaults to ``manifest.path``.
    :return: Absolute path written.
    """
    path = os.path.abspath(os.fspath(path or manifest.path))
    base = os.path.dirname(path)

    def rel(target):
        return os.path.relpath(target, base).replace(os.sep, "/")

    entries = []
    for seq in manifest.sequences:
        entry = {"records": rel(seq.records)}
        if seq.descriptors is not None:
            entry["descriptors"] = rel(seq.descriptors)
            entry["descriptor_index"] = rel(seq.descriptor_index)
        entries.append(entry)
    doc = {
        "schema_version": manifest.schema_version,
        "sequences": entries,
        "settings": dict(manifest.settings),
    }
    if manifest.observation_days is not None:
        doc["observation_days"] = manifest.observation_days
    if manifest.calibration is not None:
        doc["calibration"] = rel(manifest.calibration)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(doc, sort_keys=True, indent=1))
        f.write("\n")
    return path


# -- sequences ----------------------------------------------------------------

def _load_descriptor_sidecar(binary: str, index_path: str) -> Dict[int, np.ndarray]:
    try:
        with open(index_path, "r", encoding="utf-8") as f:
            index = json.load(f)
        dim = int(index["dim"])
        frame_ids = [int(i) for i in index["frame_ids"]]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise make_exception(egosocial_err_descriptor_index, path=index_path, binary=binary, reason=e) from None
    data = np.fromfile(binary, dtype="<f4")
    if dim <= 0 or data.size != dim * len(frame_ids):
        raise make_exception(egosocial_err_descriptor_index, path=index_path, binary=binary,
                             reason=f"{data.size} floats for {len(frame_ids)} rows of {dim}")
    rows = data.reshape(len(frame_ids), dim)
    return {frame_id: rows[row] for row, frame_id in enumerate(frame_ids)}


def _parse_labels(raw, ctx) -> Optional[SequenceLabels]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise make_exception(egosocial_err_record_bad_value, frame_id="-", reason="labels must be an object", **ctx)
    interacting = raw.get("interacting", {}) or {}
    persons = raw.get("persons", {}) or {}
    category = raw.get("category")
    if category is not None and category not in CATEGORIES:
        raise make_exception(egosocial_err_record_bad_value, frame_id="-",
                             reason=f"unknown category {category!r}", **ctx)
    if not isinstance(interacting, dict) or not all(isinstance(v, bool) for v in interacting.values()):
        raise make_exception(egosocial_err_record_bad_value, frame_id="-",
                             reason="labels.interacting must map track ids to booleans", **ctx)
    if not isinstance(persons, dict) or not all(isinstance(v, (str, int)) and not isinstance(v, bool)
                                                for v in persons.values()):
        raise make_exception(egosocial_err_record_bad_value, frame_id="-",
                             reason="labels.persons must map track ids to person ids", **ctx)
    return SequenceLabels(
        interacting={str(k): v for k, v in interacting.items()},
        category=category,
        persons={str(k): str(v) for k, v in persons.items()},
    )


def _parse_embedding(raw, frame_id, track_id, ctx) -> Tuple[float, ...]:
    if (not isinstance(raw, list) or not raw
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw)):
        raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                             reason=f"track {track_id!r}: embedding must be a non-empty list of numbers", **ctx)
    vector = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(vector)):
        raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                             reason=f"track {track_id!r}: embedding holds a non-finite value", **ctx)
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
        raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                             reason=f"track {track_id!r}: embedding is not unit-norm (norm {norm:.9f})", **ctx)
    return tuple(float(v) for v in vector)


def _parse_face(raw, frame_id, ctx) -> FrameObservation:
    def field(name):
        if name not in raw:
            raise make_exception(egosocial_err_record_missing_field, frame_id=frame_id, field=name, **ctx)
        return raw[name]

    def number(name):
        value = field(name)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                                 reason=f"'{name}' must be a finite number", **ctx)
        return float(value)

    track_id = str(field("track_id"))
    height = number("face_height")
    if height <= 0:
        raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                             reason=f"face_height must be > 0, got {height}", **ctx)
    angles = {}
    for name in ("yaw", "pitch", "roll"):
        angles[name] = number(name)
        if not -90.0 <= angles[name] <= 90.0:
            raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                                 reason=f"{name} {angles[name]} outside [-90, 90]", **ctx)
    probs = field("expression_probs")
    problem = distribution_problem(probs) if isinstance(probs, list) else "expression_probs must be a list"
    if problem is not None:
        raise make_exception(egosocial_err_invalid_distribution, sequence_id=ctx["sequence_id"],
                             frame_id=frame_id, track_id=track_id, reason=problem)
    x_pos = number("x_pos") if "x_pos" in raw else 0.5
    if not 0.0 <= x_pos <= 1.0:
        raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                             reason=f"x_pos {x_pos} outside [0, 1]", **ctx)
    embedding = raw.get("embedding")
    if embedding is not None:
        embedding = _parse_embedding(embedding, frame_id, track_id, ctx)
    return FrameObservation(
        frame_id=frame_id,
        track_id=track_id,
        face_height=height,
        x_pos=x_pos,
        yaw=angles["yaw"],
        pitch=angles["pitch"],
        roll=angles["roll"],
        expression_probs=tuple(float(p) for p in probs),
        embedding=embedding,
    )


def load_sequence(entry: SequenceFile) -> SequenceRecord:
    """Load and validate one sequence file (and its descriptor sidecar).

    :raises MalformedRecordError: A line is malformed or frames are out of order.
    :raises InvalidDistributionError: An expression vector is not a distribution.
    """
    path = entry.records
    sidecar = {}
    if entry.descriptors is not None:
        sidecar = _load_descriptor_sidecar(entry.descriptors, entry.descriptor_index)

    header = None
    frames: List[FrameEntry] = []
    ctx = {"path": path, "line": 0, "sequence_id": "?"}
    with open(path, "r", encoding="utf-8") as f:
        for number, text in enumerate(f, start=1):
            ctx["line"] = number
            if not text.strip():
                continue
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as e:
                raise make_exception(egosocial_err_record_not_json, reason=e.msg, **ctx) from None
            if not isinstance(raw, dict):
                raise make_exception(egosocial_err_record_not_json, reason="expected an object", **ctx)
            if header is None:
                if "sequence_id" not in raw:
                    raise make_exception(egosocial_err_record_missing_field, frame_id="-",
                                         field="sequence_id", **ctx)
                header = raw
                ctx["sequence_id"] = str(raw["sequence_id"])
                labels = _parse_labels(raw.get("labels"), ctx)
                continue

            if "frame_id" not in raw:
                raise make_exception(egosocial_err_record_missing_field, frame_id="?", field="frame_id", **ctx)
            frame_id = raw["frame_id"]
            if isinstance(frame_id, bool) or not isinstance(frame_id, int):
                raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                                     reason="frame_id must be an integer", **ctx)
            if frames and frame_id <= frames[-1].frame_id:
                raise make_exception(egosocial_err_frame_order, frame_id=frame_id,
                                     previous=frames[-1].frame_id, **ctx)
            faces = raw.get("faces", [])
            observations = []
            seen_tracks = set()
            for face in faces:
                if not isinstance(face, dict):
                    raise make_exception(egosocial_err_record_bad_value, frame_id=frame_id,
                                         reason="face entries must be objects", **ctx)
                obs = _parse_face(face, frame_id, ctx)
                if obs.track_id in seen_tracks:
                    raise make_exception(egosocial_err_duplicate_track, frame_id=frame_id,
                                         track_id=obs.track_id, **ctx)
                seen_tracks.add(obs.track_id)
                observations.append(obs)
            descriptor = raw.get("descriptor")
            if descriptor is not None:
                descriptor = np.asarray(descriptor, dtype=float)
            else:
                descriptor = sidecar.get(frame_id)
            timestamp = raw.get("timestamp_s")
            frames.append(FrameEntry(
                frame_id=frame_id,
                observations=tuple(observations),
                descriptor=descriptor,
                timestamp_s=float(timestamp) if timestamp is not None else None,
            ))

    if header is None:
        raise make_exception(egosocial_err_record_missing_field, frame_id="-", field="sequence_id", **ctx)

    record = SequenceRecord(
        sequence_id=ctx["sequence_id"],
        day_index=int(header.get("day_index", 0)),
        frames=tuple(frames),
        frame_interval_s=float(header.get("frame_interval_s", DEFAULT_FRAME_INTERVAL_S)),
        labels=labels,
    )
    low, high = NOMINAL_LENGTH
    if not low <= record.frame_count <= high:
        message = f"Sequence {record.sequence_id!r} has {record.frame_count} frames, outside [{low}, {high}]"
        warnings.warn(message, SequenceLengthWarning, stacklevel=2)
    return record


def iter_sequences(manifest: DatasetManifest) -> Iterator[SequenceRecord]:
    """Lazily load the sequences of *manifest* in manifest order."""
    for entry in manifest.sequences:
        yield load_sequence(entry)


def load_sequences(manifest: DatasetManifest, threads: int = 1) -> List[SequenceRecord]:
    """Load every sequence of *manifest*.

    The result is sorted by ``sequence_id`` so it does not depend on the order
    in which files are listed or loaded.

    :param manifest: Validated manifest.
    :param threads: Number of files loaded concurrently.
    :rtype: list of :py:class:`SequenceRecord`
    """
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(load_sequence, manifest.sequences))
    else:
        records = list(iter_sequences(manifest))
    records.sort(key=lambda r: r.sequence_id)
    logger.info("Loaded %d sequences from %s", len(records), manifest.path)
    return records


def _face_doc(obs: FrameObservation) -> dict:
    doc = {
        "track_id": obs.track_id,
        "face_height": obs.face_height,
        "x_pos": obs.x_pos,
        "yaw": obs.yaw,
        "pitch": obs.pitch,
        "roll": obs.roll,
        "expression_probs": list(obs.expression_probs),
    }
    if obs.embedding is not None:
        doc["embedding"] = [float(v) for v in obs.embedding]
    return doc


def dump_sequence(record: SequenceRecord, directory, sidecar: bool = True) -> SequenceFile:
    """Write *record* in canonical form into *directory*.

    Files are named after the sequence id: ``<id>.jsonl`` and, when descriptors
    exist and *sidecar* is set, ``<id>.f32`` plus ``<id>.idx.json``.

    :return: Entry to list in a manifest.
    :rtype: :py:class:`SequenceFile`
    """
    directory = os.path.abspath(os.fspath(directory))
    os.makedirs(directory, exist_ok=True)
    stem = os.path.join(directory, record.sequence_id)
    header = {
        "sequence_id": record.sequence_id,
        "day_index": record.day_index,
        "frame_interval_s": record.frame_interval_s,
        "labels": None if record.labels is None else {
            "interacting": dict(record.labels.interacting),
            "category": record.labels.category,
            "persons": dict(record.labels.persons),
        },
    }
    with_descriptors = [f for f in record.frames if f.descriptor is not None]
    dim = len(with_descriptors[0].descriptor) if with_descriptors else 0
    for frame in with_descriptors:
        if len(frame.descriptor) != dim:
            raise make_exception(egosocial_err_dim_mismatch, expected=dim, got=len(frame.descriptor))
    use_sidecar = sidecar and bool(with_descriptors)

    lines = [_canonical(header)]
    for frame in record.frames:
        doc = {"frame_id": frame.frame_id, "faces": [_face_doc(o) for o in frame.observations]}
        if frame.timestamp_s is not None:
            doc["timestamp_s"] = frame.timestamp_s
        if frame.descriptor is not None and not use_sidecar:
            doc["descriptor"] = [float(v) for v in frame.descriptor]
        lines.append(_canonical(doc))
    with open(stem + ".jsonl", "w", encoding="utf-8") as f:
        f.write("\n".join(lines))
        f.write("\n")

    if not use_sidecar:
        return SequenceFile(records=stem + ".jsonl")
    rows = np.stack([np.asarray(f.descriptor, dtype="<f4") for f in with_descriptors])
    rows.tofile(stem + ".f32")
    with open(stem + ".idx.json", "w", encoding="utf-8") as f:
        f.write(_canonical({"dim": dim, "frame_ids": [fr.frame_id for fr in with_descriptors]}))
        f.write("\n")
    return SequenceFile(records=stem + ".jsonl", descriptors=stem + ".f32",
                        descriptor_index=stem + ".idx.json")


def extract_prototypes(sequence: SequenceRecord) -> List[Prototype]:
    """Split a sequence into one prototype per tracked person.

    :param sequence: Loaded sequence.
    :return: Prototypes in order of first appearance; empty when no face was tracked.
    :rtype: list of :py:class:`Prototype`

    .. code-block:: python
       :caption: Example

       >>> [p.track_id for p in extract_prototypes(sequence)]
       ['7', '9']
    """
    frame_ids = tuple(f.frame_id for f in sequence.frames)
    labels = sequence.labels
    prototypes = []
    for track_id in sequence.track_ids():
        observations = []
        for frame in sequence.frames:
            match = None
            for obs in frame.observations:
                if obs.track_id == track_id:
                    match = obs
                    break
            observations.append(match)
        prototypes.append(Prototype(
            sequence_id=sequence.sequence_id,
            track_id=track_id,
            frame_ids=frame_ids,
            observations=tuple(observations),
            interacting=labels.interacting.get(track_id) if labels is not None else None,
            person=labels.persons.get(track_id) if labels is not None else None,
        ))
    return prototypes


def dataset_summary(sequences: Iterable[SequenceRecord]) -> DatasetSummary:
    """Count sequences, prototypes and labels the way the dataset table reports them."""
    sequences = list(sequences)
    prototypes = [p for s in sequences for p in extract_prototypes(s)]
    categories = [s.labels.category for s in sequences if s.labels is not None]
    persons = {p.person for p in prototypes if p.person is not None}
    return DatasetSummary(
        sequences=len(sequences),
        prototypes=len(prototypes),
        interacting=sum(1 for p in prototypes if p.interacting),
        formal=categories.count("formal"),
        informal=categories.count("informal"),
        persons=len(persons),
        days=len({s.day_index for s in sequences}),
    )


# -- calibration table ----------------------------------------------------------

_NUMBER_RE = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
CALIBRATION_LINE_REGEX = re.compile(
    rf"\s*(?P<height>{_NUMBER_RE})\s*(?:,|\s)\s*(?P<distance>{_NUMBER_RE})\s*"
)


def load_calibration_table(path) -> List[Tuple[float, float]]:
    """Read ``(height_px, distance_cm)`` pairs, one per line.

    Values are separated by whitespace or a comma; ``#`` starts a comment.

    :raises MalformedRecordError: A line does not hold exactly two numbers.
    """
    path = os.fspath(path)
    points = []
    with open(path, "r", encoding="utf-8") as f:
        for number, text in enumerate(f, start=1):
            content = text.split("#", 1)[0]
            if not content.strip():
                continue
            match = CALIBRATION_LINE_REGEX.fullmatch(content.rstrip("\n"))
            if match is None:
                raise make_exception(egosocial_err_calibration_line, path=path, line=number, text=text.strip())
            points.append((float(match.group("height")), float(match.group("distance"))))
    return points


def dump_calibration_table(points: Iterable[Tuple[float, float]], path) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as f:
        f.write("# height_px distance_cm\n")
        for height, distance in points:
            f.write(f"{float(height)!r} {float(distance)!r}\n")
