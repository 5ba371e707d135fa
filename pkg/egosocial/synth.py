# Copyright 2024 egosocial developers

import logging
import math
import os

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from .errors import *
from .errors import make_exception
from .ingest import (SCHEMA_VERSION, DatasetManifest, FrameEntry, FrameObservation,
                     SequenceLabels, SequenceRecord, dump_calibration_table, dump_manifest, dump_sequence)
from .signals import QuadraticDistanceModel

__all__ = (
    "DEFAULT_DISTANCE_MODEL", "CALIBRATION_DISTANCES", "SceneSpec", "Agent",
    "inverse_height", "place_agents", "expression_target", "identity_pool",
    "generate_sequence", "standard_specs", "generate_dataset",
)

__doc__ = """This module generates labeled synthetic datasets in the ingest format.

Interacting people stand on a circle (the o-space boundary) that also passes
through the camera and face its center; bystanders stand further away with
random orientation, or copy the interacting geometry so that only their
expressions tell them apart. Face heights come from inverting the quadratic
distance model, expressions from Dirichlet draws around a formal or informal
target, global descriptors from a sparse pattern per category.

.. code-block:: python
   :caption: Example - a balanced corpus of 100 sequences

   from egosocial.synth import standard_specs, generate_dataset

   manifest = generate_dataset("corpus", standard_specs(), {"formal": 25, "informal": 25, "bystander": 50}, seed=1)
"""

logger = logging.getLogger(__name__)

DEFAULT_DISTANCE_MODEL = QuadraticDistanceModel(a=0.02, b=-6.0, c=480.0)
CALIBRATION_DISTANCES = (30, 50, 70, 100, 150, 200, 250)
CALIBRATION_PERSONS = 3
MIN_DISTANCE, MAX_DISTANCE = 30.0, 479.0
ARC_SPREAD_DEG = 40.0

# targets around which expression distributions are drawn
_TARGETS = {
    "formal": (0.86, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02),
    "informal": (0.25, 0.40, 0.20, 0.03, 0.03, 0.03, 0.03, 0.03),
    "bystander": (0.86, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02),
}


class SceneSpec(NamedTuple):
    """Parameters of one kind of synthetic sequence.

    Distances are in cm, angles in degrees, heights in pixels. Expression draws
    are ``Dirichlet(concentration * target)``: the formal regime is neutral
    heavy with a high concentration, the informal regime favours happiness and
    surprise with a low one.
    """
    interacting: int = 2
    bystanders: int = 1
    category: Optional[str] = "informal"
    radius_range: Tuple[float, float] = (40.0, 80.0)
    bystander_range: Tuple[float, float] = (150.0, 300.0)
    length_range: Tuple[int, int] = (20, 60)
    height_noise_px: float = 1.0
    angle_noise_deg: float = 3.0
    position_jitter_cm: float = 3.0
    formal_concentration: float = 200.0
    informal_concentration: float = 8.0
    bystander_concentration: float = 200.0
    bystander_geometry: str = "random"
    frame_dropout: float = 0.0
    frame_interval_s: float = 30.0
    descriptor_dim: int = 4096
    descriptor_noise: float = 0.2
    pattern_seed: int = 0
    embedding_noise: float = 0.3

    def validate(self):
        def bad(reason):
            return make_exception(egosocial_err_bad_scene, reason=reason)

        if self.interacting < 0 or self.bystanders < 0 or self.interacting + self.bystanders < 1:
            raise bad("at least one person is required")
        low, high = self.length_range
        if not 1 <= low <= high <= 200:
            raise bad(f"length range {self.length_range} outside [1, 200]")
        if not 0.0 <= self.frame_dropout < 1.0:
            raise bad(f"frame_dropout {self.frame_dropout} outside [0, 1)")
        if self.radius_range[0] < 0 or self.radius_range[0] > self.radius_range[1]:
            raise bad(f"invalid o-space radius range {self.radius_range}")
        if self.bystander_range[0] <= 0 or self.bystander_range[0] > self.bystander_range[1]:
            raise bad(f"invalid bystander range {self.bystander_range}")
        if self.bystander_geometry not in ("random", "mimic"):
            raise bad(f"unknown bystander geometry {self.bystander_geometry!r}")
        if self.category not in (None, "formal", "informal"):
            raise bad(f"unknown category {self.category!r}")
        if self.interacting > 0 and self.category is None:
            raise bad("an interaction needs a category")
        if self.radius_range[1] == 0 and self.interacting > 1:
            raise make_exception(egosocial_err_infeasible_geometry, count=self.interacting)
        return self


class Agent(NamedTuple):
    """Noiseless placement of one person relative to the camera."""
    distance: float
    yaw: float
    interacting: bool


def inverse_height(model: QuadraticDistanceModel, distance_cm):
    """Face height producing *distance_cm* under *model*, on the decreasing branch."""
    d = np.clip(np.asarray(distance_cm, dtype=float), MIN_DISTANCE, MAX_DISTANCE)
    discriminant = np.maximum(model.b ** 2 - 4.0 * model.a * (model.c - d), 0.0)
    return (-model.b - np.sqrt(discriminant)) / (2.0 * model.a)


def _yaw_towards(position, target):
    """Signed angle in degrees from the direction to the camera to the direction to *target*."""
    to_camera = -position
    to_target = target - position
    cross = to_camera[0] * to_target[1] - to_camera[1] * to_target[0]
    return math.degrees(math.atan2(cross, float(np.dot(to_camera, to_target))))


def place_agents(count: int, radius: float, offset_deg: float = 0.0) -> List[Agent]:
    """Place *count* people on the o-space boundary, facing its center.

    The camera sits on the same circle (center ``(0, radius)``); people are
    spread evenly over an arc of +/-40 degrees around the point opposite the
    camera, so a single person stands straight ahead with a yaw of 0.
    """
    if count == 0:
        return []
    if radius == 0:
        if count > 1:
            raise make_exception(egosocial_err_infeasible_geometry, count=count)
        return [Agent(distance=0.0, yaw=0.0, interacting=True)]
    center = np.array([0.0, radius])
    angles = [180.0] if count == 1 else np.linspace(180.0 - ARC_SPREAD_DEG, 180.0 + ARC_SPREAD_DEG, count)
    agents = []
    for alpha in angles:
        a = math.radians(alpha + offset_deg)
        position = center + radius * np.array([math.sin(a), -math.cos(a)])
        agents.append(Agent(distance=float(np.linalg.norm(position)), yaw=_yaw_towards(position, center),
                            interacting=True))
    return agents


def expression_target(regime: str) -> np.ndarray:
    return np.asarray(_TARGETS[regime])


def identity_pool(count: int, dim: int = 64, seed: int = 0) -> np.ndarray:
    """Unit-norm latent identity vectors, one row per synthetic person."""
    rng = np.random.default_rng([seed, 7])
    vectors = rng.standard_normal((count, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def _category_patterns(dim: int, pattern_seed: int) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(pattern_seed)
    return {c: rng.random(dim) * (rng.random(dim) < 0.1) for c in ("formal", "informal")}


def _dirichlet(rng, regime, concentration):
    probs = rng.dirichlet(concentration * expression_target(regime))
    return tuple(float(p) for p in probs / probs.sum())


def generate_sequence(spec: SceneSpec, seed: int, sequence_id: str = "s0000", day_index: int = 0,
                      identities: Optional[np.ndarray] = None,
                      distance_model: QuadraticDistanceModel = DEFAULT_DISTANCE_MODEL) -> SequenceRecord:
    """Generate one labeled sequence.

    :param spec: Scene parameters.
    :param seed: Seed of every random draw of this sequence.
    :param sequence_id: Identifier of the sequence.
    :param day_index: Observation day.
    :param identities: Identity pool; faces carry embeddings and person labels when given.
    :param distance_model: Model whose inverse turns distances into face heights.
    :rtype: :py:class:`~egosocial.ingest.SequenceRecord`
    :raises InfeasibleSceneError: Invalid or unrealisable spec.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    people = spec.interacting + spec.bystanders
    if identities is not None and len(identities) < people:
        raise make_exception(egosocial_err_bad_scene, reason=f"{people} people need {people} identities, "
                                                             f"pool holds {len(identities)}")

    radius = rng.uniform(*spec.radius_range)
    offset = rng.uniform(-10.0, 10.0) if spec.interacting > 1 else 0.0
    agents = place_agents(spec.interacting, radius, offset_deg=offset)
    bystanders = []
    for k in range(spec.bystanders):
        if spec.bystander_geometry == "mimic" and agents:
            template = agents[k % len(agents)]
            bystanders.append((Agent(template.distance, template.yaw, False), 0.0, 0.0))
        elif spec.bystander_geometry == "mimic":
            template = place_agents(1, rng.uniform(*spec.radius_range))[0]
            bystanders.append((Agent(template.distance, template.yaw, False), 0.0, 0.0))
        else:
            bystanders.append((Agent(rng.uniform(*spec.bystander_range), rng.uniform(-90.0, 90.0), False),
                               rng.uniform(-30.0, 30.0), rng.uniform(-20.0, 20.0)))
    placed = [(a, 0.0, 0.0) for a in agents] + bystanders

    persons = None
    if identities is not None:
        persons = rng.choice(len(identities), size=people, replace=False)
    regimes = [spec.category] * len(agents) + ["bystander"] * len(bystanders)
    concentration = {"formal": spec.formal_concentration, "informal": spec.informal_concentration,
                     "bystander": spec.bystander_concentration}

    length = int(rng.integers(spec.length_range[0], spec.length_range[1] + 1))
    start_s = float(rng.uniform(8 * 3600.0, 20 * 3600.0))
    patterns = _category_patterns(spec.descriptor_dim, spec.pattern_seed) if spec.descriptor_dim else {}
    pattern = patterns.get(spec.category or "informal")

    visible = rng.random((length, people)) >= spec.frame_dropout
    for p in range(people):
        if not visible[:, p].any():
            visible[0, p] = True

    frames = []
    for t in range(length):
        observations = []
        for p, (agent, pitch0, roll0) in enumerate(placed):
            distance = agent.distance + rng.normal(0.0, spec.position_jitter_cm) if spec.position_jitter_cm else agent.distance
            height = float(inverse_height(distance_model, distance)) + rng.normal(0.0, spec.height_noise_px)
            angles = [value + rng.normal(0.0, spec.angle_noise_deg) if spec.angle_noise_deg else value
                      for value in (agent.yaw, pitch0, roll0)]
            yaw, pitch, roll = (float(np.clip(v, -90.0, 90.0)) for v in angles)
            probs = _dirichlet(rng, regimes[p], concentration[regimes[p]])
            embedding = None
            if persons is not None:
                vector = identities[persons[p]] + spec.embedding_noise * rng.standard_normal(identities.shape[1])
                embedding = tuple(float(v) for v in vector / np.linalg.norm(vector))
            if not visible[t, p]:
                continue
            observations.append(FrameObservation(
                frame_id=t,
                track_id=str(p + 1),
                face_height=max(height, 1.0),
                x_pos=float(np.clip(0.5 + agent.yaw / 180.0, 0.0, 1.0)),
                yaw=yaw,
                pitch=pitch,
                roll=roll,
                expression_probs=probs,
                embedding=embedding,
            ))
        descriptor = None
        if pattern is not None:
            noise = spec.descriptor_noise * rng.standard_normal(spec.descriptor_dim) * (rng.random(spec.descriptor_dim) < 0.2)
            descriptor = np.clip(pattern + noise, 0.0, None).astype("<f4")
            if not descriptor.any():
                descriptor[int(rng.integers(spec.descriptor_dim))] = 1.0
        frames.append(FrameEntry(frame_id=t, observations=tuple(observations), descriptor=descriptor,
                                 timestamp_s=start_s + t * spec.frame_interval_s))

    labels = SequenceLabels(
        interacting={str(p + 1): placed[p][0].interacting for p in range(people)},
        category=spec.category if spec.interacting else None,
        persons={str(p + 1): f"p{int(persons[p]):03d}" for p in range(people)} if persons is not None else {},
    )
    return SequenceRecord(sequence_id=sequence_id, day_index=day_index, frames=tuple(frames),
                          frame_interval_s=spec.frame_interval_s, labels=labels)


def standard_specs(interacting: int = 2, bystanders: int = 1, **overrides) -> Dict[str, SceneSpec]:
    """The three scene kinds of a balanced corpus: formal and informal meetings, bystanders only."""
    return {
        "formal": SceneSpec(interacting=interacting, bystanders=bystanders, category="formal", **overrides),
        "informal": SceneSpec(interacting=interacting, bystanders=bystanders, category="informal", **overrides),
        "bystander": SceneSpec(interacting=0, bystanders=max(bystanders, 1), category=None, **overrides),
    }


def _calibration_points(model, seed, noise):
    rng = np.random.default_rng([seed, 11])
    points = []
    for _ in range(CALIBRATION_PERSONS):
        for d in CALIBRATION_DISTANCES:
            points.append((round(float(inverse_height(model, d)) + rng.normal(0.0, noise), 3), float(d)))
    return points


def generate_dataset(directory, specs: Mapping[str, SceneSpec], counts: Mapping[str, int], seed: int = 0,
                     identities: int = 40, embedding_dim: int = 64, days: Optional[int] = None,
                     distance_model: QuadraticDistanceModel = DEFAULT_DISTANCE_MODEL,
                     threads: int = 1) -> DatasetManifest:
    """Write a synthetic corpus: sequences, descriptor sidecars, calibration table and manifest.

    Sequence ``n`` is generated from seed ``(seed, n)``; kinds follow the order
    of *counts*, sequences are spread round-robin over the observation days.

    :param directory: Output directory, created if missing.
    :param specs: Scene kinds by name.
    :param counts: Number of sequences per kind, each >= 1.
    :param seed: Corpus seed.
    :param identities: Size of the identity pool; 0 disables embeddings.
    :param embedding_dim: Embedding dimension.
    :param days: Observation days, by default one per four sequences.
    :return: The manifest written to ``<directory>/manifest.json``.
    :raises ValueError: A count below one or a kind without spec.
    """
    if not counts or any(c < 1 for c in counts.values()) or any(k not in specs for k in counts):
        raise make_exception(egosocial_err_bad_counts, counts=dict(counts))
    for spec in specs.values():
        spec.validate()
    directory = os.path.abspath(os.fspath(directory))
    os.makedirs(directory, exist_ok=True)
    kinds = [kind for kind, count in counts.items() for _ in range(count)]
    days = days or max(1, math.ceil(len(kinds) / 4))
    pool = identity_pool(identities, embedding_dim, seed) if identities else None
    digits = max(4, len(str(len(kinds))))

    def job(n):
        record = generate_sequence(specs[kinds[n]], seed=int(np.random.SeedSequence([seed, n]).generate_state(1)[0]),
                                   sequence_id=f"s{n:0{digits}d}", day_index=n % days, identities=pool,
                                   distance_model=distance_model)
        return dump_sequence(record, os.path.join(directory, "sequences"))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            entries = list(executor.map(job, range(len(kinds))))
    else:
        entries = [job(n) for n in range(len(kinds))]

    calibration = os.path.join(directory, "calibration.txt")
    dump_calibration_table(_calibration_points(distance_model, seed, 1.0), calibration)
    manifest = DatasetManifest(
        path=os.path.join(directory, "manifest.json"),
        schema_version=SCHEMA_VERSION,
        sequences=tuple(entries),
        observation_days=days,
        calibration=calibration,
        settings={"detection": "SID4", "categorization": "SIC3"},
    )
    dump_manifest(manifest)
    logger.info("Generated %d synthetic sequences in %s", len(kinds), directory)
    return manifest
