# Copyright 2024 egosocial developers

import numpy as np
import pytest

from egosocial.ingest import FrameEntry, FrameObservation, SequenceLabels, SequenceRecord
from egosocial.synth import generate_dataset, standard_specs


def probs(dominant=0, weight=0.9):
    values = np.full(8, (1.0 - weight) / 7.0)
    values[dominant] = weight
    return tuple(float(v) for v in values)


@pytest.fixture
def observation():
    def make(frame_id, track_id="t0", height=40.0, yaw=0.0, pitch=0.0, roll=0.0, dominant=0, embedding=None):
        return FrameObservation(frame_id=frame_id, track_id=track_id, face_height=height, x_pos=0.5,
                                yaw=yaw, pitch=pitch, roll=roll, expression_probs=probs(dominant),
                                embedding=embedding)
    return make


@pytest.fixture
def sequence(observation):
    """Factory of small sequences; ``missing`` maps a track id to the frames where it is hidden."""
    def make(sequence_id="s0", frames=20, tracks=("t0",), day_index=0, interacting=None, category=None,
             persons=None, descriptor_dim=None, missing=None, seed=0):
        rng = np.random.default_rng(seed)
        missing = missing or {}
        entries = []
        for t in range(frames):
            observations = tuple(
                observation(t, track, height=40.0 + 5 * k + rng.normal(0, 1), yaw=rng.uniform(-20, 20),
                            dominant=k % 8)
                for k, track in enumerate(tracks) if t not in missing.get(track, ()))
            descriptor = None
            if descriptor_dim:
                descriptor = np.abs(rng.standard_normal(descriptor_dim)).astype("<f4")
            entries.append(FrameEntry(frame_id=t, observations=observations, descriptor=descriptor,
                                      timestamp_s=9 * 3600.0 + 30.0 * t))
        labels = None
        if interacting is not None or category is not None:
            labels = SequenceLabels(interacting=dict(interacting or {}), category=category,
                                    persons=dict(persons or {}))
        return SequenceRecord(sequence_id=sequence_id, day_index=day_index, frames=tuple(entries), labels=labels)
    return make


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Small labeled synthetic corpus shared by the integration tests."""
    directory = tmp_path_factory.mktemp("corpus")
    specs = standard_specs(descriptor_dim=64)
    return generate_dataset(directory, specs, {"formal": 4, "informal": 4, "bystander": 4}, seed=3,
                            identities=12, embedding_dim=16, days=3)
