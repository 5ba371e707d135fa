# Copyright 2024 egosocial developers

import io
import json

import numpy as np
import pytest

from egosocial.bundle import save_bundle
from egosocial.cli import COMMANDS, build_parser, run
from egosocial.ingest import DatasetManifest, dump_manifest, dump_sequence, load_sequences
from egosocial.lstm import NetworkConfig, init_network
from egosocial.patterns import InteractionEvent, build_events, dump_events
from egosocial.signals import fit_pca


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def subparsers():
    action = next(a for a in build_parser()._actions if a.dest == "command")
    return action.choices


def test_every_command_is_registered():
    assert set(subparsers()) == set(COMMANDS)


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_help_documents_every_flag(command, capsys):
    code, _, _ = invoke(command, "--help")
    assert code == 0
    text = capsys.readouterr().out
    for action in subparsers()[command]._actions:
        for flag in action.option_strings:
            assert flag in text
        if action.option_strings and action.dest != "help":
            assert action.help


def test_usage_errors(tmp_path, capsys):
    assert invoke("train")[0] == 2
    assert invoke("no-such-command")[0] == 2
    assert invoke("validate", "--manifest", tmp_path / "absent.json")[0] == 2
    code, _, err = invoke("evaluate", "--model", tmp_path / "absent.json")
    assert code == 2
    assert "no such file" in err
    capsys.readouterr()


def test_invalid_threads(corpus):
    code, _, err = invoke("validate", "--manifest", corpus.path, "--threads", "0")
    assert code == 2
    assert "--threads" in err


def test_invalid_argument_value_is_a_usage_error(tmp_path):
    code, _, err = invoke("synth", "--out", tmp_path / "c", "--sequences", 0)
    assert code == 2
    assert "usage:" in err


def test_malformed_record_is_a_data_error(tmp_path, sequence):
    entry = dump_sequence(sequence("bad", tracks=("1",)), tmp_path / "sequences")
    with open(entry.records, encoding="utf-8") as f:
        lines = f.read().splitlines()
    frame = json.loads(lines[1])
    frame["faces"][0]["embedding"] = [3.0, 4.0]
    lines[1] = json.dumps(frame)
    with open(entry.records, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    manifest = dump_manifest(DatasetManifest(path=str(tmp_path / "manifest.json"), schema_version="1",
                                             sequences=(entry,)))
    code, _, err = invoke("validate", "--manifest", manifest)
    assert code == 1
    assert f"{entry.records}:2:" in err
    assert "unit-norm" in err
    assert "usage:" not in err


def test_validate(corpus, tmp_path):
    code, out, _ = invoke("validate", "--manifest", corpus.path, "--out", tmp_path / "summary.json")
    assert code == 0
    assert "Sequences" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert (summary["sequences"], summary["formal"], summary["informal"]) == (12, 4, 4)


def test_train_without_labels_names_the_sequence(tmp_path, sequence, corpus):
    entry = dump_sequence(sequence("unlabeled7", tracks=("1", "2")), tmp_path / "sequences")
    manifest = dump_manifest(DatasetManifest(path=str(tmp_path / "manifest.json"), schema_version="1",
                                             sequences=(entry,)))
    code, _, err = invoke("train", "--manifest", manifest, "--setting", "SID4", "--calibration", corpus.calibration,
                          "--out", tmp_path / "model.json")
    assert code == 1
    assert "unlabeled7" in err
    assert not (tmp_path / "model.json").exists()


def test_detect_refuses_a_categorization_bundle(tmp_path, corpus):
    pca = fit_pca(np.random.default_rng(0).random((20, 6)), 0.9)
    network = init_network(NetworkConfig(input_dim=pca.output_dim + 8, cell_count=3))
    save_bundle(tmp_path / "sic.json", "categorization", network, "SIC3", pca=pca, quantization=15)
    code, _, err = invoke("detect", "--manifest", corpus.path, "--model", tmp_path / "sic.json")
    assert code == 1
    assert "detection" in err


def test_profile_from_events(tmp_path):
    events = [InteractionEvent(sequence_id=f"e{n:03d}", day_index=n % 30, start_frame=0, end_frame=19,
                               category="formal" if n < 25 else "informal",
                               participants=(1,) if n % 2 else (2,))
              for n in range(100)]
    path = dump_events(events, tmp_path / "events.json")
    code, out, _ = invoke("profile", "--events", path, "--days", 30, "--out", tmp_path / "profile.json")
    assert code == 0
    assert "generic" in out
    doc = json.loads((tmp_path / "profile.json").read_text())
    generic = doc["generic"]
    assert (generic["a_formal"], generic["a_informal"], generic["f_informal"]) == (0.25, 0.75, 2.5)
    assert generic["diversity"] == pytest.approx(0.8774, abs=1e-4)
    assert generic["duration"]["mean"] == 10.0
    assert sorted(p["cluster_id"] for p in doc["persons"]) == [1, 2]

    code, _, _ = invoke("profile", "--events", path, "--person", 2, "--out", tmp_path / "person.json")
    assert code == 0
    assert [p["cluster_id"] for p in json.loads((tmp_path / "person.json").read_text())["persons"]] == [2]


def test_temporal_map(corpus, tmp_path):
    code, out, _ = invoke("temporal-map", "--manifest", corpus.path, "--out", tmp_path / "map.json")
    assert code == 0
    assert (tmp_path / "map.svg").read_bytes().startswith(b"<")
    document = json.loads((tmp_path / "map.json").read_text())
    expected = len(build_events(load_sequences(corpus)))
    assert expected > 0
    assert sum(len(d["intervals"]) for d in document["days"]) == expected
    assert f"{expected} intervals" in out


def test_cluster_with_fixed_cutoff(corpus, tmp_path):
    code, out, _ = invoke("cluster", "--manifest", corpus.path, "--cutoff", 0.1, "--interacting-only",
                          "--out", tmp_path / "clusters.json")
    assert code == 0
    assert "Pairwise precision" in out
    doc = json.loads((tmp_path / "clusters.json").read_text())
    assert doc["clusters"]


def test_cluster_needs_a_cutoff(corpus):
    assert invoke("cluster", "--manifest", corpus.path)[0] == 2


@pytest.mark.slow
def test_synth_train_evaluate(tmp_path):
    code, out, _ = invoke("synth", "--out", tmp_path / "corpus", "--sequences", 40, "--seed", 1,
                          "--descriptor-dim", 0, "--identities", 0)
    assert code == 0
    assert "Sequences" in out
    manifest = tmp_path / "corpus" / "manifest.json"
    model = tmp_path / "sid4.json"
    code, out, _ = invoke("train", "--manifest", manifest, "--setting", "SID4", "--epochs", 5, "--cells", 8,
                          "--out", model)
    assert code == 0
    assert "Training accuracy" in out

    code, out, _ = invoke("evaluate", "--manifest", manifest, "--model", model, "--out", tmp_path / "metrics.json")
    assert code == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["setting"] == "SID4"
    assert metrics["tp"] + metrics["fp"] + metrics["fn"] + metrics["tn"] == metrics["series"]
    assert 0.0 <= metrics["accuracy"] <= 1.0

    code, _, _ = invoke("detect", "--manifest", manifest, "--model", model, "--out", tmp_path / "detections.json")
    assert code == 0
    detections = json.loads((tmp_path / "detections.json").read_text())["detections"]
    assert len(detections) == metrics["series"]
