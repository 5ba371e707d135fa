# Copyright 2024 egosocial developers

import logging

import numpy as np
import pytest

from egosocial.exceptions import (ExtrapolationWarning, FitDegenerateError, InvalidDistributionError,
                                  MalformedRecordError, MissingDescriptorError, MissingLabelError)
from egosocial.ingest import FrameEntry, extract_prototypes
from egosocial.signals import (DETECTION_SETTINGS, PcaModel, QuadraticDistanceModel, TimeSeries,
                               apply_standardization, build_categorization_series, build_categorization_set,
                               build_detection_series, build_detection_set, dominant_expression, dump_series,
                               estimate_distance, estimate_distances, fit_descriptor_pca, fit_distance_model,
                               fit_pca, fit_standardization, load_series, mean_expression, project,
                               quantize_descriptor, reconstruct, select_setting, task_of)

from conftest import probs

DISTANCES = (30, 50, 70, 100, 150, 200, 250)


def true_distance(h):
    return 0.02 * h ** 2 - 6.0 * h + 480.0


def height_at(d):
    return (6.0 - np.sqrt(36.0 - 0.08 * (480.0 - d))) / 0.04


def noisy_calibration(seed=0, sigma=5.0):
    # three persons measured at every distance, their face heights a few pixels apart
    rng = np.random.default_rng(seed)
    points = []
    for offset in (-2.0, 0.0, 2.0):
        for d in DISTANCES:
            h = height_at(d) + offset
            points.append((h, true_distance(h) + rng.normal(0, sigma)))
    return points


# -- distance ------------------------------------------------------------------

def test_exact_quadratic():
    model = fit_distance_model([(1, 1), (2, 4), (3, 9)])
    np.testing.assert_allclose(model.coefficients, (1.0, 0.0, 0.0), atol=1e-12)
    assert model.residual == pytest.approx(0.0, abs=1e-12)


def test_recovers_noiseless_coefficients():
    heights = np.array([12.0, 20.0, 35.0, 50.0, 70.0, 90.0, 110.0])
    model = fit_distance_model(zip(heights, 0.02 * heights ** 2 - 3 * heights + 300))
    np.testing.assert_allclose(model.coefficients, (0.02, -3.0, 300.0), rtol=0, atol=1e-9)


def test_noisy_fit_matches_normal_equations():
    points = np.array(noisy_calibration())
    model = fit_distance_model(points)
    h, d = points[:, 0], points[:, 1]
    design = np.column_stack((h ** 2, h, np.ones_like(h)))
    oracle = np.linalg.solve(design.T @ design, design.T @ d)
    np.testing.assert_allclose(model.coefficients, oracle, rtol=1e-6)


def test_residual_shrinks_with_noise():
    residuals = [fit_distance_model(noisy_calibration(sigma=s)).residual for s in (10.0, 5.0, 1.0, 0.0)]
    assert residuals == sorted(residuals, reverse=True)


@pytest.mark.parametrize("points", [[(1, 1), (2, 4)], [(1, 1), (1, 2), (2, 4), (2, 5)]])
def test_degenerate_calibration(points):
    with pytest.raises(FitDegenerateError):
        fit_distance_model(points)


def test_estimate_distance():
    assert estimate_distance(QuadraticDistanceModel(1.0, 0.0, 0.0), 3.0) == 9.0


def test_negative_distance_is_clamped():
    model = QuadraticDistanceModel(1.0, -10.0, 9.0)
    with pytest.warns(ExtrapolationWarning):
        assert estimate_distance(model, 5.0) == 0.0


def test_height_outside_fitted_range_warns(caplog):
    model = fit_distance_model(noisy_calibration())
    caplog.clear()
    with pytest.warns(ExtrapolationWarning, match="outside the fitted range") as record:
        estimate_distances(model, [model.height_max + model.margin + 1.0])
    assert len(record) == 1
    # reported through the warning only, the command line routes it to the log
    assert not [r for r in caplog.records if r.levelno >= logging.WARNING]


def test_estimate_at_calibration_point():
    model = fit_distance_model(noisy_calibration())
    assert abs(estimate_distance(model, height_at(100)) - 100.0) < 2 * model.residual


@pytest.mark.parametrize("height", [0.0, -3.0])
def test_non_positive_height(height):
    with pytest.raises(ValueError):
        estimate_distance(QuadraticDistanceModel(1.0, 0.0, 0.0), height)


# -- expressions ----------------------------------------------------------------

def test_dominant_expression():
    assert dominant_expression(probs(1)) == 2
    assert dominant_expression([0.125] * 8) == 1
    assert dominant_expression(probs(0, 0.6)) == 1
    assert dominant_expression(probs(7)) == 8


def test_dominant_expression_rejects_bad_distribution():
    with pytest.raises(InvalidDistributionError):
        dominant_expression([0.5] * 8)


def test_mean_expression(observation):
    one = observation(0, dominant=3)
    np.testing.assert_allclose(mean_expression([one]), one.expression_probs)
    two = observation(0, dominant=5)
    both = mean_expression([one, two])
    np.testing.assert_allclose(both, (np.array(one.expression_probs) + two.expression_probs) / 2)
    assert both.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(mean_expression([]), [1, 0, 0, 0, 0, 0, 0, 0])


# -- detection series -------------------------------------------------------------

def test_detection_series_shapes_and_projection(sequence):
    model = fit_distance_model(noisy_calibration())
    prototype = extract_prototypes(sequence(frames=20, interacting={"t0": True}))[0]
    full = build_detection_series(prototype, model, "SID4")
    assert full.matrix.shape == (20, 5)
    assert full.label is True
    sid1 = build_detection_series(prototype, model, "SID1")
    np.testing.assert_array_equal(sid1.matrix, full.matrix[:, [0, 3]])
    sid3 = build_detection_series(prototype, model, "SID3")
    assert sid3.matrix.shape == (20, 3)
    np.testing.assert_array_equal(sid3.matrix, full.matrix[:, [0, 3, 4]])
    assert set(sid3.matrix[:, 2]) == {1.0}


@pytest.mark.parametrize("setting", sorted(DETECTION_SETTINGS))
def test_select_setting_equals_direct_build(sequence, setting):
    model = fit_distance_model(noisy_calibration())
    prototype = extract_prototypes(sequence(frames=20))[0]
    full = build_detection_series(prototype, model, "SID4")
    direct = build_detection_series(prototype, model, setting)
    np.testing.assert_array_equal(select_setting(full, setting).matrix, direct.matrix)


def test_select_setting_refuses_missing_columns(sequence):
    model = fit_distance_model(noisy_calibration())
    sid1 = build_detection_series(extract_prototypes(sequence(frames=20))[0], model, "SID1")
    with pytest.raises(ValueError):
        select_setting(sid1, "SID4")
    with pytest.raises(ValueError):
        select_setting(sid1, "SIC1")


def test_gaps_carry_last_row_forward(sequence):
    model = fit_distance_model(noisy_calibration())
    record = sequence(frames=20, tracks=("a", "b"), missing={"b": (0, 1, 6, 7)})
    b = [p for p in extract_prototypes(record) if p.track_id == "b"][0]
    matrix = build_detection_series(b, model).matrix
    assert matrix.shape == (20, 5)
    np.testing.assert_array_equal(matrix[0], matrix[2])
    np.testing.assert_array_equal(matrix[1], matrix[2])
    np.testing.assert_array_equal(matrix[6], matrix[5])
    np.testing.assert_array_equal(matrix[7], matrix[5])
    assert not np.array_equal(matrix[8], matrix[5])


def test_detection_set_requires_labels(sequence):
    model = fit_distance_model(noisy_calibration())
    with pytest.raises(MissingLabelError, match="u1/t0"):
        build_detection_set([sequence("u1")], model, require_labels=True)
    assert len(build_detection_set([sequence("u1", tracks=("a", "b"))], model)) == 2


def test_task_of():
    assert task_of("SID2") == "detection"
    assert task_of("SIC3") == "categorization"
    with pytest.raises(ValueError):
        task_of("SIX")


# -- quantization -----------------------------------------------------------------

def test_quantize_threshold_examples():
    np.testing.assert_array_equal(quantize_descriptor([0.7, 0.3], 2), [1, 0])
    unit = np.array([0.1, np.sqrt(1 - 0.01)])
    assert quantize_descriptor(unit, 15)[0] == 1


def test_quantize_matches_scalar_loop():
    f = np.random.default_rng(4).random(4096)
    norm = np.sqrt(sum(v * v for v in f))
    expected = [int(np.floor(15 * (v / norm))) for v in f]
    np.testing.assert_array_equal(quantize_descriptor(f, 15), expected)


def test_quantize_negative_components_floor_down():
    np.testing.assert_array_equal(quantize_descriptor([-1.0, 2.0, 2.0], 10), [-4, 6, 6])
    assert quantize_descriptor([-0.05, 1.0], 15)[0] == -1


def test_smaller_factor_is_sparser():
    f = np.random.default_rng(5).random(512)
    assert np.count_nonzero(quantize_descriptor(f, 15) == 0) > np.count_nonzero(quantize_descriptor(f, 100) == 0)


def test_quantize_is_monotone():
    f = np.random.default_rng(6).random(64)
    g = f.copy()
    g[:32] += 0.01
    # same norm is required for a per-component comparison
    g /= np.linalg.norm(g) / np.linalg.norm(f)
    words_f, words_g = quantize_descriptor(f, 15), quantize_descriptor(g, 15)
    nf, ng = f / np.linalg.norm(f), g / np.linalg.norm(g)
    assert np.all(words_f[nf <= ng] <= words_g[nf <= ng])


@pytest.mark.parametrize("f, q", [([0.0, 0.0], 15), ([1.0, 0.0], 1), ([1.0, 0.0], 2.5)])
def test_quantize_errors(f, q):
    with pytest.raises(ValueError):
        quantize_descriptor(f, q)


# -- PCA ------------------------------------------------------------------------------

def test_pca_on_a_line():
    t = np.linspace(-1, 1, 11)
    model = fit_pca(np.column_stack((t, 2 * t)), 0.95)
    assert model.output_dim == 1
    assert model.retained_variance == pytest.approx(1.0)


def test_pca_full_rank_reconstructs():
    rows = np.random.default_rng(7).standard_normal((40, 6))
    model = fit_pca(rows, 1.0)
    assert model.output_dim == 6
    np.testing.assert_allclose(reconstruct(model, project(model, rows)), rows, atol=1e-8)


def test_pca_properties_on_quantized_words():
    rng = np.random.default_rng(8)
    latent = rng.random((300, 12)) @ rng.random((12, 256))
    sparse = latent * (rng.random((300, 256)) < 0.2)
    words = np.array([quantize_descriptor(row + 1e-3, 15) for row in sparse], dtype=float)
    model = fit_pca(words, 0.95)
    assert isinstance(model, PcaModel)
    assert model.retained_variance >= 0.95
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(model.output_dim), atol=1e-8)
    coords = project(model, words)
    cov = np.cov(coords, rowvar=False)
    np.testing.assert_allclose(cov - np.diag(np.diag(cov)), 0.0, atol=1e-6)
    eigenvalues = np.linalg.eigh(np.cov(words, rowvar=False))[0][::-1]
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    cumulative = np.cumsum(eigenvalues) / eigenvalues.sum()
    assert model.output_dim == int(np.searchsorted(cumulative, 0.95 - 1e-12)) + 1
    for row in model.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_pca_rejects_constant_data():
    with pytest.raises(FitDegenerateError):
        fit_pca(np.ones((5, 3)))
    with pytest.raises(FitDegenerateError):
        fit_pca(np.ones((1, 3)))


# -- categorization series -------------------------------------------------------------

@pytest.fixture
def described(sequence):
    return [sequence(f"c{n}", frames=30, tracks=("1", "2"), descriptor_dim=64, seed=n,
                     category="formal" if n % 2 else "informal") for n in range(6)]


def test_categorization_settings(described):
    pca = fit_descriptor_pca(described, q=15)
    sic3 = build_categorization_series(described[1], pca, 15, "SIC3")
    assert sic3.matrix.shape == (30, pca.output_dim + 8)
    assert sic3.label is True
    sic1 = build_categorization_series(described[1], pca, 15, "SIC1")
    assert sic1.matrix.shape == (30, pca.output_dim)
    np.testing.assert_array_equal(sic1.matrix, sic3.matrix[:, :pca.output_dim])
    np.testing.assert_array_equal(select_setting(sic3, "SIC1").matrix, sic1.matrix)
    np.testing.assert_allclose(sic3.matrix[:, pca.output_dim:].sum(axis=1), 1.0)


def test_categorization_needs_every_descriptor(described):
    pca = fit_descriptor_pca(described, q=15)
    record = described[0]
    frames = list(record.frames)
    frames[7] = frames[7]._replace(descriptor=None)
    with pytest.raises(MissingDescriptorError, match="frame 7"):
        build_categorization_series(record._replace(frames=tuple(frames)), pca)


def test_categorization_set_requires_category(described, sequence):
    pca = fit_descriptor_pca(described, q=15)
    unlabeled = sequence("u", frames=30, descriptor_dim=64)
    assert build_categorization_set([unlabeled], pca)[0].label is None
    with pytest.raises(MissingLabelError):
        build_categorization_set([unlabeled], pca, require_labels=True)


# -- standardization and files ------------------------------------------------------------

def test_standardization_leaves_expression_column(sequence):
    model = fit_distance_model(noisy_calibration())
    series_set = build_detection_set([sequence(f"s{n}", seed=n, tracks=("a", "b")) for n in range(4)], model)
    stats = fit_standardization(series_set)
    assert stats.columns == (0, 1, 2, 3)
    stacked = np.vstack([apply_standardization(stats, s.matrix) for s in series_set])
    np.testing.assert_allclose(stacked[:, :3].mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(stacked[:, 3].std(), 1.0)
    np.testing.assert_array_equal(stacked[:, 4], np.vstack([s.matrix for s in series_set])[:, 4])
    assert apply_standardization(None, series_set[0].matrix) is series_set[0].matrix


def test_series_file_round_trip(tmp_path, sequence):
    model = fit_distance_model(noisy_calibration())
    series_set = build_detection_set([sequence("s0", tracks=("a", "b"), interacting={"a": True, "b": False})],
                                     model, "SID3")
    assert dump_series(series_set, tmp_path / "series.jsonl") == 2
    loaded = load_series(tmp_path / "series.jsonl")
    assert [(s.origin, s.label, s.setting) for s in loaded] == [("s0/a", True, "SID3"), ("s0/b", False, "SID3")]
    for a, b in zip(series_set, loaded):
        np.testing.assert_array_equal(a.matrix, b.matrix)


def test_series_file_rejects_wrong_width(tmp_path):
    path = tmp_path / "bad.jsonl"
    dump_series([TimeSeries("SID1", np.zeros((3, 2)), "s")], path)
    path.write_text(path.read_text().replace('"SID1"', '"SID4"'))
    with pytest.raises(MalformedRecordError, match="bad.jsonl:2:"):
        load_series(path)


def test_frame_entry_without_faces_has_neutral_expression(described):
    pca = fit_descriptor_pca(described, q=15)
    record = described[0]
    frames = list(record.frames)
    frames[0] = FrameEntry(frame_id=0, observations=(), descriptor=frames[0].descriptor,
                           timestamp_s=frames[0].timestamp_s)
    series = build_categorization_series(record._replace(frames=tuple(frames)), pca)
    np.testing.assert_array_equal(series.matrix[0, pca.output_dim:], [1, 0, 0, 0, 0, 0, 0, 0])
