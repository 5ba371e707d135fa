# Copyright 2024 egosocial developers

import argparse
import json
import logging
import os
import sys

from typing import Mapping, NamedTuple, Optional

from . import __version__
from .augment import AugmentSpec, augment, default_frozen_dims
from .bundle import load_bundle, save_bundle
from .cluster import (agglomerate, calibrate_cutoff, cluster_report, dump_cluster_result,
                      facesets_from_sequences, load_cluster_assignment, pairwise_fscore)
from .errors import *
from .errors import is_data_error, make_exception
from .exceptions import EgoSocialError
from .ingest import CATEGORIES, dataset_summary, load_calibration_table, load_manifest, load_sequences
from .lstm import (PRESETS, SearchSpace, evaluate, grid_search, init_network, predict_many,
                   preset_config, train)
from .patterns import (build_events, build_profile, dump_events, load_events, person_profiles,
                       render_temporal_map, temporal_map)
from .pprint import (print_clusters, print_cv_table, print_dataset_summary, print_distance_model,
                     print_metrics, print_profiles, print_train_report)
from .signals import (SETTINGS, build_categorization_set, build_detection_set, dump_series,
                      fit_descriptor_pca, fit_distance_model, load_series, select_setting, task_of)
from .synth import SceneSpec, generate_dataset, standard_specs

__all__ = ("RunConfig", "build_parser", "run", "main")

__doc__ = """This module contains the ``egosocial`` command line.

Every subcommand reads its inputs, writes a JSON document to ``--out`` and
prints a table summary on standard output. The exit status is ``0`` on
success, ``1`` when the input data is at fault and ``2`` on usage errors.

.. code-block:: none
   :caption: Example - synthetic corpus to evaluated detector

   egosocial synth --out corpus --sequences 300 --seed 1
   egosocial train --manifest corpus/manifest.json --setting SID4 --preset sid4 --out sid4.json
   egosocial evaluate --manifest test/manifest.json --model sid4.json --out metrics.json
"""

logger = logging.getLogger(__name__)

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] %(name)s - %(message)s"

#: Command line flags overriding :py:class:`egosocial.lstm.NetworkConfig` fields.
CONFIG_OVERRIDES = {
    "lr": "learning_rate",
    "momentum": "momentum",
    "dropout": "dropout_rate",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "cells": "cell_count",
}

_INPUTS = ("manifest", "series", "model", "calibration", "events", "detections", "categories",
           "clusters", "learning_manifest")


class UsageError(Exception):
    pass


class RunConfig(NamedTuple):
    """Arguments of one invocation, checked before any work begins."""
    subcommand: str
    inputs: Mapping[str, str]
    out: Optional[str]
    setting: Optional[str]
    model: Optional[str]
    preset: Optional[str]
    overrides: Mapping[str, object]
    seed: int
    threads: int
    verbosity: int

    @classmethod
    def from_args(cls, args):
        return cls(
            subcommand=args.command,
            inputs={k: getattr(args, k) for k in _INPUTS if getattr(args, k, None) is not None},
            out=getattr(args, "out", None),
            setting=getattr(args, "setting", None),
            model=getattr(args, "model", None),
            preset=getattr(args, "preset", None),
            overrides={field: getattr(args, flag) for flag, field in CONFIG_OVERRIDES.items()
                       if getattr(args, flag, None) is not None},
            seed=getattr(args, "seed", 0),
            threads=getattr(args, "threads", 1),
            verbosity=args.verbose - args.quiet,
        )

    def validate(self):
        for name, path in self.inputs.items():
            if not os.path.exists(path):
                raise UsageError(f"--{name.replace('_', '-')}: no such file: {path}")
        if self.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {self.threads}")
        if self.out is not None:
            parent = os.path.dirname(os.path.abspath(self.out))
            if not os.path.isdir(parent):
                raise UsageError(f"--out: directory does not exist: {parent}")
        return self


def _write_json(doc, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    logger.info("Wrote %s", path)


def _profile_doc(profile):
    return dict(profile._asdict(), duration=profile.duration._asdict())


def _sequences(path, threads):
    manifest = load_manifest(path)
    return manifest, load_sequences(manifest, threads=threads)


def _setting(args, default=None):
    setting = args.setting or (args.preset.upper() if getattr(args, "preset", None) else default)
    if setting is None:
        raise UsageError("--setting is required")
    return setting


def _distance_model(args, manifest=None):
    path = args.calibration or (manifest.calibration if manifest is not None else None)
    if path is None:
        raise UsageError("a detection setting needs --calibration or a manifest with a calibration table")
    return fit_distance_model(load_calibration_table(path))


def _feature_models(args, setting, manifest, sequences):
    """Distance model or descriptor PCA of *setting*, fitted on the training corpus."""
    if task_of(setting) == "detection":
        return {"distance_model": _distance_model(args, manifest)}
    if sequences is None:
        raise UsageError("a categorization setting needs --manifest to fit the descriptor PCA")
    return {"pca": fit_descriptor_pca(sequences, q=args.q, retained_variance=args.variance), "quantization": args.q}


def _build_series(setting, sequences, features, require_labels):
    if task_of(setting) == "detection":
        return build_detection_set(sequences, features["distance_model"], setting, require_labels=require_labels)
    if require_labels:
        # labeled sequences without interaction have no category to learn
        sequences = [s for s in sequences
                     if s.labels is None or s.labels.category is not None or any(s.labels.interacting.values())]
    return build_categorization_set(sequences, features["pca"], features["quantization"], setting,
                                    require_labels=require_labels)


def _load_series(path, setting=None):
    series_set = load_series(path)
    if setting is not None:
        series_set = [s if s.setting == setting else select_setting(s, setting) for s in series_set]
    return series_set


def _bundle_series(bundle, args, require_labels):
    """Series for a model bundle, from ``--series`` or built from ``--manifest``."""
    if args.series:
        return _load_series(args.series, bundle.setting)
    if not args.manifest:
        raise UsageError("--manifest or --series is required")
    _, sequences = _sequences(args.manifest, args.threads)
    features = {"distance_model": bundle.distance_model, "pca": bundle.pca, "quantization": bundle.quantization}
    return _build_series(bundle.setting, sequences, features, require_labels)


def _load_document(path, kind, parse):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse(json.load(f))
    except json.JSONDecodeError as e:
        raise make_exception(egosocial_err_bad_document, path=path, kind=kind, reason=e.msg) from None
    except (KeyError, TypeError) as e:
        raise make_exception(egosocial_err_bad_document, path=path, kind=kind, reason=f"missing {e}") from None


def _load_detections(path):
    return _load_document(path, "detections", lambda doc: {
        (d["sequence_id"], d["track_id"]): bool(d["interacting"]) for d in doc["detections"]})


def _load_categories(path):
    return _load_document(path, "categories", lambda doc: {
        c["sequence_id"]: c["category"] for c in doc["categories"]})


# -- subcommands ------------------------------------------------------------------

def cmd_validate(args, out):
    manifest, sequences = _sequences(args.manifest, args.threads)
    summary = dataset_summary(sequences)
    if args.out:
        _write_json(dict(summary._asdict(), manifest=manifest.path), args.out)
    print_dataset_summary(summary, out=out)


def cmd_fit_distance(args, out):
    manifest = load_manifest(args.manifest) if args.manifest else None
    model = _distance_model(args, manifest)
    if args.out:
        doc = model._asdict()
        doc["height_max"] = doc["height_max"] if doc["height_max"] != float("inf") else None
        _write_json(doc, args.out)
    print_distance_model(model, out=out)


def cmd_build_series(args, out):
    setting = _setting(args)
    manifest, sequences = _sequences(args.manifest, args.threads)
    if args.model:
        bundle = load_bundle(args.model, task=task_of(setting))
        features = {"distance_model": bundle.distance_model, "pca": bundle.pca, "quantization": bundle.quantization}
    else:
        features = _feature_models(args, setting, manifest, sequences)
    series_set = _build_series(setting, sequences, features, require_labels=False)
    count = dump_series(series_set, args.out)
    out.write(f"{count} {setting} series written to {args.out}\n")


def cmd_augment(args, out):
    series_set = load_series(args.series)
    if not series_set:
        raise UsageError(f"--series: {args.series} holds no series")
    setting, dim = series_set[0].setting, series_set[0].dim
    spec = AugmentSpec(multiplier=args.delta, noise_sigma=args.sigma,
                       frozen_dims=default_frozen_dims(setting, dim), rng_seed=args.seed)
    augmented = augment(series_set, spec, threads=args.threads)
    count = dump_series(augmented, args.out)
    out.write(f"{len(series_set)} series augmented into {count}, written to {args.out}\n")


def _training_series(args, setting):
    manifest = sequences = None
    if args.manifest:
        manifest, sequences = _sequences(args.manifest, args.threads)
    features = _feature_models(args, setting, manifest, sequences)
    if args.series:
        series_set = _load_series(args.series, setting)
    elif sequences is not None:
        series_set = _build_series(setting, sequences, features, require_labels=True)
    else:
        raise UsageError("--manifest or --series is required")
    return series_set, features


def _network_config(args, setting, input_dim, config):
    preset = args.preset or setting.lower()
    return preset_config(preset, input_dim, rng_seed=args.seed, threads=args.threads,
                         **config.overrides)


def cmd_train(args, out, config):
    setting = _setting(args)
    series_set, features = _training_series(args, setting)
    if not series_set:
        raise UsageError("no training series")
    network, report = train(init_network(_network_config(args, setting, series_set[0].dim, config)), series_set)
    save_bundle(args.out, task_of(setting), network, setting, precision=args.precision, **features)
    print_train_report(report, out=out)


def cmd_grid_search(args, out, config):
    setting = _setting(args)
    series_set, _ = _training_series(args, setting)
    result = grid_search(series_set, SearchSpace(), folds=args.folds, samples_per_axis=args.samples,
                         seed=args.seed, base_config=preset_config(
                             args.preset or setting.lower(), series_set[0].dim, threads=args.threads))
    if args.out:
        _write_json({
            "best": result.best.hyperparameters._asdict(),
            "table": [dict(hyperparameters=row.hyperparameters._asdict(),
                           fold_accuracies=list(row.fold_accuracies), mean_accuracy=row.mean_accuracy)
                      for row in result.table],
        }, args.out)
    print_cv_table(result, out=out)


def cmd_evaluate(args, out):
    bundle = load_bundle(args.model)
    series_set = _bundle_series(bundle, args, require_labels=True)
    metrics = evaluate(bundle.network, series_set)
    if args.out:
        _write_json(dict(metrics._asdict(), task=bundle.task, setting=bundle.setting, series=len(series_set)),
                    args.out)
    print_metrics(metrics, title=f"Evaluation {bundle.setting}", out=out)


def cmd_detect(args, out):
    bundle = load_bundle(args.model, task="detection")
    series_set = _bundle_series(bundle, args, require_labels=False)
    doc = {"setting": bundle.setting, "detections": [
        {"sequence_id": s.sequence_id, "track_id": s.track_id, "interacting": bool(label), "probability": p}
        for s, (label, p) in zip(series_set, predict_many(bundle.network, series_set))]}
    if args.out:
        _write_json(doc, args.out)
    positive = sum(d["interacting"] for d in doc["detections"])
    out.write(f"{positive} of {len(series_set)} prototypes detected as interacting\n")


def cmd_categorize(args, out):
    bundle = load_bundle(args.model, task="categorization")
    series_set = _bundle_series(bundle, args, require_labels=False)
    doc = {"setting": bundle.setting, "categories": [
        {"sequence_id": s.sequence_id, "category": CATEGORIES[0] if label else CATEGORIES[1], "probability": p}
        for s, (label, p) in zip(series_set, predict_many(bundle.network, series_set))]}
    if args.out:
        _write_json(doc, args.out)
    formal = sum(c["category"] == "formal" for c in doc["categories"])
    out.write(f"{formal} formal and {len(series_set) - formal} informal sequences\n")


def cmd_cluster(args, out):
    _, sequences = _sequences(args.manifest, args.threads)
    detections = _load_detections(args.detections) if args.detections else None
    facesets = facesets_from_sequences(sequences, interacting_only=args.interacting_only or detections is not None,
                                       detections=detections)
    if not facesets:
        raise UsageError(f"--manifest: {args.manifest} holds no face embeddings")
    if args.cutoff is not None:
        cutoff = args.cutoff
    elif args.learning_manifest:
        _, learning = _sequences(args.learning_manifest, args.threads)
        cutoff = calibrate_cutoff(facesets_from_sequences(learning))
    else:
        raise UsageError("--cutoff or --learning-manifest is required")
    result = agglomerate(facesets, cutoff, threads=args.threads)
    if args.categories:
        categories = _load_categories(args.categories)
    else:
        categories = {s.sequence_id: s.labels.category if s.labels else None for s in sequences}
    reports = cluster_report(result, facesets, categories=categories, interactions=detections)
    if args.out:
        dump_cluster_result(result, reports, args.out, facesets)
    print_clusters(reports, out=out)
    if any(f.person is not None for f in facesets):
        score = pairwise_fscore(result, facesets)
        out.write(f"Pairwise precision {score.precision:.4f} recall {score.recall:.4f} F {score.fscore:.4f}\n")


def _events(args):
    """Events from ``--events`` or assembled from ``--manifest``, and the observation days."""
    days = args.days
    if args.events:
        events = load_events(args.events)
    elif args.manifest:
        manifest, sequences = _sequences(args.manifest, args.threads)
        events = build_events(
            sequences,
            detections=_load_detections(args.detections) if args.detections else None,
            categories=_load_categories(args.categories) if args.categories else None,
            clusters=load_cluster_assignment(args.clusters) if args.clusters else None,
        )
        days = days or manifest.observation_days or len({s.day_index for s in sequences})
    else:
        raise UsageError("--events or --manifest is required")
    if days is None:
        days = max((e.day_index for e in events), default=0) + 1
    return events, days


def cmd_profile(args, out):
    events, days = _events(args)
    generic = build_profile(events, days)
    persons = person_profiles(events, days)
    if args.person is not None:
        persons = [p for p in persons if p.cluster_id in args.person]
    if args.out:
        _write_json({"observation_days": days, "generic": _profile_doc(generic),
                     "persons": [_profile_doc(p) for p in persons]}, args.out)
        if not args.events:
            dump_events(events, os.path.splitext(args.out)[0] + ".events.json")
    print_profiles([generic] + persons, out=out)


def cmd_temporal_map(args, out):
    events, _ = _events(args)
    document = temporal_map(events, week=args.week)
    _write_json(document, args.out)
    svg = os.path.splitext(args.out)[0] + ".svg"
    with open(svg, "wb") as f:
        f.write(render_temporal_map(document))
    out.write(f"{sum(len(d['intervals']) for d in document['days'])} intervals over "
              f"{len(document['days'])} days written to {svg}\n")


def cmd_synth(args, out):
    if not 0.0 <= args.formal_fraction <= 1.0:
        raise UsageError(f"--formal-fraction must lie in [0, 1], got {args.formal_fraction}")
    specs = standard_specs(args.interacting, args.bystander, descriptor_dim=args.descriptor_dim,
                           bystander_geometry=args.bystander_geometry)
    interacting = args.sequences - args.sequences // 2
    formal = round(interacting * args.formal_fraction)
    counts = {k: c for k, c in (("formal", formal), ("informal", interacting - formal),
                                ("bystander", args.sequences // 2)) if c > 0}
    manifest = generate_dataset(args.out, specs, counts, seed=args.seed, identities=args.identities,
                                days=args.days, threads=args.threads)
    print_dataset_summary(dataset_summary(load_sequences(manifest, threads=args.threads)), out=out)


COMMANDS = {
    "validate": cmd_validate,
    "fit-distance": cmd_fit_distance,
    "build-series": cmd_build_series,
    "augment": cmd_augment,
    "train": cmd_train,
    "grid-search": cmd_grid_search,
    "evaluate": cmd_evaluate,
    "detect": cmd_detect,
    "categorize": cmd_categorize,
    "cluster": cmd_cluster,
    "profile": cmd_profile,
    "temporal-map": cmd_temporal_map,
    "synth": cmd_synth,
}

_NEEDS_CONFIG = ("train", "grid-search")


# -- parser -----------------------------------------------------------------------

def _common(parser, seed=True):
    parser.add_argument("--threads", type=int, default=1, help="Worker threads (default: 1); results do not depend on it.")
    if seed:
        parser.add_argument("--seed", type=int, default=0, help="Seed of every random draw (default: 0).")


def _manifest(parser, required=False):
    parser.add_argument("--manifest", required=required, help="Dataset manifest JSON.")


def _features(parser):
    parser.add_argument("--setting", choices=SETTINGS, help="Feature setting, SID1-SID4 or SIC1-SIC3.")
    parser.add_argument("--calibration", help="Calibration table (height_px distance_cm), default: the manifest's.")
    parser.add_argument("--q", type=int, default=15, help="Descriptor quantization factor (default: 15).")
    parser.add_argument("--variance", type=float, default=0.95, help="Variance retained by the descriptor PCA (default: 0.95).")
    parser.add_argument("--series", help="Series file to use instead of building series from --manifest.")


def _network(parser):
    parser.add_argument("--preset", type=str.lower, choices=tuple(PRESETS),
         help="Named hyperparameter preset, default: the one of --setting.")
    parser.add_argument("--lr", type=float, help="Learning rate, overrides the preset.")
    parser.add_argument("--momentum", type=float, help="Momentum, overrides the preset.")
    parser.add_argument("--dropout", type=float, help="Dropout rate, overrides the preset.")
    parser.add_argument("--batch-size", type=int, help="Sequences per update, overrides the preset.")
    parser.add_argument("--epochs", type=int, help="Training epochs, overrides the preset.")
    parser.add_argument("--cells", type=int, help="LSTM cells, overrides the preset.")


def _event_inputs(parser):
    _manifest(parser)
    parser.add_argument("--events", help="Events JSON written by 'profile', used instead of --manifest.")
    parser.add_argument("--detections", help="Detections JSON written by 'detect', default: ground truth.")
    parser.add_argument("--categories", help="Categories JSON written by 'categorize', default: ground truth.")
    parser.add_argument("--clusters", help="Cluster JSON written by 'cluster'.")
    parser.add_argument("--days", type=int, help="Observation days, default: the manifest's or the days seen.")


def build_parser():
    parser = argparse.ArgumentParser(prog="egosocial", allow_abbrev=False,
                                     description="Social pattern analysis of egocentric photo-streams.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Log debug messages.")
    parser.add_argument("-q", "--quiet", action="count", default=0, help="Log errors only.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def command(name, help):
        return sub.add_parser(name, help=help, description=help, allow_abbrev=False)

    p = command("validate", "Validate a dataset and print its counts.")
    _manifest(p, required=True)
    p.add_argument("--out", help="Summary JSON.")
    _common(p, seed=False)

    p = command("fit-distance", "Fit the face height to distance model.")
    _manifest(p)
    p.add_argument("--calibration", help="Calibration table, default: the manifest's.")
    p.add_argument("--out", help="Distance model JSON.")

    p = command("build-series", "Build the time-series of a feature setting.")
    _manifest(p, required=True)
    _features(p)
    p.add_argument("--model", help="Model bundle whose distance model or PCA is used instead of fitting one.")
    p.add_argument("--out", required=True, help="Series file.")
    _common(p, seed=False)

    p = command("augment", "Augment a series file with perturbed copies.")
    p.add_argument("--series", required=True, help="Series file.")
    p.add_argument("--delta", type=int, default=2, help="Copies per series, the original included (default: 2).")
    p.add_argument("--sigma", type=float, default=0.01, help="Standard deviation of the perturbation weights (default: 0.01).")
    p.add_argument("--out", required=True, help="Augmented series file.")
    _common(p)

    p = command("train", "Train a classifier and save it as a model bundle.")
    _manifest(p)
    _features(p)
    _network(p)
    p.add_argument("--precision", choices=("double", "single"), default="double",
         help="Stored weight precision (default: double).")
    p.add_argument("--out", required=True, help="Model bundle.")
    _common(p)

    p = command("grid-search", "Select hyperparameters by stratified cross validation.")
    _manifest(p)
    _features(p)
    p.add_argument("--preset", type=str.lower, choices=tuple(PRESETS),
         help="Preset providing the fields that are not searched.")
    p.add_argument("--folds", type=int, default=3, help="Cross validation folds (default: 3).")
    p.add_argument("--samples", type=int, default=2, help="Samples per hyperparameter axis (default: 2).")
    p.add_argument("--out", help="Cross validation table JSON.")
    _common(p)

    for name, help in (("evaluate", "Score a model bundle against labeled data."),
                       ("detect", "Detect interacting prototypes with a detection bundle."),
                       ("categorize", "Categorize sequences with a categorization bundle.")):
        p = command(name, help)
        _manifest(p)
        p.add_argument("--series", help="Series file to use instead of --manifest.")
        p.add_argument("--model", required=True, help="Model bundle.")
        p.add_argument("--out", help="Result JSON.")
        _common(p, seed=False)

    p = command("cluster", "Group face-sets into identities.")
    _manifest(p, required=True)
    p.add_argument("--cutoff", type=float, help="Largest linkage distance merged.")
    p.add_argument("--learning-manifest", help="Labeled corpus calibrating the cutoff when --cutoff is absent.")
    p.add_argument("--detections", help="Detections JSON; restricts clustering to interacting prototypes.")
    p.add_argument("--interacting-only", action="store_true", help="Cluster interacting prototypes only.")
    p.add_argument("--categories", help="Categories JSON, default: ground truth.")
    p.add_argument("--out", help="Cluster JSON.")
    _common(p, seed=False)

    p = command("profile", "Compute generic and per-person social profiles.")
    _event_inputs(p)
    p.add_argument("--person", type=int, action="append", help="Cluster id to report; repeatable, default: all.")
    p.add_argument("--out", help="Profile JSON; events go next to it.")
    _common(p, seed=False)

    p = command("temporal-map", "Lay interaction events out per day, as JSON and SVG.")
    _event_inputs(p)
    p.add_argument("--week", type=int, help="Week to map, default: every day.")
    p.add_argument("--out", required=True, help="Map JSON; the SVG is written next to it.")
    _common(p, seed=False)

    defaults = SceneSpec()
    p = command("synth", "Generate a labeled synthetic corpus.")
    p.add_argument("--out", required=True, help="Output directory.")
    p.add_argument("--sequences", type=int, default=100, help="Number of sequences, half of them with interaction (default: 100).")
    p.add_argument("--formal-fraction", type=float, default=0.5,
         help="Share of interaction sequences that are formal (default: 0.5).")
    p.add_argument("--interacting", type=int, default=defaults.interacting,
         help=f"Interacting people per scene (default: {defaults.interacting}).")
    p.add_argument("--bystander", type=int, default=defaults.bystanders,
         help=f"Bystanders per scene (default: {defaults.bystanders}).")
    p.add_argument("--bystander-geometry", choices=("random", "mimic"), default=defaults.bystander_geometry,
         help="Bystander placement; 'mimic' leaves expression as the only cue (default: random).")
    p.add_argument("--identities", type=int, default=40, help="Synthetic persons, 0 for no embeddings (default: 40).")
    p.add_argument("--descriptor-dim", type=int, default=defaults.descriptor_dim,
         help=f"Global descriptor dimension (default: {defaults.descriptor_dim}).")
    p.add_argument("--days", type=int, help="Observation days, default: one per four sequences.")
    _common(p)
    return parser


def _configure_logging(verbosity):
    level = logging.DEBUG if verbosity > 0 else logging.ERROR if verbosity < 0 else logging.INFO
    logging.basicConfig(format=LOG_FORMAT, level=level, stream=sys.stderr, force=True)
    logging.captureWarnings(True)


def run(argv=None, out=None, err=None):
    """Run one command line.

    :param argv: Arguments without the program name, default ``sys.argv[1:]``.
    :param out: Stream for summaries, default standard output.
    :param err: Stream for error messages, default standard error.
    :return: ``0`` on success, ``1`` on a data error, ``2`` on a usage error.
    :rtype: int
    """
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2

    _configure_logging(args.verbose - args.quiet)
    handler = COMMANDS[args.command]
    try:
        config = RunConfig.from_args(args).validate()
        if args.command in _NEEDS_CONFIG:
            handler(args, out, config)
        else:
            handler(args, out)
    except (UsageError, EgoSocialError, OSError, ValueError, TypeError) as e:
        if is_data_error(e):
            logger.debug("Data error", exc_info=True)
            err.write(f"[error] {e}\n")
            return 1
        err.write(parser.format_usage())
        err.write(f"egosocial {args.command}: error: {e}\n")
        return 2
    return 0


def main():
    sys.exit(run())
