# Copyright 2024 egosocial developers

import itertools
import logging
import math
import time

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import *
from .errors import make_exception
from .exceptions import NumericalFailureError, TrainingDivergedError
from .signals import Standardization, TimeSeries, apply_standardization, fit_standardization

__all__ = (
    "Hyperparameters", "PRESETS", "NetworkConfig", "Network", "TrainReport", "Metrics",
    "SearchSpace", "CvRow", "GridSearchResult", "PARAMETER_NAMES",
    "preset_config", "init_network", "forward", "compute_gradients", "log_loss", "train",
    "predict", "predict_many", "evaluate", "confusion_metrics", "stratified_folds",
    "sample_search_space", "grid_search",
)

__doc__ = """This module contains a single-layer recurrent classifier with gated
memory cells (input, forget and output gates, peephole connections, no gate
recurrence) trained by momentum SGD with full backpropagation through time.

The final hidden state goes through inverted dropout (training only) and a
single sigmoid unit. Every parameter lives in a ``name -> numpy.ndarray``
mapping; a :py:class:`Network` is never modified in place.

.. code-block:: python
   :caption: Example - train a detector with the SID4 preset

   from egosocial.lstm import preset_config, init_network, train, evaluate

   config = preset_config("sid4", input_dim=5)
   network, report = train(init_network(config), train_series)
   print(evaluate(network, test_series))
"""

logger = logging.getLogger(__name__)

PARAMETER_NAMES = (
    "w_z", "w_i", "w_f", "w_o",
    "r_z", "r_i", "r_f", "r_o",
    "p_i", "p_f", "p_o",
    "b_z", "b_i", "b_f", "b_o",
    "w_y", "b_y",
)

FORGET_BIAS = 1.0
PROBABILITY_CLAMP = 1e-12


class Hyperparameters(NamedTuple):
    learning_rate: float
    momentum: float
    dropout_rate: float
    batch_size: int
    epochs: int
    cell_count: int


#: Best hyperparameters per feature setting.
PRESETS: Mapping[str, Hyperparameters] = {
    "sid1": Hyperparameters(0.001, 0.7, 0.0, 20, 50, 30),
    "sid2": Hyperparameters(0.01, 0.8, 0.0, 30, 50, 35),
    "sid3": Hyperparameters(0.001, 0.7, 0.5, 50, 100, 30),
    "sid4": Hyperparameters(0.001, 0.5, 0.0, 20, 100, 100),
    "sic1": Hyperparameters(0.001, 0.8, 0.0, 50, 50, 200),
    "sic2": Hyperparameters(0.001, 0.9, 0.0, 50, 20, 150),
    "sic3": Hyperparameters(0.01, 0.8, 0.5, 100, 50, 200),
}


class NetworkConfig(NamedTuple):
    """Architecture and training configuration.

    ``standardize`` toggles z-scoring of the distance, angle and descriptor
    columns with statistics of the training set. ``threads`` bounds the number
    of sequences whose gradients are computed concurrently.
    """
    input_dim: int
    cell_count: int = 100
    dropout_rate: float = 0.0
    learning_rate: float = 0.001
    momentum: float = 0.5
    batch_size: int = 20
    epochs: int = 100
    rng_seed: int = 0
    init_scale: float = 0.08
    standardize: bool = True
    threads: int = 1

    def validate(self):
        """Raise :py:class:`ValueError` unless every field is in range; return self."""
        checks = (
            (self.input_dim >= 1, "input_dim must be >= 1"),
            (self.cell_count >= 1, "cell_count must be >= 1"),
            (0.0 <= self.dropout_rate <= 0.9, "dropout_rate must lie in [0, 0.9]"),
            (self.learning_rate >= 0.0, "learning_rate must be >= 0"),
            (0.0 <= self.momentum < 1.0, "momentum must lie in [0, 1)"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.init_scale >= 0.0, "init_scale must be >= 0"),
            (self.threads >= 1, "threads must be >= 1"),
        )
        for ok, reason in checks:
            if not ok:
                raise make_exception(egosocial_err_bad_config, reason=reason)
        return self

    @property
    def hyperparameters(self):
        return Hyperparameters(self.learning_rate, self.momentum, self.dropout_rate,
                               self.batch_size, self.epochs, self.cell_count)


class Network(NamedTuple):
    config: NetworkConfig
    weights: Dict[str, np.ndarray]
    standardization: Optional[Standardization] = None


class TrainReport(NamedTuple):
    epoch_losses: Tuple[float, ...]
    accuracy: float
    wall_clock_s: float
    rng_seed: int


class Metrics(NamedTuple):
    precision: float
    recall: float
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int


def preset_config(name: str, input_dim: int, **overrides) -> NetworkConfig:
    """Build a :py:class:`NetworkConfig` from a named preset.

    :param name: ``sid1`` to ``sid4`` or ``sic1`` to ``sic3`` (case insensitive).
    :param input_dim: Series dimension.
    :param overrides: Any :py:class:`NetworkConfig` field.
    :raises ValueError: Unknown preset.
    """
    key = name.lower()
    if key not in PRESETS:
        raise make_exception(egosocial_err_unknown_preset, name=name, expected=", ".join(PRESETS))
    return NetworkConfig(input_dim=input_dim, **PRESETS[key]._asdict())._replace(**overrides).validate()


def _shapes(config: NetworkConfig) -> Dict[str, Tuple[int, ...]]:
    h, d = config.cell_count, config.input_dim
    shapes = {}
    for gate in "zifo":
        shapes[f"w_{gate}"] = (h, d)
        shapes[f"r_{gate}"] = (h, h)
        shapes[f"b_{gate}"] = (h,)
    for gate in "ifo":
        shapes[f"p_{gate}"] = (h,)
    shapes["w_y"] = (h,)
    shapes["b_y"] = (1,)
    return shapes


def init_network(config: NetworkConfig) -> Network:
    """Create a network with weights uniform in ``[-init_scale, init_scale]``.

    The forget gate bias starts at 1.0. The same seed always yields the same weights.

    :rtype: :py:class:`Network`
    """
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    shapes = _shapes(config)
    weights = {}
    for name in PARAMETER_NAMES:
        if name == "b_f":
            weights[name] = np.full(shapes[name], FORGET_BIAS)
        else:
            weights[name] = rng.uniform(-config.init_scale, config.init_scale, size=shapes[name])
    return Network(config=config, weights=weights)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _inputs(network: Network, series) -> np.ndarray:
    matrix = series.matrix if isinstance(series, TimeSeries) else series
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise make_exception(egosocial_err_empty_series)
    if matrix.shape[1] != network.config.input_dim:
        raise make_exception(egosocial_err_dim_mismatch, expected=network.config.input_dim, got=matrix.shape[1])
    return apply_standardization(network.standardization, matrix)


def _check_finite(value, stage):
    if not np.all(np.isfinite(value)):
        raise make_exception(egosocial_err_non_finite, stage=stage)


class _Trace(NamedTuple):
    xs: np.ndarray
    z: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray
    readout: np.ndarray
    scale: np.ndarray
    probability: float


def _run(network: Network, xs: np.ndarray, scale: np.ndarray) -> _Trace:
    w = network.weights
    steps, cells = xs.shape[0], network.config.cell_count
    z, i, f, o, c, tanh_c, h = (np.empty((steps, cells)) for _ in range(7))
    h_prev = np.zeros(cells)
    c_prev = np.zeros(cells)
    for t in range(steps):
        x = xs[t]
        z[t] = np.tanh(w["w_z"] @ x + w["r_z"] @ h_prev + w["b_z"])
        i[t] = _sigmoid(w["w_i"] @ x + w["r_i"] @ h_prev + w["p_i"] * c_prev + w["b_i"])
        f[t] = _sigmoid(w["w_f"] @ x + w["r_f"] @ h_prev + w["p_f"] * c_prev + w["b_f"])
        c[t] = z[t] * i[t] + c_prev * f[t]
        o[t] = _sigmoid(w["w_o"] @ x + w["r_o"] @ h_prev + w["p_o"] * c[t] + w["b_o"])
        tanh_c[t] = np.tanh(c[t])
        h[t] = tanh_c[t] * o[t]
        h_prev, c_prev = h[t], c[t]
    readout = h[-1] * scale
    probability = float(_sigmoid(w["w_y"] @ readout + w["b_y"][0]))
    _check_finite(h, "forward pass")
    _check_finite(probability, "forward pass")
    return _Trace(xs, z, i, f, o, c, tanh_c, h, readout, scale, probability)


def _readout_scale(network: Network, train_mode: bool, dropout_mask, rng) -> np.ndarray:
    cells, rate = network.config.cell_count, network.config.dropout_rate
    if not train_mode or rate == 0.0:
        return np.ones(cells)
    if dropout_mask is None:
        if rng is None:
            raise make_exception(egosocial_err_dropout_needs_rng)
        dropout_mask = rng.random(cells) >= rate
    mask = np.asarray(dropout_mask, dtype=float)
    if mask.shape != (cells,):
        raise make_exception(egosocial_err_dim_mismatch, expected=cells, got=mask.shape)
    return mask / (1.0 - rate)


def forward(network: Network, series, train_mode: bool = False, dropout_mask=None, rng=None) -> float:
    """Probability of the positive class for one series.

    In train mode the final hidden state is multiplied by ``mask / (1 - dropout_rate)``;
    the mask is drawn from *rng* unless given.

    :param network: Network to evaluate.
    :param series: :py:class:`~egosocial.signals.TimeSeries` or ``T x input_dim`` array.
    :param train_mode: Apply dropout.
    :param dropout_mask: Optional boolean keep-mask of length ``cell_count``.
    :param rng: :py:class:`numpy.random.Generator` used to draw a mask.
    :rtype: float
    :raises ValueError: Dimension mismatch or empty series.
    :raises NumericalFailureError: A non-finite activation appears.
    """
    xs = _inputs(network, series)
    return _run(network, xs, _readout_scale(network, train_mode, dropout_mask, rng)).probability


def log_loss(probability: float, label) -> float:
    """Binary cross entropy with the probability clamped to ``[1e-12, 1 - 1e-12]``."""
    p = min(max(probability, PROBABILITY_CLAMP), 1.0 - PROBABILITY_CLAMP)
    return -math.log(p) if label else -math.log(1.0 - p)


def _label_value(label) -> float:
    if isinstance(label, (bool, np.bool_)) or label in (0, 1):
        return float(label)
    raise make_exception(egosocial_err_bad_label, label=label)


def compute_gradients(network: Network, series, label, dropout_mask=None) -> Tuple[Dict[str, np.ndarray], float]:
    """Exact log loss gradients with respect to every parameter, unrolled over all timesteps.

    :param network: Network to differentiate.
    :param series: Series with at least one timestep.
    :param label: 0/1 or boolean target.
    :param dropout_mask: Keep-mask applied in train mode; without it no dropout is applied.
    :return: ``(gradients, loss)``, gradients keyed like ``network.weights``.
    :raises NumericalFailureError: A non-finite intermediate value appears.
    """
    y = _label_value(label)
    xs = _inputs(network, series)
    scale = _readout_scale(network, dropout_mask is not None, dropout_mask, None)
    trace = _run(network, xs, scale)
    w = network.weights
    grads = {name: np.zeros_like(value) for name, value in w.items()}

    d_logit = trace.probability - y
    grads["w_y"] = d_logit * trace.readout
    grads["b_y"] = np.array([d_logit])

    steps = xs.shape[0]
    cells = network.config.cell_count
    dh_next = np.zeros(cells)
    dc_next = np.zeros(cells)
    for t in reversed(range(steps)):
        dh = dh_next
        if t == steps - 1:
            dh = dh + d_logit * w["w_y"] * trace.scale
        c_prev = trace.c[t - 1] if t > 0 else np.zeros(cells)
        h_prev = trace.h[t - 1] if t > 0 else np.zeros(cells)
        z, i, f, o, tanh_c = trace.z[t], trace.i[t], trace.f[t], trace.o[t], trace.tanh_c[t]

        do = dh * tanh_c * o * (1.0 - o)
        dc = dh * o * (1.0 - tanh_c ** 2) + w["p_o"] * do + dc_next
        df = dc * c_prev * f * (1.0 - f)
        di = dc * z * i * (1.0 - i)
        dz = dc * i * (1.0 - z ** 2)

        x = xs[t]
        for gate, delta in (("z", dz), ("i", di), ("f", df), ("o", do)):
            grads[f"w_{gate}"] += np.outer(delta, x)
            grads[f"r_{gate}"] += np.outer(delta, h_prev)
            grads[f"b_{gate}"] += delta
        grads["p_i"] += di * c_prev
        grads["p_f"] += df * c_prev
        grads["p_o"] += do * trace.c[t]

        dh_next = w["r_z"].T @ dz + w["r_i"].T @ di + w["r_f"].T @ df + w["r_o"].T @ do
        dc_next = dc * f + w["p_i"] * di + w["p_f"] * df

    for name, g in grads.items():
        _check_finite(g, f"gradient of {name}")
    return grads, log_loss(trace.probability, y)


def _require_labels(series_set):
    for s in series_set:
        if s.label is None:
            raise make_exception(egosocial_err_unlabeled_series, origin=s.origin)


def train(network: Network, series_set: Sequence[TimeSeries], config: Optional[NetworkConfig] = None):
    """Train with momentum SGD over whole-sequence batches.

    Each update averages the gradients of ``batch_size`` sequences, processed
    one by one without padding, then applies ``v = momentum * v - lr * g`` and
    ``w = w + v``. Gradients of a batch may be computed by ``config.threads``
    workers; they are summed in batch order so results do not depend on it.

    :param network: Starting network, left untouched.
    :param series_set: Labeled series of dimension ``config.input_dim``.
    :param config: Training configuration, defaults to ``network.config``.
    :return: ``(trained network, report)``
    :rtype: tuple(:py:class:`Network`, :py:class:`TrainReport`)
    :raises MissingLabelError: A series has no label.
    :raises TrainingDivergedError: The loss or a gradient became non-finite.
    """
    config = (config or network.config).validate()
    series_set = list(series_set)
    if not series_set:
        raise make_exception(egosocial_err_empty_series_set, operation="Training")
    _require_labels(series_set)

    standardization = network.standardization
    if config.standardize and standardization is None:
        standardization = fit_standardization(series_set)
    elif not config.standardize:
        standardization = None
    current = Network(config=config, standardization=standardization,
                      weights={k: v.copy() for k, v in network.weights.items()})
    for s in series_set:
        _inputs(current, s)

    rng = np.random.default_rng(config.rng_seed)
    velocity = {k: np.zeros_like(v) for k, v in current.weights.items()}
    losses: List[float] = []
    started = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None

    def report(accuracy=float("nan")):
        return TrainReport(epoch_losses=tuple(losses), accuracy=accuracy,
                           wall_clock_s=time.perf_counter() - started, rng_seed=config.rng_seed)

    try:
        for epoch in range(config.epochs):
            order = rng.permutation(len(series_set))
            total = 0.0
            for start in range(0, len(order), config.batch_size):
                batch = [series_set[n] for n in order[start:start + config.batch_size]]
                masks = [rng.random(config.cell_count) >= config.dropout_rate if config.dropout_rate > 0 else None
                         for _ in batch]

                def job(args, net=current):
                    s, mask = args
                    return compute_gradients(net, s, s.label, dropout_mask=mask)

                results = list(pool.map(job, zip(batch, masks)) if pool else map(job, zip(batch, masks)))
                weights = {}
                for name, value in current.weights.items():
                    mean_grad = sum(g[name] for g, _ in results) / len(results)
                    velocity[name] = config.momentum * velocity[name] - config.learning_rate * mean_grad
                    weights[name] = value + velocity[name]
                current = current._replace(weights=weights)
                total += sum(loss for _, loss in results)
            epoch_loss = total / len(series_set)
            if not math.isfinite(epoch_loss):
                raise make_exception(egosocial_err_diverged, epoch=epoch + 1, loss=epoch_loss)
            losses.append(epoch_loss)
            logger.debug("Epoch %d/%d: mean log loss %.6f", epoch + 1, config.epochs, epoch_loss)
    except TrainingDivergedError as e:
        raise TrainingDivergedError(str(e), report()) from None
    except NumericalFailureError as e:
        raise TrainingDivergedError(f"Training diverged at epoch {len(losses) + 1}: {e}", report()) from None
    finally:
        if pool is not None:
            pool.shutdown()

    predictions = [predict(current, s)[0] for s in series_set]
    accuracy = float(np.mean([p == int(s.label) for p, s in zip(predictions, series_set)]))
    result = report(accuracy)
    logger.info("Trained %d cells for %d epochs on %d series: accuracy %.4f",
                config.cell_count, config.epochs, len(series_set), accuracy)
    return current, result


def predict(network: Network, series) -> Tuple[int, float]:
    """Return ``(label, probability)``; probabilities of 0.5 and above predict 1."""
    probability = forward(network, series)
    return int(probability >= 0.5), probability


def predict_many(network: Network, series_set: Sequence) -> List[Tuple[int, float]]:
    return [predict(network, s) for s in series_set]


def confusion_metrics(labels: Sequence, predictions: Sequence) -> Metrics:
    """Precision, recall and accuracy of the positive class.

    Precision is 0 when nothing is predicted positive.
    """
    labels = [int(bool(v)) for v in labels]
    predictions = [int(bool(v)) for v in predictions]
    if not labels:
        raise make_exception(egosocial_err_empty_evaluation)
    tp = sum(1 for y, p in zip(labels, predictions) if y and p)
    fp = sum(1 for y, p in zip(labels, predictions) if not y and p)
    fn = sum(1 for y, p in zip(labels, predictions) if y and not p)
    tn = len(labels) - tp - fp - fn
    return Metrics(
        precision=tp / (tp + fp) if tp + fp else 0.0,
        recall=tp / (tp + fn) if tp + fn else 0.0,
        accuracy=(tp + tn) / len(labels),
        tp=tp, fp=fp, fn=fn, tn=tn,
    )


def evaluate(network: Network, series_set: Sequence[TimeSeries]) -> Metrics:
    """Evaluate on labeled series; the positive class is interacting (detection) or formal (categorization).

    :raises InsufficientDataError: Empty set.
    :raises MissingLabelError: A series has no label.
    """
    series_set = list(series_set)
    if not series_set:
        raise make_exception(egosocial_err_empty_evaluation)
    _require_labels(series_set)
    return confusion_metrics([s.label for s in series_set], [p for p, _ in predict_many(network, series_set)])


# -- model selection ----------------------------------------------------------------

class SearchSpace(NamedTuple):
    """Closed sampling interval of every searched hyperparameter."""
    learning_rate: Tuple[float, float] = (0.0001, 0.1)
    momentum: Tuple[float, float] = (0.1, 0.9)
    dropout_rate: Tuple[float, float] = (0.0, 0.9)
    batch_size: Tuple[int, int] = (100, 1000)
    epochs: Tuple[int, int] = (10, 100)
    cell_count: Tuple[int, int] = (10, 200)


class CvRow(NamedTuple):
    hyperparameters: Hyperparameters
    fold_accuracies: Tuple[float, ...]
    mean_accuracy: float


class GridSearchResult(NamedTuple):
    best: NetworkConfig
    table: Tuple[CvRow, ...]


_INTEGER_AXES = ("batch_size", "epochs", "cell_count")


def _log_uniform(rng, low, high, size):
    if low > 0:
        return np.exp(rng.uniform(math.log(low), math.log(high), size))
    # a zero lower bound is sampled in log(1 + x) space
    return np.expm1(rng.uniform(math.log1p(low), math.log1p(high), size))


def sample_search_space(space: SearchSpace = SearchSpace(), samples_per_axis: int = 2, seed: int = 0) -> List[Hyperparameters]:
    """Log-uniform samples per axis, combined into a cartesian grid.

    Integer axes are rounded and repeated values dropped, so the grid can hold
    fewer than ``samples_per_axis ** 6`` candidates.
    """
    rng = np.random.default_rng(seed)
    axes = []
    for name, (low, high) in space._asdict().items():
        values = np.clip(_log_uniform(rng, low, high, samples_per_axis), low, high)
        if name in _INTEGER_AXES:
            values = sorted({int(round(v)) for v in values})
        else:
            values = sorted({float(v) for v in values})
        axes.append(values)
    return [Hyperparameters(*combo) for combo in itertools.product(*axes)]


def stratified_folds(series_set: Sequence[TimeSeries], folds: int = 3, seed: int = 0) -> List[List[int]]:
    """Split indices into *folds* parts with the class ratio of the whole set.

    :raises InsufficientDataError: A class has fewer series than folds.
    """
    _require_labels(series_set)
    rng = np.random.default_rng(seed)
    parts: List[List[int]] = [[] for _ in range(folds)]
    offset = 0
    for label in (False, True):
        members = [n for n, s in enumerate(series_set) if bool(s.label) is label]
        if len(members) < folds:
            raise make_exception(egosocial_err_not_enough_folds, label=int(label), count=len(members), folds=folds)
        for k, n in enumerate(rng.permutation(members)):
            parts[(k + offset) % folds].append(int(n))
        offset += len(members)
    return [sorted(p) for p in parts]


def grid_search(series_set: Sequence[TimeSeries], space: SearchSpace = SearchSpace(), folds: int = 3,
                samples_per_axis: int = 2, seed: int = 0, candidates: Optional[Sequence[Hyperparameters]] = None,
                base_config: Optional[NetworkConfig] = None) -> GridSearchResult:
    """Select hyperparameters by stratified k-fold cross validation.

    The best candidate has the highest mean validation accuracy; ties go to fewer
    cells, then fewer epochs.

    :param series_set: Labeled training series.
    :param space: Sampling intervals, ignored when *candidates* is given.
    :param folds: Number of folds.
    :param samples_per_axis: Samples drawn per hyperparameter.
    :param seed: Seed of the sampling, the folds and every trained network.
    :param candidates: Explicit candidate list.
    :param base_config: Fields not searched (``init_scale``, ``standardize``, ``threads``).
    :rtype: :py:class:`GridSearchResult`
    :raises InsufficientDataError: A class has fewer series than folds.
    """
    series_set = list(series_set)
    if not series_set:
        raise make_exception(egosocial_err_empty_series_set, operation="Grid search")
    parts = stratified_folds(series_set, folds, seed)
    if candidates is None:
        candidates = sample_search_space(space, samples_per_axis, seed)
    base = (base_config or NetworkConfig(input_dim=series_set[0].dim))._replace(
        input_dim=series_set[0].dim, rng_seed=seed)

    rows = []
    for candidate in candidates:
        config = base._replace(**candidate._asdict()).validate()
        accuracies = []
        for k, held_out in enumerate(parts):
            held = set(held_out)
            training = [s for n, s in enumerate(series_set) if n not in held]
            network, _ = train(init_network(config), training)
            accuracies.append(evaluate(network, [series_set[n] for n in held_out]).accuracy)
        row = CvRow(hyperparameters=candidate, fold_accuracies=tuple(accuracies),
                    mean_accuracy=float(np.mean(accuracies)))
        logger.debug("Candidate %s: mean accuracy %.4f", candidate, row.mean_accuracy)
        rows.append(row)

    best = min(rows, key=lambda r: (-r.mean_accuracy, r.hyperparameters.cell_count, r.hyperparameters.epochs))
    logger.info("Best candidate %s with mean accuracy %.4f over %d candidates",
                best.hyperparameters, best.mean_accuracy, len(rows))
    return GridSearchResult(best=base._replace(**best.hyperparameters._asdict()), table=tuple(rows))
