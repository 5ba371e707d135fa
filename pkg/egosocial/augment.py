# Copyright 2024 egosocial developers

import logging

from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from .errors import *
from .errors import make_exception
from .ingest import EXPRESSIONS
from .signals import DETECTION_SETTINGS, EXPRESSION_COLUMN, Provenance, TimeSeries

__all__ = (
    "AugmentSpec", "Eigenbasis", "default_frozen_dims", "fit_eigenbasis",
    "perturbation_draws", "perturbation", "augment_series", "augment",
)

__doc__ = """This module enlarges a training set with label-preserving copies of
each series perturbed along the principal axes of the frame rows.

Copy ``0`` of every series is the original. Each further copy adds, at every
frame, ``sum_k theta_k * lambda_k * P_k`` to the non-frozen columns, with
``theta_k`` drawn from ``Normal(0, noise_sigma)``. Frozen columns, such as the
expression index or the mean expression distribution, are copied verbatim.
"""

logger = logging.getLogger(__name__)


class AugmentSpec(NamedTuple):
    """``multiplier`` is the number of copies per series, the original included."""
    multiplier: int = 1
    noise_sigma: float = 0.01
    frozen_dims: Tuple[int, ...] = ()
    rng_seed: int = 0

    def validate(self, dim: int):
        if isinstance(self.multiplier, bool) or not isinstance(self.multiplier, (int, np.integer)) \
                or self.multiplier < 1:
            raise make_exception(egosocial_err_bad_multiplier, multiplier=self.multiplier)
        if not self.noise_sigma >= 0.0:
            raise make_exception(egosocial_err_bad_sigma, sigma=self.noise_sigma)
        if any(d < 0 or d >= dim for d in self.frozen_dims):
            raise make_exception(egosocial_err_bad_frozen_dims, dims=sorted(self.frozen_dims), dim=dim)
        return self


class Eigenbasis(NamedTuple):
    """Eigenvectors (as columns) and descending eigenvalues of the row covariance
    restricted to ``columns``; ``dim`` is the full series dimension.
    """
    vectors: np.ndarray
    values: np.ndarray
    columns: Tuple[int, ...]
    dim: int


def default_frozen_dims(setting: str, dim: int) -> Tuple[int, ...]:
    """Columns holding expression information for *setting*."""
    if setting in DETECTION_SETTINGS:
        columns = DETECTION_SETTINGS[setting]
        return tuple(i for i, c in enumerate(columns) if c == EXPRESSION_COLUMN)
    if setting == "SIC3":
        return tuple(range(dim - len(EXPRESSIONS), dim))
    return ()


def fit_eigenbasis(series_set: Iterable[TimeSeries], frozen_dims: Iterable[int] = ()) -> Eigenbasis:
    """Eigendecomposition of the covariance of every frame row over the non-frozen columns.

    :param series_set: Series of one dimension.
    :param frozen_dims: Columns excluded from the decomposition.
    :rtype: :py:class:`Eigenbasis`
    :raises FitDegenerateError: Fewer than two frames or zero covariance.
    """
    rows = np.vstack([np.asarray(s.matrix, dtype=float) for s in series_set])
    if rows.shape[0] < 2:
        raise make_exception(egosocial_err_eigen_too_few_frames, count=rows.shape[0])
    dim = rows.shape[1]
    frozen = set(frozen_dims)
    if any(d < 0 or d >= dim for d in frozen):
        raise make_exception(egosocial_err_bad_frozen_dims, dims=sorted(frozen), dim=dim)
    columns = tuple(c for c in range(dim) if c not in frozen)
    covariance = np.atleast_2d(np.cov(rows[:, columns], rowvar=False))
    if not np.any(covariance):
        raise make_exception(egosocial_err_eigen_zero_covariance)
    values, vectors = np.linalg.eigh(covariance)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order]
    for k in range(vectors.shape[1]):
        if vectors[np.argmax(np.abs(vectors[:, k])), k] < 0:
            vectors[:, k] *= -1.0
    return Eigenbasis(vectors=vectors, values=values, columns=columns, dim=dim)


def perturbation_draws(spec: AugmentSpec, index: int, timesteps: int, k: int) -> List[np.ndarray]:
    """Coefficients ``theta`` (``timesteps x k``) of copies ``1 .. multiplier - 1`` of series *index*.

    Draws depend only on ``(spec.rng_seed, index)`` so series can be augmented in any order.
    """
    rng = np.random.default_rng((spec.rng_seed, index))
    return [rng.normal(0.0, spec.noise_sigma, size=(timesteps, k)) if spec.noise_sigma > 0
            else np.zeros((timesteps, k))
            for _ in range(spec.multiplier - 1)]


def perturbation(basis: Eigenbasis, theta: np.ndarray) -> np.ndarray:
    """Per-frame offsets ``sum_k theta[t, k] * lambda_k * P_k`` for the non-frozen columns."""
    return (theta * basis.values) @ basis.vectors.T


def augment_series(series: TimeSeries, index: int, basis: Eigenbasis, spec: AugmentSpec) -> List[TimeSeries]:
    """The ``spec.multiplier`` copies of one series, the original first."""
    if series.dim != basis.dim:
        raise make_exception(egosocial_err_dim_mismatch, expected=basis.dim, got=series.dim)
    columns = list(basis.columns)
    copies = [series._replace(provenance=Provenance(source=series.origin, copy=0, seed=spec.rng_seed))]
    for n, theta in enumerate(perturbation_draws(spec, index, series.timesteps, len(columns)), start=1):
        matrix = np.array(series.matrix, dtype=float, copy=True)
        matrix[:, columns] += perturbation(basis, theta)
        copies.append(series._replace(matrix=matrix,
                                      provenance=Provenance(source=series.origin, copy=n, seed=spec.rng_seed)))
    return copies


def augment(series_set: Sequence[TimeSeries], spec: AugmentSpec, basis: Eigenbasis = None,
            threads: int = 1) -> List[TimeSeries]:
    """Augment every series of *series_set* into ``spec.multiplier`` copies.

    The eigenbasis is fitted on *series_set* unless given. The result holds the
    copies of each series together, in input order.

    .. code-block:: python
       :caption: Example - triple a SID4 training set

       spec = AugmentSpec(multiplier=3, frozen_dims=default_frozen_dims("SID4", 5), rng_seed=7)
       augmented = augment(train_series, spec)

    :raises ValueError: Invalid spec or dimension mismatch with *basis*.
    :raises FitDegenerateError: The eigenbasis cannot be fitted.
    """
    series_set = list(series_set)
    if not series_set:
        return []
    spec.validate(series_set[0].dim)
    if basis is None:
        basis = fit_eigenbasis(series_set, spec.frozen_dims)
    elif set(range(basis.dim)) - set(basis.columns) != set(spec.frozen_dims):
        raise make_exception(egosocial_err_bad_frozen_dims, dims=sorted(spec.frozen_dims), dim=basis.dim)

    def job(item):
        index, series = item
        return augment_series(series, index, basis, spec)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            groups = list(pool.map(job, enumerate(series_set)))
    else:
        groups = [job(item) for item in enumerate(series_set)]
    result = [s for group in groups for s in group]
    logger.info("Augmented %d series into %d (sigma %g, frozen %s)",
                len(series_set), len(result), spec.noise_sigma, sorted(spec.frozen_dims))
    return result
