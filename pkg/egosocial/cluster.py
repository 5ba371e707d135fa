# Copyright 2024 egosocial developers

import json
import logging
import os

from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .errors import *
from .errors import make_exception
from .ingest import UNIT_NORM_TOLERANCE, SequenceRecord, extract_prototypes

__all__ = (
    "FaceSet", "ClusterResult", "ClusterReport", "PairwiseScore",
    "make_faceset", "faceset_dissimilarity", "symmetrized_dissimilarity", "dissimilarity_matrix",
    "calibrate_cutoff", "agglomerate", "cluster_report", "pairwise_fscore",
    "facesets_from_sequences", "dump_cluster_result", "load_cluster_assignment",
)

__doc__ = """This module groups face-sets, the face embeddings of one tracked person
in one sequence, so that the same person is recognised across events.

The dissimilarity of face-set ``R`` to ``T`` is the absolute difference between
the median cosine similarity of the distinct pairs inside ``R`` and the median
similarity of the pairs across ``R`` and ``T``. Clustering uses its symmetric
average with average linkage and stops merging above a cutoff calibrated as the
median dissimilarity between face-sets of the same person.

.. code-block:: python
   :caption: Example

   learning = facesets_from_sequences(learning_sequences)
   cutoff = calibrate_cutoff(learning)
   result = agglomerate(facesets_from_sequences(sequences), cutoff)
"""

logger = logging.getLogger(__name__)

LINKAGE = "average"


class FaceSet(NamedTuple):
    """``id`` is ``(sequence_id, track_id)``; ``embeddings`` is ``n x dim`` with unit-norm rows."""
    id: Tuple[str, str]
    embeddings: np.ndarray
    person: Optional[str] = None

    @property
    def size(self):
        return self.embeddings.shape[0]


class ClusterResult(NamedTuple):
    """Clusters are tuples of face-set ids, numbered from 1 in tuple order.

    ``merge_heights`` lists the linkage distance of every merge of the full
    dendrogram, non-decreasing.
    """
    clusters: Tuple[Tuple[Tuple[str, str], ...], ...]
    cutoff: float
    linkage: str = LINKAGE
    merge_heights: Tuple[float, ...] = ()

    def assignment(self) -> Dict[Tuple[str, str], int]:
        return {member: number for number, cluster in enumerate(self.clusters, start=1) for member in cluster}


class ClusterReport(NamedTuple):
    cluster_id: int
    members: Tuple[Tuple[str, str], ...]
    sequences: Tuple[str, ...]
    faces: int
    categories: Optional[Mapping[str, int]] = None
    interacting: Optional[int] = None


class PairwiseScore(NamedTuple):
    precision: float
    recall: float
    fscore: float


def make_faceset(faceset_id, embeddings, person=None) -> FaceSet:
    """Build a validated :py:class:`FaceSet`.

    :raises ValueError: No embedding, or a row that is not unit-norm within 1e-6.
    """
    sequence_id, track_id = faceset_id
    faceset_id = (str(sequence_id), str(track_id))
    matrix = np.atleast_2d(np.asarray(embeddings, dtype=float))
    if matrix.size == 0:
        raise make_exception(egosocial_err_faceset_empty, faceset_id=faceset_id)
    norms = np.linalg.norm(matrix, axis=1)
    for index, norm in enumerate(norms):
        if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
            raise make_exception(egosocial_err_faceset_not_unit, faceset_id=faceset_id, index=index, norm=norm)
    return FaceSet(id=faceset_id, embeddings=matrix, person=person)


def _within_median(faceset: FaceSet) -> float:
    if faceset.size == 1:
        return 1.0
    similarities = faceset.embeddings @ faceset.embeddings.T
    return float(np.median(similarities[np.triu_indices(faceset.size, k=1)]))


def _cross_median(r: FaceSet, t: FaceSet) -> float:
    if r.embeddings.shape[1] != t.embeddings.shape[1]:
        raise make_exception(egosocial_err_dim_mismatch, expected=r.embeddings.shape[1], got=t.embeddings.shape[1])
    return float(np.median(r.embeddings @ t.embeddings.T))


def faceset_dissimilarity(r: FaceSet, t: FaceSet) -> float:
    """Dissimilarity of *t* with respect to the reference face-set *r*.

    A single-embedding reference has a within-set median of 1.

    .. code-block:: python
       :caption: Example

       >>> r = make_faceset(("s1", "1"), [[1, 0], [0, 1]])
       >>> t = make_faceset(("s2", "1"), [[1, 0]])
       >>> faceset_dissimilarity(r, t)
       0.5
    """
    return abs(_within_median(r) - _cross_median(r, t))


def symmetrized_dissimilarity(r: FaceSet, t: FaceSet) -> float:
    return (faceset_dissimilarity(r, t) + faceset_dissimilarity(t, r)) / 2.0


def dissimilarity_matrix(facesets: Sequence[FaceSet], threads: int = 1) -> np.ndarray:
    """Square matrix of :py:func:`symmetrized_dissimilarity` values, zero diagonal."""
    n = len(facesets)
    within = [_within_median(f) for f in facesets]

    def row(i):
        values = []
        for j in range(i + 1, n):
            cross = _cross_median(facesets[i], facesets[j])
            values.append((abs(within[i] - cross) + abs(within[j] - cross)) / 2.0)
        return values

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(n)))
    else:
        rows = [row(i) for i in range(n)]
    matrix = np.zeros((n, n))
    for i, values in enumerate(rows):
        matrix[i, i + 1:] = values
        matrix[i + 1:, i] = values
    return matrix


def calibrate_cutoff(facesets: Iterable[FaceSet]) -> float:
    """Median symmetrized dissimilarity over every pair of face-sets of the same person.

    :raises InsufficientDataError: No two face-sets share a person label.
    """
    groups = defaultdict(list)
    for f in facesets:
        if f.person is not None:
            groups[f.person].append(f)
    values = [symmetrized_dissimilarity(members[i], members[j])
              for members in groups.values()
              for i in range(len(members)) for j in range(i + 1, len(members))]
    if not values:
        raise make_exception(egosocial_err_no_same_person_pair)
    cutoff = float(np.median(values))
    logger.info("Calibrated clustering cutoff %.6f from %d same-person pairs", cutoff, len(values))
    return cutoff


def agglomerate(facesets: Iterable[FaceSet], cutoff: float, threads: int = 1) -> ClusterResult:
    """Average-linkage agglomerative clustering of face-sets.

    Merging stops once the smallest linkage distance exceeds *cutoff*. Face-sets
    are ordered by id first, so the result does not depend on input order.

    :param facesets: At least one face-set.
    :param cutoff: Largest linkage distance still merged.
    :param threads: Workers computing the dissimilarity matrix.
    :rtype: :py:class:`ClusterResult`
    """
    facesets = sorted(facesets, key=lambda f: f.id)
    if len(facesets) == 1:
        return ClusterResult(clusters=((facesets[0].id,),), cutoff=float(cutoff))
    condensed = squareform(dissimilarity_matrix(facesets, threads), checks=False)
    tree = linkage(condensed, method=LINKAGE)
    flat = fcluster(tree, t=cutoff, criterion="distance")

    numbering: Dict[int, List[Tuple[str, str]]] = {}
    for faceset, label in zip(facesets, flat):
        numbering.setdefault(int(label), []).append(faceset.id)
    result = ClusterResult(
        clusters=tuple(tuple(members) for members in numbering.values()),
        cutoff=float(cutoff),
        merge_heights=tuple(float(h) for h in tree[:, 2]),
    )
    logger.info("Grouped %d face-sets into %d clusters at cutoff %.6f", len(facesets), len(result.clusters), cutoff)
    return result


def pairwise_fscore(result: ClusterResult, facesets: Iterable[FaceSet]) -> PairwiseScore:
    """Pairwise precision, recall and F-score of *result* against the person labels."""
    persons = {f.id: f.person for f in facesets if f.person is not None}
    assignment = result.assignment()
    ids = sorted(persons)
    tp = fp = fn = 0
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            same_cluster = assignment[ids[a]] == assignment[ids[b]]
            same_person = persons[ids[a]] == persons[ids[b]]
            tp += same_cluster and same_person
            fp += same_cluster and not same_person
            fn += same_person and not same_cluster
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    fscore = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PairwiseScore(precision, recall, fscore)


def cluster_report(result: ClusterResult, facesets: Iterable[FaceSet],
                   categories: Optional[Mapping[str, Optional[str]]] = None,
                   interactions: Optional[Mapping[Tuple[str, str], bool]] = None) -> List[ClusterReport]:
    """Summarise every cluster: member sequences, face count and the labels of its events.

    :param result: Clustering result.
    :param facesets: The clustered face-sets.
    :param categories: ``sequence_id -> "formal" | "informal"``; category counts are omitted without it.
    :param interactions: ``(sequence_id, track_id) -> interacting``.
    :raises UnknownReferenceError: A member sequence is missing from *categories*.
    """
    sizes = {f.id: f.size for f in facesets}
    reports = []
    for number, members in enumerate(result.clusters, start=1):
        sequences = tuple(sorted({sequence_id for sequence_id, _ in members}))
        counts = None
        if categories:
            counts = Counter()
            for sequence_id in sequences:
                if sequence_id not in categories:
                    raise make_exception(egosocial_err_unknown_sequence, cluster_id=number, sequence_id=sequence_id)
                if categories[sequence_id] is not None:
                    counts[categories[sequence_id]] += 1
            counts = {"formal": counts["formal"], "informal": counts["informal"]}
        interacting = None
        if interactions:
            interacting = sum(1 for m in members if interactions.get(m))
        reports.append(ClusterReport(
            cluster_id=number,
            members=tuple(members),
            sequences=sequences,
            faces=sum(sizes.get(m, 0) for m in members),
            categories=counts,
            interacting=interacting,
        ))
    return reports


def facesets_from_sequences(sequences: Iterable[SequenceRecord], interacting_only: bool = False,
                            detections: Optional[Mapping[Tuple[str, str], bool]] = None) -> List[FaceSet]:
    """One face-set per prototype carrying embeddings, labeled with its ground-truth person.

    :param sequences: Loaded sequences.
    :param interacting_only: Keep prototypes detected (or labeled) as interacting.
    :param detections: ``(sequence_id, track_id) -> interacting`` overriding the labels.
    """
    facesets = []
    for sequence in sequences:
        for prototype in extract_prototypes(sequence):
            key = (prototype.sequence_id, prototype.track_id)
            if interacting_only:
                flag = detections.get(key) if detections is not None else None
                if flag is None:
                    flag = prototype.interacting
                if not flag:
                    continue
            embeddings = [o.embedding for o in prototype.observations if o is not None and o.embedding is not None]
            if embeddings:
                facesets.append(make_faceset(key, embeddings, prototype.person))
    return facesets


def dump_cluster_result(result: ClusterResult, reports: Sequence[ClusterReport], path,
                        facesets: Iterable[FaceSet] = ()) -> str:
    """Export clusters as ``{"clusters": [{"id", "members", ...}], ...}``."""
    persons = {f.id: f.person for f in facesets}
    doc = {
        "cutoff": result.cutoff,
        "linkage": result.linkage,
        "merge_heights": list(result.merge_heights),
        "clusters": [{
            "id": report.cluster_id,
            "members": [{"sequence_id": s, "track_id": t, "person": persons.get((s, t))} for s, t in report.members],
            "sequences": list(report.sequences),
            "faces": report.faces,
            "categories": report.categories,
            "interacting": report.interacting,
        } for report in reports],
    }
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_cluster_assignment(path) -> Dict[Tuple[str, str], int]:
    """Read ``(sequence_id, track_id) -> cluster id`` from :py:func:`dump_cluster_result` output."""
    with open(os.fspath(path), "r", encoding="utf-8") as f:
        doc = json.load(f)
    return {(m["sequence_id"], m["track_id"]): int(c["id"]) for c in doc["clusters"] for m in c["members"]}
