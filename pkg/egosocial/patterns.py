# Copyright 2024 egosocial developers

import json
import logging
import math
import os

from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from lxml import etree

from .errors import *
from .errors import make_exception
from .ingest import CATEGORIES, SequenceRecord, extract_prototypes

__all__ = (
    "InteractionEvent", "DurationStats", "SocialProfile",
    "frequency", "social_trend", "diversity", "duration_stats", "build_profile", "person_profiles",
    "build_events", "dump_events", "load_events", "temporal_map", "render_temporal_map",
)

__doc__ = """This module contains the social pattern statistics of a person
observed over a number of days:

* frequency: events of a category per observation day
* social trend: fraction of the events that belong to a category
* diversity: half the exponential of the natural-log entropy of the two trends, in [0.5, 1]
* duration: frame count times capture interval, in minutes

Profiles are computed for all events (generic scope) or for the events in which
one face cluster participates (person scope). The temporal map lays events out
per day and renders them as SVG.
"""

logger = logging.getLogger(__name__)

SQUARE = "square"
CIRCLE = "circle"
MARKERS = {"formal": SQUARE, "informal": CIRCLE}
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
DAYS_PER_WEEK = 7
SVG_NAMESPACE = "http://www.w3.org/2000/svg"

_svg = lambda tag: f"{{{SVG_NAMESPACE}}}{tag}"


class InteractionEvent(NamedTuple):
    """A sequence with at least one interacting person.

    ``participants`` are the distinct face cluster ids of the interacting people.
    ``faces`` holds one ``(track_id, cluster id or None)`` pair per interacting
    face, so people without a cluster or sharing one stay apart.
    ``start_time_s`` is the wall-clock start in seconds since midnight, when known.
    """
    sequence_id: str
    day_index: int
    start_frame: int
    end_frame: int
    category: str
    participants: Tuple[int, ...] = ()
    frame_interval_s: float = 30.0
    frame_count: Optional[int] = None
    start_time_s: Optional[float] = None
    faces: Tuple[Tuple[str, Optional[int]], ...] = ()

    @property
    def frames(self):
        return self.frame_count if self.frame_count is not None else self.end_frame - self.start_frame + 1

    @property
    def duration_min(self):
        return self.frames * self.frame_interval_s / 60.0


class DurationStats(NamedTuple):
    """Event durations in minutes; ``stddev`` is the sample deviation, ``stderr`` its standard error."""
    mean: float
    median: float
    stddev: float
    stderr: float


class SocialProfile(NamedTuple):
    scope: str
    f_formal: float
    f_informal: float
    a_formal: float
    a_informal: float
    diversity: float
    duration: DurationStats
    observation_days: int
    event_count: int
    cluster_id: Optional[int] = None


def _check_category(category):
    if category not in CATEGORIES:
        raise make_exception(egosocial_err_bad_category, category=category)


def frequency(events: Sequence[InteractionEvent], days: int, category: str) -> float:
    """Events of *category* per observation day.

    :raises ValueError: *days* below one or unknown category.
    """
    _check_category(category)
    if days < 1:
        raise make_exception(egosocial_err_days_below_one, days=days)
    return sum(1 for e in events if e.category == category) / days


def social_trend(events: Sequence[InteractionEvent], category: str) -> float:
    """Fraction of *events* of *category*.

    :raises InsufficientDataError: No event.
    """
    _check_category(category)
    if not events:
        raise make_exception(egosocial_err_no_events, statistic="Social trend")
    return sum(1 for e in events if e.category == category) / len(events)


def diversity(a_formal: float, a_informal: float) -> float:
    """``0.5 * exp(-sum(a * ln a))`` with ``0 * ln 0 = 0``.

    .. code-block:: python
       :caption: Example

       >>> diversity(0.5, 0.5)
       1.0
       >>> round(diversity(0.25, 0.75), 4)
       0.8774

    :raises InvalidDistributionError: Negative values or a sum other than 1.
    """
    if a_formal < 0 or a_informal < 0 or abs(a_formal + a_informal - 1.0) > 1e-9:
        raise make_exception(egosocial_err_bad_trend, formal=a_formal, informal=a_informal)
    entropy = -sum(a * math.log(a) for a in (a_formal, a_informal) if a > 0)
    return 0.5 * math.exp(entropy)


def duration_stats(events: Sequence[InteractionEvent]) -> DurationStats:
    """Mean, median, sample standard deviation and standard error of event durations.

    :raises InsufficientDataError: No event.
    """
    if not events:
        raise make_exception(egosocial_err_no_events, statistic="Duration")
    durations = np.array([e.duration_min for e in events])
    stddev = float(durations.std(ddof=1)) if len(durations) > 1 else 0.0
    return DurationStats(
        mean=float(durations.mean()),
        median=float(np.median(durations)),
        stddev=stddev,
        stderr=stddev / math.sqrt(len(durations)),
    )


def build_profile(events: Sequence[InteractionEvent], days: int, cluster_id: Optional[int] = None) -> SocialProfile:
    """Social profile over *events*, restricted to one face cluster when *cluster_id* is given.

    :param events: Detected interactions, each with a category.
    :param days: Observation days.
    :param cluster_id: Person scope, or ``None`` for the generic profile.
    :rtype: :py:class:`SocialProfile`
    :raises InsufficientDataError: No event in scope.
    """
    if cluster_id is not None:
        events = [e for e in events if cluster_id in e.participants]
    for e in events:
        _check_category(e.category)
    a_formal = social_trend(events, "formal")
    a_informal = social_trend(events, "informal")
    return SocialProfile(
        scope="generic" if cluster_id is None else f"person {cluster_id}",
        f_formal=frequency(events, days, "formal"),
        f_informal=frequency(events, days, "informal"),
        a_formal=a_formal,
        a_informal=a_informal,
        diversity=diversity(a_formal, a_informal),
        duration=duration_stats(events),
        observation_days=days,
        event_count=len(events),
        cluster_id=cluster_id,
    )


def person_profiles(events: Sequence[InteractionEvent], days: int) -> List[SocialProfile]:
    """One profile per face cluster taking part in *events*, by cluster id."""
    clusters = sorted({c for e in events for c in e.participants})
    return [build_profile(events, days, c) for c in clusters]


def build_events(sequences: Iterable[SequenceRecord],
                 detections: Optional[Mapping[Tuple[str, str], bool]] = None,
                 categories: Optional[Mapping[str, str]] = None,
                 clusters: Optional[Mapping[Tuple[str, str], int]] = None) -> List[InteractionEvent]:
    """Turn sequences into interaction events.

    Detections and categories fall back to the ground truth of a sequence when
    the mappings do not cover it. Sequences without an interacting prototype are
    not events; events whose category is unknown are skipped with a warning.

    :param sequences: Loaded sequences.
    :param detections: ``(sequence_id, track_id) -> interacting``.
    :param categories: ``sequence_id -> "formal" | "informal"``.
    :param clusters: ``(sequence_id, track_id) -> cluster id``.
    """
    detections = detections or {}
    categories = categories or {}
    clusters = clusters or {}
    events = []
    for sequence in sequences:
        interacting = []
        for p in extract_prototypes(sequence):
            flag = detections.get((p.sequence_id, p.track_id), p.interacting)
            if flag:
                interacting.append(p.track_id)
        if not interacting or not sequence.frames:
            continue
        category = categories.get(sequence.sequence_id)
        if category is None and sequence.labels is not None:
            category = sequence.labels.category
        if category is None:
            logger.warning("Sequence %r has interacting people but no category, skipped", sequence.sequence_id)
            continue
        _check_category(category)
        participants = sorted({clusters[(sequence.sequence_id, t)] for t in interacting
                               if (sequence.sequence_id, t) in clusters})
        events.append(InteractionEvent(
            sequence_id=sequence.sequence_id,
            day_index=sequence.day_index,
            start_frame=sequence.frames[0].frame_id,
            end_frame=sequence.frames[-1].frame_id,
            category=category,
            participants=tuple(participants),
            frame_interval_s=sequence.frame_interval_s,
            frame_count=len(sequence.frames),
            start_time_s=sequence.frames[0].timestamp_s,
            faces=tuple((t, clusters.get((sequence.sequence_id, t))) for t in interacting),
        ))
    logger.info("Built %d interaction events", len(events))
    return events


def dump_events(events: Iterable[InteractionEvent], path) -> str:
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8") as f:
        docs = [dict(e._asdict(), participants=list(e.participants), faces=[list(face) for face in e.faces])
                for e in events]
        json.dump({"events": docs}, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_events(path) -> List[InteractionEvent]:
    """Read events written by :py:func:`dump_events`.

    :raises ValueError: An event is inconsistent.
    """
    with open(os.fspath(path), "r", encoding="utf-8") as f:
        doc = json.load(f)
    events = []
    for raw in doc["events"]:
        event = InteractionEvent(**dict(raw, participants=tuple(raw.get("participants", ())),
                                         faces=tuple(tuple(face) for face in raw.get("faces", ()))))
        if event.end_frame < event.start_frame:
            raise make_exception(egosocial_err_bad_event, sequence_id=event.sequence_id,
                                 reason="end_frame precedes start_frame")
        _check_category(event.category)
        events.append(event)
    return events


# -- temporal map -----------------------------------------------------------------

def _members(event):
    # events without per-face detail get one lane per cluster
    return event.faces or tuple((None, c) for c in event.participants)


def temporal_map(events: Iterable[InteractionEvent], week: Optional[int] = None) -> Dict:
    """Lay events out per day.

    Each interval starts at the event's wall-clock time or, without timestamps,
    at its frame offset within the day. Every cluster gets one color index
    (clusters in increasing id order) and each interacting face its own lane,
    also when it has no cluster or shares one with another face.

    :param events: Events to place.
    :param week: Keep only days ``7 * week`` to ``7 * week + 6``.
    :return: ``{"week", "colors", "days": [{"day_index", "intervals": [...]}]}``
    """
    events = sorted(events, key=lambda e: (e.day_index, e.start_frame, e.sequence_id))
    if week is not None:
        events = [e for e in events if e.day_index // DAYS_PER_WEEK == week]
    colors = {c: n for n, c in enumerate(sorted({c for e in events for _, c in _members(e) if c is not None}))}
    days: Dict[int, List] = {}
    for e in events:
        start = e.start_time_s if e.start_time_s is not None else e.start_frame * e.frame_interval_s
        days.setdefault(e.day_index, []).append({
            "sequence_id": e.sequence_id,
            "start_s": float(start),
            "end_s": float(start + e.frames * e.frame_interval_s),
            "category": e.category,
            "marker": MARKERS[e.category],
            "lanes": [{"lane": lane, "track_id": track_id, "cluster_id": c,
                       "color": None if c is None else colors[c]}
                      for lane, (track_id, c) in enumerate(_members(e))],
        })
    return {
        "week": week,
        "colors": {str(c): n for c, n in colors.items()},
        "days": [{"day_index": d, "intervals": intervals} for d, intervals in sorted(days.items())],
    }


def render_temporal_map(document: Mapping, width: int = 960, row_height: int = 40) -> bytes:
    """Render a :py:func:`temporal_map` document as SVG.

    One row per day with hours on the horizontal axis. Each participant is a
    colored line in its own lane; interval ends are squares for formal and
    circles for informal events.
    """
    margin = 60
    plot = width - margin - 10
    days = document.get("days", [])
    height = margin + row_height * max(len(days), 1)
    svg = etree.Element(_svg("svg"), nsmap={None: SVG_NAMESPACE},
                        width=str(width), height=str(height), viewBox=f"0 0 {width} {height}")

    def x_of(seconds):
        return margin + plot * min(max(seconds, 0.0), 86400.0) / 86400.0

    axis = etree.SubElement(svg, _svg("g"), {"class": "axis", "font-size": "10"})
    for hour in range(0, 25, 3):
        x = f"{x_of(hour * 3600):.2f}"
        etree.SubElement(axis, _svg("line"), x1=x, x2=x, y1="30", y2=str(height), stroke="#dddddd")
        label = etree.SubElement(axis, _svg("text"), {"text-anchor": "middle"}, x=x, y="24")
        label.text = f"{hour:02d}:00"

    for row, day in enumerate(days):
        top = margin + row * row_height
        group = etree.SubElement(svg, _svg("g"), {"class": "day", "data-day": str(day["day_index"])})
        label = etree.SubElement(group, _svg("text"), {"font-size": "11"}, x="4", y=str(top + row_height // 2))
        label.text = f"day {day['day_index']}"
        for interval in day["intervals"]:
            x0, x1 = x_of(interval["start_s"]), x_of(interval["end_s"])
            lanes = interval["lanes"] or [{"lane": 0, "cluster_id": None, "color": None}]
            for lane in lanes:
                y = top + 8 + 4 * lane["lane"]
                color = "#000000" if lane["color"] is None else PALETTE[lane["color"] % len(PALETTE)]
                etree.SubElement(group, _svg("line"), {"stroke-width": "2"}, x1=f"{x0:.2f}", x2=f"{x1:.2f}",
                                 y1=str(y), y2=str(y), stroke=color)
            y_mid = top + 8 + 2 * (len(lanes) - 1)
            for x in (x0, x1):
                if interval["marker"] == SQUARE:
                    etree.SubElement(group, _svg("rect"), x=f"{x - 3:.2f}", y=f"{y_mid - 3:.2f}", width="6", height="6",
                                     fill="none", stroke="#000000")
                else:
                    etree.SubElement(group, _svg("circle"), cx=f"{x:.2f}", cy=f"{y_mid:.2f}", r="3",
                                     fill="none", stroke="#000000")
    return etree.tostring(svg, pretty_print=True, xml_declaration=True, encoding="UTF-8")
