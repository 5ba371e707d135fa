# Copyright 2024 egosocial developers

import io

import pytest

from egosocial.lstm import Metrics
from egosocial.patterns import DurationStats, SocialProfile
from egosocial.pprint import Column, KeyValueTable, Padding, Table, print_metrics, print_profiles


def lines(stream):
    return stream.getvalue().splitlines()


def test_table_layout():
    out = io.StringIO()
    Table("Clusters", [(10, "Cluster"), (10, "Faces", ">")], width=21, show_count="Cluster", out=out).print([(1, 77)])
    assert lines(out) == [
        "=" * 21,
        "Clusters",
        "=" * 21,
        "Cluster         Faces",
        "-" * 21,
        "1                  77",
        "-" * 21,
        "No. of Cluster: 1",
        "=" * 21,
    ]


def test_table_counts_rows_and_prints_summary():
    out = io.StringIO()
    table = Table(None, [(4, "A"), Padding(2), (4, "B")], width=12, show_count="Row", summary="done", out=out)
    table.print([("x", "y"), ("z", "w")])
    assert "A       B" in lines(out)
    assert "x       y" in lines(out)
    assert lines(out)[-3:] == ["No. of Row: 2", "done", "=" * 12]


def test_truncated_cell_is_marked():
    out = io.StringIO()
    Table("T", [(5, "Name")], width=10, out=out).print([("abcdefgh",)])
    assert "abcd*" in lines(out)
    assert lines(out)[-1].startswith("* indicates")


def test_untruncated_table_has_no_footnote():
    out = io.StringIO()
    Table("T", [(5, "Name")], width=10, out=out).print([("abc",)])
    assert not any(line.startswith("*") for line in lines(out))


def test_key_value_table():
    out = io.StringIO()
    KeyValueTable("KV", [(6, None), (4, None), (3, None), (4, None)], width=30, out=out).print(
        [("a", 1), ("bb", 2), ("c", 3)])
    assert lines(out)[3:5] == ["a     : 1    bb : 2", "c     : 3"]


def test_invalid_alignment():
    with pytest.raises(ValueError, match="alignment"):
        Column(5, "x", align="|")


def test_key_value_table_needs_pairs():
    with pytest.raises(ValueError):
        KeyValueTable("KV", [(6, None), Padding(1), (4, None), (4, None)])


def test_column_create():
    column = Column(3)
    assert Column.create(column) is column
    assert Column.create((4, "n", ">")).align == ">"
    with pytest.raises(TypeError):
        Column.create("wide")


def test_print_metrics():
    out = io.StringIO()
    print_metrics(Metrics(precision=84 / 92, recall=0.84, accuracy=0.88, tp=84, fp=8, fn=16, tn=92), out=out)
    text = out.getvalue()
    assert "Precision   : 0.9130" in text
    assert "Accuracy    : 0.8800" in text
    assert "TN  : 92" in text


def test_print_profiles():
    out = io.StringIO()
    profile = SocialProfile(scope="generic", observation_days=30, f_formal=0.8333, f_informal=2.5, a_formal=0.25,
                            a_informal=0.75, diversity=0.8774, duration=DurationStats(12.5, 10.0, 3.25, 0.5),
                            event_count=100)
    print_profiles([profile], out=out)
    row = next(line for line in lines(out) if line.startswith("generic"))
    assert row.split() == ["generic", "0.83", "2.50", "0.25", "0.75", "0.88", "12.50+-3.25", "100"]
    assert "No. of Profile: 1" in lines(out)
