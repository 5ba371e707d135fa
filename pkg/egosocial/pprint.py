# Copyright 2024 egosocial developers

import sys

from .errors import *
from .errors import make_exception

__all__ = (
    "Column", "Padding", "Table", "KeyValueTable",
    "print_dataset_summary", "print_metrics", "print_train_report", "print_cv_table",
    "print_profiles", "print_clusters", "print_distance_model",
)

__doc__ = """This module renders human-readable summaries as fixed-width tables:
a title between double lines, column headers over a single line, an optional
row count and a footnote when a value had to be truncated.

.. code-block:: python
   :caption: Example

   >>> from egosocial.pprint import Table
   >>> Table("Clusters", [(10, "Cluster"), (10, "Faces", ">")], width=21, show_count="Cluster").print([(1, 77)])
   =====================
   Clusters
   =====================
   Cluster         Faces
   ---------------------
   1                  77
   ---------------------
   No. of Cluster: 1
   =====================
"""


class Column:
    """Column of a :py:class:`Table` or :py:class:`KeyValueTable`.

    :param width: Width in characters, padding included.
    :param name: Header, or None.
    :param align: ``<`` left, ``>`` right or ``^`` centered.
    :param padding: Leading blanks.
    :raises ValueError: Invalid alignment.
    """
    def __init__(self, width, name=None, align="<", padding=0):
        if align not in ("<", ">", "^"):
            raise make_exception(egosocial_err_invalid_align, align=align)
        self.name = name
        self.width = width
        self.align = align
        self.padding = padding

    def format(self, value):
        return " " * self.padding + f"{value:{self.align}{self.width - self.padding}s}"

    @staticmethod
    def create(arg):
        if isinstance(arg, Column):
            return arg
        if isinstance(arg, tuple):
            return Column(*arg)
        raise make_exception(egosocial_err_invalid_column, column=arg)


class Padding(Column):
    """Empty column adding blank space."""
    def __init__(self, width):
        super().__init__(width, padding=width)


class _Table:
    def __init__(self, title, width=79, out=None):
        self._title = title
        self._width = width
        self._out = out
        self.reset()

    def reset(self):
        self._rows = 0
        self._truncated = False

    @property
    def out(self):
        return self._out if self._out is not None else sys.stdout

    def _write(self, text="", end="\n"):
        self.out.write(text + end)

    def print_header(self, minor=False):
        line = ("-" if minor else "=") * self._width
        self._write(line)
        if self._title:
            self._write(self._title)
            self._write(line)

    def print_footer(self):
        self._write("=" * self._width)
        if self._truncated:
            self._write("* indicates that the corresponding row element may have been truncated.")

    def _cell(self, value, col):
        text = "" if value is None else str(value)
        if col.padding + len(text) > col.width:
            self._truncated = True
            text = text[:col.width - col.padding - 1] + "*"
        return col.format(text)


class Table(_Table):
    """Tabulated rows in the style of the examples above.

    :param title: Title, or None.
    :param columns: :py:class:`Column` objects or tuples passed to :py:meth:`Column.create`.
    :param width: Width in characters.
    :param show_count: Name of the row object counted in the footer, or None.
    :param summary: Text printed under the count.
    :param out: Text stream, standard output by default.
    """
    def __init__(self, title, columns, width=79, show_count=None, summary=None, out=None):
        super().__init__(title, width=width, out=out)
        self._columns = [Column.create(c) for c in columns]
        self._show_count = show_count
        self._summary = summary

    def print(self, rows):
        self.reset()
        self.print_header()
        self.print_column_headers()
        for row in rows:
            self.print_row(row)
        if self._show_count is not None or self._summary is not None:
            self._write("-" * self._width)
            if self._show_count:
                self._write(f"No. of {self._show_count}: {self._rows}")
            if self._summary is not None:
                self._write(self._summary)
        self.print_footer()

    def print_row(self, row):
        values = iter(row)
        cells = []
        for col in self._columns:
            value = "" if isinstance(col, Padding) else next(values, "")
            cells.append(self._cell(value, col))
        self._write(" ".join(cells).rstrip())
        self._rows += 1

    def print_column_headers(self):
        if any(col.name for col in self._columns):
            self.print_row([col.name for col in self._columns if not isinstance(col, Padding)])
            self._rows -= 1
            self._write("-" * self._width)


class KeyValueTable(_Table):
    """``key : value`` pairs spread over pairs of columns.

    :raises ValueError: The number of non-padding columns is odd.
    """
    def __init__(self, title, columns, width=79, out=None):
        super().__init__(title, width=width, out=out)
        self._columns = [Column.create(c) for c in columns]
        if sum(1 for c in self._columns if not isinstance(c, Padding)) % 2:
            raise make_exception(egosocial_err_even_columns_required)

    def print_kvs(self, items):
        pairs = [c for c in self._columns if not isinstance(c, Padding)]
        per_row = len(pairs) // 2
        items = list(items)
        for start in range(0, len(items), per_row):
            cells = []
            for (key, value), n in zip(items[start:start + per_row], range(0, len(pairs), 2)):
                cells.append(self._cell(key, pairs[n]) + ": " + self._cell(value, pairs[n + 1]))
            self._write(" ".join(cells).rstrip())

    def print(self, items):
        self.reset()
        self.print_header()
        self.print_kvs(items)
        self.print_footer()


def _fmt(value, digits=4):
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def print_dataset_summary(summary, out=None):
    """Print the counts of :py:func:`egosocial.ingest.dataset_summary`."""
    KeyValueTable("Dataset", [(24, None), (12, None)], width=40, out=out).print([
        ("Sequences", summary.sequences),
        ("Prototypes", summary.prototypes),
        ("Interacting prototypes", summary.interacting),
        ("Formal sequences", summary.formal),
        ("Informal sequences", summary.informal),
        ("Persons", summary.persons),
        ("Days", summary.days),
    ])


def print_distance_model(model, out=None):
    KeyValueTable("Distance model", [(16, None), (20, None)], width=40, out=out).print([
        ("a", f"{model.a:.6g}"), ("b", f"{model.b:.6g}"), ("c", f"{model.c:.6g}"),
        ("RMS residual (cm)", _fmt(model.residual, 3)),
        ("Height range (px)", f"{model.height_min:g} - {model.height_max:g}"),
    ])


def print_metrics(metrics, title="Evaluation", out=None):
    KeyValueTable(title, [(12, None), (10, None), (4, None), (6, None)], width=40, out=out).print([
        ("Precision", _fmt(metrics.precision)), ("TP", metrics.tp),
        ("Recall", _fmt(metrics.recall)), ("FP", metrics.fp),
        ("Accuracy", _fmt(metrics.accuracy)), ("FN", metrics.fn),
        ("", ""), ("TN", metrics.tn),
    ])


def print_train_report(report, out=None):
    losses = report.epoch_losses
    KeyValueTable("Training", [(20, None), (16, None)], width=40, out=out).print([
        ("Epochs", len(losses)),
        ("First epoch loss", _fmt(losses[0] if losses else None, 6)),
        ("Last epoch loss", _fmt(losses[-1] if losses else None, 6)),
        ("Training accuracy", _fmt(report.accuracy)),
        ("Wall clock (s)", _fmt(report.wall_clock_s, 2)),
        ("Seed", report.rng_seed),
    ])


def print_cv_table(result, out=None):
    """Print every grid-search candidate and mark the selected one."""
    best = result.best.hyperparameters
    columns = [(2, None), (10, "LR", ">"), (8, "Momentum", ">"), (7, "Dropout", ">"),
               (6, "Batch", ">"), (6, "Epochs", ">"), (6, "Cells", ">"), (10, "Accuracy", ">")]
    rows = [("*" if row.hyperparameters == best else "",
             f"{row.hyperparameters.learning_rate:.3g}", f"{row.hyperparameters.momentum:.3f}",
             f"{row.hyperparameters.dropout_rate:.3f}", row.hyperparameters.batch_size,
             row.hyperparameters.epochs, row.hyperparameters.cell_count, _fmt(row.mean_accuracy))
            for row in result.table]
    Table("Grid search", columns, width=64, show_count="Candidate", summary="* selected candidate",
          out=out).print(rows)


def print_profiles(profiles, out=None):
    columns = [(12, "Scope"), (7, "F-F", ">"), (7, "F-I", ">"), (6, "A-F", ">"), (6, "A-I", ">"),
               (6, "D", ">"), (16, "L (min)", ">"), (6, "Events", ">")]
    rows = [(p.scope, _fmt(p.f_formal, 2), _fmt(p.f_informal, 2), _fmt(p.a_formal, 2), _fmt(p.a_informal, 2),
             _fmt(p.diversity, 2), f"{p.duration.mean:.2f}+-{p.duration.stddev:.2f}", p.event_count)
            for p in profiles]
    Table("Social profiles", columns, width=79, show_count="Profile", out=out).print(rows)


def print_clusters(reports, out=None):
    columns = [(8, "Cluster"), (10, "Face-sets", ">"), (10, "Sequences", ">"), (8, "Faces", ">"),
               (8, "Formal", ">"), (9, "Informal", ">")]
    rows = [(r.cluster_id, len(r.members), len(r.sequences), r.faces,
             _fmt(r.categories["formal"] if r.categories else None),
             _fmt(r.categories["informal"] if r.categories else None))
            for r in reports]
    Table("Face clusters", columns, width=60, show_count="Cluster", out=out).print(rows)
