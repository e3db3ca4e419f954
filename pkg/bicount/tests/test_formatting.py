import numpy as np
import pandas as pd
from bicount.formatting import (
    CSS_STYLE,
    create_header,
    format_comparison,
    format_frame,
    format_frame_html,
)
from bicount.nodal import BICountSequence
from bicount.pipeline import ComparisonReport


def test_create_header():
    text = create_header("bicount.X", ["rows", "columns"], [3, "n, k"], lower_border=True)
    lines = text.splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("bicount.X")
    assert lines[2] == "-" * len(lines[0])


def test_format_frame():
    frame = pd.DataFrame({"n": np.arange(1, 101), "eta": np.zeros(100, int)})
    text = format_frame(frame, "BICountSequence", max_rows=10)
    assert text.startswith(" " * len("bicount.BICountSequence"))
    assert "bicount.BICountSequence" in text
    assert "n, eta" in text
    assert "..." in text
    html = format_frame_html(frame, "BICountSequence", max_rows=10)
    assert CSS_STYLE in html
    assert "<pre>bicount.BICountSequence</pre>" in html


def test_sequence_html():
    seq = BICountSequence([1, 2], [2.0, 3.0], [0, 2], area=1.0, perimeter=4.0)
    assert "bc-info-table" in seq._repr_html_()
    assert repr(seq) == "BICountSequence(2 records)"


def test_format_comparison():
    table = pd.DataFrame({"x_semiclassical": [3.0], "matched": [True]})
    report = ComparisonReport(table, pd.DataFrame(columns=["x", "height"]), 0.001, 1.25, 0.4, 0.1)
    text = format_comparison(report)
    assert "bicount.PeakComparison" in text
    assert "0.001" in text
    assert "1.25" in text
