import pandas as pd

# Kept small; the notebook reprs only need a header table and a dataframe preview.
CSS_STYLE = """
<style>
table.bc-info-table {
    border: 1px solid black;
    max-width: 100%;
    margin-top: 0px;
    margin-bottom: 0px;
    padding-top: 0px;
    padding-bottom: 0px;
}

td.bc-info-name-cell {
    line-height: 100%;
}

details.bc-arg-details {
    margin-top: 0px;
    margin-bottom: 0px;
    padding-top: 0px;
    padding-bottom: 5px;
    margin-left: 10px;
}

summary.bc-arg-summary {
    display: list-item;
    outline: none;
    margin-top: 0px;
    margin-bottom: 0px;
    padding-top: 0px;
    padding-bottom: 0px;
    margin-left: -10px;
}

/* modify pandas dataframe */
table.dataframe {
    margin-top: 0px;
    margin-bottom: 0px;
    padding-top: 0px;
    padding-bottom: 0px;
}
</style>
"""


def frame_info(frame, title):
    name = f"bicount.{title}"
    keys = ["rows", "columns"]
    vals = [len(frame), ", ".join(map(str, frame.columns))]
    return name, keys, vals


def create_header_html(name, keys, vals):
    text = [
        '<div>\n<table class="bc-info-table">\n'
        "  <tr>\n"
        f'    <td rowspan="2" class="bc-info-name-cell"><pre>{name}</pre></td>\n'
    ]
    text.extend(f"    <td><pre>{key}</pre></td>\n" for key in keys)
    text.append("  </tr>\n  <tr>\n")
    text.extend(f"    <td>{val}</td>\n" for val in vals)
    text.append("  </tr>\n</table>\n</div>\n")
    return "".join(text)


def create_header(type_name, keys, vals, *, lower_border=False):
    vals = [str(x) for x in vals]
    key_text = []
    val_text = []
    for key, val in zip(keys, vals):
        width = max(len(key), len(val)) + 2
        key_text.append(key.rjust(width))
        val_text.append(val.rjust(width))
    name_width = len(type_name)
    lines = [
        f"{''.ljust(name_width)}{''.join(key_text)}",
        f"{type_name}{''.join(val_text)}",
    ]
    if lower_border:
        lines.append("-" * len(lines[0]))
    return "\n".join(lines)


def format_frame_html(frame, title, *, max_rows=None):
    name, keys, vals = frame_info(frame, title)
    header = create_header_html(name, keys, vals)
    if max_rows is None:
        max_rows = pd.options.display.max_rows
    options = (
        "display.show_dimensions",
        False,
        "display.large_repr",
        "truncate",
        "display.max_rows",
        max_rows,
    )
    with pd.option_context(*options):
        details = frame._repr_html_()
    return (
        "<div>"
        f"{CSS_STYLE}"
        '<details open class="bc-arg-details">'
        '<summary class="bc-arg-summary">'
        f"{header}"
        "</summary>"
        f"{details}"
        "</details>"
        "</div>"
    )


def format_frame(frame, title, *, max_rows=None):
    name, keys, vals = frame_info(frame, title)
    header = create_header(name, keys, vals, lower_border=True)
    if max_rows is None:
        max_rows = pd.options.display.max_rows
    options = (
        "display.show_dimensions",
        False,
        "display.large_repr",
        "truncate",
        "display.max_rows",
        max_rows,
    )
    with pd.option_context(*options):
        df_repr = frame.__repr__()
    return f"{header}\n{df_repr}"


def format_comparison(report, *, max_rows=None):
    """Text form of a peak-match table with its background line"""
    body = format_frame(report.table, "PeakComparison", max_rows=max_rows)
    return (
        f"{body}\n"
        f"background |f^| (median away from peaks): {report.background:.6g}\n"
        f"height calibration (numerical / semiclassical): {report.calibration:.6g}\n"
    )
