"""
Plain CSV / Markdown table writers shared by the summary, correlation and benchmark outputs.
"""

import csv
import io


def fmt(val, decimals=6):
    """Format a cell for output, returning 'NA' for None."""
    if val is None:
        return "NA"
    if isinstance(val, float):
        return f"{val:.{decimals}f}"
    return str(val)


def csv_text(header, rows, comments=()):
    """Render a table as CSV text (LF line endings). Comment lines are prefixed with '#'."""
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def markdown_text(header, rows, title=None, notes=()):
    """Render a table as a GitHub-style Markdown table."""
    lines = []
    if title:
        lines.append(f"## {title}")
        lines.append("")
    lines.append(" | ".join(header))
    lines.append(" | ".join("---" for _ in header))
    for row in rows:
        lines.append(" | ".join(str(cell) for cell in row))
    if notes:
        lines.append("")
        for note in notes:
            lines.append(f"_{note}_")
    return "\n".join(lines) + "\n"


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def read_csv_table(path):
    """Parse a CSV written by csv_text back into (header, rows), skipping comment lines."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]
