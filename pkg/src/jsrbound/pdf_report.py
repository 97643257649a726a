from __future__ import annotations

import logging
from pathlib import Path

from reportlab.lib.pagesizes import LETTER
from reportlab.pdfgen import canvas

from .manager import Report

logger = logging.getLogger(__name__)

_WIDTH_CHARS = 110


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def render_pdf(report: Report, output_path: Path) -> Path:
    """
    Plain one-column summary of a bound report: the input, one block per
    method and the combined interval. The JSON report stays the authoritative
    record; this is for reading and printing.
    """
    output_path = Path(output_path)
    c = canvas.Canvas(str(output_path), pagesize=LETTER)
    width, height = LETTER

    y = height - 50
    line_height = 14

    def draw_line(text: str, font: str = "Helvetica", size: int = 10) -> None:
        nonlocal y
        if y < 50:
            c.showPage()
            y = height - 50
        c.setFont(font, size)
        c.drawString(50, y, text[:_WIDTH_CHARS])
        y -= line_height

    ms = report.matrix_set
    draw_line(f"Joint spectral radius bounds: {ms.name or 'matrix set'}", font="Helvetica-Bold", size=13)
    draw_line(f"m = {ms.m} matrices of size n = {ms.n}; nonnegative: {ms.nonnegative}; cone asserted: {ms.cone_asserted}")
    draw_line(f"Requested: {report.requested}")
    draw_line("-" * 90)

    for outcome in report.result.outcomes:
        params = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(outcome.params.items()) if k != "weights")
        title = f"{outcome.method}" + (f" ({params})" if params else "")
        draw_line(title, font="Helvetica-Bold")
        if outcome.interval is not None:
            iv = outcome.interval
            draw_line(f"    [{_fmt(iv.lower)}, {_fmt(iv.upper)}]   accuracy {_fmt(iv.guaranteed_accuracy)}")
            if iv.hypothesis:
                draw_line(f"    hypothesis: {iv.hypothesis}")
        elif outcome.lower is not None:
            draw_line(f"    lower bound {_fmt(outcome.lower)}")
        else:
            draw_line(f"    skipped ({outcome.reason})")
            message = outcome.message
            while message:
                draw_line(f"      {message[:_WIDTH_CHARS - 6]}")
                message = message[_WIDTH_CHARS - 6:]
        draw_line(f"    {outcome.seconds:.3f} s")

    draw_line("-" * 90)
    interval = report.interval
    if interval is None:
        draw_line("No certified interval was produced.", font="Helvetica-Bold")
    else:
        draw_line(
            f"Combined: [{_fmt(interval.lower)}, {_fmt(interval.upper)}]  "
            f"(lower from {report.result.lower_from}, upper from {report.result.upper_from})",
            font="Helvetica-Bold",
        )
        draw_line(f"Switched system under arbitrary switching: {report.result.stability}")

    c.save()
    logger.info(f"Wrote PDF report to {output_path}")
    return output_path
