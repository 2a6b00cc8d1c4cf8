"""
PDF Report Generator for model-checking runs
"""
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import getSampleStyleSheet, ParagraphStyle
from reportlab.lib.units import inch
from reportlab.platypus import SimpleDocTemplate, Paragraph, Spacer, Table, TableStyle
from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from xml.sax.saxutils import escape
from datetime import datetime
import io

from report import RunReport, witness_lasso

VERDICT_COLORS = {
    'holds': '#10b981',
    'fails': '#ef4444',
    'unknown': '#f59e0b',
}


def _table(rows, widths, header_color):
    table = Table(rows, colWidths=widths, repeatRows=1)
    table.setStyle(TableStyle([
        ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor(header_color)),
        ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
        ('ALIGN', (0, 0), (-1, -1), 'LEFT'),
        ('VALIGN', (0, 0), (-1, -1), 'TOP'),
        ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
        ('FONTSIZE', (0, 0), (-1, 0), 11),
        ('BOTTOMPADDING', (0, 0), (-1, 0), 8),
        ('BACKGROUND', (0, 1), (-1, -1), colors.beige),
        ('GRID', (0, 0), (-1, -1), 1, colors.black)
    ]))
    return table


def generate_report_pdf(report: RunReport, output_path: str = None, title: str = None) -> bytes:
    """
    Generate a PDF for a check run

    Args:
        report: the run report to render
        output_path: Optional file path to save PDF. If None, returns bytes
        title: Optional heading, e.g. the model file name

    Returns:
        bytes: PDF file content (empty when written to output_path)
    """
    buffer = io.BytesIO()
    doc = SimpleDocTemplate(buffer if output_path is None else output_path, pagesize=letter)
    story = []

    styles = getSampleStyleSheet()
    body = styles['Normal']

    title_style = ParagraphStyle(
        'ReportTitle',
        parent=styles['Heading1'],
        fontSize=22,
        textColor=colors.HexColor('#6366f1'),
        spaceAfter=24,
        alignment=TA_CENTER
    )

    heading_style = ParagraphStyle(
        'ReportHeading',
        parent=styles['Heading2'],
        fontSize=16,
        textColor=colors.HexColor('#6366f1'),
        spaceAfter=10,
        spaceBefore=10
    )

    code_style = ParagraphStyle(
        'ReportCode',
        parent=body,
        fontName='Courier',
        fontSize=8,
        leading=10
    )

    story.append(Paragraph(escape(title or "Model Checking Report"), title_style))
    date_str = datetime.now().strftime("%B %d, %Y %H:%M")
    story.append(Paragraph(f"Generated on: {date_str}", body))
    story.append(Spacer(1, 0.3*inch))

    verdict_style = ParagraphStyle(
        'VerdictStyle',
        parent=styles['Heading2'],
        fontSize=30,
        textColor=colors.HexColor(VERDICT_COLORS[report.verdict]),
        alignment=TA_CENTER
    )
    story.append(Paragraph(report.verdict.upper(), verdict_style))
    story.append(Spacer(1, 0.2*inch))

    summary = [
        ['Engine', report.engine],
        ['Time', f"{report.elapsed_ms:.1f} ms"],
    ]
    if report.note:
        summary.append(['Note', report.note])
    story.append(_table([['Run', '']] + summary, [1.5*inch, 5*inch], '#6366f1'))
    story.append(Spacer(1, 0.2*inch))

    story.append(Paragraph("Specification", heading_style))
    story.append(Paragraph(escape(report.formula), code_style))

    if report.leaves:
        story.append(Paragraph("Leaves", heading_style))
        rows = [['#', 'Verdict', 'Engine', 'Formula']]
        for i, leaf in enumerate(report.leaves, 1):
            engine = leaf.engine
            if leaf.bounds:
                engine += f" ({leaf.bounds[0]}/{leaf.bounds[1]})"
            rows.append([str(i), leaf.verdict, engine, Paragraph(escape(leaf.formula), code_style)])
        story.append(_table(rows, [0.4*inch, 0.8*inch, 1.3*inch, 4*inch], '#8b5cf6'))

    if report.witnesses:
        story.append(Paragraph("Witness Paths", heading_style))
        for w in report.witnesses:
            story.append(Paragraph(f"<b>{escape(w.var)}</b>", body))
            story.append(Paragraph(escape(str(witness_lasso(w))), code_style))
            story.append(Spacer(1, 0.1*inch))

    doc.build(story)

    if output_path is None:
        buffer.seek(0)
        return buffer.getvalue()
    return b''
