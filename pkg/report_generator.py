import json
from datetime import datetime
from io import BytesIO
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from docx import Document
from docx.enum.text import WD_ALIGN_PARAGRAPH
from pydantic import BaseModel, ConfigDict
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from commensurate import BasketDesign, synthesis_weight_matrix
from sim_engine import OperatingCharacteristics
from ssd_solver import DecisionSpec, SampleSizeSolution
from stats_core import gamma_mixture_mean_and_interval, moment_matched_prior_variance

SIMULATION_COLUMNS = [
    "scenario", "model", "subtrial", "n", "rate_efficacious", "rate_futile",
    "rate_inconclusive", "overall_fp", "seed", "replicates",
]
OUTPUT_FORMATS = ("table", "json", "csv")


class DesignReport(BaseModel):
    """Everything a design report shows"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    design: BasketDesign
    spec: DecisionSpec
    borrowing: Optional[SampleSizeSolution] = None
    no_borrowing: SampleSizeSolution
    simulations: List[OperatingCharacteristics] = []


def _format_frame(frame: pd.DataFrame) -> List[List[str]]:
    """Header plus rows as strings, floats to the reporting precision"""
    def cell(value: Any) -> str:
        if isinstance(value, float):
            return f"{value:.3f}"
        return str(value)
    return [list(map(str, frame.columns))] + [[cell(v) for v in row] for row in frame.itertuples(index=False)]


class ReportGenerator:
    """
    Builds solution, weight and simulation tables and renders them as
    text, JSON, CSV, PDF, Word or Markdown
    """

    def solution_table(self, solution: SampleSizeSolution) -> pd.DataFrame:
        return pd.DataFrame({
            "subtrial": solution.labels,
            "n_fractional": solution.n_fractional,
            "n": solution.n_integer,
            "residual": solution.residuals,
            "clamped": solution.clamped,
        })

    def comparison_table(self, borrowing: Optional[SampleSizeSolution], no_borrowing: SampleSizeSolution) -> pd.DataFrame:
        """Both solutions side by side with a totals row, rounded to one decimal"""
        frame = pd.DataFrame({"subtrial": no_borrowing.labels, "n0 (no borrowing)": no_borrowing.n_fractional})
        totals = {"subtrial": "total", "n0 (no borrowing)": no_borrowing.total_fractional}
        if borrowing is not None:
            frame["n (borrowing)"] = borrowing.n_fractional
            totals["n (borrowing)"] = borrowing.total_fractional
        frame = pd.concat([frame, pd.DataFrame([totals])], ignore_index=True)
        return frame.round(1)

    def solution_payload(self, solution: SampleSizeSolution, name: str = "") -> Dict[str, Any]:
        """JSON document described by schemas/ssd_output.schema.json"""
        return {
            "design": name,
            "mode": solution.mode.value,
            "converged": solution.converged,
            "iterations": solution.iterations,
            "tolerance": solution.tolerance,
            "max_residual": solution.max_residual,
            "subtrials": [
                {
                    "label": label,
                    "n_fractional": n_frac,
                    "n_integer": n_int,
                    "residual": residual,
                    "clamped": clamped,
                }
                for label, n_frac, n_int, residual, clamped in zip(
                    solution.labels, solution.n_fractional, solution.n_integer, solution.residuals, solution.clamped
                )
            ],
            "total_fractional": solution.total_fractional,
            "total_integer": solution.total_integer,
        }

    def render_solution(self, solution: SampleSizeSolution, fmt: str = "table", name: str = "") -> str:
        if fmt == "json":
            return json.dumps(self.solution_payload(solution, name), indent=2) + "\n"
        table = self.solution_table(solution)
        if fmt == "csv":
            return table.to_csv(index=False, lineterminator="\n")
        if fmt == "table":
            shown = table.assign(n_fractional=table["n_fractional"].round(1))
            lines = [shown.to_string(index=False, formatters={"residual": "{:.2e}".format})]
            lines.append(f"total: {solution.total_fractional:.1f} ({solution.total_integer} patients)")
            return "\n".join(lines) + "\n"
        raise ValueError(f"unknown output format '{fmt}', expected one of {', '.join(OUTPUT_FORMATS)}")

    def weight_table(self, design: BasketDesign) -> pd.DataFrame:
        return pd.DataFrame(design.weights.as_array(), index=design.labels, columns=design.labels)

    def synthesis_table(self, design: BasketDesign) -> pd.DataFrame:
        """p_qk with complementary subtrial q in rows and target k in columns"""
        P = synthesis_weight_matrix(design.weights, design.c0)
        return pd.DataFrame(P, index=design.labels, columns=design.labels)

    def prior_variance_table(self, design: BasketDesign) -> pd.DataFrame:
        """Moment-matched commensurate prior variance at every w_qk (diagonal blank)"""
        variances = moment_matched_prior_variance(design.weights.as_array(), design.hyper)
        frame = pd.DataFrame(variances, index=design.labels, columns=design.labels)
        for label in design.labels:
            frame.loc[label, label] = float("nan")
        return frame

    def prior_summary(self, design: BasketDesign, level: float = 0.95) -> pd.DataFrame:
        """Mean and equal-tail interval of each Gamma component of the precision prior"""
        rows = []
        for component, w in (("substantial discounting (w = 1)", 1.0), ("limited discounting (w = 0)", 0.0)):
            summary = gamma_mixture_mean_and_interval(w, design.hyper, level)
            rows.append({"component": component, "mean": summary.mean, "lower": summary.lower, "upper": summary.upper})
        return pd.DataFrame(rows)

    def simulation_frame(self, results: Sequence[OperatingCharacteristics]) -> pd.DataFrame:
        """Long-format operating characteristics with the fixed CSV columns"""
        rows = []
        for result in results:
            for k, label in enumerate(result.labels):
                rows.append({
                    "scenario": result.scenario,
                    "model": result.model.value,
                    "subtrial": label,
                    "n": result.n[k],
                    "rate_efficacious": result.rate_efficacious[k],
                    "rate_futile": result.rate_futile[k],
                    "rate_inconclusive": result.rate_inconclusive[k],
                    "overall_fp": result.overall_false_positive,
                    "seed": result.seed,
                    "replicates": result.replicates_used,
                })
        return pd.DataFrame(rows, columns=SIMULATION_COLUMNS)

    def simulation_payload(self, results: Sequence[OperatingCharacteristics]) -> Dict[str, Any]:
        """JSON document described by schemas/simulation_output.schema.json"""
        return {
            "results": [
                {
                    "scenario": r.scenario,
                    "model": r.model.value,
                    "seed": r.seed,
                    "replicates": r.replicates_used,
                    "overall_fp": r.overall_false_positive,
                    "subtrials": [
                        {
                            "label": label,
                            "n": r.n[k],
                            "rate_efficacious": r.rate_efficacious[k],
                            "rate_futile": r.rate_futile[k],
                            "rate_inconclusive": r.rate_inconclusive[k],
                            "decisive_rate": r.decisive_rate[k],
                        }
                        for k, label in enumerate(r.labels)
                    ],
                }
                for r in results
            ]
        }

    def render_simulation(self, results: Sequence[OperatingCharacteristics], fmt: str = "csv") -> str:
        if fmt == "json":
            return json.dumps(self.simulation_payload(results), indent=2) + "\n"
        frame = self.simulation_frame(results)
        if fmt == "csv":
            return frame.to_csv(index=False, lineterminator="\n")
        if fmt == "table":
            return frame.to_string(index=False, float_format="{:.4f}".format) + "\n"
        raise ValueError(f"unknown output format '{fmt}', expected one of {', '.join(OUTPUT_FORMATS)}")

    def render_frame(self, frame: pd.DataFrame, fmt: str = "csv") -> str:
        if fmt == "json":
            return frame.to_json(orient="records", indent=2) + "\n"
        if fmt == "csv":
            return frame.to_csv(index=False, lineterminator="\n")
        if fmt == "table":
            return frame.to_string(index=False) + "\n"
        raise ValueError(f"unknown output format '{fmt}', expected one of {', '.join(OUTPUT_FORMATS)}")

    def _sections(self, report: DesignReport) -> List[tuple]:
        """(heading, DataFrame, keep index) triples shared by every document format"""
        design = report.design
        inputs = pd.DataFrame({
            "subtrial": design.labels,
            "sigma2": design.sigma2,
            "R": design.R,
            "m0": design.m0,
            "s02": design.s02,
            "zeta": report.spec.zetas(design.K),
        })
        sections = [
            ("Design inputs", inputs, False),
            ("Incommensurability levels w_qk", self.weight_table(design).round(3), True),
            ("Synthesis weights p_qk (columns: target subtrial)", self.synthesis_table(design).round(3), True),
            ("Precision prior components", self.prior_summary(design), False),
            ("Subtrial sample sizes", self.comparison_table(report.borrowing, report.no_borrowing), False),
        ]
        if report.simulations:
            frame = self.simulation_frame(report.simulations).drop(columns=["seed", "replicates"])
            sections.append(("Simulated operating characteristics", frame, False))
        return sections

    def _summary_lines(self, report: DesignReport) -> List[str]:
        spec = report.spec
        lines = [
            f"Efficacy threshold eta = {spec.eta}, margin delta = {spec.delta} ({spec.direction.value})",
            f"Concentration parameter c0 = {report.design.c0}",
            f"Total without borrowing: {report.no_borrowing.total_fractional:.1f} "
            f"({report.no_borrowing.total_integer} patients)",
        ]
        if report.borrowing is not None:
            lines.append(
                f"Total with borrowing: {report.borrowing.total_fractional:.1f} "
                f"({report.borrowing.total_integer} patients, {report.borrowing.iterations} Newton iterations)"
            )
        if report.simulations:
            r = report.simulations[0]
            lines.append(f"Simulations: {r.replicates_used} replicates, seed {r.seed}")
        return lines

    def generate_word_report(self, report: DesignReport, progress_callback=None) -> bytes:
        """
        Generate a Word document report with progress tracking

        Args:
            report: Design report contents
            progress_callback: Optional callback for progress updates

        Returns:
            bytes: Word document as bytes
        """
        if progress_callback:
            progress_callback(0.1, "Initializing Word document...")

        doc = Document()
        title = doc.add_heading(f'Basket Trial Sample Size Report: {report.name}', 0)
        title.alignment = WD_ALIGN_PARAGRAPH.CENTER
        date_para = doc.add_paragraph(f'Generated on: {datetime.now().strftime("%Y-%m-%d %H:%M:%S")}')
        date_para.alignment = WD_ALIGN_PARAGRAPH.CENTER

        doc.add_heading('Summary', level=1)
        for line in self._summary_lines(report):
            doc.add_paragraph(line, style='List Bullet')

        sections = self._sections(report)
        for i, (heading, frame, keep_index) in enumerate(sections):
            if progress_callback:
                progress_callback(0.2 + 0.7 * i / len(sections), f"Adding {heading.lower()}...")
            doc.add_heading(heading, level=1)
            rows = _format_frame(frame.reset_index() if keep_index else frame)
            table = doc.add_table(rows=len(rows), cols=len(rows[0]))
            table.style = 'Table Grid'
            for r, row in enumerate(rows):
                for c, value in enumerate(row):
                    table.cell(r, c).text = "" if value == "index" else value

        if progress_callback:
            progress_callback(0.95, "Finalizing Word document...")

        output = BytesIO()
        doc.save(output)
        output.seek(0)

        if progress_callback:
            progress_callback(1.0, "Word document completed!")

        return output.getvalue()

    def generate_pdf_report(self, report: DesignReport, progress_callback=None) -> bytes:
        """
        Generate a PDF report with progress tracking

        Args:
            report: Design report contents
            progress_callback: Optional callback for progress updates

        Returns:
            bytes: PDF document as bytes
        """
        if progress_callback:
            progress_callback(0.1, "Initializing PDF document...")

        buffer = BytesIO()
        doc = SimpleDocTemplate(buffer, pagesize=A4)
        story = []

        styles = getSampleStyleSheet()
        title_style = ParagraphStyle(
            'CustomTitle',
            parent=styles['Heading1'],
            fontSize=16,
            spaceAfter=30,
            alignment=1  # Center alignment
        )
        story.append(Paragraph(f'Basket Trial Sample Size Report: {report.name}', title_style))
        story.append(Paragraph(f'Generated on: {datetime.now().strftime("%Y-%m-%d %H:%M:%S")}', styles['Normal']))
        story.append(Spacer(1, 20))

        story.append(Paragraph('Summary', styles['Heading1']))
        for line in self._summary_lines(report):
            story.append(Paragraph(f'• {line}', styles['Normal']))
        story.append(Spacer(1, 12))

        sections = self._sections(report)
        for i, (heading, frame, keep_index) in enumerate(sections):
            if progress_callback:
                progress_callback(0.2 + 0.7 * i / len(sections), f"Adding {heading.lower()}...")
            story.append(Paragraph(heading, styles['Heading2']))
            rows = _format_frame(frame.reset_index() if keep_index else frame)
            if keep_index:
                rows[0][0] = ""
            table = Table(rows, repeatRows=1)
            table.setStyle(TableStyle([
                ('BACKGROUND', (0, 0), (-1, 0), colors.lightgrey),
                ('GRID', (0, 0), (-1, -1), 0.25, colors.grey),
                ('FONTSIZE', (0, 0), (-1, -1), 7),
            ]))
            story.append(table)
            story.append(Spacer(1, 12))

        if progress_callback:
            progress_callback(0.95, "Building PDF document...")

        doc.build(story)

        if progress_callback:
            progress_callback(1.0, "PDF document completed!")

        buffer.seek(0)
        return buffer.getvalue()

    def generate_markdown_report(self, report: DesignReport) -> str:
        lines = [f"# Basket Trial Sample Size Report: {report.name}", ""]
        lines += [f"- {line}" for line in self._summary_lines(report)]
        for heading, frame, keep_index in self._sections(report):
            rows = _format_frame(frame.reset_index() if keep_index else frame)
            if keep_index:
                rows[0][0] = ""
            lines += ["", f"## {heading}", ""]
            lines.append("| " + " | ".join(rows[0]) + " |")
            lines.append("|" + "---|" * len(rows[0]))
            lines += ["| " + " | ".join(row) + " |" for row in rows[1:]]
        return "\n".join(lines) + "\n"
