"""Typer CLI entry point for basket-ssd."""

import functools
import json
import logging
from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.table import Table
from typer.core import TyperGroup

try:  # typer >= 0.26 ships its own click
    from typer._click.exceptions import UsageError
except ImportError:
    from click.exceptions import UsageError

from config import get_config
from design_manager import DesignConfigFile, DesignManager
from report_generator import DesignReport, ReportGenerator
from sim_engine import AnalysisModel, run_study, tp_fp_sweep
from ssd_solver import SampleSizeSolution, sample_size_borrowing, sample_size_no_borrowing
from utils.errors import ConvergenceError, DesignValidationError, DomainError
from utils.logger import get_logger, setup_logger

logger = get_logger(__name__)

EXIT_CONFIG_ERROR = 1
EXIT_NOT_CONVERGED = 2


class BasketSsdGroup(TyperGroup):
    """Report usage errors (bad flags, out-of-range values) with EXIT_CONFIG_ERROR"""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except UsageError as e:
            e.exit_code = EXIT_CONFIG_ERROR
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except UsageError as e:
            e.exit_code = EXIT_CONFIG_ERROR
            raise


app = typer.Typer(
    name="basket-ssd",
    cls=BasketSsdGroup,
    help="Bayesian sample size determination for basket trials with commensurate priors",
    no_args_is_help=True,
)
console = Console()

_config_argument = typer.Argument(..., help="Path to a JSON design config, or a preset name (oacs, summit, scenario4, scenario6)")
_out_option = typer.Option(None, "--out", "-o", help="Write the report to this file instead of the terminal")
_threads_option = typer.Option(None, "--threads", help="Worker threads (BASKET_SSD_THREADS overrides)")


def _handle_errors(func):
    """Map library errors onto the exit-code contract"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConvergenceError as e:
            logger.error(f"Solver did not converge: {e}")
            console.print(f"[red]Solver did not converge:[/red] {escape(str(e))}")
            console.print(f"Last iterate: {[round(v, 4) for v in e.last_iterate]}")
            raise typer.Exit(code=EXIT_NOT_CONVERGED) from None
        except (DesignValidationError, DomainError) as e:
            logger.error(f"Invalid configuration: {e}")
            console.print(f"[red]Error:[/red] {escape(str(e))}")
            raise typer.Exit(code=EXIT_CONFIG_ERROR) from None
    return wrapper


def _check_format(fmt: str, allowed) -> str:
    fmt = fmt.lower()
    if fmt not in allowed:
        raise DesignValidationError(f"must be one of {', '.join(allowed)}, got '{fmt}'", field="--format")
    return fmt


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        typer.echo(text, nl=False)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    console.print(f"[green]Written to {out}[/green]")


def _load(source: str) -> DesignConfigFile:
    return DesignManager().resolve(source)


def _solution_table(solution: SampleSizeSolution, title: str) -> Table:
    table = Table(title=title, show_header=True, header_style="bold")
    table.add_column("Subtrial", style="cyan")
    table.add_column("n", justify="right")
    table.add_column("Patients", justify="right")
    table.add_column("Residual", justify="right")
    table.add_column("Note")
    for label, n_frac, n_int, residual, clamped in zip(
        solution.labels, solution.n_fractional, solution.n_integer, solution.residuals, solution.clamped
    ):
        table.add_row(label, f"{n_frac:.1f}", str(n_int), f"{residual:.1e}", "prior suffices" if clamped else "")
    table.add_row("[bold]total[/bold]", f"{solution.total_fractional:.1f}", str(solution.total_integer), "", "")
    return table


def _frame_table(frame, title: str, digits: int = 3) -> Table:
    table = Table(title=title, show_header=True, header_style="bold")
    table.add_column("")
    for column in frame.columns:
        table.add_column(str(column), justify="right")
    for label, row in frame.iterrows():
        table.add_row(str(label), *("" if v != v else f"{v:.{digits}f}" for v in row))
    return table


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log solver and simulation progress"),
) -> None:
    try:
        get_config().validate()
    except ValueError as e:
        console.print(f"[red]Configuration error:[/red] {escape(str(e))}")
        raise typer.Exit(code=EXIT_CONFIG_ERROR) from None
    setup_logger(console_level=logging.DEBUG if verbose else logging.WARNING)


@app.command()
@_handle_errors
def ssd(
    config: str = _config_argument,
    no_borrowing: bool = typer.Option(False, "--no-borrowing", help="Size every subtrial for a stand-alone analysis"),
    out: Optional[Path] = _out_option,
    fmt: str = typer.Option("table", "--format", "-f", help="table, json or csv"),
    dump_config: Optional[Path] = typer.Option(None, "--dump-config", help="Write the validated config as canonical JSON"),
) -> None:
    """Solve the subtrial sample sizes of a design."""
    fmt = _check_format(fmt, ("table", "json", "csv"))
    config_file = _load(config)
    design, spec = config_file.to_design(), config_file.to_spec()

    if dump_config is not None:
        if not DesignManager().save(config_file, dump_config):
            raise DesignValidationError(f"could not write {dump_config}", field="--dump-config")
        console.print(f"[green]Config written to {dump_config}[/green]")

    if no_borrowing:
        solution = sample_size_no_borrowing(design, spec)
    else:
        solution = sample_size_borrowing(design, spec)

    if fmt == "table" and out is None:
        console.print(_solution_table(solution, f"Sample sizes ({solution.mode.value.replace('_', ' ')})"))
        if solution.iterations:
            console.print(f"Converged after {solution.iterations} Newton iterations, max residual {solution.max_residual:.1e}")
        return
    _emit(ReportGenerator().render_solution(solution, fmt, config_file.name or config), out)


@app.command()
@_handle_errors
def weights(
    config: str = _config_argument,
    out: Optional[Path] = _out_option,
    fmt: str = typer.Option("table", "--format", "-f", help="table or json"),
) -> None:
    """Show the w-matrix, synthesis weights and precision prior summary."""
    fmt = _check_format(fmt, ("table", "json"))
    design = _load(config).to_design()
    generator = ReportGenerator()
    w, P = generator.weight_table(design), generator.synthesis_table(design)
    prior_variances, components = generator.prior_variance_table(design), generator.prior_summary(design)

    if fmt == "json":
        payload = {
            "labels": design.labels,
            "c0": design.c0,
            "weights": w.values.tolist(),
            "synthesis_weights": P.values.tolist(),
            "prior_variances": [[None if v != v else v for v in row] for row in prior_variances.values.tolist()],
            "prior_components": components.to_dict(orient="records"),
        }
        _emit(json.dumps(payload, indent=2) + "\n", out)
        return

    console.print(_frame_table(w, "Incommensurability w_qk"))
    console.print(_frame_table(P, f"Synthesis weights p_qk, c0 = {design.c0:g} (columns: target subtrial)"))
    console.print(_frame_table(prior_variances, "Moment-matched prior variance at w_qk"))
    console.print(_frame_table(components.set_index("component"), "Precision prior components (95% interval)"))


@app.command()
@_handle_errors
def simulate(
    config: str = _config_argument,
    model: str = typer.Option("borrowing", "--model", "-m", help="borrowing, standalone or both"),
    replicates: Optional[int] = typer.Option(None, "--replicates", "-r", min=1, help="Simulated trials"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", min=0, help="Random seed"),
    solve_n: bool = typer.Option(False, "--solve-n", help="Solve the borrowing sizes instead of reading simulation.n"),
    threads: Optional[int] = _threads_option,
    out: Optional[Path] = _out_option,
    fmt: str = typer.Option("csv", "--format", "-f", help="csv, json or table"),
) -> None:
    """Estimate operating characteristics by Monte Carlo simulation."""
    fmt = _check_format(fmt, ("table", "json", "csv"))
    if model.lower() == "both":
        models = [AnalysisModel.BORROWING, AnalysisModel.STAND_ALONE]
    else:
        try:
            models = [AnalysisModel.parse(model)]
        except ValueError:
            raise DesignValidationError(f"must be borrowing, standalone or both, got '{model}'", field="--model") from None

    config_file = _load(config)
    design, spec = config_file.to_design(), config_file.to_spec()
    sizes = sample_size_borrowing(design, spec).n_integer if solve_n else None
    scenario = config_file.to_scenario(sizes, replicates, seed)

    results = [run_study(scenario, design, spec, m, threads=threads) for m in models]
    _emit(ReportGenerator().render_simulation(results, fmt), out)


@app.command()
@_handle_errors
def sweep(
    config: str = typer.Argument("scenario4", help="Base design; variances and weights are replaced per grid point"),
    sigma2: List[float] = typer.Option([0.1, 0.3, 0.5, 1.0], "--sigma2", help="Common outcome variances (repeatable)"),
    replicates: Optional[int] = typer.Option(None, "--replicates", "-r", min=1),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", min=0),
    allocation: str = typer.Option("random", "--allocation", help="random or fixed"),
    threads: Optional[int] = _threads_option,
    out: Optional[Path] = _out_option,
    fmt: str = typer.Option("csv", "--format", "-f", help="csv, json or table"),
) -> None:
    """True and false positive rates over a grid of common variances."""
    fmt = _check_format(fmt, ("table", "json", "csv"))
    if allocation not in ("random", "fixed"):
        raise DesignValidationError(f"must be random or fixed, got '{allocation}'", field="--allocation")
    config_file = _load(config)
    frame = tp_fp_sweep(
        sigma2, config_file.to_design(), config_file.to_spec(),
        replicates=replicates, seed=seed, threads=threads, allocation=allocation,
    )
    _emit(ReportGenerator().render_frame(frame, fmt), out)


@app.command()
@_handle_errors
def report(
    config: str = _config_argument,
    out: Path = typer.Option(..., "--out", "-o", help="Report file (.pdf, .docx or .md)"),
    with_simulation: bool = typer.Option(False, "--simulate", help="Add simulated operating characteristics for both models"),
    replicates: Optional[int] = typer.Option(None, "--replicates", "-r", min=1),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", min=0),
    threads: Optional[int] = _threads_option,
) -> None:
    """Write a design report combining inputs, weights, sizes and simulations."""
    suffix = out.suffix.lower()
    if suffix not in (".pdf", ".docx", ".md"):
        raise DesignValidationError(f"unsupported report type '{suffix}', use .pdf, .docx or .md", field="--out")

    config_file = _load(config)
    design, spec = config_file.to_design(), config_file.to_spec()
    no_borrowing = sample_size_no_borrowing(design, spec)
    borrowing = sample_size_borrowing(design, spec)

    simulations = []
    if with_simulation:
        sizes = None if config_file.simulation and config_file.simulation.n else borrowing.n_integer
        scenario = config_file.to_scenario(sizes, replicates, seed)
        simulations = [run_study(scenario, design, spec, m, threads=threads) for m in AnalysisModel]

    contents = DesignReport(
        name=config_file.name or config,
        design=design,
        spec=spec,
        borrowing=borrowing,
        no_borrowing=no_borrowing,
        simulations=simulations,
    )
    generator = ReportGenerator()

    def progress(fraction: float, message: str) -> None:
        logger.debug(f"{fraction:.0%} {message}")

    out.parent.mkdir(parents=True, exist_ok=True)
    if suffix == ".pdf":
        out.write_bytes(generator.generate_pdf_report(contents, progress))
    elif suffix == ".docx":
        out.write_bytes(generator.generate_word_report(contents, progress))
    else:
        out.write_text(generator.generate_markdown_report(contents), encoding="utf-8")
    console.print(f"[green]Report written to {out}[/green]")


if __name__ == "__main__":
    app()
