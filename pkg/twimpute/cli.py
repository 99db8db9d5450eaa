"""
Command-line front end.

Every subcommand is a pure function of its flags, seed and input files.
Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures.
"""
from dataclasses import replace
import json
import logging
from pathlib import Path
from typing import Any, List, Optional

import click
import numpy as np

from . import __version__
from .config import SCHEMA_FILE, RunConfig, load_run_config, make_manager
from .constraints import from_dict
from .core import TimeSeriesPanel, read_csv, write_array, write_csv
from .dgp import DgpSpec, apply_pattern, generate, parse_pattern
from .errors import ConfigError, NumericalError
from .metrics import acf, benchmark, marginal_wasserstein, pacf, results_frame, write_results
from .solver import default_cutoffs, get_init, impute, impute_integrated, parse_method
from .theory import MarkovScenario, solve_identification
from .types import Cutoff
from .utils import replicate_seed

logger = logging.getLogger(__name__)

LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


class Failure(click.ClickException):
    def __init__(self, message: str, exit_code: int) -> None:
        super().__init__(message)
        self.exit_code = exit_code


class TwimputeGroup(click.Group):
    """Maps library errors onto the documented exit codes"""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except ConfigError as e:
            raise Failure(str(e), 2) from e
        except NumericalError as e:
            raise Failure(str(e), 3) from e


def _parse_cutoff(text: str) -> Cutoff:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise click.BadParameter(f"{text!r} is neither an index nor a fraction") from None


class CutoffType(click.ParamType):
    name = "cutoff"

    def convert(self, value, param, ctx):
        if isinstance(value, (int, float)):
            return value
        return _parse_cutoff(value)


class CutoffListType(click.ParamType):
    name = "cutoffs"

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        return [_parse_cutoff(part) for part in value.split(",") if part.strip()]


class CommaList(click.ParamType):
    name = "list"

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        return [part.strip() for part in value.split(",") if part.strip()]


def _suffixed(out: Path, suffix: str) -> Path:
    return out.with_name(out.name + suffix)


def _pick(flag, fallback):
    return fallback if flag is None else flag


def _load_constraints(text: Optional[str]) -> Optional[dict]:
    """A JSON constraint description given inline or as a file path"""
    if text is None:
        return None
    if not text.lstrip().startswith("{"):
        text = Path(text).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"constraint description is not valid JSON: {e}") from None


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON run config; explicit flags take precedence",
)


@click.group(cls=TwimputeGroup)
@click.version_option(__version__, prog_name="twimpute")
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug")
def cli(verbose: int):
    """Temporal Wasserstein imputation of time series"""
    logging.basicConfig(
        level=LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)],
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.option("--model", help="ar, arma, tar, i1, cyc, nlvar or al")
@click.option("--n", "n", type=int, help="Series length")
@click.option("--pattern", help="Missing pattern: 1 (random) or 2 (blocks)")
@click.option("--seed", type=int)
@click.option("--out", type=click.Path(path_type=Path))
@config_option
def simulate(model, n, pattern, seed, out, config_path):
    """Write `<out>.full.csv` and `<out>.masked.csv`"""
    rc = load_run_config(config_path)
    model = _pick(model, rc.simulate.model)
    n = _pick(n, rc.simulate.n)
    pattern = _pick(pattern, rc.simulate.pattern)
    seed = _pick(seed, rc.seed)
    out = _pick(out, rc.out)
    if out is None:
        raise ConfigError("no output prefix: pass --out or set out in the run config")

    truth = generate(DgpSpec.of(model, n, seed=seed))
    masked = apply_pattern(truth, parse_pattern(pattern, n), seed=replicate_seed(seed, 1))

    out = Path(out)
    write_csv(truth, _suffixed(out, ".full.csv"))
    write_csv(masked, _suffixed(out, ".masked.csv"))
    logger.info(f"simulated {model} with n={n}: {masked.missing_count} cells masked")


@cli.command("impute")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--method", help="linear, locf, mean, scalarf, twi or ktwi (e.g. twi_locf)")
@click.option("--p", "p", type=int, help="Lag order of the delay embedding")
@click.option("--n1", type=CutoffType(), help="Cut-off as an index or a fraction of n")
@click.option("--lambda", "lam", type=float, help="Ridge weight")
@click.option("--k", "k", type=float, help="Order of the ground cost")
@click.option("--ot-method", type=click.Choice(["exact", "sinkhorn"]))
@click.option("--cutoffs", type=CutoffListType(), help="Comma-separated k-TWI cut-offs")
@click.option("--constraints", help="JSON constraint description, inline or a file path")
@click.option("--init", help="Initial imputation: linear, locf or mean")
@click.option("--integrated", is_flag=True, help="Treat the series as I(1) and impute its differences")
@click.option("--header", is_flag=True, help="Skip the first line of the input")
@click.option("--out", type=click.Path(path_type=Path))
@config_option
def impute_command(in_path, method, p, n1, lam, k, ot_method, cutoffs, constraints, init, integrated, header, out, config_path):
    """Write the imputed CSV to --out and a JSON report next to it"""
    rc = load_run_config(config_path)
    overrides = {
        "method": method,
        "p": p,
        "n1": n1,
        "lam": lam,
        "k": k,
        "ot_method": ot_method,
        "cutoffs": cutoffs,
        "init": init,
    }
    settings = replace(rc.twi, **{key: v for key, v in overrides.items() if v is not None})
    rc = replace(rc, twi=settings, constraints=_pick(_load_constraints(constraints), rc.constraints))
    out = _pick(out, rc.out)
    if out is None:
        raise ConfigError("no output path: pass --out or set out in the run config")

    panel = read_csv(in_path, header=header)
    result = _run_impute(panel, rc, integrated)

    out = Path(out)
    write_array(result.imputed, out)
    report = {"method": settings.method, **result.report()}
    with out.with_suffix(".json").open("w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    logger.info(f"wrote {out} ({panel.missing_count} cells imputed)")


def _run_impute(panel: TimeSeriesPanel, rc: RunConfig, integrated: bool):
    settings = rc.twi
    family, default_init = parse_method(settings.method)
    init = get_init(settings.init or default_init) if family in ("twi", "ktwi") else None

    if integrated:
        if family not in ("twi", "ktwi"):
            raise ConfigError(f"--integrated needs twi or ktwi, got {settings.method!r}")
        # the differenced series is one shorter
        n = panel.n - 1
        cutoffs = (settings.cutoffs or default_cutoffs(n)) if family == "ktwi" else None
        return impute_integrated(panel, rc.twi_config(n), cutoffs, init)

    constraint = from_dict(rc.constraints, panel) if rc.constraints else None
    return impute(panel, settings.method, constraint, rc.twi_config(panel.n), settings.cutoffs, init)


@cli.command("benchmark")
@click.option("--models", type=CommaList())
@click.option("--patterns", type=CommaList())
@click.option("--methods", type=CommaList())
@click.option("--reps", type=int)
@click.option("--n", "n", type=int)
@click.option("--seed", type=int)
@click.option("--jobs", type=int, help="Worker processes (capped by TWIMPUTE_THREADS)")
@click.option("--out", type=click.Path(path_type=Path))
@config_option
def benchmark_command(models, patterns, methods, reps, n, seed, jobs, out, config_path):
    """Monte Carlo comparison table written to `<out>.csv` and `<out>.json`"""
    rc = load_run_config(config_path)
    settings = rc.benchmark
    models = _pick(models, settings.models)
    patterns = _pick(patterns, settings.patterns)
    methods = _pick(methods, settings.methods)
    reps = _pick(reps, settings.reps)
    n = _pick(n, settings.n)
    seed = _pick(seed, rc.seed)
    jobs = _pick(jobs, settings.jobs)
    out = _pick(out, rc.out)
    if out is None:
        raise ConfigError("no output prefix: pass --out or set out in the run config")

    reports = []
    for model in models:
        for pattern in patterns:
            reports.extend(
                benchmark(
                    DgpSpec.of(model, n),
                    parse_pattern(pattern, n),
                    methods,
                    reps,
                    seed=seed,
                    pattern_label=str(pattern),
                    n_jobs=jobs,
                )
            )

    for path in write_results(results_frame(reports), out):
        click.echo(str(path))


def _observed(path: Path, header: bool, role: str) -> TimeSeriesPanel:
    panel = read_csv(path, header=header)
    if panel.has_missing:
        raise ConfigError(f"{role} file {path} has {panel.missing_count} missing cells")
    return panel


def _column_summary(imputed: np.ndarray, truth: np.ndarray, lags: int) -> List[dict]:
    out = []
    for j in range(imputed.shape[1]):
        entry = {"column": j}
        for name, fn in (("acf", acf), ("pacf", pacf)):
            est, ref = fn(imputed[:, j], lags), fn(truth[:, j], lags)
            entry[name] = {
                "imputed": est.tolist(),
                "truth": ref.tolist(),
                "rmse": float(np.sqrt(np.mean((est[1:] - ref[1:]) ** 2))) if lags else 0.0,
            }
        out.append(entry)
    return out


@cli.command()
@click.option("--imputed", "imputed_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--embed-p", type=int, default=3, show_default=True)
@click.option("--lags", type=int, default=5, show_default=True)
@click.option("--header", is_flag=True)
def evaluate(imputed_path, truth_path, embed_p, lags, header):
    """Compare an imputation with the truth; prints a JSON summary"""
    imputed = _observed(imputed_path, header, "imputed")
    truth = _observed(truth_path, header, "truth")
    summary = {
        "wasserstein_loss": marginal_wasserstein(imputed.values, truth.values, embed_p=embed_p),
        "columns": _column_summary(imputed.values, truth.values, lags),
    }
    click.echo(json.dumps(summary, indent=2))


@cli.group()
def theory():
    """Closed-form identification results"""


@theory.command()
@click.option("--p", "p", type=float, required=True, help="P(1 | 0)")
@click.option("--q", "q", type=float, required=True, help="P(0 | 1)")
@click.option("--k1", type=int, required=True, help="Missing cadence before the cut-off")
@click.option("--k2", type=int, required=True, help="Missing cadence after the cut-off")
@click.option("--stability/--no-stability", default=True, show_default=True)
def markov(p, q, k1, k2, stability):
    """Imputation rules of a two-state Markov chain with zero loss"""
    click.echo(solve_identification(MarkovScenario(p, q, k1, k2), stability).describe())


@cli.group()
def config():
    """Manage run configs"""


@config.command("init")
@click.option("--root", type=click.Path(file_okay=False, path_type=Path), help="Directory to write into")
@click.option("--template", type=click.Path(file_okay=False, path_type=Path), help="Directory holding a run config to copy")
@click.option("--overwrite", is_flag=True)
@click.option("--schema/--no-schema", default=True, show_default=True, help="Write the JSON schema and reference it")
def config_init(root, template, overwrite, schema):
    """Write twimpute.json (and its schema)"""
    manager = make_manager(schema_path=SCHEMA_FILE if schema else None)
    written = manager.init(root, template=template, overwrite=overwrite)
    path = Path(root or "") / manager.path
    click.echo(f"{'wrote' if written else 'kept'} {path}")


def main():
    cli(prog_name="twimpute")
