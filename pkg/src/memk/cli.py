"""Command line entry point (``memk``).

Exit codes: 0 success, 1 usage or configuration error, 2 invariant check failed.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import yaml

from . import io
from .closed_dynamics import autocorrelation, expectation_closed
from .errors import MemkError, PositivityLost
from .grid import DiagonalState, TimeGrid
from .harness import EXPERIMENTS, ExperimentConfig, RunManifest, build_ensemble, reference_dt, run_experiment
from .kernel import extract_kernel, predict_integral, predict_scheme
from .open_dynamics import LindbladConfig, Stepper, oracle_decohered
from .spectral_model import EthEnsembleConfig, ReferenceFunction, ReferenceKind, select_initial_levels

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2


class InvariantFailure(Exception):
    def __init__(self, manifest: RunManifest):
        super().__init__(", ".join(c.name for c in manifest.failures()))
        self.manifest = manifest


def _load_config_file(path):
    if path is None:
        return {}
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise click.UsageError(f"{path}: config must be a flat key/value mapping")
    return data


def _tolerance_overrides(pairs):
    out = {}
    for item in pairs:
        name, sep, value = item.partition("=")
        if not sep:
            raise click.UsageError(f"--tol expects NAME=VALUE, got {item!r}")
        try:
            out[f"tol_{name.strip()}"] = float(value)
        except ValueError as exc:
            raise click.UsageError(f"--tol {item!r}: value is not a number") from exc
    return out


_REFERENCES = click.Choice([k.value for k in ReferenceKind])


def common_options(func):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="Flat YAML key/value file; flags override it."),
        click.option("--n", type=int, help="Ensemble dimension."),
        click.option("--seed", type=int, help="Ensemble seed (MEMK_SEED overrides)."),
        click.option("--reference", type=_REFERENCES, help="Reference relaxation function."),
        click.option("--dt", type=float, help="Time step."),
        click.option("--horizon", type=float, help="Final time."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
    ]
    for opt in reversed(options):
        func = opt(func)
    return func


def _settings(config_path, **flags):
    settings = _load_config_file(config_path)
    renames = {"out": "output_dir"}
    for key, value in flags.items():
        if value is not None and value != ():
            settings[renames.get(key, key)] = value
    return settings


def _ensemble_from(settings):
    ref = ReferenceFunction(settings.get("reference", "exponential"), float(settings.get("tau", 10.0)),
                            float(settings.get("v", 0.016)))
    seed = int(os.environ.get("MEMK_SEED", settings.get("seed", 0)))
    return EthEnsembleConfig(
        dimension=int(settings.get("n", 300)),
        half_width=float(settings.get("half_width", 30.0)),
        reference=ref,
        seed=seed,
        spectral_cutoff=float(settings.get("spectral_cutoff", 1.5)),
        include_diagonal=bool(settings.get("include_diagonal", False)),
    )


def _grid_from(settings, reference):
    dt = float(settings.get("dt", reference_dt(reference)))
    horizon = float(settings.get("horizon", 3.0 * reference.tau))
    return TimeGrid.covering(horizon, dt)


def _out_dir(settings):
    out = Path(settings.get("output_dir", "memk-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ensemble_source(settings, path):
    if path:
        return io.load_ensemble(path)
    config = _ensemble_from(settings)
    return (config, *build_ensemble(config))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Dephasing of ETH observables as exponential damping of memory kernels."""


@main.command()
@common_options
def generate(config_path, **flags):
    """Sample an ensemble and write it as a MEMK1 container plus JSON sidecar."""
    settings = _settings(config_path, **flags)
    config = _ensemble_from(settings)
    spectrum, observable = build_ensemble(config)
    path = _out_dir(settings) / f"ensemble_{config.reference.kind.value}_n{config.dimension}_s{config.seed}.memk"
    io.save_ensemble(path, config, spectrum, observable)
    click.echo(str(path))


@main.command()
@common_options
@click.option("--ensemble", "ensemble_path", type=click.Path(exists=True, dir_okay=False),
              help="MEMK1 file instead of sampling a new ensemble.")
@click.option("--probe", type=float, default=None, help="Target eigenvalue of the pure initial state.")
@click.option("--autocorrelation", "auto", is_flag=True, help="Write Tr{A(t)A}/Tr{A^2} instead of a probe.")
def closed(config_path, ensemble_path, probe, auto, **flags):
    """Closed-system expectation value a(t) as a signal CSV."""
    settings = _settings(config_path, **flags)
    config, spectrum, observable = _ensemble_source(settings, ensemble_path)
    grid = _grid_from(settings, config.reference)
    out = _out_dir(settings)
    if auto:
        signal, name = autocorrelation(spectrum, observable, grid), "autocorrelation.csv"
    else:
        target = 0.9 if probe is None else probe
        level = select_initial_levels(observable, [target])[0]
        signal = expectation_closed(spectrum, observable, DiagonalState.pure(level, observable.dimension), grid)
        name = f"closed_probe_{target:g}.csv"
    io.write_signal(out / name, signal)
    click.echo(str(out / name))


@main.command()
@common_options
@click.option("--ensemble", "ensemble_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--probe", type=float, default=0.9, show_default=True)
@click.option("--gamma", type=float, required=True, help="Dephasing rate.")
@click.option("--stepper", type=click.Choice([s.value for s in Stepper]), default="rk4", show_default=True)
def oracle(config_path, ensemble_path, probe, gamma, stepper, **flags):
    """Brute-force master-equation oracle for a pure probe state."""
    settings = _settings(config_path, **flags)
    config, spectrum, observable = _ensemble_source(settings, ensemble_path)
    grid = _grid_from(settings, config.reference)
    level = select_initial_levels(observable, [probe])[0]
    lind = LindbladConfig(gamma, grid, Stepper(stepper))
    signal, hygiene = oracle_decohered(observable, spectrum, DiagonalState.pure(level, observable.dimension), lind)
    out = _out_dir(settings)
    io.write_signal(out / f"oracle_gamma_{gamma:g}.csv", signal)
    io.write_json(out / f"oracle_gamma_{gamma:g}.json", {
        "gamma": gamma, "dt": grid.dt, "stepper": stepper, "seed": config.seed, "probe": probe,
        "dimension": observable.dimension, "hygiene": hygiene.as_dict()})
    if hygiene.trace_drift > 1e-9 or hygiene.hermiticity_defect > 1e-10 or hygiene.min_eigenvalue < -1e-6:
        raise InvariantFailure(RunManifest({}, "", [config.seed]))
    click.echo(str(out / f"oracle_gamma_{gamma:g}.csv"))


@main.command()
@click.argument("signal_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Kernel CSV to write.")
@click.option("--floor", type=float, default=None, help="Stop extraction once |a| drops below this.")
def kernel(signal_csv, out, floor):
    """Extract the memory kernel of a signal CSV."""
    model = extract_kernel(io.read_signal(signal_csv), floor=floor)
    io.write_kernel(out, model)
    click.echo(f"delta_weight={model.delta_weight:.17g}")


@main.command()
@click.argument("signal_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--gamma", type=float, required=True)
@click.option("--method", type=click.Choice(["scheme", "integral"]), default="scheme", show_default=True)
@click.option("--g", "g_csv", type=click.Path(exists=True, dir_okay=False),
              help="Relaxation function for the integral method (default a/a(0)).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def predict(signal_csv, gamma, method, g_csv, out):
    """Decohered dynamics from the closed signal."""
    a = io.read_signal(signal_csv)
    if method == "scheme":
        result = predict_scheme(a, gamma)
    else:
        g = io.read_signal(g_csv) if g_csv else a.scaled(1.0 / a.values[0])
        result = predict_integral(a, g, gamma)
    io.write_signal(out, result)
    click.echo(out)


@main.command()
@click.argument("experiment", type=click.Choice(EXPERIMENTS))
@common_options
@click.option("--gamma", "gammas", type=float, multiple=True, help="Dephasing rate (repeatable).")
@click.option("--probe", "probes", type=float, multiple=True, help="Probe eigenvalue target (repeatable).")
@click.option("--system", type=click.Choice(["eth", "two_level"]))
@click.option("--tol", "tolerances", multiple=True, help="Override a tolerance, e.g. --tol theorem=0.")
@click.option("--threads", type=int)
@click.option("--no-svg", "no_svg", is_flag=True)
def verify(experiment, config_path, gammas, probes, tolerances, no_svg, **flags):
    """Run one experiment and check its tolerances."""
    settings = _settings(config_path, **flags)
    if gammas:
        settings["gammas"] = list(gammas)
    if probes:
        settings["probes"] = list(probes)
    if no_svg:
        settings["emit_svg"] = False
    settings.update(_tolerance_overrides(tolerances))
    settings.pop("experiment", None)
    config = ExperimentConfig.from_mapping(settings, experiment=experiment)
    manifest = run_experiment(config)
    for check in manifest.checks:
        click.echo(f"{'PASS' if check.passed else 'FAIL'} {check.name} measured={check.measured:.6g} "
                   f"{check.comparison} {check.tolerance}")
    click.echo(str(config.output_dir / experiment / "manifest.json"))
    if not manifest.passed:
        raise InvariantFailure(manifest)


def cli_entry(argv=None):
    """Run the CLI and return its exit code instead of exiting."""
    try:
        main.main(args=list(sys.argv[1:] if argv is None else argv), prog_name="memk", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        if isinstance(exc, click.UsageError) and exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return EXIT_USAGE
    except (InvariantFailure, PositivityLost) as exc:
        click.echo(f"invariant check failed: {exc}", err=True)
        return EXIT_INVARIANT
    except (MemkError, ValueError, TypeError, OSError, yaml.YAMLError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


def run():  # console-script shim
    sys.exit(cli_entry())


if __name__ == "__main__":  # pragma: no cover
    run()
