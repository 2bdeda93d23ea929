"""Command-line interface for the benchmark harness.

Exit codes: 0 on success, 2 on configuration errors, 3 on runtime errors.
"""

from __future__ import annotations

import functools
import json
import sys

import click

from .core import Action, write_dataset_jsonl
from .envs import (
    AlwaysEmptyCaches,
    CacheInstance,
    CascadingInstance,
    IcInstance,
    KPathInstance,
    PositionSampler,
    cache_generate,
    cascade_generate,
    cascades_to_json,
    ic_generate,
    kpath_generate,
    load_instance,
    write_cache_dataset_jsonl,
)
from .harness import ConfigError, ExperimentConfig, coverage_cmd, evaluate_gap, online_cmd, run


def _handled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, click.UsageError) as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(2)
        except Exception as exc:  # noqa: BLE001 - CLI boundary
            click.echo(f"runtime error: {exc}", err=True)
            sys.exit(3)

    return wrapper


@click.group()
def cli() -> None:
    """Offline CMAB benchmark harness."""


@cli.command("gen-dataset")
@click.argument("instance_path", type=click.Path(exists=True))
@click.option("--n", type=int, required=True, help="Number of records.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output JSONL path.")
@_handled
def gen_dataset(instance_path: str, n: int, seed: int, out: str) -> None:
    """Generate an offline dataset for INSTANCE_PATH (JSON instance file)."""
    try:
        instance = load_instance(instance_path)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    with open(out, "w") as fp:
        if isinstance(instance, CascadingInstance):
            write_dataset_jsonl(cascade_generate(instance, PositionSampler(), n, seed), fp)
        elif isinstance(instance, CacheInstance):
            write_cache_dataset_jsonl(
                cache_generate(instance, AlwaysEmptyCaches(), n, seed), fp
            )
        elif isinstance(instance, KPathInstance):
            write_dataset_jsonl(kpath_generate(instance, n, seed), fp)
        elif isinstance(instance, IcInstance):
            for record in cascades_to_json(ic_generate(instance, n, seed)):
                fp.write(json.dumps(record) + "\n")
        else:
            raise ConfigError(f"unsupported instance type {type(instance).__name__}")
    click.echo(f"wrote {n} records to {out}")


@cli.command("run")
@click.argument("config_path", type=click.Path(exists=True))
@_handled
def run_cmd(config_path: str) -> None:
    """Run the experiment grid described by CONFIG_PATH."""
    config = ExperimentConfig.load(config_path)
    result = run(config)
    if config.out:
        with open(config.out + ".csv", "w") as fp:
            result.to_csv(fp)
        with open(config.out + ".json", "w") as fp:
            json.dump(result.to_json(), fp, indent=2, sort_keys=True)
        click.echo(f"wrote {config.out}.csv and {config.out}.json")
    else:
        result.to_csv(sys.stdout)


@cli.command("coverage")
@click.argument("config_path", type=click.Path(exists=True))
@_handled
def coverage(config_path: str) -> None:
    """Report coverage coefficients and gap bounds for CONFIG_PATH."""
    config = ExperimentConfig.load(config_path)
    coverage_cmd(config, sys.stdout)


@cli.command("online")
@click.argument("config_path", type=click.Path(exists=True))
@_handled
def online(config_path: str) -> None:
    """Run the online streaming cache learner for CONFIG_PATH."""
    config = ExperimentConfig.load(config_path)
    if config.out:
        with open(config.out + ".csv", "w") as fp:
            online_cmd(config, fp)
        click.echo(f"wrote {config.out}.csv")
    else:
        online_cmd(config, sys.stdout)


@cli.command("gap")
@click.argument("instance_path", type=click.Path(exists=True))
@click.argument("action_path", type=click.Path(exists=True))
@click.option("--optimum", default="exact", show_default=True,
              type=click.Choice(["exact", "brute-force", "greedy-reference"]))
@_handled
def gap(instance_path: str, action_path: str, optimum: str) -> None:
    """Print the suboptimality gap of the action in ACTION_PATH."""
    try:
        instance = load_instance(instance_path)
        with open(action_path) as fp:
            action = Action.from_json(json.load(fp))
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    click.echo(repr(evaluate_gap(instance, action, optimum)))


def main() -> None:
    cli(prog_name="offcmab")


if __name__ == "__main__":
    main()
