"""Command line interface.

The analysis subcommands are thin clients over the HTTP service: they
assemble a request, post it (in process by default, or to --server), and
print the JSON response with sorted keys so identical inputs give
byte-identical output.  The benchmark runs locally because it is a batch
job that writes files, not a request/response exchange.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

import click
import httpx

from .bench import benchmark_from_config, write_report
from .service import create_app


def _call(server: str | None, path: str, payload: dict) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            response = client.post(path, json=payload)
    else:

        async def in_process():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://subspect", timeout=600.0
            ) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(in_process())
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _emit(data: dict) -> None:
    click.echo(json.dumps(data, sort_keys=True, indent=2))


def _load_distribution(path: str) -> dict:
    blob = json.loads(Path(path).read_text())
    if not isinstance(blob, dict) or "atoms" not in blob or "probs" not in blob:
        raise click.ClickException(
            f"{path}: distribution file must be a JSON object with "
            f"'atoms' and 'probs'"
        )
    return {"atoms": blob["atoms"], "probs": blob["probs"]}


@click.group()
@click.option(
    "--server",
    default=None,
    envvar="SUBSPECT_SERVER",
    help="Base URL of a running service; default runs the service in process.",
)
@click.pass_context
def main(ctx, server):
    """Exact variance analysis and adaptive subsampling for ensembles."""
    ctx.obj = {"server": server}


@main.command()
@click.option("--kernel", required=True, help="Kernel name from the registry.")
@click.option("--dist", "dist_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--k", required=True, type=int, help="Kernel arity.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--checks/--no-checks", default=True, show_default=True,
              help="Also report degeneracy/orthogonality/base-variance residuals.")
@click.pass_context
def spectrum(ctx, kernel, dist_path, k, seed, checks):
    """Interaction-variance spectrum of a kernel under a discrete law."""
    payload = {
        "kernel": kernel,
        "k": k,
        "seed": seed,
        "checks": checks,
        "dist": _load_distribution(dist_path),
    }
    _emit(_call(ctx.obj["server"], "/spectrum", payload))


@main.command()
@click.option("--n", required=True, type=int, help="Pool size.")
@click.option("--k", required=True, type=int, help="Subsample size.")
@click.option("--kernel", required=True)
@click.option("--dist", "dist_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--tolerance", default=1e-10, type=float, show_default=True)
@click.pass_context
def verify(ctx, n, k, kernel, dist_path, seed, tolerance):
    """Brute-force the ensemble variance and check the closed form.

    Exits nonzero when the residual exceeds the tolerance.
    """
    payload = {
        "n": n,
        "k": k,
        "kernel": kernel,
        "seed": seed,
        "tolerance": tolerance,
        "dist": _load_distribution(dist_path),
    }
    data = _call(ctx.obj["server"], "/verify", payload)
    _emit(data)
    if not data["ok"]:
        raise SystemExit(1)


def _parse_sweep(text: str) -> list[float]:
    name, _, rest = text.partition("=")
    if name.strip() not in ("sigmaM", "top_variance") or not rest:
        raise click.ClickException(
            "sweep must look like sigmaM=<v1,v2,...> (top-order variance values)"
        )
    try:
        return [float(v) for v in rest.split(",")]
    except ValueError:
        raise click.ClickException(f"bad sweep values in {text!r}") from None


@main.command()
@click.option("--params", "params_text", required=True,
              help="Envelope parameters: a JSON object or a path to one.")
@click.option("--sweep", default=None,
              help="Re-solve while sweeping the top-order variance: sigmaM=v1,v2,...")
@click.option("--emit", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.option("--grid", default=512, type=int, show_default=True)
@click.option("--curve-points", default=101, type=int, show_default=True)
@click.pass_context
def envelope(ctx, params_text, sweep, emit, grid, curve_points):
    """Risk-bound curve over the subsampling ratio, with its minimizer."""
    candidate = Path(params_text)
    if candidate.exists():
        params_text = candidate.read_text()
    try:
        params = json.loads(params_text)
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"--params is neither a file nor JSON: {exc}")
    payload = {
        "params": params,
        "grid": grid,
        "curve_points": curve_points,
        "sweep_top_variance": _parse_sweep(sweep) if sweep else None,
    }
    data = _call(ctx.obj["server"], "/envelope", payload)
    if emit == "json":
        _emit(data)
        return
    click.echo(f"# alpha_star,{data['alpha_star']:.12g}")
    click.echo(f"# envelope,{data['envelope']:.12g}")
    if data.get("sweep"):
        click.echo("top_variance,alpha_star,envelope")
        for point in data["sweep"]:
            click.echo(
                f"{point['top_variance']:.12g},{point['alpha_star']:.12g},"
                f"{point['envelope']:.12g}"
            )
    else:
        click.echo("alpha,envelope")
        for point in data["curve"]:
            click.echo(f"{point['alpha']:.12g},{point['envelope']:.12g}")


@main.command()
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="CSV dataset.")
@click.option("--target", default=None, help="Target column; default last.")
@click.option("--learner", type=click.Choice(["tree", "knn"]), default="tree",
              show_default=True)
@click.option("--depth", default="max", show_default=True,
              help="Tree depth cap: an integer or 'max' for unbounded.")
@click.option("--neighbors", default=None, type=int,
              help="Neighbour count for the knn learner.")
@click.option("--k-folds", default=3, type=int, show_default=True)
@click.option("--b-search", default=30, type=int, show_default=True)
@click.option("--b-final", default=100, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--rf-star", is_flag=True,
              help="Train the final ensemble with size-capped bootstrap draws.")
@click.option("--select-only", is_flag=True, help="Skip final ensemble training.")
@click.option("--save-model", default=None, type=click.Path(dir_okay=False),
              help="Also write the trained ensemble description to this file.")
@click.pass_context
def cgas(ctx, data_path, target, learner, depth, neighbors, k_folds, b_search,
         b_final, seed, rf_star, select_only, save_model):
    """Choose the subsampling ratio adaptively and train the ensemble."""
    from .data import ingest_csv

    dataset = ingest_csv(data_path, target=target)
    if depth == "max":
        depth_value = None
    else:
        try:
            depth_value = int(depth)
        except ValueError:
            raise click.ClickException(f"--depth must be an integer or 'max', got {depth!r}")
    payload = {
        "features": dataset.features.tolist(),
        "targets": dataset.targets.tolist(),
        "learner": learner,
        "depth": depth_value if learner == "tree" else None,
        "n_neighbors": neighbors if learner == "knn" else None,
        "k_folds": k_folds,
        "b_search": b_search,
        "b_final": b_final,
        "seed": seed,
        "rf_star": rf_star,
        "train_ensemble": not select_only,
    }
    data = _call(ctx.obj["server"], "/cgas", payload)
    _emit(data)
    if save_model:
        description = {
            "learner": learner,
            "depth": depth_value if learner == "tree" else None,
            "n_neighbors": neighbors if learner == "knn" else None,
            "seed": seed,
            "alpha_star": data["alpha_star"],
            "ensemble": data["ensemble"],
        }
        Path(save_model).write_text(
            json.dumps(description, sort_keys=True, indent=2) + "\n"
        )


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Declarative JSON config: datasets, regimes, methods, seeds.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--verbose", is_flag=True, help="Print per-cell progress to stderr.")
def bench(config_path, out_dir, verbose):
    """Run the two-regime comparison harness and write report files."""
    config = json.loads(Path(config_path).read_text())

    progress = None
    if verbose:

        def progress(dataset, regime, repeat, fold, method):
            click.echo(
                f"{dataset}/{regime} repeat {repeat} fold {fold}: {method}",
                err=True,
            )

    report = benchmark_from_config(config, progress=progress)
    paths = write_report(report, out_dir)
    for name in ("report", "summary", "alpha_shift"):
        click.echo(str(paths[name]))
    if report.failures:
        click.echo(f"{len(report.failures)} cell(s) failed; see report.json", err=True)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
