"""Command-line entry point for corpus production."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import __version__
from .config import SamplerConfig
from .run import run_all


@click.group()
@click.version_option(version=__version__, prog_name="uqbias-sampler")
@click.option("--verbose", is_flag=True)
def main(verbose: bool) -> None:
    """Produce evaluation corpora: sampled translations, embeddings,
    entailment matrices, gender labels, and quality scores."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.option("--instances", "instances_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="JSON file with SamplerConfig fields; flags override it.")
@click.option("--language", default=None, help="Target language code (es, fr, uk, ru).")
@click.option("--backend", type=click.Choice(["offline", "hf"]), default=None)
@click.option("--translation-model", default=None)
@click.option("--nli-model", default=None)
@click.option("--embedding-model", default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--num-samples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--device", default=None)
@click.option("--references", "references_path", type=click.Path(path_type=Path), default=None,
              help="references.jsonl for quality scoring (ambiguous items need two).")
@click.option("--dataset-name", default="sampled-corpus")
def run(
    instances_path: Path,
    out_dir: Path,
    config_path: Path | None,
    language: str | None,
    backend: str | None,
    translation_model: str | None,
    nli_model: str | None,
    embedding_model: str | None,
    epsilon: float | None,
    num_samples: int | None,
    seed: int | None,
    batch_size: int | None,
    device: str | None,
    references_path: Path | None,
    dataset_name: str,
) -> None:
    """Run the full sampling pipeline for one (model, language) pair."""
    try:
        config = SamplerConfig.load(
            config_path,
            language=language,
            backend=backend,
            translation_model=translation_model,
            nli_model=nli_model,
            embedding_model=embedding_model,
            epsilon=epsilon,
            num_samples=num_samples,
            seed=seed,
            batch_size=batch_size,
            device=device,
        )
        paths = run_all(instances_path, out_dir, config, references_path, dataset_name)
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote corpus files for ({config.model_id}, {config.language}) under {paths.out_dir}")
    click.echo(f"manifest: {paths.manifest}")


if __name__ == "__main__":
    main()
