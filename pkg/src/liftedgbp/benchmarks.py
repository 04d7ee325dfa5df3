"""Benchmark models shipped with the package.

``friends_smokers``, ``transitive``, ``friends_knows`` and ``chain`` are the
four experiment models; ``pq`` and ``pp`` are the two-atom toy models whose
lifted graphs show parallel versus merged edges.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .model import ParfactorModel, load_model, parse_model

EXPERIMENTS = ("friends_smokers", "transitive", "friends_knows", "chain")
TOYS = ("pq", "pp")
ALL = EXPERIMENTS + TOYS


def benchmark_text(name: str) -> str:
    if name not in ALL:
        raise KeyError(f"unknown benchmark {name!r}; choose from {', '.join(ALL)}")
    return resources.files(__package__).joinpath("models", f"{name}.prm").read_text()


def load_benchmark(name: str) -> ParfactorModel:
    return parse_model(benchmark_text(name))


def resolve_model(source: str) -> ParfactorModel:
    """Load ``source`` as a file path, falling back to a benchmark name."""
    path = Path(source)
    if path.exists() or source not in ALL:
        return load_model(path)
    return load_benchmark(source)
