"""Shared helpers for the demo scripts."""
from pathlib import Path

from beliefbargain.config import load_config

HERE = Path(__file__).resolve().parent
OUT = HERE / "out"


def config(name, **overrides):
    """Load ``configs/<name>.yaml`` with output redirected under ``demos/out``."""
    cfg = load_config(HERE / "configs" / f"{name}.yaml")
    return cfg.with_overrides(output_dir=str(OUT / name), **overrides)


def banner(text):
    print()
    print(text)
    print("-" * len(text))
