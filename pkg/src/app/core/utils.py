"""
Utility functions for the scg-emotion pipeline.
"""

import hashlib
import re
import sys
from contextlib import contextmanager
from typing import Any, Iterator, List

import numpy as np
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from app.core.constants import DECIMALS

console = Console(stderr=True)

_DIGITS = re.compile(r"(\d+)")


def natural_key(text: str) -> List[Any]:
    """
    Sort key that orders embedded integers numerically ("v2" < "v10").

    Args:
        text: Identifier to sort

    Returns:
        List of alternating text and integer chunks
    """
    return [int(chunk) if chunk.isdigit() else chunk.lower() for chunk in _DIGITS.split(str(text))]


def stable_hash(*parts: Any) -> int:
    """64-bit hash of the parts' string forms; identical across processes and runs."""
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def derive_rng(seed: int, *keys: Any) -> np.random.Generator:
    """
    Independent random stream for a keyed work item.

    The stream depends only on the seed and the keys, never on scheduling
    order, so serial and parallel runs draw the same numbers.
    """
    entropy = [int(seed) & 0xFFFFFFFF, *(stable_hash(k) & 0xFFFFFFFF for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def format_real(value: float, decimals: int = DECIMALS) -> str:
    """Fixed-decimal rendering; missing values print as an empty cell."""
    if value is None or np.isnan(value):
        return ""
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = f"{value:.{decimals}f}"
    return "0." + "0" * decimals if text == "-0." + "0" * decimals else text


def is_interactive_mode() -> bool:
    """Check if stderr is attached to a terminal."""
    try:
        return sys.stderr.isatty()
    except (AttributeError, ValueError):
        return False


@contextmanager
def progress_bar(description: str, total: int, enabled: bool = True) -> Iterator[Any]:
    """
    Rich progress bar on stderr yielding an ``advance()`` callable.

    Falls back to a no-op when disabled or not attached to a terminal so that
    batch runs produce no progress noise.
    """
    if not enabled or not is_interactive_mode():
        yield lambda steps=1: None
        return
    progress = Progress(
        TextColumn("[bold blue]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    )
    with progress:
        task = progress.add_task(description, total=total)
        yield lambda steps=1: progress.advance(task, steps)
