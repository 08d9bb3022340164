from __future__ import annotations

import os
import sys
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Optional


def atomic_write(path: Path, content: str, *, encoding: str = "utf-8") -> None:
    """Replace ``path`` in one step; readers see either the old or the new content."""

    path.parent.mkdir(parents=True, exist_ok=True)
    with NamedTemporaryFile(
        "w", encoding=encoding, newline="", dir=path.parent, prefix=f".{path.name}.", delete=False
    ) as handle:
        staged = Path(handle.name)
        try:
            handle.write(content)
        except BaseException:
            handle.close()
            staged.unlink(missing_ok=True)
            raise
    os.replace(staged, path)


def emit_report(content: str, out: Optional[Path]) -> None:
    """Write a rendered report to ``out``, or to stdout when no path is configured."""

    text = content if content.endswith("\n") else content + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text)
