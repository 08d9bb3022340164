from __future__ import annotations

import sys
from typing import Any, Optional

try:  # pragma: no cover - optional dependency handling
    from tqdm import tqdm as _tqdm  # type: ignore
except ModuleNotFoundError:  # pragma: no cover - fallback
    _tqdm = None


class SilentBar:
    """Stands in for a tqdm bar when tqdm is missing or the bar is disabled."""

    def __init__(self, total: Optional[int] = None, unit: Optional[str] = None, desc: Optional[str] = None, **_: Any) -> None:
        self.total = total
        self.unit = unit
        self.desc = desc
        self.n = 0

    def update(self, n: int = 1) -> None:
        self.n += n

    def write(self, message: str) -> None:
        print(message, file=sys.stderr)

    def close(self) -> None:
        return None


def progress_bar(total: int, desc: str, *, enabled: bool = True) -> Any:
    """A run counter for campaigns and oracle sweeps; writes go to stderr so reports stay clean."""

    if not enabled or _tqdm is None:
        return SilentBar(total=total, unit="run", desc=desc)
    return _tqdm(total=total, unit="run", desc=desc, file=sys.stderr, leave=False)
