"""Calendar month arithmetic used throughout the pipeline."""

from __future__ import annotations

from datetime import date
from typing import NamedTuple


class Month(NamedTuple):
    """A calendar month; tuple ordering doubles as chronological ordering."""

    year: int
    month: int

    @classmethod
    def from_date(cls, d: date) -> "Month":
        return cls(d.year, d.month)

    @classmethod
    def parse(cls, text: str) -> "Month":
        """Parse a 'YYYY-MM' label."""
        parts = text.strip().split("-")
        if len(parts) != 2:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        try:
            year, month = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"expected YYYY-MM, got {text!r}") from None
        if not 1 <= month <= 12:
            raise ValueError(f"month out of range in {text!r}")
        return cls(year, month)

    def shift(self, n: int) -> "Month":
        """Return the month n steps later (n may be negative)."""
        total = self.year * 12 + (self.month - 1) + n
        return Month(total // 12, total % 12 + 1)

    def ordinal(self) -> int:
        return self.year * 12 + (self.month - 1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def months_between(earlier: Month, later: Month) -> int:
    """Number of month steps from earlier to later (negative if reversed)."""
    return later.ordinal() - earlier.ordinal()


def month_range(first: Month, last: Month) -> list[Month]:
    """All months from first to last inclusive, in order."""
    if last < first:
        return []
    return [first.shift(i) for i in range(months_between(first, last) + 1)]
