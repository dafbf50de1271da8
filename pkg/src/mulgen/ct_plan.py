"""Per-column compressor counts for reducing a bit matrix to two rows.

Each column total ``t = pp + carry_in`` is reduced to at most two outputs
using as many 3:2 compressors as possible and at most one 2:2 compressor
(only when ``t`` is odd).  Carries ripple LSB-first.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .ppg import PartialProductMatrix

AREA_FULL = 3  # normalized area of a 3:2 compressor
AREA_HALF = 2  # normalized area of a 2:2 compressor


@dataclass(frozen=True)
class ColumnPlan:
    column: int
    pp: int
    carry_in: int
    f: int
    h: int

    @property
    def total(self) -> int:
        return self.pp + self.carry_in

    @property
    def carry_out(self) -> int:
        return self.f + self.h

    @property
    def outputs(self) -> int:
        return self.total - 2 * self.f - self.h

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(total=self.total, carry_out=self.carry_out, outputs=self.outputs)
        return d


def column_counts(total: int) -> tuple[int, int]:
    """(f, h) for a single column holding ``total`` bits."""
    if total <= 2:
        return 0, 0
    if total % 2 == 0:
        return (total - 2) // 2, 0
    return (total - 3) // 2, 1


def plan_compressors(ppm: PartialProductMatrix | Sequence[int]) -> list[ColumnPlan]:
    """Plan compressor counts for every column, extending past the top
    column while carries are still produced."""
    heights = list(ppm.heights if isinstance(ppm, PartialProductMatrix) else ppm)
    if any(h < 0 for h in heights):
        raise ValueError("column heights must be non-negative")
    plans = []
    carry = 0
    j = 0
    while j < len(heights) or carry:
        pp = heights[j] if j < len(heights) else 0
        f, h = column_counts(pp + carry)
        plans.append(ColumnPlan(j, pp, carry, f, h))
        carry = f + h
        j += 1
    return plans


def min_stage_bound(max_total: int) -> int:
    """Smallest ``s >= 0`` with ``2 * 1.5**s >= max_total``.

    Evaluated in integers (``2 * 3**s >= max_total * 2**s``) so exact
    powers such as ``max_total=3`` do not round the wrong way.
    """
    if max_total < 1:
        raise ValueError("max_total must be >= 1")
    s = 0
    while 2 * 3**s < max_total * 2**s:
        s += 1
    return s


def plan_area(plans: Sequence[ColumnPlan]) -> int:
    return sum(AREA_FULL * p.f + AREA_HALF * p.h for p in plans)


def total_full(plans: Sequence[ColumnPlan]) -> int:
    return sum(p.f for p in plans)


def total_half(plans: Sequence[ColumnPlan]) -> int:
    return sum(p.h for p in plans)


def stage_bounds(plans: Sequence[ColumnPlan]) -> dict:
    """Stage lower bounds: global (max initial height) and per column total."""
    max_height = max((p.pp for p in plans), default=1)
    return {
        "global": min_stage_bound(max(max_height, 1)),
        "per_column": [min_stage_bound(max(p.total, 1)) for p in plans],
    }
