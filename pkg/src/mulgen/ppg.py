"""Partial-product generation for unsigned AND-array multipliers.

The matrix is column-oriented: ``columns[j]`` holds every bit of weight
``2**j`` that enters the compressor tree.  Accumulator bits of a fused MAC
are injected as one extra bit per column.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace


@dataclass(frozen=True, order=True)
class BitRef:
    """A single matrix bit: its stable net name and its column weight."""

    name: str
    column: int
    kind: str = "pp"  # "pp" for a_i & b_k, "acc" for an accumulator input


@dataclass(frozen=True)
class PartialProductMatrix:
    width: int
    columns: tuple[tuple[BitRef, ...], ...]
    is_fused: bool = False
    acc_width: int = 0
    widened: bool = False

    @property
    def heights(self) -> list[int]:
        return [len(col) for col in self.columns]

    @property
    def total_bits(self) -> int:
        return sum(self.heights)

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def bits(self) -> list[BitRef]:
        return [b for col in self.columns for b in col]

    @property
    def max_value(self) -> int:
        """Largest integer the matrix can represent (a*b + c at all-ones)."""
        top = (1 << self.width) - 1
        return top * top + ((1 << self.acc_width) - 1)

    @property
    def result_width(self) -> int:
        return self.max_value.bit_length()


def pp_name(i: int, k: int) -> str:
    return f"pp_{i}_{k}"


def acc_name(j: int) -> str:
    return f"acc_{j}"


def generate_and_array(width: int) -> PartialProductMatrix:
    """Return the ``width**2`` AND terms ``a_i & b_k`` placed in column ``i+k``."""
    if width < 2:
        raise ValueError(f"invalid width {width}: need at least 2 bits")
    cols: list[list[BitRef]] = [[] for _ in range(2 * width - 1)]
    for i in range(width):
        for k in range(width):
            cols[i + k].append(BitRef(pp_name(i, k), i + k))
    return PartialProductMatrix(width, tuple(tuple(sorted(c)) for c in cols))


def inject_accumulator(ppm: PartialProductMatrix, acc_width: int) -> PartialProductMatrix:
    """Add one accumulator bit to each of the columns ``0 .. acc_width-1``.

    The matrix is widened when the accumulator reaches past the top AND
    column; ``widened`` records that on the returned matrix.
    """
    if acc_width < 0:
        raise ValueError("acc_width must be non-negative")
    if acc_width == 0:
        warnings.warn("acc_width=0: accumulator injection is a no-op", stacklevel=2)
        return ppm
    if ppm.is_fused:
        raise ValueError("matrix already carries accumulator bits")
    if acc_width > 2 * ppm.width:
        raise ValueError(
            f"acc_width {acc_width} exceeds 2*width={2 * ppm.width}")
    cols = [list(c) for c in ppm.columns]
    widened = acc_width > len(cols)
    while len(cols) < acc_width:
        cols.append([])
    for j in range(acc_width):
        cols[j].append(BitRef(acc_name(j), j, "acc"))
    return replace(
        ppm,
        columns=tuple(tuple(c) for c in cols),
        is_fused=True,
        acc_width=acc_width,
        widened=widened,
    )


def column_value(ppm: PartialProductMatrix, a: int, b: int, c: int = 0) -> int:
    """Weighted sum of the matrix bits for concrete operands.

    Reference evaluation used by tests: it reads each bit from its name, so
    it is independent of any netlist built from the matrix.
    """
    total = 0
    for col in ppm.columns:
        for bit in col:
            if bit.kind == "pp":
                _, i, k = bit.name.split("_")
                v = (a >> int(i)) & (b >> int(k)) & 1
            else:
                v = (c >> bit.column) & 1
            total += v << bit.column
    return total
