"""Named subsystem layouts for multipartite operators.

A layout is an ordered list of registers; tensor indices are row-major in
that order. Dimension-1 registers are kept rather than elided so that
reductions to special cases reuse the same indexing logic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


class LayoutError(ValueError):
    """Unknown register name or inconsistent dimensions."""


@dataclass(frozen=True)
class Register:
    name: str
    dim: int
    classical: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise LayoutError(f"register {self.name!r} has dim {self.dim} < 1")


class RegisterLayout:
    """Ordered collection of uniquely named registers."""

    def __init__(self, registers: Iterable[Register]):
        regs = tuple(registers)
        names = [r.name for r in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        self.registers = regs
        self._index = {r.name: i for i, r in enumerate(regs)}

    @classmethod
    def of(cls, *specs) -> "RegisterLayout":
        """Build from (name, dim) or (name, dim, classical) tuples."""
        return cls(Register(*s) for s in specs)

    @property
    def names(self) -> tuple:
        return tuple(r.name for r in self.registers)

    @property
    def dims(self) -> tuple:
        return tuple(r.dim for r in self.registers)

    @property
    def total_dim(self) -> int:
        d = 1
        for r in self.registers:
            d *= r.dim
        return d

    def __len__(self) -> int:
        return len(self.registers)

    def __iter__(self):
        return iter(self.registers)

    def __eq__(self, other) -> bool:
        return isinstance(other, RegisterLayout) and self.registers == other.registers

    def __repr__(self) -> str:
        inner = ", ".join(
            f"{r.name}:{r.dim}" + ("c" if r.classical else "") for r in self.registers
        )
        return f"RegisterLayout({inner})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise LayoutError(f"unknown register {name!r}; have {self.names}") from None

    def register(self, name: str) -> Register:
        return self.registers[self.index(name)]

    def positions(self, names: Sequence[str]) -> tuple:
        return tuple(self.index(n) for n in names)

    def dim_of(self, names: Sequence[str]) -> int:
        d = 1
        for n in names:
            d *= self.register(n).dim
        return d

    def subset(self, names: Sequence[str]) -> "RegisterLayout":
        return RegisterLayout(self.register(n) for n in names)

    def drop(self, names: Sequence[str]) -> "RegisterLayout":
        gone = set(names)
        for n in gone:
            self.index(n)
        return RegisterLayout(r for r in self.registers if r.name not in gone)

    def complement(self, names: Sequence[str]) -> tuple:
        keep = set(names)
        for n in keep:
            self.index(n)
        return tuple(r.name for r in self.registers if r.name not in keep)
