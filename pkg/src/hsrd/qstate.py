"""Register-labeled states and the classical-quantum hybrid source model.

The hybrid source is an ensemble {p_xyz, |psi_xyz>} over classical labels
(x, y, z) with pure states on quantum registers A, B, C, R. Source states
carry the fixed register order X, Y, Z, A, B, C, R, T where T is the
classical copy register holding |xyz>.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numkit
from .registers import LayoutError, Register, RegisterLayout

SOURCE_ORDER = ("X", "Y", "Z", "A", "B", "C", "R", "T")
QUANTUM_SOURCE_ORDER = ("A", "B", "C", "R")


class StateValidationError(ValueError):
    """State or source violates a structural invariant."""


# ---------------------------------------------------------------------------
# Labeled operators
# ---------------------------------------------------------------------------


@dataclass
class LabeledState:
    """Density operator (possibly sub-normalized) with named subsystems."""

    matrix: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = self.layout.total_dim
        if self.matrix.shape != (d, d):
            raise LayoutError(
                f"matrix shape {self.matrix.shape} does not match layout dim {d}"
            )

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def validate(self, atol: float = 1e-9) -> "LabeledState":
        w = np.linalg.eigvalsh(numkit.hermitize(self.matrix))
        if w[0] < -atol:
            raise StateValidationError(f"negative eigenvalue {w[0]:.3e}")
        if self.trace() > 1 + atol:
            raise StateValidationError(f"trace {self.trace():.9f} exceeds 1")
        for reg in self.layout:
            if reg.classical and reg.dim > 1:
                off = self.matrix - self.dephase(reg.name).matrix
                if np.abs(off).max() > atol:
                    raise StateValidationError(
                        f"classical register {reg.name!r} carries off-diagonal terms"
                    )
        return self

    def marginal(self, names: Sequence[str]) -> "LabeledState":
        """Partial trace onto the named registers, reordered as given."""
        keep = self.layout.positions(names)
        reduced = numkit.partial_trace(self.matrix, self.layout.dims, sorted(keep))
        kept_sorted = [self.layout.registers[i] for i in sorted(keep)]
        sub = RegisterLayout(kept_sorted)
        perm = tuple(sub.index(n) for n in names)
        out = numkit.permute_matrix(reduced, sub.dims, perm)
        return LabeledState(out, RegisterLayout(sub.registers[p] for p in perm))

    def permute(self, names: Sequence[str]) -> "LabeledState":
        if set(names) != set(self.layout.names):
            raise LayoutError("permute requires all register names")
        return self.marginal(names)

    def dephase(self, name: str) -> "LabeledState":
        """Completely dephasing operation on one register's fixed basis."""
        pos = self.layout.index(name)
        dims = self.layout.dims
        d = dims[pos]
        k = len(dims)
        arr = self.matrix.reshape(dims + dims).copy()
        idx = np.arange(d)
        mask = np.zeros((d, d))
        mask[idx, idx] = 1.0
        shape = [1] * (2 * k)
        shape[pos] = d
        shape[k + pos] = d
        arr *= mask.reshape(shape)
        return LabeledState(arr.reshape(self.matrix.shape), self.layout)

    def tensor(self, other: "LabeledState") -> "LabeledState":
        mat = np.kron(self.matrix, other.matrix)
        return LabeledState(mat, RegisterLayout(tuple(self.layout) + tuple(other.layout)))


@dataclass
class PureState:
    """State vector with named subsystems."""

    vector: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=complex).reshape(-1)
        if self.vector.size != self.layout.total_dim:
            raise LayoutError(
                f"vector length {self.vector.size} does not match layout dim {self.layout.total_dim}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def projector(self) -> LabeledState:
        return LabeledState(np.outer(self.vector, self.vector.conj()), self.layout)

    def permute(self, names: Sequence[str]) -> "PureState":
        perm = self.layout.positions(names)
        vec = numkit.permute_vector(self.vector, self.layout.dims, perm)
        return PureState(vec, RegisterLayout(self.layout.registers[p] for p in perm))

    def marginal(self, names: Sequence[str]) -> LabeledState:
        return self.projector().marginal(names)

    def tensor(self, other: "PureState") -> "PureState":
        return PureState(
            np.kron(self.vector, other.vector),
            RegisterLayout(tuple(self.layout) + tuple(other.layout)),
        )


def apply_kraus(
    state: LabeledState,
    kraus: Sequence[np.ndarray],
    in_names: Sequence[str],
    out_registers: Sequence[Register],
) -> LabeledState:
    """Apply a CP map given by Kraus operators to the named input registers.

    Each Kraus operator maps the tensor product of in_names (in that order)
    to the tensor product of out_registers. Untouched registers keep their
    relative order after the new output registers.
    """
    rest = state.layout.complement(in_names)
    arranged = state.permute(tuple(in_names) + rest)
    d_in = state.layout.dim_of(in_names)
    d_rest = arranged.layout.total_dim // d_in
    d_out = 1
    for r in out_registers:
        d_out *= r.dim
    m = arranged.matrix.reshape(d_in, d_rest, d_in, d_rest)
    out = np.zeros((d_out, d_rest, d_out, d_rest), dtype=complex)
    for K in kraus:
        if K.shape != (d_out, d_in):
            raise LayoutError(f"Kraus shape {K.shape} incompatible with ({d_out},{d_in})")
        tmp = np.einsum("oi,irjs->orjs", K, m)
        out += np.einsum("orjs,pj->orps", tmp, K.conj())
    new_layout = RegisterLayout(
        tuple(out_registers) + tuple(arranged.layout.register(n) for n in rest)
    )
    return LabeledState(out.reshape(d_out * d_rest, d_out * d_rest), new_layout)


def kraus_compose(
    second: Sequence[np.ndarray], first: Sequence[np.ndarray]
) -> list:
    return [S @ F for S in second for F in first]


# ---------------------------------------------------------------------------
# Hybrid source
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceEntry:
    x: int
    y: int
    z: int
    p: float
    psi: np.ndarray  # pure vector on A (x) B (x) C (x) R, row-major


@dataclass
class HybridSource:
    """Classical-quantum source {p_xyz, |psi_xyz>} with register dimensions."""

    dims: dict
    entries: list = field(default_factory=list)

    REGS = ("A", "B", "C", "R", "X", "Y", "Z")

    def d(self, name: str) -> int:
        return int(self.dims[name])

    @property
    def t_dim(self) -> int:
        return self.d("X") * self.d("Y") * self.d("Z")

    @property
    def quantum_dim(self) -> int:
        return self.d("A") * self.d("B") * self.d("C") * self.d("R")

    @property
    def total_dim(self) -> int:
        return self.quantum_dim * self.t_dim * self.t_dim

    def total_weight(self) -> float:
        return float(sum(e.p for e in self.entries))

    def t_index(self, x: int, y: int, z: int) -> int:
        return (x * self.d("Y") + y) * self.d("Z") + z

    def validated(self, atol: float = 1e-9, allow_subnormalized: bool = False) -> "HybridSource":
        """Checked copy with zero-probability entries dropped."""
        for name in self.REGS:
            if name not in self.dims or self.d(name) < 1:
                raise StateValidationError(f"bad or missing dimension for {name!r}")
        seen = set()
        kept = []
        for e in self.entries:
            if not (0 <= e.x < self.d("X") and 0 <= e.y < self.d("Y") and 0 <= e.z < self.d("Z")):
                raise StateValidationError(f"label {(e.x, e.y, e.z)} out of range")
            if (e.x, e.y, e.z) in seen:
                raise StateValidationError(f"duplicate label {(e.x, e.y, e.z)}")
            seen.add((e.x, e.y, e.z))
            if e.p < -atol:
                raise StateValidationError(f"negative probability {e.p}")
            psi = np.asarray(e.psi, dtype=complex).reshape(-1)
            if psi.size != self.quantum_dim:
                raise StateValidationError(
                    f"entry {(e.x, e.y, e.z)}: psi length {psi.size} != {self.quantum_dim}"
                )
            if abs(np.linalg.norm(psi) - 1.0) > 1e-7:
                raise StateValidationError(
                    f"entry {(e.x, e.y, e.z)}: |psi| = {np.linalg.norm(psi):.9f} is not normalized"
                )
            if e.p > 0:
                kept.append(SourceEntry(e.x, e.y, e.z, float(e.p), psi))
        total = sum(e.p for e in kept)
        if allow_subnormalized:
            if total > 1 + atol:
                raise StateValidationError(f"total weight {total:.9f} exceeds 1")
        elif abs(total - 1.0) > atol:
            raise StateValidationError(f"probabilities sum to {total:.9f}, expected 1")
        if not kept:
            raise StateValidationError("source has no entries with positive probability")
        return HybridSource(dims=dict(self.dims), entries=kept)

    def n_copies(self, n: int) -> "HybridSource":
        """IID extension: labels concatenate, probabilities multiply, vectors tensor."""
        if n < 1:
            raise ValueError("n must be >= 1")
        src = self.validated(allow_subnormalized=True)
        if n == 1:
            return src
        new_dims = {k: src.d(k) ** n for k in self.REGS}
        total = 1
        for k in self.REGS:
            total *= new_dims[k]
        total *= new_dims["X"] * new_dims["Y"] * new_dims["Z"]  # the T register
        if total > numkit.dim_cap():
            raise numkit.DimensionError(
                f"{n}-copy source dimension {total} exceeds cap {numkit.dim_cap()}"
            )
        single = [src.d(k) for k in ("A", "B", "C", "R")]
        entries = [SourceEntry(0, 0, 0, 1.0, np.ones(1))]
        dims_acc = [1, 1, 1, 1]
        for _ in range(n):
            nxt = []
            for acc in entries:
                for e in src.entries:
                    x = acc.x * src.d("X") + e.x
                    y = acc.y * src.d("Y") + e.y
                    z = acc.z * src.d("Z") + e.z
                    psi = _tensor_quantum(acc.psi, dims_acc, e.psi, single)
                    nxt.append(SourceEntry(x, y, z, acc.p * e.p, psi))
            entries = nxt
            dims_acc = [a * b for a, b in zip(dims_acc, single)]
        return HybridSource(dims=new_dims, entries=entries).validated(allow_subnormalized=True)

    # -- JSON source file format ------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "dims": {k: self.d(k) for k in self.REGS},
            "entries": [
                {
                    "x": e.x,
                    "y": e.y,
                    "z": e.z,
                    "p": e.p,
                    "psi": {
                        "re": np.asarray(e.psi).real.tolist(),
                        "im": np.asarray(e.psi).imag.tolist(),
                    },
                }
                for e in self.entries
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "HybridSource":
        doc = json.loads(text)
        dims = {k: int(v) for k, v in doc["dims"].items()}
        entries = []
        for e in doc["entries"]:
            psi = np.asarray(e["psi"]["re"], dtype=float) + 1j * np.asarray(
                e["psi"]["im"], dtype=float
            )
            entries.append(SourceEntry(int(e["x"]), int(e["y"]), int(e["z"]), float(e["p"]), psi))
        return cls(dims=dims, entries=entries).validated(allow_subnormalized=True)


def _tensor_quantum(psi_a, dims_a, psi_b, dims_b):
    """Tensor two ABCR vectors so that like registers stay adjacent (A1A2 B1B2 ...)."""
    v = np.kron(np.asarray(psi_a, dtype=complex), np.asarray(psi_b, dtype=complex))
    dims = list(dims_a) + list(dims_b)
    perm = [0, 4, 1, 5, 2, 6, 3, 7]
    return numkit.permute_vector(v, dims, perm)


def source_layout(spec: HybridSource) -> RegisterLayout:
    """Fixed register order X, Y, Z, A, B, C, R, T with classical flags."""
    return RegisterLayout.of(
        ("X", spec.d("X"), True),
        ("Y", spec.d("Y"), True),
        ("Z", spec.d("Z"), True),
        ("A", spec.d("A")),
        ("B", spec.d("B")),
        ("C", spec.d("C")),
        ("R", spec.d("R")),
        ("T", spec.t_dim, True),
    )


def build_source(spec: HybridSource, allow_subnormalized: bool = False) -> LabeledState:
    """Assemble the classical-quantum source state sum_xyz p |xyz><xyz| (x) psi (x) |xyz><xyz|_T."""
    src = spec.validated(allow_subnormalized=allow_subnormalized)
    layout = source_layout(src)
    d = layout.total_dim
    mat = np.zeros((d, d), dtype=complex)
    for e in src.entries:
        vec = _entry_vector(src, layout, e)
        mat += e.p * np.outer(vec, vec.conj())
    return LabeledState(mat, layout)


def build_purified_source(spec: HybridSource, allow_subnormalized: bool = False) -> PureState:
    """Coherent version: sum_xyz sqrt(p) |x,y,z> |psi_xyz> |xyz>_T."""
    src = spec.validated(allow_subnormalized=allow_subnormalized)
    layout = source_layout(src)
    vec = np.zeros(layout.total_dim, dtype=complex)
    for e in src.entries:
        vec += np.sqrt(e.p) * _entry_vector(src, layout, e)
    return PureState(vec, layout)


def _entry_vector(src: HybridSource, layout: RegisterLayout, e: SourceEntry) -> np.ndarray:
    parts = [
        numkit._basis(src.d("X"), e.x),
        numkit._basis(src.d("Y"), e.y),
        numkit._basis(src.d("Z"), e.z),
        np.asarray(e.psi, dtype=complex),
        numkit._basis(src.t_dim, src.t_index(e.x, e.y, e.z)),
    ]
    vec = parts[0]
    for pt in parts[1:]:
        vec = np.kron(vec, pt)
    return vec


def max_entangled(r: int) -> np.ndarray:
    """|Phi_r> = r^(-1/2) sum_i |ii> (product |00> at r = 1)."""
    if r < 1:
        raise numkit.DimensionError(f"Schmidt rank {r} < 1")
    v = np.zeros(r * r, dtype=complex)
    for i in range(r):
        v[i * r + i] = 1.0
    return v / np.sqrt(r)


def dephase(state: LabeledState, name: str) -> LabeledState:
    return state.dephase(name)
