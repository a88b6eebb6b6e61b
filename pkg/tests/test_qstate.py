import json

import numpy as np
import pytest

from hsrd import numkit
from hsrd.entropy import von_neumann_kernel
from hsrd.qstate import (
    HybridSource,
    LabeledState,
    PureState,
    SourceEntry,
    StateValidationError,
    apply_kraus,
    build_purified_source,
    build_source,
    max_entangled,
    source_layout,
)
from hsrd.registers import LayoutError, Register, RegisterLayout
from conftest import random_density, random_pure, random_source


def merging_source(d_r=2):
    """A, X, Y, Z trivial; BC maximally entangled, R purifies nothing."""
    psi = max_entangled(2)  # on C (x) R? arrange on B (x) C
    # entry vector lives on A x B x C x R = 1 x 2 x 2 x d_r
    vec = np.zeros(4 * d_r, dtype=complex)
    bc = max_entangled(2)
    for b in range(2):
        for c in range(2):
            vec[(b * 2 + c) * d_r + 0] = bc[b * 2 + c]
    dims = {"A": 1, "B": 2, "C": 2, "R": d_r, "X": 1, "Y": 1, "Z": 1}
    return HybridSource(dims, [SourceEntry(0, 0, 0, 1.0, vec)])


def test_single_entry_bell_source():
    # single entry p=1, psi = Phi on C (x) R; A, B, X, Y, Z trivial
    dims = {"A": 1, "B": 1, "C": 2, "R": 2, "X": 1, "Y": 1, "Z": 1}
    src = HybridSource(dims, [SourceEntry(0, 0, 0, 1.0, max_entangled(2))])
    state = build_source(src)
    state.validate()
    w = np.linalg.eigvalsh(state.matrix)
    assert abs(w[-1] - 1.0) < 1e-12  # rank one
    assert abs(state.trace() - 1.0) < 1e-12
    marg = state.marginal(("C",))
    assert np.allclose(marg.matrix, np.eye(2) / 2)


def test_two_entry_source_rank():
    dims = {"A": 1, "B": 1, "C": 1, "R": 2, "X": 1, "Y": 1, "Z": 2}
    e0 = SourceEntry(0, 0, 0, 0.5, np.array([1, 0], dtype=complex))
    e1 = SourceEntry(0, 0, 1, 0.5, np.array([0, 1], dtype=complex))
    state = build_source(HybridSource(dims, [e0, e1]))
    state.validate()
    w = np.linalg.eigvalsh(state.matrix)
    assert (w > 1e-12).sum() == 2
    assert abs(state.trace() - 1.0) < 1e-12


def test_source_dephasing_idempotent(gen):
    src = random_source(gen, {"A": 2, "C": 2, "R": 2, "Z": 2})
    state = build_source(src)
    for name in ("X", "Y", "Z", "T"):
        dep = state.dephase(name)
        assert np.abs(dep.matrix - state.matrix).max() < 1e-12


def test_purified_source_single_entry():
    dims = {"A": 1, "B": 1, "C": 2, "R": 2, "X": 1, "Y": 1, "Z": 1}
    src = HybridSource(dims, [SourceEntry(0, 0, 0, 1.0, max_entangled(2))])
    pure = build_purified_source(src)
    assert abs(pure.norm() - 1.0) < 1e-12
    assert np.allclose(pure.vector, max_entangled(2))


def test_purified_source_amplitudes():
    dims = {"A": 1, "B": 1, "C": 1, "R": 2, "X": 1, "Y": 1, "Z": 2}
    e0 = SourceEntry(0, 0, 0, 0.25, np.array([1, 0], dtype=complex))
    e1 = SourceEntry(0, 0, 1, 0.75, np.array([0, 1], dtype=complex))
    pure = build_purified_source(HybridSource(dims, [e0, e1]))
    nz = np.abs(pure.vector[np.abs(pure.vector) > 1e-12])
    assert np.allclose(np.sort(nz), np.sort(np.sqrt([0.25, 0.75])))


def test_btf_dephased_purification_equals_source(gen):
    # dephasing T of the purified source reproduces the source state
    for k in range(50):
        dims = {"A": 1, "B": 2, "C": 2, "R": 2, "Z": 2} if k % 2 else {"A": 2, "C": 2, "R": 2, "Y": 2}
        src = random_source(gen, dims)
        ps = build_purified_source(src)
        dep = ps.projector().dephase("T")
        state = build_source(src)
        assert np.abs(dep.matrix - state.matrix).max() < 1e-10


def test_max_entangled():
    assert np.allclose(max_entangled(1), [1.0])
    phi = max_entangled(2)
    marg = numkit.partial_trace(np.outer(phi, phi.conj()), (2, 2), keep=(0,))
    assert np.allclose(marg, np.eye(2) / 2)
    phi4 = max_entangled(4)
    marg = numkit.partial_trace(np.outer(phi4, phi4.conj()), (4, 4), keep=(0,))
    assert abs(von_neumann_kernel(marg) - 2.0) < 1e-12
    with pytest.raises(numkit.DimensionError):
        max_entangled(0)


def test_dephase_classical_register_is_identity(gen):
    src = random_source(gen, {"C": 2, "R": 2, "Z": 2})
    state = build_source(src)
    assert np.abs(state.dephase("Z").matrix - state.matrix).max() < 1e-12


def test_dephase_bell_half():
    layout = RegisterLayout.of(("A", 2), ("B", 2))
    phi = max_entangled(2)
    state = LabeledState(np.outer(phi, phi.conj()), layout)
    dep = state.dephase("A")
    expect = np.diag([0.5, 0, 0, 0.5]).astype(complex)
    assert np.allclose(dep.matrix, expect)


def test_dephase_trace_and_purity(gen):
    rho = random_density(gen, 8)
    state = LabeledState(rho, RegisterLayout.of(("A", 2), ("B", 4)))
    dep = state.dephase("A")
    assert abs(dep.trace() - state.trace()) < 1e-12
    pur0 = np.trace(rho @ rho).real
    pur1 = np.trace(dep.matrix @ dep.matrix).real
    assert pur1 <= pur0 + 1e-12


def test_n_copies(gen):
    src = random_source(gen, {"C": 2, "R": 2, "Z": 2})
    same = src.n_copies(1)
    assert same.dims == src.dims and len(same.entries) == len(src.entries)
    dims = {"A": 2, "B": 1, "C": 1, "R": 2, "X": 1, "Y": 1, "Z": 1}
    one = HybridSource(dims, [SourceEntry(0, 0, 0, 1.0, random_pure(gen, 4))])
    two = one.n_copies(2)
    assert two.d("A") == 4 and len(two.entries) == 1
    assert abs(two.entries[0].p - 1.0) < 1e-12
    # entropy additivity: H(A) doubles for the two-copy source
    h1 = von_neumann_kernel(build_source(one).marginal(("A",)).matrix)
    with numkit.cap_override(512):
        h2 = von_neumann_kernel(build_source(two).marginal(("A",)).matrix)
    assert abs(h2 - 2 * h1) < 1e-10


def test_n_copies_cap():
    dims = {"A": 4, "B": 4, "C": 4, "R": 4, "X": 1, "Y": 1, "Z": 1}
    src = HybridSource(dims, [SourceEntry(0, 0, 0, 1.0, random_pure(numkit.rng(1), 256))])
    with pytest.raises(numkit.DimensionError):
        src.n_copies(2)


def test_entry_count_multiplies(gen):
    src = random_source(gen, {"C": 2, "R": 2, "Z": 2})  # two entries
    with numkit.cap_override(4096):
        two = src.n_copies(2)
    assert len(two.entries) == len(src.entries) ** 2
    assert abs(two.total_weight() - 1.0) < 1e-9


def test_json_round_trip(gen):
    src = random_source(gen, {"A": 2, "C": 2, "R": 2, "Y": 2})
    text = src.to_json()
    doc = json.loads(text)
    assert set(doc["dims"]) == set(HybridSource.REGS)
    back = HybridSource.from_json(text)
    assert back.dims == {k: src.d(k) for k in HybridSource.REGS}
    for a, b in zip(src.entries, back.entries):
        assert (a.x, a.y, a.z) == (b.x, b.y, b.z)
        assert abs(a.p - b.p) < 1e-15
        assert np.allclose(a.psi, b.psi)
    assert np.abs(build_source(back).matrix - build_source(src).matrix).max() < 1e-12


def test_validation_errors():
    dims = {"A": 1, "B": 1, "C": 2, "R": 1, "X": 1, "Y": 1, "Z": 1}
    bad_prob = HybridSource(dims, [SourceEntry(0, 0, 0, 0.7, np.array([1, 0]))])
    with pytest.raises(StateValidationError):
        bad_prob.validated()
    bad_norm = HybridSource(dims, [SourceEntry(0, 0, 0, 1.0, np.array([1, 1]))])
    with pytest.raises(StateValidationError):
        bad_norm.validated()
    dup = HybridSource(
        {**dims, "Z": 2},
        [SourceEntry(0, 0, 0, 0.5, np.array([1, 0])), SourceEntry(0, 0, 0, 0.5, np.array([0, 1]))],
    )
    with pytest.raises(StateValidationError):
        dup.validated()
    out_of_range = HybridSource(dims, [SourceEntry(0, 0, 3, 1.0, np.array([1, 0]))])
    with pytest.raises(StateValidationError):
        out_of_range.validated()


def test_zero_probability_entries_dropped():
    dims = {"A": 1, "B": 1, "C": 2, "R": 1, "X": 1, "Y": 1, "Z": 2}
    src = HybridSource(
        dims,
        [
            SourceEntry(0, 0, 0, 1.0, np.array([1, 0])),
            SourceEntry(0, 0, 1, 0.0, np.array([0, 1])),
        ],
    )
    assert len(src.validated().entries) == 1


def test_labeled_state_classical_flag_validation():
    layout = RegisterLayout.of(("Z", 2, True), ("C", 2))
    phi = max_entangled(2)
    coherent = LabeledState(np.outer(phi, phi.conj()), layout)
    with pytest.raises(StateValidationError):
        coherent.validate()
    coherent.dephase("Z").validate()


def test_marginal_ordering(gen):
    rho = random_density(gen, 8)
    layout = RegisterLayout.of(("A", 2), ("B", 2), ("C", 2))
    st = LabeledState(rho, layout)
    ab = st.marginal(("A", "B")).matrix
    ba = st.marginal(("B", "A")).matrix
    assert np.allclose(ba, numkit.permute_matrix(ab, (2, 2), (1, 0)))
    with pytest.raises(LayoutError):
        st.marginal(("Q",))


def test_apply_kraus_unitary_and_channel(gen):
    rho = random_density(gen, 8)
    layout = RegisterLayout.of(("A", 2), ("B", 2), ("C", 2))
    st = LabeledState(rho, layout)
    u = numkit.sample_haar_unitary(4, gen)
    out = apply_kraus(st, [u], ("A", "C"), (Register("A", 2), Register("C", 2)))
    assert abs(out.trace() - 1.0) < 1e-10
    back = apply_kraus(out, [u.conj().T], ("A", "C"), (Register("A", 2), Register("C", 2)))
    assert np.abs(back.permute(("A", "B", "C")).matrix - rho).max() < 1e-10
    # trace-decreasing single Kraus keeps positivity
    k0 = np.array([[1, 0], [0, 0]], dtype=complex)
    out = apply_kraus(st, [k0], ("A",), (Register("A", 2),))
    assert np.linalg.eigvalsh(out.matrix)[0] >= -1e-12
