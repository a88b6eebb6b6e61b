import numpy as np
import pytest

from hsrd import numkit
from hsrd.qstate import HybridSource, SourceEntry


def random_density(gen, d, rank=None, trace=1.0):
    """Random mixed state of the given rank (full rank by default)."""
    r = rank or d
    m = gen.normal(size=(d, r)) + 1j * gen.normal(size=(d, r))
    rho = m @ m.conj().T
    return trace * rho / np.trace(rho).real


def random_pure(gen, d):
    v = gen.normal(size=d) + 1j * gen.normal(size=d)
    return v / np.linalg.norm(v)


def random_source(gen, dims, n_entries=None):
    """Random hybrid source with Haar-random pure entry states."""
    dx, dy, dz = dims.get("X", 1), dims.get("Y", 1), dims.get("Z", 1)
    labels = [(x, y, z) for x in range(dx) for y in range(dy) for z in range(dz)]
    if n_entries is not None:
        idx = gen.choice(len(labels), size=min(n_entries, len(labels)), replace=False)
        labels = [labels[i] for i in sorted(idx)]
    probs = gen.dirichlet(np.ones(len(labels)))
    dq = dims.get("A", 1) * dims.get("B", 1) * dims.get("C", 1) * dims.get("R", 1)
    full = {k: dims.get(k, 1) for k in HybridSource.REGS}
    entries = [
        SourceEntry(x, y, z, float(p), random_pure(gen, dq))
        for (x, y, z), p in zip(labels, probs)
    ]
    return HybridSource(dims=full, entries=entries).validated()


@pytest.fixture
def gen():
    return numkit.rng(20260810)
