"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from lossy_kuramoto.network import (DEFAULT_RANGES, HZ_TO_RAD_PER_SEC,
                                    DerivedModel, derive, generate_random)


def build_model(edges, a, b, kp, varpi, n=None):
    """Construct a DerivedModel directly from edge weights.

    Bypasses NetworkSpec so tests can use weights a valid network cannot
    produce (zero coupling, enormous drives).  ``kp`` is in Hz/pu, as in
    the library; the angular gain conversion matches derive().
    """
    edges = tuple((int(i), int(j)) for i, j in edges)
    if n is None:
        n = 1 + max(max(i, j) for i, j in edges)
    e = len(edges)
    src = np.array([i for i, _ in edges], dtype=np.intp)
    dst = np.array([j for _, j in edges], dtype=np.intp)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    kp = np.asarray(kp, dtype=float)
    varpi = np.asarray(varpi, dtype=float)
    incidence = np.zeros((n, e))
    incidence[src, np.arange(e)] = 1.0
    incidence[dst, np.arange(e)] = -1.0
    psi = np.arctan2(a, b)
    return DerivedModel(
        node_count=n,
        edge_count=e,
        src=src,
        dst=dst,
        a=a,
        b=b,
        magnitude=np.hypot(a, b),
        psi=psi,
        psi_max=float(psi.max()),
        natural_frequency=varpi,
        gain=kp,
        angular_gain=HZ_TO_RAD_PER_SEC * kp,
        incidence=incidence,
        abs_incidence=np.abs(incidence),
    )


def reference_rhs(model, delta):
    """Slow nodewise evaluation of the vector field, used as an oracle.

    Sums b sin(d) - a cos(d) over each node's incident edges with
    explicitly wrapped differences, independent of the incidence-matrix
    path used by the library.
    """
    delta = np.asarray(delta, dtype=float)
    n = model.node_count
    out = np.zeros(n)
    for i in range(n):
        coupling = 0.0
        for e in range(model.edge_count):
            if model.src[e] == i:
                j = model.dst[e]
            elif model.dst[e] == i:
                j = model.src[e]
            else:
                continue
            d = delta[i] - delta[j]
            d = np.pi - np.mod(np.pi - d, 2.0 * np.pi)
            coupling += model.b[e] * np.sin(d) - model.a[e] * np.cos(d)
        out[i] = model.angular_gain[i] * (model.natural_frequency[i] - coupling)
    return out


def bisect_root(f, lo, hi, tol=1e-14, max_iter=200):
    """Plain bisection; requires a sign change on [lo, hi]."""
    flo, fhi = f(lo), f(hi)
    assert flo * fhi <= 0, "bisection bracket has no sign change"
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0 or hi - lo < tol:
            return mid
        if flo * fmid <= 0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def random_model(rng):
    """A small random connected model drawn through the public generator."""
    n = int(rng.integers(2, 7))
    max_e = n * (n - 1) // 2
    e = int(rng.integers(n - 1, max_e + 1))
    seed = int(rng.integers(0, 2**31))
    return derive(generate_random(n, e, DEFAULT_RANGES, seed))


@pytest.fixture(scope="session")
def bench_model():
    """A 10-node, 15-edge benchmark-style instance."""
    return derive(generate_random(10, 15, DEFAULT_RANGES, seed=1))


@pytest.fixture(scope="session")
def bench_spec():
    return generate_random(10, 15, DEFAULT_RANGES, seed=1)


@pytest.fixture(scope="session")
def bench_equilibrium(bench_model):
    from lossy_kuramoto.equilibrium import solve

    return solve(bench_model)
