"""Coupling graph, physical parameters, and the derived oscillator model.

A network is described statically by :class:`NetworkSpec` (graph plus
per-node/per-edge physical data) and is turned into the quantities the
dynamics actually consume (coupling weights, phase shifts, natural
frequencies, incidence matrices) by :func:`derive`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import StructuralError, ValidationError

# Droop gains are stated in Hz/pu while phases evolve in rad/s.
HZ_TO_RAD_PER_SEC = 2.0 * np.pi


def _readonly(arr, dtype=float):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ParameterRanges:
    """Sampling ranges and gain pattern used by :func:`generate_random`.

    Defaults reproduce the 10-oscillator benchmark configuration:
    voltages in [0.9, 1] pu, line conductances in [0.3, 0.9] S,
    susceptances in [1.2, 2.9] S, load conductances in [0.02, 0.05] S,
    and a droop-gain pattern where most nodes use the base gain and a
    few are stiffer.  ``gain_multipliers`` maps 1-based node numbers to
    multiples of ``gain_base``; entries beyond the node count are
    ignored.  ``target_spread`` is the half-width (rad) of the node
    angles at which the generated dispatch is balanced, which controls
    how far apart the equilibrium phases end up.
    """

    voltage: tuple[float, float] = (0.9, 1.0)  # pu
    conductance: tuple[float, float] = (0.3, 0.9)  # S
    susceptance: tuple[float, float] = (1.2, 2.9)  # S
    load_conductance: tuple[float, float] = (0.02, 0.05)  # S
    gain_base: float = 0.1  # Hz/pu
    gain_multipliers: tuple[tuple[int, float], ...] = ((5, 2.0), (8, 2.0), (10, 3.0))
    target_spread: float = 0.075  # rad

    def with_overrides(self, **kwargs) -> "ParameterRanges":
        return replace(self, **kwargs)


DEFAULT_RANGES = ParameterRanges()


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Static description of an oscillator network with lossy couplings.

    Edges are ordered pairs of 0-based node indices; the listed order
    fixes the orientation used by the incidence matrix (first node is
    the source).  All arrays are copied and frozen at construction, and
    every invariant (positivity, no duplicate edges, connectivity) is
    checked immediately, so instances are always valid and safe to share
    across workers.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    conductance: np.ndarray  # per-edge G, S (0 allowed: lossless edge)
    susceptance: np.ndarray  # per-edge B, S, strictly positive
    voltage: np.ndarray  # per-node V, pu, strictly positive
    power_setpoint: np.ndarray  # per-node desired injection, pu
    load: np.ndarray  # per-node constant power load, pu, nonnegative
    gain: np.ndarray  # per-node droop gain, Hz/pu, strictly positive

    def __post_init__(self):
        if not isinstance(self.node_count, (int, np.integer)) or self.node_count < 2:
            raise ValidationError("node_count must be an integer >= 2")
        object.__setattr__(self, "node_count", int(self.node_count))

        edges = tuple((int(i), int(j)) for i, j in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) == 0:
            raise ValidationError("at least one edge is required")

        n = self.node_count
        seen = set()
        for i, j in edges:
            if i == j:
                raise ValidationError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"edge ({i}, {j}) references a missing node")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValidationError(f"duplicate edge between nodes {i} and {j}")
            seen.add(key)

        e = len(edges)
        for name, size in (("conductance", e), ("susceptance", e), ("voltage", n),
                           ("power_setpoint", n), ("load", n), ("gain", n)):
            arr = _readonly(getattr(self, name))
            if arr.shape != (size,):
                raise ValidationError(f"{name} must have shape ({size},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)

        if np.any(self.conductance < 0):
            raise ValidationError("conductance must be nonnegative")
        if np.any(self.susceptance <= 0):
            raise ValidationError("susceptance must be strictly positive")
        if np.any(self.voltage <= 0):
            raise ValidationError("voltage must be strictly positive")
        if np.any(self.load < 0):
            raise ValidationError("load must be nonnegative")
        if np.any(self.gain <= 0):
            raise ValidationError("gain must be strictly positive")

        if not _connected(n, edges):
            raise StructuralError("coupling graph is not connected")

    @property
    def edge_count(self) -> int:
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class DerivedModel:
    """Quantities the dynamics consume, precomputed from a NetworkSpec.

    ``a`` and ``b`` are the lossy and lossless coupling weights
    V_i V_j G_ij and V_i V_j B_ij, ``psi`` the per-edge phase shift
    arctan(a/b), and ``natural_frequency`` the per-node effective power
    injection.  ``incidence`` is the signed node-edge incidence matrix
    (+1 source, -1 sink) and ``abs_incidence`` its element-wise absolute
    value.  ``angular_gain`` is the droop gain converted from Hz/pu to
    the rad/s-per-pu coefficient that actually multiplies the vector
    field.
    """

    node_count: int
    edge_count: int
    src: np.ndarray  # per-edge source node index
    dst: np.ndarray  # per-edge sink node index
    a: np.ndarray
    b: np.ndarray
    magnitude: np.ndarray  # per-edge sqrt(a^2 + b^2)
    psi: np.ndarray  # rad
    psi_max: float
    natural_frequency: np.ndarray  # pu
    gain: np.ndarray  # Hz/pu, as specified
    angular_gain: np.ndarray  # rad/s per pu
    incidence: np.ndarray  # node_count x edge_count
    abs_incidence: np.ndarray

    def __post_init__(self):
        for name in ("src", "dst"):
            object.__setattr__(self, name, _readonly(getattr(self, name), dtype=np.intp))
        for name in ("a", "b", "magnitude", "psi", "natural_frequency",
                     "gain", "angular_gain", "incidence", "abs_incidence"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))


def derive(spec: NetworkSpec) -> DerivedModel:
    """Compute coupling weights, phase shifts, and drive terms.

    Deterministic and pure: the same spec always yields an identical
    model.  Invalid specs cannot reach this point because NetworkSpec
    validates at construction.
    """
    n, e = spec.node_count, spec.edge_count
    src = np.array([i for i, _ in spec.edges], dtype=np.intp)
    dst = np.array([j for _, j in spec.edges], dtype=np.intp)

    v = spec.voltage
    a = v[src] * v[dst] * spec.conductance
    b = v[src] * v[dst] * spec.susceptance
    psi = np.arctan2(a, b)  # a >= 0, b > 0 keeps this in [0, pi/2)

    incidence = np.zeros((n, e))
    incidence[src, np.arange(e)] = 1.0
    incidence[dst, np.arange(e)] = -1.0
    abs_incidence = np.abs(incidence)

    # Per-node sum of incident line conductances times local V^2.
    self_drain = spec.voltage ** 2 * (abs_incidence @ spec.conductance)
    natural_frequency = spec.power_setpoint - spec.load - self_drain

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
        natural_frequency=natural_frequency,
        gain=spec.gain,
        angular_gain=HZ_TO_RAD_PER_SEC * spec.gain,
        incidence=incidence,
        abs_incidence=abs_incidence,
    )


def psi_max(model: DerivedModel) -> float:
    """Largest per-edge phase shift, the quantity the stability margin uses."""
    return model.psi_max


def generate_random(n: int, e: int, ranges: ParameterRanges = DEFAULT_RANGES,
                    seed: int | None = None) -> NetworkSpec:
    """Generate a seeded random connected network.

    Topology is a random spanning tree over a seeded node permutation
    (each new node attaches to a uniformly chosen earlier one) plus
    ``e - (n - 1)`` additional distinct chords.  Parameters are drawn
    from ``ranges`` in a fixed documented order, so an identical seed
    reproduces the network bit for bit.

    The power setpoints are dispatched so that the network is balanced
    at a seeded target phase vector with node angles uniform in
    ``[-target_spread, target_spread]``; generated instances therefore
    admit an equilibrium whose edge differences stay well inside the
    synchronization set.

    Parameters
    ----------
    n : number of oscillators (>= 2)
    e : number of coupling lines, with n - 1 <= e <= n (n - 1) / 2
    ranges : sampling ranges and gain pattern
    seed : RNG seed; identical seeds give identical specs

    Raises
    ------
    ValidationError
        If ``e`` is out of range for a simple connected graph.
    """
    if n < 2:
        raise ValidationError("need at least two nodes")
    if e < n - 1:
        raise ValidationError(f"{e} edges cannot connect {n} nodes")
    if e > n * (n - 1) // 2:
        raise ValidationError(f"{e} edges exceed the simple-graph maximum for {n} nodes")

    rng = np.random.default_rng(seed)

    # Draw order is part of the determinism contract:
    # permutation, tree attachments, chords, G, B, V, load conductances,
    # dispatch target angles.
    perm = rng.permutation(n)
    edges: list[tuple[int, int]] = []
    for k in range(1, n):
        attach = int(perm[rng.integers(0, k)])
        edges.append((attach, int(perm[k])))

    have = {(min(i, j), max(i, j)) for i, j in edges}
    candidates = [(i, j) for i in range(n) for j in range(i + 1, n)
                  if (i, j) not in have]
    extra = e - (n - 1)
    if extra:
        picks = rng.choice(len(candidates), size=extra, replace=False)
        edges.extend(candidates[int(p)] for p in picks)

    g = rng.uniform(*ranges.conductance, size=e)
    b_sus = rng.uniform(*ranges.susceptance, size=e)
    v = rng.uniform(*ranges.voltage, size=n)
    load_g = rng.uniform(*ranges.load_conductance, size=n)
    load = load_g * v ** 2

    gain = np.full(n, ranges.gain_base)
    for node_1based, mult in ranges.gain_multipliers:
        if 1 <= node_1based <= n:
            gain[node_1based - 1] = ranges.gain_base * mult

    target = rng.uniform(-ranges.target_spread, ranges.target_spread, size=n)

    # Balance the dispatch at the target angles so the drawn network has
    # an equilibrium there: setpoint = load + local conductance drain +
    # net coupling flow evaluated at the target.
    src = np.array([i for i, _ in edges], dtype=np.intp)
    dst = np.array([j for _, j in edges], dtype=np.intp)
    a_w = v[src] * v[dst] * g
    b_w = v[src] * v[dst] * b_sus
    d = target[src] - target[dst]
    flow = np.zeros(n)
    np.add.at(flow, src, b_w * np.sin(d) - a_w * np.cos(d))
    np.add.at(flow, dst, -b_w * np.sin(d) - a_w * np.cos(d))
    drain = np.zeros(n)
    np.add.at(drain, src, g)
    np.add.at(drain, dst, g)
    setpoint = load + v ** 2 * drain + flow

    return NetworkSpec(
        node_count=n,
        edges=tuple(edges),
        conductance=g,
        susceptance=b_sus,
        voltage=v,
        power_setpoint=setpoint,
        load=load,
        gain=gain,
    )


def _connected(n: int, edges) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = True
                count += 1
                stack.append(w)
    return count == n


def save_network(spec: NetworkSpec, path) -> None:
    """Write a network to the canonical JSON document (0-based indices)."""
    doc = {
        "nodes": spec.node_count,
        "edges": [
            {"i": i, "j": j, "g": float(g), "b": float(b)}
            for (i, j), g, b in zip(spec.edges, spec.conductance, spec.susceptance)
        ],
        "v": [float(x) for x in spec.voltage],
        "p_set": [float(x) for x in spec.power_setpoint],
        "p_load": [float(x) for x in spec.load],
        "k_p": [float(x) for x in spec.gain],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_network(path) -> NetworkSpec:
    """Read a network from the canonical JSON document.

    Raises ValidationError for malformed documents and the usual
    NetworkSpec errors for semantically invalid ones.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not a valid network document: {exc}") from exc
    try:
        edges = tuple((ed["i"], ed["j"]) for ed in doc["edges"])
        return NetworkSpec(
            node_count=doc["nodes"],
            edges=edges,
            conductance=np.array([ed["g"] for ed in doc["edges"]], dtype=float),
            susceptance=np.array([ed["b"] for ed in doc["edges"]], dtype=float),
            voltage=np.array(doc["v"], dtype=float),
            power_setpoint=np.array(doc["p_set"], dtype=float),
            load=np.array(doc["p_load"], dtype=float),
            gain=np.array(doc["k_p"], dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"network document is missing required fields: {exc}") from exc
