"""Vector field of the lossy coupled-oscillator model and trajectory integration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationDivergedError, ValidationError
from .network import DerivedModel, NetworkSpec

TWO_PI = 2.0 * np.pi


def wrap_to_pi(x):
    """Wrap angles into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)
    # Guard the half-open convention against rounding at the seam.
    return np.where(wrapped <= -np.pi, np.pi, wrapped)


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Oscillator phases (rad, stored unwrapped) at a point in time."""

    delta: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arr = np.array(self.delta, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "delta", arr)
        object.__setattr__(self, "time", float(self.time))


def _phases(delta) -> np.ndarray:
    if isinstance(delta, PhaseState):
        return delta.delta
    return np.asarray(delta, dtype=float)


def _edge_differences(model: DerivedModel, delta: np.ndarray) -> np.ndarray:
    return wrap_to_pi(delta[..., model.src] - delta[..., model.dst])


def rhs(model: DerivedModel, delta) -> np.ndarray:
    """Phase velocities (rad/s) of the lossy model.

    Component i is k_i * (w_i - sum_j (b_ij sin d_ij - a_ij cos d_ij))
    with k the angular droop gain, w the natural frequency, and d_ij the
    pairwise phase difference wrapped into (-pi, pi].  Accepts a single
    phase vector or a batch with shape (..., N).
    """
    delta = _phases(delta)
    if delta.shape[-1] != model.node_count:
        raise ValidationError(
            f"state has {delta.shape[-1]} phases, model has {model.node_count} nodes")
    d = _edge_differences(model, delta)
    coupling = (model.b * np.sin(d)) @ model.incidence.T \
        - (model.a * np.cos(d)) @ model.abs_incidence.T
    return model.angular_gain * (model.natural_frequency - coupling)


def rhs_sine_form(model: DerivedModel, delta) -> np.ndarray:
    """Equivalent phase-shifted form of :func:`rhs`.

    Uses the identity b sin d - a cos d = sqrt(a^2+b^2) sin(d - psi)
    with psi = arctan(a/b), summing the shifted sine over each node's
    incident edges.  Must agree with :func:`rhs` to machine precision.
    """
    delta = _phases(delta)
    if delta.shape[-1] != model.node_count:
        raise ValidationError(
            f"state has {delta.shape[-1]} phases, model has {model.node_count} nodes")
    d = _edge_differences(model, delta)
    source_side = np.maximum(model.incidence, 0.0)
    sink_side = np.maximum(-model.incidence, 0.0)
    coupling = (model.magnitude * np.sin(d - model.psi)) @ source_side.T \
        + (model.magnitude * np.sin(-d - model.psi)) @ sink_side.T
    return model.angular_gain * (model.natural_frequency - coupling)


def active_power(model: DerivedModel, spec: NetworkSpec, delta, node: int) -> float:
    """Active power injection (pu) at one node.

    P_i = P_load_i + sum_j [G_ij V_i^2 - G_ij V_i V_j cos d_ij
    + B_ij V_i V_j sin d_ij].  Satisfies the droop identity
    rhs_i = angular_gain_i * (setpoint_i - P_i).
    """
    if not 0 <= node < model.node_count:
        raise ValidationError(f"node {node} out of range")
    delta = _phases(delta)
    d = _edge_differences(model, delta)
    total = float(spec.load[node])
    for e in range(model.edge_count):
        if model.src[e] == node:
            d_ij = d[e]
        elif model.dst[e] == node:
            d_ij = -d[e]
        else:
            continue
        v_i = spec.voltage[node]
        other = model.dst[e] if model.src[e] == node else model.src[e]
        v_j = spec.voltage[other]
        g, b = spec.conductance[e], spec.susceptance[e]
        total += g * v_i ** 2 - g * v_i * v_j * np.cos(d_ij) + b * v_i * v_j * np.sin(d_ij)
    return total


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped phase evolution with the vector field at each sample."""

    times: np.ndarray  # (S,)
    states: np.ndarray  # (S, N)
    derivs: np.ndarray  # (S, N), rhs evaluated at each recorded state
    dt: float
    method: str = "rk4"
    decimation: int = 1

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def write_csv(self, path) -> None:
        """Write ``t,delta_1..delta_N,ddelta_1..ddelta_N`` rows at full precision."""
        n = self.states.shape[1]
        header = "t," + ",".join(f"delta_{i}" for i in range(1, n + 1)) \
            + "," + ",".join(f"ddelta_{i}" for i in range(1, n + 1))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for k in range(self.n_samples):
                row = [format(self.times[k], ".17g")]
                row += [format(x, ".17g") for x in self.states[k]]
                row += [format(x, ".17g") for x in self.derivs[k]]
                fh.write(",".join(row) + "\n")


def _rk4_step(model: DerivedModel, y: np.ndarray, dt: float):
    # Overflow is tolerated here; callers detect non-finite states.
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rhs(model, y)
        k2 = rhs(model, y + 0.5 * dt * k1)
        k3 = rhs(model, y + 0.5 * dt * k2)
        k4 = rhs(model, y + dt * k3)
        return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1


def integrate(model: DerivedModel, delta0, t_max: float = 20.0, dt: float = 1e-3,
              decimation: int = 1, t0: float = 0.0) -> Trajectory:
    """Integrate the model with classical fixed-step 4th-order Runge-Kutta.

    Samples are recorded every ``decimation`` steps (plus the final
    state); each recorded derivative is the vector field evaluated at
    that exact state.  The final time lands within one step of
    ``t_max``.

    Raises
    ------
    IntegrationDivergedError
        If a step produces a non-finite state; the error carries the
        last finite sample.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if t_max < dt:
        raise ValidationError("t_max must be at least one step")
    if decimation < 1:
        raise ValidationError("decimation must be >= 1")

    y = np.array(_phases(delta0), dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValidationError("initial state must be finite")
    n_steps = max(1, int(round(t_max / dt)))

    times, states, derivs = [], [], []
    for k in range(n_steps):
        y_next, k1 = _rk4_step(model, y, dt)
        if k % decimation == 0:
            times.append(t0 + k * dt)
            states.append(y.copy())
            derivs.append(k1)  # k1 is exactly rhs at the recorded state
        if not np.all(np.isfinite(y_next)):
            raise IntegrationDivergedError(
                f"non-finite state after t = {t0 + k * dt:.6g} s",
                last_good_time=t0 + k * dt,
                last_good_state=y,
            )
        y = y_next
    times.append(t0 + n_steps * dt)
    states.append(y.copy())
    derivs.append(rhs(model, y))

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        derivs=np.array(derivs),
        dt=dt,
        method="rk4",
        decimation=decimation,
    )


def advance(model: DerivedModel, delta, n_steps: int, dt: float) -> np.ndarray:
    """Step a state (or batch of states, shape (..., N)) without recording."""
    y = np.array(_phases(delta), dtype=float)
    for _ in range(n_steps):
        y, _ = _rk4_step(model, y, dt)
    return y


def detect_synchronization(traj: Trajectory, tol: float = 1e-6) -> float | None:
    """Common frequency deviation over the trailing 10% of samples, if any.

    Returns the shared value when every sampled node frequency stays
    within ``tol`` of the per-sample mean and that mean is constant
    within ``tol`` across the window; otherwise None.
    """
    if traj.n_samples == 0:
        raise ValidationError("empty trajectory")
    window = max(1, int(np.ceil(0.1 * traj.n_samples)))
    tail = traj.derivs[-window:]
    means = tail.mean(axis=1)
    spread = np.abs(tail - means[:, None]).max()
    if spread < tol and means.max() - means.min() < tol:
        return float(means.mean())
    return None


def draw_initial_phases(model: DerivedModel, seed, fraction: float = 0.9) -> np.ndarray:
    """Seeded initial phases inside the synchronization set.

    Node angles are uniform in [-r, r] with 2r = fraction * (pi/2 -
    psi_max), so every pairwise difference is bounded by ``fraction``
    times the stability margin.
    """
    if not 0 < fraction < 1:
        raise ValidationError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    half = 0.5 * fraction * (0.5 * np.pi - model.psi_max)
    return rng.uniform(-half, half, size=model.node_count)
