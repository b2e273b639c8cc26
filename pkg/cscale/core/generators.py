# Copyright 2025 The cscale Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Benchmark systems: coupled logistic maps and a pair of coupled Lorenz flows

Coupling convention everywhere: coupling[i][j] (mu_ij) is the influence of
node j on node i's equation, so a non-zero entry means j drives i.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Set, Tuple

import numpy as np

from core.embedding import ScalarSeries
from core.errors import DivergenceError

logger = logging.getLogger(__name__)

State = Tuple[float, ...]

# Relative tolerance when checking that omega and nu are multiples of dt
STEP_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class LogisticNetworkSpec:
    """x_{i,t+1} = x_{i,t} (r_i - r_i x_{i,t} - sum_j mu_ij x_{j,t})."""

    growth_rates: np.ndarray
    coupling: np.ndarray
    initial_state: np.ndarray
    length: int = 5000
    transient: int = 1000

    def __post_init__(self):
        rates = np.array(self.growth_rates, dtype=np.float64).reshape(-1)
        n = rates.size
        coupling = np.array(self.coupling, dtype=np.float64)
        initial = np.array(self.initial_state, dtype=np.float64).reshape(-1)
        if coupling.shape != (n, n):
            raise ValueError(f"coupling must be {n}x{n}, got {coupling.shape}")
        if initial.size != n:
            raise ValueError(f"initial_state must have {n} entries, got {initial.size}")
        if np.any((initial <= 0.0) | (initial >= 1.0)):
            raise ValueError("initial states must lie in (0, 1)")
        if self.length < 2:
            raise ValueError(f"length must be >= 2, got {self.length}")
        if self.transient < 0:
            raise ValueError(f"transient must be >= 0, got {self.transient}")
        object.__setattr__(self, "growth_rates", rates)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "initial_state", initial)

    @property
    def n_nodes(self) -> int:
        return self.growth_rates.size

    def permuted(self, order: Sequence[int]) -> "LogisticNetworkSpec":
        """Same system with node k of the result being node order[k] of this one."""
        order = np.asarray(order)
        return LogisticNetworkSpec(
            growth_rates=self.growth_rates[order],
            coupling=self.coupling[np.ix_(order, order)],
            initial_state=self.initial_state[order],
            length=self.length,
            transient=self.transient,
        )


def logistic_pair_spec(mu21: float, mu12: float = 0.0, length: int = 5000, transient: int = 1000,
                       initial_state: Sequence[float] = (0.4, 0.2)) -> LogisticNetworkSpec:
    """Two species with growth rates 3.8 and 3.7; mu21 is the x1 -> x2 coupling."""
    return LogisticNetworkSpec(
        growth_rates=np.array([3.8, 3.7]),
        coupling=np.array([[0.0, mu12], [mu21, 0.0]]),
        initial_state=np.array(initial_state),
        length=length,
        transient=transient,
    )


def _default_initial(n: int) -> np.ndarray:
    return np.linspace(0.2, 0.6, n)


def ring_network_spec(n_nodes: int = 5, coupling: float = 0.2, growth_rate: float = 3.8,
                      length: int = 5000, transient: int = 1000) -> LogisticNetworkSpec:
    """Ring x_i -> x_{i+1 mod n}."""
    matrix = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes):
        matrix[(i + 1) % n_nodes, i] = coupling
    return LogisticNetworkSpec(
        growth_rates=np.full(n_nodes, growth_rate),
        coupling=matrix,
        initial_state=_default_initial(n_nodes),
        length=length,
        transient=transient,
    )


def tree_network_spec(coupling: float = 0.2, growth_rate: float = 3.8,
                      length: int = 5000, transient: int = 1000) -> LogisticNetworkSpec:
    """Five-node tree x_j -> x_{j+1}, x_{j+3} for j = 1, 2."""
    matrix = np.zeros((5, 5))
    for src in (0, 1):
        matrix[src + 1, src] = coupling
        matrix[src + 3, src] = coupling
    return LogisticNetworkSpec(
        growth_rates=np.full(5, growth_rate),
        coupling=matrix,
        initial_state=_default_initial(5),
        length=length,
        transient=transient,
    )


def node_labels(n_nodes: int, prefix: str = "x") -> List[str]:
    return [f"{prefix}{i + 1}" for i in range(n_nodes)]


def truth_edges(spec: LogisticNetworkSpec, labels: Optional[Sequence[str]] = None) -> Set[Tuple[str, str]]:
    """True ordered links (driver, driven) of a network spec."""
    labels = list(labels) if labels is not None else node_labels(spec.n_nodes)
    edges = set()
    for i in range(spec.n_nodes):
        for j in range(spec.n_nodes):
            if i != j and spec.coupling[i, j] != 0.0:
                edges.add((labels[j], labels[i]))
    return edges


def generate_logistic_network(spec: LogisticNetworkSpec, seed_for_initials: Optional[int] = None,
                              labels: Optional[Sequence[str]] = None) -> List[ScalarSeries]:
    """
    Iterate the coupled logistic network.

    Args:
        spec: Network definition
        seed_for_initials: If given, initial states are drawn uniformly from
            (0.1, 0.9) with this seed instead of spec.initial_state
        labels: Series labels (default x1..xN)

    Returns:
        One ScalarSeries per node; element 0 is the state after the transient
    """
    n = spec.n_nodes
    labels = list(labels) if labels is not None else node_labels(n)
    if len(labels) != n:
        raise ValueError(f"expected {n} labels, got {len(labels)}")

    if seed_for_initials is None:
        state = spec.initial_state.copy()
    else:
        state = np.random.default_rng(seed_for_initials).uniform(0.1, 0.9, n)

    rates = spec.growth_rates
    coupling = spec.coupling
    total = spec.transient + spec.length
    out = np.empty((spec.length, n))

    for step in range(total):
        if step >= spec.transient:
            out[step - spec.transient] = state
        if step == total - 1:
            break
        drive = (coupling * state[None, :]).sum(axis=1)
        state = state * (rates - rates * state - drive)
        outside = np.flatnonzero(~((state >= 0.0) & (state <= 1.0)))
        if outside.size:
            node = int(outside[0])
            raise DivergenceError(
                f"logistic network left [0, 1] at step {step + 1}, node {labels[node]} "
                f"(value {state[node]!r})",
                step=step + 1, node=node,
            )

    logger.info(f"[GENERATE] logistic network: {n} nodes, {spec.length} samples after {spec.transient} transient")
    return [ScalarSeries(values=out[:, i], label=labels[i]) for i in range(n)]


@dataclass(frozen=True)
class LorenzPairSpec:
    """
    Two Lorenz systems coupled through their x equations:
    dx_i/dt = sigma_i (y_i - x_i) + mu_ij x_j.
    """

    sigma: Tuple[float, float] = (10.0, 10.0)
    rho: Tuple[float, float] = (28.0, 28.0)
    beta: Tuple[float, float] = (8.0 / 3.0, 8.0 / 3.0)
    mu12: float = 0.0
    mu21: float = 0.0
    dt: float = 1e-3
    omega: float = 0.05
    time_shift: float = 0.0
    initial_state: Tuple[float, ...] = (1.0, 1.0, 1.0, -1.0, 2.0, 3.0)
    n_samples: int = 10000
    transient_time: float = 100.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.omega < self.dt:
            raise ValueError(f"omega ({self.omega}) must be >= dt ({self.dt})")
        _steps_of(self.omega, self.dt, "omega")
        _steps_of(self.time_shift, self.dt, "time_shift")
        if self.transient_time < 0:
            raise ValueError(f"transient_time must be >= 0, got {self.transient_time}")
        if len(self.initial_state) != 6:
            raise ValueError(f"initial_state needs 6 values, got {len(self.initial_state)}")
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")

    @property
    def stride(self) -> int:
        return _steps_of(self.omega, self.dt, "omega")


def _steps_of(duration: float, dt: float, name: str) -> int:
    """Integer number of dt steps in `duration`, rejecting non-multiples."""
    ratio = duration / dt
    steps = round(ratio)
    if abs(ratio - steps) > STEP_TOLERANCE * max(1.0, abs(ratio)):
        raise ValueError(f"{name}={duration} is not an integer multiple of dt={dt}")
    return int(steps)


def lorenz_field(sigma: float, rho: float, beta: float) -> Callable[[State], State]:
    """Vector field of one uncoupled Lorenz system."""
    def field_fn(s: State) -> State:
        x, y, z = s
        return (sigma * (y - x), x * (rho - z) - y, x * y - beta * z)
    return field_fn


def coupled_lorenz_field(spec: LorenzPairSpec) -> Callable[[State], State]:
    """Six-dimensional vector field of the coupled pair."""
    s1, s2 = spec.sigma
    r1, r2 = spec.rho
    b1, b2 = spec.beta
    mu12, mu21 = spec.mu12, spec.mu21

    def field_fn(s: State) -> State:
        x1, y1, z1, x2, y2, z2 = s
        return (
            s1 * (y1 - x1) + mu12 * x2,
            x1 * (r1 - z1) - y1,
            x1 * y1 - b1 * z1,
            s2 * (y2 - x2) + mu21 * x1,
            x2 * (r2 - z2) - y2,
            x2 * y2 - b2 * z2,
        )
    return field_fn


def rk4_step(field_fn: Callable[[State], State], state: State, dt: float) -> State:
    """One classical fourth-order Runge-Kutta step."""
    half = 0.5 * dt
    k1 = field_fn(state)
    k2 = field_fn(tuple(s + half * k for s, k in zip(state, k1)))
    k3 = field_fn(tuple(s + half * k for s, k in zip(state, k2)))
    k4 = field_fn(tuple(s + dt * k for s, k in zip(state, k3)))
    sixth = dt / 6.0
    return tuple(
        s + sixth * (a + 2.0 * b + 2.0 * c + d)
        for s, a, b, c, d in zip(state, k1, k2, k3, k4)
    )


def integrate(field_fn: Callable[[State], State], state: Sequence[float], dt: float, n_steps: int) -> State:
    """Advance `state` by n_steps fixed RK4 steps."""
    current = tuple(float(v) for v in state)
    for _ in range(n_steps):
        current = rk4_step(field_fn, current, dt)
    return current


def generate_coupled_lorenz(spec: LorenzPairSpec) -> Tuple[ScalarSeries, ScalarSeries]:
    """
    Integrate the coupled pair and sample y1, y2 every omega.

    The first sample is taken time_shift after the transient.

    Returns:
        (y1, y2) as ScalarSeries with sample_interval omega
    """
    start = time.time()
    field_fn = coupled_lorenz_field(spec)
    stride = spec.stride
    lead_steps = round(spec.transient_time / spec.dt) + _steps_of(spec.time_shift, spec.dt, "time_shift")

    state = integrate(field_fn, spec.initial_state, spec.dt, lead_steps)
    y1 = np.empty(spec.n_samples)
    y2 = np.empty(spec.n_samples)
    for n in range(spec.n_samples):
        if n:
            for _ in range(stride):
                state = rk4_step(field_fn, state, spec.dt)
        if not all(math.isfinite(v) for v in state):
            stamp = (lead_steps + n * stride) * spec.dt
            raise DivergenceError(f"coupled Lorenz state became non-finite at t={stamp:.6g}", step=stamp)
        y1[n] = state[1]
        y2[n] = state[4]

    logger.info(
        f"[GENERATE] coupled Lorenz: mu12={spec.mu12}, mu21={spec.mu21}, omega={spec.omega}, "
        f"{spec.n_samples} samples in {time.time() - start:.1f}s"
    )
    return (
        ScalarSeries(values=y1, label="y1", sample_interval=spec.omega),
        ScalarSeries(values=y2, label="y2", sample_interval=spec.omega),
    )


def add_observation_noise(series: ScalarSeries, level: float, seed: Optional[int] = None) -> ScalarSeries:
    """
    Add zero-mean Gaussian noise with std = level * std(series).

    Args:
        series: Clean series
        level: Noise-to-signal std ratio (>= 0)
        seed: Seed for the noise stream

    Returns:
        New ScalarSeries with the same label and sample interval
    """
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level}")
    if level == 0:
        return series
    rng = np.random.default_rng(seed)
    noisy = series.values + level * np.std(series.values) * rng.standard_normal(len(series))
    return ScalarSeries(values=noisy, label=series.label, sample_interval=series.sample_interval)
