"""Equi-energy sampler ladder.

Chain ``K`` (hottest) runs plain Metropolis-Hastings.  Chain ``i < K`` takes
an MH step with probability ``1 - p_ee``; otherwise it draws a stored state
of chain ``i + 1`` uniformly from the ring of its current energy and
accepts it with the tempered ratio.  If that ring holds nothing yet it
takes an ordinary MH step instead.

Scheduling: chain ``c`` starts after chain ``c + 1`` has ``burn_in_N``
steps, hotter chains move first at every tick, and chain ``c`` performs
``N + c * burn_in_N`` steps so the lead is kept until the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend, _kernels_py
from .mcs import _as_stream, _initial_point
from .proposals import GaussianRandomWalk
from .samples import SampleSet
from .streams import StepStream, chain_seeds
from .target import LadderConfig, TargetModel, ring_index, ring_indices

#: uniforms per step: coin, buffer pick, proposal, accept
EE_WIDTH = 4


@dataclass(frozen=True)
class EEConfig:
    p_ee: float = 0.1
    burn_in_N: int = 0
    flatten: bool = False
    max_buffer_bytes: int = 4 << 30

    def __post_init__(self):
        if not 0.0 <= self.p_ee <= 1.0:
            raise ValueError("p_ee must lie in [0, 1]")
        if self.burn_in_N < 0:
            raise ValueError("burn_in_N must be nonnegative")


def energy_floors(ladder: LadderConfig, n_chains: int, flatten: bool) -> np.ndarray:
    """Per-chain energy floor: ``H_c`` when flattening, else ``-inf``."""
    if not flatten:
        return np.full(n_chains, -np.inf)
    if ladder.n_rings < n_chains:
        raise ValueError("flattening needs at least as many energy levels as chains")
    return np.asarray(ladder.energy_levels[:n_chains], dtype=float)


class RingBufferSet:
    """Append-only history of every chain, indexed by energy ring.

    ``points(c, j)`` returns the states of chain ``c`` that fell in ring ``j``
    in the order they were produced; entries are never modified.
    """

    def __init__(self, n_chains: int, n_rings: int, dim: int, capacity: int = 256):
        self.n_chains, self.n_rings, self.dim = n_chains, n_rings, dim
        cap = max(1, int(capacity))
        self.hist_x = np.zeros((n_chains, cap, dim))
        self.hist_h = np.zeros((n_chains, cap))
        self.hist_ring = np.zeros((n_chains, cap), dtype=np.int64)
        self.hist_kind = np.zeros((n_chains, cap), dtype=np.int8)
        self.buf_idx = np.zeros((n_chains, n_rings, cap), dtype=np.int64)
        self.buf_len = np.zeros((n_chains, n_rings), dtype=np.int64)
        self.count = np.zeros(n_chains, dtype=np.int64)

    @property
    def capacity(self) -> int:
        return self.hist_x.shape[1]

    def _grow(self, need):
        cap = self.capacity
        while cap < need:
            cap *= 2
        pad = cap - self.capacity
        self.hist_x = np.pad(self.hist_x, ((0, 0), (0, pad), (0, 0)))
        self.hist_h = np.pad(self.hist_h, ((0, 0), (0, pad)))
        self.hist_ring = np.pad(self.hist_ring, ((0, 0), (0, pad)))
        self.hist_kind = np.pad(self.hist_kind, ((0, 0), (0, pad)))
        self.buf_idx = np.pad(self.buf_idx, ((0, 0), (0, 0), (0, pad)))

    def append(self, c: int, x, h: float, ring: int, kind: int = 0) -> None:
        k = int(self.count[c])
        if k >= self.capacity:
            self._grow(k + 1)
        self.hist_x[c, k] = x
        self.hist_h[c, k] = h
        self.hist_ring[c, k] = ring
        self.hist_kind[c, k] = kind
        self.buf_idx[c, ring, self.buf_len[c, ring]] = k
        self.buf_len[c, ring] += 1
        self.count[c] = k + 1

    def size(self, c: int, j: int) -> int:
        return int(self.buf_len[c, j])

    def indices(self, c: int, j: int) -> np.ndarray:
        return self.buf_idx[c, j, :self.buf_len[c, j]]

    def points(self, c: int, j: int) -> np.ndarray:
        return self.hist_x[c, self.indices(c, j)]

    def energies(self, c: int, j: int) -> np.ndarray:
        return self.hist_h[c, self.indices(c, j)]

    def truncated(self, c: int, length: int) -> "RingBufferSet":
        """Copy keeping only the first ``length`` states of chain ``c`` (a prefix snapshot)."""
        out = RingBufferSet(self.n_chains, self.n_rings, self.dim, max(1, length))
        for k in range(min(length, int(self.count[c]))):
            out.append(c, self.hist_x[c, k], self.hist_h[c, k], int(self.hist_ring[c, k]),
                       int(self.hist_kind[c, k]))
        return out

    def _py_view(self, c):
        bufs = [self.indices(c, j).tolist() for j in range(self.n_rings)]
        n = int(self.count[c])
        return bufs, [tuple(r) for r in self.hist_x[c, :n].tolist()], self.hist_h[c, :n].tolist()


@dataclass
class EELadderState:
    """Current point, energy and step count of every chain plus the shared buffers."""

    x: np.ndarray
    h: np.ndarray
    steps: np.ndarray
    buffers: RingBufferSet

    @classmethod
    def start(cls, model: TargetModel, ladder: LadderConfig, x0=None) -> "EELadderState":
        n = ladder.n_temps
        if x0 is None:
            x0 = np.tile(_initial_point(model), (n, 1))
        x0 = np.array(x0, dtype=float).reshape(n, model.dimension)
        h = np.array([model.energy(tuple(r)) for r in x0.tolist()])
        return cls(x0, h, np.zeros(n, dtype=np.int64),
                   RingBufferSet(n, ladder.n_rings, model.dimension))


def ee_accept(i: int, x, y, model: TargetModel, ladder: LadderConfig,
              flatten: bool = False) -> float:
    """Acceptance probability of jumping from ``x`` (chain ``i``) to the stored ``y`` (chain ``i+1``)."""
    hx, hy = model.energy(tuple(x)), model.energy(tuple(y))
    if ring_index(ladder, hx) != ring_index(ladder, hy):
        raise ValueError("equi-energy candidate is not in the current ring (buffer corruption)")
    fl = energy_floors(ladder, ladder.n_temps, flatten)
    T = ladder.temperatures
    lr = (max(hx, fl[i]) - max(hy, fl[i])) / T[i] + (max(hy, fl[i + 1]) - max(hx, fl[i + 1])) / T[i + 1]
    return 1.0 if lr >= 0.0 else math.exp(lr)


def mh_step(i: int, x, model: TargetModel, ladder: LadderConfig, proposals, rng,
            flatten: bool = False) -> np.ndarray:
    """One Metropolis-Hastings transition targeting ``exp(-h/T_i)``.

    ``rng`` is a width-4 :class:`StepStream`; the step consumes one row, the
    same layout an equi-energy step uses, so pure-MH traces line up with
    ladder traces seed for seed.
    """
    stream = _as_stream(rng, EE_WIDTH, model.dimension)
    U, Z = stream.draw(1)
    xs = tuple(float(v) for v in np.asarray(x).reshape(-1))
    hx = model.energy(xs)
    jx = ring_index(ladder, hx)
    fl = energy_floors(ladder, ladder.n_temps, flatten).tolist()
    y, _, _, _ = _kernels_py._ee_one(
        i, i, xs, hx, jx, U[0].tolist(), Z[0].tolist(), model.energy, proposals,
        list(ladder.energy_levels), list(ladder.temperatures), fl, 0.0,
        ladder.ring_policy == "strict", [0], None, None, None)
    return np.array(y)


def mh_chain(i: int, x0, n: int, model, ladder, proposals, rng, flatten=False) -> np.ndarray:
    """``n`` successive :func:`mh_step` states from ``x0`` (shape ``(n, d)``)."""
    stream = _as_stream(rng, EE_WIDTH, model.dimension)
    out = np.empty((n, model.dimension))
    x = np.asarray(x0, dtype=float)
    for k in range(n):
        x = mh_step(i, x, model, ladder, proposals, stream, flatten)
        out[k] = x
    return out


def ee_step(i: int, state: EELadderState, config: EEConfig, model: TargetModel,
            ladder: LadderConfig, proposals, rng) -> EELadderState:
    """Advance chain ``i`` by one step in place and append the new state to its buffer."""
    K = ladder.n_temps - 1
    if i < K and state.steps[i + 1] < state.steps[i] + 1 + config.burn_in_N:
        raise ValueError(f"chain {i + 1} must lead chain {i} by {config.burn_in_N} steps")
    stream = _as_stream(rng, EE_WIDTH, model.dimension)
    U, Z = stream.draw(1)
    xs = tuple(float(v) for v in state.x[i])
    hx = float(state.h[i])
    jx = ring_index(ladder, hx)
    fl = energy_floors(ladder, ladder.n_temps, config.flatten).tolist()
    nxt = (None, None, None) if i == K else state.buffers._py_view(i + 1)
    y, hy, jy, kind = _kernels_py._ee_one(
        i, K, xs, hx, jx, U[0].tolist(), Z[0].tolist(), model.energy, proposals,
        list(ladder.energy_levels), list(ladder.temperatures), fl, config.p_ee,
        ladder.ring_policy == "strict", [0], *nxt)
    state.x[i] = y
    state.h[i] = hy
    state.steps[i] += 1
    state.buffers.append(i, y, hy, jy, kind)
    return state


def empirical_jump_operator(i: int, x, f, buffers: RingBufferSet, model: TargetModel,
                            ladder: LadderConfig, flatten: bool = False) -> float:
    """Ratio of empirical sums giving the expected value of ``f`` after one jump attempt.

    Averages ``alpha(x, y) f(y) + (1 - alpha(x, y)) f(x)`` over the stored
    states ``y`` of chain ``i + 1`` in the ring of ``x``.
    """
    xs = tuple(float(v) for v in np.asarray(x).reshape(-1))
    j = ring_index(ladder, model.energy(xs))
    pts = buffers.points(i + 1, j)
    if len(pts) == 0:
        raise ValueError("empty ring buffer: apply the MH fallback instead")
    alpha = np.array([ee_accept(i, xs, y, model, ladder, flatten) for y in pts])
    fy = np.array([f(tuple(y)) for y in pts], dtype=float)
    return float(((alpha * fy).sum() + f(xs) * (1.0 - alpha).sum()) / len(pts))


@dataclass
class EERun:
    """Histories of every chain after :func:`run_ladder`."""

    buffers: RingBufferSet
    n_steps: np.ndarray
    offsets: np.ndarray
    config: EEConfig
    clamps: int
    backend: str

    @property
    def n_chains(self) -> int:
        return len(self.n_steps)

    def chain(self, c: int) -> np.ndarray:
        return self.buffers.hist_x[c, :self.n_steps[c]]

    def kinds(self, c: int) -> np.ndarray:
        return self.buffers.hist_kind[c, :self.n_steps[c]]

    def rings(self, c: int) -> np.ndarray:
        return self.buffers.hist_ring[c, :self.n_steps[c]]

    def samples(self, after_burn_in: bool = True, chains=None) -> SampleSet:
        B = self.config.burn_in_N if after_burn_in else 0
        parts = []
        for c in (range(self.n_chains) if chains is None else chains):
            n = int(self.n_steps[c])
            k = np.arange(min(B, n), n)
            parts.append(SampleSet(np.full(len(k), c), k, self.buffers.hist_ring[c, k],
                                   self.buffers.hist_x[c, k]))
        return SampleSet.concatenate(parts)

    def state(self) -> EELadderState:
        last = [self.n_steps[c] - 1 for c in range(self.n_chains)]
        b = self.buffers
        return EELadderState(np.array([b.hist_x[c, k] for c, k in enumerate(last)]),
                             np.array([b.hist_h[c, k] for c, k in enumerate(last)]),
                             self.n_steps.copy(), b)


def ladder_schedule(n_chains: int, N: int, B: int):
    """Per-chain step counts and start ticks."""
    K = n_chains - 1
    n_steps = np.array([N + c * B for c in range(n_chains)], dtype=np.int64)
    offsets = np.array([(K - c) * B for c in range(n_chains)], dtype=np.int64)
    return n_steps, offsets


def run_ladder(model: TargetModel, ladder: LadderConfig, config: EEConfig, proposals=None,
               n_steps: int = 10_000, rng=0, x0=None, s0: float = 0.1, backend=None) -> EERun:
    """Run all chains of the ladder; ``n_steps`` is ``N``, the coldest chain's length."""
    if n_steps <= config.burn_in_N:
        raise ValueError("n_steps must exceed burn_in_N")
    nc, d, nr = ladder.n_temps, model.dimension, ladder.n_rings
    if proposals is None:
        proposals = GaussianRandomWalk.for_ladder(s0, ladder.temperatures)
    steps, offsets = ladder_schedule(nc, int(n_steps), int(config.burn_in_N))
    cap = int(steps.max())
    projected = nc * cap * (8 * d + 8 + 8 + 1) + nc * nr * cap * 8 + nc * cap * 8 * (EE_WIDTH + d)
    if projected > config.max_buffer_bytes:
        raise MemoryError(f"equi-energy history needs {projected} bytes "
                          f"(limit {config.max_buffer_bytes})")
    if x0 is None:
        x0 = np.tile(_initial_point(model), (nc, 1))
    x0 = np.ascontiguousarray(np.asarray(x0, dtype=float).reshape(nc, d))
    U = np.zeros((nc, cap, EE_WIDTH))
    Z = np.zeros((nc, cap, d))
    for c, ss in enumerate(chain_seeds(rng, nc)):
        U[c, :steps[c]], Z[c, :steps[c]] = StepStream(ss, EE_WIDTH, d).draw(int(steps[c]))
    buf = RingBufferSet(nc, nr, d, cap)
    floors = energy_floors(ladder, nc, config.flatten)
    clamps = _backend.ee_advance(
        model, proposals, np.asarray(ladder.energy_levels), np.asarray(ladder.temperatures),
        floors, float(config.p_ee), ladder.ring_policy == "strict", steps, offsets, U, Z, x0,
        buf.hist_x, buf.hist_h, buf.hist_ring, buf.hist_kind, buf.buf_idx, buf.buf_len,
        backend=backend)
    buf.count[:] = steps
    used = "cython" if _backend._use_c(model, proposals, backend) else "python"
    return EERun(buf, steps, offsets, config, int(clamps), used)


def replay_jumps(i: int, x, n: int, buffers: RingBufferSet, model: TargetModel,
                 ladder: LadderConfig, config: EEConfig, proposals, rng, backend=None):
    """``n`` independent one-step transitions of chain ``i`` from ``x`` against frozen buffers.

    Returns the resulting states ``(n, d)`` and move kinds (0/1 MH reject/accept,
    2/3 jump reject/accept).  The empirical law of the states estimates the
    current one-step kernel of chain ``i`` at ``x``.
    """
    d = model.dimension
    stream = _as_stream(rng, EE_WIDTH, d)
    U, Z = stream.draw(n)
    K = ladder.n_temps - 1
    nb = i + 1 if i < K else i
    out_x = np.empty((n, d))
    out_k = np.empty(n, dtype=np.int8)
    m = max(1, int(buffers.count[nb]))
    _backend.ee_replay(
        model, proposals, np.asarray(ladder.energy_levels), np.asarray(ladder.temperatures),
        energy_floors(ladder, ladder.n_temps, config.flatten), float(config.p_ee),
        ladder.ring_policy == "strict", i, K, np.asarray(x, dtype=float).reshape(-1), U, Z,
        np.ascontiguousarray(buffers.hist_x[nb, :m]), np.ascontiguousarray(buffers.hist_h[nb, :m]),
        np.ascontiguousarray(buffers.buf_idx[nb]), np.ascontiguousarray(buffers.buf_len[nb]),
        out_x, out_k, backend=backend)
    return out_x, out_k


def check_buffer_partition(buffers: RingBufferSet, ladder: LadderConfig) -> bool:
    """Every buffered point sits in the ring its buffer claims."""
    for c in range(buffers.n_chains):
        for j in range(buffers.n_rings):
            e = buffers.energies(c, j)
            if len(e) and np.any(ring_indices(ladder, e) != j):
                return False
    return True
