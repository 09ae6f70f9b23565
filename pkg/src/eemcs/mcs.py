"""Multicanonical sampling with Wang-Landau weight adaptation.

The chain lives on ``X x {0, ..., K_t}`` and targets, in the limit,

    pi(x, i) ∝ sum_j k_i(x) / Z_ij 1{x in D_j}

so every (temperature, energy ring) cell is visited equally often.  The
unknown ``Z_ij`` are learned by the Wang-Landau recursion on ``log phi``.
Each step flips a ``theta`` coin: heads proposes a temperature move from
``Delta``, tails a spatial move from ``Q_i``.  The occupied cell's weight is
then multiplied by ``1 + gamma_n``, and ``gamma_n`` shrinks every time the
stage histogram becomes flat.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .proposals import DeltaKernel, GaussianRandomWalk
from .samples import SampleSet
from .streams import StepStream, as_seed_sequence
from .target import LadderConfig, TargetModel

#: uniforms per step: coin, proposal, accept
MCS_WIDTH = 3


def gamma_at(gamma0: float, k: int) -> float:
    """Step size in stage ``k``: ``(1 + gamma0)^(1/(k+1)) - 1``."""
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    if k < 0:
        raise ValueError("stage index must be nonnegative")
    return (1.0 + gamma0) ** (1.0 / (k + 1)) - 1.0


def _min1exp(lr: float) -> float:
    return 1.0 if lr >= 0.0 else math.exp(lr)


def within_temp_accept(log_k_x, log_k_y, log_phi_Ix, log_phi_Iy,
                       log_q_yx=0.0, log_q_xy=0.0) -> float:
    """Acceptance probability of a spatial move at fixed temperature.

    The weight of the *current* ring sits in the numerator, so moving into
    an over-visited ring is penalized.
    """
    if log_k_x == -math.inf:
        raise ValueError("current state has zero density (invalid chain state)")
    return _min1exp(log_k_y + log_phi_Ix + log_q_yx - log_k_x - log_phi_Iy - log_q_xy)


def temp_swap_accept(log_k_j_x, log_k_i_x, log_phi_i_Ix, log_phi_j_Ix,
                     delta_ji, delta_ij) -> float:
    """Acceptance probability of moving from temperature ``i`` to ``j`` at fixed ``x``."""
    if delta_ij <= 0:
        raise ValueError("Delta(i, j) = 0: j could not have been proposed from i")
    if delta_ji <= 0:
        return 0.0
    return _min1exp(log_k_j_x + log_phi_i_Ix - log_k_i_x - log_phi_j_Ix
                    + (math.log(delta_ji) - math.log(delta_ij)))


@dataclass
class WeightTable:
    """Log Wang-Landau weights ``log phi[i, j]`` and the current stage histogram."""

    log_phi: np.ndarray
    stage_occupation: np.ndarray
    stage_index: int = 0
    gamma0: float = 1.0

    @classmethod
    def zeros(cls, n_temps: int, n_rings: int, gamma0: float = 1.0) -> "WeightTable":
        if gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        return cls(np.zeros((n_temps, n_rings)), np.zeros((n_temps, n_rings), dtype=np.int64),
                   0, float(gamma0))

    @property
    def gamma(self) -> float:
        return gamma_at(self.gamma0, self.stage_index)

    @property
    def stage_steps(self) -> int:
        return int(self.stage_occupation.sum())

    def copy(self) -> "WeightTable":
        return WeightTable(self.log_phi.copy(), self.stage_occupation.copy(),
                           self.stage_index, self.gamma0)


def update_weight(table: WeightTable, i0: int, j0: int) -> WeightTable:
    """Multiply ``phi[i0, j0]`` by ``1 + gamma_n`` (in place) and count the visit."""
    table.log_phi[i0, j0] += math.log1p(table.gamma)
    table.stage_occupation[i0, j0] += 1
    return table


def flat_check(stage_occupation, c: float) -> bool:
    """True iff every cell count is at least ``c`` times the mean count."""
    occ = np.asarray(stage_occupation)
    total = int(occ.sum())
    if total == 0:
        raise ValueError("no visits recorded")
    return bool(occ.min() >= c * total / occ.size)


def normalized_weights(table: WeightTable, i: int) -> np.ndarray:
    """``phi[i, :] / sum_j phi[i, j]`` computed as a softmax of the log row."""
    row = np.asarray(table.log_phi[i], dtype=float)
    w = np.exp(row - row.max())
    return w / w.sum()


@dataclass
class MCSState:
    x: np.ndarray
    temp: int = 0
    step_count: int = 0


def default_min_stage_steps(ladder: LadderConfig, factor: int = 50) -> int:
    return ladder.n_temps * ladder.n_rings * factor


def _initial_point(model):
    f = getattr(model, "initial_point", None)
    if f is not None:
        return np.asarray(f(), dtype=float)
    means = getattr(model, "means", None)
    if means is not None:
        return np.asarray(means, dtype=float).mean(axis=0)
    return np.zeros(model.dimension)


def _as_stream(rng, width, dim):
    if isinstance(rng, StepStream):
        if rng.width != width or rng.dim != dim:
            raise ValueError(f"stream shape ({rng.width}, {rng.dim}) != ({width}, {dim})")
        return rng
    return StepStream(as_seed_sequence(rng), width, dim)


def mcs_step(state: MCSState, table: WeightTable, model: TargetModel, ladder: LadderConfig,
             proposals, delta: DeltaKernel, theta: float, rng, c: float = 0.2,
             min_stage_steps: int | None = None, backend=None):
    """One joint step followed by the weight update and the flatness check.

    ``rng`` is a :class:`StepStream` of width 3 (or a seed); repeated calls
    with the same stream reproduce :func:`run_mcs` exactly.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if table.log_phi.shape != (ladder.n_temps, ladder.n_rings):
        raise ValueError("weight table shape does not match the ladder")
    stream = _as_stream(rng, MCS_WIDTH, model.dimension)
    if min_stage_steps is None:
        min_stage_steps = default_min_stage_steps(ladder)
    U, Z = stream.draw(1)
    x = np.array(state.x, dtype=float).reshape(-1)
    istate = np.array([state.temp, table.stage_index, table.stage_steps, 0, state.step_count],
                      dtype=np.int64)
    table.log_phi = np.ascontiguousarray(table.log_phi, dtype=float)
    table.stage_occupation = np.ascontiguousarray(table.stage_occupation, dtype=np.int64)
    _backend.mcs_advance(model, proposals, ladder.energy_levels, ladder.temperatures,
                         delta.cum, delta.log, float(theta), table.gamma0, float(c),
                         int(min_stage_steps), ladder.ring_policy == "strict", x, istate,
                         table.log_phi, table.stage_occupation, U, Z, 0, 1, True, None,
                         backend=backend)
    table.stage_index = int(istate[1])
    return MCSState(x, int(istate[0]), int(istate[4])), table


@dataclass
class MCSRun:
    """Result of :func:`run_mcs`: final state, weights, trace and stage snapshots."""

    table: WeightTable
    state: MCSState
    x: np.ndarray
    temp: np.ndarray
    ring: np.ndarray
    accepted: np.ndarray
    stage: np.ndarray
    log_gamma: np.ndarray
    snapshots: list = field(default_factory=list)
    clamps: int = 0
    backend: str = ""

    @property
    def n_steps(self) -> int:
        return self.state.step_count

    @property
    def burn_in(self) -> int | None:
        """Step count at the first stage advance, or ``None`` if there was none."""
        return self.snapshots[0][0] if self.snapshots else None

    def samples(self, after_burn_in: bool = True) -> SampleSet:
        start = 0
        if after_burn_in:
            if self.burn_in is None:
                raise RuntimeError("no stage advance: multicanonical weights never left stage 0")
            start = self.burn_in
        n = len(self.temp)
        idx = np.arange(start, n)
        return SampleSet(self.temp[start:], idx, self.ring[start:], self.x[start:])

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "temp", "ring", "accepted", "stage", "log_gamma"])
            for row in zip(range(len(self.temp)), self.temp.tolist(), self.ring.tolist(),
                           self.accepted.tolist(), self.stage.tolist(), self.log_gamma.tolist()):
                w.writerow(list(row[:5]) + [repr(row[5])])

    def write_weights(self, path) -> None:
        """One block per stage advance: ``step, stage, temp, log_phi[temp, :]...``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "stage", "temp"] + [f"ring{j}" for j in
                                                     range(self.table.log_phi.shape[1])])
            snaps = list(self.snapshots) + [(self.n_steps, self.table.stage_index,
                                             self.table.log_phi)]
            for step, stage, lp in snaps:
                for i, row in enumerate(np.asarray(lp).tolist()):
                    w.writerow([step, stage, i] + [repr(v) for v in row])


def run_mcs(model: TargetModel, ladder: LadderConfig, *, proposals=None, delta=None,
            theta: float = 0.5, gamma0: float = 1.0, c: float = 0.2,
            n_steps: int | None = None, n_stages: int | None = None,
            max_steps: int = 50_000_000, x0=None, temp0: int = 0, rng=0, s0: float = 0.1,
            min_stage_steps: int | None = None, record: bool = True, chunk: int = 1 << 16,
            frozen_log_phi=None, backend=None) -> MCSRun:
    """Run the multicanonical sampler.

    Stops after ``n_steps`` steps or once ``n_stages`` stage advances have
    happened, whichever comes first.  With only ``n_stages`` given the run
    gives up with ``RuntimeError`` after ``max_steps``.

    ``frozen_log_phi`` switches adaptation off: the weights are fixed at the
    given ``(K_t + 1, K_e + 1)`` table and every step uses ``gamma = 0``.
    """
    if n_steps is None and n_stages is None:
        raise ValueError("give n_steps, n_stages or both")
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    d = model.dimension
    if proposals is None:
        proposals = GaussianRandomWalk.for_ladder(s0, ladder.temperatures)
    if delta is None:
        delta = DeltaKernel.reflecting(ladder.n_temps)
    if min_stage_steps is None:
        min_stage_steps = default_min_stage_steps(ladder)
    if not 0 <= temp0 < ladder.n_temps:
        raise ValueError("initial temperature index out of range")
    stream = _as_stream(rng, MCS_WIDTH, d)
    table = WeightTable.zeros(ladder.n_temps, ladder.n_rings, gamma0)
    kernel_gamma0 = float(gamma0)
    if frozen_log_phi is not None:
        frozen = np.array(frozen_log_phi, dtype=float)
        if frozen.shape != table.log_phi.shape:
            raise ValueError("frozen weight table shape does not match the ladder")
        table.log_phi = frozen
        kernel_gamma0 = 0.0
    x = (_initial_point(model) if x0 is None else np.array(x0, dtype=float)).reshape(-1).copy()
    if x.size != d:
        raise ValueError("initial point has the wrong dimension")
    istate = np.array([temp0, 0, 0, 0, 0], dtype=np.int64)
    strict = ladder.ring_policy == "strict"
    limit = n_steps if n_steps is not None else max_steps
    parts = []
    snapshots = []
    done_all = False
    while not done_all and istate[4] < limit:
        m = int(min(chunk, limit - istate[4]))
        U, Z = stream.draw(m)
        rec = None
        if record:
            rec = [0, np.empty((m, d)), np.empty(m, dtype=np.int64), np.empty(m, dtype=np.int64),
                   np.empty(m, dtype=np.int8), np.empty(m, dtype=np.int64), np.empty(m)]
        pos = 0
        while pos < m:
            before = int(istate[1])
            if rec is not None:
                rec[0] = pos
            done = _backend.mcs_advance(
                model, proposals, ladder.energy_levels, ladder.temperatures, delta.cum,
                delta.log, float(theta), kernel_gamma0, float(c), int(min_stage_steps), strict,
                x, istate, table.log_phi, table.stage_occupation, U, Z, pos, m - pos, True,
                None if rec is None else tuple(rec), backend=backend)
            pos += done
            if istate[1] != before:
                snapshots.append((int(istate[4]), int(istate[1]), table.log_phi.copy()))
                if n_stages is not None and istate[1] >= n_stages:
                    done_all = True
                    break
        if rec is not None:
            parts.append([a[:pos] for a in rec[1:]])
    if n_steps is None and not done_all:
        raise RuntimeError(f"only {int(istate[1])} of {n_stages} stages within {max_steps} steps")
    table.stage_index = int(istate[1])
    if parts:
        cols = [np.concatenate(p) for p in zip(*parts)]
    else:
        cols = [np.empty((0, d)), *(np.empty(0, dtype=np.int64),) * 2, np.empty(0, dtype=np.int8),
                np.empty(0, dtype=np.int64), np.empty(0)]
    state = MCSState(x, int(istate[0]), int(istate[4]))
    backend_used = "cython" if _backend._use_c(model, proposals, backend) else "python"
    return MCSRun(table, state, *cols, snapshots=snapshots, clamps=int(istate[3]),
                  backend=backend_used)
