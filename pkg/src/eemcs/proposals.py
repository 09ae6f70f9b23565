"""Per-temperature proposal kernels ``Q_i`` and the temperature proposal ``Delta``."""

from __future__ import annotations

import bisect
import math

import numpy as np

PROP_GAUSS = 1
PROP_MATRIX = 2


def inverse_cdf_table(P: np.ndarray) -> np.ndarray:
    """Cumulative rows for inverse-CDF sampling.

    Entries from the last positive-probability column onward are set to 2.0
    so rounding in the cumulative sum can never select a zero-probability
    trailing state.  Sampling picks the first ``j`` with ``u < cum[j]``.
    """
    P = np.asarray(P, dtype=float)
    cum = np.cumsum(P, axis=-1)
    flat_p = P.reshape(-1, P.shape[-1])
    flat_c = cum.reshape(-1, P.shape[-1])
    for row_p, row_c in zip(flat_p, flat_c):
        last = np.nonzero(row_p > 0)[0]
        if last.size == 0:
            raise ValueError("proposal row has no mass")
        row_c[last[-1]:] = 2.0
    return cum


def _log(P):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(P, dtype=float))


class GaussianRandomWalk:
    """Spherical Gaussian random walk ``y = x + s_i z``; symmetric so ``log q`` is 0."""

    symmetric = True

    def __init__(self, scales):
        scales = np.asarray(scales, dtype=float).reshape(-1)
        if np.any(scales <= 0):
            raise ValueError("proposal scales must be positive")
        if np.any(np.diff(scales) < 0):
            raise ValueError("proposal scales must be nondecreasing in temperature")
        self.scales = scales
        self._s = scales.tolist()
        dummy = np.zeros((1, 1, 1))
        self.native = (PROP_GAUSS, scales, dummy, dummy)

    @classmethod
    def for_ladder(cls, s0: float, temperatures) -> "GaussianRandomWalk":
        """Scale ``s0 * sqrt(T_i)`` per temperature."""
        return cls(s0 * np.sqrt(np.asarray(temperatures, dtype=float)))

    def propose(self, i, x, z, u):
        s = self._s[i]
        return tuple([xk + s * zk for xk, zk in zip(x, z)])

    def log_q(self, i, x, y):
        return 0.0


class MatrixProposal:
    """Proposal on ``{0, ..., S-1}`` given by a row-stochastic matrix.

    ``Q`` may be a single ``(S, S)`` matrix shared by all temperatures or a
    stack ``(n_temps, S, S)``.
    """

    symmetric = False

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim == 2:
            Q = Q[None]
        if Q.ndim != 3 or Q.shape[1] != Q.shape[2]:
            raise ValueError("Q must be (S, S) or (n, S, S)")
        if np.any(Q < 0) or not np.allclose(Q.sum(axis=2), 1.0, atol=1e-12):
            raise ValueError("Q rows must be probability vectors")
        self.Q = Q
        self.cum = inverse_cdf_table(Q)
        self.logQ = _log(Q)
        self._cum = self.cum.tolist()
        self._logq = self.logQ.tolist()
        self._shared = Q.shape[0] == 1
        self.native = (PROP_MATRIX, np.ones(1), self.cum, self.logQ)

    def matrix(self, i: int) -> np.ndarray:
        return self.Q[0 if self._shared else i]

    def propose(self, i, x, z, u):
        row = self._cum[0 if self._shared else i][int(x[0])]
        return (float(bisect.bisect_right(row, u)),)

    def log_q(self, i, x, y):
        return self._logq[0 if self._shared else i][int(x[0])][int(y[0])]


class DeltaKernel:
    """Temperature proposal ``Delta(i, j)`` on ``{0, ..., K_t}``.

    The default is the reflecting random walk: ``Delta(0, 1) = Delta(K_t, K_t - 1) = 1``
    and ``Delta(i, i +/- 1) = 1/2`` in between.  With a single temperature the
    only move is ``0 -> 0``.
    """

    def __init__(self, matrix):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("Delta must be square")
        if np.any(M < 0) or not np.allclose(M.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("Delta rows must sum to 1")
        self.matrix = M
        self.cum = inverse_cdf_table(M)
        self.log = _log(M)

    @classmethod
    def reflecting(cls, n_temps: int) -> "DeltaKernel":
        M = np.zeros((n_temps, n_temps))
        if n_temps == 1:
            M[0, 0] = 1.0
        else:
            M[0, 1] = 1.0
            M[-1, -2] = 1.0
            for i in range(1, n_temps - 1):
                M[i, i - 1] = M[i, i + 1] = 0.5
        return cls(M)

    def sample(self, i: int, u: float) -> int:
        return bisect.bisect_right(self.cum[i].tolist(), u)

    def __call__(self, i, j):
        return self.matrix[i, j]


def log_ratio_to_prob(lr: float) -> float:
    return 1.0 if lr >= 0.0 else math.exp(lr)
