"""Target distributions, energy/temperature ladders and energy-ring indexing.

Every density is handled through its energy ``h`` with ``pi(x) ∝ exp(-h(x))``
and tempered versions ``exp(-h(x) / T_i)``.  Nothing here exponentiates an
unnormalized density; callers work with log-densities throughout.

Built-in models carry a ``native`` description so the compiled kernels can
evaluate their energy without calling back into Python.  Any object with
``dimension`` and ``energy(point)`` works with the pure-Python kernels.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# energy kinds understood by the compiled kernels
NATIVE_MIXTURE = 1
NATIVE_DOUBLE_WELL = 2
NATIVE_TABLE = 3


class RingIndexError(ValueError):
    """Energy below the lowest level under the strict ring policy."""


class TargetModel:
    """Base class for targets ``pi(x) ∝ exp(-h(x))``.

    Subclasses implement :meth:`energy` for a single point (a sequence of
    floats of length ``dimension``).  :meth:`energies` is the vectorized
    version used by estimators and quadrature; the default loops.
    """

    dimension: int = 1
    #: axis-aligned box ``[(lo, hi), ...]`` when the support is bounded
    support: tuple | None = None
    native: tuple | None = None

    def energy(self, x: Sequence[float]) -> float:
        raise NotImplementedError

    def energies(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dimension)
        return np.array([self.energy(tuple(row)) for row in X])

    @property
    def regions(self) -> dict[str, Callable]:
        """Named indicator functionals ``X -> {0, 1}`` (vectorized)."""
        return {}

    def exact_moments(self) -> dict[str, float] | None:
        return None


class CallableModel(TargetModel):
    """Wrap an arbitrary energy function (pure-Python kernels only)."""

    def __init__(self, energy: Callable, dimension: int = 1, support=None):
        self._energy = energy
        self.dimension = int(dimension)
        self.support = support

    def energy(self, x):
        return float(self._energy(x))


class GaussianMixture(TargetModel):
    """Isotropic Gaussian mixture with common standard deviation.

    The energy is ``-log sum_k w_k exp(-|x - mu_k|^2 / (2 sigma^2))``; the
    normalizing constant ``2 pi sigma^2`` is dropped.
    """

    def __init__(self, means, sigma: float, weights=None):
        means = np.atleast_2d(np.asarray(means, dtype=float))
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if weights is None:
            weights = np.full(len(means), 1.0 / len(means))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(means),) or np.any(weights <= 0):
            raise ValueError("weights must be positive, one per component")
        weights = weights / weights.sum()
        self.means = means
        self.sigma = float(sigma)
        self.weights = weights
        self.log_weights = np.log(weights)
        self.dimension = means.shape[1]
        self._a = 1.0 / (2.0 * self.sigma * self.sigma)
        self._mu = [tuple(m) for m in means.tolist()]
        self._lw = self.log_weights.tolist()
        self.native = (NATIVE_MIXTURE, self.means, self.log_weights, self._a)

    def energy(self, x):
        # operation order mirrors the compiled kernel exactly
        a = self._a
        terms = []
        for mu, lw in zip(self._mu, self._lw):
            d2 = 0.0
            for xk, mk in zip(x, mu):
                t = xk - mk
                d2 += t * t
            terms.append(lw - a * d2)
        m = max(terms)
        s = 0.0
        for t in terms:
            s += math.exp(t - m)
        return -(m + math.log(s))

    def energies(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dimension)
        d2 = ((X[:, None, :] - self.means[None, :, :]) ** 2).sum(axis=2)
        t = self.log_weights[None, :] - self._a * d2
        m = t.max(axis=1)
        return -(m + np.log(np.exp(t - m[:, None]).sum(axis=1)))

    def log_density(self, X):
        """Normalized log-density, for oracles."""
        d = self.dimension
        return -self.energies(X) - 0.5 * d * math.log(2 * math.pi * self.sigma ** 2)

    def sample_exact(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comp = rng.choice(len(self.means), size=n, p=self.weights)
        return self.means[comp] + self.sigma * rng.standard_normal((n, self.dimension))

    def in_discs(self, X, radius: float | None = None) -> np.ndarray:
        """Indicator of the union of discs of ``radius`` (default sigma/2) around the means."""
        r = self.sigma / 2 if radius is None else radius
        X = np.asarray(X, dtype=float).reshape(-1, self.dimension)
        d2 = ((X[:, None, :] - self.means[None, :, :]) ** 2).sum(axis=2)
        return (d2 <= r * r).any(axis=1).astype(float)

    @property
    def regions(self):
        return {"discs": self.in_discs}

    def exact_moments(self):
        w, mu, s2 = self.weights, self.means, self.sigma ** 2
        out = {f"mean_x{k + 1}": float(w @ mu[:, k]) for k in range(self.dimension)}
        for k in range(self.dimension):
            out[f"mean_x{k + 1}_sq"] = float(w @ (mu[:, k] ** 2 + s2))
        return out


class DoubleWell(TargetModel):
    """One-dimensional double well ``h(x) = height * (x^2 - 1)^2``."""

    dimension = 1

    def __init__(self, height: float = 1.0, box=(-3.0, 3.0)):
        self.height = float(height)
        self.box = tuple(box)
        self.native = (NATIVE_DOUBLE_WELL, self.height)

    def energy(self, x):
        t = x[0] * x[0] - 1.0
        return self.height * (t * t)

    def energies(self, X):
        X = np.asarray(X, dtype=float).reshape(-1)
        return self.height * (X * X - 1.0) ** 2


class FiniteModel(TargetModel):
    """Target on the finite set ``{0, ..., S-1}`` given by an energy table.

    Points are stored as one-element float tuples holding the state index so
    that finite and continuous models share the same kernels.  ``+inf``
    entries mark states outside the support.
    """

    dimension = 1

    def __init__(self, energies: Sequence[float]):
        h = np.asarray(energies, dtype=float)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("energy table must be a non-empty vector")
        if np.any(np.isnan(h)) or np.any(h == -np.inf):
            raise ValueError("energy table must be finite or +inf")
        self.table = h
        self.n_states = h.size
        self.support = ((0, h.size - 1),)
        self._h = h.tolist()
        self.native = (NATIVE_TABLE, self.table)

    def energy(self, x):
        return self._h[int(x[0])]

    def energies(self, X):
        return self.table[np.asarray(X, dtype=float).reshape(-1).astype(np.int64)]


@dataclass(frozen=True)
class LadderConfig:
    """Energy levels ``H_0 < ... < H_Ke`` and temperatures ``1 = T_0 < ... < T_Kt``."""

    energy_levels: tuple
    temperatures: tuple
    ring_policy: str = "clamp"

    def __post_init__(self):
        H = tuple(float(v) for v in self.energy_levels)
        T = tuple(float(v) for v in self.temperatures)
        object.__setattr__(self, "energy_levels", H)
        object.__setattr__(self, "temperatures", T)
        if not H:
            raise ValueError("at least one energy level is required")
        if not all(math.isfinite(v) for v in H):
            raise ValueError("energy levels must be finite")
        if any(b <= a for a, b in zip(H, H[1:])):
            raise ValueError("energy levels not increasing")
        if not T or T[0] != 1.0:
            raise ValueError("temperatures must start at exactly 1")
        if any(b <= a for a, b in zip(T, T[1:])):
            raise ValueError("temperatures not increasing")
        if self.ring_policy not in ("clamp", "strict"):
            raise ValueError("ring_policy must be 'clamp' or 'strict'")

    @property
    def n_rings(self) -> int:
        return len(self.energy_levels)

    @property
    def n_temps(self) -> int:
        return len(self.temperatures)

    @property
    def K_e(self) -> int:
        return self.n_rings - 1

    @property
    def K_t(self) -> int:
        return self.n_temps - 1


def log_tempered_density(model: TargetModel, ladder: LadderConfig, i: int, x) -> float:
    """``log k_i(x) = -h(x) / T_i``; ``-inf`` outside the support."""
    if not 0 <= i < ladder.n_temps:
        raise IndexError(f"temperature index {i} outside [0, {ladder.K_t}]")
    h = model.energy(x)
    if h == math.inf:
        return -math.inf
    if not math.isfinite(h):
        raise ValueError(f"non-finite energy {h!r} at {x!r}")
    return -h / ladder.temperatures[i]


def ring_index(ladder: LadderConfig, e: float, strict: bool | None = None) -> int:
    """Index ``j`` of the half-open ring ``[H_j, H_{j+1})`` containing ``e``.

    Energies below ``H_0`` are clamped to ring 0 with a warning, or raise
    :class:`RingIndexError` under the strict policy.
    """
    if math.isnan(e):
        raise ValueError("energy is NaN")
    j = bisect.bisect_right(ladder.energy_levels, e) - 1
    if j < 0:
        if strict if strict is not None else ladder.ring_policy == "strict":
            raise RingIndexError(f"energy {e} below lowest level {ladder.energy_levels[0]}")
        warnings.warn(f"energy {e} below H_0; clamped to ring 0", stacklevel=2)
        j = 0
    return j


def ring_indices(ladder: LadderConfig, energies) -> np.ndarray:
    """Vectorized :func:`ring_index` with clamping (no warnings)."""
    e = np.asarray(energies, dtype=float)
    j = np.searchsorted(np.asarray(ladder.energy_levels), e, side="right") - 1
    return np.maximum(j, 0)


def _gauss_legendre_pieces(f, a, b, panels, order=8):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    return float((0.5 * (hi - lo) * w[None, :] * f(pts)).sum())


def _crossings(h, level, lo, hi, n):
    from scipy.optimize import brentq

    grid = np.linspace(lo, hi, n + 1)
    vals = h(grid) - level
    roots = []
    for k in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(brentq(lambda t: float(h(np.array([t]))[0] - level), grid[k], grid[k + 1],
                            xtol=1e-15, rtol=4 * np.finfo(float).eps))
    roots.extend(grid[np.nonzero(vals == 0)[0]].tolist())
    return roots


def true_ring_masses(model: TargetModel, ladder: LadderConfig, i: int,
                     resolution: int = 2000, box=None) -> np.ndarray:
    """Exact or quadrature ring masses ``P_{pi_i}(X in D_j)``.

    Finite models are summed exactly.  One-dimensional models use composite
    Gauss-Legendre with breakpoints placed at every ring boundary crossing,
    so the integrand is smooth on each panel.  Two-dimensional models use a
    midpoint grid.  Test oracle only; the samplers never call it.
    """
    T = ladder.temperatures[i]
    if isinstance(model, FiniteModel):
        h = model.table
        ok = np.isfinite(h)
        logk = np.full(h.shape, -np.inf)
        logk[ok] = -(h[ok] - h[ok].min()) / T
        w = np.exp(logk)
        rings = np.zeros(h.size, dtype=int)
        rings[ok] = ring_indices(ladder, h[ok])
        out = np.bincount(rings[ok], weights=w[ok], minlength=ladder.n_rings)
        return out / out.sum()

    if box is None:
        box = model.support or getattr(model, "box", None)
        if box is not None and model.dimension == 1 and np.ndim(box) == 1:
            box = (tuple(box),)
    if box is None:
        raise ValueError("unbounded support: supply a truncation box")
    box = [tuple(b) for b in np.atleast_2d(np.asarray(box, dtype=float))]
    if model.dimension == 1:
        lo, hi = box[0]
        hfun = model.energies
        grid = np.linspace(lo, hi, resolution + 1)
        shift = float(hfun(grid).min())
        cuts = [lo, hi]
        for H in ladder.energy_levels:
            cuts.extend(_crossings(hfun, H, lo, hi, resolution))
        cuts = np.unique(np.clip(cuts, lo, hi))
        out = np.zeros(ladder.n_rings)
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= 0:
                continue
            j = ring_indices(ladder, hfun(np.array([0.5 * (a + b)])))[0]
            panels = max(1, int(math.ceil(resolution * (b - a) / (hi - lo))))
            out[j] += _gauss_legendre_pieces(
                lambda t: np.exp(-(hfun(t.ravel()).reshape(t.shape) - shift) / T), a, b, panels)
        return out / out.sum()
    if model.dimension == 2:
        (x0, x1), (y0, y1) = box
        xs = x0 + (np.arange(resolution) + 0.5) * (x1 - x0) / resolution
        ys = y0 + (np.arange(resolution) + 0.5) * (y1 - y0) / resolution
        out = np.zeros(ladder.n_rings)
        for y in ys:
            pts = np.column_stack([xs, np.full_like(xs, y)])
            h = model.energies(pts)
            ok = np.isfinite(h)
            out += np.bincount(ring_indices(ladder, h[ok]), weights=np.exp(-h[ok] / T),
                               minlength=ladder.n_rings)
        return out / out.sum()
    raise ValueError("quadrature oracle supports dimension <= 2 or finite models")
