"""Ring-decomposed estimators and the replicated EE-vs-MCS comparison.

An expectation under the target is split over energy rings,

    E[g(X)] = sum_j p_j E[g(X) | X in D_j],

with ``p_j`` read off the Wang-Landau weights (multicanonical sampler) or
the coldest chain's ring frequencies (equi-energy sampler), and each
conditional mean estimated by self-normalized importance weights
``exp(-h(x) (1 - 1/T_i))`` from the samples at temperature ``T_i``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ee import EEConfig, run_ladder
from .mcs import default_min_stage_steps, normalized_weights, run_mcs, WeightTable
from .samples import SampleSet
from .streams import replication_seed
from .target import LadderConfig, TargetModel


def _x1(X, model):
    return X[:, 0]


def _x2(X, model):
    return X[:, 1]


def _x2sq(X, model):
    return X[:, 1] ** 2


def _x1sq(X, model):
    return X[:, 0] ** 2


def _discs(X, model):
    return model.regions["discs"](X)


#: name -> (column label, vectorized g(X, model))
FUNCTIONALS = {
    "mean_x1": ("E(X1)", _x1),
    "mean_x2": ("E(X2)", _x2),
    "mean_x2_sq": ("E(X2^2)", _x2sq),
    "prob_discs": ("Pr(X in B)", _discs),
    "mean_x1_sq": ("E(X1^2)", _x1sq),
}
DEFAULT_FUNCTIONALS = ("mean_x1", "mean_x2", "mean_x2_sq", "prob_discs")


@dataclass
class RingDecomposedEstimate:
    p_hat: np.ndarray
    cond_g: np.ndarray
    combined: float
    sources: np.ndarray = field(default=None)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.cond_g)

    @property
    def coverage(self) -> float:
        """Probability mass of the rings that had a conditional estimate."""
        return float(self.p_hat[~self.missing].sum())


def ring_probs_from_weights(table: WeightTable) -> np.ndarray:
    return normalized_weights(table, 0)


def ring_probs_from_samples(samples: SampleSet, n_rings: int, chain: int = 0) -> np.ndarray:
    r = samples.ring[samples.chain == chain]
    if len(r) == 0:
        raise ValueError(f"no samples from chain {chain}")
    return np.bincount(r, minlength=n_rings) / len(r)


def importance_log_weights(h, T: float) -> np.ndarray:
    """``log pi_0(x) / pi_i(x)`` up to a constant for untruncated tempered targets."""
    return -np.asarray(h, dtype=float) * (1.0 - 1.0 / T)


def conditional_reweighted_mean(samples: SampleSet, g, j: int, model: TargetModel,
                                ladder: LadderConfig, source: int) -> float:
    """Self-normalized estimate of ``E[g(X) | X in D_j]`` from temperature ``source``.

    ``g`` is either a vectorized callable ``g(X, model)`` or precomputed
    values aligned with ``samples``.  Returns NaN when the ring is empty.
    """
    mask = (samples.chain == source) & (samples.ring == j)
    if not mask.any():
        return math.nan
    X = samples.x[mask]
    gv = np.asarray(g(X, model) if callable(g) else np.asarray(g)[mask], dtype=float)
    lw = importance_log_weights(model.energies(X), ladder.temperatures[source])
    w = np.exp(lw - lw.max())
    return float((w * gv).sum() / w.sum())


def combine(p_hat, cond_g) -> float:
    p_hat = np.asarray(p_hat, dtype=float)
    cond_g = np.asarray(cond_g, dtype=float)
    if p_hat.shape != cond_g.shape:
        raise ValueError(f"length mismatch: {p_hat.shape} vs {cond_g.shape}")
    return float(p_hat @ cond_g)


def choose_sources(samples: SampleSet, n_rings: int, n_temps: int,
                   min_ring_samples: int = 25) -> np.ndarray:
    """Per ring, the coldest temperature with enough samples in it (-1 when none)."""
    counts = np.zeros((n_temps, n_rings), dtype=np.int64)
    np.add.at(counts, (samples.chain, samples.ring), 1)
    out = np.full(n_rings, -1)
    for j in range(n_rings):
        ok = np.nonzero(counts[:, j] >= min_ring_samples)[0]
        if ok.size == 0:
            ok = np.nonzero(counts[:, j] > 0)[0]
        if ok.size:
            out[j] = ok[0]
    return out


def ring_decomposed_estimate(samples: SampleSet, g, p_hat, model: TargetModel,
                             ladder: LadderConfig, min_ring_samples: int = 25,
                             sources=None) -> RingDecomposedEstimate:
    p_hat = np.asarray(p_hat, dtype=float)
    if sources is None:
        sources = choose_sources(samples, ladder.n_rings, ladder.n_temps, min_ring_samples)
    cond = np.array([conditional_reweighted_mean(samples, g, j, model, ladder, int(s))
                     if s >= 0 else math.nan for j, s in enumerate(sources)])
    # missing rings contribute zero; coverage reports the mass they carried
    combined = combine(p_hat, np.where(np.isnan(cond), 0.0, cond))
    return RingDecomposedEstimate(p_hat, cond, combined, np.asarray(sources))


def improvement(sigma_ee: float, sigma_mc: float) -> float:
    """Percentage improvement of MCS over EE; NaN when ``sigma_mc`` is 0."""
    if sigma_mc == 0:
        return math.nan
    return (sigma_ee - sigma_mc) / sigma_mc * 100.0


@dataclass(frozen=True)
class SamplerSettings:
    theta: float = 0.5
    gamma0: float = 1.0
    c: float = 0.2
    p_ee: float = 0.1
    burn_in_N: int = 1000
    s0: float = 0.1
    min_stage_factor: int = 50
    min_ring_samples: int = 25
    flatten: bool = False


def estimate_mcs(model, ladder, settings: SamplerSettings, N: int, seed, functionals,
                 proposals=None):
    """One MCS run with budget ``(K + 1) N``; returns ``{name: RingDecomposedEstimate}``."""
    run = run_mcs(model, ladder, proposals=proposals, theta=settings.theta,
                  gamma0=settings.gamma0, c=settings.c, n_steps=ladder.n_temps * N, rng=seed,
                  s0=settings.s0,
                  min_stage_steps=default_min_stage_steps(ladder, settings.min_stage_factor))
    samples = run.samples()
    p_hat = ring_probs_from_weights(run.table)
    sources = choose_sources(samples, ladder.n_rings, ladder.n_temps, settings.min_ring_samples)
    return {name: ring_decomposed_estimate(samples, FUNCTIONALS[name][1], p_hat, model, ladder,
                                           sources=sources)
            for name in functionals}


def estimate_ee(model, ladder, settings: SamplerSettings, N: int, seed, functionals,
                proposals=None):
    """One EE run, ``N`` steps per chain; returns ``{name: (ring estimate, plain chain-0 mean)}``."""
    cfg = EEConfig(p_ee=settings.p_ee, burn_in_N=settings.burn_in_N, flatten=settings.flatten)
    run = run_ladder(model, ladder, cfg, proposals, n_steps=N, rng=seed, s0=settings.s0)
    samples = run.samples()
    p_hat = ring_probs_from_samples(samples, ladder.n_rings, chain=0)
    sources = choose_sources(samples, ladder.n_rings, ladder.n_temps, settings.min_ring_samples)
    X0 = samples.x[samples.chain == 0]
    out = {}
    for name in functionals:
        g = FUNCTIONALS[name][1]
        est = ring_decomposed_estimate(samples, g, p_hat, model, ladder, sources=sources)
        out[name] = (est, float(np.mean(g(X0, model))))
    return out


def _one_replication(args):
    model, ladder, settings, sampler, N, seed, functionals, proposals = args
    if sampler == "EE":
        res = estimate_ee(model, ladder, settings, N, seed, functionals, proposals)
        return [res[f][0].combined for f in functionals], [res[f][1] for f in functionals]
    res = estimate_mcs(model, ladder, settings, N, seed, functionals, proposals)
    return [res[f].combined for f in functionals], [math.nan] * len(functionals)


@dataclass
class ReplicationResult:
    sampler: str
    N: int
    functionals: tuple
    estimates: np.ndarray
    plain: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return self.estimates.std(axis=0, ddof=1)


def replication_experiment(model, ladder, settings: SamplerSettings, sampler: str,
                           replications: int, master_seed: int = 0, N: int = 10_000,
                           n_index: int = 0, functionals=DEFAULT_FUNCTIONALS, jobs: int = 1,
                           seeds=None, proposals=None) -> ReplicationResult:
    """Run ``sampler`` ``replications`` times on independent streams.

    Replication ``r`` is seeded by ``(master_seed, n_index, r, sampler)``.
    Any failing replication propagates its exception.
    """
    if sampler not in ("EE", "MCS"):
        raise ValueError("sampler must be 'EE' or 'MCS'")
    if replications < 2:
        raise ValueError("at least two replications are needed for a standard deviation")
    functionals = tuple(functionals)
    if seeds is None:
        seeds = [replication_seed(master_seed, r, sampler, n_index) for r in range(replications)]
    tasks = [(model, ladder, settings, sampler, N, s, functionals, proposals) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_one_replication, tasks))
    else:
        rows = [_one_replication(t) for t in tasks]
    est = np.array([r[0] for r in rows])
    plain = np.array([r[1] for r in rows])
    return ReplicationResult(sampler, N, functionals, est, plain)


@dataclass
class ComparisonTable:
    """Improvement percentages, one row per ``N`` and one column per functional."""

    functionals: tuple
    rows: dict

    @property
    def labels(self) -> list[str]:
        return [FUNCTIONALS[f][0] for f in self.functionals]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N"] + self.labels)
            for N, vals in self.rows.items():
                w.writerow([N] + ["undefined" if math.isnan(v) else f"{v:.2f}" for v in vals])


def comparison_table(results_ee, results_mc) -> ComparisonTable:
    """Pair EE and MCS results by ``N`` and compute the improvement of MCS over EE."""
    ee = {r.N: r for r in results_ee}
    mc = {r.N: r for r in results_mc}
    if set(ee) != set(mc):
        raise ValueError("EE and MCS results cover different N values")
    funcs = None
    rows = {}
    for N in sorted(ee):
        a, b = ee[N], mc[N]
        if a.functionals != b.functionals:
            raise ValueError("EE and MCS results use different functionals")
        if a.estimates.shape[0] != b.estimates.shape[0]:
            raise ValueError("replication counts differ between samplers")
        funcs = a.functionals
        rows[N] = np.array([improvement(se, sm) for se, sm in zip(a.sigma, b.sigma)])
    return ComparisonTable(funcs or (), rows)


def write_raw_estimates(path, results) -> None:
    """Long-format audit table of every replication's estimates."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "sampler", "replication", "functional", "estimate", "plain_estimate"])
        for res in results:
            for r in range(res.estimates.shape[0]):
                for k, f in enumerate(res.functionals):
                    plain = res.plain[r, k]
                    w.writerow([res.N, res.sampler, r, f, repr(float(res.estimates[r, k])),
                                "" if math.isnan(plain) else repr(float(plain))])
