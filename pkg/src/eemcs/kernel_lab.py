"""Finite-state oracles for the ergodicity arguments behind the EE sampler.

Kernels are plain ``(S, S)`` row-stochastic numpy arrays and distributions
are length-``S`` probability vectors.  On a finite space setwise and uniform
convergence coincide, so every limit statement here can be checked exactly
with matrix algebra or by Monte Carlo against an explicit kernel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .proposals import inverse_cdf_table
from .target import FiniteModel, LadderConfig, ring_indices

ROW_TOL = 1e-12
VACUOUS_EPS = 1e-10
ROUNDOFF_FLOOR = 1e-12


class KernelLabError(ValueError):
    pass


def check_kernel(P, name: str = "kernel") -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise KernelLabError(f"{name} must be a square matrix, got shape {P.shape}")
    if np.any(P < 0):
        raise KernelLabError(f"{name} has negative entries")
    err = np.abs(P.sum(axis=1) - 1.0).max()
    if err > ROW_TOL * max(1, P.shape[0]):
        raise KernelLabError(f"{name} rows do not sum to 1 (max error {err:.3e})")
    return P


def check_distribution(v, name: str = "distribution") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or np.any(v < 0) or abs(v.sum() - 1.0) > ROW_TOL * max(1, v.size):
        raise KernelLabError(f"{name} is not a probability vector")
    return v


def kernel_distance(P1, P2) -> float:
    """``sup_{|f| <= 1} sup_x |P1 f(x) - P2 f(x)|``, i.e. the largest row L1 difference."""
    P1 = np.asarray(P1, dtype=float)
    P2 = np.asarray(P2, dtype=float)
    if P1.shape != P2.shape:
        raise KernelLabError(f"size mismatch: {P1.shape} vs {P2.shape}")
    return float(np.abs(P1 - P2).sum(axis=1).max())


def rank_one(pi) -> np.ndarray:
    """The kernel ``Pi(x, .) = pi`` for every ``x``."""
    pi = np.asarray(pi, dtype=float)
    return np.tile(pi, (pi.size, 1))


def period(P) -> int:
    """Period of an irreducible kernel (gcd of cycle lengths through the transition graph)."""
    A = np.asarray(P) > 0
    order, pred = breadth_first_order(A.astype(float), 0, directed=True)
    level = np.full(A.shape[0], -1)
    for v in order:
        level[v] = 0 if v == 0 else level[pred[v]] + 1
    g = 0
    for u, v in zip(*np.nonzero(A)):
        g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g


def stationary(P) -> np.ndarray:
    """Unique invariant distribution by a linear solve with a normalization row.

    Raises for reducible or periodic kernels; a periodic chain does have a
    unique invariant law but its powers never converge to it, so every
    downstream check would be meaningless.
    """
    P = check_kernel(P)
    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise KernelLabError(f"kernel is reducible ({n_comp} communicating classes)")
    d = period(P)
    if d != 1:
        raise KernelLabError(f"kernel is periodic with period {d}")
    return _solve_stationary(P)


def _solve_stationary(P) -> np.ndarray:
    S = P.shape[0]
    A = P.T - np.eye(S)
    A[-1, :] = 1.0
    b = np.zeros(S)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    # one step of iterative refinement keeps the residual at roundoff level
    r = b - A @ pi
    pi = pi + np.linalg.solve(A, r)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_power(P, tol: float = 1e-15, max_iter: int = 1_000_000) -> np.ndarray:
    """Invariant distribution by power iteration from the uniform vector (cross-check)."""
    P = check_kernel(P)
    v = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        w = v @ P
        if np.abs(w - v).sum() <= tol:
            return w / w.sum()
        v = w
    raise KernelLabError("power iteration did not converge")


@dataclass
class MinorizationCertificate:
    m: int
    epsilon: float
    nu: np.ndarray

    @property
    def vacuous(self) -> bool:
        return self.epsilon < VACUOUS_EPS

    def holds(self, P, atol: float = 1e-14) -> bool:
        Pm = np.linalg.matrix_power(np.asarray(P, dtype=float), self.m)
        return bool(np.all(Pm >= self.epsilon * self.nu[None, :] - atol))


def minorization_certificate(P, m: int = 1, nu="auto") -> MinorizationCertificate:
    """Largest ``epsilon`` with ``P^m(x, .) >= epsilon nu(.)`` for every ``x``.

    With ``nu="auto"`` the measure is chosen to maximize ``epsilon``: it is
    proportional to the column minima of ``P^m``.
    """
    if m < 1:
        raise KernelLabError("m must be at least 1")
    P = check_kernel(P)
    Pm = np.linalg.matrix_power(P, m)
    if isinstance(nu, str):
        if nu != "auto":
            raise KernelLabError("nu must be a distribution or 'auto'")
        colmin = Pm.min(axis=0)
        eps = float(colmin.sum())
        nu_v = colmin / eps if eps > 0 else np.full(P.shape[0], 1.0 / P.shape[0])
        return MinorizationCertificate(m, eps, nu_v)
    nu_v = check_distribution(nu, "nu")
    if nu_v.size != P.shape[0]:
        raise KernelLabError("nu has the wrong length")
    pos = nu_v > 0
    eps = float((Pm[:, pos] / nu_v[pos]).min())
    return MinorizationCertificate(m, min(eps, 1.0), nu_v)


@dataclass
class GeometricRateReport:
    rho: float
    distances: np.ndarray
    C: float
    c_max: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.C) and self.C <= self.c_max)


def geometric_rate_check(P, rho: float, horizon: int = 50, pi=None,
                         c_max: float = 2.0) -> GeometricRateReport:
    """``d_n = ||P^n - Pi||`` for ``n = 1..horizon`` and ``C = max_n d_n / rho^n``.

    Distances at roundoff level (below ``1e-12``) carry no information about
    the rate and are left out of ``C``.
    """
    if not 0 < rho < 1:
        raise KernelLabError("rho must lie in (0, 1)")
    P = check_kernel(P)
    if pi is None:
        pi = stationary(P)
    Pi = rank_one(pi)
    d = np.empty(horizon)
    Pn = np.eye(P.shape[0])
    for n in range(horizon):
        Pn = Pn @ P
        d[n] = kernel_distance(Pn, Pi)
    n = np.arange(1, horizon + 1)
    keep = d > ROUNDOFF_FLOOR
    C = float((d[keep] / rho ** n[keep]).max()) if keep.any() else 0.0
    return GeometricRateReport(rho, d, C, c_max)


def tempered(h, T: float) -> np.ndarray:
    """Normalized ``exp(-h / T)`` on a finite space."""
    lw = -np.asarray(h, dtype=float) / T
    w = np.exp(lw - lw.max())
    return w / w.sum()


def mh_kernel(h, T: float, Q) -> np.ndarray:
    """Metropolis-Hastings kernel for ``exp(-h/T)`` with proposal matrix ``Q``."""
    h = np.asarray(h, dtype=float)
    Q = check_kernel(Q, "proposal")
    S = h.size
    both = (Q > 0) & (Q.T > 0)
    logQ = np.log(np.where(both, Q, 1.0))
    lr = (h[:, None] - h[None, :]) / T + logQ.T - logQ
    A = np.where(both, np.exp(np.minimum(lr, 0.0)), 0.0)
    P = Q * A
    P[np.arange(S), np.arange(S)] = 0.0
    P[np.arange(S), np.arange(S)] = 1.0 - P.sum(axis=1)
    return P


def mcs_tail_kernel(h, T: float, Q, log_phi_row, rings) -> np.ndarray:
    """Spatial (tails) branch of the multicanonical sampler at temperature ``T`` with frozen weights.

    Equals the MH kernel for the weighted target ``exp(-h/T) / phi(I(x))``.
    """
    h = np.asarray(h, dtype=float)
    lp = np.asarray(log_phi_row, dtype=float)[np.asarray(rings)]
    return mh_kernel(h / T + lp, 1.0, Q)


def _proposal_matrix(proposal, i: int) -> np.ndarray:
    if hasattr(proposal, "matrix"):
        return proposal.matrix(i)
    Q = np.asarray(proposal, dtype=float)
    return Q[i] if Q.ndim == 3 else Q


def ee_jump_kernel(model: FiniteModel, ladder: LadderConfig, i: int, j: int) -> np.ndarray:
    """``T_EE^(i,j)``: MH kernel for ``pi_i`` with proposal ``pi_{i+1}`` restricted to ring ``j``.

    Rows of states outside ring ``j`` are left as the identity; the limit
    kernel only uses the rows of ``D_j``.
    """
    h = model.table
    rings = ring_indices(ladder, h)
    hot = tempered(h, ladder.temperatures[i + 1]) * (rings == j)
    mass = hot.sum()
    if mass <= 0:
        raise KernelLabError(f"ring {j} has zero mass at temperature {i + 1}; "
                             "the jump kernel is undefined")
    prop = hot / mass
    b = 1.0 / ladder.temperatures[i] - 1.0 / ladder.temperatures[i + 1]
    alpha = np.exp(np.minimum((h[:, None] - h[None, :]) * b, 0.0))
    T = prop[None, :] * alpha
    S = h.size
    T[np.arange(S), np.arange(S)] = 0.0
    T[np.arange(S), np.arange(S)] = 1.0 - T.sum(axis=1)
    return T


def build_ee_limit_kernel(model: FiniteModel, ladder: LadderConfig, p_ee: float, i: int,
                          proposal=None) -> np.ndarray:
    """``S^(i) = (1 - p_ee) T_MH^(i) + p_ee sum_j T_EE^(i,j) 1_{D_j}``.

    ``proposal`` is the MH proposal matrix (or a :class:`MatrixProposal`);
    the default is uniform over all states.  The hottest chain has no jumps.
    """
    h = model.table
    S = h.size
    Q = np.full((S, S), 1.0 / S) if proposal is None else _proposal_matrix(proposal, i)
    T_mh = mh_kernel(h, ladder.temperatures[i], Q)
    if i == ladder.n_temps - 1 or p_ee == 0:
        return T_mh
    rings = ring_indices(ladder, h)
    jump = np.zeros((S, S))
    for j in np.unique(rings):
        rows = rings == j
        jump[rows] = ee_jump_kernel(model, ladder, i, int(j))[rows]
    return (1.0 - p_ee) * T_mh + p_ee * jump


def nonhomogeneous_product(mu, kernels: Iterable) -> np.ndarray:
    """Trajectory ``mu, mu P_0, mu P_0 P_1, ...`` as rows of an array."""
    v = check_distribution(mu, "mu")
    out = [v]
    for P in kernels:
        P = np.asarray(P, dtype=float)
        if P.shape != (v.size, v.size):
            raise KernelLabError("kernel size does not match the distribution")
        v = v @ P
        out.append(v)
    return np.array(out)


def interpolated_sequence(P, Q, n: int) -> list[np.ndarray]:
    """``P_n = (1 - 1/n) P + (1/n) Q`` for ``n = 1..n``, with ``P_0 = Q``."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return [Q] + [(1.0 - 1.0 / k) * P + (1.0 / k) * Q for k in range(1, n + 1)]


@dataclass
class ProductConditionsReport:
    limit_distance: np.ndarray
    epsilons: np.ndarray
    step_distances: np.ndarray
    lam: float
    C_head: float
    C_tail: float
    stationary_gaps: np.ndarray
    stationary_caps: np.ndarray

    @property
    def setwise(self) -> bool:
        """Condition (i): ``P_n -> P`` entrywise (the tail distance shrinks to roundoff or below the head)."""
        d = self.limit_distance
        return bool(d[-1] <= 1e-12 or d[-1] < d[: max(1, len(d) // 10)].max())

    @property
    def uniform_minorization(self) -> bool:
        """Condition (ii): one-step minorization with an ``epsilon`` bounded away from 0."""
        return bool(self.epsilons.min() >= VACUOUS_EPS)

    @property
    def polynomial_decay(self) -> bool:
        """Condition (iii): ``n^lam ||P_n - P_{n-1}||`` does not grow along the sequence."""
        return bool(np.isfinite(self.C_tail) and self.C_tail <= self.C_head * (1 + 1e-9) + 1e-15)

    @property
    def stationary_bound(self) -> bool:
        return bool(np.all(self.stationary_gaps <= self.stationary_caps + 1e-12))

    @property
    def passed(self) -> bool:
        return self.setwise and self.uniform_minorization and self.polynomial_decay \
            and self.stationary_bound


def check_product_conditions(kernels: Sequence, P_limit, lam: float) -> ProductConditionsReport:
    """Check conditions (i)-(iii) of the nonhomogeneous convergence theorem.

    Also checks ``||pi_n - pi_{n-1}|| <= ||P_n - P_{n-1}|| / (1 - rho)`` with
    ``rho = 1 - min_n epsilon_n`` whenever every ``P_n`` is minorized.
    """
    ks = [np.asarray(P, dtype=float) for P in kernels]
    limit = np.array([kernel_distance(P, P_limit) for P in ks])
    eps = np.array([minorization_certificate(P, 1).epsilon for P in ks])
    steps = np.array([kernel_distance(ks[n], ks[n - 1]) for n in range(1, len(ks))])
    n = np.arange(1, len(ks), dtype=float)
    scaled = steps * n ** lam
    half = max(1, len(scaled) // 2)
    C_head = float(scaled[:half].max()) if len(scaled) else 0.0
    C_tail = float(scaled[half:].max()) if len(scaled) > half else C_head
    gaps = np.zeros(0)
    caps = np.zeros(0)
    if eps.min() >= VACUOUS_EPS:
        rho = 1.0 - eps.min()
        # a positive one-step minorization already rules out reducible or periodic kernels
        pis = [_solve_stationary(P) for P in ks]
        gaps = np.array([np.abs(pis[k] - pis[k - 1]).sum() for k in range(1, len(ks))])
        caps = steps / (1.0 - rho)
    return ProductConditionsReport(limit, eps, steps, lam, C_head, C_tail, gaps, caps)


def integral_convergence(fs: Sequence, mus: Sequence, f, mu) -> np.ndarray:
    """``|int f_n dmu_n - int f dmu|`` along the sequences (finite-space sanity harness)."""
    f = np.asarray(f, dtype=float)
    target = float(f @ np.asarray(mu, dtype=float))
    out = []
    for fn, mn in zip(fs, mus):
        fn = np.asarray(fn, dtype=float)
        if np.abs(fn).max() > 1:
            raise KernelLabError("integrands must be bounded by 1")
        out.append(abs(float(fn @ np.asarray(mn, dtype=float)) - target))
    return np.array(out)


def simulate_chain(P, n: int, trials: int, rng, x0=None) -> np.ndarray:
    """``trials`` independent paths ``X_0..X_n`` of the kernel ``P`` (shape ``(trials, n + 1)``)."""
    P = check_kernel(P)
    rng = np.random.default_rng(rng)
    cum = inverse_cdf_table(P)
    if x0 is None:
        x = rng.choice(P.shape[0], size=trials, p=stationary(P))
    else:
        x = np.full(trials, int(x0))
    out = np.empty((trials, n + 1), dtype=np.int64)
    out[:, 0] = x
    for k in range(1, n + 1):
        u = rng.random(trials)
        x = (u[:, None] >= cum[x]).sum(axis=1)
        out[:, k] = x
    return out


def occupation_delta(T, pi, ring_mask, p_ee: float) -> float:
    """``delta = (1 - p_ee) epsilon pi(D_j)`` with ``epsilon`` the certificate of ``T`` against ``pi``."""
    cert = minorization_certificate(T, 1, nu=pi)
    return (1.0 - p_ee) * cert.epsilon * float(np.asarray(pi)[np.asarray(ring_mask, bool)].sum())


@dataclass
class AzumaReport:
    n: int
    epsilon: float
    delta: float
    trials: int
    tail: float
    bound: float
    allowance: float
    occupation: float

    @property
    def union_bound(self) -> float:
        return self.n * self.bound

    @property
    def occupation_cap(self) -> float:
        return 1.0 / (self.delta - self.epsilon)

    @property
    def tail_ok(self) -> bool:
        return self.tail <= self.bound + self.allowance

    def occupation_ok(self, slack: float = 0.1) -> bool:
        return bool(self.occupation <= self.occupation_cap + slack)


def azuma_tail_check(delta: float, epsilon: float, n: int, trials: int, kernel, ring_mask,
                     rng=0, x0=None) -> AzumaReport:
    """Monte Carlo check of Azuma's bound for the ring-occupation martingale.

    ``M_n = sum_k K(X_{k-1}, D_j) - 1_{D_j}(X_k)`` has increments bounded by
    one, so ``Pr[M_n >= n epsilon] <= exp(-n epsilon^2 / 2)``.  Since
    ``K(x, D_j) >= delta`` for every ``x``, on the complementary event the
    occupation count is at least ``n (delta - epsilon)``.
    """
    if not 0 < epsilon < delta:
        raise KernelLabError(f"need 0 < epsilon < delta (epsilon={epsilon}, delta={delta})")
    K = check_kernel(kernel)
    mask = np.asarray(ring_mask, dtype=bool)
    KD = K[:, mask].sum(axis=1)
    if KD.min() < delta - 1e-12:
        raise KernelLabError(f"K(x, D_j) drops to {KD.min():.4g} < delta = {delta:.4g}")
    paths = simulate_chain(K, n, trials, rng, x0)
    hits = mask[paths[:, 1:]]
    M = KD[paths[:, :-1]].sum(axis=1) - hits.sum(axis=1)
    tail = float(np.mean(M >= n * epsilon))
    bound = math.exp(-n * epsilon ** 2 / 2)
    allowance = 3.0 * math.sqrt(bound * (1 - bound) / trials)
    counts = hits.sum(axis=1)
    with np.errstate(divide="ignore"):
        occ = float(np.mean(n / counts))
    return AzumaReport(n, epsilon, delta, trials, tail, bound, allowance, occ)


# --- scenarios -------------------------------------------------------------

SIX_STATE_ENERGIES = (0.0, 0.4, 0.9, 1.3, 1.8, 2.6)


def six_state_model():
    """Six states, two rings split at energy 1.2, temperatures 1 and 2.5, uniform proposal."""
    model = FiniteModel(SIX_STATE_ENERGIES)
    ladder = LadderConfig((0.0, 1.2), (1.0, 2.5))
    return model, ladder, np.full((6, 6), 1.0 / 6)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class ScenarioReport:
    scenario: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, value, threshold, detail=""):
        self.checks.append(CheckResult(name, bool(passed), float(value), float(threshold), detail))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "check", "passed", "value", "threshold", "detail"])
            for c in self.checks:
                w.writerow([self.scenario, c.name, int(c.passed), repr(c.value),
                            repr(c.threshold), c.detail])

    def summary(self) -> str:
        return "\n".join(c.line() for c in self.checks)


def scenario_limit_kernel(p_ee: float = 0.1, horizon: int = 60, **_) -> ScenarioReport:
    """Stationarity, inherited minorization and geometric rate of the limit kernels."""
    model, ladder, Q = six_state_model()
    rep = ScenarioReport("limit-kernel")
    for i in range(ladder.n_temps):
        pi = tempered(model.table, ladder.temperatures[i])
        S = build_ee_limit_kernel(model, ladder, p_ee, i, Q)
        res = np.abs(pi @ S - pi).sum()
        rep.add(f"stationary[{i}]", res <= 1e-12, res, 1e-12, f"||pi S - pi||_1 = {res:.3e}")
        eps_mh = minorization_certificate(mh_kernel(model.table, ladder.temperatures[i], Q)).epsilon
        jumps = i < ladder.n_temps - 1
        floor = (1 - p_ee) * eps_mh if jumps else eps_mh
        eps_s = minorization_certificate(S).epsilon
        rep.add(f"minorization[{i}]", eps_s >= floor - 1e-15, eps_s, floor,
                f"epsilon_S = {eps_s:.6f} >= {floor:.6f}")
        rho = 1 - floor
        g = geometric_rate_check(S, rho, horizon, pi)
        rep.add(f"geometric_rate[{i}]", g.passed, g.C, g.c_max, f"rho = {rho:.6f}, C = {g.C:.4f}")
    return rep


def scenario_product_convergence(n: int = 10_000, lam: float = 2.0, tol: float = 1e-6,
                                 **_) -> ScenarioReport:
    """``P_n = (1 - 1/n) P + (1/n) Q`` with ``P`` and ``Q`` sharing one invariant law."""
    model, ladder, Qu = six_state_model()
    P = mh_kernel(model.table, 1.0, Qu)
    idx = np.arange(6)
    near = 1.0 / (1.0 + np.abs(idx[:, None] - idx[None, :]))
    Q = mh_kernel(model.table, 1.0, near / near.sum(axis=1, keepdims=True))
    pi = stationary(P)
    ks = interpolated_sequence(P, Q, n)
    rep = ScenarioReport("product-convergence")
    chk = check_product_conditions(ks, P, lam)
    rep.add("condition_i", chk.setwise, chk.limit_distance[-1], 0.0,
            f"||P_n - P|| = {chk.limit_distance[-1]:.3e}")
    rep.add("condition_ii", chk.uniform_minorization, chk.epsilons.min(), VACUOUS_EPS,
            f"min epsilon = {chk.epsilons.min():.4f}")
    rep.add("condition_iii", chk.polynomial_decay, chk.C_tail, chk.C_head,
            f"lambda = {lam}, C_head = {chk.C_head:.4f}, C_tail = {chk.C_tail:.4f}")
    rep.add("stationary_shift", chk.stationary_bound,
            float((chk.stationary_gaps - chk.stationary_caps).max(initial=0.0)), 0.0,
            "||pi_n - pi_{n-1}|| <= ||P_n - P_{n-1}|| / (1 - rho)")
    traj = nonhomogeneous_product(np.eye(6)[5], ks)
    dist = np.abs(traj[-1] - pi).sum()
    rep.add("product_limit", dist < tol, dist, tol, f"||mu P_0..P_n - pi||_1 = {dist:.3e}")
    return rep


def setwise_errors(lengths=(100, 10_000), replays: int = 100_000, p_ee: float = 0.2,
                   i: int = 0, seed: int = 0, backend=None) -> dict:
    """Max cell error of the empirical one-step EE kernel against the limit, per buffer length."""
    from .ee import EEConfig, replay_jumps, run_ladder
    from .proposals import MatrixProposal
    model, ladder, Q = six_state_model()
    prop = MatrixProposal(Q)
    cfg = EEConfig(p_ee=p_ee)
    S = build_ee_limit_kernel(model, ladder, p_ee, i, Q)
    run = run_ladder(model, ladder, cfg, prop, n_steps=max(lengths), rng=seed, x0=[[0.0], [0.0]],
                     backend=backend)
    out = {}
    for L in lengths:
        buf = run.buffers.truncated(i + 1, L)
        emp = np.zeros_like(S)
        for x in range(6):
            ss = np.random.SeedSequence([seed, L, x])
            xs, _ = replay_jumps(i, [float(x)], replays, buf, model, ladder, cfg, prop, ss,
                                 backend=backend)
            emp[x] = np.bincount(xs[:, 0].astype(np.int64), minlength=6) / replays
        out[L] = float(np.abs(emp - S).max())
    return out


def scenario_setwise(lengths=(100, 10_000), replays: int = 100_000, tol: float = 0.01,
                     p_ee: float = 0.2, seed: int = 0, **_) -> ScenarioReport:
    errs = setwise_errors(lengths, replays, p_ee=p_ee, seed=seed)
    rep = ScenarioReport("setwise")
    short, long_ = min(errs), max(errs)
    rep.add("long_buffer", errs[long_] < tol, errs[long_], tol,
            f"max cell error {errs[long_]:.4f} at buffer length {long_}")
    rep.add("improves", errs[long_] < errs[short], errs[long_], errs[short],
            f"{errs[long_]:.4f} < {errs[short]:.4f} (length {short})")
    return rep


def occupation_chain(p_ee: float = 0.1, mix: float = 0.9):
    """Chain whose target ring has ``delta > 1/2``.

    ``T = mix Pi + (1 - mix) T_MH`` at the hotter temperature of the six-state
    model, perturbed by a jump component of weight ``p_ee``.
    """
    model, ladder, Q = six_state_model()
    h = model.table
    pi = tempered(h, ladder.temperatures[1])
    T = mix * rank_one(pi) + (1 - mix) * mh_kernel(h, ladder.temperatures[1], Q)
    K = (1 - p_ee) * T + p_ee * build_ee_limit_kernel(model, ladder, 1.0, 0, Q)
    mask = ring_indices(ladder, h) == 0
    return K, mask, occupation_delta(T, pi, mask, p_ee)


def scenario_occupation(epsilon: float = 0.5, n_tail: int = 100, tail_trials: int = 100_000,
                        ns=(100, 1000, 10_000), occ_trials: int = 1000, seed: int = 0,
                        **_) -> ScenarioReport:
    K, mask, delta = occupation_chain()
    rep = ScenarioReport("occupation")
    r = azuma_tail_check(delta, epsilon, n_tail, tail_trials, K, mask, rng=seed)
    rep.add("azuma_tail", r.tail_ok, r.tail, r.bound + r.allowance,
            f"Pr[M_n >= n eps] = {r.tail:.2e} vs {r.bound:.2e} + {r.allowance:.2e}")
    for k, n in enumerate(ns):
        o = azuma_tail_check(delta, epsilon, n, occ_trials, K, mask, rng=[seed, k])
        rep.add(f"occupation[n={n}]", o.occupation_ok(), o.occupation, o.occupation_cap + 0.1,
                f"E[n / sum 1_D] = {o.occupation:.4f}, cap {o.occupation_cap:.4f}")
    return rep


def scenario_custom(kernel_file=None, m: int = 1, horizon: int = 60, **_) -> ScenarioReport:
    """Stationary law, minorization and geometric rate of a kernel read from a text file."""
    if kernel_file is None:
        raise KernelLabError("the custom scenario needs kernel_file")
    P = check_kernel(np.loadtxt(kernel_file, ndmin=2), str(kernel_file))
    rep = ScenarioReport("custom")
    pi = stationary(P)
    res = np.abs(pi @ P - pi).sum()
    rep.add("stationary", res <= 1e-12, res, 1e-12, f"||pi P - pi||_1 = {res:.3e}")
    agree = np.abs(pi - stationary_power(P)).sum()
    rep.add("power_iteration", agree <= 1e-10, agree, 1e-10, f"solve vs power = {agree:.3e}")
    cert = minorization_certificate(P, m)
    rep.add("minorization", not cert.vacuous, cert.epsilon, VACUOUS_EPS,
            f"m = {m}, epsilon = {cert.epsilon:.6g}")
    if m == 1 and not cert.vacuous and cert.epsilon < 1:
        g = geometric_rate_check(P, 1 - cert.epsilon, horizon, pi)
        rep.add("geometric_rate", g.passed, g.C, g.c_max, f"C = {g.C:.4f}")
    return rep


SCENARIOS: dict[str, Callable[..., ScenarioReport]] = {
    "limit-kernel": scenario_limit_kernel,
    "product-convergence": scenario_product_convergence,
    "setwise": scenario_setwise,
    "occupation": scenario_occupation,
    "custom": scenario_custom,
}


def run_scenario(name: str, **params) -> ScenarioReport:
    if name not in SCENARIOS:
        raise KernelLabError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    return SCENARIOS[name](**params)
