"""Pure-Python sampler kernels.

Line-for-line twin of ``_ckernels.pyx``.  Both consume the same pre-drawn
per-step random rows and perform floating-point operations in the same
order, so for native models the two backends produce identical traces.
Arrays passed in are updated in place exactly as the compiled kernels do.
"""

from __future__ import annotations

import bisect
import math

INF = math.inf


class KernelError(ValueError):
    pass


def _ring(levels, e, strict, counter):
    j = bisect.bisect_right(levels, e) - 1
    if j < 0:
        if strict:
            raise KernelError(f"energy {e} below lowest level {levels[0]}")
        counter[0] += 1
        j = 0
    return j


def _check_energy(h, where):
    if h != h or h == -INF:
        raise KernelError(f"invalid energy {h!r} at {where!r}")


def mcs_advance(model, props, levels, temps, dcum, ldelta, theta, gamma0, c,
                min_stage, strict, x, istate, log_phi, occ, U, Z, start, n,
                stop_on_stage, rec):
    """Run up to ``n`` joint (x, temperature) steps from row ``start`` of ``U``/``Z``.

    ``istate`` holds ``[temp, stage, stage_steps, clamps, steps]``.  ``rec`` is
    ``None`` or ``(offset, rx, rtemp, rring, racc, rstage, rlg)``.  Returns the
    number of steps performed; stops early after a stage advance when
    ``stop_on_stage`` is true.
    """
    levels = list(levels)
    temps = list(temps)
    dcum = dcum.tolist()
    ldelta = ldelta.tolist()
    lphi = log_phi.tolist()
    oc = occ.tolist()
    Ul = U[start:start + n].tolist()
    Zl = Z[start:start + n].tolist()
    energy = model.energy
    propose = props.propose
    log_q = props.log_q
    symmetric = getattr(props, "symmetric", False)
    counter = [int(istate[3])]
    i = int(istate[0])
    stage = int(istate[1])
    stage_steps = int(istate[2])
    nt = len(temps)
    nr = len(levels)
    ncells = nt * nr
    xs = tuple(float(v) for v in x)
    hx = energy(xs)
    _check_energy(hx, xs)
    if hx == INF:
        raise KernelError("current state outside the support")
    jx = _ring(levels, hx, strict, [0])
    gamma = (1.0 + gamma0) ** (1.0 / (stage + 1)) - 1.0
    log_inc = math.log1p(gamma)
    log_gamma = math.log(gamma) if gamma > 0.0 else -math.inf
    if rec is not None:
        off, rx, rtemp, rring, racc, rstage, rlg = rec
        bx, bt, br, ba, bs, bl = [], [], [], [], [], []
    done = 0
    for t in range(n):
        u_coin, u_prop, u_acc = Ul[t]
        if u_coin < theta:
            j = bisect.bisect_right(dcum[i], u_prop)
            lr = (-hx / temps[j]) + lphi[i][jx] - (-hx / temps[i]) - lphi[j][jx] \
                + (ldelta[j][i] - ldelta[i][j])
            acc = lr >= 0.0 or u_acc < math.exp(lr)
            if acc:
                i = j
        else:
            y = propose(i, xs, Zl[t], u_prop)
            hy = energy(y)
            _check_energy(hy, y)
            acc = False
            if hy != INF:
                jy = _ring(levels, hy, strict, counter)
                if symmetric:
                    lr = (-hy / temps[i]) + lphi[i][jx] - (-hx / temps[i]) - lphi[i][jy]
                else:
                    lr = (-hy / temps[i]) + lphi[i][jx] + log_q(i, y, xs) \
                        - (-hx / temps[i]) - lphi[i][jy] - log_q(i, xs, y)
                acc = lr >= 0.0 or u_acc < math.exp(lr)
                if acc:
                    xs, hx, jx = y, hy, jy
        lphi[i][jx] += log_inc
        oc[i][jx] += 1
        stage_steps += 1
        done += 1
        if rec is not None:
            bx.append(xs)
            bt.append(i)
            br.append(jx)
            ba.append(1 if acc else 0)
            bs.append(stage)
            bl.append(log_gamma)
        if stage_steps >= min_stage:
            m = oc[0][0]
            for row in oc:
                for v in row:
                    if v < m:
                        m = v
            if m >= c * stage_steps / ncells:
                stage += 1
                stage_steps = 0
                oc = [[0] * nr for _ in range(nt)]
                gamma = (1.0 + gamma0) ** (1.0 / (stage + 1)) - 1.0
                log_inc = math.log1p(gamma)
                log_gamma = math.log(gamma) if gamma > 0.0 else -math.inf
                if stop_on_stage:
                    break
    x[:] = xs
    istate[0] = i
    istate[1] = stage
    istate[2] = stage_steps
    istate[3] = counter[0]
    istate[4] += done
    log_phi[:, :] = lphi
    occ[:, :] = oc
    if rec is not None and done:
        rx[off:off + done] = bx
        rtemp[off:off + done] = bt
        rring[off:off + done] = br
        racc[off:off + done] = ba
        rstage[off:off + done] = bs
        rlg[off:off + done] = bl
    return done


def _ee_one(c, K, xs, hx, jx, u, z, energy, props, levels, temps, floors, p_ee,
            strict, counter, buf_next, hx_next, hh_next):
    u_coin, u_pick, u_prop, u_acc = u
    Tc = temps[c]
    if c < K and u_coin < p_ee:
        L = len(buf_next[jx])
        if L > 0:
            k = int(u_pick * L)
            if k >= L:
                k = L - 1
            idx = buf_next[jx][k]
            y = hx_next[idx]
            hy = hh_next[idx]
            Tn = temps[c + 1]
            lr = (max(hx, floors[c]) - max(hy, floors[c])) / Tc \
                + (max(hy, floors[c + 1]) - max(hx, floors[c + 1])) / Tn
            if lr >= 0.0 or u_acc < math.exp(lr):
                return y, hy, jx, 3
            return xs, hx, jx, 2
    y = props.propose(c, xs, z, u_prop)
    hy = energy(y)
    _check_energy(hy, y)
    if hy == INF:
        return xs, hx, jx, 0
    jy = _ring(levels, hy, strict, counter)
    lr = (max(hx, floors[c]) - max(hy, floors[c])) / Tc
    if not props.symmetric:
        lr = lr + props.log_q(c, y, xs) - props.log_q(c, xs, y)
    if lr >= 0.0 or u_acc < math.exp(lr):
        return y, hy, jy, 1
    return xs, hx, jx, 0


def ee_advance(model, props, levels, temps, floors, p_ee, strict, n_steps, offsets,
               U, Z, x0, hist_x, hist_h, hist_ring, hist_kind, buf_idx, buf_len):
    """Run the whole equi-energy ladder.

    Chain ``c`` starts at tick ``offsets[c]`` and performs ``n_steps[c]`` steps;
    at each tick the hotter chains move first.  Chain ``c`` at step ``k``
    consumes row ``k`` of ``U[c]`` (coin, pick, proposal, accept) and ``Z[c]``.
    Returns the number of clamped ring evaluations.
    """
    levels = list(levels)
    temps = list(temps)
    floors = list(floors)
    nc = len(n_steps)
    K = nc - 1
    nr = len(levels)
    energy = model.energy
    counter = [0]
    Ul = [u.tolist() for u in U]
    Zl = [z.tolist() for z in Z]
    hxs = [[] for _ in range(nc)]
    hhs = [[] for _ in range(nc)]
    hrs = [[] for _ in range(nc)]
    hks = [[] for _ in range(nc)]
    bufs = [[[] for _ in range(nr)] for _ in range(nc)]
    cur = []
    for c in range(nc):
        xs = tuple(float(v) for v in x0[c])
        h = energy(xs)
        _check_energy(h, xs)
        if h == INF:
            raise KernelError("initial state outside the support")
        cur.append((xs, h, _ring(levels, h, strict, [0])))
    counts = [0] * nc
    end = max(offsets[c] + n_steps[c] for c in range(nc))
    for tick in range(end):
        for c in range(K, -1, -1):
            k = counts[c]
            if tick < offsets[c] or k >= n_steps[c]:
                continue
            xs, h, j = cur[c]
            if c < K:
                nxt = _ee_one(c, K, xs, h, j, Ul[c][k], Zl[c][k], energy, props, levels,
                              temps, floors, p_ee, strict, counter, bufs[c + 1],
                              hxs[c + 1], hhs[c + 1])
            else:
                nxt = _ee_one(c, K, xs, h, j, Ul[c][k], Zl[c][k], energy, props, levels,
                              temps, floors, p_ee, strict, counter, None, None, None)
            y, hy, jy, kind = nxt
            cur[c] = (y, hy, jy)
            bufs[c][jy].append(k)
            hxs[c].append(y)
            hhs[c].append(hy)
            hrs[c].append(jy)
            hks[c].append(kind)
            counts[c] = k + 1
    for c in range(nc):
        m = counts[c]
        if m:
            hist_x[c, :m] = hxs[c]
            hist_h[c, :m] = hhs[c]
            hist_ring[c, :m] = hrs[c]
            hist_kind[c, :m] = hks[c]
        for j in range(nr):
            L = len(bufs[c][j])
            buf_len[c, j] = L
            if L:
                buf_idx[c, j, :L] = bufs[c][j]
    return counter[0]


def ee_replay(model, props, levels, temps, floors, p_ee, strict, c, K, x, U, Z,
              next_x, next_h, next_buf, next_len, out_x, out_kind):
    """Independent single EE steps of chain ``c`` from the fixed point ``x``.

    The hotter chain's history is frozen: ``next_buf[j, :next_len[j]]`` index
    rows of ``next_x``/``next_h``.  Row ``t`` of ``U``/``Z`` drives replay ``t``.
    """
    levels = list(levels)
    temps = list(temps)
    floors = list(floors)
    energy = model.energy
    counter = [0]
    xs = tuple(float(v) for v in x)
    hx = energy(xs)
    jx = _ring(levels, hx, strict, counter)
    bufs = [next_buf[j, :next_len[j]].tolist() for j in range(len(levels))]
    nx = [tuple(r) for r in next_x.tolist()]
    nh = next_h.tolist()
    Ul = U.tolist()
    Zl = Z.tolist()
    ys, ks = [], []
    for t in range(len(Ul)):
        y, hy, jy, kind = _ee_one(c, K, xs, hx, jx, Ul[t], Zl[t], energy, props, levels,
                                  temps, floors, p_ee, strict, counter, bufs, nx, nh)
        ys.append(y)
        ks.append(kind)
    if ys:
        out_x[:] = ys
        out_kind[:] = ks
    return counter[0]
