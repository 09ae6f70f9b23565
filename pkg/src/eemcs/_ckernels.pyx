# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampler kernels; see ``_kernels_py`` for the reference semantics.

Only built-in energies (mixture, double well, table) and proposals
(Gaussian random walk, matrix) are supported here.  Floating-point
operations follow the pure-Python twin in the same order.
"""

from libc.math cimport exp, log, log1p, pow, INFINITY, fmax
import numpy as np
cimport numpy as cnp

cnp.import_array()

from ._kernels_py import KernelError

cdef enum:
    NATIVE_MIXTURE = 1
    NATIVE_DOUBLE_WELL = 2
    NATIVE_TABLE = 3
    PROP_GAUSS = 1
    PROP_MATRIX = 2


cdef class _Energy:
    cdef int kind, m, d
    cdef double[:, ::1] means
    cdef double[::1] logw
    cdef double[::1] table
    cdef double[::1] terms
    cdef double a, height

    def __init__(self, native, int d):
        self.kind = native[0]
        self.d = d
        if self.kind == NATIVE_MIXTURE:
            self.means = np.ascontiguousarray(native[1], dtype=np.float64)
            self.logw = np.ascontiguousarray(native[2], dtype=np.float64)
            self.a = native[3]
            self.m = self.logw.shape[0]
            self.terms = np.empty(self.m)
        elif self.kind == NATIVE_DOUBLE_WELL:
            self.height = native[1]
        elif self.kind == NATIVE_TABLE:
            self.table = np.ascontiguousarray(native[1], dtype=np.float64)
        else:
            raise ValueError(f"unknown native energy kind {self.kind}")

    cdef double eval(self, double* x):
        cdef Py_ssize_t k, l
        cdef double d2, t, mx, s
        if self.kind == NATIVE_MIXTURE:
            for k in range(self.m):
                d2 = 0.0
                for l in range(self.d):
                    t = x[l] - self.means[k, l]
                    d2 += t * t
                self.terms[k] = self.logw[k] - self.a * d2
            mx = self.terms[0]
            for k in range(1, self.m):
                if self.terms[k] > mx:
                    mx = self.terms[k]
            s = 0.0
            for k in range(self.m):
                s += exp(self.terms[k] - mx)
            return -(mx + log(s))
        elif self.kind == NATIVE_DOUBLE_WELL:
            t = x[0] * x[0] - 1.0
            return self.height * (t * t)
        else:
            return self.table[<Py_ssize_t>x[0]]


cdef class _Prop:
    cdef int kind, d, shared
    cdef double[::1] scales
    cdef double[:, :, ::1] cum
    cdef double[:, :, ::1] logq

    def __init__(self, native, int d):
        self.kind = native[0]
        self.d = d
        self.scales = np.ascontiguousarray(native[1], dtype=np.float64)
        self.cum = np.ascontiguousarray(native[2], dtype=np.float64)
        self.logq = np.ascontiguousarray(native[3], dtype=np.float64)
        self.shared = self.cum.shape[0] == 1
        if self.kind != PROP_GAUSS and self.kind != PROP_MATRIX:
            raise ValueError(f"unknown native proposal kind {self.kind}")

    cdef void propose(self, int i, double* x, double* z, double u, double* y):
        cdef Py_ssize_t l, j, q
        cdef double s
        if self.kind == PROP_GAUSS:
            s = self.scales[i]
            for l in range(self.d):
                y[l] = x[l] + s * z[l]
        else:
            q = 0 if self.shared else i
            j = 0
            while self.cum[q, <Py_ssize_t>x[0], j] <= u:
                j += 1
            y[0] = <double>j

    cdef double log_q(self, int i, double* x, double* y):
        cdef Py_ssize_t q = 0 if self.shared else i
        return self.logq[q, <Py_ssize_t>x[0], <Py_ssize_t>y[0]]


cdef inline Py_ssize_t _ring(double[::1] levels, double e):
    # -1 signals e < H_0
    cdef Py_ssize_t j = 0
    cdef Py_ssize_t nr = levels.shape[0]
    while j < nr and levels[j] <= e:
        j += 1
    return j - 1


cdef inline int _bad(double h):
    return h != h or h == -INFINITY


def mcs_advance(energy_native, prop_native, levels_, temps_, dcum_, ldelta_,
                double theta, double gamma0, double c, long min_stage, bint strict,
                double[::1] x, cnp.int64_t[::1] istate, double[:, ::1] log_phi,
                cnp.int64_t[:, ::1] occ, double[:, ::1] U, double[:, ::1] Z,
                long start, long n, bint stop_on_stage, rec):
    cdef Py_ssize_t d = x.shape[0]
    cdef _Energy en = _Energy(energy_native, d)
    cdef _Prop pr = _Prop(prop_native, d)
    cdef double[::1] levels = np.ascontiguousarray(levels_, dtype=np.float64)
    cdef double[::1] temps = np.ascontiguousarray(temps_, dtype=np.float64)
    cdef double[:, ::1] dcum = np.ascontiguousarray(dcum_, dtype=np.float64)
    cdef double[:, ::1] ldelta = np.ascontiguousarray(ldelta_, dtype=np.float64)
    cdef Py_ssize_t nt = temps.shape[0]
    cdef Py_ssize_t nr = levels.shape[0]
    cdef Py_ssize_t ncells = nt * nr
    cdef bint symmetric = pr.kind == PROP_GAUSS
    cdef double[::1] xs = np.array(x, dtype=np.float64)
    cdef double[::1] y = np.empty(d)
    cdef int i = istate[0]
    cdef long stage = istate[1]
    cdef long stage_steps = istate[2]
    cdef long clamps = istate[3]
    cdef double hx, hy, lr, gamma, log_inc, log_gamma, u_coin, u_prop, u_acc
    cdef Py_ssize_t jx, jy, j, t, row, l, a, b
    cdef long m, done = 0
    cdef bint acc, do_rec = rec is not None
    cdef long off = 0
    cdef double[:, ::1] rx
    cdef cnp.int64_t[::1] rtemp, rring, rstage
    cdef cnp.int8_t[::1] racc
    cdef double[::1] rlg
    if do_rec:
        off = rec[0]
        rx = rec[1]
        rtemp = rec[2]
        rring = rec[3]
        racc = rec[4]
        rstage = rec[5]
        rlg = rec[6]
    hx = en.eval(&xs[0])
    if _bad(hx):
        raise KernelError(f"invalid energy {hx!r}")
    if hx == INFINITY:
        raise KernelError("current state outside the support")
    jx = _ring(levels, hx)
    if jx < 0:
        if strict:
            raise KernelError(f"energy {hx} below lowest level {levels[0]}")
        jx = 0
    gamma = pow(1.0 + gamma0, 1.0 / (stage + 1)) - 1.0
    log_inc = log1p(gamma)
    log_gamma = log(gamma)
    for t in range(n):
        row = start + t
        u_coin = U[row, 0]
        u_prop = U[row, 1]
        u_acc = U[row, 2]
        if u_coin < theta:
            j = 0
            while dcum[i, j] <= u_prop:
                j += 1
            lr = (-hx / temps[j]) + log_phi[i, jx] - (-hx / temps[i]) - log_phi[j, jx] \
                + (ldelta[j, i] - ldelta[i, j])
            acc = lr >= 0.0 or u_acc < exp(lr)
            if acc:
                i = j
        else:
            pr.propose(i, &xs[0], &Z[row, 0], u_prop, &y[0])
            hy = en.eval(&y[0])
            if _bad(hy):
                raise KernelError(f"invalid energy {hy!r}")
            acc = False
            if hy != INFINITY:
                jy = _ring(levels, hy)
                if jy < 0:
                    if strict:
                        raise KernelError(f"energy {hy} below lowest level {levels[0]}")
                    clamps += 1
                    jy = 0
                if symmetric:
                    lr = (-hy / temps[i]) + log_phi[i, jx] - (-hx / temps[i]) - log_phi[i, jy]
                else:
                    lr = (-hy / temps[i]) + log_phi[i, jx] + pr.log_q(i, &y[0], &xs[0]) \
                        - (-hx / temps[i]) - log_phi[i, jy] - pr.log_q(i, &xs[0], &y[0])
                acc = lr >= 0.0 or u_acc < exp(lr)
                if acc:
                    for l in range(d):
                        xs[l] = y[l]
                    hx = hy
                    jx = jy
        log_phi[i, jx] += log_inc
        occ[i, jx] += 1
        stage_steps += 1
        done += 1
        if do_rec:
            for l in range(d):
                rx[off + t, l] = xs[l]
            rtemp[off + t] = i
            rring[off + t] = jx
            racc[off + t] = 1 if acc else 0
            rstage[off + t] = stage
            rlg[off + t] = log_gamma
        if stage_steps >= min_stage:
            m = occ[0, 0]
            for a in range(nt):
                for b in range(nr):
                    if occ[a, b] < m:
                        m = occ[a, b]
            if m >= c * stage_steps / ncells:
                stage += 1
                stage_steps = 0
                for a in range(nt):
                    for b in range(nr):
                        occ[a, b] = 0
                gamma = pow(1.0 + gamma0, 1.0 / (stage + 1)) - 1.0
                log_inc = log1p(gamma)
                log_gamma = log(gamma)
                if stop_on_stage:
                    break
    for l in range(d):
        x[l] = xs[l]
    istate[0] = i
    istate[1] = stage
    istate[2] = stage_steps
    istate[3] = clamps
    istate[4] += done
    return done


cdef class _EECtx:
    cdef _Energy en
    cdef _Prop pr
    cdef double[::1] levels, temps, floors, y
    cdef double p_ee
    cdef bint strict
    cdef long clamps
    cdef int K
    cdef Py_ssize_t d

    def __init__(self, energy_native, prop_native, levels, temps, floors, p_ee, strict, K, d):
        self.en = _Energy(energy_native, d)
        self.pr = _Prop(prop_native, d)
        self.levels = np.ascontiguousarray(levels, dtype=np.float64)
        self.temps = np.ascontiguousarray(temps, dtype=np.float64)
        self.floors = np.ascontiguousarray(floors, dtype=np.float64)
        self.p_ee = p_ee
        self.strict = strict
        self.clamps = 0
        self.K = K
        self.d = d
        self.y = np.empty(d)

    cdef int step(self, int c, double* x, double* hx, Py_ssize_t* jx,
                  double* u, double* z, double[:, ::1] nx, double[::1] nh,
                  cnp.int64_t[:, ::1] nbuf, cnp.int64_t[::1] nlen) except -1:
        """One EE step; updates x, hx, jx in place and returns the move kind."""
        cdef double Tc = self.temps[c]
        cdef double Tn, hy, lr
        cdef Py_ssize_t L, k, idx, l, jy
        cdef double* y = &self.y[0]
        if c < self.K and u[0] < self.p_ee:
            L = nlen[jx[0]]
            if L > 0:
                k = <Py_ssize_t>(u[1] * L)
                if k >= L:
                    k = L - 1
                idx = nbuf[jx[0], k]
                hy = nh[idx]
                Tn = self.temps[c + 1]
                lr = (fmax(hx[0], self.floors[c]) - fmax(hy, self.floors[c])) / Tc \
                    + (fmax(hy, self.floors[c + 1]) - fmax(hx[0], self.floors[c + 1])) / Tn
                if lr >= 0.0 or u[3] < exp(lr):
                    for l in range(self.d):
                        x[l] = nx[idx, l]
                    hx[0] = hy
                    return 3
                return 2
        self.pr.propose(c, x, z, u[2], y)
        hy = self.en.eval(y)
        if _bad(hy):
            raise KernelError(f"invalid energy {hy!r}")
        if hy == INFINITY:
            return 0
        jy = _ring(self.levels, hy)
        if jy < 0:
            if self.strict:
                raise KernelError(f"energy {hy} below lowest level {self.levels[0]}")
            self.clamps += 1
            jy = 0
        lr = (fmax(hx[0], self.floors[c]) - fmax(hy, self.floors[c])) / Tc
        if self.pr.kind != PROP_GAUSS:
            lr = lr + self.pr.log_q(c, y, x) - self.pr.log_q(c, x, y)
        if lr >= 0.0 or u[3] < exp(lr):
            for l in range(self.d):
                x[l] = y[l]
            hx[0] = hy
            jx[0] = jy
            return 1
        return 0


def ee_advance(energy_native, prop_native, levels, temps, floors, double p_ee, bint strict,
               n_steps_, offsets_, double[:, :, ::1] U, double[:, :, ::1] Z,
               double[:, ::1] x0, double[:, :, ::1] hist_x, double[:, ::1] hist_h,
               cnp.int64_t[:, ::1] hist_ring, cnp.int8_t[:, ::1] hist_kind,
               cnp.int64_t[:, :, ::1] buf_idx, cnp.int64_t[:, ::1] buf_len):
    cdef Py_ssize_t nc = x0.shape[0]
    cdef Py_ssize_t d = x0.shape[1]
    cdef int K = nc - 1
    cdef _EECtx ctx = _EECtx(energy_native, prop_native, levels, temps, floors, p_ee,
                             strict, K, d)
    cdef cnp.int64_t[::1] n_steps = np.ascontiguousarray(n_steps_, dtype=np.int64)
    cdef cnp.int64_t[::1] offsets = np.ascontiguousarray(offsets_, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = np.zeros(nc, dtype=np.int64)
    cdef double[:, ::1] cx = np.array(x0, dtype=np.float64)
    cdef double[::1] ch = np.empty(nc)
    cdef Py_ssize_t[::1] cj = np.empty(nc, dtype=np.intp)
    cdef Py_ssize_t c, k, l, jj
    cdef long tick, end = 0
    cdef int kind
    cdef double h
    for c in range(nc):
        h = ctx.en.eval(&cx[c, 0])
        if _bad(h):
            raise KernelError(f"invalid energy {h!r}")
        if h == INFINITY:
            raise KernelError("initial state outside the support")
        ch[c] = h
        jj = _ring(ctx.levels, h)
        if jj < 0:
            if strict:
                raise KernelError(f"energy {h} below lowest level {ctx.levels[0]}")
            jj = 0
        cj[c] = jj
        if offsets[c] + n_steps[c] > end:
            end = offsets[c] + n_steps[c]
    for tick in range(end):
        for c in range(K, -1, -1):
            k = counts[c]
            if tick < offsets[c] or k >= n_steps[c]:
                continue
            if c < K:
                kind = ctx.step(c, &cx[c, 0], &ch[c], &cj[c], &U[c, k, 0], &Z[c, k, 0],
                                hist_x[c + 1], hist_h[c + 1], buf_idx[c + 1], buf_len[c + 1])
            else:
                kind = ctx.step(c, &cx[c, 0], &ch[c], &cj[c], &U[c, k, 0], &Z[c, k, 0],
                                hist_x[c], hist_h[c], buf_idx[c], buf_len[c])
            jj = cj[c]
            buf_idx[c, jj, buf_len[c, jj]] = k
            buf_len[c, jj] += 1
            for l in range(d):
                hist_x[c, k, l] = cx[c, l]
            hist_h[c, k] = ch[c]
            hist_ring[c, k] = jj
            hist_kind[c, k] = kind
            counts[c] = k + 1
    return ctx.clamps


def ee_replay(energy_native, prop_native, levels, temps, floors, double p_ee, bint strict,
              int c, int K, x_, double[:, ::1] U, double[:, ::1] Z,
              double[:, ::1] next_x, double[::1] next_h, cnp.int64_t[:, ::1] next_buf,
              cnp.int64_t[::1] next_len, double[:, ::1] out_x, cnp.int8_t[::1] out_kind):
    cdef double[::1] x0 = np.array(x_, dtype=np.float64)
    cdef Py_ssize_t d = x0.shape[0]
    cdef _EECtx ctx = _EECtx(energy_native, prop_native, levels, temps, floors, p_ee,
                             strict, K, d)
    cdef double[::1] xs = np.empty(d)
    cdef double h0 = ctx.en.eval(&x0[0])
    cdef double h
    cdef Py_ssize_t j0 = _ring(ctx.levels, h0)
    cdef Py_ssize_t j, t, l
    if j0 < 0:
        if strict:
            raise KernelError(f"energy {h0} below lowest level {ctx.levels[0]}")
        ctx.clamps += 1
        j0 = 0
    for t in range(U.shape[0]):
        for l in range(d):
            xs[l] = x0[l]
        h = h0
        j = j0
        out_kind[t] = ctx.step(c, &xs[0], &h, &j, &U[t, 0], &Z[t, 0],
                               next_x, next_h, next_buf, next_len)
        for l in range(d):
            out_x[t, l] = xs[l]
    return ctx.clamps
