# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: fused embedded-RK step and projected-SOR sweep.

Mirrors the reference kernels in cevput.kernels.reference; the step semantics
(stage refresh, banded solves, derivative assembly, error norms) must stay in
lockstep with them — the backend-parity tests enforce it.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt

cnp.import_array()

DEF NSTAGE = 7

cdef double GMAX = 1e6
cdef double BOUNDARY_SLACK = 1e-8


cdef void band_factor(double[:, ::1] a, double[:, ::1] f, Py_ssize_t n) noexcept nogil:
    """LU of a (1,3)-banded matrix without pivoting (rows are diagonally
    dominant by assembly-time check).  a rows: lo, di, u1, u2, u3;
    f rows: l1 multipliers, then the U bands u0..u3."""
    cdef Py_ssize_t i
    cdef double m
    f[0, 0] = 0.0
    f[1, 0] = a[1, 0]
    f[2, 0] = a[2, 0]
    f[3, 0] = a[3, 0]
    f[4, 0] = a[4, 0]
    for i in range(1, n):
        m = a[0, i] / f[1, i - 1]
        f[0, i] = m
        f[1, i] = a[1, i] - m * f[2, i - 1]
        f[2, i] = a[2, i] - m * f[3, i - 1]
        f[3, i] = a[3, i] - m * f[4, i - 1]
        f[4, i] = a[4, i]


cdef void band_solve(double[:, ::1] f, double* b, double* x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double t
    x[0] = b[0]
    for i in range(1, n):
        x[i] = b[i] - f[0, i] * x[i - 1]
    x[n - 1] = x[n - 1] / f[1, n - 1]
    for i in range(n - 2, -1, -1):
        t = x[i] - f[2, i] * x[i + 1]
        if i + 2 < n:
            t = t - f[3, i] * x[i + 2]
        if i + 3 < n:
            t = t - f[4, i] * x[i + 3]
        x[i] = t / f[1, i]


cdef class Stepper:
    cdef Py_ssize_t n_u, n_w
    cdef double[:, ::1] fu, fw          # factorizations of the two A matrices
    cdef double[:, ::1] bu, bw          # right-matrix bands: lo, di, u1
    cdef double bu02, bu0, cw_du, cw_w0
    cdef double[::1] ebx
    cdef long long[::1] qidx
    cdef double[::1] qex, qwt
    cdef double c0, d0
    cdef double strike, rate, sigma, alpha, beta, sqrt_re
    cdef double[:, ::1] ta              # tableau coupling
    cdef double[::1] tb5, tb4
    # scratch
    cdef double[:, ::1] ku, kw
    cdef double[::1] us, ws, ru, uxx, rw, wxx
    cdef int nclamp

    def __init__(self, double[:, ::1] au, double[:, ::1] aw,
                 double[:, ::1] bu, double[:, ::1] bw,
                 double bu02, double bu0, double cw_du, double cw_w0,
                 double[::1] ebx, long long[::1] qidx, double[::1] qex,
                 double[::1] qwt, double c0, double d0, double strike,
                 double rate, double sigma, double alpha, double beta,
                 double[:, ::1] ta, double[::1] tb5, double[::1] tb4):
        self.n_u = au.shape[1]
        self.n_w = aw.shape[1]
        self.fu = np.empty((5, self.n_u))
        self.fw = np.empty((5, self.n_w))
        band_factor(au, self.fu, self.n_u)
        band_factor(aw, self.fw, self.n_w)
        self.bu = bu.copy()
        self.bw = bw.copy()
        self.bu02 = bu02
        self.bu0 = bu0
        self.cw_du = cw_du
        self.cw_w0 = cw_w0
        self.ebx = ebx.copy()
        self.qidx = qidx.copy()
        self.qex = qex.copy()
        self.qwt = qwt.copy()
        self.c0 = c0
        self.d0 = d0
        self.strike = strike
        self.rate = rate
        self.sigma = sigma
        self.alpha = alpha
        self.beta = beta
        self.sqrt_re = sqrt(rate * strike)
        self.ta = ta.copy()
        self.tb5 = tb5.copy()
        self.tb4 = tb4.copy()
        self.ku = np.empty((NSTAGE, self.n_u))
        self.kw = np.empty((NSTAGE, self.n_w))
        self.us = np.empty(self.n_u)
        self.ws = np.empty(self.n_w)
        self.ru = np.empty(self.n_u)
        self.uxx = np.empty(self.n_u)
        self.rw = np.empty(self.n_w)
        self.wxx = np.empty(self.n_w)
        self.nclamp = 0

    cdef int eval_rhs(self, double[::1] us, double[::1] ws,
                      double[:, ::1] ku, double[:, ::1] kw, Py_ssize_t srow) noexcept nogil:
        cdef Py_ssize_t n_u = self.n_u, n_w = self.n_w
        cdef Py_ssize_t i, j
        cdef double e = self.strike, r = self.rate, sig = self.sigma
        cdef double s_f, w0, lsf, sfb, sfb2, sf3b2, g, m5, m6, m7, m8, rad, q, nu
        cdef double sig2 = sig * sig, sig3 = sig * sig * sig
        cdef double p, diff, shift, conv, wext, t

        s_f = e - us[0]
        if s_f <= 0.0 or s_f > e * (1.0 + BOUNDARY_SLACK):
            return 1
        if s_f > e:
            s_f = e
        w0 = -s_f
        lsf = log(s_f)
        sfb = exp(self.beta * lsf)
        g = 0.0
        if self.sqrt_re > 0.0:
            sfb2 = exp(0.5 * self.beta * lsf)
            sf3b2 = exp(1.5 * self.beta * lsf)
            m8 = 0.0
            for j in range(4):
                rad = us[self.qidx[j]] - e + self.qex[j] * s_f
                q = sqrt(rad) if rad > 0.0 else 0.0
                m8 += self.qwt[j] * q
            m7 = self.c0 * self.sqrt_re / (sig * sfb2)
            m5 = -2.0 * self.d0 * self.sqrt_re / (3.0 * sig3 * sf3b2)
            nu = r - 0.5 * sig2 * sfb
            m6 = (self.beta * self.d0 * self.sqrt_re / (3.0 * sig * sfb2)
                  + 2.0 * nu * self.d0 * self.sqrt_re / (3.0 * sig3 * sf3b2))
            g = (m6 - m7 + m8) / m5
            if g > 0.0:
                g = 0.0
                self.nclamp += 1
            elif g < -GMAX:
                g = -GMAX
                self.nclamp += 1

        # value curvature: ru = B_u us + b_u, then solve
        self.ru[0] = (self.bu[1, 0] * us[0] + self.bu[2, 0] * us[1]
                      + self.bu02 * us[2] + self.bu0)
        for i in range(1, n_u):
            t = self.bu[0, i] * us[i - 1] + self.bu[1, i] * us[i]
            if i + 1 < n_u:
                t += self.bu[2, i] * us[i + 1]
            self.ru[i] = t
        band_solve(self.fu, &self.ru[0], &self.uxx[0], n_u)

        # delta curvature
        self.rw[0] = (self.bw[1, 0] * ws[0] + self.bw[2, 0] * ws[1]
                      + self.cw_du * (us[2] - us[0]) + self.cw_w0 * w0)
        for j in range(1, n_w):
            t = self.bw[0, j] * ws[j - 1] + self.bw[1, j] * ws[j]
            if j + 1 < n_w:
                t += self.bw[2, j] * ws[j + 1]
            self.rw[j] = t
        band_solve(self.fw, &self.rw[0], &self.wxx[0], n_w)

        for i in range(n_u):
            p = sfb * self.ebx[i]
            diff = 0.5 * sig2 * p
            conv = r + g - diff
            wext = w0 if i == 0 else ws[i - 1]
            ku[srow, i] = diff * self.uxx[i] + conv * wext - r * us[i]
        for j in range(n_w):
            p = sfb * self.ebx[j + 1]
            diff = 0.5 * sig2 * p
            shift = self.alpha * sig2 * p
            conv = r + g - diff
            kw[srow, j] = (diff * self.wxx[j] + (conv + shift) * self.uxx[j + 1]
                           - (r + shift) * ws[j])
        return 0

    def step(self, double[::1] u, double[::1] w, double k,
             double[::1] fsal_ku, double[::1] fsal_kw, int have_fsal):
        cdef Py_ssize_t n_u = self.n_u, n_w = self.n_w
        cdef Py_ssize_t s, j, i
        cdef double aj
        cdef int status = 0
        cdef int clamp0 = self.nclamp
        cdef cnp.ndarray[double, ndim=1] u5 = np.empty(n_u)
        cdef cnp.ndarray[double, ndim=1] w5 = np.empty(n_w)
        cdef cnp.ndarray[double, ndim=1] u4 = np.empty(n_u)
        cdef cnp.ndarray[double, ndim=1] w4 = np.empty(n_w)
        cdef double[::1] u5v = u5, w5v = w5, u4v = u4, w4v = w4
        cdef double e_u = 0.0, e_w = 0.0, d

        for s in range(NSTAGE):
            if s == 0:
                if have_fsal:
                    for i in range(n_u):
                        self.ku[0, i] = fsal_ku[i]
                    for j in range(n_w):
                        self.kw[0, j] = fsal_kw[j]
                    continue
                for i in range(n_u):
                    self.us[i] = u[i]
                for j in range(n_w):
                    self.ws[j] = w[j]
            else:
                for i in range(n_u):
                    self.us[i] = u[i]
                for j in range(n_w):
                    self.ws[j] = w[j]
                for j in range(s):
                    aj = k * self.ta[s, j]
                    if aj != 0.0:
                        for i in range(n_u):
                            self.us[i] += aj * self.ku[j, i]
                        for i in range(n_w):
                            self.ws[i] += aj * self.kw[j, i]
            status = self.eval_rhs(self.us, self.ws, self.ku, self.kw, s)
            if status != 0:
                z = np.empty(0)
                return (z, z, z, z, np.inf, np.inf, z, z,
                        self.nclamp - clamp0, 1)

        for i in range(n_u):
            u5v[i] = u[i]
            u4v[i] = u[i]
        for j in range(n_w):
            w5v[j] = w[j]
            w4v[j] = w[j]
        for s in range(NSTAGE):
            aj = k * self.tb5[s]
            if aj != 0.0:
                for i in range(n_u):
                    u5v[i] += aj * self.ku[s, i]
                for j in range(n_w):
                    w5v[j] += aj * self.kw[s, j]
            aj = k * self.tb4[s]
            if aj != 0.0:
                for i in range(n_u):
                    u4v[i] += aj * self.ku[s, i]
                for j in range(n_w):
                    w4v[j] += aj * self.kw[s, j]
        for i in range(n_u):
            d = fabs(u5v[i] - u4v[i])
            if d > e_u:
                e_u = d
        for j in range(n_w):
            d = fabs(w5v[j] - w4v[j])
            if d > e_w:
                e_w = d
        return (u5, w5, u4, w4, e_u, e_w,
                np.asarray(self.ku[NSTAGE - 1]).copy(),
                np.asarray(self.kw[NSTAGE - 1]).copy(),
                self.nclamp - clamp0, 0)


def psor_sweep(double[::1] sub, double[::1] diag, double[::1] sup,
               double[::1] rhs, double[::1] floor_, double[::1] v,
               double omega, double tol, int max_iter):
    """Lexicographic projected SOR on a tridiagonal system, in place on v.

    Returns the iteration count; max_iter + 1 signals non-convergence."""
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i
    cdef int it, result = max_iter + 1
    cdef double resid, vn, delta, d
    with nogil:
        for it in range(1, max_iter + 1):
            delta = 0.0
            for i in range(n):
                resid = rhs[i] - diag[i] * v[i]
                if i > 0:
                    resid -= sub[i] * v[i - 1]
                if i < n - 1:
                    resid -= sup[i] * v[i + 1]
                vn = v[i] + omega * resid / diag[i]
                if vn < floor_[i]:
                    vn = floor_[i]
                d = fabs(vn - v[i])
                if d > delta:
                    delta = d
                v[i] = vn
            if delta < tol:
                result = it
                break
    return result
