"""Optional compiled kernels for the hot flux evaluations.

The Picard loop evaluates point fluxes at every space-time node each sweep;
that is the single largest cost of a run.  When numba is importable these
fused single-pass kernels replace the multi-pass numpy expressions (bitwise
results differ only by floating-point association).  Everything degrades
gracefully to the numpy implementations when numba is absent.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - environment without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True, fastmath=True, error_model="numpy")
def _euler_flux_kernel(Q, gamma, ndirs):
    m, n = Q.shape
    F = np.empty((ndirs, m, n))
    gm1 = gamma - 1.0
    for i in range(n):
        rho = Q[0, i]
        inv = 1.0 / rho
        u = Q[1, i] * inv
        v = Q[2, i] * inv
        w = Q[3, i] * inv
        p = gm1 * (Q[4, i] - 0.5 * (Q[1, i] * u + Q[2, i] * v + Q[3, i] * w))
        ep = Q[4, i] + p
        for a in range(ndirs):
            un = u if a == 0 else (v if a == 1 else w)
            F[a, 0, i] = rho * un
            F[a, 1, i] = Q[1, i] * un
            F[a, 2, i] = Q[2, i] * un
            F[a, 3, i] = Q[3, i] * un
            F[a, 1 + a, i] += p
            F[a, 4, i] = un * ep
    return F


FOURPI = 4.0 * np.pi
EIGHTPI = 8.0 * np.pi


@njit(cache=True, fastmath=True, error_model="numpy")
def _mhd_flux_kernel(Q, gamma, ch2, ndirs):
    m, n = Q.shape
    F = np.empty((ndirs, m, n))
    gm1 = gamma - 1.0
    for i in range(n):
        rho = Q[0, i]
        inv = 1.0 / rho
        u = Q[1, i] * inv
        v = Q[2, i] * inv
        w = Q[3, i] * inv
        Bx = Q[5, i]
        By = Q[6, i]
        Bz = Q[7, i]
        psi = Q[8, i]
        B2 = Bx * Bx + By * By + Bz * Bz
        p = gm1 * (Q[4, i] - 0.5 * (Q[1, i] * u + Q[2, i] * v + Q[3, i] * w)
                   - B2 / EIGHTPI)
        pt = p + B2 / EIGHTPI
        vdotB = u * Bx + v * By + w * Bz
        for a in range(ndirs):
            un = u if a == 0 else (v if a == 1 else w)
            Bn = Bx if a == 0 else (By if a == 1 else Bz)
            F[a, 0, i] = rho * un
            F[a, 1, i] = Q[1, i] * un - Bn * Bx / FOURPI
            F[a, 2, i] = Q[2, i] * un - Bn * By / FOURPI
            F[a, 3, i] = Q[3, i] * un - Bn * Bz / FOURPI
            F[a, 1 + a, i] += pt
            F[a, 4, i] = un * (Q[4, i] + pt) - Bn * vdotB / FOURPI
            F[a, 5, i] = un * Bx - u * Bn
            F[a, 6, i] = un * By - v * Bn
            F[a, 7, i] = un * Bz - w * Bn
            F[a, 5 + a, i] += psi
            F[a, 8, i] = ch2 * Bn
    return F


def euler_flux_all(Q, gamma, dirs):
    shape = Q.shape
    Qf = np.ascontiguousarray(Q.reshape(shape[0], -1))
    with np.errstate(all="ignore"):
        F = _euler_flux_kernel(Qf, gamma, len(dirs))
    return [F[a].reshape(shape) for a in range(len(dirs))]


def mhd_flux_all(Q, gamma, ch, dirs):
    shape = Q.shape
    Qf = np.ascontiguousarray(Q.reshape(shape[0], -1))
    with np.errstate(all="ignore"):
        F = _mhd_flux_kernel(Qf, gamma, ch * ch, len(dirs))
    return [F[a].reshape(shape) for a in range(len(dirs))]


@njit(cache=True, fastmath=True, error_model="numpy")
def _euler_flux_signal_kernel(Q, gamma, a):
    m, n = Q.shape
    F = np.empty((m, n))
    s = np.empty(n)
    gm1 = gamma - 1.0
    for i in range(n):
        rho = Q[0, i]
        inv = 1.0 / rho
        u = Q[1, i] * inv
        v = Q[2, i] * inv
        w = Q[3, i] * inv
        p = gm1 * (Q[4, i] - 0.5 * (Q[1, i] * u + Q[2, i] * v + Q[3, i] * w))
        un = u if a == 0 else (v if a == 1 else w)
        F[0, i] = rho * un
        F[1, i] = Q[1, i] * un
        F[2, i] = Q[2, i] * un
        F[3, i] = Q[3, i] * un
        F[1 + a, i] += p
        F[4, i] = un * (Q[4, i] + p)
        s[i] = abs(un) + np.sqrt(gamma * p * inv)
    return F, s


@njit(cache=True, fastmath=True, error_model="numpy")
def _mhd_flux_signal_kernel(Q, gamma, ch, a):
    m, n = Q.shape
    F = np.empty((m, n))
    s = np.empty(n)
    gm1 = gamma - 1.0
    ch2 = ch * ch
    for i in range(n):
        rho = Q[0, i]
        inv = 1.0 / rho
        u = Q[1, i] * inv
        v = Q[2, i] * inv
        w = Q[3, i] * inv
        Bx = Q[5, i]
        By = Q[6, i]
        Bz = Q[7, i]
        psi = Q[8, i]
        B2 = Bx * Bx + By * By + Bz * Bz
        p = gm1 * (Q[4, i] - 0.5 * (Q[1, i] * u + Q[2, i] * v + Q[3, i] * w)
                   - B2 / EIGHTPI)
        pt = p + B2 / EIGHTPI
        vdotB = u * Bx + v * By + w * Bz
        un = u if a == 0 else (v if a == 1 else w)
        Bn = Bx if a == 0 else (By if a == 1 else Bz)
        F[0, i] = rho * un
        F[1, i] = Q[1, i] * un - Bn * Bx / FOURPI
        F[2, i] = Q[2, i] * un - Bn * By / FOURPI
        F[3, i] = Q[3, i] * un - Bn * Bz / FOURPI
        F[1 + a, i] += pt
        F[4, i] = un * (Q[4, i] + pt) - Bn * vdotB / FOURPI
        F[5, i] = un * Bx - u * Bn
        F[6, i] = un * By - v * Bn
        F[7, i] = un * Bz - w * Bn
        F[5 + a, i] += psi
        F[8, i] = ch2 * Bn
        a2 = gamma * p * inv
        b2 = B2 * inv / FOURPI
        bn2 = Bn * Bn * inv / FOURPI
        sq = a2 + b2
        disc = sq * sq - 4.0 * a2 * bn2
        if disc < 0.0:
            disc = 0.0
        cf2 = 0.5 * (sq + np.sqrt(disc))
        if cf2 < 0.0:
            cf2 = 0.0
        lam = abs(un) + np.sqrt(cf2)
        s[i] = lam if lam > ch else ch
    return F, s


def euler_flux_signal(Q, gamma, a):
    shape = Q.shape
    Qf = np.ascontiguousarray(Q.reshape(shape[0], -1))
    with np.errstate(all="ignore"):
        F, s = _euler_flux_signal_kernel(Qf, gamma, a)
    return F.reshape(shape), s.reshape(shape[1:])


def mhd_flux_signal(Q, gamma, ch, a):
    shape = Q.shape
    Qf = np.ascontiguousarray(Q.reshape(shape[0], -1))
    with np.errstate(all="ignore"):
        F, s = _mhd_flux_signal_kernel(Qf, gamma, ch, a)
    return F.reshape(shape), s.reshape(shape[1:])
