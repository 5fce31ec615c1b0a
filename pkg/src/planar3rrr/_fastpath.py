"""Numba-jitted per-step dynamics kernel.

Computes the same quantities as dynamics.StateTerms (inverse kinematics,
operational-space inertia, finite-difference mass gradient, Christoffel
Coriolis matrix, active Jacobian) in one compiled call.  Import of this
module may fail where numba is unavailable; callers fall back to the numpy
implementation.  A parity test keeps both paths honest.
"""

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_UNREACHABLE = 1
STATUS_ELBOW_SINGULAR = 2
STATUS_PLATFORM_SINGULAR = 3


@njit(cache=True)
def _pose_rows(x, base, boff, l1, l2, branch,
               qa, qp, row_a, row_p, u1, u1p, u2, u2p):
    """Per-chain IK and velocity rows at one pose. Returns a status code."""
    px, py, phi = x[0], x[1], x[2]
    c, s = math.cos(phi), math.sin(phi)
    for i in range(3):
        bx = c * boff[i, 0] - s * boff[i, 1]
        by = s * boff[i, 0] + c * boff[i, 1]
        Pix = px + bx
        Piy = py + by
        dx = Pix - base[i, 0]
        dy = Piy - base[i, 1]
        d2 = dx * dx + dy * dy
        cqp = (d2 - l1[i] * l1[i] - l2[i] * l2[i]) / (2.0 * l1[i] * l2[i])
        if cqp > 1.0 + 1e-12 or cqp < -1.0 - 1e-12:
            return STATUS_UNREACHABLE
        if cqp > 1.0:
            cqp = 1.0
        elif cqp < -1.0:
            cqp = -1.0
        qpi = branch[i] * math.acos(cqp)
        qai = math.atan2(dy, dx) - math.atan2(
            l2[i] * math.sin(qpi), l1[i] + l2[i] * math.cos(qpi))
        qai = math.pi - ((math.pi - qai) % (2.0 * math.pi))
        qa[i] = qai
        qp[i] = qpi
        th2 = qai + qpi
        u1[i, 0] = math.cos(qai)
        u1[i, 1] = math.sin(qai)
        u1p[i, 0] = -u1[i, 1]
        u1p[i, 1] = u1[i, 0]
        u2[i, 0] = math.cos(th2)
        u2[i, 1] = math.sin(th2)
        u2p[i, 0] = -u2[i, 1]
        u2p[i, 1] = u2[i, 0]
        # platform point jacobian rows: (1, 0, dPx/dphi), (0, 1, dPy/dphi)
        dpx = -by
        dpy = bx
        c0x = l1[i] * u1p[i, 0] + l2[i] * u2p[i, 0]
        c0y = l1[i] * u1p[i, 1] + l2[i] * u2p[i, 1]
        c1x = l2[i] * u2p[i, 0]
        c1y = l2[i] * u2p[i, 1]
        det = c0x * c1y - c0y * c1x
        if abs(det) < 1e-12 * l1[i] * l2[i]:
            return STATUS_ELBOW_SINGULAR
        row_a[i, 0] = c1y / det
        row_a[i, 1] = -c1x / det
        row_a[i, 2] = (c1y * dpx - c1x * dpy) / det
        row_p[i, 0] = -c0y / det
        row_p[i, 1] = c0x / det
        row_p[i, 2] = (-c0y * dpx + c0x * dpy) / det
    return STATUS_OK


@njit(cache=True)
def _mass_from_rows(qp, row_a, row_p, k_aa, k_ww, k_aw, mp, ip, M):
    for a in range(3):
        for b in range(3):
            M[a, b] = 0.0
    for i in range(3):
        caw = k_aw[i] * math.cos(qp[i])
        for a in range(3):
            ra = row_a[i, a]
            rw = ra + row_p[i, a]
            for b in range(3):
                rb = row_a[i, b]
                wb = rb + row_p[i, b]
                M[a, b] += k_aa[i] * ra * rb + k_ww[i] * rw * wb \
                    + caw * (ra * wb + rw * rb)
    M[0, 0] += mp
    M[1, 1] += mp
    M[2, 2] += ip


@njit(cache=True)
def step_terms(x, base, boff, l1, l2, branch, k_aa, k_ww, k_aw, mp, ip, h):
    """Pose-dependent terms at x: IK, rows, M, dM, plus singularity status.

    Returns (status, qa, qp, row_a, row_p, u1, u1p, u2, u2p, M, dM, A_inv)
    where A_inv is J_xqa (inverse of the active-row matrix).
    """
    qa = np.empty(3)
    qp = np.empty(3)
    row_a = np.empty((3, 3))
    row_p = np.empty((3, 3))
    u1 = np.empty((3, 2))
    u1p = np.empty((3, 2))
    u2 = np.empty((3, 2))
    u2p = np.empty((3, 2))
    M = np.empty((3, 3))
    dM = np.empty((3, 3, 3))
    J_xqa = np.empty((3, 3))

    status = _pose_rows(x, base, boff, l1, l2, branch,
                        qa, qp, row_a, row_p, u1, u1p, u2, u2p)
    if status != STATUS_OK:
        return status, qa, qp, row_a, row_p, u1, u1p, u2, u2p, M, dM, J_xqa
    _mass_from_rows(qp, row_a, row_p, k_aa, k_ww, k_aw, mp, ip, M)

    # central differences of M over the pose coordinates
    tqa = np.empty(3)
    tqp = np.empty(3)
    tra = np.empty((3, 3))
    trp = np.empty((3, 3))
    tu1 = np.empty((3, 2))
    tu1p = np.empty((3, 2))
    tu2 = np.empty((3, 2))
    tu2p = np.empty((3, 2))
    Mp = np.empty((3, 3))
    Mm = np.empty((3, 3))
    xp = np.empty(3)
    for k in range(3):
        for j in range(3):
            xp[j] = x[j]
        xp[k] = x[k] + h
        st = _pose_rows(xp, base, boff, l1, l2, branch,
                        tqa, tqp, tra, trp, tu1, tu1p, tu2, tu2p)
        if st != STATUS_OK:
            return st, qa, qp, row_a, row_p, u1, u1p, u2, u2p, M, dM, J_xqa
        _mass_from_rows(tqp, tra, trp, k_aa, k_ww, k_aw, mp, ip, Mp)
        xp[k] = x[k] - h
        st = _pose_rows(xp, base, boff, l1, l2, branch,
                        tqa, tqp, tra, trp, tu1, tu1p, tu2, tu2p)
        if st != STATUS_OK:
            return st, qa, qp, row_a, row_p, u1, u1p, u2, u2p, M, dM, J_xqa
        _mass_from_rows(tqp, tra, trp, k_aa, k_ww, k_aw, mp, ip, Mm)
        inv2h = 1.0 / (2.0 * h)
        for a in range(3):
            for b in range(3):
                dM[k, a, b] = (Mp[a, b] - Mm[a, b]) * inv2h

    # J_xqa = inverse of the active-row matrix (adjugate over determinant)
    a00, a01, a02 = row_a[0, 0], row_a[0, 1], row_a[0, 2]
    a10, a11, a12 = row_a[1, 0], row_a[1, 1], row_a[1, 2]
    a20, a21, a22 = row_a[2, 0], row_a[2, 1], row_a[2, 2]
    det = (a00 * (a11 * a22 - a12 * a21)
           - a01 * (a10 * a22 - a12 * a20)
           + a02 * (a10 * a21 - a11 * a20))
    if abs(det) < 1e-12:
        return STATUS_PLATFORM_SINGULAR, qa, qp, row_a, row_p, u1, u1p, u2, u2p, M, dM, J_xqa
    inv_det = 1.0 / det
    J_xqa[0, 0] = (a11 * a22 - a12 * a21) * inv_det
    J_xqa[0, 1] = (a02 * a21 - a01 * a22) * inv_det
    J_xqa[0, 2] = (a01 * a12 - a02 * a11) * inv_det
    J_xqa[1, 0] = (a12 * a20 - a10 * a22) * inv_det
    J_xqa[1, 1] = (a00 * a22 - a02 * a20) * inv_det
    J_xqa[1, 2] = (a02 * a10 - a00 * a12) * inv_det
    J_xqa[2, 0] = (a10 * a21 - a11 * a20) * inv_det
    J_xqa[2, 1] = (a01 * a20 - a00 * a21) * inv_det
    J_xqa[2, 2] = (a00 * a11 - a01 * a10) * inv_det
    return STATUS_OK, qa, qp, row_a, row_p, u1, u1p, u2, u2p, M, dM, J_xqa


@njit(cache=True)
def damping_3x3(M, k_sqrt, zeta):
    """Factorization damping: M^(1/2) Dz K^(1/2) + K^(1/2) Dz M^(1/2)."""
    w, V = np.linalg.eigh(M)
    Ms = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                wk = w[k] if w[k] > 0.0 else 0.0
                acc += V[i, k] * math.sqrt(wk) * V[j, k]
            Ms[i, j] = acc
    D = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            D[i, j] = zeta * (Ms[i, j] * k_sqrt[j] + k_sqrt[i] * Ms[i, j])
    return D


@njit(cache=True)
def solve3(M, b):
    return np.linalg.solve(M, b)


@njit(cache=True)
def clamp_gap_grad(base, l1, l2, u1, u1p, u2, u2p, row_a, row_p, chain):
    """Scissor gap (link-midpoint distance) of one chain and d(gap)/dx."""
    i = chain
    m1x = base[i, 0] + 0.5 * l1[i] * u1[i, 0]
    m1y = base[i, 1] + 0.5 * l1[i] * u1[i, 1]
    m2x = base[i, 0] + l1[i] * u1[i, 0] + 0.5 * l2[i] * u2[i, 0]
    m2y = base[i, 1] + l1[i] * u1[i, 1] + 0.5 * l2[i] * u2[i, 1]
    dx = m2x - m1x
    dy = m2y - m1y
    gap = math.sqrt(dx * dx + dy * dy)
    nx = dx / gap
    ny = dy / gap
    grad = np.empty(3)
    for k in range(3):
        # d(m1)/dx = 0.5 l1 u1p * row_a ; d(m2)/dx = l1 u1p * row_a + 0.5 l2 u2p * (row_a + row_p)
        j1x = 0.5 * l1[i] * u1p[i, 0] * row_a[i, k]
        j1y = 0.5 * l1[i] * u1p[i, 1] * row_a[i, k]
        rw = row_a[i, k] + row_p[i, k]
        j2x = l1[i] * u1p[i, 0] * row_a[i, k] + 0.5 * l2[i] * u2p[i, 0] * rw
        j2y = l1[i] * u1p[i, 1] * row_a[i, k] + 0.5 * l2[i] * u2p[i, 1] * rw
        grad[k] = nx * (j2x - j1x) + ny * (j2y - j1y)
    return gap, grad


@njit(cache=True)
def coriolis_from_dm(dM, xd):
    """First-kind Christoffel contraction: C such that dM/dt = C + C^T."""
    C = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += (dM[k, i, j] + dM[j, i, k] - dM[i, j, k]) * xd[k]
            C[i, j] = 0.5 * acc
    return C
