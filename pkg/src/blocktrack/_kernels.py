"""Compiled kinematics and dynamics of the suspended block.

The block hangs from a 5-joint serial chain. In chain order the joints are
q1 (pivot x), q2 (pivot y'), then at the cable attachment q5 (z), q4 (y'),
q3 (x''). Every routine is written without abs/conj so that it is analytic
in its inputs and can be evaluated on complex states for complex-step
differentiation.
"""

import numpy as np
from numba import njit

# chain position of each generalized coordinate q1..q5
RANK = np.array([0, 1, 4, 3, 2])


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3, dtype=a.dtype)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _mm(a, b):
    """Small dense product; explicit loops beat BLAS dispatch at these sizes."""
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=a.dtype)
    for i in range(n):
        for j in range(m):
            acc = out[i, j]
            for l in range(k):
                acc += a[i, l] * b[l, j]
            out[i, j] = acc
    return out


@njit(cache=True)
def _mv(a, v):
    n, k = a.shape
    out = np.zeros(n, dtype=a.dtype)
    for i in range(n):
        acc = out[i]
        for l in range(k):
            acc += a[i, l] * v[l]
        out[i] = acc
    return out


@njit(cache=True)
def _spd_solve(A, b):
    """Cholesky solve for a small symmetric positive definite A (analytic, complex-step safe)."""
    n = A.shape[0]
    Lf = np.zeros((n, n), dtype=A.dtype)
    for j in range(n):
        acc = A[j, j]
        for k in range(j):
            acc -= Lf[j, k] * Lf[j, k]
        Lf[j, j] = np.sqrt(acc)
        for i in range(j + 1, n):
            acc = A[i, j]
            for k in range(j):
                acc -= Lf[i, k] * Lf[j, k]
            Lf[i, j] = acc / Lf[j, j]
    y = np.empty(n, dtype=A.dtype)
    for i in range(n):
        acc = b[i]
        for k in range(i):
            acc -= Lf[i, k] * y[k]
        y[i] = acc / Lf[i, i]
    x = np.empty(n, dtype=A.dtype)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for k in range(i + 1, n):
            acc -= Lf[k, i] * x[k]
        x[i] = acc / Lf[i, i]
    return x


@njit(cache=True)
def _rot(axis, angle, like):
    R = np.zeros((3, 3), dtype=like.dtype)
    c = np.cos(angle)
    s = np.sin(angle)
    if axis == 0:
        R[0, 0] = 1.0
        R[1, 1] = c
        R[1, 2] = -s
        R[2, 1] = s
        R[2, 2] = c
    elif axis == 1:
        R[0, 0] = c
        R[0, 2] = s
        R[1, 1] = 1.0
        R[2, 0] = -s
        R[2, 2] = c
    else:
        R[0, 0] = c
        R[0, 1] = -s
        R[1, 0] = s
        R[1, 1] = c
        R[2, 2] = 1.0
    return R


@njit(cache=True)
def kinematics(q, cable, offset):
    """Joint axes and origins (columns indexed by coordinate), COG position, block rotation."""
    R1 = _rot(0, q[0], q)
    Rc = _mm(R1, _rot(1, q[1], q))
    R2 = _mm(Rc, _rot(2, q[4], q))
    R3 = _mm(R2, _rot(1, q[3], q))
    Rb = _mm(R3, _rot(0, q[2], q))

    axes = np.zeros((3, 5), dtype=q.dtype)
    origins = np.zeros((3, 5), dtype=q.dtype)
    axes[0, 0] = 1.0
    axes[:, 1] = R1[:, 1]
    axes[:, 4] = Rc[:, 2]
    axes[:, 3] = R2[:, 1]
    axes[:, 2] = R3[:, 0]
    attach = -cable * Rc[:, 2]
    for j in (2, 3, 4):
        origins[:, j] = attach
    cog = attach - offset * Rb[:, 2]
    return axes, origins, cog, Rb


@njit(cache=True)
def block_quaternion(q):
    """Block orientation as a product of the five joint half-angle quaternions, w >= 0."""
    out = np.zeros(4, dtype=q.dtype)
    out[0] = 1.0
    # (coordinate index, axis) in chain order
    for idx, ax in ((0, 0), (1, 1), (4, 2), (3, 1), (2, 0)):
        c = np.cos(0.5 * q[idx])
        s = np.sin(0.5 * q[idx])
        w, x, y, z = out[0], out[1], out[2], out[3]
        if ax == 0:
            out[0] = w * c - x * s
            out[1] = x * c + w * s
            out[2] = y * c + z * s
            out[3] = z * c - y * s
        elif ax == 1:
            out[0] = w * c - y * s
            out[1] = x * c - z * s
            out[2] = y * c + w * s
            out[3] = z * c + x * s
        else:
            out[0] = w * c - z * s
            out[1] = x * c + y * s
            out[2] = y * c - x * s
            out[3] = z * c + w * s
    if out[0].real < 0.0:
        out = -out
    return out


@njit(cache=True)
def observe(q, cable, offset):
    """7-vector (COG position, block quaternion) in the pivot frame."""
    _, _, cog, _ = kinematics(q, cable, offset)
    y = np.empty(7, dtype=q.dtype)
    y[:3] = cog
    y[3:] = block_quaternion(q)
    return y


@njit(cache=True)
def _jacobians(axes, origins, cog):
    Jv = np.empty((3, 5), dtype=axes.dtype)
    for j in range(5):
        Jv[:, j] = _cross(axes[:, j], cog - origins[:, j])
    return Jv


@njit(cache=True)
def mass_matrix(q, mass, cable, offset, inertia):
    axes, origins, cog, Rb = kinematics(q, cable, offset)
    Jv = _jacobians(axes, origins, cog)
    Iw = _mm(_mm(Rb, inertia.astype(q.dtype)), Rb.T)
    return mass * _mm(Jv.T, Jv) + _mm(_mm(axes.T, Iw), axes)


@njit(cache=True)
def _skew(v):
    S = np.zeros((3, 3), dtype=v.dtype)
    S[0, 1] = -v[2]
    S[0, 2] = v[1]
    S[1, 0] = v[2]
    S[1, 2] = -v[0]
    S[2, 0] = -v[1]
    S[2, 1] = v[0]
    return S


@njit(cache=True)
def dynamics_terms(q, qd, mass, cable, offset, gravity, inertia):
    """Inertia matrix, its partials dB/dq_i, Christoffel-built Coriolis matrix and gravity."""
    axes, origins, cog, Rb = kinematics(q, cable, offset)
    Jv = _jacobians(axes, origins, cog)
    Iw = _mm(_mm(Rb, inertia.astype(q.dtype)), Rb.T)
    B = mass * _mm(Jv.T, Jv) + _mm(_mm(axes.T, Iw), axes)

    dB = np.empty((5, 5, 5), dtype=q.dtype)
    for i in range(5):
        zi = axes[:, i]
        dJv = np.zeros((3, 5), dtype=q.dtype)
        dJw = np.zeros((3, 5), dtype=q.dtype)
        for j in range(5):
            zj = axes[:, j]
            rj = cog - origins[:, j]
            if RANK[i] < RANK[j]:
                dz = _cross(zi, zj)
                dr = _cross(zi, rj)
                dJw[:, j] = dz
                dJv[:, j] = _cross(dz, rj) + _cross(zj, dr)
            else:
                dJv[:, j] = _cross(zj, Jv[:, i])
        S = _skew(zi)
        dIw = _mm(S, Iw) - _mm(Iw, S)
        IwJw = _mm(Iw, axes)
        dB[i] = (
            mass * (_mm(dJv.T, Jv) + _mm(Jv.T, dJv))
            + _mm(dJw.T, IwJw)
            + _mm(IwJw.T, dJw)
            + _mm(_mm(axes.T, dIw), axes)
        )

    C = np.zeros((5, 5), dtype=q.dtype)
    for k in range(5):
        for j in range(5):
            acc = 0.0 * qd[0]
            for i in range(5):
                acc += 0.5 * (dB[i, k, j] + dB[j, k, i] - dB[k, i, j]) * qd[i]
            C[k, j] = acc
    grav = mass * gravity * Jv[2, :]
    return B, dB, C, grav


@njit(cache=True)
def acceleration(q, qd, mass, cable, offset, gravity, inertia):
    """Generalized acceleration via the rigid-body projection of Jdot*qd and gyroscopic terms."""
    axes, origins, cog, Rb = kinematics(q, cable, offset)
    Jv = _jacobians(axes, origins, cog)
    Iw = _mm(_mm(Rb, inertia.astype(q.dtype)), Rb.T)
    B = mass * _mm(Jv.T, Jv) + _mm(_mm(axes.T, Iw), axes)

    omega = _mv(axes, qd)
    # Jdot*qd, built joint by joint from the angular velocity of the proximal links
    acc_v = np.zeros(3, dtype=q.dtype)
    acc_w = np.zeros(3, dtype=q.dtype)
    wp = np.zeros(3, dtype=q.dtype)
    dr = np.empty(3, dtype=q.dtype)
    for j in range(5):
        z0, z1, z2 = axes[0, j], axes[1, j], axes[2, j]
        r0 = cog[0] - origins[0, j]
        r1 = cog[1] - origins[1, j]
        r2 = cog[2] - origins[2, j]
        wp[:] = 0.0
        for i in range(5):
            if RANK[i] < RANK[j]:
                for k in range(3):
                    wp[k] += qd[i] * axes[k, i]
        # dz = w_prox x z_j
        d0 = wp[1] * z2 - wp[2] * z1
        d1 = wp[2] * z0 - wp[0] * z2
        d2 = wp[0] * z1 - wp[1] * z0
        # d(cog - o_j)/dt: proximal joints act on (cog - o_j), distal/self joints through Jv
        dr[0] = wp[1] * r2 - wp[2] * r1
        dr[1] = wp[2] * r0 - wp[0] * r2
        dr[2] = wp[0] * r1 - wp[1] * r0
        for i in range(5):
            if RANK[i] >= RANK[j]:
                for k in range(3):
                    dr[k] += qd[i] * Jv[k, i]
        acc_v[0] += qd[j] * ((d1 * r2 - d2 * r1) + (z1 * dr[2] - z2 * dr[1]))
        acc_v[1] += qd[j] * ((d2 * r0 - d0 * r2) + (z2 * dr[0] - z0 * dr[2]))
        acc_v[2] += qd[j] * ((d0 * r1 - d1 * r0) + (z0 * dr[1] - z1 * dr[0]))
        acc_w[0] += qd[j] * d0
        acc_w[1] += qd[j] * d1
        acc_w[2] += qd[j] * d2

    Iw_omega = _mv(Iw, omega)
    rhs = mass * _mv(Jv.T, acc_v) + _mv(axes.T, _mv(Iw, acc_w) + _cross(omega, Iw_omega))
    rhs += mass * gravity * Jv[2, :]
    return -_spd_solve(B, rhs), B


@njit(cache=True)
def derivative(x, mass, cable, offset, gravity, inertia):
    out = np.empty(10, dtype=x.dtype)
    qdd, _ = acceleration(x[:5], x[5:], mass, cable, offset, gravity, inertia)
    out[:5] = x[5:]
    out[5:] = qdd
    return out


@njit(cache=True)
def rk4(x, dt, mass, cable, offset, gravity, inertia):
    k1 = derivative(x, mass, cable, offset, gravity, inertia)
    k2 = derivative(x + 0.5 * dt * k1, mass, cable, offset, gravity, inertia)
    k3 = derivative(x + 0.5 * dt * k2, mass, cable, offset, gravity, inertia)
    k4 = derivative(x + dt * k3, mass, cable, offset, gravity, inertia)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def rk4_many(x, dt, n, mass, cable, offset, gravity, inertia, angle_limit):
    """n RK4 steps; stops early (ok = False) on a non-finite state or a cable angle past the limit."""
    for _ in range(n):
        x = rk4(x, dt, mass, cable, offset, gravity, inertia)
        if not (np.all(np.isfinite(x)) and abs(x[0]) < angle_limit and abs(x[1]) < angle_limit):
            return x, False
    return x, True


@njit(cache=True)
def rk4_jacobian(x, dt, mass, cable, offset, gravity, inertia):
    """d(rk4)/dx by complex-step differentiation (no subtractive cancellation)."""
    h = 1e-30
    A = np.empty((10, 10))
    for i in range(10):
        xc = x.astype(np.complex128)
        xc[i] += 1j * h
        A[:, i] = rk4(xc, dt, mass, cable, offset, gravity, inertia).imag / h
    return A


@njit(cache=True)
def observe_jacobian(q, cable, offset):
    """d(observe)/dq by complex step, 7x5."""
    h = 1e-30
    C = np.empty((7, 5))
    for i in range(5):
        qc = q.astype(np.complex128)
        qc[i] += 1j * h
        C[:, i] = observe(qc, cable, offset).imag / h
    return C


@njit(cache=True)
def energy(x, mass, cable, offset, gravity, inertia):
    q = x[:5]
    qd = x[5:]
    B = mass_matrix(q, mass, cable, offset, inertia)
    _, _, cog, _ = kinematics(q, cable, offset)
    return 0.5 * np.sum(qd * _mv(B, qd)) + mass * gravity * (cog[2] + (cable + offset))


@njit(cache=True)
def condition_number(B):
    ev = np.linalg.eigvalsh(B)
    if ev[0] <= 0.0:
        return np.inf
    return ev[-1] / ev[0]
