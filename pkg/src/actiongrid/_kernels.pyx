# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch codec kernels; the pure twin lives in _kernels_py."""

from libc.math cimport sqrt, atan2, sin, cos, M_PI

DEF EPS_RADIUS = 1e-9


cdef inline Py_ssize_t _digitize(double value, const double* b, Py_ssize_t m) noexcept nogil:
    # first index with b[idx] > value, minus one, clamped to [0, m-1]
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = m + 1
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if value < b[mid]:
            hi = mid
        else:
            lo = mid + 1
    lo -= 1
    if lo < 0:
        return 0
    if lo >= m:
        return m - 1
    return lo


def encode_batch(const double[:, ::1] actions, const double[::1] bounds,
                 const long long[::1] bounds_off, const long long[::1] m,
                 long long m_trans, long long m_rot, long long[:, ::1] out):
    cdef Py_ssize_t n
    cdef double x, y, z, roll, pitch, yaw, grip
    cdef double planar_sq, planar, r, theta, phi
    cdef Py_ssize_t i_theta, i_phi, i_r, i_roll, i_pitch, i_yaw
    cdef const double* b0 = &bounds[bounds_off[0]]
    cdef const double* b1 = &bounds[bounds_off[1]]
    cdef const double* b2 = &bounds[bounds_off[2]]
    cdef const double* b3 = &bounds[bounds_off[3]]
    cdef const double* b4 = &bounds[bounds_off[4]]
    cdef const double* b5 = &bounds[bounds_off[5]]
    cdef Py_ssize_t m0 = m[0], m1 = m[1], m2 = m[2], m3 = m[3], m4 = m[4], m5 = m[5]
    cdef long long grip_base = m_trans + m_rot
    with nogil:
        for n in range(actions.shape[0]):
            x = actions[n, 0]
            y = actions[n, 1]
            z = actions[n, 2]
            roll = actions[n, 3]
            pitch = actions[n, 4]
            yaw = actions[n, 5]
            grip = actions[n, 6]
            planar_sq = x * x + y * y
            planar = sqrt(planar_sq)
            r = sqrt(planar_sq + z * z)
            theta = atan2(planar, z) if r > EPS_RADIUS else 0.0
            if planar > EPS_RADIUS:
                phi = atan2(y, x)
                if phi <= -M_PI:
                    phi = M_PI
            else:
                phi = 0.0
            i_theta = _digitize(theta, b0, m0)
            i_phi = _digitize(phi, b1, m1)
            i_r = _digitize(r, b2, m2)
            i_roll = _digitize(roll, b3, m3)
            i_pitch = _digitize(pitch, b4, m4)
            i_yaw = _digitize(yaw, b5, m5)
            out[n, 0] = (i_theta * m1 + i_phi) * m2 + i_r
            out[n, 1] = m_trans + (i_roll * m4 + i_pitch) * m5 + i_yaw
            out[n, 2] = grip_base + (1 if grip > 0.5 else 0)


def decode_batch(const long long[:, ::1] tokens, const double[::1] reps,
                 const long long[::1] reps_off, const long long[::1] m,
                 long long m_trans, long long m_rot, double[:, ::1] out):
    """Returns -1 on success, else the first row with an out-of-layout token."""
    cdef Py_ssize_t n
    cdef long long t_trans, t_rot, t_grip, local
    cdef Py_ssize_t i_theta, i_phi, i_r, i_roll, i_pitch, i_yaw
    cdef double theta, phi, radius, rst
    cdef const double* r0 = &reps[reps_off[0]]
    cdef const double* r1 = &reps[reps_off[1]]
    cdef const double* r2 = &reps[reps_off[2]]
    cdef const double* r3 = &reps[reps_off[3]]
    cdef const double* r4 = &reps[reps_off[4]]
    cdef const double* r5 = &reps[reps_off[5]]
    cdef Py_ssize_t m2 = m[2], m4 = m[4], m5 = m[5]
    cdef Py_ssize_t m1m2 = m[1] * m[2]
    cdef Py_ssize_t m4m5 = m[4] * m[5]
    cdef long long grip_base = m_trans + m_rot
    cdef Py_ssize_t bad = -1
    with nogil:
        for n in range(tokens.shape[0]):
            t_trans = tokens[n, 0]
            t_rot = tokens[n, 1]
            t_grip = tokens[n, 2]
            if (t_trans < 0 or t_trans >= m_trans
                    or t_rot < m_trans or t_rot >= grip_base
                    or (t_grip != grip_base and t_grip != grip_base + 1)):
                bad = n
                break
            i_theta = t_trans // m1m2
            local = t_trans % m1m2
            i_phi = local // m2
            i_r = local % m2
            theta = r0[i_theta]
            phi = r1[i_phi]
            radius = r2[i_r]
            rst = radius * sin(theta)
            out[n, 0] = rst * cos(phi)
            out[n, 1] = rst * sin(phi)
            out[n, 2] = radius * cos(theta)
            local = t_rot - m_trans
            i_roll = local // m4m5
            local = local % m4m5
            i_pitch = local // m5
            i_yaw = local % m5
            out[n, 3] = r3[i_roll]
            out[n, 4] = r4[i_pitch]
            out[n, 5] = r5[i_yaw]
            out[n, 6] = 1.0 if t_grip == grip_base + 1 else 0.0
    return bad
