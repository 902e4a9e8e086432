"""Pure-Python twin of the compiled batch codec kernels.

Mirrors _kernels.pyx operation for operation; both sides call the platform
libm on the same doubles in the same order, so results are bit-identical
across backends.
"""

import math
from bisect import bisect_right

_PI = math.pi
_EPS_RADIUS = 1e-9


def _digitize(value, boundaries, m):
    i = bisect_right(boundaries, value) - 1
    if i < 0:
        return 0
    if i >= m:
        return m - 1
    return i


def encode_batch(actions, bounds, bounds_off, m, m_trans, m_rot, out):
    b = [bounds[bounds_off[i]:bounds_off[i + 1]].tolist() for i in range(6)]
    m = m.tolist()
    grip_base = m_trans + m_rot
    for n in range(actions.shape[0]):
        x, y, z, roll, pitch, yaw, grip = actions[n].tolist()
        planar_sq = x * x + y * y
        planar = math.sqrt(planar_sq)
        r = math.sqrt(planar_sq + z * z)
        theta = math.atan2(planar, z) if r > _EPS_RADIUS else 0.0
        if planar > _EPS_RADIUS:
            phi = math.atan2(y, x)
            if phi <= -_PI:
                phi = _PI
        else:
            phi = 0.0
        i_theta = _digitize(theta, b[0], m[0])
        i_phi = _digitize(phi, b[1], m[1])
        i_r = _digitize(r, b[2], m[2])
        i_roll = _digitize(roll, b[3], m[3])
        i_pitch = _digitize(pitch, b[4], m[4])
        i_yaw = _digitize(yaw, b[5], m[5])
        out[n, 0] = (i_theta * m[1] + i_phi) * m[2] + i_r
        out[n, 1] = m_trans + (i_roll * m[4] + i_pitch) * m[5] + i_yaw
        out[n, 2] = grip_base + (1 if grip > 0.5 else 0)


def decode_batch(tokens, reps, reps_off, m, m_trans, m_rot, out):
    """Returns -1 on success, else the first row with an out-of-layout token."""
    r_ = [reps[reps_off[i]:reps_off[i + 1]].tolist() for i in range(6)]
    m = m.tolist()
    grip_base = m_trans + m_rot
    for n in range(tokens.shape[0]):
        t_trans, t_rot, t_grip = tokens[n].tolist()
        if not 0 <= t_trans < m_trans:
            return n
        if not m_trans <= t_rot < grip_base:
            return n
        if t_grip != grip_base and t_grip != grip_base + 1:
            return n
        i_theta, rest = divmod(t_trans, m[1] * m[2])
        i_phi, i_r = divmod(rest, m[2])
        theta = r_[0][i_theta]
        phi = r_[1][i_phi]
        radius = r_[2][i_r]
        rst = radius * math.sin(theta)
        out[n, 0] = rst * math.cos(phi)
        out[n, 1] = rst * math.sin(phi)
        out[n, 2] = radius * math.cos(theta)
        i_roll, rest = divmod(t_rot - m_trans, m[4] * m[5])
        i_pitch, i_yaw = divmod(rest, m[5])
        out[n, 3] = r_[3][i_roll]
        out[n, 4] = r_[4][i_pitch]
        out[n, 5] = r_[5][i_yaw]
        out[n, 6] = 1.0 if t_grip == grip_base + 1 else 0.0
    return -1
