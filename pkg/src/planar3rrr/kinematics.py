"""Closed-chain kinematics of a planar 3-RRR parallel robot.

Each of the three leg chains is a 2R serial chain (one actuated base joint,
one passive elbow) connected to the mobile platform by a passive coupling
joint.  The platform pose is x = (px, py, phi); the stacked joint vector is
q = [qa1, qp1, qc1, qa2, qp2, qc2, qa3, qp3, qc3] with, per chain,

    qa  absolute angle of the proximal link (actuated),
    qp  elbow angle of the distal link relative to the proximal link,
    qc  coupling angle, defined so qa + qp + qc == phi (wrapped).

Loop closure per chain: base + l1*u(qa) + l2*u(qa+qp) == platform coupling
point.  Angles are wrapped to (-pi, pi] at the API surface.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, SingularConfiguration, UnreachablePose

# determinant floor for the per-chain 2x2 elbow solve and the 3x3 platform solves
_DET_EPS = 1e-12


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


def _unit(theta):
    """Unit vector(s) (cos, sin) stacked on the last axis."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _unit_d(theta):
    """Derivative of _unit w.r.t. the angle: (-sin, cos)."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


@dataclass
class RobotGeometry:
    """Geometry of the symmetric planar 3-RRR robot.

    base_points: fixed actuated-joint positions, shape (3, 2) [m]
    platform_offsets: coupling points in the platform frame, shape (3, 2) [m]
    l1, l2: proximal / distal link lengths per chain, shape (3,) [m]
    """

    base_points: np.ndarray
    platform_offsets: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    branch: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        self.base_points = np.asarray(self.base_points, dtype=float).reshape(3, 2)
        self.platform_offsets = np.asarray(self.platform_offsets, dtype=float).reshape(3, 2)
        self.l1 = np.asarray(self.l1, dtype=float).reshape(3)
        self.l2 = np.asarray(self.l2, dtype=float).reshape(3)
        self.branch = np.asarray(self.branch, dtype=float).reshape(3)
        if np.any(self.l1 <= 0) or np.any(self.l2 <= 0):
            raise ValueError("link lengths must be positive")
        if not np.all(np.abs(self.branch) == 1):
            raise ValueError("branch entries must be +1 or -1")
        for name, pts in (("base_points", self.base_points),
                          ("platform_offsets", self.platform_offsets)):
            area = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            if abs(area) < 1e-12:
                raise ValueError(f"{name} are collinear")

    @classmethod
    def default(cls):
        """Symmetric default: base joints on a 0.5 m circle at 90/210/330 deg,
        platform couplings on a 0.1 m circle at the same angles, l1 = l2 = 0.3 m."""
        ang = np.deg2rad([90.0, 210.0, 330.0])
        return cls(
            base_points=0.5 * _unit(ang),
            platform_offsets=0.1 * _unit(ang),
            l1=np.full(3, 0.3),
            l2=np.full(3, 0.3),
        )


def platform_points(x, geom):
    """World positions of the three platform coupling points, shape (..., 3, 2)."""
    x = np.asarray(x, dtype=float)
    p, phi = x[..., :2], x[..., 2]
    c, s = np.cos(phi), np.sin(phi)
    b = geom.platform_offsets
    bx = c[..., None] * b[:, 0] - s[..., None] * b[:, 1]
    by = s[..., None] * b[:, 0] + c[..., None] * b[:, 1]
    return p[..., None, :] + np.stack([bx, by], axis=-1)


def _platform_point_jac(x, geom):
    """d(coupling point)/dx per chain, shape (..., 3, 2, 3)."""
    x = np.asarray(x, dtype=float)
    phi = x[..., 2]
    c, s = np.cos(phi), np.sin(phi)
    b = geom.platform_offsets
    # dP/dphi = E * R(phi) * b  (90 deg rotation of the rotated offset)
    dx_dphi = -(s[..., None] * b[:, 0] + c[..., None] * b[:, 1])
    dy_dphi = c[..., None] * b[:, 0] - s[..., None] * b[:, 1]
    out = np.zeros(x.shape[:-1] + (3, 2, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    out[..., 0, 2] = dx_dphi
    out[..., 1, 2] = dy_dphi
    return out


def ik_batch(x, geom):
    """Analytic inverse kinematics for a batch of poses.

    x: (..., 3) poses.  Returns (qa, qp) each shaped (..., 3) using the
    geometry's elbow branch, and a boolean reachability mask (..., 3).
    Unreachable chains get NaN angles.
    """
    x = np.asarray(x, dtype=float)
    P = platform_points(x, geom)
    d = P - geom.base_points
    d2 = np.sum(d * d, axis=-1)
    l1, l2 = geom.l1, geom.l2
    cos_qp = (d2 - l1**2 - l2**2) / (2.0 * l1 * l2)
    ok = np.abs(cos_qp) <= 1.0 + 1e-12
    qp = geom.branch * np.arccos(np.clip(cos_qp, -1.0, 1.0))
    qa = np.arctan2(d[..., 1], d[..., 0]) - np.arctan2(
        l2 * np.sin(qp), l1 + l2 * np.cos(qp)
    )
    qa = wrap_angle(qa)
    qa = np.where(ok, qa, np.nan)
    qp = np.where(ok, qp, np.nan)
    return qa, qp, ok


def chain_rows(x, qa, qp, geom):
    """Velocity rows of the constraint solution map for a batch of poses.

    Returns a dict of arrays over the batch shape (..., 3[, ...]):
      row_a: (..., 3, 3)  d(qa_i)/dx
      row_p: (..., 3, 3)  d(qp_i)/dx
      u1, u1p, u2, u2p: link direction vectors and their angle derivatives
    Raises SingularConfiguration when an elbow is stretched/folded flat.
    """
    th2 = qa + qp
    u1, u1p = _unit(qa), _unit_d(qa)
    u2, u2p = _unit(th2), _unit_d(th2)
    l1 = geom.l1
    l2 = geom.l2
    Px = _platform_point_jac(x, geom)  # (..., 3, 2, 3)

    # loop residual r = A + l1 u1 + l2 u2 - P(x); dr/d(qa, qp) columns:
    c0 = l1[:, None] * u1p + l2[:, None] * u2p  # (..., 3, 2)
    c1 = l2[:, None] * u2p
    det = c0[..., 0] * c1[..., 1] - c0[..., 1] * c1[..., 0]
    if np.any(np.abs(det) < _DET_EPS * np.max(l1 * l2)):
        raise SingularConfiguration("chain elbow singular (qp near 0 or pi)")
    # [qa_dot; qp_dot] = (dr/dtheta)^-1 Px x_dot, 2x2 inverse row-wise
    inv00 = c1[..., 1] / det
    inv01 = -c1[..., 0] / det
    inv10 = -c0[..., 1] / det
    inv11 = c0[..., 0] / det
    row_a = inv00[..., None] * Px[..., 0, :] + inv01[..., None] * Px[..., 1, :]
    row_p = inv10[..., None] * Px[..., 0, :] + inv11[..., None] * Px[..., 1, :]
    return {"u1": u1, "u1p": u1p, "u2": u2, "u2p": u2p,
            "row_a": row_a, "row_p": row_p}


def full_constraints(q, x, geom):
    """Loop-closure residual, shape (6,): two rows per chain.

    Zero iff the chain joint angles (qa, qp) and the platform pose close
    every vector loop.  The coupling angles do not enter the loops.
    """
    q = np.asarray(q, dtype=float).reshape(3, 3)
    qa, qp = q[:, 0], q[:, 1]
    P = platform_points(x, geom)
    res = (geom.base_points
           + geom.l1[:, None] * _unit(qa)
           + geom.l2[:, None] * _unit(qa + qp)
           - P)
    return res.reshape(6)


def reduced_constraints(qa, x, geom):
    """Passive-joint-eliminated residual, shape (3,).

    Per chain: squared distance from the elbow to the coupling point minus
    the distal link length squared.
    """
    qa = np.asarray(qa, dtype=float).reshape(3)
    elbow = geom.base_points + geom.l1[:, None] * _unit(qa)
    e = platform_points(x, geom) - elbow
    return np.sum(e * e, axis=-1) - geom.l2**2


def inverse_kinematics(x, geom):
    """Closed-form inverse kinematics.

    Returns the stacked joint vector q (9,) for the geometry's elbow branch.
    Raises UnreachablePose if any coupling point lies outside the chain's
    reachable annulus.
    """
    qa, qp, ok = ik_batch(x, geom)
    if not np.all(ok):
        i = int(np.argmin(ok))
        P = platform_points(x, geom)
        dist = float(np.linalg.norm(P[i] - geom.base_points[i]))
        lo = abs(geom.l1[i] - geom.l2[i])
        hi = geom.l1[i] + geom.l2[i]
        raise UnreachablePose(i, dist, lo, hi)
    phi = np.asarray(x, dtype=float)[2]
    qc = wrap_angle(phi - qa - qp)
    return np.stack([qa, qp, qc], axis=-1).reshape(9)


def forward_kinematics(qa, x_init, geom, tol=1e-12, max_iter=50,
                       max_step_lin=0.2, max_step_ang=0.2):
    """Newton-Raphson on the reduced constraints, solving for the pose.

    x_init seeds the iteration and selects the assembly mode.  Steps are
    capped (0.2 m / 0.2 rad) so the iteration cannot silently jump branches.
    Raises NoConvergence or SingularConfiguration.
    """
    qa = np.asarray(qa, dtype=float).reshape(3)
    x = np.asarray(x_init, dtype=float).copy()
    elbow = geom.base_points + geom.l1[:, None] * _unit(qa)
    last = np.inf
    for _ in range(max_iter):
        e = platform_points(x, geom) - elbow
        res = np.sum(e * e, axis=-1) - geom.l2**2
        last = float(np.max(np.abs(res)))
        if last < tol:
            x[2] = wrap_angle(x[2])
            return x
        Px = _platform_point_jac(x, geom)
        J = 2.0 * np.einsum("ij,ijk->ik", e, Px)  # (3, 3)
        if abs(np.linalg.det(J)) < _DET_EPS:
            raise SingularConfiguration("reduced-constraint Jacobian rank deficient")
        step = np.linalg.solve(J, -res)
        scale = min(1.0,
                    max_step_lin / max(np.linalg.norm(step[:2]), 1e-300),
                    max_step_ang / max(abs(step[2]), 1e-300))
        x = x + scale * step
    raise NoConvergence(max_iter, last)


def jacobians(q, x, geom):
    """Both velocity Jacobians at a consistent (q, x).

    Returns (J_qx, J_xqa):
      J_qx  (9, 3): q_dot = J_qx @ x_dot (coupling rows from the angle-sum identity)
      J_xqa (3, 3): x_dot = J_xqa @ qa_dot
    Raises SingularConfiguration at serial (elbow) or parallel (platform)
    singularities.
    """
    q = np.asarray(q, dtype=float).reshape(3, 3)
    qa, qp = q[:, 0], q[:, 1]
    rows = chain_rows(np.asarray(x, dtype=float), qa, qp, geom)
    row_a, row_p = rows["row_a"], rows["row_p"]
    e_phi = np.array([0.0, 0.0, 1.0])
    row_c = e_phi - row_a - row_p
    J_qx = np.stack([row_a, row_p, row_c], axis=1).reshape(9, 3)

    # reduced-constraint Jacobians: dr/dx (3x3) and dr/dqa (diagonal)
    elbow = geom.base_points + geom.l1[:, None] * rows["u1"]
    e = platform_points(x, geom) - elbow
    Px = _platform_point_jac(x, geom)
    dr_dx = 2.0 * np.einsum("ij,ijk->ik", e, Px)
    dr_dqa = -2.0 * geom.l1 * np.sum(e * rows["u1p"], axis=-1)
    if abs(np.linalg.det(dr_dx)) < _DET_EPS:
        raise SingularConfiguration("type-II singularity: platform Jacobian singular")
    J_xqa = np.linalg.solve(dr_dx, -np.diag(dr_dqa))
    return J_qx, J_xqa


def link_point(q, x, geom, chain, link, s):
    """Point on a link and its 2x3 contact Jacobian w.r.t. the platform pose.

    chain in {0,1,2}, link in {1,2}, s in [0,1] the fraction along the link
    (s=0 at the proximal joint).  The Jacobian maps x_dot to the point
    velocity, so its transpose maps a planar contact force to a platform
    wrench.
    """
    if link not in (1, 2):
        raise ValueError("link must be 1 or 2")
    q = np.asarray(q, dtype=float).reshape(3, 3)
    qa, qp = q[:, 0], q[:, 1]
    rows = chain_rows(np.asarray(x, dtype=float), qa, qp, geom)
    i = int(chain)
    l1, l2 = geom.l1[i], geom.l2[i]
    row_a = rows["row_a"][i]
    if link == 1:
        point = geom.base_points[i] + s * l1 * rows["u1"][i]
        jac = np.outer(s * l1 * rows["u1p"][i], row_a)
    else:
        row_w = row_a + rows["row_p"][i]
        point = (geom.base_points[i] + l1 * rows["u1"][i] + s * l2 * rows["u2"][i])
        jac = np.outer(l1 * rows["u1p"][i], row_a) + np.outer(s * l2 * rows["u2p"][i], row_w)
    return point, jac


def clamp_angle(q, chain):
    """Interior elbow angle of a chain, in [0, pi].

    pi when the chain is stretched straight, 0 when folded flat; opening the
    chain (releasing a clamped object between its links) increases it.
    """
    qp = np.asarray(q, dtype=float).reshape(3, 3)[int(chain), 1]
    return np.pi - abs(qp)


def clamp_angle_gradient(q, x, geom, chain):
    """d(clamp angle)/dx, shape (3,)."""
    q = np.asarray(q, dtype=float).reshape(3, 3)
    rows = chain_rows(np.asarray(x, dtype=float), q[:, 0], q[:, 1], geom)
    i = int(chain)
    return -np.sign(q[i, 1]) * rows["row_p"][i]


def clamp_gap(q, x, geom, chain, s1=0.5, s2=0.5):
    """Scissor gap of a chain: distance between a point on each link.

    s1, s2 are the fractions along the proximal and distal link where the
    clamped body sits.  Returns (gap [m], d(gap)/dx (3,)).  The gap shrinks
    as the elbow folds, which is where a limb caught inside the chain gets
    squeezed.
    """
    i = int(chain)
    p1, j1 = link_point(q, x, geom, i, 1, s1)
    p2, j2 = link_point(q, x, geom, i, 2, s2)
    diff = p2 - p1
    gap = float(np.linalg.norm(diff))
    n = diff / gap
    return gap, n @ (j2 - j1)
