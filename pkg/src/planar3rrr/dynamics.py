"""Operational-space dynamics of the planar 3-RRR robot.

The platform pose x = (px, py, phi) is the minimal coordinate set; the
equation of motion is

    M_x(x) xdd + C_x(x, xd) xd + F_fr,x = F_m + F_ext

with no gravity term (planar, horizontal robot).  M_x is assembled by
projecting every body's mass/inertia through its velocity Jacobian; C_x
follows from Christoffel symbols of the first kind built on central finite
differences of M_x, which makes dM/dt == C + C^T hold by construction.
Joint friction (viscous + smoothed Coulomb) acts on the actuated joints and
is mapped to platform coordinates through the inverse active Jacobian.

OperationalModel.terms() is the per-step entry point used by the simulator;
it runs a numba kernel when available and an equivalent numpy path otherwise.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kinematics as kin
from .errors import SingularConfiguration, UnreachablePose

try:
    from . import _fastpath
except ImportError:  # numba not installed; numpy path only
    _fastpath = None


@dataclass
class DynamicsParams:
    """Mass, inertia and friction parameters (symmetric chains by default).

    Link CoM offsets are measured from the proximal joint along the link.
    Friction: tau_i = viscous_i * qd_a_i + coulomb_i * tanh(qd_a_i / coulomb_v_eps).
    """

    link1_masses: np.ndarray = field(default_factory=lambda: np.full(3, 0.8))
    link2_masses: np.ndarray = field(default_factory=lambda: np.full(3, 0.6))
    link1_coms: np.ndarray = field(default_factory=lambda: np.full(3, 0.15))
    link2_coms: np.ndarray = field(default_factory=lambda: np.full(3, 0.15))
    link1_inertias: np.ndarray = field(default_factory=lambda: np.full(3, 0.8 * 0.3**2 / 12))
    link2_inertias: np.ndarray = field(default_factory=lambda: np.full(3, 0.6 * 0.3**2 / 12))
    platform_mass: float = 1.5
    platform_inertia: float = 0.01
    viscous: np.ndarray = field(default_factory=lambda: np.full(3, 0.05))
    coulomb: np.ndarray = field(default_factory=lambda: np.full(3, 0.1))
    coulomb_v_eps: float = 0.01

    def __post_init__(self):
        for name in ("link1_masses", "link2_masses", "link1_coms", "link2_coms",
                     "link1_inertias", "link2_inertias", "viscous", "coulomb"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        if np.any(self.link1_masses < 0) or np.any(self.link2_masses < 0):
            raise ValueError("link masses must be >= 0")
        if self.platform_mass <= 0 or self.platform_inertia <= 0:
            raise ValueError("platform mass and inertia must be > 0")
        if np.any(self.viscous < 0) or np.any(self.coulomb < 0):
            raise ValueError("friction coefficients must be >= 0")

    def frictionless(self):
        return DynamicsParams(
            link1_masses=self.link1_masses, link2_masses=self.link2_masses,
            link1_coms=self.link1_coms, link2_coms=self.link2_coms,
            link1_inertias=self.link1_inertias, link2_inertias=self.link2_inertias,
            platform_mass=self.platform_mass, platform_inertia=self.platform_inertia,
            viscous=np.zeros(3), coulomb=np.zeros(3),
            coulomb_v_eps=self.coulomb_v_eps)

    def inertia_scaled(self, factor):
        """Copy with all masses/inertias scaled, for model-mismatch studies."""
        return DynamicsParams(
            link1_masses=self.link1_masses * factor,
            link2_masses=self.link2_masses * factor,
            link1_coms=self.link1_coms, link2_coms=self.link2_coms,
            link1_inertias=self.link1_inertias * factor,
            link2_inertias=self.link2_inertias * factor,
            platform_mass=self.platform_mass * factor,
            platform_inertia=self.platform_inertia * factor,
            viscous=self.viscous, coulomb=self.coulomb,
            coulomb_v_eps=self.coulomb_v_eps)


def mass_matrix_batch(X, geom, params):
    """Operational-space inertia for a batch of poses, shape (..., 3, 3).

    Joint angles are recovered by inverse kinematics on the geometry's
    branch, so this is a function of the pose alone.
    """
    X = np.asarray(X, dtype=float)
    qa, qp, ok = kin.ik_batch(X, geom)
    if not np.all(ok):
        raise UnreachablePose(0, float("nan"), 0, 0)
    rows = kin.chain_rows(X, qa, qp, geom)
    row_a = rows["row_a"]
    row_w = row_a + rows["row_p"]

    k_aa, k_ww, k_aw = _mass_coefficients(geom, params)
    M = (np.einsum("i,...ij,...ik->...jk", k_aa, row_a, row_a)
         + np.einsum("i,...ij,...ik->...jk", k_ww, row_w, row_w))
    cross = np.einsum("...i,...ij,...ik->...jk", k_aw * np.cos(qp), row_a, row_w)
    M += cross + np.swapaxes(cross, -1, -2)
    M[..., 0, 0] += params.platform_mass
    M[..., 1, 1] += params.platform_mass
    M[..., 2, 2] += params.platform_inertia
    return M


def _mass_coefficients(geom, params):
    m1, m2 = params.link1_masses, params.link2_masses
    c1, c2 = params.link1_coms, params.link2_coms
    k_aa = m1 * c1**2 + params.link1_inertias + m2 * geom.l1**2
    k_ww = m2 * c2**2 + params.link2_inertias
    k_aw = m2 * geom.l1 * c2
    return k_aa, k_ww, k_aw


def inertia_matrix(x, geom, params):
    """M_x at a single pose, symmetric positive definite."""
    return mass_matrix_batch(np.asarray(x, dtype=float), geom, params)


def mass_gradient(x, geom, params, h=1e-6):
    """dM/dx by central differences, shape (3, 3, 3) indexed [k, i, j]."""
    x = np.asarray(x, dtype=float)
    X = np.repeat(x[None, :], 6, axis=0)
    for k in range(3):
        X[2 * k, k] += h
        X[2 * k + 1, k] -= h
    Ms = mass_matrix_batch(X, geom, params)
    return (Ms[0::2] - Ms[1::2]) / (2.0 * h)


def coriolis_matrix(x, xd, geom, params, dM=None):
    """Christoffel Coriolis/centrifugal matrix C_x with c_x = C_x @ xd.

    Satisfies dM/dt = C + C^T identically (first-kind Christoffel symbols).
    """
    xd = np.asarray(xd, dtype=float)
    if dM is None:
        dM = mass_gradient(x, geom, params)
    t1 = np.tensordot(xd, dM, axes=(0, 0))          # sum_k xd_k dM[k,i,j]
    t2 = np.einsum("jik,k->ij", dM, xd)             # sum_k xd_k dM[j,i,k]
    t3 = np.einsum("ijk,k->ij", dM, xd)             # sum_k xd_k dM[i,j,k]
    return 0.5 * (t1 + t2 - t3)


def joint_friction_torque(qd_a, params):
    """Actuated-joint friction torques (viscous + smoothed Coulomb)."""
    qd_a = np.asarray(qd_a, dtype=float)
    return params.viscous * qd_a + params.coulomb * np.tanh(qd_a / params.coulomb_v_eps)


def friction_force(qd_a, params, J_xqa):
    """Joint friction mapped into platform coordinates: J_xqa^{-T} tau_fr."""
    tau = joint_friction_torque(qd_a, params)
    try:
        return np.linalg.solve(np.asarray(J_xqa, dtype=float).T, tau)
    except np.linalg.LinAlgError as exc:
        raise SingularConfiguration("J_xqa singular in friction mapping") from exc


def actuator_projection(F_m, J_xqa):
    """Virtual-work projection of a platform force to actuator torques."""
    return np.asarray(J_xqa, dtype=float).T @ np.asarray(F_m, dtype=float)


class ModelTerms:
    """Pose/velocity-dependent quantities for one control step.

    Attributes: q (9,), M, C (3,3), A (= J_xqa^-1, rows map xd to qd_a),
    J_xqa, qd_a (3,), F_fr (3,), plus per-chain link directions used by the
    contact model.
    """

    __slots__ = ("x", "qa", "qp", "_q", "M", "dM", "C", "A", "J_xqa", "qd_a",
                 "F_fr", "row_a", "row_p", "u1", "u1p", "u2", "u2p", "geom")

    @property
    def q(self):
        if self._q is None:
            qc = kin.wrap_angle(self.x[2] - self.qa - self.qp)
            self._q = np.stack([self.qa, self.qp, qc], axis=-1).reshape(9)
        return self._q

    def link_point(self, chain, link, s):
        """Point on a link plus its 2x3 contact Jacobian (cached rows)."""
        i = int(chain)
        g = self.geom
        if link == 1:
            point = g.base_points[i] + s * g.l1[i] * self.u1[i]
            jac = np.outer(s * g.l1[i] * self.u1p[i], self.row_a[i])
        else:
            point = (g.base_points[i] + g.l1[i] * self.u1[i]
                     + s * g.l2[i] * self.u2[i])
            jac = (np.outer(g.l1[i] * self.u1p[i], self.row_a[i])
                   + np.outer(s * g.l2[i] * self.u2p[i],
                              self.row_a[i] + self.row_p[i]))
        return point, jac

    def clamp_gap(self, chain):
        """Scissor gap of a chain (distance of the link midpoints) + gradient."""
        if _fastpath is not None:
            g = self.geom
            return _fastpath.clamp_gap_grad(
                g.base_points, g.l1, g.l2, self.u1, self.u1p, self.u2,
                self.u2p, self.row_a, self.row_p, int(chain))
        p1, j1 = self.link_point(chain, 1, 0.5)
        p2, j2 = self.link_point(chain, 2, 0.5)
        diff = p2 - p1
        gap = float(np.linalg.norm(diff))
        return gap, (diff / gap) @ (j2 - j1)

    def clamp_angle(self, chain):
        return np.pi - abs(self.qp[int(chain)])

    def clamp_angle_gradient(self, chain):
        i = int(chain)
        return -np.sign(self.qp[i]) * self.row_p[i]


class OperationalModel:
    """Geometry + parameters bundle evaluating per-step dynamics terms."""

    def __init__(self, geom, params, fd_step=1e-6, use_fastpath=True):
        self.geom = geom
        self.params = params
        self.fd_step = float(fd_step)
        self.use_fastpath = bool(use_fastpath) and _fastpath is not None
        k_aa, k_ww, k_aw = _mass_coefficients(geom, params)
        self._k_aa, self._k_ww, self._k_aw = k_aa, k_ww, k_aw

    def terms(self, x, xd):
        x = np.asarray(x, dtype=float)
        xd = np.asarray(xd, dtype=float)
        if self.use_fastpath:
            return self._terms_fast(x, xd)
        return self._terms_numpy(x, xd)

    def _finish(self, t, x, xd, qa, qp):
        t.x = x
        t.qa = qa
        t.qp = qp
        t._q = None
        t.qd_a = t.A @ xd
        t.F_fr = t.A.T @ joint_friction_torque(t.qd_a, self.params)
        t.geom = self.geom
        return t

    def _terms_fast(self, x, xd):
        g = self.geom
        status, qa, qp, row_a, row_p, u1, u1p, u2, u2p, M, dM, J_xqa = \
            _fastpath.step_terms(x, g.base_points, g.platform_offsets,
                                 g.l1, g.l2, g.branch,
                                 self._k_aa, self._k_ww, self._k_aw,
                                 self.params.platform_mass,
                                 self.params.platform_inertia, self.fd_step)
        if status == _fastpath.STATUS_UNREACHABLE:
            raise UnreachablePose(0, float("nan"), 0, 0)
        if status == _fastpath.STATUS_ELBOW_SINGULAR:
            raise SingularConfiguration("chain elbow singular")
        if status == _fastpath.STATUS_PLATFORM_SINGULAR:
            raise SingularConfiguration("type-II singularity: active Jacobian singular")
        t = ModelTerms()
        t.M, t.dM = M, dM
        t.C = _fastpath.coriolis_from_dm(dM, xd)
        t.A = row_a
        t.J_xqa = J_xqa
        t.row_a, t.row_p = row_a, row_p
        t.u1, t.u1p, t.u2, t.u2p = u1, u1p, u2, u2p
        return self._finish(t, x, xd, qa, qp)

    def _terms_numpy(self, x, xd):
        g = self.geom
        h = self.fd_step
        X = np.repeat(x[None, :], 7, axis=0)
        for k in range(3):
            X[2 * k + 1, k] += h
            X[2 * k + 2, k] -= h
        qa, qp, ok = kin.ik_batch(X, g)
        if not np.all(ok):
            raise UnreachablePose(int(np.argmin(ok[0])), float("nan"), 0, 0)
        rows = kin.chain_rows(X, qa, qp, g)
        row_a = rows["row_a"]
        row_w = row_a + rows["row_p"]
        Ms = (np.einsum("i,pij,pik->pjk", self._k_aa, row_a, row_a)
              + np.einsum("i,pij,pik->pjk", self._k_ww, row_w, row_w))
        cross = np.einsum("pi,pij,pik->pjk", self._k_aw * np.cos(qp), row_a, row_w)
        Ms += cross + np.swapaxes(cross, -1, -2)
        Ms[:, 0, 0] += self.params.platform_mass
        Ms[:, 1, 1] += self.params.platform_mass
        Ms[:, 2, 2] += self.params.platform_inertia

        t = ModelTerms()
        t.M = Ms[0]
        t.dM = (Ms[1::2] - Ms[2::2]) / (2.0 * h)
        t.C = coriolis_matrix(x, xd, g, self.params, dM=t.dM)
        t.A = row_a[0]
        if abs(np.linalg.det(t.A)) < 1e-12:
            raise SingularConfiguration("type-II singularity: active Jacobian singular")
        t.J_xqa = np.linalg.inv(t.A)
        t.row_a, t.row_p = row_a[0], rows["row_p"][0]
        t.u1, t.u1p = rows["u1"][0], rows["u1p"][0]
        t.u2, t.u2p = rows["u2"][0], rows["u2p"][0]
        return self._finish(t, x, xd, qa[0], qp[0])


def inverse_dynamics(x, xd, xdd, F_ext, geom, params):
    """Motor force for a prescribed platform acceleration."""
    t = OperationalModel(geom, params).terms(x, xd)
    return t.M @ np.asarray(xdd, dtype=float) + t.C @ np.asarray(xd, dtype=float) \
        + t.F_fr - np.asarray(F_ext, dtype=float)


def forward_dynamics(x, xd, F_m, F_ext, geom, params):
    """Platform acceleration under motor and external forces."""
    t = OperationalModel(geom, params).terms(x, xd)
    rhs = np.asarray(F_m, dtype=float) + np.asarray(F_ext, dtype=float) \
        - t.C @ np.asarray(xd, dtype=float) - t.F_fr
    return np.linalg.solve(t.M, rhs)
