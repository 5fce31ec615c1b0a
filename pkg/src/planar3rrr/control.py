"""Cartesian impedance control and the three contact reactions.

Nominal mode tracks a setpoint with a diagonal stiffness and a damping
matrix from the factorization design

    D = M^(1/2) D_zeta K^(1/2) + K^(1/2) D_zeta M^(1/2),   D_zeta = zeta * I

which renders every closed-loop eigenvalue real for zeta = 1 (critical
damping), plus feedforward compensation of the Coriolis and friction terms.

Reaction modes:
  * retraction: the setpoint yields along the estimated force direction,
  * structure opening: the setpoint moves so the clamped chain's interior
    elbow angle grows (the scissor gap between its links opens),
  * zero-g: gravity/friction compensation only - no stiffness, no Coriolis
    feedforward, intentionally suboptimal but prediction-independent.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirection

try:
    from ._fastpath import damping_3x3 as _damping_3x3
except ImportError:
    _damping_3x3 = None


@dataclass
class ImpedanceGains:
    """Diagonal task stiffness (N/m, N/m, Nm/rad) and damping ratio."""

    stiffness: np.ndarray = field(default_factory=lambda: np.array([2000.0, 2000.0, 85.0]))
    zeta: float = 1.0

    def __post_init__(self):
        self.stiffness = np.asarray(self.stiffness, dtype=float).reshape(3)
        if np.any(self.stiffness < 0):
            raise ValueError("stiffnesses must be >= 0")
        if self.zeta <= 0:
            raise ValueError("damping ratio must be > 0")


# --- control modes ---------------------------------------------------------

@dataclass(frozen=True)
class Nominal:
    pass


@dataclass(frozen=True)
class Retraction:
    direction: tuple  # unit planar vector, frozen at latch


@dataclass(frozen=True)
class StructureOpening:
    chain: int
    sign: int = 1  # +1 opens (interior elbow angle grows)


@dataclass(frozen=True)
class ZeroG:
    pass


MODE_IDS = {Nominal: 0, ZeroG: 1, Retraction: 2, StructureOpening: 3}


def mode_id(mode):
    return MODE_IDS[type(mode)]


def damping_matrix(M, gains):
    """Factorization damping design; symmetric PSD for SPD M."""
    M = np.asarray(M, dtype=float)
    if _damping_3x3 is not None and M.shape == (3, 3):
        return _damping_3x3(M, np.sqrt(gains.stiffness), gains.zeta)
    return damping_matrix_reference(M, gains)


def damping_matrix_reference(M, gains):
    """Plain-numpy damping design (any size); used as the fallback and as
    the parity reference for the jitted 3x3 version."""
    w, V = np.linalg.eigh(np.asarray(M, dtype=float))
    M_sqrt = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
    K_sqrt = np.diag(np.sqrt(gains.stiffness))
    Dz = gains.zeta * np.eye(len(gains.stiffness))
    return M_sqrt @ Dz @ K_sqrt + K_sqrt @ Dz @ M_sqrt


def impedance_law(x, xd, x_d, gains, terms):
    """Impedance force: stiffness toward x_d, factorized damping, and
    feedforward compensation of the modeled Coriolis and friction forces."""
    e = np.asarray(x_d, dtype=float) - np.asarray(x, dtype=float)
    D = damping_matrix(terms.M, gains)
    return gains.stiffness * e - D @ np.asarray(xd, dtype=float) \
        + terms.C @ np.asarray(xd, dtype=float) + terms.F_fr


def zero_g_command(terms, friction_comp=0.9):
    """Fallback compliance: friction compensation only (gravity is zero on
    the planar robot).  No stiffness, no damping, no Coriolis feedforward;
    partial friction compensation avoids limit cycles around zero velocity."""
    return friction_comp * terms.F_fr


def retraction_command(F_hat, min_force=0.5):
    """Retraction mode along the estimated translational force direction.

    Raises DegenerateDirection when the translational part is too small to
    define a direction (callers fall back to zero-g).
    """
    f = np.asarray(F_hat, dtype=float)[:2]
    n = float(np.linalg.norm(f))
    if n < min_force:
        raise DegenerateDirection(
            f"translational force {n:.3f} N below {min_force} N")
    u = f / n
    return Retraction(direction=(float(u[0]), float(u[1])))


def structure_opening_command(chain, sign=1):
    """Structure-opening mode for the named (ground-truth) clamped chain."""
    return StructureOpening(chain=int(chain), sign=int(sign))


class Controller:
    """Per-episode impedance controller with reaction-mode bookkeeping.

    The setpoint x_d is owned by the controller: nominal mode lets the
    caller steer it (scenario trajectory), reaction modes update it per
    step (retraction translation / opening gradient steps).
    """

    def __init__(self, gains, dt, retraction_speed=0.05, opening_rate=0.2,
                 friction_comp=0.9):
        self.gains = gains
        self.dt = float(dt)
        self.retraction_speed = float(retraction_speed)
        self.opening_rate = float(opening_rate)
        self.friction_comp = float(friction_comp)
        self.mode = Nominal()
        self.x_d = None
        self.last_setpoint_rate = np.zeros(3)

    def start(self, x0):
        self.mode = Nominal()
        self.x_d = np.asarray(x0, dtype=float).copy()
        self.last_setpoint_rate = np.zeros(3)

    def latch(self, mode, x):
        """Switch to a reaction mode; reaction setpoints restart at the
        current pose so the reaction does not fight stale tracking error."""
        self.mode = mode
        if not isinstance(mode, Nominal):
            self.x_d = np.asarray(x, dtype=float).copy()

    def command(self, x, xd, terms):
        """Motor force for this tick; advances reaction setpoints."""
        mode = self.mode
        self.last_setpoint_rate = np.zeros(3)
        if isinstance(mode, ZeroG):
            return zero_g_command(terms, self.friction_comp)
        if isinstance(mode, Retraction):
            step = np.array([mode.direction[0], mode.direction[1], 0.0])
            self.last_setpoint_rate = self.retraction_speed * step
            self.x_d = self.x_d + self.dt * self.last_setpoint_rate
        elif isinstance(mode, StructureOpening):
            grad = terms.clamp_angle_gradient(mode.chain)
            norm2 = float(grad @ grad)
            if norm2 > 1e-12:
                self.last_setpoint_rate = (mode.sign * self.opening_rate / norm2) * grad
                self.x_d = self.x_d + self.dt * self.last_setpoint_rate
        return impedance_law(x, xd, self.x_d, self.gains, terms)
