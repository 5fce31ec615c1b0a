"""Generalized-momentum disturbance observer in platform coordinates.

Estimates the external platform wrench from the generalized momentum
p = M_x(x) xd:

    F_hat = K_o * ( M_x xd - integral( F_m - beta_hat + F_hat ) dt )
    beta_hat = F_fr,x - C_x^T xd            (no gravity, planar robot)

With a perfect model the estimate obeys first-order, per-axis decoupled
error dynamics  K_o^{-1} dF_hat/dt + F_hat = F_ext.

The observer only sees the motor force, the measured active-joint rates
(optionally noisy) and its own dynamics model; the true contact wrench
never enters.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import joint_friction_torque

try:
    from ._fastpath import coriolis_from_dm as _coriolis_from_dm
except ImportError:
    _coriolis_from_dm = None


@dataclass
class ObserverConfig:
    """Gains are per-axis [1/s]; default 1/50 ms = 20. Thresholds are the
    empirical detection limits (N, N, Nm)."""

    gains: np.ndarray = field(default_factory=lambda: np.full(3, 20.0))
    thresholds: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 1.0]))
    dt: float = 1e-3
    qd_noise_sigma: float = 0.0

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float).reshape(3)
        self.thresholds = np.asarray(self.thresholds, dtype=float).reshape(3)
        if np.any(self.gains <= 0):
            raise ValueError("observer gains must be > 0")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")


def beta_hat(terms, xd):
    """Model bias term g_x + F_fr,x - C_x^T xd (g_x = 0 here)."""
    return terms.F_fr - terms.C.T @ np.asarray(xd, dtype=float)


def detect_contact(F_hat, thresholds):
    """Per-axis strict threshold test; aggregated by any().

    Returns (detected, per_axis) where per_axis is a boolean (3,) array.
    """
    per_axis = np.abs(np.asarray(F_hat, dtype=float)) > np.asarray(thresholds, dtype=float)
    return bool(np.any(per_axis)), per_axis


class MomentumObserver:
    """Discrete observer; one instance per simulation episode.

    The integral is advanced by explicit Euler at the control rate.  On the
    first update the accumulator is seeded with M_x xd so the estimate
    starts at zero.
    """

    def __init__(self, model, config, rng=None):
        self.model = model
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.integral = np.zeros(3)
        self.F_hat = np.zeros(3)
        self._beta = np.zeros(3)
        self._started = False

    def reset(self):
        self.integral[:] = 0.0
        self.F_hat[:] = 0.0
        self._beta[:] = 0.0
        self._started = False

    def update(self, x, qd_a, terms=None):
        """Measurement update; returns the current estimate F_hat.

        terms may be the plant's ModelTerms when the observer model and the
        plant coincide and no measurement noise is configured; otherwise the
        observer evaluates its own model.
        """
        qd_a = np.asarray(qd_a, dtype=float)
        if self.config.qd_noise_sigma > 0.0:
            qd_a = qd_a + self.rng.normal(0.0, self.config.qd_noise_sigma, 3)
            terms = None
        if terms is None:
            base = self.model.terms(x, np.zeros(3))
            xd = base.J_xqa @ qd_a
            if _coriolis_from_dm is not None:
                C = _coriolis_from_dm(base.dM, xd)
            else:
                t1 = np.tensordot(xd, base.dM, axes=(0, 0))
                t2 = np.einsum("jik,k->ij", base.dM, xd)
                t3 = np.einsum("ijk,k->ij", base.dM, xd)
                C = 0.5 * (t1 + t2 - t3)
            F_fr = base.A.T @ joint_friction_torque(qd_a, self.model.params)
            M = base.M
        else:
            xd = terms.J_xqa @ qd_a
            C, F_fr, M = terms.C, terms.F_fr, terms.M
        self._beta = F_fr - C.T @ xd
        p = M @ xd
        if not self._started:
            self.integral = p.copy()
            self._started = True
        self.F_hat = self.config.gains * (p - self.integral)
        return self.F_hat.copy()

    def advance(self, F_m):
        """Integrate with the motor force applied over the coming interval."""
        self.integral += self.config.dt * (np.asarray(F_m, dtype=float)
                                           - self._beta + self.F_hat)

    def detected(self):
        return detect_contact(self.F_hat, self.config.thresholds)
