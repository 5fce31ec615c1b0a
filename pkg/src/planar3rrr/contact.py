"""Synthetic collision and clamping contacts.

Both contact kinds are unilateral springs so reactions feed back on the
true force:

Collision -- a compliant body (stiffness body_stiffness) pushes on a fixed
material point of a link or the platform.  Its approach follows a half-sine
penetration profile, so a robot that holds still feels the classic
half-sine force pulse with the scenario's peak; yielding along the push
reduces the force, pressing against it raises the force.  Outside the
[onset, onset + duration] window the wrench is identically zero.

Clamping -- a limb of effective diameter obstacle_size sits in the scissor
gap between the two links of one chain (gap = distance of the link
midpoints).  When the commanded motion folds the chain below that size, a
linear spring pushes the links apart: platform wrench = force * d(gap)/dx,
so the wrench always resists gap closure.  It persists until a reaction
(or compliance) reopens the gap.

Scenario sampling draws the randomized parameters, anchors the contact
geometry at the episode start pose, and flags archetypes whose projected
wrench cannot clear 1.5x the detection thresholds (those are excluded from
batches).
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from . import kinematics as kin

COLLISION = "collision"
CLAMPING = "clamping"

# episode start poses for the three nominal joint-angle configurations
DEFAULT_CONFIG_POSES = np.array([
    [0.0, 0.0, 0.0],
    [0.06, 0.0, np.deg2rad(10.0)],
    [-0.04, 0.04, np.deg2rad(-15.0)],
])


@dataclass
class ScenarioRanges:
    """Randomization ranges for scenario sampling."""

    collision_peak: tuple = (20.0, 60.0)      # N
    collision_duration: tuple = (0.05, 0.15)  # s
    collision_s: tuple = (0.4, 1.0)           # location fraction on a link
    platform_radius: float = 0.1              # m, contact point radius on platform
    body_stiffness: float = 2000.0            # N/m, human compliance at a collision
    clamp_stiffness: tuple = (1500.0, 2500.0) # N/m
    clamp_clearance: float = 0.002            # m, initial gap margin
    press_speed: tuple = (0.02, 0.04)         # m/s commanded closing speed
    press_depth: tuple = (0.03, 0.06)         # m commanded closing travel
    press_jitter_deg: float = 25.0            # press-direction jitter
    onset: float = 0.3                        # s, contact/press start


@dataclass
class ContactScenario:
    """Concrete, fully-drawn contact episode description."""

    episode_id: int
    kind: str                      # collision | clamping
    config_id: int
    start_pose: np.ndarray         # (3,)
    chain: int                     # 0..2, or -1 for the platform body
    link: int                      # 1|2 for link collisions, 0 otherwise
    s: float                       # fraction along link (collisions)
    platform_offset: np.ndarray    # (2,) contact point in platform frame
    direction: np.ndarray          # (2,) unit push direction (collisions)
    magnitude: float               # N, peak force (collisions)
    onset: float                   # s
    duration: float                # s (collision pulse window)
    body_stiffness: float          # N/m (collisions)
    anchor: np.ndarray             # (2,) contact point at the start pose
    clamp_stiffness: float         # N/m (clamping)
    obstacle_size: float           # m (clamping)
    press_direction: np.ndarray    # (2,) unit setpoint direction (clamping)
    press_speed: float             # m/s
    press_depth: float             # m
    detectable: bool = True
    seed: int = 0

    def to_row(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, np.ndarray):
                d[k] = v.tolist()
        return d


def _rot(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def platform_point_jacobian(x, platform_offset):
    """Contact Jacobian of a platform-frame point, shape (2, 3)."""
    r = _rot(x[2]) @ np.asarray(platform_offset, dtype=float)
    return np.array([[1.0, 0.0, -r[1]],
                     [0.0, 1.0, r[0]]])


def sample_scenarios(geom, ranges=None, seed=0, repeats=1, config_poses=None,
                     thresholds=(10.0, 10.0, 1.0), impedance_stiffness=2000.0,
                     observer_gain=20.0):
    """Draw the scenario list: per configuration 7 collisions (6 links + the
    platform) and 3 clampings (one per chain), times `repeats`.

    Deterministic for a fixed seed.  Each scenario carries its own derived
    seed for per-episode noise streams.
    """
    if ranges is None:
        ranges = ScenarioRanges()
    if config_poses is None:
        config_poses = DEFAULT_CONFIG_POSES
    rng = np.random.default_rng(seed)
    scenarios = []
    eid = 0
    for rep in range(repeats):
        for cfg, pose in enumerate(np.asarray(config_poses, dtype=float)):
            q = kin.inverse_kinematics(pose, geom)
            bodies = [(-1, 0)] + [(c, l) for c in range(3) for l in (1, 2)]
            for chain, link in bodies:
                scenarios.append(_draw_collision(
                    eid, cfg, pose, q, chain, link, geom, ranges, rng))
                eid += 1
            for chain in range(3):
                scenarios.append(_draw_clamping(
                    eid, cfg, pose, q, chain, geom, ranges, rng,
                    impedance_stiffness))
                eid += 1
    for sc in scenarios:
        sc.detectable = is_detectable(sc, geom, thresholds, impedance_stiffness,
                                      observer_gain)
    return scenarios


def _draw_collision(eid, cfg, pose, q, chain, link, geom, ranges, rng):
    ang = rng.uniform(-np.pi, np.pi)
    direction = np.array([np.cos(ang), np.sin(ang)])
    s = rng.uniform(*ranges.collision_s)
    if chain < 0:
        off_ang = rng.uniform(-np.pi, np.pi)
        off_r = rng.uniform(0.3, 1.0) * ranges.platform_radius
        platform_offset = off_r * np.array([np.cos(off_ang), np.sin(off_ang)])
        anchor = pose[:2] + _rot(pose[2]) @ platform_offset
    else:
        platform_offset = np.zeros(2)
        anchor, _ = kin.link_point(q, pose, geom, chain, link, s)
    return ContactScenario(
        episode_id=eid, kind=COLLISION, config_id=cfg, start_pose=pose.copy(),
        chain=chain, link=link, s=float(s), platform_offset=platform_offset,
        direction=direction, magnitude=float(rng.uniform(*ranges.collision_peak)),
        onset=ranges.onset, duration=float(rng.uniform(*ranges.collision_duration)),
        body_stiffness=ranges.body_stiffness, anchor=np.asarray(anchor, dtype=float),
        clamp_stiffness=0.0, obstacle_size=0.0,
        press_direction=np.zeros(2), press_speed=0.0, press_depth=0.0,
        seed=int(rng.integers(0, 2**31 - 1)))


def _draw_clamping(eid, cfg, pose, q, chain, geom, ranges, rng, k_imp):
    gap0, grad = kin.clamp_gap(q, pose, geom, chain)
    closing = -grad[:2]
    n = np.linalg.norm(closing)
    closing = closing / n if n > 1e-9 else np.array([1.0, 0.0])
    jit = np.deg2rad(rng.uniform(-ranges.press_jitter_deg, ranges.press_jitter_deg))
    press = _rot(jit) @ closing
    return ContactScenario(
        episode_id=eid, kind=CLAMPING, config_id=cfg, start_pose=pose.copy(),
        chain=chain, link=0, s=0.5, platform_offset=np.zeros(2),
        direction=np.zeros(2), magnitude=0.0, onset=ranges.onset, duration=0.0,
        body_stiffness=0.0, anchor=np.zeros(2),
        clamp_stiffness=float(rng.uniform(*ranges.clamp_stiffness)),
        obstacle_size=float(gap0 - ranges.clamp_clearance),
        press_direction=press,
        press_speed=float(rng.uniform(*ranges.press_speed)),
        press_depth=float(rng.uniform(*ranges.press_depth)),
        seed=int(rng.integers(0, 2**31 - 1)))


def collision_wrench(t, scenario, terms):
    """True platform wrench of a collision contact at time t.

    Returns (wrench (3,), normal_force).  Zero outside the pulse window.
    The contact body approaches along `direction` with a half-sine
    penetration profile; robot motion at the contact point adds to or
    relieves the penetration.
    """
    dt_on = t - scenario.onset
    if dt_on < 0.0 or dt_on > scenario.duration:
        return np.zeros(3), 0.0
    if scenario.chain < 0:
        point = terms.x[:2] + _rot(terms.x[2]) @ scenario.platform_offset
        jac = platform_point_jacobian(terms.x, scenario.platform_offset)
    else:
        point, jac = terms.link_point(scenario.chain, scenario.link, scenario.s)
    profile = (scenario.magnitude / scenario.body_stiffness) * np.sin(
        np.pi * dt_on / scenario.duration)
    pen = profile - scenario.direction @ (point - scenario.anchor)
    if pen <= 0.0:
        return np.zeros(3), 0.0
    f = scenario.body_stiffness * pen
    return jac.T @ (f * scenario.direction), float(f)


def clamping_wrench(scenario, terms):
    """True platform wrench of a clamping contact (pose-dependent only).

    Returns (wrench (3,), normal_force); zero while the scissor gap is wider
    than the clamped body.
    """
    gap, grad = terms.clamp_gap(scenario.chain)
    pen = scenario.obstacle_size - gap
    if pen <= 0.0:
        return np.zeros(3), 0.0
    f = scenario.clamp_stiffness * pen
    return f * grad, float(f)


def contact_wrench(t, scenario, terms):
    if scenario.kind == COLLISION:
        return collision_wrench(t, scenario, terms)
    return clamping_wrench(scenario, terms)


def _filtered_halfsine_peak(duration, k_o):
    """Peak of a unit half-sine pulse after the observer's first-order lag."""
    om = np.pi / duration
    t = np.linspace(0.0, duration, 256)
    y = (k_o / (k_o**2 + om**2)) * (k_o * np.sin(om * t) - om * np.cos(om * t)
                                    + om * np.exp(-k_o * t))
    return float(np.max(y))


def is_detectable(scenario, geom, thresholds, impedance_stiffness=2000.0,
                  observer_gain=20.0):
    """Detectability estimate against 1.5x the thresholds.

    Collisions: projected peak wrench at the start pose, attenuated by the
    observer's first-order response to the half-sine pulse.  Clampings
    (quasi-static, no attenuation): the spring force reachable with the
    commanded press travel against the series stiffness of the impedance and
    the clamp spring.
    """
    thr = 1.5 * np.asarray(thresholds, dtype=float)
    x = scenario.start_pose
    q = kin.inverse_kinematics(x, geom)
    if scenario.kind == COLLISION:
        if scenario.chain < 0:
            jac = platform_point_jacobian(x, scenario.platform_offset)
        else:
            _, jac = kin.link_point(q, x, geom, scenario.chain, scenario.link,
                                    scenario.s)
        w = jac.T @ (scenario.magnitude * scenario.direction)
        w = w * _filtered_halfsine_peak(scenario.duration, observer_gain)
    else:
        k_series = 1.0 / (1.0 / scenario.clamp_stiffness + 1.0 / impedance_stiffness)
        f = k_series * max(scenario.press_depth - 0.002, 0.0)
        _, grad = kin.clamp_gap(q, x, geom, scenario.chain)
        w = f * grad
    return bool(np.any(np.abs(w) > thr))
