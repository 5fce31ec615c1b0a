"""Closed-loop episode engine at a fixed 1 kHz control rate.

Per tick: evaluate the plant model terms, the true contact wrench and the
momentum-observer estimate; while the reaction gate is pending, classify
the estimate and feed the gate; apply the controller for the latched mode;
integrate the plant with semi-implicit Euler.  The observer and classifier
see only the motor force and (optionally noisy) joint-rate measurements -
ground truth never leaks into features.

Episodes are deterministic given (scenario, seed); run_batch derives one
child seed per episode so results are identical for any worker count.
"""

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import contact as ct
from .control import Controller, Nominal, Retraction, StructureOpening, ZeroG, mode_id
from .errors import NoConvergence, SingularConfiguration, UnreachablePose
from .observer import MomentumObserver, detect_contact
from .reaction import CLASS_CLAMPING, CLASS_COLLISION, Prediction, ReactionGate

try:
    from ._fastpath import solve3 as _solve3
except ImportError:
    _solve3 = np.linalg.solve

LABEL_IDS = {CLASS_CLAMPING: 0, CLASS_COLLISION: 1}


@dataclass
class SimulationSettings:
    dt: float = 1e-3
    collision_duration: float = 1.5
    clamping_duration: float = 3.0
    nominal_duration: float = 10.0
    release_force: float = 0.5      # N, clamp considered released below this
    release_hold: float = 0.2       # s, sustained release before early stop
    singularity_cond_max: float = 1e6


@dataclass
class Episode:
    """Recorded time series of one simulated contact episode."""

    scenario: object
    t: np.ndarray
    x: np.ndarray
    xd: np.ndarray
    F_m: np.ndarray
    F_hat: np.ndarray
    wrench: np.ndarray
    normal_force: np.ndarray
    mode: np.ndarray
    detected: np.ndarray
    pred_label: np.ndarray          # -1 none, 0 clamping, 1 collision
    pred_p: np.ndarray
    detect_index: int = -1
    gate_index: int = -1
    prediction: object = None       # episode-level Prediction (majority over hold)
    latched_mode: object = None
    presses_into_contact: bool = False
    aborted: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def detected_any(self):
        return self.detect_index >= 0

    def feature_rows(self):
        """Indices of samples satisfying the per-sample detection condition."""
        return np.nonzero(self.detected)[0]

    def content_hash(self):
        h = hashlib.sha256()
        for a in (self.t, self.x, self.xd, self.F_m, self.F_hat, self.wrench,
                  self.normal_force, self.mode, self.detected):
            h.update(np.ascontiguousarray(a).tobytes())
        h.update(str(self.detect_index).encode())
        h.update(str(self.gate_index).encode())
        return h.hexdigest()


def nominal_scenario(config_id=0, pose=None, excursion=0.03, ramp_time=2.0):
    """Contact-free tracking pseudo-scenario (smooth 30 mm x-excursion)."""
    if pose is None:
        pose = ct.DEFAULT_CONFIG_POSES[config_id]
    return ct.ContactScenario(
        episode_id=-1, kind="none", config_id=config_id,
        start_pose=np.asarray(pose, dtype=float), chain=-1, link=0, s=0.0,
        platform_offset=np.zeros(2), direction=np.zeros(2), magnitude=0.0,
        onset=0.0, duration=0.0, body_stiffness=0.0, anchor=np.zeros(2),
        clamp_stiffness=0.0, obstacle_size=0.0,
        press_direction=np.array([1.0, 0.0]),
        press_speed=excursion / ramp_time, press_depth=excursion, seed=0)


def opening_chain_for(scenario, geom):
    """Chain a structure opening acts on: the contacted chain, or for a
    platform contact the chain whose base is nearest the contact point."""
    if scenario.chain >= 0:
        return int(scenario.chain)
    d = np.linalg.norm(geom.base_points - scenario.anchor, axis=1)
    return int(np.argmin(d))


def _nominal_setpoint(t, scenario):
    """Scenario-driven setpoint before any reaction latches."""
    x_d = scenario.start_pose.copy()
    if scenario.kind == ct.CLAMPING or scenario.kind == "none":
        travel = min(max(t - scenario.onset, 0.0) * scenario.press_speed,
                     scenario.press_depth)
        x_d = x_d.copy()
        x_d[:2] = x_d[:2] + travel * scenario.press_direction
    return x_d


def _classify(classifier, F_hat):
    proba = classifier.predict_proba(np.asarray(F_hat, dtype=float)[None, :])[0]
    i = int(np.argmax(proba))
    return Prediction(str(classifier.classes_[i]), float(proba[i]))


def _cond1(A, A_inv):
    return (np.abs(A).sum(axis=0).max() * np.abs(A_inv).sum(axis=0).max())


def run_episode(scenario, plant, gains, observer_model, observer_config,
                policy, classifier=None, settings=None, seed=0,
                forced_mode=None, retraction_speed=0.05, opening_rate=0.2,
                friction_comp=0.9):
    """Simulate one episode; returns an Episode record.

    forced_mode overrides the gate's choice at the latch instant (used for
    the paired reaction/baseline runs of outcome labeling); the gate timing
    and the recorded episode prediction are unaffected.
    """
    if settings is None:
        settings = SimulationSettings()
    dt = settings.dt
    if scenario.kind == ct.COLLISION:
        duration = settings.collision_duration
    elif scenario.kind == ct.CLAMPING:
        duration = settings.clamping_duration
    else:
        duration = settings.nominal_duration
    n = int(round(duration / dt)) + 1

    rng = np.random.default_rng(seed)
    controller = Controller(gains, dt, retraction_speed=retraction_speed,
                            opening_rate=opening_rate, friction_comp=friction_comp)
    observer = MomentumObserver(observer_model, observer_config, rng=rng)
    gate = ReactionGate(policy)
    share_terms = (observer_model is plant) and observer_config.qd_noise_sigma == 0.0
    open_chain = opening_chain_for(scenario, plant.geom)

    ep = Episode(
        scenario=scenario,
        t=np.arange(n) * dt,
        x=np.zeros((n, 3)), xd=np.zeros((n, 3)), F_m=np.zeros((n, 3)),
        F_hat=np.zeros((n, 3)), wrench=np.zeros((n, 3)),
        normal_force=np.zeros(n), mode=np.zeros(n, dtype=np.int8),
        detected=np.zeros(n, dtype=bool),
        pred_label=np.full(n, -1, dtype=np.int8), pred_p=np.zeros(n))

    x = np.asarray(scenario.start_pose, dtype=float).copy()
    xd = np.zeros(3)
    controller.start(x)
    engaged = False
    release_count = 0
    release_steps = int(round(settings.release_hold / dt))
    steps_done = n

    for k in range(n):
        t = k * dt
        try:
            terms = plant.terms(x, xd)
            if _cond1(terms.A, terms.J_xqa) > settings.singularity_cond_max:
                raise SingularConfiguration("type-II singularity guard tripped")
            if scenario.kind == "none":
                w_ext, f_n = np.zeros(3), 0.0
            else:
                w_ext, f_n = ct.contact_wrench(t, scenario, terms)
            F_hat = observer.update(x, terms.qd_a,
                                    terms=terms if share_terms else None)
            det_now, _ = detect_contact(F_hat, observer_config.thresholds)
            if det_now and ep.detect_index < 0:
                ep.detect_index = k
            if ep.detect_index >= 0 and gate.pending:
                pred = _classify(classifier, F_hat) if classifier is not None else None
                if pred is not None:
                    ep.pred_label[k] = LABEL_IDS[pred.label]
                    ep.pred_p[k] = pred.p
                mode = gate.push(k, pred, F_hat, open_chain)
                if mode is not None:
                    if forced_mode is not None:
                        mode = forced_mode
                    controller.latch(mode, x)
                    ep.gate_index = k
                    ep.prediction = gate.episode_prediction
                    ep.latched_mode = mode
                    ep.presses_into_contact = _presses_into(
                        mode, scenario, terms, opening_rate)
            if isinstance(controller.mode, Nominal):
                controller.x_d = _nominal_setpoint(t, scenario)
            F_m = controller.command(x, xd, terms)
            observer.advance(F_m)
            acc = _solve3(terms.M, F_m + w_ext - terms.C @ xd - terms.F_fr)
        except (SingularConfiguration, UnreachablePose, NoConvergence) as exc:
            ep.aborted = f"{type(exc).__name__}: {exc}"
            steps_done = k
            break

        ep.x[k] = x
        ep.xd[k] = xd
        ep.F_m[k] = F_m
        ep.F_hat[k] = F_hat
        ep.wrench[k] = w_ext
        ep.normal_force[k] = f_n
        ep.mode[k] = mode_id(controller.mode)
        ep.detected[k] = det_now

        xd = xd + dt * acc
        x = x + dt * xd

        if scenario.kind == ct.CLAMPING:
            if f_n >= settings.release_force:
                engaged = True
                release_count = 0
            elif engaged:
                release_count += 1
                if release_count >= release_steps and not gate.pending:
                    steps_done = k + 1
                    break

    if steps_done < n:
        for name in ("t", "x", "xd", "F_m", "F_hat", "wrench", "normal_force",
                     "mode", "detected", "pred_label", "pred_p"):
            setattr(ep, name, getattr(ep, name)[:steps_done])
    ep.meta = {
        "seed": int(seed),
        "opening_chain": open_chain,
        "forced_mode": type(forced_mode).__name__ if forced_mode is not None else "",
        "gate": "majority-hold-latch",
    }
    return ep


def _presses_into(mode, scenario, terms, opening_rate):
    """Geometric predicate at latch: does the executed reaction push into
    the true contact?  (Retraction closing the true clamp / opening motion
    against a collision's push direction.)"""
    if isinstance(mode, Retraction) and scenario.kind == ct.CLAMPING:
        grad = terms.clamp_angle_gradient(scenario.chain)
        u = np.array(mode.direction)
        return bool(u @ grad[:2] < 0.0)
    if isinstance(mode, StructureOpening) and scenario.kind == ct.COLLISION:
        grad = terms.clamp_angle_gradient(mode.chain)
        norm2 = float(grad @ grad)
        if norm2 < 1e-12:
            return False
        rate = (opening_rate / norm2) * grad
        return bool(rate[:2] @ scenario.direction < 0.0)
    return False


def run_batch(scenarios, plant, gains, observer_model, observer_config, policy,
              classifier=None, settings=None, seed=0, workers=1, **kwargs):
    """Run many episodes with per-episode child seeds.

    Deterministic for a fixed seed regardless of worker count; per-episode
    failures are recorded on the Episode (aborted) and do not stop the batch.
    """
    seeds = np.random.SeedSequence(seed).generate_state(max(len(scenarios), 1))

    def one(i):
        return run_episode(scenarios[i], plant, gains, observer_model,
                           observer_config, policy, classifier=classifier,
                           settings=settings, seed=int(seeds[i]), **kwargs)

    if workers > 1:
        try:
            from joblib import Parallel, delayed
            return list(Parallel(n_jobs=workers)(
                delayed(one)(i) for i in range(len(scenarios))))
        except ImportError:
            pass
    return [one(i) for i in range(len(scenarios))]
