"""Uncertainty-gated reaction selection.

A detected contact triggers the class-optimal reaction (retraction for a
predicted collision, structure opening for a predicted clamping) only when
the classifier's probability exceeds p_th; otherwise the safe fallback
(zero-g) runs.  The gate is evaluated per sample with a majority hold over
the first hold_samples predictions after detection, then the latched mode
persists until the episode ends.
"""

from dataclasses import dataclass, field

import numpy as np

from .control import Nominal, Retraction, StructureOpening, ZeroG, \
    retraction_command, structure_opening_command
from .errors import DegenerateDirection

CLASS_CLAMPING = "clamping"
CLASS_COLLISION = "collision"


@dataclass(frozen=True)
class Prediction:
    """Classifier output: class label and its softmax probability (>= 0.5
    for the binary argmax)."""

    label: str
    p: float


@dataclass
class ReactionPolicy:
    p_th: float = 0.8
    thresholds: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 1.0]))
    hold_samples: int = 10

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float).reshape(3)
        if not 0.5 <= self.p_th < 1.0:
            raise ValueError("p_th must lie in [0.5, 1)")
        if self.hold_samples < 1:
            raise ValueError("hold_samples must be >= 1")


def select_reaction(detected, pred, policy, opening_chain, F_hat=None):
    """Map (detection, prediction, threshold) to a control mode.

    Strict gate: the optimal reaction runs only for p > p_th; otherwise
    zero-g.  A retraction whose force direction is degenerate also falls
    back to zero-g.  opening_chain names the chain a structure opening
    would act on (ground truth stands in for the chain-isolation stage).
    """
    if not detected:
        return Nominal()
    if pred is None or pred.p <= policy.p_th:
        return ZeroG()
    if pred.label == CLASS_COLLISION:
        if F_hat is None:
            return ZeroG()
        try:
            return retraction_command(F_hat)
        except DegenerateDirection:
            return ZeroG()
    return structure_opening_command(opening_chain)


class ReactionGate:
    """Per-episode latch: buffers the first hold_samples predictions after
    detection, then commits to the majority class (tie: the gate-instant
    sample) with the mean probability of the majority samples."""

    def __init__(self, policy):
        self.policy = policy
        self.buffer = []
        self.latched = None
        self.episode_prediction = None
        self.gate_index = None

    @property
    def pending(self):
        return self.latched is None

    def push(self, step_index, pred, F_hat, opening_chain):
        """Feed one post-detection sample; returns the latched mode or None."""
        if self.latched is not None:
            return self.latched
        self.buffer.append(pred)
        if len(self.buffer) < self.policy.hold_samples:
            return None
        if any(p is None for p in self.buffer):
            # no classifier attached: safe fallback after the hold
            self.episode_prediction = None
            self.gate_index = step_index
            self.latched = select_reaction(True, None, self.policy,
                                           opening_chain, F_hat)
            return self.latched
        labels = [p.label for p in self.buffer]
        n_coll = labels.count(CLASS_COLLISION)
        n_clamp = len(labels) - n_coll
        if n_coll > n_clamp:
            major = CLASS_COLLISION
        elif n_clamp > n_coll:
            major = CLASS_CLAMPING
        else:
            major = labels[-1]
        ps = [p.p for p in self.buffer if p.label == major]
        self.episode_prediction = Prediction(major, float(np.mean(ps)))
        self.gate_index = step_index
        self.latched = select_reaction(True, self.episode_prediction,
                                       self.policy, opening_chain, F_hat)
        return self.latched
