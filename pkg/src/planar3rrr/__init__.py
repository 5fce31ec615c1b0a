"""Planar 3-RRR parallel robot simulation with momentum-observer contact
detection, collision/clamping classification, uncertainty-gated reactions
and dangerous-misclassification evaluation."""

from .classifier import MLPContactClassifier, gradient_check, grid_search
from .config import ExperimentConfig, load as load_config
from .contact import ContactScenario, ScenarioRanges, sample_scenarios
from .control import (Controller, ImpedanceGains, Nominal, Retraction,
                      StructureOpening, ZeroG, damping_matrix, impedance_law,
                      retraction_command, structure_opening_command,
                      zero_g_command)
from .dynamics import (DynamicsParams, OperationalModel, actuator_projection,
                       coriolis_matrix, forward_dynamics, friction_force,
                       inertia_matrix, inverse_dynamics)
from .evaluation import (EpisodeRecord, SweepResult, confusion_matrix,
                         label_outcome, threshold_sweep)
from .kinematics import (RobotGeometry, forward_kinematics, full_constraints,
                         inverse_kinematics, jacobians, link_point,
                         reduced_constraints)
from .observer import MomentumObserver, ObserverConfig, beta_hat, detect_contact
from .reaction import Prediction, ReactionGate, ReactionPolicy, select_reaction
from .simulation import Episode, SimulationSettings, run_batch, run_episode

__version__ = "0.1.0"
