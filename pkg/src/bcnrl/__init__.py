"""Ensemble-critic offline RL with behavioural-cloning constraints.

Implements the TD3-BC-N and SAC-BC-N agent family on a from-scratch numpy
core, together with uncertainty diagnostics and an offline-to-online
fine-tuning loop, exercised on built-in deterministic point-mass tasks.
"""

__version__ = "0.1.0"

from .checkpoint import load_agent, save_agent
from .data import (Dataset, ReplayBuffer, Transition, concat, generate_dataset,
                   load_dataset, normalize_state, sample_minibatch,
                   save_dataset, seed_buffer, transform_reward)
from .diagnostics import (UncertaintyProfile, distance_profile,
                          ensemble_stats, expected_min_gaussian,
                          policy_qmin_distribution)
from .envs import EnvSpec, EnvState, make_env, reset, scripted_controller, step
from .errors import (BcnrlError, ConfigError, DivergenceError,
                     EmptySourceError, NumericalError)
from .experiment import (ExperimentConfig, ScoreReference,
                         compute_score_reference, evaluate_policy,
                         normalized_score, parse_config, run_experiment,
                         serialize_config)
from .finetune import DecaySchedule, decay_rate, decay_step, run_finetune
from .nn import (AdamState, GaussianHead, Mlp, MlpEnsemble, adam_step,
                 polyak_update, tanh_gaussian_sample, value_and_grad)
from .sacbcn import SacBcnAgent, SacBcnConfig
from .td3bcn import Td3BcnAgent, Td3BcnConfig
