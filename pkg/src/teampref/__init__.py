"""Two-agent preference-based RL: a human-robot team simulator where the
robot learns the team reward from binary preferences, with a scripted or
live human labeler, bounded access to the human's policy, and a
configurable human flexibility set."""

from .config import TrainerConfig, defaults_for, load_config
from .envs import ENV_IDS, make_env
from .game import (
    HumanSource,
    JointAction,
    PreferenceRecord,
    QueryStrategy,
    ReplayBuffer,
    Segment,
    SegmentBank,
    Transition,
    WorldState,
    extract_segment,
    sample_query_pair,
    segment_return,
    step_game,
)
from .humans import (
    AccessBudget,
    HumanPolicy,
    HumanProfile,
    human_action,
    make_highway_human_policies,
    make_mover_human_policies,
    oracle_preference,
    profile_for_env,
    select_episode_policy,
)
from .rewards import (
    PreferenceDataset,
    RewardEnsemble,
    RewardNet,
    ce_loss,
    preference_probability,
    relabel_buffer,
    surf_augment,
    train_reward,
)
from .sac import PolicyLearner, SACLearner
from .trainer import (
    EvalResult,
    RunMetrics,
    Trainer,
    evaluate_policy,
    explore_pretrain,
    rune_intrinsic,
    run_training,
)

__version__ = "0.1.0"
