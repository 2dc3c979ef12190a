"""Configuration, persistence and experiment plumbing behind the command line."""

from lsrl.harness.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from lsrl.harness.config import RunConfig, load_config, parse_config_text
from lsrl.harness.dataset_io import read_dataset, write_dataset
from lsrl.harness.experiments import RewardProfile, render_rollout, reward_profile, triptych
from lsrl.harness.ppm import encode_ppm, read_ppm, write_ppm

__all__ = [
    "Checkpoint", "CheckpointError", "RewardProfile", "RunConfig", "encode_ppm", "load_checkpoint",
    "load_config", "parse_config_text", "read_dataset", "read_ppm", "render_rollout", "reward_profile",
    "save_checkpoint", "triptych", "write_dataset", "write_ppm",
]
