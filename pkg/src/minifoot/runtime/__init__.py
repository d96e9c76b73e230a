"""Rollout workers, shared servers, evaluation and the training loop."""
from .controllers import BotController, FunctionController, PolicyController, parse_opponent
from .rollout import RolloutTask, RolloutWorker, Segment, cut_points, episode_rng, play_episode, play_match
from .servers import DataServer, FifoSampler, PolicyServer
from .timing import PhaseTimer
from .trainer import TrainConfig, Trainer, TrainResult, train, window_win_rate

__all__ = [
    "BotController", "DataServer", "FifoSampler", "FunctionController", "PhaseTimer", "PolicyController",
    "PolicyServer", "RolloutTask", "RolloutWorker", "Segment", "TrainConfig", "TrainResult", "Trainer",
    "cut_points", "episode_rng", "parse_opponent", "play_episode", "play_match", "train", "window_win_rate",
]
