"""Miniature football simulator."""
from .bot import scripted_bot
from .config import SimConfig
from .core import (
    is_terminal,
    lineup_positions,
    lineup_table,
    offside_position,
    pass_target,
    reset,
    shot_goal_probability,
    step,
)
from .encoders import basic_dim, encode_basic, encode_enhanced, encode_team, encoder_dim, enhanced_dim
from .events import detect_events, is_done_boundary
from .masking import legal_action_mask, team_masks
from .replay import Replay
from .state import (
    LEFT,
    NUM_ACTIONS,
    RIGHT,
    ActionId,
    AgentId,
    Event,
    EventKind,
    Mode,
    Role,
    WorldState,
    team_sign,
)

__all__ = [
    "LEFT", "RIGHT", "NUM_ACTIONS", "ActionId", "AgentId", "Event", "EventKind", "Mode", "Role",
    "Replay", "SimConfig", "WorldState", "basic_dim", "detect_events", "encode_basic",
    "encode_enhanced", "encode_team", "encoder_dim", "enhanced_dim", "is_done_boundary",
    "is_terminal", "legal_action_mask", "lineup_positions", "lineup_table", "offside_position",
    "pass_target", "reset", "scripted_bot", "shot_goal_probability", "step", "team_masks", "team_sign",
]
