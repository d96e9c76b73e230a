"""Replay analysis: event graph, match statistics, formation metrics and critic traces."""
from .diagnostics import checkpoint_sweep, trace_records, value_td_diagnostics
from .formation import (FormationMetrics, convex_hull, formation_metrics, hull_area, length_per_width,
                        polygon_area, separateness, weighted_centroid)
from .graph import Edge, GameGraph, PossessionSegment, build_game_graph, event_counts, possession_segments
from .radar import RADAR_METRICS, radar_csv, radar_export, radar_table, read_radar_csv, skill_profile
from .stats import MatchStats, TeamStats, match_stats

__all__ = [
    "Edge", "FormationMetrics", "GameGraph", "MatchStats", "PossessionSegment", "RADAR_METRICS", "TeamStats",
    "build_game_graph", "checkpoint_sweep", "convex_hull", "event_counts", "formation_metrics", "hull_area",
    "length_per_width", "match_stats", "polygon_area", "possession_segments", "radar_csv", "radar_export",
    "radar_table", "read_radar_csv", "separateness", "skill_profile", "trace_records", "value_td_diagnostics",
    "weighted_centroid",
]
