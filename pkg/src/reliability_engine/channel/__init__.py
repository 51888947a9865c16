"""Agent-Kanäle: HTTP-Endpunkte und deterministischer Simulator."""

from .channel import Channel, ChannelLike, generate, get_channel, intrinsic_confidence
from .channel_models import AgentOutput, ChannelBackend, ChannelConfig, SyntheticChannelSpec
from .synthetic_backend import draw_scope, read_quality_marker

__all__ = [
    "AgentOutput",
    "Channel",
    "ChannelBackend",
    "ChannelConfig",
    "ChannelLike",
    "SyntheticChannelSpec",
    "draw_scope",
    "generate",
    "get_channel",
    "intrinsic_confidence",
    "read_quality_marker",
]
