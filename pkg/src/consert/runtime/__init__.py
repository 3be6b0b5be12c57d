"""File-backed registry and event-driven evaluation sessions."""

from consert.runtime.registry import Registry, RegistryError, content_hash
from consert.runtime.replay import ReplayError, Transcript, TranscriptLine, replay, replay_file
from consert.runtime.session import (
    Change,
    Session,
    SessionError,
    UnresolvableManifest,
    apply_event,
    diff_results,
    format_delta,
    replay_log,
)

__all__ = [
    "Change",
    "Registry",
    "RegistryError",
    "ReplayError",
    "Session",
    "SessionError",
    "Transcript",
    "TranscriptLine",
    "UnresolvableManifest",
    "apply_event",
    "content_hash",
    "diff_results",
    "format_delta",
    "replay",
    "replay_file",
    "replay_log",
]
