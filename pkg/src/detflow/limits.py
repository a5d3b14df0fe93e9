"""Resource limits. Environment variables override the defaults."""

import os

DEFAULT_NODE_LIMIT = 22
DEFAULT_SUPPORT_LIMIT = 1 << 24
DEFAULT_UNFOLDED_LIMIT = 18


def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    return int(raw)


def node_limit():
    """Largest node count for exhaustive cut enumeration (``DETFLOW_LIMIT_NODES``)."""
    return _env_int("DETFLOW_LIMIT_NODES", DEFAULT_NODE_LIMIT)


def support_limit():
    """Largest joint transmit support enumerated by the entropy engine (``DETFLOW_LIMIT_SUPPORT``)."""
    return _env_int("DETFLOW_LIMIT_SUPPORT", DEFAULT_SUPPORT_LIMIT)


def unfolded_limit():
    """Largest number of free node-stage bits enumerated exhaustively (``DETFLOW_LIMIT_UNFOLDED``)."""
    return _env_int("DETFLOW_LIMIT_UNFOLDED", DEFAULT_UNFOLDED_LIMIT)


DEFAULT_UNFOLD_NODE_LIMIT = 4096


def unfold_node_limit():
    """Largest node count of an emitted unfolded network (``DETFLOW_LIMIT_UNFOLD_NODES``)."""
    return _env_int("DETFLOW_LIMIT_UNFOLD_NODES", DEFAULT_UNFOLD_NODE_LIMIT)
