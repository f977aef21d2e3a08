"""Byte-accurate wire formats for swarm broadcasts.

All frames are little-endian with f32 payload values so every receiver
decodes bit-identical numbers; consensus comparisons happen on the
decoded values.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import MalformedFrame
from .gmm import GmmModel

WIRE_VERSION = 1

GMM_MAGIC = b"SFGM"
CAND_MAGIC = b"SFTC"
GBEST_MAGIC = b"SFPB"
POSE_MAGIC = b"SFPS"

_TRI = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


def gmm_frame_length(k):
    """32-byte header+pose plus 40 bytes per component."""
    return 32 + 40 * k


def encode_gmm_message(model, agent_id=0):
    k = model.n_components
    parts = [struct.pack("<4sIIII", GMM_MAGIC, WIRE_VERSION, agent_id, k, 0)]
    parts.append(struct.pack("<3f", *model.source_pose))
    for j in range(k):
        tri = [model.covariances[j][a, b] for a, b in _TRI]
        parts.append(struct.pack("<f3f6f", model.weights[j], *model.means[j], *tri))
    return b"".join(parts)


def decode_gmm_message(buf):
    model, _ = decode_gmm_frame(buf)
    return model


def decode_gmm_frame(buf):
    """Decode a GMM frame, returning (model, sender agent id)."""
    if len(buf) < 32:
        raise MalformedFrame("gmm frame shorter than header")
    magic, version, agent_id, k, _reserved = struct.unpack_from("<4sIIII", buf, 0)
    if magic != GMM_MAGIC:
        raise MalformedFrame("bad gmm magic")
    if version != WIRE_VERSION:
        raise MalformedFrame("unsupported gmm frame version")
    if len(buf) != gmm_frame_length(k):
        raise MalformedFrame("gmm frame length mismatch")
    pose = np.array(struct.unpack_from("<3f", buf, 20), dtype=np.float64)
    weights = np.empty(k)
    means = np.empty((k, 3))
    covs = np.empty((k, 3, 3))
    off = 32
    for j in range(k):
        vals = struct.unpack_from("<10f", buf, off)
        off += 40
        weights[j] = vals[0]
        means[j] = vals[1:4]
        for (a, b), v in zip(_TRI, vals[4:]):
            covs[j, a, b] = v
            covs[j, b, a] = v
    return GmmModel(weights, means, covs, pose), agent_id


def encode_candidate(agent_id, control_points, knot_dt, cost):
    """STGO candidate: all agents' control points plus the local cost."""
    cp = np.asarray(control_points, dtype=np.float64)
    n_agents, n_ctrl, _ = cp.shape
    head = struct.pack("<4sIIIIf", CAND_MAGIC, WIRE_VERSION, agent_id,
                       n_agents, n_ctrl, knot_dt)
    body = cp.astype("<f4").tobytes()
    tail = struct.pack("<f", cost)
    return head + body + tail


def decode_candidate(buf):
    """Returns (agent_id, control_points (N,n,3), knot_dt, cost)."""
    if len(buf) < 24:
        raise MalformedFrame("candidate frame shorter than header")
    magic, version, agent_id, n_agents, n_ctrl, knot_dt = struct.unpack_from("<4sIIIIf", buf, 0)
    if magic != CAND_MAGIC:
        raise MalformedFrame("bad candidate magic")
    if version != WIRE_VERSION:
        raise MalformedFrame("unsupported candidate version")
    body_len = n_agents * n_ctrl * 3 * 4
    if len(buf) != 24 + body_len + 4:
        raise MalformedFrame("candidate frame length mismatch")
    cp = np.frombuffer(buf, dtype="<f4", count=n_agents * n_ctrl * 3, offset=24)
    cp = cp.reshape(n_agents, n_ctrl, 3).astype(np.float64)
    (cost,) = struct.unpack_from("<f", buf, 24 + body_len)
    return agent_id, cp, float(np.float32(knot_dt)), float(cost)


def encode_gbest(agent_id, iteration, angles, cost):
    angles = np.asarray(angles, dtype=np.float64)
    head = struct.pack("<4sIIII", GBEST_MAGIC, WIRE_VERSION, agent_id,
                       iteration, angles.shape[0])
    return head + angles.astype("<f4").tobytes() + struct.pack("<f", cost)


def decode_gbest(buf):
    """Returns (agent_id, iteration, angles, cost)."""
    if len(buf) < 20:
        raise MalformedFrame("gbest frame shorter than header")
    magic, version, agent_id, iteration, n = struct.unpack_from("<4sIIII", buf, 0)
    if magic != GBEST_MAGIC:
        raise MalformedFrame("bad gbest magic")
    if version != WIRE_VERSION:
        raise MalformedFrame("unsupported gbest version")
    if len(buf) != 20 + 4 * n + 4:
        raise MalformedFrame("gbest frame length mismatch")
    angles = np.frombuffer(buf, dtype="<f4", count=n, offset=20).astype(np.float64)
    (cost,) = struct.unpack_from("<f", buf, 20 + 4 * n)
    return agent_id, iteration, angles, float(cost)


def encode_pose(agent_id, position, velocity, yaw):
    return struct.pack("<4sII3f3ff", POSE_MAGIC, WIRE_VERSION, agent_id,
                       *position, *velocity, yaw)


def decode_pose(buf):
    """Returns (agent_id, position, velocity, yaw)."""
    if len(buf) != 40:
        raise MalformedFrame("pose frame length mismatch")
    vals = struct.unpack("<4sII3f3ff", buf)
    if vals[0] != POSE_MAGIC:
        raise MalformedFrame("bad pose magic")
    if vals[1] != WIRE_VERSION:
        raise MalformedFrame("unsupported pose version")
    pos = np.array(vals[2 + 1:2 + 4], dtype=np.float64)
    vel = np.array(vals[2 + 4:2 + 7], dtype=np.float64)
    return vals[2], pos, vel, float(vals[-1])
