"""Broadcast message bus with fixed latency, optional drops, byte
accounting per message kind, and a length-prefixed binary replay log."""

from __future__ import annotations

import struct
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

KINDS = ("gmm_scan", "pose", "dpso_best", "stgo_candidate")
_KIND_ID = {k: i for i, k in enumerate(KINDS)}


@dataclass
class SwarmMessage:
    kind: str
    sender: int
    timestamp: float
    payload: bytes


class MessageBus:
    """All-to-all broadcast fabric for n_agents.

    Messages sent at time t become visible to every other agent once
    `deliver(clock)` is called with clock >= t + latency.  A drop
    probability (seeded, per receiver) and a kind blocklist support the
    ablation modes.  The sender never receives its own broadcast.
    """

    def __init__(self, n_agents, latency=0.1, drop_prob=0.0, seed=0,
                 drop_kinds=()):
        self.n_agents = n_agents
        self.latency = latency
        self.drop_prob = drop_prob
        self.drop_kinds = frozenset(drop_kinds)
        self.rng = np.random.default_rng(seed)
        self.pending = []        # (due time, sequence, SwarmMessage)
        self._seq = 0
        self.inboxes = [[] for _ in range(n_agents)]
        self.sent_bytes = defaultdict(int)
        self.sent_count = defaultdict(int)
        self.delivered_bytes = defaultdict(int)
        self.log = []            # every broadcast, in send order

    def broadcast(self, msg, immediate=False):
        self.log.append(msg)
        self.sent_bytes[msg.kind] += len(msg.payload)
        self.sent_count[msg.kind] += 1
        if msg.kind in self.drop_kinds:
            return
        due = msg.timestamp if immediate else msg.timestamp + self.latency
        self.pending.append((due, self._seq, msg))
        self._seq += 1

    def deliver(self, clock):
        """Move due messages into receiver inboxes (deterministic order)."""
        due = [p for p in self.pending if p[0] <= clock + 1e-9]
        self.pending = [p for p in self.pending if p[0] > clock + 1e-9]
        due.sort(key=lambda p: (p[0], p[1]))
        for _, _, msg in due:
            for rcv in range(self.n_agents):
                if rcv == msg.sender:
                    continue
                if self.drop_prob > 0.0 and self.rng.random() < self.drop_prob:
                    continue
                self.inboxes[rcv].append(msg)
                self.delivered_bytes[msg.kind] += len(msg.payload)

    def collect(self, agent_id):
        out = self.inboxes[agent_id]
        self.inboxes[agent_id] = []
        return out

    def account_virtual(self, kind, n_bytes, count=1):
        """Count traffic carried outside the step loop (DPSO exchanges)."""
        self.sent_bytes[kind] += n_bytes
        self.sent_count[kind] += count

    def byte_summary(self):
        return {k: int(self.sent_bytes.get(k, 0)) for k in KINDS}

    def write_log(self, path):
        with open(path, "wb") as f:
            for msg in self.log:
                head = struct.pack("<BIdI", _KIND_ID[msg.kind], msg.sender,
                                   msg.timestamp, len(msg.payload))
                f.write(head + msg.payload)

    @staticmethod
    def read_log(path):
        msgs = []
        head_len = struct.calcsize("<BIdI")
        with open(path, "rb") as f:
            buf = f.read()
        off = 0
        while off < len(buf):
            kind_id, sender, ts, n = struct.unpack_from("<BIdI", buf, off)
            off += head_len
            msgs.append(SwarmMessage(KINDS[kind_id], sender, ts,
                                     buf[off:off + n]))
            off += n
        return msgs
