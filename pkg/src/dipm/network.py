"""Synchronous, lossless round-based message passing between agents.

The scheduler moves messages in lockstep rounds: everything sent during a
round is delivered at the next round boundary, and only pairs of agents
that share at least one variable may exchange messages. Message counts are
exact and kept per agent and per message kind, so tests can assert the
communication pattern of an algorithm rather than trust it.

Consensus primitives (boolean AND, minimum) are realized by flooding,
which is exact after diameter-many rounds on a connected graph. On a
disconnected graph with more than one agent they raise, since values
cannot propagate between components; solvers reject such problems up
front. Fully decoupled single-agent problems are trivially connected.

Within a round, each agent's update is a pure function of its own state
and inbox; the round boundary is the only synchronization point. Inboxes
are sorted by sender so reductions are reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedNetworkError, StructureError

KIND_SHARED = "shared-components"
KIND_FLAG = "convergence-flag"
KIND_MIN = "step-candidate"


@dataclass(frozen=True)
class SharedComponentMsg:
    """Contributions of one agent to the variables it shares with the receiver."""

    sender: int
    indices: np.ndarray
    values: np.ndarray


def _bfs_components(neighbors):
    n = len(neighbors)
    comp = [-1] * n
    c = 0
    for root in range(n):
        if comp[root] >= 0:
            continue
        comp[root] = c
        stack = [root]
        while stack:
            u = stack.pop()
            for w in neighbors[u]:
                if comp[w] < 0:
                    comp[w] = c
                    stack.append(w)
        c += 1
    return comp, c


def _diameter(neighbors):
    """Exact graph diameter by BFS from every node (desk-scale graphs)."""
    n = len(neighbors)
    best = 0
    for root in range(n):
        dist = [-1] * n
        dist[root] = 0
        frontier = [root]
        while frontier:
            nxt = []
            for u in frontier:
                for w in neighbors[u]:
                    if dist[w] < 0:
                        dist[w] = dist[u] + 1
                        nxt.append(w)
            frontier = nxt
        best = max(best, max(dist))
    return best


class RoundScheduler:
    """Round-based transport over the coupling graph.

    The transport itself accepts any topology; connectivity only matters to
    the consensus operations, which check it explicitly.
    """

    def __init__(self, coupling):
        self.coupling = coupling
        self.n_agents = coupling.n_agents
        self.neighbors = coupling.neighbors
        self._neighbor_sets = [set(ne) for ne in self.neighbors]
        self.round_index = 0
        self.sent = np.zeros(self.n_agents, dtype=np.int64)
        self.sent_by_kind = {}
        self.total_sent = 0
        self.total_delivered = 0
        _, n_comp = _bfs_components(self.neighbors)
        self.is_connected = n_comp == 1
        self.diameter = _diameter(self.neighbors) if self.is_connected else None
        # wiring for the shared-component exchange, built once
        self._plan = self._build_exchange_plan(coupling)

    def _build_exchange_plan(self, coupling):
        plan = []
        for i in range(self.n_agents):
            g2l_i = coupling.global_to_local[i]
            entries = []
            for j in self.neighbors[i]:
                shared = [
                    g for g in coupling.index_arrays[i].tolist()
                    if g in coupling.global_to_local[j]
                ]
                g_idx = np.array(shared, dtype=np.intp)
                local_pos = np.array([g2l_i[g] for g in shared], dtype=np.intp)
                entries.append((j, g_idx, local_pos))
            plan.append(entries)
        return plan

    def deliver_round(self, outgoing, kind):
        """Deliver one synchronous round.

        ``outgoing[i]`` is a list of (destination, payload) pairs from agent
        i. Returns per-agent inboxes as lists of (sender, payload), sorted
        by sender. Raises if a pair of non-neighbors tries to communicate.
        """
        inboxes = [[] for _ in range(self.n_agents)]
        count = self.sent_by_kind.setdefault(kind, np.zeros(self.n_agents, dtype=np.int64))
        for src, msgs in enumerate(outgoing):
            for dst, payload in msgs:
                if dst not in self._neighbor_sets[src]:
                    raise StructureError(
                        f"agent {src} may not message agent {dst}: not neighbors"
                    )
                if kind == KIND_MIN and not math.isfinite(payload):
                    raise StructureError("consensus payload must be finite")
                inboxes[dst].append((src, payload))
                self.sent[src] += 1
                count[src] += 1
                self.total_sent += 1
        for box in inboxes:
            box.sort(key=lambda sv: sv[0])
            self.total_delivered += len(box)
        self.round_index += 1
        return inboxes

    def messages_of_kind(self, kind):
        arr = self.sent_by_kind.get(kind)
        return 0 if arr is None else int(arr.sum())


def exchange_shared_components(scheduler, contributions):
    """One data round: average each shared variable over its owners.

    Every agent sends one message per neighbor, carrying exactly the
    components both parties own. Each agent then averages, per variable,
    its own contribution with the received ones in ascending agent order,
    which reproduces the dense consensus projection bit for bit.
    """
    coupling = scheduler.coupling
    outgoing = []
    for i, entries in enumerate(scheduler._plan):
        s = contributions[i]
        outgoing.append(
            [(j, SharedComponentMsg(i, g_idx, s[local_pos].copy()))
             for j, g_idx, local_pos in entries]
        )
    inboxes = scheduler.deliver_round(outgoing, KIND_SHARED)

    # shared(i, j) is listed in ascending global order on both sides, so a
    # payload from j lands at the positions of shared(i, j) in i's frame
    recv_pos = [
        {j: local_pos for j, _, local_pos in entries} for entries in scheduler._plan
    ]
    averaged = []
    for i in range(scheduler.n_agents):
        acc = np.zeros(len(coupling.index_arrays[i]))
        own_added = False
        for src, msg in inboxes[i]:
            if not own_added and i < src:
                acc += contributions[i]
                own_added = True
            acc[recv_pos[i][src]] += msg.values
        if not own_added:
            acc += contributions[i]
        averaged.append(acc / coupling.degrees[coupling.index_arrays[i]])
    return averaged


def _flood(scheduler, values, combine, kind):
    if not scheduler.is_connected:
        raise DisconnectedNetworkError(
            "coupling graph is disconnected; values cannot propagate between components"
        )
    state = list(values)
    rounds = scheduler.diameter
    for _ in range(rounds):
        outgoing = [
            [(j, state[i]) for j in scheduler.neighbors[i]]
            for i in range(scheduler.n_agents)
        ]
        inboxes = scheduler.deliver_round(outgoing, kind)
        state = [
            combine(state[i], [payload for _, payload in inboxes[i]])
            for i in range(scheduler.n_agents)
        ]
    return state, rounds


def all_agree(scheduler, flags):
    """Logical AND of per-agent flags, flooded over the coupling graph.

    Returns (decision, rounds_used); after diameter-many rounds every agent
    holds the same decision.
    """
    flags = [bool(f) for f in flags]
    state, rounds = _flood(
        scheduler, flags, lambda own, recv: own and all(recv), KIND_FLAG
    )
    return state[0], rounds


def min_consensus(scheduler, values):
    """Minimum of per-agent scalars, flooded over the coupling graph."""
    values = [float(v) for v in values]
    if not all(math.isfinite(v) for v in values):
        raise StructureError("consensus values must be finite")
    state, rounds = _flood(
        scheduler, values, lambda own, recv: min([own] + recv), KIND_MIN
    )
    return state[0], rounds
