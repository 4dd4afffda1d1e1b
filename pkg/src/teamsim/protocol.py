"""Team-assembly state machine for the agency conditions.

Participants start as singleton groups and grow by invitation: an
invitation goes to one target and snapshots both groups; the merge
happens only when every recipient-group member accepts, and never
produces a group larger than four. Membership changes void any open
invitation whose snapshots went stale.

All mutations are event-sourced: commands validate, emit events, and
apply them through one dispatcher, so replaying a log reproduces the
final state exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import TEAM_SIZE, Partition

EVENT_KINDS = (
    "query_issued",
    "recommendations_shown",
    "invitation_sent",
    "response_recorded",
    "groups_merged",
    "member_left",
    "deadline_fill",
)
RESPONSES = ("accepted", "declined", "ignored")
LOG_SCHEMA = "teamsim.assembly-log.v1"


class AssemblyError(ValueError):
    """A command that violates the assembly rules."""


@dataclass(frozen=True)
class Event:
    round: int
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"round": self.round, "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        return cls(round=int(d["round"]), kind=d["kind"], payload=d["payload"])


@dataclass
class Invitation:
    id: str
    sender_id: str
    sender_group: tuple[str, ...]
    recipient_group: tuple[str, ...]
    responses: dict[str, str]
    status: str = "open"


class AssemblyState:
    """Single-writer assembly session state."""

    def __init__(self, member_ids: Iterable[str]):
        members = list(member_ids)
        if len(set(members)) != len(members):
            raise ValueError("duplicate member ids")
        if not members:
            raise ValueError("empty session")
        self.members: tuple[str, ...] = tuple(members)
        self._groups: dict[str, tuple[str, ...]] = {m: (m,) for m in members}
        self._group_key: dict[str, str] = {m: m for m in members}
        self.invitations: dict[str, Invitation] = {}
        self.round: int = 0
        self.event_log: list[Event] = []
        self._inv_seq: int = 0

    # -- read side ---------------------------------------------------------

    def group_of(self, member_id: str) -> tuple[str, ...]:
        if member_id not in self._group_key:
            raise AssemblyError(f"unknown member {member_id!r}")
        return self._groups[self._group_key[member_id]]

    def groups(self) -> list[tuple[str, ...]]:
        return [self._groups[k] for k in sorted(self._groups)]

    def open_invitations(self) -> list[Invitation]:
        return [inv for inv in self.invitations.values() if inv.status == "open"]

    def merged_count(self) -> int:
        return sum(1 for e in self.event_log if e.kind == "groups_merged")

    # -- commands ----------------------------------------------------------

    def advance_round(self) -> int:
        self.round += 1
        return self.round

    def record_query(self, searcher_id: str, query_payload: dict) -> None:
        self.group_of(searcher_id)
        self._emit("query_issued", {"searcher_id": searcher_id, "query": query_payload})

    def record_recommendations(self, searcher_id: str, shown: list[dict]) -> None:
        self.group_of(searcher_id)
        self._emit("recommendations_shown", {"searcher_id": searcher_id, "shown": shown})

    def send_invitation(self, sender_id: str, target_id: str) -> str:
        sender_group = self.group_of(sender_id)
        recipient_group = self.group_of(target_id)
        if sender_group == recipient_group:
            raise AssemblyError("already teammates")
        if len(sender_group) + len(recipient_group) > TEAM_SIZE:
            raise AssemblyError("merge would exceed team size")
        pair = frozenset((sender_group, recipient_group))
        for inv in self.invitations.values():
            if inv.status == "open" and frozenset((inv.sender_group, inv.recipient_group)) == pair:
                return inv.id
        inv_id = f"inv-{self._inv_seq + 1:05d}"
        self._emit(
            "invitation_sent",
            {
                "invitation_id": inv_id,
                "sender_id": sender_id,
                "target_id": target_id,
                "sender_group": list(sender_group),
                "recipient_group": list(recipient_group),
            },
        )
        return inv_id

    def respond(self, invitation_id: str, member_id: str, response: str) -> None:
        if response not in RESPONSES:
            raise ValueError(f"unknown response {response!r}")
        inv = self.invitations.get(invitation_id)
        if inv is None:
            raise AssemblyError(f"unknown invitation {invitation_id!r}")
        if inv.status != "open":
            raise AssemblyError(f"invitation {invitation_id!r} is {inv.status}, not open")
        if inv.responses.get(member_id) != "pending":
            raise AssemblyError(f"{member_id!r} has no pending response on {invitation_id!r}")
        self._emit(
            "response_recorded",
            {"invitation_id": invitation_id, "member_id": member_id, "response": response},
        )
        inv = self.invitations[invitation_id]
        if inv.status == "open" and all(r == "accepted" for r in inv.responses.values()):
            merged = sorted(set(inv.sender_group) | set(inv.recipient_group))
            self._emit("groups_merged", {"invitation_id": invitation_id, "members": merged})

    def leave_group(self, member_id: str) -> None:
        group = self.group_of(member_id)
        if len(group) == 1:
            return
        self._emit("member_left", {"member_id": member_id, "old_group": list(group)})

    def finalize(self, rng: np.random.Generator, team_size: int = TEAM_SIZE) -> Partition:
        """Expire open invitations, keep full groups, randomly pack the rest.

        Members of groups below team_size are pooled and shuffled into
        fresh teams of team_size; the leftover become solos. The packing
        is recorded in the deadline_fill event, so replay needs no rng.
        """
        full = [g for g in self.groups() if len(g) == team_size]
        pool: list[str] = []
        for g in self.groups():
            if len(g) < team_size:
                pool.extend(g)
        pool.sort()
        shuffled = [pool[i] for i in rng.permutation(len(pool))] if pool else []
        packed = [
            shuffled[i * team_size : (i + 1) * team_size]
            for i in range(len(shuffled) // team_size)
        ]
        solos = shuffled[(len(shuffled) // team_size) * team_size :]
        teams = [list(g) for g in full] + packed
        self._emit("deadline_fill", {"teams": teams, "solos": sorted(solos)})
        return self.partition()

    def partition(self) -> Partition:
        """Current groups as a Partition: multi-member groups are teams,
        singletons are solos. After finalize this is the final assignment."""
        teams = [g for g in self.groups() if len(g) > 1]
        solos = [g[0] for g in self.groups() if len(g) == 1]
        return Partition.build(teams, solos)

    # -- event machinery ----------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> None:
        event = Event(round=self.round, kind=kind, payload=payload)
        self._apply(event)
        self.event_log.append(event)

    def _apply(self, event: Event) -> None:
        kind = event.kind
        if kind == "invitation_sent":
            p = event.payload
            inv = Invitation(
                id=p["invitation_id"],
                sender_id=p["sender_id"],
                sender_group=tuple(p["sender_group"]),
                recipient_group=tuple(p["recipient_group"]),
                responses={m: "pending" for m in p["recipient_group"]},
            )
            self.invitations[inv.id] = inv
            self._inv_seq = max(self._inv_seq, int(inv.id.split("-")[1]))
        elif kind == "response_recorded":
            p = event.payload
            inv = self.invitations[p["invitation_id"]]
            inv.responses[p["member_id"]] = p["response"]
            if p["response"] == "declined":
                inv.status = "rejected"
        elif kind == "groups_merged":
            p = event.payload
            inv = self.invitations[p["invitation_id"]]
            inv.status = "merged"
            members = tuple(p["members"])
            for key in {self._group_key[m] for m in members}:
                del self._groups[key]
            new_key = min(members)
            self._groups[new_key] = members
            for m in members:
                self._group_key[m] = new_key
            self._void_stale()
        elif kind == "member_left":
            p = event.payload
            member = p["member_id"]
            old_key = self._group_key[member]
            remaining = tuple(m for m in self._groups[old_key] if m != member)
            del self._groups[old_key]
            new_key = min(remaining)
            self._groups[new_key] = remaining
            for m in remaining:
                self._group_key[m] = new_key
            self._groups[member] = (member,)
            self._group_key[member] = member
            self._void_stale()
        elif kind == "deadline_fill":
            p = event.payload
            for inv in self.invitations.values():
                if inv.status == "open":
                    inv.status = "expired"
            self._groups = {}
            self._group_key = {}
            for team in p["teams"]:
                key = min(team)
                self._groups[key] = tuple(sorted(team))
                for m in team:
                    self._group_key[m] = key
            for solo in p["solos"]:
                self._groups[solo] = (solo,)
                self._group_key[solo] = solo
        elif kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")

    def _void_stale(self) -> None:
        """Void open invitations whose group snapshots no longer exist."""
        live = set(self._groups.values())
        for inv in self.invitations.values():
            if inv.status != "open":
                continue
            if inv.sender_group not in live or inv.recipient_group not in live:
                inv.status = "voided"

    # -- validation and replay ----------------------------------------------

    def check_invariants(self) -> None:
        seen: list[str] = []
        for key, group in self._groups.items():
            if not 1 <= len(group) <= TEAM_SIZE:
                raise AssertionError(f"group size out of bounds: {group}")
            if key != min(group):
                raise AssertionError(f"group key {key!r} is not the min member")
            seen.extend(group)
            for m in group:
                if self._group_key[m] != key:
                    raise AssertionError(f"member map out of sync for {m!r}")
        if sorted(seen) != sorted(self.members):
            raise AssertionError("groups do not partition the members")
        live = set(self._groups.values())
        for inv in self.invitations.values():
            if set(inv.responses) != set(inv.recipient_group):
                raise AssertionError(f"response keys mismatch on {inv.id}")
            if inv.status == "open":
                if inv.sender_group not in live or inv.recipient_group not in live:
                    raise AssertionError(f"open invitation {inv.id} has stale snapshots")
                if len(inv.sender_group) + len(inv.recipient_group) > TEAM_SIZE:
                    raise AssertionError(f"open invitation {inv.id} would overfill a team")
            if inv.status == "merged" and any(
                r != "accepted" for r in inv.responses.values()
            ):
                raise AssertionError(f"merged invitation {inv.id} without full acceptance")
        rounds = [e.round for e in self.event_log]
        if rounds != sorted(rounds):
            raise AssertionError("event rounds are not monotone")
        merges_applied = sum(1 for e in self.event_log if e.kind == "groups_merged")
        merges_status = sum(1 for i in self.invitations.values() if i.status == "merged")
        if merges_applied != merges_status:
            raise AssertionError("merged-invitation count disagrees with the log")

    def snapshot(self) -> dict:
        """Comparable view of the full state (used by replay tests)."""
        return {
            "groups": sorted(self._groups.values()),
            "round": self.round,
            "invitations": {
                iid: (inv.sender_id, inv.sender_group, inv.recipient_group,
                      tuple(sorted(inv.responses.items())), inv.status)
                for iid, inv in self.invitations.items()
            },
            "events": [e.to_dict() for e in self.event_log],
        }


def replay(member_ids: Iterable[str], events: Sequence[Event]) -> AssemblyState:
    """Fold an event log over a fresh state; validates round monotonicity."""
    state = AssemblyState(member_ids)
    last_round = 0
    for event in events:
        if event.round < last_round:
            raise AssemblyError("event rounds must be non-decreasing")
        state.round = event.round
        last_round = event.round
        state._apply(event)
        state.event_log.append(event)
    return state


def write_log(path, member_ids: Sequence[str], events: Sequence[Event]) -> None:
    """Persist a session log: one header line, then one event per line."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"schema": LOG_SCHEMA, "members": sorted(member_ids)}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for event in events:
            fh.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")


def read_log(path) -> tuple[list[str], list[Event]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"empty log file {path}")
    header = json.loads(lines[0])
    if header.get("schema") != LOG_SCHEMA:
        raise ValueError(f"unexpected log schema in {path}")
    events = [Event.from_dict(json.loads(line)) for line in lines[1:]]
    return list(header["members"]), events
