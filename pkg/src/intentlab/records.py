"""Run records: the durable account of one training job.

A record moves queued -> running -> finished | failed, accumulates
timestamped step events, and lists its artifact files. The store journals
every mutation; this module only defines the in-memory shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .utils import utc_now_iso

RUN_STATES = ("queued", "running", "finished", "failed")
_TRANSITIONS = {"queued": ("running", "failed"), "running": ("finished", "failed"),
                "finished": (), "failed": ()}


@dataclass
class RunRecord:
    run_id: str
    config: dict
    state: str = "queued"
    events: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    created_at: str = field(default_factory=utc_now_iso)
    finished_at: str | None = None
    error: str | None = None

    def __post_init__(self):
        if self.state not in RUN_STATES:
            raise ValueError(f"unknown run state: {self.state!r}")

    def append_event(self, step: str, message: str, ts: str | None = None) -> dict:
        event = {"ts": ts or utc_now_iso(), "step": step, "message": message}
        self.events.append(event)
        return event

    def transition(self, new_state: str, error: str | None = None,
                   ts: str | None = None) -> None:
        if new_state not in _TRANSITIONS[self.state]:
            raise ValueError(f"illegal state transition: {self.state} -> {new_state}")
        self.state = new_state
        if new_state in ("finished", "failed"):
            self.finished_at = ts or utc_now_iso()
        if error is not None:
            self.error = error

    @property
    def terminal(self) -> bool:
        return self.state in ("finished", "failed")

    def to_jsonable(self) -> dict:
        return {"run_id": self.run_id, "config": self.config, "state": self.state,
                "events": self.events, "artifacts": self.artifacts,
                "created_at": self.created_at, "finished_at": self.finished_at,
                "error": self.error}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "RunRecord":
        return cls(obj["run_id"], obj["config"], obj["state"], list(obj["events"]),
                   dict(obj["artifacts"]), obj["created_at"], obj.get("finished_at"),
                   obj.get("error"))


def allowed_transition(old: str, new: str) -> bool:
    return new in _TRANSITIONS.get(old, ())
