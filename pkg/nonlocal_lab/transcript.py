import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

from nonlocal_lab.errors import InvariantBreach

LOCAL_OP = 'localOp'
LOCAL_MEASURE = 'localMeasure'
CLASSICAL_SEND = 'classicalSend'
CLASSICAL_RECEIVE = 'classicalReceive'

QUANTUM_KINDS = (LOCAL_OP, LOCAL_MEASURE)
CLASSICAL_KINDS = (CLASSICAL_SEND, CLASSICAL_RECEIVE)

QUANTUM_TICK = 0
SEND_TICK = 1
RECEIVE_TICK = 2
ANNOUNCE_TICK = 3


@dataclass
class Event:
    tick: int
    site: str
    kind: str
    payload: Dict[str, Any]
    depends_on: Tuple[str, ...] = ()

    def to_json(self) -> Dict[str, Any]:
        return {'tick': self.tick, 'site': self.site, 'kind': self.kind, 'payload': self.payload}


@dataclass
class Transcript:
    events: List[Event] = field(default_factory=list)

    def record(self, tick: int, site: str, kind: str, payload: Dict[str, Any],
               depends_on: Sequence[str] = ()) -> Event:
        event = Event(tick, site, kind, payload, tuple(depends_on))
        self.events.append(event)
        return event

    def count(self, kind: str, op: Optional[str] = None) -> int:
        return sum(1 for e in self.events if e.kind == kind and (op is None or e.payload.get('op') == op))

    def to_jsonl(self) -> str:
        return ''.join(json.dumps(e.to_json(), sort_keys=True) + '\n' for e in self.events)


def check_causality(transcript: Transcript) -> None:
    """Structural check that no event uses a value its site cannot yet hold.

    A site may use its own records at or after the tick they were made and a
    received value only strictly after its receive tick. Every receive must
    match an earlier send of the same record at a lower tick.
    """
    available: Dict[str, Dict[str, Tuple[int, bool]]] = {}
    sent: Dict[Tuple[str, str], int] = {}
    for index, event in enumerate(transcript.events):
        held = available.setdefault(event.site, {})
        for name in event.depends_on:
            if name not in held:
                raise InvariantBreach(f"event {index} at {event.site} uses '{name}' it never held")
            tick, received = held[name]
            if event.tick < tick or (received and event.tick <= tick):
                raise InvariantBreach(f"event {index} at {event.site} uses '{name}' before it arrived")
        if event.kind == LOCAL_MEASURE and 'record' in event.payload:
            held[event.payload['record']] = (event.tick, False)
        elif event.kind == CLASSICAL_SEND:
            sent[(event.payload['record'], event.payload['to'])] = event.tick
        elif event.kind == CLASSICAL_RECEIVE:
            key = (event.payload['record'], event.site)
            if key not in sent or sent[key] >= event.tick:
                raise InvariantBreach(f"receive of '{key[0]}' at {event.site} has no earlier send")
            held[event.payload['record']] = (event.tick, True)


def check_instantaneity(transcript: Transcript) -> None:
    """Quantum events share one tick per site; classical traffic comes strictly later."""
    quantum_ticks: Dict[str, Set[int]] = {}
    for event in transcript.events:
        if event.kind in QUANTUM_KINDS:
            quantum_ticks.setdefault(event.site, set()).add(event.tick)
    last_quantum = max((t for ticks in quantum_ticks.values() for t in ticks), default=-1)
    for site, ticks in quantum_ticks.items():
        if len(ticks) != 1:
            raise InvariantBreach(f"quantum events at {site} span ticks {sorted(ticks)}")
    for event in transcript.events:
        if event.kind in CLASSICAL_KINDS and event.tick <= last_quantum:
            raise InvariantBreach(f"classical {event.kind} at tick {event.tick} is not after the quantum stage")
