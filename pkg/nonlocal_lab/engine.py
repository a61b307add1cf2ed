"""LOCC run engine: parties, a named quantum register, ebits and a transcript.

Every protocol is written against ProtocolRun. Quantum events happen at the
quantum tick; results are combined afterwards through classical sends and
receives, and the combined value is announced last.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from nonlocal_lab import bell, meters, statevec, transcript as tr
from nonlocal_lab.bell import BellKind, EbitPool
from nonlocal_lab.branching import Branch, as_chooser
from nonlocal_lab.errors import PreconditionError
from nonlocal_lab.simple_logger import log
from nonlocal_lab.statevec import DensityMatrix, Ket, Operator


@dataclass
class Party:
    id: str
    site: str
    owned: List[str] = field(default_factory=list)
    record: List[Tuple[str, Any]] = field(default_factory=list)


class Register:
    """A ket whose subsystems are addressed by name."""

    def __init__(self, psi: Ket, names: Sequence[str]):
        if len(names) != len(psi.dims) or len(set(names)) != len(names):
            raise PreconditionError(f"need {len(psi.dims)} distinct subsystem names, got {list(names)}")
        self.psi = psi
        self.names = list(names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise PreconditionError(f"no subsystem named '{name}'") from None

    def indices(self, names: Sequence[str]) -> List[int]:
        return [self.index(n) for n in names]

    def add(self, names: Sequence[str], ket: Ket) -> None:
        clash = set(names) & set(self.names)
        if clash:
            raise PreconditionError(f"subsystem names already in use: {sorted(clash)}")
        self.psi = statevec.tensor(self.psi, ket)
        self.names.extend(names)

    def apply(self, op: Operator, names: Sequence[str]) -> None:
        self.psi = statevec.apply(op, self.psi, self.indices(names))

    def measure(self, names: Sequence[str], projectors: Sequence[Operator], chooser, label: str = 'outcome') -> int:
        k, _, self.psi = statevec.measure_projective(self.psi, projectors, chooser, self.indices(names), label)
        return k

    def measure_basis(self, name: str, chooser, label: str = 'outcome') -> int:
        dim = self.psi.dims[self.index(name)]
        return self.measure([name], statevec.computational_projectors(dim), chooser, label)

    def discard(self, names: Sequence[str], local_state: Ket) -> None:
        indices = self.indices(names)
        self.psi = statevec.factor_out(self.psi, indices, local_state)
        self.names = [n for i, n in enumerate(self.names) if i not in indices]

    def rename(self, old: str, new: str) -> None:
        if new in self.names:
            raise PreconditionError(f"subsystem name '{new}' already in use")
        self.names[self.index(old)] = new

    def reduced(self, names: Sequence[str]) -> DensityMatrix:
        return statevec.reduced_density(self.psi, self.indices(names))

    def ordered(self, names: Sequence[str]) -> Ket:
        """The register restricted to exactly these names, in this order."""
        if sorted(names) != sorted(self.names):
            raise PreconditionError(f"ordering {list(names)} does not cover {self.names}")
        order = self.indices(names)
        return Ket(tuple(self.psi.dims[i] for i in order), np.transpose(self.psi.tensor, order).reshape(-1))


@dataclass
class ProtocolResult:
    protocol: str
    inferred_value: Any
    post_state: Union[Ket, str]
    resources: Dict[str, int]
    transcript: tr.Transcript
    success: bool = True
    records: Dict[str, Any] = field(default_factory=dict)
    final_register: Optional[Register] = None
    record_sites: Dict[str, str] = field(default_factory=dict)
    owners: Dict[str, str] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    def summary(self) -> Dict[str, Any]:
        post = self.post_state if isinstance(self.post_state, str) else self.post_state.to_json()
        return {
            'protocol': self.protocol,
            'inferred_value': self.inferred_value,
            'success': self.success,
            'post_state': post,
            'resources': dict(self.resources),
            'records': dict(self.records),
            'details': dict(self.details),
        }


class ProtocolRun:
    def __init__(self, protocol: str, psi: Ket, names: Sequence[str], owners: Dict[str, str], rng,
                 pool: Optional[EbitPool] = None):
        self.protocol = protocol
        self.chooser = as_chooser(rng)
        self.register = Register(psi, names)
        self.pool = pool
        self.transcript = tr.Transcript()
        self.parties: Dict[str, Party] = {}
        self.owners: Dict[str, str] = {}
        self.records: Dict[str, Any] = {}
        self.record_sites: Dict[str, str] = {}
        for name in names:
            self._own(owners[name], name)

    def party(self, site: str) -> Party:
        if site not in self.parties:
            self.parties[site] = Party(site.lower(), site)
        return self.parties[site]

    def _own(self, site: str, name: str) -> None:
        previous = self.owners.get(name)
        if previous is not None:
            self.parties[previous].owned.remove(name)
        self.party(site).owned.append(name)
        self.owners[name] = site

    def _check_owned(self, site: str, names: Sequence[str]) -> None:
        foreign = [n for n in names if self.owners.get(n) != site]
        if foreign:
            raise PreconditionError(f"site {site} does not hold {foreign}")

    def _store(self, site: str, record: str, value: Any) -> None:
        if record in self.records:
            raise PreconditionError(f"record '{record}' written twice")
        self.records[record] = value
        self.record_sites[record] = site
        self.party(site).record.append((record, value))

    # Quantum events

    def op(self, site: str, op: Operator, names: Sequence[str], label: str, depends_on: Sequence[str] = ()) -> None:
        self._check_owned(site, names)
        self.register.apply(op, names)
        self.transcript.record(tr.QUANTUM_TICK, site, tr.LOCAL_OP, {'op': label, 'on': list(names)}, depends_on)

    def measure(self, site: str, names: Sequence[str], projectors: Sequence[Operator], record: str,
                label: str, values: Optional[Sequence[Any]] = None, depends_on: Sequence[str] = ()) -> int:
        self._check_owned(site, names)
        k = self.register.measure(names, projectors, self.chooser, 'outcome')
        value = values[k] if values is not None else k
        self._store(site, record, value)
        self.transcript.record(tr.QUANTUM_TICK, site, tr.LOCAL_MEASURE,
                               {'op': label, 'on': list(names), 'record': record, 'outcome': value}, depends_on)
        log('DEBUG', f"{self.protocol}: {site} measured {label} on {list(names)}", extras=f"{record}={value}")
        return k

    def measure_basis(self, site: str, name: str, record: str, label: str = 'measure_z',
                      values: Optional[Sequence[Any]] = None, depends_on: Sequence[str] = ()) -> int:
        dim = self.register.psi.dims[self.register.index(name)]
        return self.measure(site, [name], statevec.computational_projectors(dim), record, label, values, depends_on)

    def share_pair(self, site_x: str, x: str, site_y: str, y: str) -> None:
        if self.pool is None:
            raise PreconditionError(f"{self.protocol} has no ebit pool")
        self.register.add([x, y], self.pool.draw())
        self._own(site_x, x)
        self._own(site_y, y)

    def discard(self, site: str, names: Sequence[str], local_state: Ket) -> None:
        self._check_owned(site, names)
        self.register.discard(names, local_state)
        for name in names:
            self.parties[site].owned.remove(name)
            del self.owners[name]

    def teleport(self, sender: str, receiver: str, name: str, channel: str, depends_on: Sequence[str] = (),
                 cluster: Optional[str] = None) -> BellKind:
        """Bell-measurement teleportation of `name` with the correction withheld.

        The receiver ends up holding distortion(kind) applied to the state.
        """
        if self.pool is None or self.pool.kind != BellKind.PSI_MINUS:
            raise PreconditionError("teleportation needs a singlet pool")
        self._check_owned(sender, [name])
        x, y = f"{channel}#x", f"{channel}#y"
        self.share_pair(sender, x, receiver, y)
        kind, self.register.psi = bell.bell_measure(self.register.psi, self.register.indices([name, x]),
                                                    self.chooser, 'outcome')
        self._store(sender, channel, kind.value)
        payload = {'op': 'bell_measure', 'on': [name, x], 'record': channel, 'outcome': kind.value}
        if cluster is not None:
            payload['cluster'] = cluster
        self.transcript.record(tr.QUANTUM_TICK, sender, tr.LOCAL_MEASURE, payload, depends_on)
        self.register.discard([name, x], bell.make_bell(kind))
        self.parties[sender].owned.remove(name)
        self.parties[sender].owned.remove(x)
        del self.owners[name], self.owners[x]
        self.register.rename(y, name)
        del self.owners[y]
        self.parties[receiver].owned.remove(y)
        self._own(receiver, name)
        return kind

    def meter_measurement(self, observables: Sequence[Tuple[str, Operator, Sequence[str]]], bank: meters.MeterBank,
                          record: str, mode: str = meters.SUM, weights: Optional[Sequence[float]] = None
                          ) -> meters.MeterReading:
        """Couple one meter per site and read every dial locally."""
        for site, _, names in observables:
            self._check_owned(site, names)
        specs = [(op, self.register.indices(names)) for _, op, names in observables]
        couplings = meters.build_couplings(self.register.psi.dims, specs, bank.spacing, weights=weights, mode=mode)
        reading = meters.couple_and_read(self.register.psi, couplings, bank, self.chooser, mode)
        self.register.psi = reading.post
        for (site, _, names), dial in zip(observables, reading.dials):
            dial_record = f"{record}.{site}"
            self.transcript.record(tr.QUANTUM_TICK, site, tr.LOCAL_OP, {'op': 'couple_meter', 'on': list(names)})
            self._store(site, dial_record, dial)
            self.transcript.record(tr.QUANTUM_TICK, site, tr.LOCAL_MEASURE,
                                   {'op': 'read_dial', 'on': list(names), 'record': dial_record, 'outcome': dial})
        return reading

    # Classical events

    def send(self, sender: str, receiver: str, record: str) -> None:
        self.transcript.record(tr.SEND_TICK, sender, tr.CLASSICAL_SEND,
                               {'record': record, 'to': receiver, 'value': self.records[record]}, [record])
        self.transcript.record(tr.RECEIVE_TICK, receiver, tr.CLASSICAL_RECEIVE,
                               {'record': record, 'from': sender, 'value': self.records[record]})

    def gather(self, site: str, records: Sequence[str]) -> Dict[str, Any]:
        """Forward every listed record held elsewhere to `site`."""
        for record in records:
            holder = self.record_sites[record]
            if holder != site:
                self.send(holder, site, record)
        return {r: self.records[r] for r in records}

    def announce(self, site: str, label: str, value: Any, depends_on: Sequence[str]) -> None:
        self.transcript.record(tr.ANNOUNCE_TICK, site, tr.CLASSICAL_SEND,
                               {'record': label, 'to': 'observer', 'value': value}, depends_on)

    def result(self, inferred_value: Any, post_state: Union[Ket, str], success: bool = True, rounds: int = 1,
               details: Optional[Dict[str, Any]] = None) -> ProtocolResult:
        tr.check_causality(self.transcript)
        resources = {
            'ebits_consumed': self.pool.consumed if self.pool is not None else 0,
            'rounds': rounds,
            'messages': self.transcript.count(tr.CLASSICAL_SEND),
        }
        return ProtocolResult(self.protocol, inferred_value, post_state, resources, self.transcript, success,
                              dict(self.records), self.register, dict(self.record_sites), dict(self.owners),
                              details or {})


def local_views(branches: Sequence[Branch], site: str) -> Dict[Tuple, np.ndarray]:
    """Each site's view of a protocol: its own records and the subsystems it holds.

    Maps own-record tuples to the probability-weighted reduced state of the held
    subsystems, summed over everything the site does not see.
    """
    views: Dict[Tuple, np.ndarray] = {}
    for branch in branches:
        result: ProtocolResult = branch.result
        key = tuple((r, v) for r, v in result.records.items() if result.record_sites[r] == site)
        held = [n for n in result.final_register.names if result.owners.get(n) == site]
        rho = result.final_register.reduced(held).mat if held else np.ones((1, 1), dtype=complex)
        views[key] = views.get(key, 0) + branch.probability * rho
    return views


def erasure_distance(a: Dict[Tuple, np.ndarray], b: Dict[Tuple, np.ndarray]) -> float:
    """Largest trace distance between two sets of site views, record by record.

    Views are compared as states conditioned on the site's own records, over
    the records both sides can produce.
    """
    worst = 0.0
    for key in set(a) & set(b):
        left, right = a[key], b[key]
        if left.shape != right.shape:
            return float('inf')
        left, right = left / np.trace(left).real, right / np.trace(right).real
        worst = max(worst, float(0.5 * np.abs(np.linalg.eigvalsh(left - right)).sum()))
    return worst
