"""Published JSON schemas for every artifact the CLI writes."""
from typing import Any, Dict

from jsonschema import Draft7Validator

from nonlocal_lab.errors import InvariantBreach

TRANSCRIPT_EVENT_SCHEMA: Dict[str, Any] = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'title': 'transcript event',
    'type': 'object',
    'required': ['tick', 'site', 'kind', 'payload'],
    'additionalProperties': False,
    'properties': {
        'tick': {'type': 'integer', 'minimum': 0},
        'site': {'type': 'string'},
        'kind': {'enum': ['localOp', 'localMeasure', 'classicalSend', 'classicalReceive']},
        'payload': {'type': 'object'},
    },
}

_RESOURCES = {
    'type': 'object',
    'required': ['ebits_consumed', 'rounds', 'messages'],
    'properties': {
        'ebits_consumed': {'type': 'integer', 'minimum': 0},
        'rounds': {'type': 'integer', 'minimum': 0},
        'messages': {'type': 'integer', 'minimum': 0},
    },
}

PROTOCOL_RESULT_SCHEMA: Dict[str, Any] = {
    'type': 'object',
    'required': ['protocol', 'inferred_value', 'success', 'post_state', 'resources'],
    'properties': {
        'protocol': {'type': 'string'},
        'success': {'type': 'boolean'},
        'post_state': {'anyOf': [
            {'type': 'string'},
            {'type': 'object', 'required': ['dims', 'amps']},
        ]},
        'resources': _RESOURCES,
        'records': {'type': 'object'},
        'details': {'type': 'object'},
    },
}

SUMMARY_SCHEMA: Dict[str, Any] = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'title': 'protocol campaign summary',
    'type': 'object',
    'required': ['protocol', 'state', 'seed', 'trials', 'success_rate', 'accuracy', 'first_trial'],
    'properties': {
        'protocol': {'type': 'string'},
        'state': {'type': 'string'},
        'seed': {'type': 'integer'},
        'trials': {'type': 'integer', 'minimum': 1},
        'success_rate': {'type': 'number', 'minimum': 0, 'maximum': 1},
        'accuracy': {'type': ['number', 'null'], 'minimum': 0, 'maximum': 1},
        'mean_rounds': {'type': 'number', 'minimum': 0},
        'mean_ebits': {'type': 'number', 'minimum': 0},
        'all_within_3sigma': {'type': 'boolean'},
        'first_trial': PROTOCOL_RESULT_SCHEMA,
    },
}

REPORT_SCHEMA: Dict[str, Any] = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'title': 'causality audit report',
    'type': 'object',
    'required': ['audit', 'passed'],
    'properties': {
        'audit': {'enum': ['phi_scan', 'pv_theorems', 'entangled_projector', 'degenerate_demo', 'protocol_nosignal']},
        'passed': {'type': 'boolean'},
    },
}

SCHEMAS: Dict[str, Dict[str, Any]] = {
    'transcript_event': TRANSCRIPT_EVENT_SCHEMA,
    'summary': SUMMARY_SCHEMA,
    'report': REPORT_SCHEMA,
}


def validate(document: Any, schema_name: str) -> None:
    validator = Draft7Validator(SCHEMAS[schema_name])
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.path))
    if errors:
        first = errors[0]
        where = '/'.join(str(p) for p in first.path) or '<root>'
        raise InvariantBreach(f"{schema_name} artifact fails its schema at {where}: {first.message}")
