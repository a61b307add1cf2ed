"""Causality audits: each returns a JSON-ready report and, where a table exists, a DataFrame."""
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from nonlocal_lab import bell, causality, config, meters, statevec
from nonlocal_lab.protocols import canonical_verification_stages
from nonlocal_lab.simple_logger import log
from nonlocal_lab.stator import twisted_basis
from nonlocal_lab.statevec import Ket, Operator

AuditOutput = Tuple[Dict[str, Any], Optional[pd.DataFrame]]


def _singlet() -> Ket:
    return bell.make_bell(bell.BellKind.PSI_MINUS)


def _random_local_image(rng: np.random.Generator, psi0: Ket, site: int) -> Ket:
    """(1 (x) M) psi0 for a random complex M on the given subsystem."""
    d = psi0.dims[site]
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    amps = statevec._apply_matrix(M, (d,), psi0.tensor, [site]).reshape(-1)
    return Ket(psi0.dims, amps / np.linalg.norm(amps))


def phi_scan(haar: int = config.HAAR_SAMPLES, seed: int = 0, points: int = config.PHI_GRID_POINTS) -> AuditOutput:
    """Signalling of the ideal M_phi measurement on a grid phi = k pi / points."""
    rows = []
    for k in range(points):
        phi = k * np.pi / points
        report = causality.audit_model(causality.mphi_model(phi), _singlet(), haar, seed)
        causal_point = (4 * k) % points == 0
        rows.append({
            'k': k,
            'phi': phi,
            'phi_over_pi': k / points,
            'max_deviation': report.max_deviation,
            'quarter_turn': causal_point,
        })
    df = pd.DataFrame(rows)
    quarter = df[df['quarter_turn']]
    others = df[~df['quarter_turn']]
    passed = bool((quarter['max_deviation'] < config.SIGNAL_TOL).all()
                  and (others['max_deviation'] > config.PHI_SCAN_THRESHOLD).all())
    report = {
        'audit': 'phi_scan',
        'passed': passed,
        'grid_points': points,
        'threshold': config.PHI_SCAN_THRESHOLD,
        'max_deviation_at_quarter_turns': float(quarter['max_deviation'].max()),
        'min_deviation_elsewhere': float(others['max_deviation'].min()) if len(others) else 0.0,
        'samples_per_point': int(len(causality.remote_samples(causality.mphi_model(0.0), haar, seed))),
    }
    log('INFO', f"phi_scan: {points} points", extras=f"passed={passed}")
    return report, df


def pv_theorems(cases: int = config.PV_THEOREM2_CASES, seed: int = 0,
                states: int = config.PV_THEOREM1_STATES) -> AuditOutput:
    """Both Popescu-Vaidman statements on singlet verification models.

    The first uses the qubit singlet; the second a qutrit at site 1 so that a
    component outside the verified support exists.
    """
    rng = np.random.default_rng(seed)
    psi0 = _singlet()
    model = causality.singlet_model(2)
    test_states = [psi0] + [_random_local_image(rng, psi0, 1) for _ in range(states - 1)]
    spreads = [causality.check_pv_theorem1(model, psi0, test_states, A1, a) for A1, a in causality.local_samples(model)]

    qutrit = causality.singlet_model(3)
    psi0_3 = Ket((3, 2), np.array([0, 1, -1, 0, 0, 0], dtype=complex) / np.sqrt(2))
    observables = causality.local_samples(qutrit)
    residuals = []
    for _ in range(cases):
        psi_prime = _random_local_image(rng, psi0_3, 1)
        chi = rng.normal(size=2) + 1j * rng.normal(size=2)
        chi /= np.linalg.norm(chi)
        psi_dd = Ket((3, 2), np.concatenate([np.zeros(4), chi]))
        theta = rng.uniform(0, np.pi / 2)
        alpha = np.cos(theta) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        beta = np.sin(theta) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        A1, a = observables[int(rng.integers(len(observables)))]
        residuals.append(causality.check_pv_theorem2(qutrit, psi0_3, psi_prime, psi_dd, alpha, beta, A1, a))

    report = {
        'audit': 'pv_theorems',
        'passed': bool(max(spreads) < config.SIGNAL_TOL and max(residuals) < config.SIGNAL_TOL),
        'theorem1_states': len(test_states),
        'theorem1_max_spread': float(max(spreads)),
        'theorem2_cases': cases,
        'theorem2_max_residual': float(max(residuals)),
    }
    log('INFO', f"pv_theorems: spread {report['theorem1_max_spread']:.2e}, residual {report['theorem2_max_residual']:.2e}")
    return report, None


def entangled_projector(haar: int = config.HAAR_SAMPLES, seed: int = 0) -> AuditOutput:
    cases = [
        ('maximal', 2 ** -0.5, 2 ** -0.5),
        ('product', 1.0, 0.0),
        ('partial', np.sqrt(config.ENTANGLED_PROJECTOR_ALPHA_SQ), np.sqrt(1 - config.ENTANGLED_PROJECTOR_ALPHA_SQ)),
    ]
    rows, results = [], {}
    for name, alpha, beta in cases:
        report = causality.entangled_projector_signaling(alpha, beta, haar, seed)
        results[name] = report.to_json()
        rows.append({'case': name, 'alpha': alpha, 'beta': beta, 'max_deviation': report.max_deviation})
    passed = (results['maximal']['max_deviation'] < config.SIGNAL_TOL
              and results['product']['max_deviation'] < config.SIGNAL_TOL
              and results['partial']['max_deviation'] >= config.ENTANGLED_PROJECTOR_PINNED - config.SIGNAL_TOL)
    log('INFO', f"entangled_projector: partial deviation {results['partial']['max_deviation']:.6f}")
    return {'audit': 'entangled_projector', 'passed': bool(passed), 'cases': results}, pd.DataFrame(rows)


def degenerate_demo() -> AuditOutput:
    general = causality.degenerate_eigenstate_signal_demo()
    edge = causality.degenerate_eigenstate_signal_demo(1.0)
    a1 = config.DEGENERATE_DEMO_ALPHA1
    expected = 2 * a1 ** 2 * (1 - a1 ** 2)
    passed = abs(general.max_deviation - expected) < config.SIGNAL_TOL and edge.max_deviation < config.SIGNAL_TOL
    log('INFO', f"degenerate_demo: deviation {general.max_deviation:.6f}")
    return {
        'audit': 'degenerate_demo',
        'passed': bool(passed),
        'alpha1': a1,
        'expected_deviation': expected,
        'report': general.to_json(),
        'alpha1_one': edge.to_json(),
    }, None


def _positive(values: List[float]) -> Operator:
    return Operator((2,), np.diag(values).astype(complex), statevec.HERMITIAN)


def nosignal_models() -> List[Tuple[causality.MeasurementModel, Ket]]:
    """Every shipped measurement, as a dense model, with the state it is audited on."""
    sz, pz = statevec.spin('z'), statevec.pauli('z')
    spin_pair = [(sz, 0), (sz, 1)]
    weights = [2, 1]
    positive = [(_positive([1.0, 2.0]), 0), (_positive([2.0, 4.0]), 1)]
    modular = [(pz, 0), (pz, 1)]
    singlet = _singlet()
    canonical = Ket((3, 3), np.eye(3).reshape(-1) / np.sqrt(3))
    twisted = sum(k * statevec.projector(v).mat for k, v in enumerate(twisted_basis(), start=1))
    models = [
        (causality.meter_model(spin_pair, (2, 2), meters.sum_bank(spin_pair), label='sum'), singlet),
        (causality.meter_model(spin_pair, (2, 2), meters.sum_bank(spin_pair, weights), weights, label='weighted'), singlet),
        (causality.meter_model(positive, (2, 2), meters.sum_bank(positive, mode=meters.PRODUCT),
                               mode=meters.PRODUCT, label='product'), singlet),
        (causality.meter_model(modular, (2, 2), meters.prepare_modular_bank(2, 4, 0.5),
                               mode=meters.MODULAR, label='modular'), singlet),
        (causality.singlet_model(2), singlet),
        (causality.instrument_model((3, 3), canonical_verification_stages(2, 3), label='canonical'), canonical),
        (causality.stator_model(), singlet),
        (causality.teleport_round_model(Operator((2, 2), twisted, statevec.HERMITIAN)), singlet),
    ]
    return models


def protocol_nosignal(haar: int = config.HAAR_SAMPLES, seed: int = 0) -> AuditOutput:
    rows = []
    for model, psi in nosignal_models():
        report = causality.audit_model(model, psi, haar, seed)
        rows.append({'model': model.label, 'samples': report.samples_tested, 'max_deviation': report.max_deviation})
        log('DEBUG', f"protocol_nosignal: {model.label}", extras=f"{report.max_deviation:.2e}")
    df = pd.DataFrame(rows)
    passed = bool((df['max_deviation'] < config.SIGNAL_TOL).all())
    log('INFO', f"protocol_nosignal: {len(rows)} models", extras=f"passed={passed}")
    return {
        'audit': 'protocol_nosignal',
        'passed': passed,
        'models': {r['model']: r['max_deviation'] for r in rows},
        'max_deviation': float(df['max_deviation'].max()),
    }, df
