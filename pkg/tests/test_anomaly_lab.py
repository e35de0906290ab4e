#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests pour l'injection d'anomalies et le protocole d'essais
"""

import os
import sys

import numpy as np
import pytest

# Ajouter le répertoire parent au path pour pouvoir importer les modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.detector import DetectorConfig, train
from core.errors import ConfigError, ContractError, InputError
from core.scoring import calibrate_threshold, score_curve
from evaluation.anomaly_lab import (AnomalySpec, ModeRanges, ProtocolSettings, Trial, TrialOutcome,
                                    TrialProtocol, build_protocol, eligible_indices, inject, run_trials,
                                    scenario_specs, training_ranges)
from flows.stream_model import FlowTensor, apply_norm, fit_norm, split

PERCENT = ModeRanges(lower=np.array([0.0, 2.0]), upper=np.array([100.0, 3.0]))


def constant_flow(T=20, value=20.0, M=2) -> FlowTensor:
    values = np.full((T, M, 2), value)
    values[:, :, 1] = 2.5
    return FlowTensor(values=values, node_ids=tuple(range(1, M + 1)), mode_names=('humidity', 'voltage'),
                      timestamps=np.arange(T))


def sensor_flow(T=200, M=3, seed=0) -> FlowTensor:
    rng = np.random.default_rng(seed)
    t = np.arange(T)[:, None]
    temperature = 20 + 2 * np.sin(0.1 * t + np.arange(M)) + 0.1 * rng.normal(size=(T, M))
    voltage = 2.7 - 0.0005 * t + 0.002 * rng.normal(size=(T, M))
    return FlowTensor(values=np.stack([temperature, voltage], axis=2), node_ids=(23, 29, 30)[:M],
                      mode_names=('temperature', 'voltage'), timestamps=np.arange(T) * 115)


@pytest.fixture(scope="module")
def lab():
    """Modèle entraîné, seuil de validation et segments bruts"""
    raw = sensor_flow()
    train_raw, val_raw, test_raw = split(raw, (0.6, 0.2, 0.2), window=5)
    stats = fit_norm(train_raw)
    config = DetectorConfig.from_config({}, window=5, hidden=3, gru_layers=1, epochs=2, learning_rate=1e-2)
    model, _ = train(config, apply_norm(train_raw, stats))
    threshold = calibrate_threshold(model, apply_norm(val_raw, stats))
    return model, threshold, train_raw, test_raw


# ====== TESTS D'INJECTION ======

def test_inject_zero_turn():
    """Teste qu'un retour à zéro met exactement l'entrée brute à 0"""
    flow = constant_flow()
    out = inject(flow, AnomalySpec(type=4, node=1, mode=1, start=7), PERCENT)
    assert out.values[7, 1, 1] == 0.0
    assert out.values[8, 1, 1] == 2.5
    assert flow.values[7, 1, 1] == 2.5


def test_inject_abrupt_change():
    """Teste un changement brusque positif sur [0, 100] : 20 → 120"""
    out = inject(constant_flow(), AnomalySpec(type=3, node=0, mode=0, start=3), PERCENT)
    assert out.values[3, 0, 0] == pytest.approx(120.0)
    assert out.values[4, 0, 0] == 20.0


def test_inject_slow_change():
    """Teste un changement lent p=14 sur [0, 100] : 27.142857 sur toute la durée"""
    out = inject(constant_flow(), AnomalySpec(type=1, node=0, mode=0, start=2, p=14), PERCENT)
    np.testing.assert_allclose(out.values[2:10, 0, 0], 20 + 100 / 14)
    assert out.values[2, 0, 0] == pytest.approx(27.142857, abs=1e-6)
    assert out.values[10, 0, 0] == 20.0


def test_inject_fast_change_negative():
    """Teste un changement rapide négatif q=9 sur quatre instants"""
    out = inject(constant_flow(), AnomalySpec(type=2, node=1, mode=0, start=0, sign=-1, q=9), PERCENT)
    np.testing.assert_allclose(out.values[0:4, 1, 0], 20 - 100 / 9)
    assert out.values[4, 1, 0] == 20.0


def test_inject_ramp():
    """Teste le décalage progressif d'un changement lent"""
    out = inject(constant_flow(), AnomalySpec(type=1, node=0, mode=0, start=0, duration=3, p=10, ramp=True),
                 PERCENT)
    np.testing.assert_allclose(out.values[0:3, 0, 0], [30.0, 40.0, 50.0])


def test_inject_escaping_segment():
    """Teste le refus d'une durée qui déborde du segment"""
    with pytest.raises(ContractError):
        inject(constant_flow(T=10), AnomalySpec(type=1, node=0, mode=0, start=5), PERCENT)


def test_inject_requires_raw_flow():
    """Teste le refus d'un segment normalisé"""
    flow = sensor_flow(T=20)
    with pytest.raises(ContractError):
        inject(apply_norm(flow, fit_norm(flow)), AnomalySpec(type=4, node=0, mode=0, start=1), PERCENT)


def test_spec_defaults_and_validation():
    """Teste les durées par défaut et la validation des paramètres"""
    assert [AnomalySpec(type=k, node=0, mode=0, start=0).duration for k in (1, 2, 3, 4)] == [8, 4, 1, 1]
    with pytest.raises(ContractError):
        AnomalySpec(type=5, node=0, mode=0, start=0)
    with pytest.raises(ContractError):
        AnomalySpec(type=1, node=0, mode=0, start=0, sign=0)


def test_training_ranges():
    """Teste les extrêmes par mode du segment d'entraînement"""
    ranges = training_ranges(sensor_flow(T=50))
    assert ranges.span.shape == (2,)
    assert np.all(ranges.span > 0)


# ====== TESTS DU PROTOCOLE ======

def test_eligible_indices():
    """Teste les bornes des indices éligibles"""
    assert eligible_indices(120, 4, 8, 8) == range(4, 104)


def test_protocol_splits_half_and_half():
    """Teste 100 indices éligibles : 50 injectés, 50 propres"""
    protocol = build_protocol(sensor_flow(T=120), 4, ProtocolSettings(delaystep=8, seed=0))
    assert len(protocol.trials) == 100
    assert (protocol.injected_count, protocol.clean_count) == (50, 50)
    assert [t.index for t in protocol.trials] == list(range(4, 104))


def test_protocol_is_reproducible():
    """Teste qu'une même graine redonne le même protocole"""
    settings = ProtocolSettings(seed=11)
    first = build_protocol(sensor_flow(T=120), 4, settings).to_dict()
    assert build_protocol(sensor_flow(T=120), 4, settings).to_dict() == first
    assert build_protocol(sensor_flow(T=120), 4, ProtocolSettings(seed=12)).to_dict() != first


def test_protocol_type_mix():
    """Teste qu'un mélange réduit au type 4 ne produit que des retours à zéro"""
    protocol = build_protocol(sensor_flow(T=120), 4, ProtocolSettings(type_mix=(4,)))
    assert {t.spec.type for t in protocol.trials if t.injected} == {4}


def test_protocol_too_short():
    """Teste le refus d'un segment de test trop court"""
    with pytest.raises(ContractError):
        build_protocol(sensor_flow(T=20), 4, ProtocolSettings())


def test_protocol_file_round_trip(tmp_path):
    """Teste l'écriture et la relecture d'un protocole"""
    protocol = build_protocol(sensor_flow(T=60), 4, ProtocolSettings(seed=3))
    path = protocol.save(str(tmp_path / 'protocol.json'))
    assert TrialProtocol.load(path).to_dict() == protocol.to_dict()


def test_protocol_invalid_document():
    """Teste qu'un document de protocole invalide lève une erreur d'entrée"""
    with pytest.raises(InputError):
        TrialProtocol.from_dict({'seed': 0, 'window': 4, 'delaystep': 8, 'type_mix': [7], 'trials': []})


def test_settings_validation():
    """Teste le refus de réglages invalides"""
    with pytest.raises(ConfigError):
        ProtocolSettings.from_config({}, delaystep=-1, seed=0, type_mix=[1], p=14, q=9)
    with pytest.raises(ConfigError):
        ProtocolSettings.from_config({'delaystep': 8, 'seed': 0, 'type_mix': [1], 'p': 0, 'q': 9})


# ====== TESTS DES ESSAIS ======

def test_outcome_first_exceedance():
    """Teste la détection à t+2 et l'absence de détection avant t+9"""
    hit = TrialOutcome(Trial(10, AnomalySpec(type=3, node=0, mode=0, start=10)),
                       np.array([0.1, 0.2, 0.9] + [0.1] * 6), np.zeros(9, dtype=np.int64), 0.5)
    assert hit.first_exceedance() == 2
    late = TrialOutcome(Trial(10), np.array([0.1] * 9 + [0.9]), np.zeros(10, dtype=np.int64), 0.5)
    assert late.first_exceedance() == 9


def test_zero_turn_raises_score(lab):
    """Teste qu'un retour à zéro sur la tension fait monter le score à l'instant injecté"""
    model, _, train_raw, test_raw = lab
    spec = AnomalySpec(type=4, node=1, mode=1, start=10)
    clean = score_curve(model, apply_norm(test_raw, model.norm))
    injected = score_curve(model, apply_norm(inject(test_raw, spec, training_ranges(train_raw)), model.norm))
    assert injected.at(10) > clean.at(10)
    assert injected.argmax_nodes[10 - injected.first_index] == 1


def test_run_trials_matches_protocol(lab):
    """Teste que chaque essai porte delaystep + 1 scores, avec ou sans parallélisme"""
    model, threshold, train_raw, test_raw = lab
    protocol = build_protocol(test_raw, model.W, ProtocolSettings(delaystep=3, seed=5, type_mix=(3, 4)))
    ranges = training_ranges(train_raw)
    seen = []
    sequential = run_trials(model, threshold, test_raw, protocol, ranges, on_trial=seen.append)
    parallel = run_trials(model, threshold, test_raw, protocol, ranges, workers=3)
    assert len(seen) == len(protocol.trials)
    assert all(o.scores.size == 4 for o in sequential)
    for a, b in zip(sequential, parallel):
        assert a.trial.index == b.trial.index
        np.testing.assert_array_equal(a.scores, b.scores)


def test_run_trials_rejects_other_window(lab):
    """Teste le refus d'un protocole tiré pour une autre fenêtre"""
    model, threshold, train_raw, test_raw = lab
    protocol = build_protocol(test_raw, model.W + 1, ProtocolSettings(delaystep=3))
    with pytest.raises(ContractError):
        run_trials(model, threshold, test_raw, protocol, training_ranges(train_raw))


def test_scenario_specs_keep_available_motes():
    """Teste que les scénarios de référence ne gardent que les motes et modes présents"""
    specs = dict(scenario_specs(sensor_flow(T=200), 60))
    assert set(specs) == {'type4_voltage_mote29', 'type3_temperature_mote30', 'type2_temperature_mote23'}
    assert specs['type4_voltage_mote29'].node == 1
    assert specs['type4_voltage_mote29'].start == 70
