#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests de la ligne de commande : codes de sortie et chaîne complète sur un petit relevé
"""

import json
import math
import os
import sys

import numpy as np
import pytest

# Ajouter le répertoire parent au path pour pouvoir importer les modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import main
from core import tensor_core as tc
from core.tables import read_table

MODEL = ['--window', '4', '--hidden', '2', '--gru-layers', '1', '--epochs', '1', '--lr', '0.01']
SPLIT = ['--split', '0.6,0.2,0.2']


def synthetic_log(path, motes=(1, 2), every=300) -> str:
    rng = np.random.default_rng(0)
    lines = []
    for k in range(86400 // every):
        seconds = k * every
        stamp = f"2004-03-04 {seconds // 3600:02d}:{seconds % 3600 // 60:02d}:{seconds % 60:02d}.5"
        for mote in motes:
            temperature = 20 + mote + 2 * math.sin(2 * math.pi * seconds / 86400) + 0.1 * rng.normal()
            humidity = 40 - mote + 3 * math.cos(2 * math.pi * seconds / 43200) + 0.2 * rng.normal()
            lines.append(f"{stamp} {k} {mote} {temperature:.4f} {humidity:.4f} 100.0 2.7\n")
    path.write_text("".join(lines), encoding='utf-8')
    return str(path)


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    """Exécute chaque commande depuis un répertoire temporaire (journaux compris)"""
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv) -> int:
    return main.main([str(a) for a in argv])


@pytest.fixture
def pipeline(tmp_path):
    """Flux préparé, modèle entraîné et fichier de seuil"""
    out = tmp_path / 'runs'
    raw = synthetic_log(tmp_path / 'data.txt')
    assert run('-o', out, 'prepare', raw, '--nodes', '1,2', '--modes', 'temperature,humidity',
               '--start', '2004-03-04', '--end', '2004-03-05', '--length', 120) == 0
    assert run('-o', out, 'train', out / 'flow', *MODEL, *SPLIT) == 0
    assert run('-o', out, 'calibrate', out / 'model', out / 'flow', *SPLIT) == 0
    return out


# ====== TESTS DES CODES DE SORTIE ======

def test_no_command_prints_help():
    """Teste qu'une invocation sans commande renvoie 2"""
    assert run() == 2


def test_gradcheck_passes():
    """Teste la vérification des gradients du détecteur jouet : code 0"""
    assert run('gradcheck') == 0


def test_gradcheck_detects_corrupted_backward(monkeypatch):
    """Teste qu'une règle de dérivation de tanh faussée est détectée : code 1"""
    def corrupted_tanh(x):
        y = np.tanh(x.data)
        return tc._emit('tanh', (x,), y, lambda g: (g * (1.0 - y),))

    monkeypatch.setattr(tc, 'tanh', corrupted_tanh)
    assert run('gradcheck') == 1


def test_missing_raw_file(tmp_path):
    """Teste qu'un relevé brut absent renvoie 2"""
    assert run('-o', tmp_path / 'runs', 'prepare', tmp_path / 'absent.txt') == 2


def test_window_of_one(tmp_path):
    """Teste qu'une fenêtre W=1 est refusée : code 2"""
    assert run('-o', tmp_path / 'runs', 'train', tmp_path / 'flow', '--window', '1') == 2


def test_missing_config_file(tmp_path):
    """Teste qu'un fichier de configuration absent renvoie 2"""
    assert run('-c', tmp_path / 'absent.yaml', 'gradcheck') == 2


def test_missing_checkpoint(tmp_path):
    """Teste qu'un point de sauvegarde absent renvoie 2"""
    assert run('calibrate', tmp_path / 'model', tmp_path / 'flow') == 2


# ====== TESTS DE LA CHAÎNE ======

def test_pipeline_artifacts(pipeline):
    """Teste les fichiers produits par prepare, train et calibrate"""
    for name in ('flow.json', 'flow.bin', 'model.json', 'model.bin', 'model_loss.csv', 'threshold.json'):
        assert (pipeline / name).exists()
    with open(pipeline / 'threshold.json', encoding='utf-8') as f:
        data = json.load(f)
    assert data['threshold'] >= 0
    assert data['config']['window'] == 4
    frame, header = read_table(str(pipeline / 'model_loss.csv'))
    assert len(frame) == 1
    assert header['window'] == '4'


def test_score_without_threshold(pipeline):
    """Teste une courbe de score sans seuil : pas de colonne de dépassement"""
    out = pipeline / 'curve.csv'
    assert run('score', pipeline / 'model', pipeline / 'flow', *SPLIT, '--out', out) == 0
    frame, _ = read_table(str(out))
    assert list(frame.columns) == ['t', 'score', 'argmax_node']
    assert len(frame) == 24 - 4


def test_score_with_injection(pipeline):
    """Teste une courbe de score avec injection et seuil lu dans le fichier de seuil"""
    out = pipeline / 'injected.csv'
    assert run('score', pipeline / 'model', pipeline / 'flow', *SPLIT, '--threshold', pipeline / 'threshold.json',
               '--inject', 'type=4,node=2,mode=humidity,t=10', '--out', out) == 0
    frame, header = read_table(str(out))
    assert 'exceeds' in frame.columns
    assert bool(frame.loc[frame['t'] == 10, 'exceeds'].iloc[0])
    assert header['inject'] == 'type=4,node=2,mode=humidity,t=10'


def test_score_injection_missing_key(pipeline):
    """Teste qu'une injection incomplète renvoie 2"""
    assert run('score', pipeline / 'model', pipeline / 'flow', *SPLIT, '--inject', 'type=4,node=2') == 2


def test_evaluate_writes_report(pipeline):
    """Teste le bilan, le protocole et le résumé produits par evaluate"""
    assert run('-o', pipeline, 'evaluate', pipeline / 'model', pipeline / 'flow', *SPLIT,
               '--threshold', pipeline / 'threshold.json', '--delaystep', '3', '--protocol-seed', '1') == 0
    with open(pipeline / 'report.json', encoding='utf-8') as f:
        report = json.load(f)
    assert report['tp'] + report['fp'] + report['fn'] + report['tn'] == len(report['ledger'])
    assert report['config']['protocol_seed'] == 1
    assert (pipeline / 'protocol.json').exists()
    assert (pipeline / 'report.txt').exists()


def test_evaluate_replays_protocol(pipeline):
    """Teste qu'un protocole rejoué redonne le même bilan"""
    common = [pipeline / 'model', pipeline / 'flow', *SPLIT, '--threshold', pipeline / 'threshold.json',
              '--delaystep', '3']
    assert run('-o', pipeline, 'evaluate', *common) == 0
    first = json.loads((pipeline / 'report.json').read_text(encoding='utf-8'))
    assert run('evaluate', *common, '--protocol', pipeline / 'protocol.json', '--out', pipeline / 'replay') == 0
    second = json.loads((pipeline / 'replay' / 'report.json').read_text(encoding='utf-8'))
    assert first['ledger'] == second['ledger']


def test_sensitivity_sweep_command(pipeline):
    """Teste le balayage de sensibilité p ∈ {14}"""
    assert run('-o', pipeline, 'evaluate', pipeline / 'model', pipeline / 'flow', *SPLIT,
               '--threshold', '0.5', '--delaystep', '3', '--sweep', 'p=14') == 0
    frame, _ = read_table(str(pipeline / 'sensitivity_p.csv'))
    assert frame['p'].tolist() == [14]


def test_run_all(tmp_path):
    """Teste la chaîne complète en une commande et la configuration effective écrite"""
    out = tmp_path / 'all'
    raw = synthetic_log(tmp_path / 'data.txt')
    assert run('-o', out, 'run-all', raw, '--nodes', '1,2', '--modes', 'temperature,humidity',
               '--start', '2004-03-04', '--end', '2004-03-05', '--length', 120, *MODEL, *SPLIT,
               '--delaystep', '3') == 0
    for name in ('config.yaml', 'flow.json', 'model.json', 'threshold.json', 'report.json', 'report.txt'):
        assert (out / name).exists()
