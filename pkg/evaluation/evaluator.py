#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Evaluator - Appariement des alarmes aux essais, précision/rappel/F1 et balayages expérimentaux

Un essai injecté dont le score dépasse le seuil dans [t, t + delaystep] est un vrai
positif, sinon un faux négatif ; un essai propre qui dépasse dans la même fenêtre est
un faux positif, sinon un vrai négatif.
"""

import json
import logging
import os
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from core.detector import DetectorConfig, DetectorModel, train
from core.errors import ContractError
from core.scoring import calibrate_threshold
from evaluation.anomaly_lab import (ProtocolSettings, TrialOutcome, build_protocol, run_trials,
                                    training_ranges)
from flows.stream_model import FlowTensor, apply_norm, fit_norm, split

# Configuration du système de logging
logger = logging.getLogger('Evaluator')

SWEEP_PARAMETERS = {'p': 1, 'q': 2}
HYPERPARAMETERS = ('window', 'hidden')


def precision_recall_f1(tp: int, fp: int, fn: int) -> Tuple[Optional[float], Optional[float], Optional[float]]:
    """
    Métriques usuelles ; une métrique indéfinie vaut None.
    """
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass
class LedgerEntry:
    """Une ligne du registre des essais."""
    index: int
    injected: bool
    outcome: str
    first_offset: Optional[int]
    anomaly_type: Optional[int] = None
    node: Optional[int] = None
    mode: Optional[int] = None
    located: Optional[bool] = None


@dataclass
class DetectionReport:
    """
    Bilan d'une campagne d'essais.
    """
    tp: int
    fp: int
    fn: int
    tn: int
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    delaystep: int
    threshold: Optional[float]
    per_type_recall: Dict[int, Optional[float]] = field(default_factory=dict)
    per_mode_recall: Dict[str, Optional[float]] = field(default_factory=dict)
    localization_rate: Optional[float] = None
    ledger: List[LedgerEntry] = field(default_factory=list)

    @property
    def injected_count(self) -> int:
        return self.tp + self.fn

    @property
    def clean_count(self) -> int:
        return self.fp + self.tn

    def metrics(self) -> Dict[str, Optional[float]]:
        return {'precision': self.precision, 'recall': self.recall, 'f1': self.f1}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['per_type_recall'] = {str(k): v for k, v in self.per_type_recall.items()}
        return data

    def save(self, path: str, context: Optional[Dict[str, Any]] = None) -> str:
        """
        Exporte le bilan en JSON (comptes, métriques, registre par essai).

        Args:
            path: Fichier de destination
            context: Configuration effective jointe au document
        """
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        data = self.to_dict()
        if context:
            data['config'] = context
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
        return path


def _ratio(hits: int, total: int) -> Optional[float]:
    return hits / total if total else None


def score_trials(outcomes: Sequence[TrialOutcome], delaystep: int, threshold: Optional[float] = None,
                 mode_names: Sequence[str] = ()) -> DetectionReport:
    """
    Classe chaque essai et calcule précision, rappel et F1.

    Args:
        outcomes: Résultats bruts des essais
        delaystep: Tolérance de détection (fenêtre fermée [t, t + delaystep])
        threshold: Seuil de réévaluation (seuil des essais par défaut)
        mode_names: Noms des modes pour la ventilation par mode

    Returns:
        DetectionReport: Bilan, indépendant de l'ordre des essais
    """
    if delaystep < 0:
        raise ContractError(f"delaystep doit être ≥ 0 (reçu {delaystep})")
    counts = {'TP': 0, 'FP': 0, 'FN': 0, 'TN': 0}
    by_type: Dict[int, List[int]] = defaultdict(lambda: [0, 0])
    by_mode: Dict[str, List[int]] = defaultdict(lambda: [0, 0])
    located = 0
    ledger: List[LedgerEntry] = []
    used_threshold = threshold

    for outcome in sorted(outcomes, key=lambda o: o.trial.index):
        if outcome.scores.size < delaystep + 1:
            raise ContractError(f"Essai {outcome.trial.index}: {outcome.scores.size} scores pour delaystep={delaystep}")
        limit = outcome.threshold if threshold is None else threshold
        used_threshold = limit
        scores = outcome.scores[:delaystep + 1]
        hits = (scores > limit).nonzero()[0]
        first = int(hits[0]) if hits.size else None
        spec = outcome.trial.spec
        if spec is None:
            label = 'FP' if first is not None else 'TN'
            entry = LedgerEntry(outcome.trial.index, False, label, first)
        else:
            label = 'TP' if first is not None else 'FN'
            hit = label == 'TP'
            on_node = bool(outcome.argmax_nodes[first] == spec.node) if hit else None
            located += int(bool(on_node))
            mode = mode_names[spec.mode] if spec.mode < len(mode_names) else str(spec.mode)
            by_type[spec.type][0] += int(hit)
            by_type[spec.type][1] += 1
            by_mode[mode][0] += int(hit)
            by_mode[mode][1] += 1
            entry = LedgerEntry(outcome.trial.index, True, label, first, spec.type, spec.node, spec.mode, on_node)
        counts[label] += 1
        ledger.append(entry)

    precision, recall, f1 = precision_recall_f1(counts['TP'], counts['FP'], counts['FN'])
    report = DetectionReport(
        tp=counts['TP'], fp=counts['FP'], fn=counts['FN'], tn=counts['TN'],
        precision=precision, recall=recall, f1=f1, delaystep=delaystep, threshold=used_threshold,
        per_type_recall={k: _ratio(*v) for k, v in sorted(by_type.items())},
        per_mode_recall={k: _ratio(*v) for k, v in sorted(by_mode.items())},
        localization_rate=_ratio(located, counts['TP']),
        ledger=ledger,
    )
    logger.info(f"Bilan: TP={report.tp} FP={report.fp} FN={report.fn} TN={report.tn} "
                f"précision={_fmt(precision)} rappel={_fmt(recall)} F1={_fmt(f1)}")
    return report


def _fmt(value: Optional[float]) -> str:
    return f"{value:.3f}" if value is not None else "-"


# ====== CHAÎNE COMPLÈTE ======

@dataclass
class PipelineResult:
    """Modèle entraîné, seuil calibré et bilan d'une configuration."""
    config: DetectorConfig
    model: DetectorModel
    threshold: float
    report: DetectionReport


def evaluate_model(model: DetectorModel, threshold: float, train_raw: FlowTensor, test_raw: FlowTensor,
                   settings: ProtocolSettings,
                   on_trial: Optional[Callable[[TrialOutcome], None]] = None) -> DetectionReport:
    """
    Tire le protocole sur le segment de test, exécute les essais et dresse le bilan.
    """
    ranges = training_ranges(train_raw)
    protocol = build_protocol(test_raw, model.W, settings)
    outcomes = run_trials(model, threshold, test_raw, protocol, ranges, workers=settings.workers, on_trial=on_trial)
    return score_trials(outcomes, settings.delaystep, mode_names=test_raw.mode_names)


def run_pipeline(config: DetectorConfig, raw: FlowTensor, ratios: Sequence[float], settings: ProtocolSettings,
                 on_epoch: Optional[Callable] = None) -> PipelineResult:
    """
    Découpe, normalise, entraîne, calibre et évalue une configuration sur un flux brut.
    """
    config.validate()
    train_raw, val_raw, test_raw = split(raw, ratios, config.window)
    stats = fit_norm(train_raw, config.normalization)
    model, _ = train(config, apply_norm(train_raw, stats), apply_norm(val_raw, stats), on_epoch=on_epoch)
    threshold = calibrate_threshold(model, apply_norm(val_raw, stats))
    report = evaluate_model(model, threshold, train_raw, test_raw, settings)
    return PipelineResult(config, model, threshold, report)


def _report_row(report: DetectionReport) -> Dict[str, Any]:
    return {'precision': report.precision, 'recall': report.recall, 'f1': report.f1,
            'tp': report.tp, 'fp': report.fp, 'fn': report.fn, 'tn': report.tn}


# ====== BALAYAGES ======

def sensitivity_sweep(model: DetectorModel, threshold: float, train_raw: FlowTensor, test_raw: FlowTensor,
                      parameter: str, grid: Sequence[float], settings: ProtocolSettings) -> pd.DataFrame:
    """
    Précision en fonction de l'amplitude d'injection : un protocole complet par valeur de p
    (changements lents seuls) ou de q (changements rapides seuls).

    Returns:
        pd.DataFrame: Une ligne par valeur de la grille
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ContractError(f"Paramètre de sensibilité inconnu: {parameter} (p ou q)")
    if not grid or any(value <= 0 for value in grid):
        raise ContractError(f"Grille de sensibilité invalide: {list(grid)}")
    rows = []
    for value in grid:
        swept = replace(settings, type_mix=(SWEEP_PARAMETERS[parameter],), **{parameter: float(value)})
        report = evaluate_model(model, threshold, train_raw, test_raw, swept)
        rows.append({parameter: value, **_report_row(report)})
        logger.info(f"Sensibilité {parameter}={value}: précision {_fmt(report.precision)}")
    return pd.DataFrame(rows)


def hyperparameter_sweep(base: DetectorConfig, parameter: str, grid: Sequence[int], raw: FlowTensor,
                         ratios: Sequence[float], settings: ProtocolSettings,
                         on_point: Optional[Callable[[Any, PipelineResult], None]] = None) -> pd.DataFrame:
    """
    Entraîne, calibre et évalue un modèle neuf par point de grille (même graine).

    Returns:
        pd.DataFrame: Une ligne par point, colonnes précision, rappel et F1
    """
    if parameter not in HYPERPARAMETERS:
        raise ContractError(f"Hyperparamètre inconnu: {parameter} ({', '.join(HYPERPARAMETERS)})")
    if not grid:
        raise ContractError("Grille d'hyperparamètres vide")
    rows = []
    for value in grid:
        config = replace(base, **{parameter: int(value)})
        result = run_pipeline(config, raw, ratios, settings)
        rows.append({parameter: value, **_report_row(result.report)})
        if on_point is not None:
            on_point(value, result)
    return pd.DataFrame(rows)


def variant_table(variants: Sequence[Tuple[str, DetectorConfig]], raw: FlowTensor, ratios: Sequence[float],
                  settings: ProtocolSettings) -> pd.DataFrame:
    """
    Tableau comparatif de variantes nommées (adjacences, normalisation, ablations).
    """
    rows = []
    for name, config in variants:
        logger.info(f"Variante {name}")
        result = run_pipeline(config, raw, ratios, settings)
        rows.append({'variant': name, 'parameters': result.model.parameter_count(), **_report_row(result.report)})
    return pd.DataFrame(rows)
