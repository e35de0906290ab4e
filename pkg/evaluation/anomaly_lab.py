#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AnomalyLab - Injection des quatre types d'anomalies et protocole d'essais

Types : 1 changement lent, 2 changement rapide, 3 changement brusque, 4 retour à zéro.
L'injection se fait dans l'espace brut, sur une copie du segment de test, puis le
segment est renormalisé avec les statistiques figées de l'entraînement.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import jsonschema
import numpy as np

from core.config_manager import get_config
from core.detector import DetectorModel, check_flow
from core.errors import ConfigError, ContractError, DimensionError, InputError
from core.scoring import ScoreSeries, score_batch, score_curve
from flows.stream_model import FlowTensor, apply_norm, window_at

# Configuration du système de logging
logger = logging.getLogger('AnomalyLab')

ANOMALY_TYPES = {
    1: 'changement lent',
    2: 'changement rapide',
    3: 'changement brusque',
    4: 'retour à zéro',
}
DEFAULT_DURATIONS = {1: 8, 2: 4, 3: 1, 4: 1}

# Injections uniques de référence : (libellé, type, mote, mode, instant)
FIGURE_SCENARIOS = (
    ('type4_voltage_mote29', 4, 29, 'voltage', 70),
    ('type3_temperature_mote30', 3, 30, 'temperature', 100),
    ('type1_humidity_mote35', 1, 35, 'humidity', 150),
    ('type2_temperature_mote23', 2, 23, 'temperature', 150),
)

_SPEC_SCHEMA = {
    'type': 'object',
    'required': ['type', 'node', 'mode', 'start', 'duration', 'sign'],
    'properties': {
        'type': {'enum': [1, 2, 3, 4]},
        'node': {'type': 'integer', 'minimum': 0},
        'mode': {'type': 'integer', 'minimum': 0},
        'start': {'type': 'integer', 'minimum': 0},
        'duration': {'type': 'integer', 'minimum': 1},
        'sign': {'enum': [-1, 1]},
        'p': {'type': 'number', 'exclusiveMinimum': 0},
        'q': {'type': 'number', 'exclusiveMinimum': 0},
        'ramp': {'type': 'boolean'},
    },
}

PROTOCOL_SCHEMA = {
    'type': 'object',
    'required': ['seed', 'window', 'delaystep', 'type_mix', 'trials'],
    'properties': {
        'seed': {'type': 'integer'},
        'window': {'type': 'integer', 'minimum': 2},
        'delaystep': {'type': 'integer', 'minimum': 0},
        'type_mix': {'type': 'array', 'items': {'enum': [1, 2, 3, 4]}, 'minItems': 1},
        'trials': {
            'type': 'array',
            'items': {
                'type': 'object',
                'required': ['index', 'spec'],
                'properties': {
                    'index': {'type': 'integer', 'minimum': 0},
                    'spec': {'oneOf': [{'type': 'null'}, _SPEC_SCHEMA]},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class AnomalySpec:
    """
    Anomalie injectée sur la série (nœud, mode) pendant [start, start + duration − 1].

    Les indices de nœud et de mode sont des positions dans le flux ; `start` est un
    indice relatif au segment.
    """
    type: int
    node: int
    mode: int
    start: int
    duration: Optional[int] = None
    sign: int = 1
    p: float = 14.0
    q: float = 9.0
    ramp: bool = False

    def __post_init__(self):
        if self.type not in ANOMALY_TYPES:
            raise ContractError(f"Type d'anomalie inconnu: {self.type}")
        if self.duration is None:
            object.__setattr__(self, 'duration', DEFAULT_DURATIONS[self.type])
        if self.duration < 1:
            raise ContractError(f"Durée d'anomalie invalide: {self.duration}")
        if self.sign not in (-1, 1):
            raise ContractError(f"Signe d'anomalie invalide: {self.sign}")
        if self.p <= 0 or self.q <= 0:
            raise ContractError(f"Paramètres p={self.p}, q={self.q} doivent être positifs")
        if self.start < 0 or self.node < 0 or self.mode < 0:
            raise ContractError("Indices d'anomalie négatifs")

    @property
    def end(self) -> int:
        """Dernier instant touché (inclus)."""
        return self.start + self.duration - 1

    @property
    def label(self) -> str:
        return ANOMALY_TYPES[self.type]

    def offsets(self, span: float) -> np.ndarray:
        """
        Décalages bruts appliqués à chaque instant de la durée (types 1 à 3).

        Args:
            span: Étendue X_max − X_min du mode sur l'entraînement
        """
        divisor = {1: self.p, 2: self.q, 3: 1.0}[self.type]
        step = self.sign * span / divisor
        if self.ramp and self.type in (1, 2):
            return step * np.arange(1, self.duration + 1)
        return np.full(self.duration, step)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AnomalySpec':
        return cls(**data)


@dataclass(frozen=True, eq=False)
class ModeRanges:
    """Extrêmes bruts de chaque mode mesurés sur le segment d'entraînement."""
    lower: np.ndarray
    upper: np.ndarray

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def to_dict(self) -> Dict[str, Any]:
        return {'lower': self.lower.tolist(), 'upper': self.upper.tolist()}


def training_ranges(train: FlowTensor) -> ModeRanges:
    """
    Extrêmes par mode (tous nœuds et instants confondus) du segment d'entraînement brut.
    """
    if train.normalized:
        raise ContractError("training_ranges attend un segment brut")
    return ModeRanges(lower=train.values.min(axis=(0, 1)), upper=train.values.max(axis=(0, 1)))


def inject(flow: FlowTensor, spec: AnomalySpec, ranges: ModeRanges) -> FlowTensor:
    """
    Injecte une anomalie dans une copie d'un segment brut.

    type 1 : x + signe·(X_max − X_min)/p ; type 2 : x + signe·(X_max − X_min)/q ;
    type 3 : x + signe·(X_max − X_min) ; type 4 : x ← 0.

    Args:
        flow: Segment brut
        spec: Anomalie à injecter
        ranges: Extrêmes d'entraînement par mode

    Returns:
        FlowTensor: Copie modifiée ; le segment d'origine est intact

    Raises:
        ContractError: Durée débordant du segment ou flux normalisé
    """
    if flow.normalized:
        raise ContractError("inject attend un segment brut")
    if spec.node >= flow.M or spec.mode >= flow.N:
        raise DimensionError("inject: nœud/mode hors du flux", expected=(flow.M, flow.N), actual=(spec.node, spec.mode))
    if spec.end >= flow.T:
        raise ContractError(f"inject: durée [{spec.start}, {spec.end}] hors du segment de longueur {flow.T}")
    values = flow.values.copy()
    window = slice(spec.start, spec.end + 1)
    if spec.type == 4:
        values[window, spec.node, spec.mode] = 0.0
    else:
        values[window, spec.node, spec.mode] += spec.offsets(float(ranges.span[spec.mode]))
    return flow.with_values(values, norm=None)


# ====== PROTOCOLE ======

@dataclass
class ProtocolSettings:
    """
    Réglages du protocole d'essais (section `protocol`).
    """
    delaystep: int = 8
    seed: int = 0
    type_mix: Tuple[int, ...] = (1, 2, 3, 4)
    p: float = 14.0
    q: float = 9.0
    ramp: bool = False
    workers: int = 1

    @classmethod
    def from_config(cls, section: Optional[Dict[str, Any]] = None, **overrides) -> 'ProtocolSettings':
        values = dict(get_config('protocol') if section is None else section)
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            settings = cls(delaystep=int(values['delaystep']), seed=int(values['seed']),
                           type_mix=tuple(int(t) for t in values['type_mix']), p=float(values['p']),
                           q=float(values['q']), ramp=bool(values.get('ramp', False)),
                           workers=int(values.get('workers', 1)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Section protocol invalide: {e}") from e
        settings.validate()
        return settings

    def validate(self) -> None:
        if self.delaystep < 0:
            raise ConfigError(f"delaystep doit être ≥ 0 (reçu {self.delaystep})")
        if not self.type_mix or any(t not in ANOMALY_TYPES for t in self.type_mix):
            raise ConfigError(f"type_mix invalide: {self.type_mix}")
        if self.p <= 0 or self.q <= 0:
            raise ConfigError(f"p et q doivent être positifs (reçus {self.p}, {self.q})")
        if self.workers < 1:
            raise ConfigError(f"workers doit être ≥ 1 (reçu {self.workers})")


@dataclass(frozen=True)
class Trial:
    """Un essai : indice cible et anomalie injectée (None pour un essai propre)."""
    index: int
    spec: Optional[AnomalySpec] = None

    @property
    def injected(self) -> bool:
        return self.spec is not None


@dataclass
class TrialProtocol:
    """
    Liste ordonnée d'essais : moitié injectés (ensemble 1), moitié propres (ensemble 2).
    """
    trials: List[Trial]
    seed: int
    window: int
    delaystep: int
    type_mix: Tuple[int, ...]

    @property
    def injected_count(self) -> int:
        return sum(1 for trial in self.trials if trial.injected)

    @property
    def clean_count(self) -> int:
        return len(self.trials) - self.injected_count

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'window': self.window,
            'delaystep': self.delaystep,
            'type_mix': list(self.type_mix),
            'trials': [{'index': t.index, 'spec': t.spec.to_dict() if t.spec else None} for t in self.trials],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrialProtocol':
        try:
            jsonschema.validate(data, PROTOCOL_SCHEMA)
        except jsonschema.ValidationError as e:
            raise InputError(f"Protocole invalide: {e.message}") from e
        trials = [Trial(item['index'], AnomalySpec.from_dict(item['spec']) if item['spec'] else None)
                  for item in data['trials']]
        return cls(trials=trials, seed=data['seed'], window=data['window'], delaystep=data['delaystep'],
                   type_mix=tuple(data['type_mix']))

    def save(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
        return path

    @classmethod
    def load(cls, path: str) -> 'TrialProtocol':
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"Protocole illisible: {path} ({e})") from e
        return cls.from_dict(data)


def eligible_indices(length: int, window: int, delaystep: int, max_duration: int) -> range:
    """
    Indices cibles éligibles : [W, longueur − 1 − τ_max − delaystep].
    """
    return range(window, length - max_duration - delaystep)


def build_protocol(test_flow: FlowTensor, window: int, settings: Optional[ProtocolSettings] = None) -> TrialProtocol:
    """
    Tire le protocole d'essais sur le segment de test.

    Une permutation aléatoire des indices éligibles en place la moitié dans l'ensemble 1 ;
    chaque essai injecté reçoit un type (parmi type_mix), un nœud, un mode et un signe
    tirés uniformément.

    Args:
        test_flow: Segment de test
        window: Longueur de fenêtre W du modèle
        settings: Réglages du protocole

    Returns:
        TrialProtocol: Essais triés par indice

    Raises:
        ContractError: Segment trop court
    """
    settings = settings or ProtocolSettings()
    settings.validate()
    max_duration = max(DEFAULT_DURATIONS[t] for t in settings.type_mix)
    eligible = eligible_indices(test_flow.T, window, settings.delaystep, max_duration)
    if len(eligible) < 1:
        raise ContractError(f"Segment de test de {test_flow.T} instants trop court pour W={window}, "
                            f"τ={max_duration}, delaystep={settings.delaystep}")

    rng = np.random.default_rng(settings.seed)
    order = rng.permutation(np.array(eligible))
    chosen = set(int(i) for i in order[:len(eligible) // 2])
    trials: List[Trial] = []
    for index in eligible:
        if index not in chosen:
            trials.append(Trial(index))
            continue
        kind = int(rng.choice(settings.type_mix))
        spec = AnomalySpec(type=kind, node=int(rng.integers(test_flow.M)), mode=int(rng.integers(test_flow.N)),
                           start=index, sign=int(rng.choice((-1, 1))), p=settings.p, q=settings.q,
                           ramp=settings.ramp)
        trials.append(Trial(index, spec))
    protocol = TrialProtocol(trials, settings.seed, window, settings.delaystep, tuple(settings.type_mix))
    logger.info(f"Protocole: {protocol.injected_count} essais injectés, {protocol.clean_count} propres")
    return protocol


# ====== EXÉCUTION DES ESSAIS ======

@dataclass
class TrialOutcome:
    """
    Résultat brut d'un essai : scores d'inférence sur [t, t + delaystep] et nœuds argmax.
    """
    trial: Trial
    scores: np.ndarray
    argmax_nodes: np.ndarray
    threshold: float

    def first_exceedance(self, threshold: Optional[float] = None) -> Optional[int]:
        """Décalage (depuis t) du premier score qui dépasse le seuil, ou None."""
        limit = self.threshold if threshold is None else threshold
        hits = np.flatnonzero(self.scores > limit)
        return int(hits[0]) if hits.size else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'index': self.trial.index,
            'spec': self.trial.spec.to_dict() if self.trial.spec else None,
            'scores': self.scores.tolist(),
            'argmax_nodes': self.argmax_nodes.tolist(),
        }


class TrialRunner:
    """
    Évalue les essais d'un protocole contre un modèle figé.

    La courbe propre du segment de test est calculée une fois ; un essai injecté ne
    recalcule que les delaystep + 1 fenêtres qu'il inspecte.
    """

    def __init__(self, model: DetectorModel, threshold: float, test_flow: FlowTensor, ranges: ModeRanges):
        if model.norm is None:
            raise ContractError("Le modèle ne porte pas de statistiques de normalisation")
        if test_flow.normalized:
            raise ContractError("Les essais attendent le segment de test brut")
        check_flow(model, test_flow)
        self.model = model
        self.threshold = threshold
        self.test_flow = test_flow
        self.ranges = ranges
        self._clean: Optional[ScoreSeries] = None

    @property
    def clean_curve(self) -> ScoreSeries:
        if self._clean is None:
            self._clean = score_curve(self.model, apply_norm(self.test_flow, self.model.norm), self.threshold)
        return self._clean

    def run(self, trial: Trial, delaystep: int) -> TrialOutcome:
        stop = trial.index + delaystep
        if stop >= self.test_flow.T:
            raise ContractError(f"Essai {trial.index}: fenêtre de détection hors du segment")
        if not trial.injected:
            lo = trial.index - self.clean_curve.first_index
            scores = self.clean_curve.scores[lo:lo + delaystep + 1]
            nodes = self.clean_curve.argmax_nodes[lo:lo + delaystep + 1]
            return TrialOutcome(trial, scores.copy(), nodes.copy(), self.threshold)
        injected = apply_norm(inject(self.test_flow, trial.spec, self.ranges), self.model.norm)
        results = [score_batch(self.model, window_at(injected, self.model.W, t))
                   for t in range(trial.index, stop + 1)]
        return TrialOutcome(trial, np.array([r[0] for r in results]),
                            np.array([r[1] for r in results], dtype=np.int64), self.threshold)


def run_trials(model: DetectorModel, threshold: float, test_flow: FlowTensor, protocol: TrialProtocol,
               ranges: ModeRanges, workers: int = 1,
               on_trial: Optional[Callable[[TrialOutcome], None]] = None) -> List[TrialOutcome]:
    """
    Exécute chaque essai sur une copie fraîche du segment de test.

    Args:
        model: Modèle entraîné (inférence seule)
        threshold: Seuil calibré
        test_flow: Segment de test brut
        protocol: Protocole d'essais
        ranges: Extrêmes d'entraînement par mode
        workers: Nombre de threads d'évaluation
        on_trial: Rappel après chaque essai

    Returns:
        List[TrialOutcome]: Résultats dans l'ordre du protocole
    """
    if protocol.window != model.W:
        raise ContractError(f"Protocole tiré pour W={protocol.window}, modèle en W={model.W}")
    runner = TrialRunner(model, threshold, test_flow, ranges)
    runner.clean_curve  # courbe propre calculée hors des threads

    def evaluate(trial: Trial) -> TrialOutcome:
        outcome = runner.run(trial, protocol.delaystep)
        if on_trial is not None:
            on_trial(outcome)
        return outcome

    if workers <= 1:
        return [evaluate(trial) for trial in protocol.trials]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(evaluate, protocol.trials))


def scenario_specs(flow: FlowTensor, window: int) -> List[Tuple[str, AnomalySpec]]:
    """
    Injections de référence applicables au flux ; les motes ou modes absents sont ignorés.
    """
    specs: List[Tuple[str, AnomalySpec]] = []
    for label, kind, mote, mode, start in FIGURE_SCENARIOS:
        if mote not in flow.node_ids or mode not in flow.mode_names:
            logger.warning(f"Scénario {label} ignoré: mote {mote} ou mode {mode} absent du flux")
            continue
        spec = AnomalySpec(type=kind, node=flow.node_index(mote), mode=flow.mode_index(mode), start=start)
        if start < window or spec.end >= flow.T:
            logger.warning(f"Scénario {label} ignoré: instant {start} hors de [{window}, {flow.T - 1}]")
            continue
        specs.append((label, spec))
    return specs
