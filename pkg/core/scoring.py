#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Scoring - Scores d'anomalie, calibrage du seuil et courbes de score
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from core.detector import DetectorModel, check_flow, predict
from core.errors import ContractError, DimensionError
from core.tables import write_table
from flows.stream_model import FlowTensor, WindowBatch, windows

# Configuration du système de logging
logger = logging.getLogger('Scoring')

CURVE_COLUMNS = ['t', 'score', 'argmax_node', 'exceeds']


def node_scores(observed: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """
    Score de chaque nœud : somme sur les modes des carrés des écarts (espace normalisé).

    Args:
        observed: Lectures M × N
        predicted: Prédictions M × N

    Returns:
        np.ndarray: Vecteur de M scores
    """
    observed = np.asarray(observed, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if observed.shape != predicted.shape or observed.ndim != 2:
        raise DimensionError("node_scores: lectures et prédictions", expected=observed.shape, actual=predicted.shape)
    return np.sum((observed - predicted) ** 2, axis=1)


def inference_score(scores: np.ndarray) -> Tuple[float, int]:
    """
    Score d'inférence : maximum des scores de nœuds et indice du premier nœud qui l'atteint.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size < 1:
        raise ContractError("inference_score: au moins un nœud est requis")
    node = int(np.argmax(scores))
    return float(scores[node]), node


def score_batch(model: DetectorModel, batch: WindowBatch) -> Tuple[float, int]:
    """Score d'inférence d'une fenêtre et nœud qui le porte."""
    return inference_score(node_scores(batch.target, predict(model, batch)))


@dataclass(frozen=True, eq=False)
class ScoreSeries:
    """
    Courbe de score : un score par indice cible à partir de `first_index`.
    """
    scores: np.ndarray
    argmax_nodes: np.ndarray
    first_index: int
    threshold: Optional[float] = None
    node_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'scores', np.asarray(self.scores, dtype=np.float64))
        object.__setattr__(self, 'argmax_nodes', np.asarray(self.argmax_nodes, dtype=np.int64))
        if self.scores.shape != self.argmax_nodes.shape:
            raise DimensionError("ScoreSeries", expected=self.scores.shape, actual=self.argmax_nodes.shape)
        if np.any(self.scores < 0):
            raise ContractError("ScoreSeries: scores négatifs")

    def __len__(self) -> int:
        return self.scores.size

    @property
    def indices(self) -> np.ndarray:
        return self.first_index + np.arange(self.scores.size)

    @property
    def exceedances(self) -> np.ndarray:
        if self.threshold is None:
            return np.zeros(self.scores.size, dtype=bool)
        return self.scores > self.threshold

    def at(self, t: int) -> float:
        return float(self.scores[t - self.first_index])

    def with_threshold(self, threshold: Optional[float]) -> 'ScoreSeries':
        return ScoreSeries(self.scores, self.argmax_nodes, self.first_index, threshold, self.node_ids)

    def first_exceedance(self, start: int, stop: int) -> Optional[int]:
        """
        Premier indice de [start, stop] (bornes incluses) dont le score dépasse le seuil.
        """
        flags = self.exceedances
        lo = max(start - self.first_index, 0)
        hi = min(stop - self.first_index, self.scores.size - 1)
        hits = np.flatnonzero(flags[lo:hi + 1]) if hi >= lo else np.zeros(0, dtype=np.int64)
        return int(self.first_index + lo + hits[0]) if hits.size else None

    def to_frame(self) -> pd.DataFrame:
        """
        Tableau t, score, argmax_node (identifiant de mote) et exceeds (absent sans seuil).
        """
        labels = [self.node_ids[i] for i in self.argmax_nodes] if self.node_ids else self.argmax_nodes
        frame = pd.DataFrame({'t': self.indices, 'score': self.scores, 'argmax_node': labels},
                             columns=CURVE_COLUMNS[:3])
        if self.threshold is not None:
            frame['exceeds'] = self.exceedances.astype(int)
        return frame


def score_curve(model: DetectorModel, flow: FlowTensor, threshold: Optional[float] = None,
                start: Optional[int] = None, stop: Optional[int] = None) -> ScoreSeries:
    """
    Calcule le score d'inférence à chaque indice cible d'un segment normalisé.

    Args:
        model: Modèle entraîné
        flow: Segment normalisé avec les statistiques d'entraînement
        threshold: Seuil pour marquer les dépassements
        start: Premier indice cible (W par défaut)
        stop: Indice cible de fin exclu (longueur du segment par défaut)

    Returns:
        ScoreSeries: Courbe de score
    """
    if not flow.normalized:
        raise ContractError("score_curve: le segment doit être normalisé")
    check_flow(model, flow)
    scores, nodes = [], []
    for batch in windows(flow, model.W, start, stop):
        score, node = score_batch(model, batch)
        scores.append(score)
        nodes.append(node)
    first = model.W if start is None else max(model.W, start)
    return ScoreSeries(np.array(scores), np.array(nodes, dtype=np.int64), first, threshold, flow.node_ids)


def calibrate_threshold(model: DetectorModel, val_flow: FlowTensor) -> float:
    """
    Seuil = score d'inférence maximal sur le segment de validation.

    Raises:
        ContractError: Segment de validation trop court
    """
    if val_flow.T <= model.W:
        raise ContractError(f"calibrate_threshold: segment de validation de {val_flow.T} instants pour W={model.W}")
    curve = score_curve(model, val_flow)
    threshold = float(curve.scores.max())
    logger.info(f"Seuil calibré sur {len(curve)} fenêtres de validation: {threshold:.6f}")
    return threshold


def export_curve(series: ScoreSeries, path: str, header: Optional[Dict[str, Any]] = None) -> str:
    """
    Écrit une courbe de score au format `t,score,argmax_node,exceeds`.
    """
    meta = {'first_index': series.first_index, 'threshold': series.threshold}
    meta.update(header or {})
    return write_table(series.to_frame(), path, meta)
