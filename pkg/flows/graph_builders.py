#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
GraphBuilders - Construction des matrices d'adjacence des trois axes (modes, temps, nœuds)
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, NamedTuple, Optional, Sequence, Set

import numpy as np
from scipy.spatial.distance import cdist

from core.errors import ContractError, DegenerateRowError, DimensionError, InputError, MissingNodeError

# Configuration du système de logging
logger = logging.getLogger('GraphBuilders')

KINDS = ('mode', 'time', 'node')


@dataclass(frozen=True, eq=False)
class Adjacency:
    """
    Matrice de relations carrée sur les modes, les instants ou les nœuds.

    La ligne i liste les voisins du sommet i. `mask` porte la structure (qui est
    voisin de qui) ; `entries` porte les poids (1 pour une adjacence binaire,
    coefficient de corrélation pour une adjacence pondérée).
    """
    kind: str
    entries: np.ndarray
    mask: np.ndarray
    weighted: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"Type d'adjacence inconnu: {self.kind}")
        entries = np.asarray(self.entries, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError("Adjacence non carrée", actual=entries.shape)
        if mask.shape != entries.shape:
            raise DimensionError("Masque d'adjacence", expected=entries.shape, actual=mask.shape)
        if self.weighted:
            if np.any(np.abs(entries) > 1.0):
                raise ContractError("Poids de corrélation hors de [-1, 1]")
        elif not np.all(np.isin(entries, (0.0, 1.0))):
            raise ContractError("Adjacence binaire avec des entrées hors de {0, 1}")
        isolated = np.flatnonzero(~mask.any(axis=1))
        if isolated.size:
            raise DegenerateRowError(int(isolated[0]), f"l'adjacence {self.kind}")
        object.__setattr__(self, 'entries', entries)
        object.__setattr__(self, 'mask', mask)

    @property
    def extent(self) -> int:
        return self.entries.shape[0]

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T) and np.array_equal(self.mask, self.mask.T))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'weighted': self.weighted,
            'entries': self.entries.tolist(),
            'mask': self.mask.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Adjacency':
        return cls(kind=data['kind'], entries=np.array(data['entries'], dtype=np.float64),
                   mask=np.array(data['mask'], dtype=bool), weighted=bool(data.get('weighted', False)))


@dataclass(frozen=True, eq=False)
class NodeCoordinates:
    """
    Positions (x, y) des nœuds dans le plan de déploiement.
    """
    node_ids: tuple
    xy: np.ndarray

    def __post_init__(self):
        ids = tuple(int(i) for i in self.node_ids)
        xy = np.asarray(self.xy, dtype=np.float64).reshape(len(ids), 2)
        if len(set(ids)) != len(ids):
            raise InputError("Identifiants de nœuds dupliqués dans les coordonnées")
        if not np.all(np.isfinite(xy)):
            raise InputError("Coordonnées non finies")
        object.__setattr__(self, 'node_ids', ids)
        object.__setattr__(self, 'xy', xy)

    def __len__(self) -> int:
        return len(self.node_ids)

    def position(self, node_id: int) -> np.ndarray:
        if node_id not in self.node_ids:
            raise MissingNodeError(node_id, "coordonnées")
        return self.xy[self.node_ids.index(node_id)]

    def subset(self, node_ids: Sequence[int]) -> 'NodeCoordinates':
        """
        Restreint la table aux nœuds demandés, dans l'ordre demandé.
        """
        return NodeCoordinates(node_ids=tuple(node_ids), xy=np.array([self.position(i) for i in node_ids]))

    def to_dict(self) -> Dict[str, Any]:
        return {'node_ids': list(self.node_ids), 'xy': self.xy.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NodeCoordinates':
        return cls(node_ids=tuple(data['node_ids']), xy=np.array(data['xy'], dtype=np.float64))


class Correlation(NamedTuple):
    value: float
    degenerate: bool


def pearson(p: Sequence[float], q: Sequence[float]) -> Correlation:
    """
    Coefficient de corrélation de Pearson de deux séries.

    Une série de variance nulle donne une corrélation de 0 marquée dégénérée.

    Args:
        p: Première série (n ≥ 2)
        q: Seconde série, même longueur

    Returns:
        Correlation: Valeur dans [-1, 1] et indicateur de variance nulle
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError("pearson: séries de longueurs différentes", expected=p.shape, actual=q.shape)
    if p.size < 2:
        raise ContractError("pearson: au moins deux observations sont requises")
    dp = p - p.mean()
    dq = q - q.mean()
    sp = np.sqrt(np.dot(dp, dp))
    sq = np.sqrt(np.dot(dq, dq))
    if sp == 0.0 or sq == 0.0:
        logger.debug("Corrélation sur une série constante, valeur fixée à 0")
        return Correlation(0.0, True)
    return Correlation(float(np.clip(np.dot(dp, dq) / (sp * sq), -1.0, 1.0)), False)


def mode_adjacency(window, deps: Optional[Sequence[Set[int]]] = None) -> Adjacency:
    """
    Adjacence de l'axe des modes.

    Sans dépendances : matrice pleine de 1, diagonale comprise. Avec dépendances
    C_i : la ligne i vaut ρ(V_i, V_j) pour j ∈ C_i, 0 ailleurs.

    Args:
        window: Séries des modes, N × W
        deps: Ensembles de voisins par mode (indices à partir de 0)

    Returns:
        Adjacency: Adjacence N × N
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] < 1:
        raise DimensionError("mode_adjacency: fenêtre N × W attendue", actual=window.shape)
    N, W = window.shape
    if W < 2:
        raise ContractError("mode_adjacency: au moins deux instants sont requis")
    if deps is None:
        return Adjacency('mode', np.ones((N, N)), np.ones((N, N), dtype=bool))
    if len(deps) != N:
        raise DimensionError("mode_adjacency: un ensemble de dépendances par mode", expected=(N,), actual=(len(deps),))

    entries = np.zeros((N, N))
    mask = np.zeros((N, N), dtype=bool)
    for i, neighbors in enumerate(deps):
        for j in neighbors:
            if not 0 <= j < N:
                raise DimensionError(f"mode_adjacency: mode voisin {j} hors de l'étendue", expected=(N,))
            corr = pearson(window[i], window[j])
            if corr.degenerate:
                logger.warning(f"Mode {i} ou {j} constant : corrélation fixée à 0")
            entries[i, j] = corr.value
            mask[i, j] = True
    return Adjacency('mode', entries, mask, weighted=True)


def time_adjacency(W: int) -> Adjacency:
    """
    Adjacence de l'axe temporel : A = U − E (chaque instant voit tous les autres, pas lui-même).
    """
    if W < 2:
        raise DegenerateRowError(0, "l'adjacence temporelle (un instant isolé n'a pas de voisin)")
    entries = np.ones((W, W)) - np.eye(W)
    return Adjacency('time', entries, entries != 0)


def node_adjacency_full(M: int) -> Adjacency:
    """
    Adjacence pleine des nœuds, auto-connexions comprises.
    """
    if M < 1:
        raise ContractError("node_adjacency_full: au moins un nœud est requis")
    return Adjacency('node', np.ones((M, M)), np.ones((M, M), dtype=bool))


def node_adjacency_topk(coords: NodeCoordinates, k: int) -> Adjacency:
    """
    Adjacence spatiale des k plus proches voisins euclidiens, plus une auto-connexion.

    Les égalités de distance sont départagées par identifiant de nœud croissant.
    Le résultat n'est pas forcément symétrique.

    Args:
        coords: Coordonnées des nœuds (ordre des lignes = ordre des nœuds)
        k: Nombre de voisins, 1 ≤ k < M

    Returns:
        Adjacency: Adjacence binaire M × M, sommes de lignes égales à k + 1
    """
    M = len(coords)
    if not 1 <= k < M:
        raise ContractError(f"node_adjacency_topk: k={k} doit vérifier 1 ≤ k < M={M}")
    distances = cdist(coords.xy, coords.xy)
    ids = np.asarray(coords.node_ids)
    entries = np.zeros((M, M))
    for i in range(M):
        row = distances[i].copy()
        row[i] = np.inf
        order = np.lexsort((ids, row))
        entries[i, order[:k]] = 1.0
        entries[i, i] = 1.0
    return Adjacency('node', entries, entries != 0)
