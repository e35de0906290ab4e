#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
StreamModel - Modèle de flux à fenêtre glissante et prétraitement des données

Un flux brut (temps × nœud × mode) est découpé chronologiquement, normalisé avec
les statistiques du seul segment d'entraînement, puis parcouru par fenêtres de
longueur W dont la cible est la lecture qui suit immédiatement la fenêtre.
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from core.errors import ConstantSeriesError, ContractError, DimensionError, InputError
from flows.graph_builders import NodeCoordinates

# Configuration du système de logging
logger = logging.getLogger('StreamModel')

FLOW_FORMAT_VERSION = 1
NORM_KINDS = ('zscore', 'maxmin')

# Bornes physiques documentées pour la normalisation max-min
MAXMIN_BOUNDS = {
    'temperature': (0.0, 100.0),
    'humidity': (0.0, 100.0),
    'voltage': (2.0, 3.0),
}

FLOW_SCHEMA = {
    'type': 'object',
    'required': ['format_version', 'M', 'N', 'T', 'node_ids', 'mode_names', 'start_epoch', 'stride'],
    'properties': {
        'format_version': {'const': FLOW_FORMAT_VERSION},
        'M': {'type': 'integer', 'minimum': 1},
        'N': {'type': 'integer', 'minimum': 1},
        'T': {'type': 'integer', 'minimum': 1},
        'node_ids': {'type': 'array', 'items': {'type': 'integer'}},
        'mode_names': {'type': 'array', 'items': {'type': 'string'}},
        'start_epoch': {'type': 'integer'},
        'stride': {'type': 'integer', 'minimum': 1},
        'norm': {'type': ['object', 'null']},
        'coordinates': {'type': ['object', 'null']},
        'metadata': {'type': 'object'},
    },
}


def artifact_paths(path) -> Tuple[str, str]:
    """
    Chemins (métadonnées JSON, charge binaire) d'un artefact à partir de son chemin de base.

    Args:
        path: Chemin de base, avec ou sans extension .json / .bin

    Returns:
        Tuple[str, str]: Chemin du document JSON et chemin de la charge binaire
    """
    base = str(path)
    for suffix in ('.json', '.bin'):
        if base.endswith(suffix):
            base = base[:-len(suffix)]
    return base + '.json', base + '.bin'


@dataclass(frozen=True, eq=False)
class NormStats:
    """
    Statistiques de normalisation, estimées sur le segment d'entraînement.

    zscore : moyenne et écart-type (population) par (nœud, mode).
    maxmin : bornes inférieure et supérieure par mode.
    """
    kind: str
    mean: np.ndarray
    std: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ContractError(f"Normalisation inconnue: {self.kind}")
        for name in ('mean', 'std', 'lower', 'upper'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.mean.shape != self.std.shape or self.lower.shape != self.upper.shape:
            raise DimensionError("NormStats: formes incohérentes", expected=self.mean.shape, actual=self.std.shape)
        if self.kind == 'zscore' and np.any(self.std <= 0):
            raise ContractError("NormStats: écart-type nul en normalisation zscore")
        if self.kind == 'maxmin' and np.any(self.lower >= self.upper):
            raise ContractError("NormStats: bornes max-min dégénérées")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mean.shape

    def normalize(self, values: np.ndarray) -> np.ndarray:
        if self.kind == 'zscore':
            return (values - self.mean) / self.std
        return (values - self.lower) / (self.upper - self.lower)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        if self.kind == 'zscore':
            return values * self.std + self.mean
        return values * (self.upper - self.lower) + self.lower

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'mean': self.mean.tolist(),
            'std': self.std.tolist(),
            'lower': self.lower.tolist(),
            'upper': self.upper.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NormStats':
        return cls(kind=data['kind'], mean=np.array(data['mean']), std=np.array(data['std']),
                   lower=np.array(data['lower']), upper=np.array(data['upper']))


@dataclass(frozen=True, eq=False)
class FlowTensor:
    """
    Tenseur de flux tridimensionnel : valeurs T × M × N (temps, nœud, mode).

    `norm` est renseigné lorsque les valeurs sont normalisées avec ces statistiques.
    """
    values: np.ndarray
    node_ids: tuple
    mode_names: tuple
    timestamps: np.ndarray
    norm: Optional[NormStats] = None
    coordinates: Optional[NodeCoordinates] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise DimensionError("FlowTensor: valeurs T × M × N attendues", actual=values.shape)
        T, M, N = values.shape
        if len(self.node_ids) != M or len(self.mode_names) != N:
            raise DimensionError("FlowTensor: identifiants de nœuds/modes", expected=(M, N),
                                 actual=(len(self.node_ids), len(self.mode_names)))
        timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if timestamps.shape != (T,):
            raise DimensionError("FlowTensor: horodatages", expected=(T,), actual=timestamps.shape)
        if T > 1:
            steps = np.diff(timestamps)
            if np.any(steps <= 0) or np.any(steps != steps[0]):
                raise ContractError("FlowTensor: horodatages non strictement croissants ou de pas non uniforme")
        if not np.all(np.isfinite(values)):
            raise ContractError("FlowTensor: valeurs non finies")
        if self.norm is not None and self.norm.shape != (M, N):
            raise DimensionError("FlowTensor: statistiques de normalisation", expected=(M, N), actual=self.norm.shape)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'timestamps', timestamps)
        object.__setattr__(self, 'node_ids', tuple(int(i) for i in self.node_ids))
        object.__setattr__(self, 'mode_names', tuple(str(m) for m in self.mode_names))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]

    @property
    def N(self) -> int:
        return self.values.shape[2]

    @property
    def stride(self) -> int:
        return int(self.timestamps[1] - self.timestamps[0]) if self.T > 1 else int(self.metadata.get('stride', 1))

    @property
    def normalized(self) -> bool:
        return self.norm is not None

    def node_index(self, node_id: int) -> int:
        if node_id not in self.node_ids:
            raise ContractError(f"Nœud {node_id} absent du flux")
        return self.node_ids.index(node_id)

    def mode_index(self, mode: str) -> int:
        if mode not in self.mode_names:
            raise ContractError(f"Mode '{mode}' absent du flux (modes: {', '.join(self.mode_names)})")
        return self.mode_names.index(mode)

    def segment(self, start: int, stop: int) -> 'FlowTensor':
        """
        Sous-flux chronologique [start, stop).
        """
        if not 0 <= start < stop <= self.T:
            raise ContractError(f"Segment [{start}, {stop}) hors du flux de longueur {self.T}")
        return replace(self, values=self.values[start:stop].copy(), timestamps=self.timestamps[start:stop].copy())

    def with_values(self, values: np.ndarray, norm: Optional[NormStats] = None) -> 'FlowTensor':
        return replace(self, values=values, norm=norm)


@dataclass(frozen=True, eq=False)
class WindowBatch:
    """
    Fenêtre normalisée M × N × W couvrant [t−W, t−1] et sa cible M × N à l'instant t.
    """
    window: np.ndarray
    target: np.ndarray
    index: int


# ====== DÉCOUPAGE ======

def split(flow: FlowTensor, ratios: Sequence[float] = (0.8, 0.1, 0.1),
          window: Optional[int] = None) -> Tuple[FlowTensor, FlowTensor, FlowTensor]:
    """
    Découpe un flux en segments chronologiques contigus (entraînement, validation, test).

    Args:
        flow: Flux à découper
        ratios: Proportions positives de somme 1
        window: Longueur de fenêtre ; si fournie, chaque segment doit dépasser W

    Returns:
        Tuple[FlowTensor, FlowTensor, FlowTensor]: Segments dans l'ordre chronologique
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(float(np.sum(ratios)) - 1.0) > 1e-9:
        raise ContractError(f"Proportions de découpage invalides: {tuple(ratios)}")
    n_train = int(round(flow.T * ratios[0]))
    n_val = int(round(flow.T * ratios[1]))
    n_test = flow.T - n_train - n_val
    sizes = (n_train, n_val, n_test)
    minimum = 1 if window is None else window + 1
    if min(sizes) < minimum:
        raise ContractError(f"Segment trop court pour W={window}: tailles {sizes}")
    bounds = np.cumsum((0,) + sizes)
    return tuple(flow.segment(int(bounds[k]), int(bounds[k + 1])) for k in range(3))


# ====== NORMALISATION ======

def fit_norm(train: FlowTensor, kind: str = 'zscore') -> NormStats:
    """
    Estime les statistiques de normalisation sur le segment d'entraînement.

    Args:
        train: Segment d'entraînement brut
        kind: 'zscore' (moyenne/écart-type population par (nœud, mode)) ou 'maxmin'

    Returns:
        NormStats: Statistiques figées

    Raises:
        ConstantSeriesError: Série d'entraînement constante
    """
    if train.normalized:
        raise ContractError("fit_norm attend un segment brut")
    values = train.values
    M, N = train.M, train.N
    if kind == 'zscore':
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        constant = np.argwhere(std <= 0)
        if constant.size:
            i, j = constant[0]
            raise ConstantSeriesError(train.node_ids[i], train.mode_names[j])
        return NormStats('zscore', mean, std, np.zeros(N), np.ones(N))
    if kind == 'maxmin':
        lower = np.zeros(N)
        upper = np.ones(N)
        for j, mode in enumerate(train.mode_names):
            if mode in MAXMIN_BOUNDS:
                lower[j], upper[j] = MAXMIN_BOUNDS[mode]
            else:
                lower[j], upper[j] = values[:, :, j].min(), values[:, :, j].max()
                logger.info(f"Bornes max-min du mode '{mode}' estimées sur l'entraînement: [{lower[j]}, {upper[j]}]")
            if lower[j] >= upper[j]:
                raise ConstantSeriesError('*', mode)
        return NormStats('maxmin', np.zeros((M, N)), np.ones((M, N)), lower, upper)
    raise ContractError(f"Normalisation inconnue: {kind}")


def apply_norm(flow: FlowTensor, stats: NormStats) -> FlowTensor:
    """
    Normalise un flux brut avec des statistiques figées.
    """
    if flow.normalized:
        raise ContractError("apply_norm: le flux est déjà normalisé")
    if stats.shape != (flow.M, flow.N):
        raise DimensionError("apply_norm: statistiques", expected=(flow.M, flow.N), actual=stats.shape)
    return flow.with_values(stats.normalize(flow.values), norm=stats)


def invert_norm(flow: FlowTensor) -> FlowTensor:
    """
    Ramène un flux normalisé dans l'espace brut.
    """
    if not flow.normalized:
        raise ContractError("invert_norm: le flux n'est pas normalisé")
    return flow.with_values(flow.norm.denormalize(flow.values), norm=None)


# ====== FENÊTRES ======

def window_at(flow: FlowTensor, W: int, t: int) -> WindowBatch:
    """
    Fenêtre [t−W, t−1] et cible t.
    """
    if not W <= t < flow.T:
        raise ContractError(f"Indice cible {t} hors de [{W}, {flow.T - 1}]")
    window = np.transpose(flow.values[t - W:t], (1, 2, 0)).copy()
    return WindowBatch(window=window, target=flow.values[t].copy(), index=t)


def windows(flow: FlowTensor, W: int, start: Optional[int] = None, stop: Optional[int] = None) -> Iterator[WindowBatch]:
    """
    Parcourt les fenêtres de pas 1, une par indice cible t ∈ [W, T−1].

    Args:
        flow: Flux (normalisé pour l'entraînement et le score)
        W: Longueur de fenêtre
        start: Premier indice cible (W par défaut)
        stop: Indice cible de fin exclu (T par défaut)

    Returns:
        Iterator[WindowBatch]: Lots dans l'ordre chronologique
    """
    if flow.T <= W:
        raise ContractError(f"Flux de longueur {flow.T} trop court pour une fenêtre de {W}")
    first = W if start is None else max(W, start)
    last = flow.T if stop is None else min(flow.T, stop)
    for t in range(first, last):
        yield window_at(flow, W, t)


def count_windows(flow: FlowTensor, W: int) -> int:
    return max(0, flow.T - W)


# ====== FORMAT DE FLUX PRÉPARÉ ======

def save_flow(flow: FlowTensor, path) -> Tuple[str, str]:
    """
    Écrit un flux préparé : métadonnées JSON et charge binaire float32 little-endian
    en ordre [temps][nœud][mode].

    Args:
        flow: Flux brut à sauvegarder
        path: Chemin de base

    Returns:
        Tuple[str, str]: Chemins écrits
    """
    json_path, bin_path = artifact_paths(path)
    directory = os.path.dirname(json_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    meta = {
        'format_version': FLOW_FORMAT_VERSION,
        'M': flow.M,
        'N': flow.N,
        'T': flow.T,
        'node_ids': list(flow.node_ids),
        'mode_names': list(flow.mode_names),
        'start_epoch': int(flow.timestamps[0]),
        'stride': flow.stride,
        'dtype': 'float32-le',
        'layout': '[time][node][mode]',
        'norm': flow.norm.to_dict() if flow.norm is not None else None,
        'coordinates': flow.coordinates.to_dict() if flow.coordinates is not None else None,
        'metadata': flow.metadata,
    }
    with open(json_path, 'w', encoding='utf-8') as f:
        json.dump(meta, f, ensure_ascii=False, indent=2)
    flow.values.astype('<f4').tofile(bin_path)
    logger.info(f"Flux préparé écrit dans {json_path} ({flow.M}×{flow.N}×{flow.T})")
    return json_path, bin_path


def load_flow(path) -> FlowTensor:
    """
    Relit un flux préparé.

    Raises:
        InputError: Fichier absent, métadonnées invalides ou charge tronquée
    """
    json_path, bin_path = artifact_paths(path)
    try:
        with open(json_path, 'r', encoding='utf-8') as f:
            meta = json.load(f)
        jsonschema.validate(meta, FLOW_SCHEMA)
    except FileNotFoundError as e:
        raise InputError(f"Flux préparé introuvable: {json_path}") from e
    except (json.JSONDecodeError, jsonschema.ValidationError) as e:
        raise InputError(f"Métadonnées de flux invalides dans {json_path}: {e}") from e

    T, M, N = meta['T'], meta['M'], meta['N']
    if not os.path.exists(bin_path):
        raise InputError(f"Charge binaire introuvable: {bin_path}")
    raw = np.fromfile(bin_path, dtype='<f4')
    if raw.size != T * M * N:
        raise InputError(f"Charge binaire tronquée: {raw.size} valeurs au lieu de {T * M * N}")
    timestamps = meta['start_epoch'] + meta['stride'] * np.arange(T, dtype=np.int64)
    return FlowTensor(
        values=raw.reshape(T, M, N).astype(np.float64),
        node_ids=tuple(meta['node_ids']),
        mode_names=tuple(meta['mode_names']),
        timestamps=timestamps,
        norm=NormStats.from_dict(meta['norm']) if meta.get('norm') else None,
        coordinates=NodeCoordinates.from_dict(meta['coordinates']) if meta.get('coordinates') else None,
        metadata=meta.get('metadata', {}),
    )
