#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Detector - Modèle de prédiction multimodal à attention de graphe et boucle d'entraînement

Pour chaque nœud i, la fenêtre X_i (N × W) passe par la GAT des modes et par la GAT
temporelle ; les trois blocs [X_i ‖ F_mode ‖ F_timeᵀ] forment une matrice N × 3W dont
chaque ligne est repliée par la GRU partagée en un vecteur D, ramené à un scalaire par
la couche dense. Les M vecteurs de représentation empilés (M × N) passent enfin par
la GAT spatiale, qui prédit les lectures de l'instant suivant.
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np
import pandas as pd

from core import tensor_core as tc
from core.config_manager import get_config
from core.errors import (CheckpointError, ConfigError, ContractError, DimensionError, InputError,
                         NonFiniteLossError)
from core.nn_layers import DenseLayer, GatLayer, GruCell, dense_rows, gat_forward, gru_fold
from core.tensor_core import Adam, Tape, Tensor
from flows.graph_builders import (Adjacency, mode_adjacency, node_adjacency_full, node_adjacency_topk,
                                  time_adjacency)
from flows.stream_model import NORM_KINDS, FlowTensor, NormStats, WindowBatch, artifact_paths, windows

# Configuration du système de logging
logger = logging.getLogger('Detector')

CHECKPOINT_FORMAT_VERSION = 1
NODE_ADJACENCY_KINDS = ('full1', 'topk')
MODE_ADJACENCY_KINDS = ('full1', 'correlation')
ABLATION_FLAGS = ('disable_mode_gat', 'disable_time_gat', 'disable_node_gat')

CHECKPOINT_SCHEMA = {
    'type': 'object',
    'required': ['format_version', 'config', 'M', 'N', 'W', 'node_ids', 'mode_names', 'parameters', 'adjacencies'],
    'properties': {
        'format_version': {'type': 'integer'},
        'config': {'type': 'object'},
        'M': {'type': 'integer', 'minimum': 1},
        'N': {'type': 'integer', 'minimum': 1},
        'W': {'type': 'integer', 'minimum': 2},
        'node_ids': {'type': 'array', 'items': {'type': 'integer'}},
        'mode_names': {'type': 'array', 'items': {'type': 'string'}},
        'parameters': {
            'type': 'array',
            'items': {
                'type': 'object',
                'required': ['name', 'shape'],
                'properties': {
                    'name': {'type': 'string'},
                    'shape': {'type': 'array', 'items': {'type': 'integer', 'minimum': 0}},
                },
            },
        },
        'adjacencies': {
            'type': 'object',
            'required': ['mode', 'time', 'node'],
        },
        'norm': {'type': ['object', 'null']},
        'history': {'type': ['array', 'null']},
    },
}


# ====== CONFIGURATION ======

@dataclass
class DetectorConfig:
    """
    Hyperparamètres du détecteur et options d'ablation.
    """
    window: int = 60
    hidden: int = 32
    gru_layers: int = 2
    epochs: int = 60
    learning_rate: float = 5e-5
    node_adjacency: str = 'full1'
    topk_k: int = 5
    mode_adjacency: str = 'full1'
    mode_deps: Optional[List[List[int]]] = None
    normalization: str = 'zscore'
    seed: int = 0
    disable_mode_gat: bool = False
    disable_time_gat: bool = False
    disable_node_gat: bool = False

    @classmethod
    def from_config(cls, section: Optional[Dict[str, Any]] = None, **overrides) -> 'DetectorConfig':
        """
        Construit une configuration depuis la section `detector`, surchargée par des options.

        Args:
            section: Section de configuration (configuration globale par défaut)
            **overrides: Valeurs prioritaires ; None signifie « non fournie »

        Returns:
            DetectorConfig: Configuration validée

        Raises:
            ConfigError: Valeur inconnue ou hors domaine
        """
        values = dict(get_config('detector') if section is None else section)
        known = {f.name for f in fields(cls)}
        unknown = [key for key in overrides if key not in known]
        if unknown:
            raise ConfigError(f"Paramètres du détecteur inconnus: {', '.join(unknown)}")
        values.update({key: value for key, value in overrides.items() if value is not None})
        for key in [key for key in values if key not in known]:
            logger.warning(f"Paramètre '{key}' de la section detector ignoré")
            values.pop(key)
        try:
            config = cls(**values)
            config.window = int(config.window)
            config.hidden = int(config.hidden)
            config.gru_layers = int(config.gru_layers)
            config.epochs = int(config.epochs)
            config.learning_rate = float(config.learning_rate)
            config.topk_k = int(config.topk_k)
            config.seed = int(config.seed)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Configuration du détecteur invalide: {e}") from e
        config.validate()
        return config

    def validate(self) -> None:
        """
        Vérifie les invariants de la configuration avant tout calcul.
        """
        if self.window < 2:
            raise ConfigError(f"window doit être ≥ 2 (reçu {self.window})")
        if self.hidden < 1:
            raise ConfigError(f"hidden doit être ≥ 1 (reçu {self.hidden})")
        if self.gru_layers < 1:
            raise ConfigError(f"gru_layers doit être ≥ 1 (reçu {self.gru_layers})")
        if self.epochs < 1:
            raise ConfigError(f"epochs doit être ≥ 1 (reçu {self.epochs})")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate doit être > 0 (reçu {self.learning_rate})")
        if self.node_adjacency not in NODE_ADJACENCY_KINDS:
            raise ConfigError(f"node_adjacency inconnue: {self.node_adjacency}")
        if self.topk_k < 1:
            raise ConfigError(f"topk_k doit être ≥ 1 (reçu {self.topk_k})")
        if self.mode_adjacency not in MODE_ADJACENCY_KINDS:
            raise ConfigError(f"mode_adjacency inconnue: {self.mode_adjacency}")
        if self.mode_adjacency == 'correlation' and not self.mode_deps:
            raise ConfigError("mode_adjacency 'correlation' exige mode_deps")
        if self.normalization not in NORM_KINDS:
            raise ConfigError(f"normalization inconnue: {self.normalization}")

    @property
    def ablation_flags(self) -> Tuple[str, ...]:
        return tuple(flag for flag in ABLATION_FLAGS if getattr(self, flag))

    @property
    def sequence_length(self) -> int:
        """Longueur des séquences repliées par la GRU : W, 2W ou 3W."""
        blocks = 1 + (not self.disable_mode_gat) + (not self.disable_time_gat)
        return blocks * self.window

    def ablated(self, flags: Iterable[str]) -> 'DetectorConfig':
        flags = tuple(flags)
        unknown = [flag for flag in flags if flag not in ABLATION_FLAGS]
        if unknown:
            raise ContractError(f"Options d'ablation inconnues: {unknown}")
        return replace(self, **{flag: True for flag in flags})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# ====== HISTORIQUE DES PERTES ======

@dataclass
class EpochRecord:
    """Pertes d'une époque : forme quadratique, sa racine et la perte de validation."""
    epoch: int
    train_loss: float
    train_rmse: float
    val_loss: Optional[float] = None


@dataclass
class LossHistory:
    records: List[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    @property
    def losses(self) -> List[float]:
        return [r.train_loss for r in self.records]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records],
                            columns=['epoch', 'train_loss', 'train_rmse', 'val_loss'])

    def to_list(self) -> List[Dict[str, Any]]:
        return [asdict(r) for r in self.records]

    @classmethod
    def from_list(cls, items: Sequence[Dict[str, Any]]) -> 'LossHistory':
        return cls(records=[EpochRecord(**item) for item in items])


# ====== MODÈLE ======

@dataclass
class DetectorModel:
    """
    Modèle complet : GAT des modes (W → W), GAT temporelle (N → N), GRU empilée
    partagée (1 → D), tête dense (D → 1) et GAT spatiale (N → N).

    Un module désactivé par ablation vaut None et ne porte aucun paramètre.
    """
    config: DetectorConfig
    mode_gat: Optional[GatLayer]
    time_gat: Optional[GatLayer]
    gru: GruCell
    dense: DenseLayer
    node_gat: Optional[GatLayer]
    mode_adjacency: Adjacency
    time_adjacency: Adjacency
    node_adjacency: Adjacency
    node_ids: tuple
    mode_names: tuple
    norm: Optional[NormStats] = None
    history: Optional[LossHistory] = None

    def __post_init__(self):
        M, N, W = len(self.node_ids), len(self.mode_names), self.config.window
        for label, adjacency, extent in (('modes', self.mode_adjacency, N), ('temps', self.time_adjacency, W),
                                         ('nœuds', self.node_adjacency, M)):
            if adjacency.extent != extent:
                raise DimensionError(f"Adjacence des {label}", expected=(extent, extent),
                                     actual=adjacency.entries.shape)

    @property
    def M(self) -> int:
        return len(self.node_ids)

    @property
    def N(self) -> int:
        return len(self.mode_names)

    @property
    def W(self) -> int:
        return self.config.window

    def parameters(self) -> Dict[str, Tensor]:
        """
        Registre des paramètres, dans l'ordre fixe de sérialisation.
        """
        params: Dict[str, Tensor] = {}
        for module in (self.mode_gat, self.time_gat, self.gru, self.dense, self.node_gat):
            if module is not None:
                params.update(module.parameters())
        return params

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters().values()))


def build_adjacencies(config: DetectorConfig, train: FlowTensor) -> Tuple[Adjacency, Adjacency]:
    """
    Construit les adjacences des nœuds et des modes à partir du segment d'entraînement.

    La corrélation entre modes utilise, pour chaque mode, la série d'entraînement
    normalisée moyennée sur les nœuds.

    Returns:
        Tuple[Adjacency, Adjacency]: (adjacence des nœuds, adjacence des modes)
    """
    if config.node_adjacency == 'topk':
        if train.coordinates is None:
            raise InputError("L'adjacence topk exige les coordonnées des nœuds dans le flux préparé")
        node_adj = node_adjacency_topk(train.coordinates.subset(train.node_ids), config.topk_k)
    else:
        node_adj = node_adjacency_full(train.M)
    series = train.values.mean(axis=1).T
    deps = [set(d) for d in config.mode_deps] if config.mode_adjacency == 'correlation' else None
    return node_adj, mode_adjacency(series, deps)


def init_model(config: DetectorConfig, node_ids: Sequence[int], mode_names: Sequence[str],
               node_adj: Adjacency, mode_adj: Adjacency, norm: Optional[NormStats] = None) -> DetectorModel:
    """
    Initialise un modèle à partir de la graine de la configuration.

    Tous les modules sont tirés dans un ordre fixe avant l'ablation, si bien qu'un modèle
    ablaté partage l'initialisation des modules restants avec le modèle complet.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    W, D, N = config.window, config.hidden, len(mode_names)
    model = DetectorModel(
        config=replace(config, disable_mode_gat=False, disable_time_gat=False, disable_node_gat=False),
        mode_gat=GatLayer.create(rng, W, W, activation='relu', name='mode_gat'),
        time_gat=GatLayer.create(rng, N, N, activation='relu', name='time_gat'),
        gru=GruCell.create(rng, 1, D, config.gru_layers, name='gru'),
        dense=DenseLayer.create(rng, D, 1, name='dense'),
        node_gat=GatLayer.create(rng, N, N, activation='identity', name='node_gat'),
        mode_adjacency=mode_adj,
        time_adjacency=time_adjacency(W),
        node_adjacency=node_adj,
        node_ids=tuple(node_ids),
        mode_names=tuple(mode_names),
        norm=norm,
    )
    return ablate(model, config.ablation_flags)


def ablate(model: DetectorModel, flags: Iterable[str]) -> DetectorModel:
    """
    Désactive des modules par exclusion.

    disable_mode_gat / disable_time_gat retirent le bloc correspondant de la concaténation ;
    disable_node_gat remplace la GAT spatiale par l'identité. Les paramètres restants
    sont partagés avec le modèle d'origine.
    """
    config = model.config.ablated(flags)
    return replace(
        model,
        config=config,
        mode_gat=None if config.disable_mode_gat else model.mode_gat,
        time_gat=None if config.disable_time_gat else model.time_gat,
        node_gat=None if config.disable_node_gat else model.node_gat,
    )


def check_flow(model: DetectorModel, flow: FlowTensor) -> None:
    """
    Vérifie qu'un flux a les étendues M et N du modèle.
    """
    if (flow.M, flow.N) != (model.M, model.N):
        raise DimensionError("Flux incompatible avec le point de sauvegarde",
                             expected=(model.M, model.N), actual=(flow.M, flow.N))


# ====== PASSE AVANT ======

def forward(model: DetectorModel, batch: Union[WindowBatch, np.ndarray],
            attention: Optional[Dict[str, List[np.ndarray]]] = None) -> Tensor:
    """
    Prédit les lectures M × N de l'instant suivant la fenêtre.

    Args:
        model: Modèle
        batch: Lot de fenêtre ou fenêtre normalisée M × N × W
        attention: Dictionnaire rempli des matrices α des GAT actives
            ('mode' et 'time' : une par nœud, 'node' : une seule)

    Returns:
        Tensor: Prédiction M × N
    """
    window = batch.window if isinstance(batch, WindowBatch) else np.asarray(batch, dtype=np.float64)
    M, N, W = model.M, model.N, model.W
    if window.shape != (M, N, W):
        raise DimensionError("forward: fenêtre", expected=(M, N, W), actual=window.shape)
    length = model.config.sequence_length

    blocks: List[Tensor] = []
    for i in range(M):
        X_i = tc.constant(window[i])
        parts = [X_i]
        if model.mode_gat is not None:
            F_mode, alpha = gat_forward(model.mode_gat, X_i, model.mode_adjacency)
            if attention is not None:
                attention.setdefault('mode', []).append(alpha)
            parts.append(F_mode)
        if model.time_gat is not None:
            F_time, alpha = gat_forward(model.time_gat, tc.transpose(X_i), model.time_adjacency)
            if attention is not None:
                attention.setdefault('time', []).append(alpha)
            parts.append(tc.transpose(F_time))
        characteristic = tc.concat(parts, axis=1)
        if characteristic.shape != (N, length):
            raise DimensionError("forward: matrice caractéristique", expected=(N, length), actual=characteristic.shape)
        blocks.append(characteristic)

    # une ligne par (nœud, mode), repliée comme une séquence de scalaires
    stacked = tc.concat(blocks, axis=0)
    steps = [tc.slice_axis(stacked, 1, t, t + 1) for t in range(length)]
    hidden = gru_fold(model.gru, steps)
    if hidden.shape != (M * N, model.config.hidden):
        raise DimensionError("forward: états GRU", expected=(M * N, model.config.hidden), actual=hidden.shape)
    representation = tc.reshape(dense_rows(model.dense, hidden), (M, N))
    if model.node_gat is None:
        return representation
    prediction, alpha = gat_forward(model.node_gat, representation, model.node_adjacency)
    if attention is not None:
        attention.setdefault('node', []).append(alpha)
    return prediction


def predict(model: DetectorModel, batch: Union[WindowBatch, np.ndarray]) -> np.ndarray:
    """
    Prédiction en inférence, sans enregistrement sur la bande.
    """
    with tc.no_grad():
        return forward(model, batch).numpy()


# ====== PERTE ======

def batch_loss(prediction: Tensor, target: np.ndarray) -> Tensor:
    """
    Moyenne des carrés des écarts sur les M·N entrées d'un lot.
    """
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise DimensionError("batch_loss: cible", expected=prediction.shape, actual=target.shape)
    return tc.mean(tc.square(tc.sub(prediction, tc.constant(target))))


def loss(predictions: Sequence[Tensor], targets: Sequence[np.ndarray]) -> Tensor:
    """
    Perte d'un segment : moyenne sur les lots de la moyenne des carrés des écarts.

    Raises:
        ContractError: Segment vide ou lots désalignés
    """
    if not predictions:
        raise ContractError("loss: segment vide")
    if len(predictions) != len(targets):
        raise ContractError(f"loss: {len(predictions)} prédiction(s) pour {len(targets)} cible(s)")
    total = batch_loss(predictions[0], targets[0])
    for prediction, target in zip(predictions[1:], targets[1:]):
        total = tc.add(total, batch_loss(prediction, target))
    return tc.scale(total, 1.0 / len(predictions))


def segment_loss(model: DetectorModel, flow: FlowTensor) -> float:
    """
    Perte moyenne d'un segment normalisé, en inférence.
    """
    values = [float(np.mean((predict(model, batch) - batch.target) ** 2)) for batch in windows(flow, model.W)]
    if not values:
        raise ContractError("segment_loss: segment vide")
    return float(np.mean(values))


# ====== ENTRAÎNEMENT ======

def train(config: DetectorConfig, train_flow: FlowTensor, val_flow: Optional[FlowTensor] = None,
          on_epoch: Optional[Callable[[EpochRecord], None]] = None,
          on_batch: Optional[Callable[[int, int], None]] = None) -> Tuple[DetectorModel, LossHistory]:
    """
    Entraîne le détecteur par mises à jour Adam lot par lot, fenêtres en ordre chronologique.

    Args:
        config: Configuration validée
        train_flow: Segment d'entraînement normalisé
        val_flow: Segment de validation normalisé avec les mêmes statistiques
        on_epoch: Rappel appelé à la fin de chaque époque
        on_batch: Rappel appelé après chaque lot (époque, indice du lot)

    Returns:
        Tuple[DetectorModel, LossHistory]: Modèle final et pertes par époque

    Raises:
        NonFiniteLossError: Perte non finie (époque et lot en diagnostic)
    """
    config.validate()
    if not train_flow.normalized:
        raise ContractError("train: le segment d'entraînement doit être normalisé")
    if val_flow is not None:
        shared = val_flow.norm is train_flow.norm or _same_stats(val_flow.norm, train_flow.norm)
        if not val_flow.normalized or not shared:
            raise ContractError("train: validation et entraînement doivent partager les statistiques de normalisation")
        if (val_flow.M, val_flow.N) != (train_flow.M, train_flow.N):
            raise DimensionError("train: segment de validation", expected=(train_flow.M, train_flow.N),
                                 actual=(val_flow.M, val_flow.N))
    if train_flow.T <= config.window:
        raise ContractError(f"train: segment d'entraînement de {train_flow.T} instants pour W={config.window}")

    node_adj, mode_adj = build_adjacencies(config, train_flow)
    model = init_model(config, train_flow.node_ids, train_flow.mode_names, node_adj, mode_adj, train_flow.norm)
    optimizer = Adam(model.parameters(), learning_rate=config.learning_rate)
    history = LossHistory()
    logger.info(f"Entraînement: {model.parameter_count()} paramètres, {train_flow.T - config.window} fenêtres "
                f"par époque, {config.epochs} époques")

    for epoch in range(1, config.epochs + 1):
        batch_losses: List[float] = []
        for index, batch in enumerate(windows(train_flow, config.window)):
            with Tape() as tape:
                value = batch_loss(forward(model, batch), batch.target)
                if not math.isfinite(value.item()):
                    raise NonFiniteLossError(epoch, index, value.item())
                tc.backward(value, tape)
            optimizer.step()
            optimizer.zero_grad()
            batch_losses.append(value.item())
            if on_batch is not None:
                on_batch(epoch, index)

        train_loss = float(np.mean(batch_losses))
        val_loss = segment_loss(model, val_flow) if val_flow is not None and val_flow.T > config.window else None
        record = EpochRecord(epoch, train_loss, math.sqrt(train_loss), val_loss)
        history.append(record)
        val_text = f"{val_loss:.6f}" if val_loss is not None else "-"
        logger.info(f"Époque {epoch}/{config.epochs}: perte {train_loss:.6f}, RMSE {record.train_rmse:.6f}, "
                    f"validation {val_text}")
        if on_epoch is not None:
            on_epoch(record)

    model.history = history
    return model, history


def _same_stats(a: Optional[NormStats], b: Optional[NormStats]) -> bool:
    if a is None or b is None:
        return False
    return (a.kind == b.kind and np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)
            and np.array_equal(a.lower, b.lower) and np.array_equal(a.upper, b.upper))


# ====== POINTS DE SAUVEGARDE ======

def save_model(model: DetectorModel, path) -> Tuple[str, str]:
    """
    Écrit un point de sauvegarde : document JSON (configuration, registre des paramètres,
    adjacences, statistiques) et charge binaire float64 little-endian en ordre de registre.

    Returns:
        Tuple[str, str]: Chemins écrits
    """
    json_path, bin_path = artifact_paths(path)
    directory = os.path.dirname(json_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    params = model.parameters()
    meta = {
        'format_version': CHECKPOINT_FORMAT_VERSION,
        'config': model.config.to_dict(),
        'M': model.M,
        'N': model.N,
        'W': model.W,
        'node_ids': list(model.node_ids),
        'mode_names': list(model.mode_names),
        'parameters': [{'name': name, 'shape': list(p.shape)} for name, p in params.items()],
        'adjacencies': {
            'mode': model.mode_adjacency.to_dict(),
            'time': model.time_adjacency.to_dict(),
            'node': model.node_adjacency.to_dict(),
        },
        'norm': model.norm.to_dict() if model.norm is not None else None,
        'history': model.history.to_list() if model.history is not None else None,
    }
    with open(json_path, 'w', encoding='utf-8') as f:
        json.dump(meta, f, ensure_ascii=False, indent=2)
    payload = np.concatenate([p.data.reshape(-1) for p in params.values()]) if params else np.zeros(0)
    payload.astype('<f8').tofile(bin_path)
    logger.info(f"Point de sauvegarde écrit dans {json_path} ({payload.size} valeurs)")
    return json_path, bin_path


def load_model(path, flow: Optional[FlowTensor] = None) -> DetectorModel:
    """
    Relit un point de sauvegarde.

    Args:
        path: Chemin de base du point de sauvegarde
        flow: Flux contre lequel vérifier les étendues M et N (facultatif)

    Returns:
        DetectorModel: Modèle restauré à l'identique

    Raises:
        CheckpointError: Fichier absent, tronqué, mal formé ou de version incompatible
        DimensionError: Étendues incompatibles avec le flux fourni
    """
    json_path, bin_path = artifact_paths(path)
    try:
        with open(json_path, 'r', encoding='utf-8') as f:
            meta = json.load(f)
        jsonschema.validate(meta, CHECKPOINT_SCHEMA)
    except FileNotFoundError as e:
        raise CheckpointError(f"Point de sauvegarde introuvable: {json_path}") from e
    except (json.JSONDecodeError, jsonschema.ValidationError) as e:
        raise CheckpointError(f"Point de sauvegarde mal formé ({json_path}): {e}") from e
    if meta['format_version'] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"Version de point de sauvegarde {meta['format_version']} non prise en charge "
                              f"(attendue: {CHECKPOINT_FORMAT_VERSION})")

    try:
        config = DetectorConfig.from_config(meta['config'])
        adjacencies = {kind: Adjacency.from_dict(meta['adjacencies'][kind]) for kind in ('mode', 'time', 'node')}
        norm = NormStats.from_dict(meta['norm']) if meta.get('norm') else None
        model = init_model(config, meta['node_ids'], meta['mode_names'], adjacencies['node'],
                           adjacencies['mode'], norm)
    except (ConfigError, DimensionError, ContractError, KeyError) as e:
        raise CheckpointError(f"Point de sauvegarde incohérent ({json_path}): {e}") from e

    params = model.parameters()
    registry = [(entry['name'], tuple(entry['shape'])) for entry in meta['parameters']]
    expected = [(name, p.shape) for name, p in params.items()]
    if registry != expected:
        raise CheckpointError(f"Registre de paramètres incompatible avec la configuration ({json_path})")
    if not os.path.exists(bin_path):
        raise CheckpointError(f"Charge binaire introuvable: {bin_path}")
    payload = np.fromfile(bin_path, dtype='<f8')
    total = int(sum(int(np.prod(shape)) for _, shape in registry))
    if payload.size != total:
        raise CheckpointError(f"Point de sauvegarde tronqué: {payload.size} valeurs au lieu de {total}")

    offset = 0
    for p in params.values():
        p.data = payload[offset:offset + p.size].reshape(p.shape).astype(np.float64)
        offset += p.size
    if meta.get('history'):
        model.history = LossHistory.from_list(meta['history'])
    if flow is not None:
        check_flow(model, flow)
    return model


# ====== VÉRIFICATION DES GRADIENTS ======

def toy_model(seed: int = 0, M: int = 3, N: int = 2, W: int = 4, D: int = 3, layers: int = 1) -> Tuple[DetectorModel, WindowBatch]:
    """
    Petit détecteur complet et lot aléatoire pour la vérification des gradients.
    """
    config = DetectorConfig(window=W, hidden=D, gru_layers=layers, epochs=1, seed=seed)
    model = init_model(config, tuple(range(1, M + 1)), tuple(f"mode{j}" for j in range(N)),
                       node_adjacency_full(M), mode_adjacency(np.zeros((N, W))))
    rng = np.random.default_rng(seed + 1)
    batch = WindowBatch(window=rng.normal(size=(M, N, W)), target=rng.normal(size=(M, N)), index=W)
    return model, batch


def gradcheck_detector(seed: int = 0, eps: float = 1e-5) -> tc.GradcheckReport:
    """
    Compare le gradient analytique de la perte du détecteur jouet aux différences finies.
    """
    model, batch = toy_model(seed)
    return tc.gradcheck(lambda: batch_loss(forward(model, batch), batch.target), model.parameters(), eps=eps)
