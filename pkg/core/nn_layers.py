#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
NNLayers - Couches apprenables : attention de graphe (GAT), GRU empilée et couche dense
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from core import tensor_core as tc
from core.errors import ContractError, DegenerateRowError, DimensionError
from core.tensor_core import Tensor

# Configuration du système de logging
logger = logging.getLogger('NNLayers')

ACTIVATIONS = ('identity', 'relu')


def glorot_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int,
                   name: str) -> Tensor:
    """
    Tire un paramètre uniformément dans ±sqrt(6/(fan_in+fan_out)).

    Args:
        rng: Générateur aléatoire
        shape: Forme du paramètre
        fan_in: Nombre d'entrées
        fan_out: Nombre de sorties
        name: Nom du paramètre dans le registre

    Returns:
        Tensor: Paramètre feuille différentiable
    """
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True, name=name)


def adjacency_structure(adjacency) -> Tuple[np.ndarray, np.ndarray]:
    """
    Retourne (poids, masque de voisinage) d'une adjacence ou d'une matrice brute.

    La ligne i du masque liste les voisins du sommet i.
    """
    if hasattr(adjacency, 'entries') and hasattr(adjacency, 'mask'):
        return np.asarray(adjacency.entries, dtype=np.float64), np.asarray(adjacency.mask, dtype=bool)
    weights = np.asarray(adjacency, dtype=np.float64)
    return weights, weights != 0


# ====== ATTENTION DE GRAPHE ======

@dataclass
class GatLayer:
    """
    Couche d'attention de graphe à une seule tête.

    B projette les attributs (F_out × F_in), `a` (2·F_out) note chaque paire
    (centre, voisin) ; les coefficients sont normalisés par softmax sur le voisinage.
    """
    B: Tensor
    a: Tensor
    leaky_slope: float = 0.2
    activation: str = 'relu'
    name: str = 'gat'

    def __post_init__(self):
        f_out = self.B.shape[0]
        if self.a.shape != (2 * f_out,):
            raise DimensionError(f"{self.name}: vecteur d'attention", expected=(2 * f_out,), actual=self.a.shape)
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"{self.name}: activation inconnue '{self.activation}'")

    @classmethod
    def create(cls, rng: np.random.Generator, in_features: int, out_features: int,
               activation: str = 'relu', leaky_slope: float = 0.2, name: str = 'gat') -> 'GatLayer':
        B = glorot_uniform(rng, (out_features, in_features), in_features, out_features, f"{name}.B")
        a = glorot_uniform(rng, (2 * out_features,), 2 * out_features, 1, f"{name}.a")
        return cls(B=B, a=a, leaky_slope=leaky_slope, activation=activation, name=name)

    @property
    def in_features(self) -> int:
        return self.B.shape[1]

    @property
    def out_features(self) -> int:
        return self.B.shape[0]

    def parameters(self) -> Dict[str, Tensor]:
        return {f"{self.name}.B": self.B, f"{self.name}.a": self.a}


def gat_forward(layer: GatLayer, H: Tensor, A) -> Tuple[Tensor, np.ndarray]:
    """
    Passe avant d'une couche GAT.

    q_i = B·h_i ; e_ij = LeakyReLU(aᵀ[q_i ‖ q_j]) pour j voisin de i (multiplié par le
    poids d'arête si l'adjacence est pondérée) ; α = softmax masqué par ligne ;
    h'_i = activation(Σ_j α_ij q_j).

    Args:
        layer: Couche GAT
        H: Matrice d'attributs P × F_in
        A: Adjacence P × P (Adjacency ou matrice ; ligne i = voisins de i)

    Returns:
        Tuple[Tensor, np.ndarray]: Sorties P × F_out et matrice d'attention P × P

    Raises:
        DegenerateRowError: Si un sommet n'a aucun voisin
    """
    weights, mask = adjacency_structure(A)
    if H.data.ndim != 2 or H.shape[1] != layer.in_features:
        raise DimensionError(f"{layer.name}: attributs", expected=('P', layer.in_features), actual=H.shape)
    P = H.shape[0]
    if mask.shape != (P, P):
        raise DimensionError(f"{layer.name}: adjacence", expected=(P, P), actual=mask.shape)
    isolated = np.flatnonzero(~mask.any(axis=1))
    if isolated.size:
        raise DegenerateRowError(int(isolated[0]), f"l'adjacence de {layer.name}")

    F = layer.out_features
    Q = tc.matmul(H, tc.transpose(layer.B))
    a_center = tc.reshape(tc.slice_axis(layer.a, 0, 0, F), (F, 1))
    a_neighbor = tc.reshape(tc.slice_axis(layer.a, 0, F, 2 * F), (F, 1))
    s_center = tc.matmul(Q, a_center)
    s_neighbor = tc.matmul(Q, a_neighbor)
    # S[i, j] = aᵀ[q_i ‖ q_j], alignement explicite par produits avec des vecteurs de uns
    S = tc.add(tc.matmul(s_center, tc.constant(np.ones((1, P)))),
               tc.matmul(tc.constant(np.ones((P, 1))), tc.transpose(s_neighbor)))
    E = tc.leaky_relu(S, layer.leaky_slope)
    if np.any(weights[mask] != 1.0):
        E = tc.mul(E, tc.constant(np.where(mask, weights, 0.0)))
    alpha = tc.softmax_rows(E, mask)
    out = tc.matmul(alpha, Q)
    if layer.activation == 'relu':
        out = tc.relu(out)
    return out, alpha.data.copy()


# ====== UNITÉ RÉCURRENTE À PORTES ======

@dataclass
class GruLayer:
    """
    Poids d'une couche GRU sans biais : W_* (D × F_in) et U_* (D × D).
    """
    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    name: str = 'gru0'

    def __post_init__(self):
        D, F = self.W_z.shape
        for label in ('W_r', 'W_h'):
            if getattr(self, label).shape != (D, F):
                raise DimensionError(f"{self.name}.{label}", expected=(D, F), actual=getattr(self, label).shape)
        for label in ('U_z', 'U_r', 'U_h'):
            if getattr(self, label).shape != (D, D):
                raise DimensionError(f"{self.name}.{label}", expected=(D, D), actual=getattr(self, label).shape)

    @classmethod
    def create(cls, rng: np.random.Generator, input_size: int, hidden_size: int, name: str = 'gru0') -> 'GruLayer':
        def w(label, fan_in):
            return glorot_uniform(rng, (hidden_size, fan_in), fan_in, hidden_size, f"{name}.{label}")
        return cls(W_z=w('W_z', input_size), W_r=w('W_r', input_size), W_h=w('W_h', input_size),
                   U_z=w('U_z', hidden_size), U_r=w('U_r', hidden_size), U_h=w('U_h', hidden_size),
                   name=name)

    @property
    def input_size(self) -> int:
        return self.W_z.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[0]

    def parameters(self) -> Dict[str, Tensor]:
        return {f"{self.name}.{label}": getattr(self, label)
                for label in ('W_z', 'W_r', 'W_h', 'U_z', 'U_r', 'U_h')}


@dataclass
class GruCell:
    """
    Pile de couches GRU : la séquence cachée de la couche k alimente la couche k+1.
    """
    layers: List[GruLayer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ContractError("GruCell: au moins une couche est requise")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.input_size != lower.hidden_size:
                raise DimensionError(f"{upper.name}: entrée de couche empilée",
                                     expected=(lower.hidden_size,), actual=(upper.input_size,))

    @classmethod
    def create(cls, rng: np.random.Generator, input_size: int, hidden_size: int, layer_count: int = 1,
               name: str = 'gru') -> 'GruCell':
        layers = [GruLayer.create(rng, input_size if k == 0 else hidden_size, hidden_size, f"{name}{k}")
                  for k in range(layer_count)]
        return cls(layers=layers)

    @property
    def layer_count(self) -> int:
        return len(self.layers)

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size

    @property
    def hidden_size(self) -> int:
        return self.layers[-1].hidden_size

    def parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for layer in self.layers:
            params.update(layer.parameters())
        return params


class _PreparedGru:
    # transposées calculées une fois par déroulement de séquence
    def __init__(self, layer: GruLayer):
        self.layer = layer
        self.WzT, self.WrT, self.WhT = (tc.transpose(layer.W_z), tc.transpose(layer.W_r), tc.transpose(layer.W_h))
        self.UzT, self.UrT, self.UhT = (tc.transpose(layer.U_z), tc.transpose(layer.U_r), tc.transpose(layer.U_h))

    def step(self, x: Tensor, h: Tensor) -> Tensor:
        z = tc.sigmoid(tc.add(tc.matmul(x, self.WzT), tc.matmul(h, self.UzT)))
        r = tc.sigmoid(tc.add(tc.matmul(x, self.WrT), tc.matmul(h, self.UrT)))
        h_tilde = tc.tanh(tc.add(tc.matmul(x, self.WhT), tc.matmul(tc.mul(r, h), self.UhT)))
        keep = tc.sub(tc.constant(np.ones(z.shape)), z)
        return tc.add(tc.mul(z, h), tc.mul(keep, h_tilde))


def _as_layer(cell: Union[GruLayer, GruCell]) -> GruLayer:
    if isinstance(cell, GruLayer):
        return cell
    if cell.layer_count != 1:
        raise ContractError("gru_step s'applique à une seule couche")
    return cell.layers[0]


def gru_step(cell: Union[GruLayer, GruCell], x_t: Tensor, h_prev: Tensor) -> Tensor:
    """
    Un pas de GRU.

    z = σ(W_z x + U_z h) ; r = σ(W_r x + U_r h) ; h̃ = tanh(W_h x + U_h (r ∘ h)) ;
    h_t = z ∘ h + (1 − z) ∘ h̃.

    Args:
        cell: Couche GRU (ou pile à une couche)
        x_t: Entrée [F_in] ou lot [B × F_in]
        h_prev: État caché [D] ou lot [B × D]

    Returns:
        Tensor: Nouvel état caché, même forme que h_prev
    """
    layer = _as_layer(cell)
    vector = x_t.data.ndim == 1
    x = tc.reshape(x_t, (1, x_t.shape[0])) if vector else x_t
    h = tc.reshape(h_prev, (1, h_prev.shape[0])) if h_prev.data.ndim == 1 else h_prev
    if x.shape[1] != layer.input_size or h.shape[1] != layer.hidden_size or x.shape[0] != h.shape[0]:
        raise DimensionError(f"{layer.name}: entrée/état caché",
                             expected=(layer.input_size, layer.hidden_size), actual=(x.shape[1], h.shape[1]))
    h_next = _PreparedGru(layer).step(x, h)
    return tc.reshape(h_next, (layer.hidden_size,)) if vector else h_next


def gru_fold(cell: GruCell, inputs: Sequence[Tensor]) -> Tensor:
    """
    Replie la pile GRU sur une séquence de lots [B × F_in] depuis un état nul.

    Args:
        cell: Pile GRU
        inputs: Séquence de longueur L ≥ 1 de tenseurs B × F_in

    Returns:
        Tensor: État caché final de la couche supérieure, B × D
    """
    if not inputs:
        raise ContractError("gru_fold: séquence vide")
    batch = inputs[0].shape[0]
    sequence = list(inputs)
    for layer in cell.layers:
        prepared = _PreparedGru(layer)
        h = tc.constant(np.zeros((batch, layer.hidden_size)))
        hidden: List[Tensor] = []
        for x in sequence:
            if x.data.ndim != 2 or x.shape != (batch, layer.input_size):
                raise DimensionError(f"{layer.name}: entrée de séquence", expected=(batch, layer.input_size),
                                     actual=x.shape)
            h = prepared.step(x, h)
            hidden.append(h)
        sequence = hidden
    return sequence[-1]


def gru_run(cell: Union[GruLayer, GruCell], sequence: Tensor) -> Tensor:
    """
    Replie la GRU sur une séquence L × F_in et retourne l'état final [D].
    """
    if isinstance(cell, GruLayer):
        cell = GruCell(layers=[cell])
    if sequence.data.ndim != 2 or sequence.shape[0] < 1:
        raise ContractError(f"gru_run: séquence vide ou mal formée, forme {sequence.shape}")
    steps = [tc.slice_axis(sequence, 0, t, t + 1) for t in range(sequence.shape[0])]
    return tc.reshape(gru_fold(cell, steps), (cell.hidden_size,))


# ====== COUCHE DENSE ======

@dataclass
class DenseLayer:
    """Application affine W·x + b."""
    weight: Tensor
    bias: Tensor
    name: str = 'dense'

    def __post_init__(self):
        if self.bias.shape != (self.weight.shape[0],):
            raise DimensionError(f"{self.name}.bias", expected=(self.weight.shape[0],), actual=self.bias.shape)

    @classmethod
    def create(cls, rng: np.random.Generator, in_features: int, out_features: int, name: str = 'dense') -> 'DenseLayer':
        weight = glorot_uniform(rng, (out_features, in_features), in_features, out_features, f"{name}.weight")
        bias = Tensor(np.zeros(out_features), requires_grad=True, name=f"{name}.bias")
        return cls(weight=weight, bias=bias, name=name)

    def parameters(self) -> Dict[str, Tensor]:
        return {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}


def dense_rows(layer: DenseLayer, X: Tensor) -> Tensor:
    """
    Applique la couche dense à chaque ligne d'une matrice B × F_in.
    """
    F_out, F_in = layer.weight.shape
    if X.data.ndim != 2 or X.shape[1] != F_in:
        raise DimensionError(f"{layer.name}: entrée", expected=('B', F_in), actual=X.shape)
    bias_rows = tc.matmul(tc.constant(np.ones((X.shape[0], 1))), tc.reshape(layer.bias, (1, F_out)))
    return tc.add(tc.matmul(X, tc.transpose(layer.weight)), bias_rows)


def dense_forward(layer: DenseLayer, x: Tensor) -> Tensor:
    """
    Applique W·x + b à un vecteur [F_in].
    """
    F_out, F_in = layer.weight.shape
    if x.shape != (F_in,):
        raise DimensionError(f"{layer.name}: entrée", expected=(F_in,), actual=x.shape)
    return tc.reshape(dense_rows(layer, tc.reshape(x, (1, F_in))), (F_out,))
