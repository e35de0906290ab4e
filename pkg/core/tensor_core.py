#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
TensorCore - Tenseurs denses, différentiation automatique en mode inverse et optimiseur Adam

Chaque opération enregistrée sur la bande active (Tape) possède sa règle de
rétropropagation. Aucun broadcasting n'est fait en dehors du cas tenseur/scalaire :
tous les alignements de formes sont explicites.
"""

import builtins
import itertools
import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.errors import ContractError, DegenerateRowError, DimensionError, NonFiniteGradientError

# Configuration du système de logging
logger = logging.getLogger('TensorCore')

_node_ids = itertools.count(1)
_local = threading.local()

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    Tableau réel 64 bits en ordre ligne-majeur, avec gradient optionnel.

    Un tenseur feuille créé avec requires_grad=True reçoit son gradient dans
    `grad` lors de `backward`. Les tenseurs produits par une opération enregistrée
    sont marqués `tracked` mais ne conservent pas de gradient.
    """

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        """
        Initialise un tenseur.

        Args:
            data: Valeurs (tableau numpy, liste imbriquée ou scalaire), copiées en float64
            requires_grad: Si le tenseur est une feuille différentiable
            name: Nom lisible (paramètres du modèle)
        """
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.tracked = requires_grad
        self.is_leaf = True
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.node_id = next(_node_ids)
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() exige un tenseur à un seul élément, forme {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"<Tensor{label} #{self.node_id} shape={self.shape} requires_grad={self.requires_grad}>"


@dataclass
class TapeRecord:
    """Une opération enregistrée : entrées, sortie et règle de rétropropagation."""
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardRule


class Tape:
    """
    Bande d'enregistrement des opérations, dans l'ordre topologique d'exécution.

    S'utilise comme gestionnaire de contexte ; la bande active est propre à chaque
    thread, ce qui permet à des répliques distinctes du modèle de tourner en parallèle.
    """

    def __init__(self):
        self.records: List[TapeRecord] = []

    def record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardRule) -> None:
        self.records.append(TapeRecord(op, inputs, output, backward))

    def clear(self) -> None:
        self.records.clear()

    def __len__(self) -> int:
        return len(self.records)

    def __enter__(self) -> 'Tape':
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _stack().pop()


def _stack() -> List[Optional[Tape]]:
    if not hasattr(_local, 'stack'):
        _local.stack = []
    return _local.stack


def active_tape() -> Optional[Tape]:
    """
    Retourne la bande active du thread courant (None sous no_grad ou hors bande).
    """
    stack = _stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Suspend l'enregistrement des opérations (inférence, différences finies).
    """
    _stack().append(None)
    try:
        yield
    finally:
        _stack().pop()


def _emit(op: str, inputs: Tuple[Tensor, ...], value: np.ndarray, backward: BackwardRule) -> Tensor:
    out = Tensor(value)
    tape = active_tape()
    if tape is not None and any(t.tracked for t in inputs):
        out.tracked = True
        out.is_leaf = False
        tape.record(op, inputs, out, backward)
    return out


def constant(data) -> Tensor:
    """Tenseur non différentiable."""
    return Tensor(data)


# ====== OPÉRATIONS ======

def _same_or_scalar(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise DimensionError(f"{op}: formes incompatibles", expected=a.shape, actual=b.shape)


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Produit matriciel (m×k)·(k×n).

    Args:
        a: Matrice m×k
        b: Matrice k×n

    Returns:
        Tensor: Matrice m×n
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("matmul: étendues internes incompatibles", expected=a.shape, actual=b.shape)
    av, bv = a.data, b.data
    return _emit('matmul', (a, b), av @ bv, lambda g: (g @ bv.T, av.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_or_scalar('add', a, b)
    return _emit('add', (a, b), a.data + b.data,
                 lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_or_scalar('sub', a, b)
    return _emit('sub', (a, b), a.data - b.data,
                 lambda g: (_reduce_to(g, a.shape), _reduce_to(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_or_scalar('mul', a, b)
    av, bv = a.data, b.data
    return _emit('mul', (a, b), av * bv,
                 lambda g: (_reduce_to(g * bv, a.shape), _reduce_to(g * av, b.shape)))


def scale(x: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return _emit('scale', (x,), x.data * factor, lambda g: (g * factor,))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """
    Concatène des tenseurs le long d'un axe ; les autres étendues doivent coïncider.
    """
    tensors = tuple(tensors)
    if not tensors:
        raise ContractError("concat: liste de tenseurs vide")
    reference = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(reference) or any(
                t.shape[d] != reference[d] for d in range(len(reference)) if d != axis):
            raise DimensionError(f"concat: formes incompatibles sur l'axe {axis}",
                                 expected=reference, actual=t.shape)
    offsets = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    value = np.concatenate([t.data for t in tensors], axis=axis)
    return _emit('concat', tensors, value, lambda g: tuple(np.split(g, offsets, axis=axis)))


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError("transpose: matrice 2D attendue", actual=x.shape)
    return _emit('transpose', (x,), x.data.T.copy(), lambda g: (g.T,))


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """
    Extrait les indices [start, stop) le long d'un axe.
    """
    extent = x.shape[axis]
    if not 0 <= start < stop <= extent:
        raise DimensionError(f"slice_axis: intervalle [{start}, {stop}) hors de l'étendue {extent}",
                             actual=x.shape)
    index = [builtins.slice(None)] * x.data.ndim
    index[axis] = builtins.slice(start, stop)
    index = tuple(index)

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return _emit('slice', (x,), x.data[index].copy(), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError("reshape: nombre d'éléments différent", expected=shape, actual=x.shape)
    original = x.shape
    return _emit('reshape', (x,), x.data.reshape(shape).copy(), lambda g: (g.reshape(original),))


def sum(x: Tensor) -> Tensor:
    return _emit('sum', (x,), np.asarray(x.data.sum()), lambda g: (np.full(x.shape, float(g)),))


def mean(x: Tensor) -> Tensor:
    n = x.size
    return _emit('mean', (x,), np.asarray(x.data.mean()), lambda g: (np.full(x.shape, float(g) / n),))


def square(x: Tensor) -> Tensor:
    xv = x.data
    return _emit('square', (x,), xv * xv, lambda g: (2.0 * xv * g,))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    positive = x.data > 0
    value = np.where(positive, x.data, slope * x.data)
    return _emit('leaky_relu', (x,), value, lambda g: (np.where(positive, g, slope * g),))


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0
    return _emit('relu', (x,), np.where(positive, x.data, 0.0), lambda g: (np.where(positive, g, 0.0),))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _emit('tanh', (x,), y, lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    # forme tanh : stable pour les grandes valeurs, et σ(0) vaut exactement 0.5
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _emit('sigmoid', (x,), y, lambda g: (g * y * (1.0 - y),))


def softmax_rows(x: Tensor, mask) -> Tensor:
    """
    Softmax ligne par ligne restreint aux entrées non masquées.

    Les entrées masquées valent exactement 0 ; le maximum de chaque ligne est
    soustrait (sur les seules entrées non masquées) avant l'exponentielle.

    Args:
        x: Logits m×n
        mask: Masque m×n (booléen ou {0,1}, tableau ou Tensor)

    Returns:
        Tensor: Matrice stochastique par ligne

    Raises:
        DegenerateRowError: Si une ligne du masque ne contient aucun 1
    """
    mask = np.asarray(mask.data if isinstance(mask, Tensor) else mask) != 0
    if x.data.ndim != 2 or mask.shape != x.shape:
        raise DimensionError("softmax_rows: masque et logits de formes différentes",
                             expected=x.shape, actual=mask.shape)
    empty = np.flatnonzero(~mask.any(axis=1))
    if empty.size:
        raise DegenerateRowError(int(empty[0]), "le masque softmax")
    logits = np.where(mask, x.data, -np.inf)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    y = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _emit('softmax_rows', (x,), y, backward)


# ====== RÉTROPROPAGATION ======

def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    """
    Rétropropage une perte scalaire sur la bande et accumule les gradients des feuilles.

    Un seul balayage inverse de la bande suffit : les gradients d'une feuille utilisée
    plusieurs fois sont sommés. Des appels répétés sans remise à zéro s'accumulent.

    Args:
        loss: Tenseur scalaire produit sur la bande
        tape: Bande à parcourir (bande active par défaut)

    Raises:
        ContractError: Si la perte n'est pas scalaire ou n'appartient à aucune bande
    """
    if loss.data.ndim != 0:
        raise ContractError(f"backward exige une perte scalaire, forme {loss.shape}")
    tape = tape if tape is not None else active_tape()
    if tape is None or not loss.tracked:
        raise ContractError("backward: la perte n'a pas été produite sur une bande active")

    grads: Dict[int, np.ndarray] = {loss.node_id: np.ones(())}
    leaves: Dict[int, Tensor] = {}
    if loss.requires_grad:
        leaves[loss.node_id] = loss

    for rec in reversed(tape.records):
        g = grads.pop(rec.output.node_id, None)
        if g is None:
            continue
        for inp, gi in zip(rec.inputs, rec.backward(g)):
            if gi is None or not inp.tracked:
                continue
            if inp.node_id in grads:
                grads[inp.node_id] = grads[inp.node_id] + gi
            else:
                grads[inp.node_id] = gi
            if inp.requires_grad:
                leaves[inp.node_id] = inp

    for node_id, leaf in leaves.items():
        if node_id in grads:
            leaf.grad = leaf.grad + grads[node_id].reshape(leaf.shape)


# ====== OPTIMISEUR ADAM ======

@dataclass
class AdamState:
    """
    État d'Adam : moments par paramètre, compteur de pas et hyperparamètres.
    """
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState) -> None:
    """
    Applique une mise à jour Adam avec correction de biais.

    Tous les gradients sont vérifiés avant de toucher le moindre paramètre.

    Args:
        params: Paramètres nommés
        grads: Gradients nommés (mêmes clés et formes)
        state: État de l'optimiseur, avancé d'un pas

    Raises:
        NonFiniteGradientError: Si un gradient contient NaN ou Inf
    """
    if set(params) != set(grads):
        raise ContractError("adam_step: paramètres et gradients ne portent pas les mêmes noms")
    for name, p in params.items():
        g = np.asarray(grads[name])
        if g.shape != p.shape:
            raise DimensionError(f"adam_step: gradient de '{name}'", expected=p.shape, actual=g.shape)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p.data = p.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """
    Optimiseur Adam lié à un ensemble de paramètres nommés.
    """

    def __init__(self, params: Mapping[str, Tensor], learning_rate: float = 5e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.state = AdamState(learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        adam_step(self.params, {name: p.grad for name, p in self.params.items()}, self.state)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


# ====== VÉRIFICATION DES GRADIENTS ======

@dataclass
class GradcheckReport:
    """
    Pire erreur relative par paramètre entre gradient analytique et différences finies.

    `per_parameter` borne le dénominateur à 1e-3 et sert au verdict ; `raw_per_parameter`
    garde le dénominateur brut max(|g|, |g_num|) pour les gradients de faible amplitude.
    """
    per_parameter: Dict[str, float]
    eps: float
    raw_per_parameter: Dict[str, float] = field(default_factory=dict)

    @property
    def max_raw_error(self) -> float:
        return max(self.raw_per_parameter.values()) if self.raw_per_parameter else 0.0

    @property
    def max_error(self) -> float:
        return max(self.per_parameter.values()) if self.per_parameter else 0.0

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_error < tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> np.ndarray:
    """Erreur relative élément par élément ; floor=0 donne l'erreur brute (0 quand les deux gradients sont nuls)."""
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    diff = np.abs(analytic - numeric)
    if floor > 0:
        return diff / np.maximum(denom, floor)
    return np.divide(diff, denom, out=np.zeros_like(diff), where=denom > 0)


def gradcheck(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor], eps: float = 1e-5) -> GradcheckReport:
    """
    Compare les gradients analytiques aux différences finies centrées.

    Args:
        loss_fn: Fonction sans argument qui reconstruit la perte scalaire
        params: Paramètres nommés à vérifier
        eps: Pas des différences finies

    Returns:
        GradcheckReport: Pire erreur relative par paramètre
    """
    for p in params.values():
        p.zero_grad()
    with Tape():
        loss = loss_fn()
        backward(loss)
    analytic = {name: p.grad.copy() for name, p in params.items()}

    report: Dict[str, float] = {}
    raw: Dict[str, float] = {}
    with no_grad():
        for name, p in params.items():
            numeric = np.zeros_like(p.data)
            flat = p.data.reshape(-1)
            for k in range(flat.size):
                saved = flat[k]
                flat[k] = saved + eps
                plus = loss_fn().item()
                flat[k] = saved - eps
                minus = loss_fn().item()
                flat[k] = saved
                numeric.reshape(-1)[k] = (plus - minus) / (2.0 * eps)
            report[name] = float(relative_error(analytic[name], numeric).max()) if p.size else 0.0
            raw[name] = float(relative_error(analytic[name], numeric, floor=0.0).max()) if p.size else 0.0
            logger.debug(f"gradcheck {name}: erreur relative max {report[name]:.3e} (brute {raw[name]:.3e})")
    return GradcheckReport(per_parameter=report, eps=eps, raw_per_parameter=raw)
