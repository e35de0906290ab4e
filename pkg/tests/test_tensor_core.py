#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests pour le noyau de tenseurs, la rétropropagation et Adam
"""

import os
import sys
import threading

import numpy as np
import pytest

# Ajouter le répertoire parent au path pour pouvoir importer les modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core import tensor_core as tc
from core.errors import ContractError, DegenerateRowError, DimensionError, NonFiniteGradientError
from core.tensor_core import Adam, AdamState, Tape, Tensor, adam_step, backward, gradcheck, no_grad, relative_error


def leaf(values, name=None):
    return Tensor(np.array(values, dtype=float), requires_grad=True, name=name)


# ====== TESTS DES OPÉRATIONS ======

def test_matmul_identity():
    """Teste le produit par l'identité"""
    a = Tensor(np.eye(2))
    b = Tensor([[1, 2], [3, 4]])
    np.testing.assert_array_equal(tc.matmul(a, b).data, [[1, 2], [3, 4]])


def test_matmul_row_by_column():
    """Teste le produit ligne × colonne"""
    assert tc.matmul(Tensor([[1, 2]]), Tensor([[3], [4]])).data.tolist() == [[11.0]]


def test_matmul_shape_mismatch():
    """Teste qu'une étendue interne incompatible lève une erreur de dimension"""
    with pytest.raises(DimensionError) as excinfo:
        tc.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    assert excinfo.value.expected == (2, 3)
    assert excinfo.value.actual == (2, 3)


def test_matmul_gradient_of_sum():
    """Teste le gradient de sum(A·B) par rapport à A"""
    a = leaf([[1, 2], [3, 4]])
    b = Tensor(np.eye(2))
    with Tape() as tape:
        backward(tc.sum(tc.matmul(a, b)), tape)
    np.testing.assert_allclose(a.grad, [[1, 1], [1, 1]])


def test_softmax_uniform_row():
    """Teste le softmax d'une ligne constante"""
    y = tc.softmax_rows(Tensor([[0.0, 0.0, 0.0]]), np.ones((1, 3)))
    np.testing.assert_allclose(y.data, [[1 / 3, 1 / 3, 1 / 3]])


def test_softmax_single_neighbor():
    """Teste le softmax d'une ligne à un seul voisin"""
    assert tc.softmax_rows(Tensor([[5.0]]), [[1]]).data.tolist() == [[1.0]]


def test_softmax_two_entries():
    """Teste le softmax de [1, 2]"""
    y = tc.softmax_rows(Tensor([[1.0, 2.0]]), [[1, 1]])
    np.testing.assert_allclose(y.data, [[0.26894142, 0.73105858]], atol=1e-7)


def test_softmax_masked_entries_are_zero():
    """Teste que les entrées masquées valent exactement 0"""
    y = tc.softmax_rows(Tensor([[3.0, 100.0, 1.0]]), [[1, 0, 1]])
    assert y.data[0, 1] == 0.0
    assert y.data.sum() == pytest.approx(1.0)


def test_softmax_large_logits_stable():
    """Teste la stabilité du softmax sur de grands logits"""
    y = tc.softmax_rows(Tensor([[1000.0, 1000.0]]), [[1, 1]])
    np.testing.assert_allclose(y.data, [[0.5, 0.5]])


def test_softmax_degenerate_row():
    """Teste qu'une ligne de masque vide lève une erreur de ligne dégénérée"""
    with pytest.raises(DegenerateRowError) as excinfo:
        tc.softmax_rows(Tensor(np.zeros((2, 2))), [[1, 1], [0, 0]])
    assert excinfo.value.row == 1


def test_elementwise_activations():
    """Teste leaky_relu, sigmoid et relu sur des valeurs connues"""
    x = Tensor([-1.0, 0.0, 2.0])
    np.testing.assert_allclose(tc.leaky_relu(x, 0.2).data, [-0.2, 0.0, 2.0])
    np.testing.assert_allclose(tc.relu(x).data, [0.0, 0.0, 2.0])
    assert tc.sigmoid(Tensor(0.0)).item() == 0.5


def test_elementwise_shape_mismatch():
    """Teste qu'une addition de formes différentes lève une erreur de dimension"""
    with pytest.raises(DimensionError):
        tc.add(Tensor(np.ones(2)), Tensor(np.ones(3)))


def test_concat_shape():
    """Teste la concaténation le long de l'axe 1"""
    y = tc.concat([Tensor(np.ones((1, 2))), Tensor(np.zeros((1, 3)))], axis=1)
    assert y.shape == (1, 5)


def test_concat_incompatible():
    """Teste le refus d'une concaténation d'étendues incompatibles"""
    with pytest.raises(DimensionError):
        tc.concat([Tensor(np.ones((1, 2))), Tensor(np.ones((2, 2)))], axis=1)


def test_slice_out_of_range():
    """Teste le refus d'un intervalle hors de l'étendue"""
    with pytest.raises(DimensionError):
        tc.slice_axis(Tensor(np.ones((2, 3))), 1, 2, 4)


# ====== TESTS DE LA RÉTROPROPAGATION ======

def test_backward_sum_gives_ones():
    """Teste que le gradient de sum(x) vaut 1 partout"""
    x = leaf(np.arange(6.0).reshape(2, 3))
    with Tape() as tape:
        backward(tc.sum(x), tape)
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_backward_sum_of_squares():
    """Teste le gradient de sum(x²) en [1, 2, 3]"""
    x = leaf([1.0, 2.0, 3.0])
    with Tape():
        backward(tc.sum(tc.square(x)))
    np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])


def test_backward_shared_leaf_accumulates():
    """Teste la somme des gradients d'une feuille utilisée deux fois"""
    x = leaf([1.0, -2.0])
    with Tape():
        backward(tc.sum(tc.mul(x, x)))
    np.testing.assert_allclose(x.grad, [2.0, -4.0])


def test_backward_repeated_calls_accumulate():
    """Teste l'accumulation des gradients sans remise à zéro"""
    x = leaf([1.0, 2.0])
    for _ in range(2):
        with Tape():
            backward(tc.sum(tc.scale(x, 3.0)))
    np.testing.assert_allclose(x.grad, [6.0, 6.0])
    x.zero_grad()
    assert not x.grad.any()


def test_backward_non_scalar():
    """Teste le refus d'une perte non scalaire"""
    x = leaf([1.0, 2.0])
    with Tape():
        with pytest.raises(ContractError):
            backward(tc.square(x))


def test_backward_outside_tape():
    """Teste le refus d'une perte calculée hors bande"""
    x = leaf([1.0, 2.0])
    loss = tc.sum(x)
    with pytest.raises(ContractError):
        backward(loss)


def test_no_grad_records_nothing():
    """Teste que no_grad suspend l'enregistrement"""
    x = leaf([1.0])
    with Tape() as tape:
        with no_grad():
            y = tc.square(x)
        assert len(tape) == 0
        assert not y.tracked


def test_tape_is_thread_local():
    """Teste que la bande active est propre à chaque thread"""
    seen = []
    with Tape():
        worker = threading.Thread(target=lambda: seen.append(tc.active_tape()))
        worker.start()
        worker.join()
        assert tc.active_tape() is not None
    assert seen == [None]


def test_replay_is_deterministic():
    """Teste qu'un même calcul rejoué donne une perte identique au bit près"""
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2))

    def run():
        x = leaf(a)
        with Tape():
            loss = tc.mean(tc.square(tc.tanh(tc.matmul(x, Tensor(b)))))
            backward(loss)
        return loss.item(), x.grad

    (l1, g1), (l2, g2) = run(), run()
    assert l1 == l2
    np.testing.assert_array_equal(g1, g2)


# ====== TESTS D'ADAM ======

def test_adam_zero_gradient_keeps_parameters():
    """Teste qu'un gradient nul laisse les paramètres inchangés"""
    p = leaf([1.0, -2.0])
    adam_step({'p': p}, {'p': np.zeros(2)}, AdamState(learning_rate=0.1))
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adam_first_step():
    """Teste le premier pas corrigé du biais : p ≈ 1 − α"""
    p = leaf(1.0)
    state = AdamState(learning_rate=0.1)
    adam_step({'p': p}, {'p': np.array(1.0)}, state)
    assert p.item() == pytest.approx(0.9, abs=1e-7)
    assert state.step == 1


def test_adam_identical_streams_are_bit_identical():
    """Teste que deux optimiseurs nourris des mêmes gradients suivent la même trajectoire"""
    rng = np.random.default_rng(0)
    grads = [rng.normal(size=3) for _ in range(5)]
    a, b = leaf(np.ones(3)), leaf(np.ones(3))
    sa, sb = AdamState(learning_rate=0.01), AdamState(learning_rate=0.01)
    for g in grads:
        adam_step({'w': a}, {'w': g}, sa)
        adam_step({'w': b}, {'w': g.copy()}, sb)
    np.testing.assert_array_equal(a.data, b.data)


def test_adam_non_finite_gradient_aborts():
    """Teste qu'un gradient NaN annule la mise à jour en nommant le paramètre"""
    good, bad = leaf([1.0]), leaf([2.0])
    with pytest.raises(NonFiniteGradientError) as excinfo:
        adam_step({'good': good, 'bad': bad}, {'good': np.array([1.0]), 'bad': np.array([np.nan])},
                  AdamState(learning_rate=0.1))
    assert excinfo.value.parameter == 'bad'
    assert good.data.tolist() == [1.0]


def test_adam_optimizer_step_and_zero_grad():
    """Teste l'optimiseur lié : un pas diminue une perte quadratique"""
    w = leaf([3.0])
    optimizer = Adam({'w': w}, learning_rate=0.5)
    with Tape():
        backward(tc.sum(tc.square(w)))
    optimizer.step()
    optimizer.zero_grad()
    assert w.item() < 3.0
    assert not w.grad.any()


# ====== TESTS DE GRADCHECK ======

def test_gradcheck_small_graph():
    """Teste gradcheck sur un petit graphe tanh/sigmoid/softmax"""
    rng = np.random.default_rng(1)
    w = leaf(rng.normal(size=(3, 3)), 'w')
    x = Tensor(rng.normal(size=(2, 3)))
    mask = np.array([[1, 1, 0], [1, 1, 1]])

    def loss():
        logits = tc.matmul(x, w)
        return tc.mean(tc.square(tc.softmax_rows(tc.sigmoid(tc.tanh(logits)), mask)))

    report = gradcheck(loss, {'w': w})
    assert report.passed(1e-4)
    assert set(report.per_parameter) == {'w'}
    assert set(report.raw_per_parameter) == {'w'}


def test_relative_error_raw_versus_floor():
    """Teste que l'erreur brute reste visible sous le plancher de 1e-3"""
    analytic = np.array([2e-6, 0.0, 1.0])
    numeric = np.array([1e-6, 0.0, 1.0])
    floored = relative_error(analytic, numeric)
    raw = relative_error(analytic, numeric, floor=0.0)
    assert floored[0] == pytest.approx(1e-3)
    assert raw[0] == pytest.approx(0.5)
    assert raw[1] == 0.0
    assert raw[2] == 0.0


def test_gradcheck_reports_raw_error_on_small_gradients():
    """Teste qu'une dérivée fausse de faible amplitude passe le verdict mais apparaît en erreur brute"""
    w = leaf(np.array([0.3, -0.2]), 'w')

    def loss():
        # dérivée analytique doublée, amplitude 1e-6
        y = 1e-6 * w.data.sum()
        return tc._emit('tiny', (w,), np.array(y), lambda g: (np.full(2, 2e-6) * g,))

    report = gradcheck(loss, {'w': w})
    assert report.passed(1e-2)
    assert report.per_parameter['w'] == pytest.approx(1e-3, rel=1e-3)
    assert report.max_raw_error == pytest.approx(0.5, rel=1e-3)
