#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests pour les constructeurs d'adjacence
"""

import math
import os
import sys

import numpy as np
import pytest

# Ajouter le répertoire parent au path pour pouvoir importer les modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.errors import ContractError, DegenerateRowError, InputError, MissingNodeError
from flows.graph_builders import (Adjacency, NodeCoordinates, mode_adjacency, node_adjacency_full,
                                  node_adjacency_topk, pearson, time_adjacency)


# ====== TESTS DE PEARSON ======

def test_pearson_self_correlation():
    """Teste la corrélation d'une série avec elle-même"""
    assert pearson([1, 2, 3], [1, 2, 3]).value == pytest.approx(1.0)


def test_pearson_anti_correlation():
    """Teste une anti-corrélation exacte"""
    assert pearson([1, 2, 3], [3, 2, 1]).value == pytest.approx(-1.0)


def test_pearson_known_value():
    """Teste P=[1,2,3], Q=[1,2,4]"""
    assert pearson([1, 2, 3], [1, 2, 4]).value == pytest.approx(3 / (math.sqrt(2) * math.sqrt(42) / 3), abs=1e-12)
    assert pearson([1, 2, 3], [1, 2, 4]).value == pytest.approx(0.98198, abs=1e-5)


def test_pearson_constant_series():
    """Teste qu'une série constante donne 0 marqué dégénéré"""
    corr = pearson([2, 2, 2], [1, 2, 3])
    assert corr.value == 0.0
    assert corr.degenerate


def test_pearson_affine_transform_gives_sign():
    """Teste que ρ(P, a·P + b) vaut le signe de a sur des séries aléatoires"""
    rng = np.random.default_rng(11)
    for _ in range(10):
        p = rng.normal(size=rng.integers(2, 50))
        for a in (2.5, 0.01, -3.0, -1e3):
            b = rng.normal(scale=10.0)
            corr = pearson(p, a * p + b)
            assert corr.value == pytest.approx(np.sign(a), abs=1e-12)
            assert not corr.degenerate


# ====== TESTS DES ADJACENCES DE MODES ======

def test_mode_adjacency_full():
    """Teste l'adjacence pleine sans dépendances"""
    adj = mode_adjacency(np.random.default_rng(0).normal(size=(3, 5)))
    np.testing.assert_array_equal(adj.entries, np.ones((3, 3)))
    assert not adj.weighted


def test_mode_adjacency_self_dependencies():
    """Teste des dépendances réduites à soi : diagonale de corrélations unitaires"""
    adj = mode_adjacency(np.random.default_rng(1).normal(size=(3, 6)), deps=[{0}, {1}, {2}])
    np.testing.assert_allclose(adj.entries, np.eye(3))
    np.testing.assert_array_equal(adj.mask, np.eye(3, dtype=bool))


def test_mode_adjacency_correlation_entry():
    """Teste une entrée de corrélation négative"""
    window = np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
    adj = mode_adjacency(window, deps=[{0}, {0}])
    assert adj.entries[1, 0] == pytest.approx(-1.0)
    assert adj.entries[1, 1] == 0.0
    assert adj.mask[1, 0] and not adj.mask[1, 1]


def test_mode_adjacency_empty_dependency_set():
    """Teste qu'un mode sans voisin lève une erreur de ligne dégénérée"""
    with pytest.raises(DegenerateRowError) as excinfo:
        mode_adjacency(np.ones((2, 4)) * [[1], [2]] + np.arange(4), deps=[{0, 1}, set()])
    assert excinfo.value.row == 1


# ====== TESTS DES ADJACENCES TEMPORELLES ET PLEINES ======

def test_time_adjacency_three():
    """Teste W=3 : U − E"""
    np.testing.assert_array_equal(time_adjacency(3).entries, [[0, 1, 1], [1, 0, 1], [1, 1, 0]])


def test_time_adjacency_two():
    """Teste W=2"""
    np.testing.assert_array_equal(time_adjacency(2).entries, [[0, 1], [1, 0]])


def test_time_adjacency_lone_timestamp():
    """Teste qu'un instant isolé lève une erreur de ligne dégénérée"""
    with pytest.raises(DegenerateRowError):
        time_adjacency(1)


def test_node_adjacency_full():
    """Teste les adjacences pleines M=2 et M=1"""
    np.testing.assert_array_equal(node_adjacency_full(2).entries, np.ones((2, 2)))
    np.testing.assert_array_equal(node_adjacency_full(1).entries, [[1]])


def test_adjacency_serialization():
    """Teste l'export et la relecture d'une adjacence pondérée"""
    adj = mode_adjacency(np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 4.0]]), deps=[{0, 1}, {1}])
    restored = Adjacency.from_dict(adj.to_dict())
    np.testing.assert_array_equal(restored.entries, adj.entries)
    np.testing.assert_array_equal(restored.mask, adj.mask)
    assert restored.weighted


# ====== TESTS DE L'ADJACENCE TOPK ======

def test_topk_collinear_nodes():
    """Teste trois nœuds alignés en x = 0, 1, 3 avec k = 1"""
    coords = NodeCoordinates(node_ids=(10, 11, 12), xy=[[0, 0], [1, 0], [3, 0]])
    adj = node_adjacency_topk(coords, 1)
    expected = np.array([[1, 1, 0], [1, 1, 0], [0, 1, 1]])
    np.testing.assert_array_equal(adj.entries, expected)
    np.testing.assert_array_equal(adj.entries.sum(axis=1), [2, 2, 2])


def test_topk_all_neighbors_equals_full():
    """Teste que k = M − 1 redonne l'adjacence pleine"""
    coords = NodeCoordinates(node_ids=(1, 2, 3, 4), xy=np.random.default_rng(0).uniform(size=(4, 2)))
    np.testing.assert_array_equal(node_adjacency_topk(coords, 3).entries, node_adjacency_full(4).entries)


def test_topk_unit_square():
    """Teste le carré unité avec k = 2 : les deux coins adjacents, pas la diagonale"""
    coords = NodeCoordinates(node_ids=(1, 2, 3, 4), xy=[[0, 0], [1, 0], [1, 1], [0, 1]])
    adj = node_adjacency_topk(coords, 2)
    expected = np.array([[1, 1, 0, 1], [1, 1, 1, 0], [0, 1, 1, 1], [1, 0, 1, 1]])
    np.testing.assert_array_equal(adj.entries, expected)


def test_topk_ties_break_by_node_id():
    """Teste le départage des distances égales par identifiant croissant"""
    coords = NodeCoordinates(node_ids=(5, 9, 7), xy=[[0, 0], [1, 0], [-1, 0]])
    adj = node_adjacency_topk(coords, 1)
    # nœud 5 à égale distance de 9 et 7 : 7 l'emporte
    np.testing.assert_array_equal(adj.entries[0], [1, 0, 1])


def test_topk_random_layouts_row_sums_and_scaling():
    """Teste sur des positions aléatoires des sommes de lignes k + 1 et l'invariance par homothétie c > 0"""
    rng = np.random.default_rng(12)
    for _ in range(10):
        M = int(rng.integers(3, 12))
        ids = tuple(int(i) for i in rng.permutation(100)[:M])
        xy = rng.uniform(-50.0, 50.0, size=(M, 2))
        k = int(rng.integers(1, M))
        adj = node_adjacency_topk(NodeCoordinates(node_ids=ids, xy=xy), k)
        np.testing.assert_array_equal(adj.entries.sum(axis=1), np.full(M, k + 1))
        assert np.all(np.diag(adj.entries) == 1.0)
        for c in (0.5, 3.7, 1000.0):
            scaled = node_adjacency_topk(NodeCoordinates(node_ids=ids, xy=c * xy), k)
            np.testing.assert_array_equal(scaled.entries, adj.entries)


def test_topk_k_too_large():
    """Teste le refus de k ≥ M"""
    coords = NodeCoordinates(node_ids=(1, 2), xy=[[0, 0], [1, 0]])
    with pytest.raises(ContractError):
        node_adjacency_topk(coords, 2)


def test_coordinates_duplicate_and_missing():
    """Teste les identifiants dupliqués et les nœuds absents"""
    with pytest.raises(InputError):
        NodeCoordinates(node_ids=(1, 1), xy=[[0, 0], [1, 1]])
    coords = NodeCoordinates(node_ids=(1, 2), xy=[[0, 0], [1, 1]])
    with pytest.raises(MissingNodeError):
        coords.subset([1, 3])
    assert coords.subset([2, 1]).node_ids == (2, 1)
