#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Errors - Hiérarchie d'exceptions du détecteur d'anomalies WSN
"""

from typing import Optional, Sequence


class DetectorError(Exception):
    """
    Classe de base de toutes les erreurs levées par le détecteur.
    """


class DimensionError(DetectorError):
    """
    Incohérence de forme ou d'étendue entre deux objets.
    """

    def __init__(self, message: str, expected: Optional[Sequence[int]] = None,
                 actual: Optional[Sequence[int]] = None):
        self.expected = tuple(expected) if expected is not None else None
        self.actual = tuple(actual) if actual is not None else None
        if self.expected is not None or self.actual is not None:
            message = f"{message} (attendu: {self.expected}, obtenu: {self.actual})"
        super().__init__(message)


class DegenerateRowError(DetectorError):
    """
    Ligne entièrement nulle dans une matrice d'adjacence ou un masque softmax
    (sommet isolé du graphe).
    """

    def __init__(self, row: int, context: str = ""):
        self.row = row
        where = f" dans {context}" if context else ""
        super().__init__(f"Ligne {row} sans aucun voisin{where}")


class ContractError(DetectorError):
    """
    Précondition d'une opération non respectée.
    """


class NonFiniteGradientError(DetectorError):
    """
    Gradient NaN ou infini détecté avant une mise à jour Adam.
    """

    def __init__(self, parameter: str):
        self.parameter = parameter
        super().__init__(f"Gradient non fini pour le paramètre '{parameter}', mise à jour annulée")


class NonFiniteLossError(DetectorError):
    """
    Perte d'entraînement non finie.
    """

    def __init__(self, epoch: int, batch: int, value: float):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(f"Perte non finie ({value}) à l'époque {epoch}, lot {batch}")


class ConstantSeriesError(DetectorError):
    """
    Série d'entraînement constante, impossible à standardiser.
    """

    def __init__(self, node, mode):
        self.node = node
        self.mode = mode
        super().__init__(f"Série constante pour le nœud {node}, mode {mode}")


class MissingNodeError(DetectorError):
    """
    Nœud demandé absent des relevés ou des coordonnées.
    """

    def __init__(self, node, source: str = "relevés"):
        self.node = node
        super().__init__(f"Nœud {node} absent des {source}")


class InputError(DetectorError):
    """
    Source d'entrée illisible ou incohérente.
    """


class CheckpointError(DetectorError):
    """
    Point de sauvegarde tronqué, mal formé ou de version incompatible.
    """


class ConfigError(DetectorError):
    """
    Valeur de configuration invalide.
    """
