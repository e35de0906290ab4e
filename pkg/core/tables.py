#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tables - Écriture et relecture des tableaux texte (courbes de score, historiques, balayages)

Format : un CSV brut dont la première ligne est l'en-tête des colonnes, lisible par
n'importe quel lecteur CSV ; la configuration effective (paires clé/valeur) est écrite
à côté, dans `<nom>.meta.json`.
"""

import json
import logging
import os
from typing import Any, Dict, Optional, Tuple

import pandas as pd

# Configuration du système de logging
logger = logging.getLogger('Tables')


def meta_path(path: str) -> str:
    """Fichier compagnon de configuration d'un tableau (`courbe.csv` → `courbe.meta.json`)."""
    return f"{os.path.splitext(path)[0]}.meta.json"


def write_table(frame: pd.DataFrame, path: str, header: Optional[Dict[str, Any]] = None) -> str:
    """
    Écrit un DataFrame et, à côté, sa configuration clé/valeur.

    Args:
        frame: Tableau à écrire
        path: Fichier de destination
        header: Paires clé/valeur de configuration (valeurs écrites sous forme de texte)

    Returns:
        str: Chemin du tableau écrit
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    sidecar = meta_path(path)
    if header:
        with open(sidecar, 'w', encoding='utf-8') as f:
            json.dump({str(key): str(value) for key, value in header.items()}, f, ensure_ascii=False, indent=2)
    elif os.path.exists(sidecar):
        os.remove(sidecar)
    logger.debug(f"Tableau écrit dans {path} ({len(frame)} lignes)")
    return path


def read_table(path: str) -> Tuple[pd.DataFrame, Dict[str, str]]:
    """
    Relit un tableau et sa configuration (vide sans fichier compagnon).

    Returns:
        Tuple[pd.DataFrame, Dict[str, str]]: Tableau et en-tête clé/valeur
    """
    header: Dict[str, str] = {}
    sidecar = meta_path(path)
    if os.path.exists(sidecar):
        with open(sidecar, 'r', encoding='utf-8') as f:
            header = json.load(f)
    return pd.read_csv(path), header
