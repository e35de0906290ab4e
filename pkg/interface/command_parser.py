#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
CommandParser - Analyseur de la ligne de commande du détecteur
"""

import argparse
import re
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

from core.errors import ConfigError

# Configuration du système de logging
logger = logging.getLogger('CommandParser')

_PAIR_PATTERN = re.compile(r'^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+?)\s*$')
_INT_PATTERN = re.compile(r'^[+-]?\d+$')
_FLOAT_PATTERN = re.compile(r'^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$')


def _coerce(token: str) -> Any:
    if _INT_PATTERN.match(token):
        return int(token)
    if _FLOAT_PATTERN.match(token):
        return float(token)
    return token


def parse_key_values(text: str) -> Dict[str, Any]:
    """
    Analyse une liste `clé=valeur` séparée par des virgules.

    Exemple : "type=4,node=29,mode=voltage,t=70" → {'type': 4, 'node': 29, 'mode': 'voltage', 't': 70}

    Raises:
        ConfigError: Élément mal formé ou clé répétée
    """
    result: Dict[str, Any] = {}
    for item in text.split(','):
        match = _PAIR_PATTERN.match(item)
        if not match:
            raise ConfigError(f"Élément '{item}' mal formé dans '{text}' (attendu: clé=valeur)")
        key, value = match.group(1), match.group(2)
        if key in result:
            raise ConfigError(f"Clé '{key}' répétée dans '{text}'")
        result[key] = _coerce(value)
    return result


def parse_grid(text: str) -> tuple:
    """
    Analyse une grille `nom=v1,v2,...` (ex. "p=10,14,18,22").

    Returns:
        tuple: (nom, liste de valeurs)
    """
    name, sep, values = text.partition('=')
    if not sep or not name.strip() or not values.strip():
        raise ConfigError(f"Grille '{text}' mal formée (attendu: nom=v1,v2,...)")
    return name.strip(), parse_list(values, float)


def parse_list(text: str, kind: Callable = int) -> List[Any]:
    """
    Analyse une liste séparée par des virgules (ex. "1,2,3").
    """
    try:
        return [kind(item.strip()) for item in text.split(',') if item.strip()]
    except ValueError as e:
        raise ConfigError(f"Liste '{text}' invalide: {e}") from e


class CommandParser:
    """
    Analyseur de commandes du détecteur.
    Enregistre les sous-commandes, leurs aliases et leurs options, puis aiguille
    la ligne de commande vers la fonction correspondante.
    """

    def __init__(self, description: str = ""):
        """
        Initialise le parseur de commandes.

        Args:
            description: Texte d'aide global
        """
        self.parser = argparse.ArgumentParser(description=description)
        self.parser.add_argument("-c", "--config", help="Fichier de configuration (YAML ou JSON)")
        self.parser.add_argument("--log-level", help="Niveau de log (DEBUG, INFO, WARNING, ERROR)")
        self.parser.add_argument("-o", "--output-dir", help="Répertoire de sortie des artefacts")
        self.subparsers = self.parser.add_subparsers(dest="command", metavar="commande")
        # nom → fonction ; les aliases pointent vers la même entrée
        self.commands: Dict[str, Dict[str, Any]] = {}

    def register_command(self, name: str, func: Callable, help: str, aliases: List[str] = None,
                         configure: Optional[Callable[[argparse.ArgumentParser], None]] = None) -> argparse.ArgumentParser:
        """
        Enregistre une nouvelle commande.

        Args:
            name: Nom principal de la commande
            func: Fonction à exécuter, appelée avec les arguments analysés
            help: Texte d'aide pour la commande
            aliases: Liste des aliases pour cette commande
            configure: Fonction qui déclare les options de la commande

        Returns:
            argparse.ArgumentParser: Sous-parseur de la commande
        """
        subparser = self.subparsers.add_parser(name, help=help, description=help, aliases=aliases or [])
        if configure is not None:
            configure(subparser)
        subparser.set_defaults(command=name)
        entry = {'func': func, 'help': help, 'aliases': aliases or []}
        self.commands[name.lower()] = entry
        for alias in aliases or []:
            self.commands[alias.lower()] = entry
        logger.debug(f"Commande enregistrée: {name}")
        return subparser

    def parse(self, argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
        return self.parser.parse_args(argv)

    def handler(self, args: argparse.Namespace) -> Optional[Callable]:
        """
        Retourne la fonction associée à la commande analysée.
        """
        if not args.command:
            return None
        entry = self.commands.get(args.command.lower())
        return entry['func'] if entry else None

    def get_help_text(self) -> str:
        return self.parser.format_help()
