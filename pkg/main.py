#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
WSN Detector
============
Détection d'anomalies multimodales dans les flux d'un réseau de capteurs sans fil
"""

import logging
import os
import sys
from typing import Optional, Sequence

from rich.console import Console

from core.config_manager import ConfigManager, setup_logging
from core.errors import ConfigError, DetectorError, InputError, MissingNodeError
from interface.command_parser import CommandParser
from interface.commands import register_commands
from interface.console_ui import ConsoleUI, custom_theme

console = Console(theme=custom_theme)
logger = logging.getLogger('Main')

# Erreurs d'entrée ou de configuration : code 2 ; autres échecs du détecteur : code 1
USAGE_ERRORS = (InputError, MissingNodeError, ConfigError, FileNotFoundError)


def build_parser() -> CommandParser:
    parser = CommandParser("WSN Detector - Détection d'anomalies multimodales par graphes d'attention et GRU")
    register_commands(parser)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Point d'entrée principal de l'application."""
    parser = build_parser()
    args = parser.parse(argv)
    func = parser.handler(args)
    if func is None:
        console.print(parser.get_help_text())
        return 2

    # Afficher l'en-tête
    console.print("[bold cyan]📡 WSN DETECTOR[/bold cyan] [info]détection d'anomalies multimodales[/info]")

    try:
        if args.config:
            if not os.path.exists(args.config):
                raise InputError(f"Fichier introuvable: {args.config}")
            ConfigManager.reset(args.config)
        setup_logging(args.log_level)
        return func(args, ConsoleUI(console))
    except USAGE_ERRORS as e:
        logger.error(str(e))
        console.print(f"[danger]Erreur: {e}[/danger]")
        return 2
    except DetectorError as e:
        logger.error(f"{type(e).__name__}: {e}")
        console.print(f"[danger]Échec: {e}[/danger]")
        return 1
    except KeyboardInterrupt:
        console.print("[warning]Interrompu[/warning]")
        return 1


if __name__ == "__main__":
    sys.exit(main())
