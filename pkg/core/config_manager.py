#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ConfigManager - Gestionnaire de configuration du détecteur d'anomalies WSN
"""

import copy
import os
import yaml
import logging
from typing import Dict, Any, Optional

from dotenv import load_dotenv
from rich.logging import RichHandler

from core.errors import ConfigError

# Configuration du système de logging
logger = logging.getLogger('ConfigManager')

OUTPUT_ENV_VAR = 'WSN_OUTPUT_DIR'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

DEFAULT_CONFIG: Dict[str, Any] = {
    "detector": {
        "window": 60,
        "hidden": 32,
        "gru_layers": 2,
        "epochs": 60,
        "learning_rate": 5e-5,
        "node_adjacency": "full1",
        "topk_k": 5,
        "mode_adjacency": "full1",
        "mode_deps": None,
        "normalization": "zscore",
        "seed": 0
    },
    "data": {
        "split": [0.8, 0.1, 0.1],
        "modes": ["temperature", "humidity", "voltage"],
        "node_count": 50,
        "start": "2004-03-04",
        "end": "2004-03-08",
        "length": 3000
    },
    "protocol": {
        "delaystep": 8,
        "seed": 0,
        "type_mix": [1, 2, 3, 4],
        "p": 14,
        "q": 9,
        "ramp": False,
        "workers": 1
    },
    "output": {
        "directory": "runs"
    },
    "logging": {
        "level": "INFO",
        "log_dir": "logs",
        "file": "wsn_detector.log"
    }
}


class ConfigManager:
    """
    Gestionnaire de configuration du détecteur.

    Une seule instance par processus ; la ligne de commande la remplace quand un
    fichier est passé avec --config.
    """

    _instance = None  # Singleton

    @classmethod
    def get_instance(cls, config_path: Optional[str] = None) -> 'ConfigManager':
        """Instance partagée, créée au premier appel."""
        if cls._instance is None:
            cls._instance = ConfigManager(config_path)
        return cls._instance

    @classmethod
    def reset(cls, config_path: Optional[str] = None) -> 'ConfigManager':
        """
        Remplace l'instance unique (fichier de configuration fourni en ligne de commande).
        """
        cls._instance = ConfigManager(config_path)
        return cls._instance

    def __init__(self, config_path: Optional[str] = None):
        """
        Args:
            config_path: Fichier YAML ou JSON (config.yaml du dépôt par défaut)
        """
        self.config_path = config_path or os.path.join(os.path.dirname(os.path.dirname(__file__)), 'config.yaml')
        self.config = self._load_config()
        self._fill_defaults()
        self._apply_environment()

    def _load_config(self) -> Dict[str, Any]:
        """
        Charge la configuration depuis le fichier YAML (un document JSON est aussi du YAML valide).

        Returns:
            Dict[str, Any]: Configuration chargée

        Raises:
            ConfigError: Fichier illisible ou qui n'est pas un dictionnaire de sections
        """
        if not os.path.exists(self.config_path):
            logger.warning(f"Fichier de configuration {self.config_path} non trouvé. Utilisation des valeurs par défaut.")
            return copy.deepcopy(DEFAULT_CONFIG)
        try:
            with open(self.config_path, 'r', encoding='utf-8') as file:
                config = yaml.safe_load(file) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Erreur lors du chargement de la configuration {self.config_path}: {e}") from e
        if not isinstance(config, dict):
            raise ConfigError(f"Configuration {self.config_path}: un dictionnaire de sections est attendu")
        logger.info(f"Configuration chargée depuis {self.config_path}")
        return config

    def _fill_defaults(self) -> None:
        """
        Complète les sections et paramètres absents par leurs valeurs par défaut.
        """
        for section, defaults in DEFAULT_CONFIG.items():
            current = self.config.get(section)
            if not isinstance(current, dict):
                logger.warning(f"Section '{section}' manquante dans la configuration. Utilisation des valeurs par défaut.")
                self.config[section] = copy.deepcopy(defaults)
                continue
            for param, value in defaults.items():
                if param not in current:
                    logger.warning(f"Paramètre '{param}' manquant dans la section '{section}'. Utilisation de la valeur par défaut.")
                    current[param] = copy.deepcopy(value)

    def _apply_environment(self) -> None:
        """
        Applique les surcharges d'environnement (fichier .env compris).
        """
        load_dotenv()
        output_dir = os.getenv(OUTPUT_ENV_VAR)
        if output_dir:
            logger.info(f"Répertoire de sortie pris dans {OUTPUT_ENV_VAR}: {output_dir}")
            self.config["output"]["directory"] = output_dir

    def get(self, section: str, param: Optional[str] = None, default: Any = None) -> Any:
        """
        Valeur d'un paramètre, ou section entière si `param` est None.
        """
        values = self.config.get(section)
        if values is None:
            return default
        return values if param is None else values.get(param, default)

    def save(self, path: str) -> str:
        """
        Écrit la configuration effective (valeurs par défaut et surcharges comprises).

        Args:
            path: Fichier de destination

        Returns:
            str: Chemin écrit

        Raises:
            ConfigError: Écriture impossible
        """
        directory = os.path.dirname(path)
        try:
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, 'w', encoding='utf-8') as file:
                yaml.safe_dump(self.config, file, default_flow_style=False, allow_unicode=True, sort_keys=False)
        except OSError as e:
            raise ConfigError(f"Impossible d'écrire la configuration dans {path}: {e}") from e
        logger.info(f"Configuration effective écrite dans {path}")
        return path


# Pour faciliter l'accès à la configuration depuis n'importe quel module
def get_config(section: str = None, param: str = None, default: Any = None) -> Any:
    """
    Accès à la configuration globale : tout, une section ou un paramètre.
    """
    manager = ConfigManager.get_instance()
    if section is None:
        return manager.config
    return manager.get(section, param, default)


def setup_logging(level: Optional[str] = None) -> None:
    """
    Configure le logger racine : fichier sous log_dir et console rich.

    Args:
        level: Niveau forcé (DEBUG, INFO, WARNING, ERROR), sinon celui de la configuration
    """
    settings = get_config("logging")
    level_name = (level or settings.get("level", "INFO")).upper()
    log_dir = settings.get("log_dir", "logs")
    os.makedirs(log_dir, exist_ok=True)

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    file_handler = logging.FileHandler(os.path.join(log_dir, settings.get("file", "wsn_detector.log")), encoding='utf-8')
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    console_handler = RichHandler(rich_tracebacks=True, show_path=False)
    root.addHandler(file_handler)
    root.addHandler(console_handler)
    root.setLevel(getattr(logging, level_name, logging.INFO))
