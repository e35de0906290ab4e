#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ConsoleUI - Affichage console des étapes, tableaux de résultats et barres de progression
"""

import logging
import os
from contextlib import contextmanager
from typing import Callable, Iterator, Optional

import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table
from rich.theme import Theme

from core.detector import LossHistory
from evaluation.evaluator import DetectionReport

# Configuration du système de logging
logger = logging.getLogger('ConsoleUI')

custom_theme = Theme({
    "info": "cyan",
    "warning": "yellow",
    "danger": "bold red",
    "success": "bold green",
    "metric": "magenta",
    "path": "blue",
})


def _fmt(value: Optional[float], digits: int = 3) -> str:
    return f"{value:.{digits}f}" if value is not None else "-"


class ConsoleUI:
    """
    Interface console du détecteur.
    Gère les en-têtes, messages, tableaux de bilan et la progression des calculs longs.
    """

    def __init__(self, console: Optional[Console] = None):
        """
        Initialise l'interface console.

        Args:
            console: Console rich (console thématique sur la sortie standard par défaut)
        """
        self.console = console or Console(theme=custom_theme)

    def print_header(self, title: str, subtitle: str = "") -> None:
        """
        Affiche un en-tête de commande.
        """
        self.console.rule(f"[bold cyan]{title}[/bold cyan]")
        if subtitle:
            self.console.print(f"[info]{subtitle}[/info]")

    def info(self, text: str) -> None:
        self.console.print(f"[info]{text}[/info]")

    def success(self, text: str) -> None:
        self.console.print(f"[success]{text}[/success]")

    def warning(self, text: str) -> None:
        self.console.print(f"[warning]{text}[/warning]")

    def error(self, text: str) -> None:
        self.console.print(f"[danger]{text}[/danger]")

    def written(self, label: str, path: str) -> None:
        self.console.print(f"[info]{label}:[/info] [path]{path}[/path]")

    @contextmanager
    def progress(self, description: str, total: Optional[int]) -> Iterator[Callable[..., None]]:
        """
        Barre de progression ; le contexte fournit une fonction d'avancement d'un pas.
        """
        with Progress(TextColumn("[info]{task.description}"), BarColumn(),
                      TextColumn("{task.completed}/{task.total}"), TimeElapsedColumn(),
                      console=self.console, transient=True) as bar:
            task = bar.add_task(description, total=total)
            yield lambda *_: bar.advance(task)

    def report_table(self, report: DetectionReport, title: str = "Bilan de détection") -> Table:
        """
        Construit le tableau récapitulatif d'un bilan.
        """
        table = Table(title=title)
        table.add_column("Mesure", style="info")
        table.add_column("Valeur", style="metric", justify="right")
        rows = [
            ("TP", str(report.tp)), ("FP", str(report.fp)), ("FN", str(report.fn)), ("TN", str(report.tn)),
            ("Précision", _fmt(report.precision)), ("Rappel", _fmt(report.recall)), ("F1", _fmt(report.f1)),
            ("delaystep", str(report.delaystep)), ("Seuil", _fmt(report.threshold, 6)),
            ("Localisation", _fmt(report.localization_rate)),
        ]
        rows += [(f"Rappel type {k}", _fmt(v)) for k, v in report.per_type_recall.items()]
        rows += [(f"Rappel {k}", _fmt(v)) for k, v in report.per_mode_recall.items()]
        for label, value in rows:
            table.add_row(label, value)
        return table

    def frame_table(self, frame: pd.DataFrame, title: str = "") -> Table:
        """
        Construit un tableau rich à partir d'un DataFrame (balayages, comparaisons).
        """
        table = Table(title=title or None)
        for column in frame.columns:
            table.add_column(str(column), justify="right")
        for row in frame.itertuples(index=False):
            cells = []
            for value in row:
                if value is None or (isinstance(value, float) and pd.isna(value)):
                    cells.append("-")
                elif isinstance(value, float):
                    cells.append(_fmt(value, 4))
                else:
                    cells.append(str(value))
            table.add_row(*cells)
        return table

    def history_table(self, history: LossHistory) -> Table:
        return self.frame_table(history.to_frame(), "Historique des pertes")

    def show(self, table: Table) -> None:
        self.console.print(table)

    def export_summary(self, report: DetectionReport, path: str) -> str:
        """
        Écrit le tableau récapitulatif en texte brut.
        """
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            Console(file=f, width=100, color_system=None, theme=custom_theme).print(self.report_table(report))
        return path
