#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Ingest - Lecture du relevé du laboratoire Intel Berkeley et de la table des positions des motes

Les lectures irrégulières sont alignées sur une grille uniforme de T instants :
moyenne par case, report de la valeur précédente dans les trous, première valeur
observée pour les trous de tête.
"""

import gzip
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np

from core.errors import ContractError, InputError, MissingNodeError
from flows.graph_builders import NodeCoordinates
from flows.stream_model import FlowTensor

# Configuration du système de logging
logger = logging.getLogger('Ingest')

SENSOR_FIELDS = ('temperature', 'humidity', 'light', 'voltage')
FIELD_COUNT = 8

Source = Union[str, os.PathLike, Iterable[str]]


@dataclass(frozen=True)
class RawReading:
    """
    Une ligne du relevé : date heure epoch moteid temperature humidity light voltage.
    """
    date: str
    time: str
    epoch: int
    mote_id: int
    temperature: Optional[float]
    humidity: Optional[float]
    light: Optional[float]
    voltage: Optional[float]
    seconds: float

    def value(self, mode: str) -> Optional[float]:
        return getattr(self, mode)


@dataclass
class ParseStats:
    """
    Compteurs d'une lecture : lignes retenues et lignes mal formées.
    """
    parsed: int = 0
    skipped: int = 0
    motes: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return self.parsed + self.skipped


def parse_moment(date: str, time_of_day: str = "00:00:00") -> float:
    """
    Convertit une date et une heure du relevé en secondes POSIX (UTC).

    La partie fractionnaire est complétée ou tronquée à six chiffres.

    Raises:
        ValueError: Date ou heure illisible
    """
    if '.' in time_of_day:
        whole, fraction = time_of_day.split('.', 1)
        time_of_day = f"{whole}.{(fraction + '000000')[:6]}"
    moment = datetime.fromisoformat(f"{date} {time_of_day}")
    return moment.replace(tzinfo=timezone.utc).timestamp()


def _open_lines(source: Source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        try:
            opener = gzip.open if path.endswith('.gz') else open
            with opener(path, 'rt', encoding='utf-8') as f:
                for line in f:
                    yield line
        except (OSError, UnicodeDecodeError) as e:
            raise InputError(f"Source illisible: {path} ({e})") from e
    else:
        yield from source


def _optional_float(token: str) -> Optional[float]:
    try:
        value = float(token)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _parse_line(line: str) -> Optional[RawReading]:
    tokens = line.split()
    if len(tokens) != FIELD_COUNT:
        return None
    date, time_of_day = tokens[0], tokens[1]
    try:
        epoch = int(tokens[2])
        mote_id = int(tokens[3])
        seconds = parse_moment(date, time_of_day)
    except ValueError:
        return None
    if mote_id < 1:
        return None
    sensors = [_optional_float(token) for token in tokens[4:]]
    return RawReading(date, time_of_day, epoch, mote_id, *sensors, seconds=seconds)


def parse_readings(source: Source, stats: Optional[ParseStats] = None) -> Iterator[RawReading]:
    """
    Lit le relevé ligne à ligne ; les lignes mal formées sont comptées et ignorées.

    Args:
        source: Chemin (texte ou .gz) ou itérable de lignes
        stats: Compteurs mis à jour pendant la lecture

    Returns:
        Iterator[RawReading]: Lectures dans l'ordre du fichier

    Raises:
        InputError: Source illisible
    """
    stats = stats if stats is not None else ParseStats()
    for line in _open_lines(source):
        reading = _parse_line(line)
        if reading is None:
            stats.skipped += 1
            continue
        stats.parsed += 1
        stats.motes[reading.mote_id] += 1
        yield reading
    if stats.skipped:
        logger.info(f"{stats.skipped} ligne(s) mal formée(s) ignorée(s) sur {stats.total}")


def within(readings: Iterable[RawReading], start: float, end: float) -> Iterator[RawReading]:
    """
    Filtre les lectures dont l'instant tombe dans [start, end).
    """
    return (r for r in readings if start <= r.seconds < end)


def select_nodes(readings: Iterable[RawReading], count: int) -> List[int]:
    """
    Choisit les `count` motes les plus lues ; égalités départagées par identifiant croissant.

    Returns:
        List[int]: Identifiants retenus, triés par ordre croissant
    """
    counts = Counter(r.mote_id for r in readings)
    if count < 1 or count > len(counts):
        raise ContractError(f"Impossible de retenir {count} nœud(s) parmi {len(counts)} observé(s)")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    chosen = sorted(mote for mote, _ in ranked[:count])
    logger.info(f"Nœuds retenus ({count}): {chosen}")
    return chosen


def derive_stride(start: float, end: float, length: int) -> int:
    """
    Pas de la grille en secondes entières : (end − start) / length arrondi.
    """
    if end <= start or length < 1:
        raise ContractError(f"Plage temporelle invalide: [{start}, {end}) pour {length} instants")
    return max(1, int(round((end - start) / length)))


def build_flow(readings: Iterable[RawReading], node_ids: Sequence[int], modes: Sequence[str],
               start: float, length: int, stride: int) -> FlowTensor:
    """
    Aligne les lectures sur une grille uniforme de `length` instants.

    Chaque case (nœud, mode, instant) prend la moyenne des lectures de son intervalle ;
    les trous reprennent la valeur précédente, les trous de tête la première valeur
    observée. Une case jamais observée reste constante (erreur de série constante en aval).

    Args:
        readings: Lectures brutes
        node_ids: Nœuds demandés, dans l'ordre des lignes du flux
        modes: Modes demandés parmi temperature, humidity, light, voltage
        start: Début de la grille (secondes POSIX)
        length: Nombre d'instants T
        stride: Pas de la grille en secondes

    Returns:
        FlowTensor: Flux brut T × M × N

    Raises:
        MissingNodeError: Nœud demandé sans aucune lecture
    """
    unknown = [m for m in modes if m not in SENSOR_FIELDS]
    if unknown:
        raise ContractError(f"Modes inconnus: {unknown} (disponibles: {', '.join(SENSOR_FIELDS)})")
    if length < 1 or stride < 1:
        raise ContractError(f"Grille invalide: T={length}, pas={stride}")
    node_ids = [int(i) for i in node_ids]
    row_of = {node: i for i, node in enumerate(node_ids)}
    M, N, T = len(node_ids), len(modes), length

    sums = np.zeros((T, M, N))
    counts = np.zeros((T, M, N), dtype=np.int64)
    seen = np.zeros(M, dtype=bool)
    buckets, rows, cols, values = [], [], [], []
    for reading in readings:
        row = row_of.get(reading.mote_id)
        if row is None:
            continue
        bucket = int((reading.seconds - start) // stride)
        if not 0 <= bucket < T:
            continue
        seen[row] = True
        for j, mode in enumerate(modes):
            value = reading.value(mode)
            if value is not None:
                buckets.append(bucket)
                rows.append(row)
                cols.append(j)
                values.append(value)

    missing = [node_ids[i] for i in np.flatnonzero(~seen)]
    if missing:
        raise MissingNodeError(missing[0])
    index = (np.array(buckets, dtype=np.int64), np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))
    np.add.at(sums, index, np.array(values, dtype=np.float64))
    np.add.at(counts, index, 1)

    observed = counts > 0
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=observed)
    # report vers l'avant, puis première valeur observée pour la tête
    last = np.where(observed, np.arange(T)[:, None, None], -1)
    last = np.maximum.accumulate(last, axis=0)
    first = np.argmax(observed, axis=0)
    last = np.where(last < 0, first[None, :, :], last)
    filled = np.take_along_axis(means, last, axis=0)

    for i, j in np.argwhere(~observed.any(axis=0)):
        logger.warning(f"Aucune lecture du mode {modes[j]} pour le nœud {node_ids[i]}")
    gaps = int(T * M * N - observed.sum())
    logger.info(f"Flux aligné {T}×{M}×{N}, pas {stride}s, {gaps} case(s) comblée(s)")

    timestamps = int(start) + stride * np.arange(T, dtype=np.int64)
    return FlowTensor(
        values=filled,
        node_ids=tuple(node_ids),
        mode_names=tuple(modes),
        timestamps=timestamps,
        metadata={'stride': stride, 'start_epoch': int(start), 'filled_cells': gaps},
    )


def parse_coordinates(source: Source) -> NodeCoordinates:
    """
    Lit la table des positions : une ligne `moteid x y` par mote.

    Raises:
        InputError: Ligne illisible ou identifiant dupliqué
    """
    ids: List[int] = []
    xy: List[List[float]] = []
    for number, line in enumerate(_open_lines(source), start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            mote_id, x, y = int(tokens[0]), float(tokens[1]), float(tokens[2])
        except (ValueError, IndexError) as e:
            raise InputError(f"Ligne {number} de la table des positions illisible: {line.strip()!r}") from e
        if mote_id in ids:
            raise InputError(f"Identifiant de mote dupliqué dans la table des positions: {mote_id}")
        ids.append(mote_id)
        xy.append([x, y])
    return NodeCoordinates(node_ids=tuple(ids), xy=np.array(xy, dtype=np.float64).reshape(len(ids), 2))


def prepare_flow(readings_source: Source, modes: Sequence[str], start: str, end: str, length: int,
                 node_count: int, coordinates_source: Optional[Source] = None,
                 node_ids: Optional[Sequence[int]] = None) -> FlowTensor:
    """
    Chaîne complète d'ingestion : lecture, sélection des nœuds, alignement et positions.

    Args:
        readings_source: Relevé brut
        modes: Modes retenus
        start: Date de début (AAAA-MM-JJ), incluse
        end: Date de fin (AAAA-MM-JJ), exclue
        length: Nombre d'instants T
        node_count: Nombre de nœuds M retenus
        coordinates_source: Table des positions (facultative)
        node_ids: Liste explicite de nœuds, prioritaire sur node_count

    Returns:
        FlowTensor: Flux brut accompagné de ses métadonnées d'ingestion
    """
    try:
        begin, finish = parse_moment(start), parse_moment(end)
    except ValueError as e:
        raise InputError(f"Plage de dates illisible: {start} → {end}") from e
    stats = ParseStats()
    readings = list(within(parse_readings(readings_source, stats), begin, finish))
    if not readings:
        raise InputError(f"Aucune lecture entre {start} et {end}")
    if node_ids:
        node_ids = sorted(int(i) for i in node_ids)
    else:
        node_ids = select_nodes(readings, node_count)
    stride = derive_stride(begin, finish, length)
    flow = build_flow(readings, node_ids, modes, begin, length, stride)

    coordinates = None
    if coordinates_source is not None:
        coordinates = parse_coordinates(coordinates_source).subset(node_ids)
    metadata = dict(flow.metadata)
    metadata.update({
        'start': start,
        'end': end,
        'parsed_lines': stats.parsed,
        'skipped_lines': stats.skipped,
        'selected_nodes': node_ids,
    })
    return FlowTensor(values=flow.values, node_ids=flow.node_ids, mode_names=flow.mode_names,
                      timestamps=flow.timestamps, coordinates=coordinates, metadata=metadata)
