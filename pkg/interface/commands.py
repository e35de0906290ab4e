#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Commands - Sous-commandes du détecteur : une étape de la chaîne par commande

prepare → train → calibrate → score / evaluate, plus les recettes d'expérience
(run-all, scenarios, compare, ablation, sweep) et la vérification des gradients.
Chaque fichier produit embarque la configuration effective.
"""

import argparse
import json
import logging
import os
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from core.config_manager import ConfigManager, get_config
from core.detector import (DetectorConfig, DetectorModel, check_flow, gradcheck_detector, load_model,
                           save_model, train)
from core.errors import ConfigError, ContractError, InputError
from core.scoring import calibrate_threshold, export_curve, score_curve
from core.tables import write_table
from evaluation.anomaly_lab import (AnomalySpec, ProtocolSettings, TrialProtocol, build_protocol, inject,
                                    run_trials, scenario_specs, training_ranges)
from evaluation.evaluator import (DetectionReport, hyperparameter_sweep, score_trials, sensitivity_sweep,
                                  variant_table)
from flows.ingest import prepare_flow
from flows.stream_model import FlowTensor, apply_norm, artifact_paths, fit_norm, load_flow, save_flow, split
from interface.command_parser import CommandParser, parse_grid, parse_key_values, parse_list
from interface.console_ui import ConsoleUI

# Configuration du système de logging
logger = logging.getLogger('Commands')

SEGMENTS = ('train', 'val', 'test')
DISABLE_FLAGS = {'mode': 'disable_mode_gat', 'time': 'disable_time_gat', 'node': 'disable_node_gat'}


# ====== OUTILS COMMUNS ======

def output_dir(args: argparse.Namespace) -> str:
    return args.output_dir or get_config('output', 'directory', 'runs')


def require_path(path: str) -> str:
    """
    Vérifie qu'un fichier d'entrée existe.

    Raises:
        InputError: Fichier absent (le message nomme le chemin)
    """
    if not path or not os.path.exists(path):
        raise InputError(f"Fichier introuvable: {path}")
    return path


def require_artifact(path: str) -> str:
    require_path(artifact_paths(path)[0])
    return path


def split_ratios(args: argparse.Namespace) -> List[float]:
    if getattr(args, 'split', None):
        return parse_list(args.split, float)
    return list(get_config('data', 'split'))


def detector_config(args: argparse.Namespace) -> DetectorConfig:
    """
    Configuration du détecteur : section `detector` surchargée par les options.
    """
    overrides: Dict[str, Any] = {
        'window': getattr(args, 'window', None),
        'hidden': getattr(args, 'hidden', None),
        'gru_layers': getattr(args, 'gru_layers', None),
        'epochs': getattr(args, 'epochs', None),
        'learning_rate': getattr(args, 'lr', None),
        'seed': getattr(args, 'seed', None),
        'node_adjacency': getattr(args, 'node_adjacency', None),
        'topk_k': getattr(args, 'topk_k', None),
        'mode_adjacency': getattr(args, 'mode_adjacency', None),
        'normalization': getattr(args, 'normalization', None),
    }
    for name in getattr(args, 'disable', None) or []:
        overrides[DISABLE_FLAGS[name]] = True
    return DetectorConfig.from_config(**overrides)


def protocol_settings(args: argparse.Namespace) -> ProtocolSettings:
    type_mix = getattr(args, 'type_mix', None)
    return ProtocolSettings.from_config(
        delaystep=getattr(args, 'delaystep', None),
        seed=getattr(args, 'protocol_seed', None),
        type_mix=parse_list(type_mix) if type_mix else None,
        p=getattr(args, 'p', None),
        q=getattr(args, 'q', None),
        ramp=getattr(args, 'ramp', None),
        workers=getattr(args, 'workers', None),
    )


def load_threshold(value: Optional[str]) -> Optional[float]:
    """
    Seuil donné en clair ou fichier de seuil produit par calibrate.
    """
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        pass
    require_path(value)
    try:
        with open(value, 'r', encoding='utf-8') as f:
            return float(json.load(f)['threshold'])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InputError(f"Fichier de seuil invalide: {value} ({e})") from e


def segments(flow: FlowTensor, args: argparse.Namespace, window: int) -> Tuple[FlowTensor, FlowTensor, FlowTensor]:
    return split(flow, split_ratios(args), window)


def header(config: DetectorConfig, **extra) -> Dict[str, Any]:
    """En-tête de configuration effective des fichiers produits."""
    data = config.to_dict()
    data.update(extra)
    return data


def inject_spec(text: str, flow: FlowTensor) -> AnomalySpec:
    """
    Anomalie décrite par `type=4,node=29,mode=voltage,t=70` (node = identifiant de mote,
    t = indice relatif au segment ; sign, duration, p, q, ramp facultatifs).
    """
    options = parse_key_values(text)
    missing = [key for key in ('type', 'node', 'mode', 't') if key not in options]
    if missing:
        raise ConfigError(f"Injection '{text}': clés manquantes {missing}")
    try:
        return AnomalySpec(type=int(options['type']), node=flow.node_index(int(options['node'])),
                           mode=flow.mode_index(str(options['mode'])), start=int(options['t']),
                           duration=options.get('duration'), sign=int(options.get('sign', 1)),
                           p=float(options.get('p', get_config('protocol', 'p'))),
                           q=float(options.get('q', get_config('protocol', 'q'))),
                           ramp=str(options.get('ramp', 'false')).lower() in ('1', 'true', 'yes'))
    except ContractError as e:
        raise ConfigError(f"Injection '{text}' invalide: {e}") from e


# ====== ÉTAPES ======

def prepare_step(ui: ConsoleUI, args: argparse.Namespace, out: str) -> FlowTensor:
    data = get_config('data')
    require_path(args.raw)
    if args.coords:
        require_path(args.coords)
    flow = prepare_flow(
        args.raw,
        modes=parse_list(args.modes, str) if args.modes else data['modes'],
        start=args.start or data['start'],
        end=args.end or data['end'],
        length=args.length or int(data['length']),
        node_count=args.node_count or int(data['node_count']),
        coordinates_source=args.coords,
        node_ids=parse_list(args.nodes) if args.nodes else None,
    )
    json_path, _ = save_flow(flow, out)
    ui.info(f"Nœuds retenus ({flow.M}): {', '.join(str(i) for i in flow.node_ids)}")
    ui.info(f"Pas de la grille: {flow.stride} s, forme {flow.M}×{flow.N}×{flow.T}")
    ui.written("Flux préparé", json_path)
    return flow


def train_step(ui: ConsoleUI, config: DetectorConfig, flow: FlowTensor, args: argparse.Namespace,
               out: str) -> DetectorModel:
    train_raw, val_raw, _ = segments(flow, args, config.window)
    stats = fit_norm(train_raw, config.normalization)
    with ui.progress("Entraînement", total=config.epochs) as advance:
        model, history = train(config, apply_norm(train_raw, stats), apply_norm(val_raw, stats), on_epoch=advance)
    json_path, _ = save_model(model, out)
    loss_path = write_table(history.to_frame(), f"{artifact_paths(out)[0][:-5]}_loss.csv",
                            header(config, parameters=model.parameter_count()))
    ui.show(ui.history_table(history))
    ui.written("Point de sauvegarde", json_path)
    ui.written("Historique des pertes", loss_path)
    return model


def calibrate_step(ui: ConsoleUI, model: DetectorModel, flow: FlowTensor, args: argparse.Namespace,
                   out: str) -> float:
    check_flow(model, flow)
    _, val_raw, _ = segments(flow, args, model.W)
    threshold = calibrate_threshold(model, apply_norm(val_raw, model.norm))
    directory = os.path.dirname(out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(out, 'w', encoding='utf-8') as f:
        json.dump({'threshold': threshold, 'config': header(model.config, split=split_ratios(args))}, f,
                  ensure_ascii=False, indent=2)
    ui.info(f"Seuil: {threshold:.6f}")
    ui.written("Fichier de seuil", out)
    return threshold


def evaluate_step(ui: ConsoleUI, model: DetectorModel, flow: FlowTensor, threshold: float,
                  settings: ProtocolSettings, args: argparse.Namespace, out_dir: str) -> DetectionReport:
    train_raw, _, test_raw = segments(flow, args, model.W)
    ranges = training_ranges(train_raw)
    if getattr(args, 'protocol', None):
        protocol = TrialProtocol.load(require_path(args.protocol))
    else:
        protocol = build_protocol(test_raw, model.W, settings)
        protocol.save(os.path.join(out_dir, 'protocol.json'))
    with ui.progress("Essais", total=len(protocol.trials)) as advance:
        outcomes = run_trials(model, threshold, test_raw, protocol, ranges, workers=settings.workers,
                              on_trial=advance)
    report = score_trials(outcomes, protocol.delaystep, mode_names=test_raw.mode_names)
    context = header(model.config, threshold=threshold, protocol_seed=protocol.seed,
                     delaystep=protocol.delaystep, type_mix=list(protocol.type_mix), p=settings.p,
                     q=settings.q, ramp=settings.ramp, split=split_ratios(args))
    report_path = report.save(os.path.join(out_dir, 'report.json'), context)
    summary_path = ui.export_summary(report, os.path.join(out_dir, 'report.txt'))
    ui.show(ui.report_table(report))
    ui.written("Bilan", report_path)
    ui.written("Résumé", summary_path)
    return report


def threshold_or_calibrate(ui: ConsoleUI, model: DetectorModel, flow: FlowTensor, args: argparse.Namespace) -> float:
    threshold = load_threshold(getattr(args, 'threshold', None))
    if threshold is None:
        _, val_raw, _ = segments(flow, args, model.W)
        threshold = calibrate_threshold(model, apply_norm(val_raw, model.norm))
        ui.warning(f"Aucun seuil fourni, seuil recalibré sur la validation: {threshold:.6f}")
    return threshold


# ====== COMMANDES ======

def cmd_prepare(args: argparse.Namespace, ui: ConsoleUI) -> int:
    ui.print_header("Préparation du flux", args.raw)
    prepare_step(ui, args, args.out or os.path.join(output_dir(args), 'flow'))
    return 0


def cmd_train(args: argparse.Namespace, ui: ConsoleUI) -> int:
    config = detector_config(args)
    flow = load_flow(require_artifact(args.flow))
    ui.print_header("Entraînement", f"W={config.window}, D={config.hidden}, {config.epochs} époques")
    if config.ablation_flags:
        ui.info(f"Ablation: {', '.join(config.ablation_flags)}")
    train_step(ui, config, flow, args, args.out or os.path.join(output_dir(args), 'model'))
    return 0


def cmd_calibrate(args: argparse.Namespace, ui: ConsoleUI) -> int:
    model = load_model(require_artifact(args.checkpoint))
    flow = load_flow(require_artifact(args.flow))
    ui.print_header("Calibrage du seuil")
    calibrate_step(ui, model, flow, args, args.out or os.path.join(output_dir(args), 'threshold.json'))
    return 0


def cmd_score(args: argparse.Namespace, ui: ConsoleUI) -> int:
    model = load_model(require_artifact(args.checkpoint))
    flow = load_flow(require_artifact(args.flow))
    check_flow(model, flow)
    threshold = load_threshold(args.threshold)
    parts = segments(flow, args, model.W)
    raw = parts[SEGMENTS.index(args.segment)]
    ui.print_header("Courbe de score", f"segment {args.segment}")
    extra: Dict[str, Any] = {'segment': args.segment, 'threshold': threshold}
    if args.inject:
        spec = inject_spec(args.inject, raw)
        raw = inject(raw, spec, training_ranges(parts[0]))
        extra['inject'] = args.inject
        ui.info(f"Anomalie injectée: {spec.label} sur {flow.mode_names[spec.mode]} du mote "
                f"{flow.node_ids[spec.node]} à t={spec.start}")
    curve = score_curve(model, apply_norm(raw, model.norm), threshold)
    out = args.out or os.path.join(output_dir(args), f"score_{args.segment}.csv")
    export_curve(curve, out, header(model.config, **extra))
    if threshold is not None:
        ui.info(f"{int(curve.exceedances.sum())} dépassement(s) sur {len(curve)} instants")
    ui.written("Courbe de score", out)
    return 0


def cmd_evaluate(args: argparse.Namespace, ui: ConsoleUI) -> int:
    model = load_model(require_artifact(args.checkpoint))
    flow = load_flow(require_artifact(args.flow))
    check_flow(model, flow)
    settings = protocol_settings(args)
    threshold = threshold_or_calibrate(ui, model, flow, args)
    out_dir = args.out or output_dir(args)
    if args.sweep:
        parameter, grid = parse_grid(args.sweep)
        ui.print_header("Sensibilité à l'amplitude", f"{parameter} ∈ {grid}")
        train_raw, _, test_raw = segments(flow, args, model.W)
        frame = sensitivity_sweep(model, threshold, train_raw, test_raw, parameter, grid, settings)
        path = write_table(frame, os.path.join(out_dir, f"sensitivity_{parameter}.csv"),
                           header(model.config, threshold=threshold, protocol_seed=settings.seed,
                                  delaystep=settings.delaystep))
        ui.show(ui.frame_table(frame, "Précision par amplitude"))
        ui.written("Tableau de sensibilité", path)
        return 0
    ui.print_header("Évaluation", f"delaystep={settings.delaystep}, graine {settings.seed}")
    evaluate_step(ui, model, flow, threshold, settings, args, out_dir)
    return 0


def cmd_gradcheck(args: argparse.Namespace, ui: ConsoleUI) -> int:
    ui.print_header("Vérification des gradients", "détecteur jouet M=3, N=2, W=4, D=3, une couche GRU")
    report = gradcheck_detector(seed=args.seed, eps=args.eps)
    rows = sorted(((name, error, report.raw_per_parameter.get(name, error))
                   for name, error in report.per_parameter.items()), key=lambda item: item[1], reverse=True)
    ui.show(ui.frame_table(pd.DataFrame(rows, columns=['paramètre', 'erreur relative max', 'erreur brute max']),
                           "Gradients"))
    if report.max_raw_error >= args.tolerance:
        ui.warning(f"Erreur relative brute {report.max_raw_error:.3e} sur des gradients de faible amplitude")
    if report.passed(args.tolerance):
        ui.success(f"Gradients conformes: erreur relative max {report.max_error:.3e} < {args.tolerance:g}")
        return 0
    ui.error(f"Gradients non conformes: erreur relative max {report.max_error:.3e} ≥ {args.tolerance:g}")
    return 1


def cmd_run_all(args: argparse.Namespace, ui: ConsoleUI) -> int:
    config = detector_config(args)
    settings = protocol_settings(args)
    out_dir = output_dir(args)
    ui.print_header("Chaîne complète", "prepare → train → calibrate → evaluate")
    ui.written("Configuration effective", ConfigManager.get_instance().save(os.path.join(out_dir, 'config.yaml')))
    flow = prepare_step(ui, args, os.path.join(out_dir, 'flow'))
    model = train_step(ui, config, flow, args, os.path.join(out_dir, 'model'))
    threshold = calibrate_step(ui, model, flow, args, os.path.join(out_dir, 'threshold.json'))
    evaluate_step(ui, model, flow, threshold, settings, args, out_dir)
    return 0


def cmd_scenarios(args: argparse.Namespace, ui: ConsoleUI) -> int:
    model = load_model(require_artifact(args.checkpoint))
    flow = load_flow(require_artifact(args.flow))
    check_flow(model, flow)
    threshold = threshold_or_calibrate(ui, model, flow, args)
    train_raw, _, test_raw = segments(flow, args, model.W)
    ranges = training_ranges(train_raw)
    out_dir = args.out or os.path.join(output_dir(args), 'scenarios')
    ui.print_header("Scénarios d'injection de référence")

    clean = score_curve(model, apply_norm(test_raw, model.norm), threshold)
    ui.written("Courbe propre", export_curve(clean, os.path.join(out_dir, 'clean.csv'),
                                             header(model.config, scenario='clean')))
    for label, spec in scenario_specs(test_raw, model.W):
        curve = score_curve(model, apply_norm(inject(test_raw, spec, ranges), model.norm), threshold)
        path = export_curve(curve, os.path.join(out_dir, f"{label}.csv"),
                            header(model.config, scenario=label, **{f"inject_{k}": v for k, v in spec.to_dict().items()}))
        ui.info(f"{label}: score {curve.at(spec.start):.4f} à t={spec.start} (propre {clean.at(spec.start):.4f})")
        ui.written(label, path)
    return 0


def _run_variants(ui: ConsoleUI, title: str, variants: Sequence[Tuple[str, DetectorConfig]],
                  flow: FlowTensor, args: argparse.Namespace, name: str) -> int:
    settings = protocol_settings(args)
    ui.print_header(title, ', '.join(label for label, _ in variants))
    frame = variant_table(variants, flow, split_ratios(args), settings)
    path = write_table(frame, os.path.join(output_dir(args), f"{name}.csv"),
                       header(variants[0][1], protocol_seed=settings.seed, delaystep=settings.delaystep))
    ui.show(ui.frame_table(frame, title))
    ui.written("Tableau", path)
    return 0


def cmd_compare(args: argparse.Namespace, ui: ConsoleUI) -> int:
    base = detector_config(args)
    flow = load_flow(require_artifact(args.flow))
    variants = [('full1', replace(base, node_adjacency='full1', normalization='zscore'))]
    if flow.coordinates is not None:
        variants.append(('topk', replace(base, node_adjacency='topk', normalization='zscore')))
    else:
        ui.warning("Flux sans coordonnées: variante topk ignorée")
    variants.append(('maxmin', replace(base, node_adjacency='full1', normalization='maxmin')))
    return _run_variants(ui, "Comparaison des variantes", variants, flow, args, 'compare')


def cmd_ablation(args: argparse.Namespace, ui: ConsoleUI) -> int:
    base = detector_config(args)
    flow = load_flow(require_artifact(args.flow))
    variants = [('complet', base)] + [(f"sans_{name}_gat", base.ablated([flag])) for name, flag in DISABLE_FLAGS.items()]
    return _run_variants(ui, "Ablation", variants, flow, args, 'ablation')


def cmd_sweep(args: argparse.Namespace, ui: ConsoleUI) -> int:
    base = detector_config(args)
    flow = load_flow(require_artifact(args.flow))
    settings = protocol_settings(args)
    grid = parse_list(args.grid)
    ui.print_header("Balayage d'hyperparamètre", f"{args.param} ∈ {grid}")
    frame = hyperparameter_sweep(base, args.param, grid, flow, split_ratios(args), settings)
    path = write_table(frame, os.path.join(output_dir(args), f"sweep_{args.param}.csv"),
                       header(base, swept=args.param, protocol_seed=settings.seed, delaystep=settings.delaystep))
    ui.show(ui.frame_table(frame, f"Balayage de {args.param}"))
    ui.written("Tableau", path)
    return 0


# ====== DÉCLARATION DES OPTIONS ======

def _detector_options(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("détecteur")
    group.add_argument("--window", type=int, help="Longueur de fenêtre W")
    group.add_argument("--hidden", type=int, help="Taille cachée D de la GRU")
    group.add_argument("--gru-layers", type=int, help="Nombre de couches GRU")
    group.add_argument("--epochs", type=int, help="Nombre d'époques")
    group.add_argument("--lr", type=float, help="Taux d'apprentissage Adam")
    group.add_argument("--seed", type=int, help="Graine d'initialisation")
    group.add_argument("--node-adjacency", choices=('full1', 'topk'), help="Adjacence des nœuds")
    group.add_argument("--topk-k", type=int, help="Voisins de l'adjacence topk")
    group.add_argument("--mode-adjacency", choices=('full1', 'correlation'), help="Adjacence des modes")
    group.add_argument("--normalization", choices=('zscore', 'maxmin'), help="Normalisation")
    group.add_argument("--disable", action="append", choices=tuple(DISABLE_FLAGS),
                       help="Module désactivé par ablation (répétable)")
    group.add_argument("--split", help="Proportions entraînement,validation,test (ex. 0.8,0.1,0.1)")


def _protocol_options(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("protocole")
    group.add_argument("--delaystep", type=int, help="Tolérance de détection")
    group.add_argument("--protocol-seed", type=int, help="Graine du protocole d'essais")
    group.add_argument("--type-mix", help="Types d'anomalies tirés (ex. 1,2,3,4)")
    group.add_argument("--p", type=float, help="Diviseur des changements lents")
    group.add_argument("--q", type=float, help="Diviseur des changements rapides")
    group.add_argument("--ramp", action="store_true", default=None, help="Décalage progressif (types 1 et 2)")
    group.add_argument("--workers", type=int, help="Essais évalués en parallèle")


def _ingest_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("raw", help="Relevé brut (texte ou .gz)")
    p.add_argument("--coords", help="Table des positions des motes")
    p.add_argument("--nodes", help="Liste explicite de motes (ex. 1,2,3)")
    p.add_argument("--node-count", type=int, help="Nombre de motes retenus")
    p.add_argument("--modes", help="Modes retenus (ex. temperature,humidity,voltage)")
    p.add_argument("--start", help="Date de début (AAAA-MM-JJ)")
    p.add_argument("--end", help="Date de fin exclue (AAAA-MM-JJ)")
    p.add_argument("--length", type=int, help="Nombre d'instants T")


def _model_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("checkpoint", help="Point de sauvegarde (chemin de base)")
    p.add_argument("flow", help="Flux préparé (chemin de base)")
    p.add_argument("--split", help="Proportions entraînement,validation,test")


def register_commands(parser: CommandParser) -> None:
    """
    Enregistre toutes les sous-commandes du détecteur.
    """
    def prepare(p):
        _ingest_options(p)
        p.add_argument("--out", help="Chemin de base du flux préparé")

    def train_options(p):
        p.add_argument("flow", help="Flux préparé (chemin de base)")
        _detector_options(p)
        p.add_argument("--out", help="Chemin de base du point de sauvegarde")

    def calibrate(p):
        _model_inputs(p)
        p.add_argument("--out", help="Fichier de seuil")

    def score(p):
        _model_inputs(p)
        p.add_argument("--threshold", help="Seuil (valeur ou fichier de seuil)")
        p.add_argument("--segment", choices=SEGMENTS, default='test', help="Segment à scorer")
        p.add_argument("--inject", help="Anomalie unique, ex. type=4,node=29,mode=voltage,t=70")
        p.add_argument("--out", help="Fichier de courbe")

    def evaluate(p):
        _model_inputs(p)
        p.add_argument("--threshold", help="Seuil (valeur ou fichier) ; recalibré si absent")
        _protocol_options(p)
        p.add_argument("--protocol", help="Protocole d'essais existant (JSON)")
        p.add_argument("--sweep", help="Balayage de sensibilité, ex. p=10,14,18,22")
        p.add_argument("--out", help="Répertoire des bilans")

    def gradcheck(p):
        p.add_argument("--seed", type=int, default=0, help="Graine du détecteur jouet")
        p.add_argument("--eps", type=float, default=1e-5, help="Pas des différences finies")
        p.add_argument("--tolerance", type=float, default=1e-4, help="Erreur relative maximale admise")

    def run_all(p):
        _ingest_options(p)
        _detector_options(p)
        _protocol_options(p)

    def scenarios(p):
        _model_inputs(p)
        p.add_argument("--threshold", help="Seuil (valeur ou fichier) ; recalibré si absent")
        p.add_argument("--out", help="Répertoire des courbes")

    def variants(p):
        p.add_argument("flow", help="Flux préparé (chemin de base)")
        _detector_options(p)
        _protocol_options(p)

    def sweep(p):
        variants(p)
        p.add_argument("--param", choices=('window', 'hidden'), required=True, help="Hyperparamètre balayé")
        p.add_argument("--grid", required=True, help="Valeurs, ex. 30,40,50,60,70")

    parser.register_command("prepare", cmd_prepare, "Aligne le relevé brut en flux préparé.", [], prepare)
    parser.register_command("train", cmd_train, "Entraîne le détecteur sur un flux préparé.", [], train_options)
    parser.register_command("calibrate", cmd_calibrate, "Calibre le seuil sur la validation.", [], calibrate)
    parser.register_command("score", cmd_score, "Écrit la courbe de score d'un segment.", [], score)
    parser.register_command("evaluate", cmd_evaluate, "Évalue le détecteur par essais d'injection.", ["eval"], evaluate)
    parser.register_command("gradcheck", cmd_gradcheck, "Vérifie les gradients du détecteur jouet.", [], gradcheck)
    parser.register_command("run-all", cmd_run_all, "Enchaîne prepare, train, calibrate et evaluate.", [], run_all)
    parser.register_command("scenarios", cmd_scenarios, "Courbes des injections de référence.", [], scenarios)
    parser.register_command("compare", cmd_compare, "Compare adjacences et normalisations.", [], variants)
    parser.register_command("ablation", cmd_ablation, "Mesure l'effet de chaque module par exclusion.", [], variants)
    parser.register_command("sweep", cmd_sweep, "Balaye la fenêtre ou la taille cachée.", [], sweep)
