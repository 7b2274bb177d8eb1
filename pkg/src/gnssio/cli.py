"""Command-line pipeline: synth | ingest | train | predict | evaluate | export-roc
| export-scatter | containment-report.

Every command writes its resolved configuration next to its outputs
(run_config.json) so any run can be reproduced from the output directory alone.
Diagnostics go to stderr; data goes to files.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import evaluation, features, ingest, ml, modelio, report, synth, threshold
from .errors import FeatureModeMismatch, GnssioError, InvalidConfig
from .temporal import WindowConfig, aggregate_window
from .types import Constellation, FeatureMode, Group, Label, MethodTag

_METHODS = {m.value: m for m in MethodTag}
_MODES = {"gnss": FeatureMode.GNSS_ONLY, "wifi": FeatureMode.WIFI_ONLY, "fused": FeatureMode.FUSED}
_SCENARIOS = {s.value: s for s in evaluation.Scenario}


def _write_run_config(out_dir: Path, command: str, resolved: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **{k: str(v) if isinstance(v, Path) else v for k, v in resolved.items()}}
    (out_dir / "run_config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _read_json_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        loaded = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from None
    if not isinstance(loaded, dict):
        raise InvalidConfig(f"config {path} must hold a JSON object")
    return loaded


def _load_sessions(manifest_path: str) -> list[ingest.Session]:
    entries = ingest.load_manifest(manifest_path)
    sessions = []
    for entry in entries:
        session = ingest.load_session(entry)
        if entry.wifi_path is not None:
            features.attach_wifi_features(session, ingest.load_wifi_scans(entry.wifi_path))
        sessions.append(session)
    return sessions


def _load_bare_session_epochs(
    session_path: str, wifi_path: Optional[str]
) -> list[ingest.Epoch]:
    """Parse/clean/group a session CSV that has no manifest entry (predict path)."""
    records, row_errors = ingest.parse_session_file(session_path)
    for err in row_errors:
        print(f"warning: {session_path}: {err}", file=sys.stderr)
    if not records:
        return []
    start = min(r.timestamp_ms for r in records)
    cleaned, _ = ingest.clean_records(records, start)
    epochs = ingest.group_into_epochs(cleaned)
    if wifi_path:
        scans = ingest.load_wifi_scans(wifi_path)
        epochs = [
            ep.with_wifi(features.compute_wifi_epoch_features(scans[ep.timestamp_ms]))
            if ep.timestamp_ms in scans
            else ep
            for ep in epochs
        ]
    return epochs


def _train_bundle(
    method: MethodTag,
    mode: FeatureMode,
    train_sessions: Sequence[ingest.Session],
    seed: int,
    hyper: dict,
) -> modelio.TrainedModel:
    if method is MethodTag.THRESHOLD:
        if mode is not FeatureMode.GNSS_ONLY:
            raise FeatureModeMismatch("the threshold method only supports gnss features")
        table = threshold.train_threshold_table(
            train_sessions,
            sat_count_prior=int(hyper.get("sat_count_prior", threshold.DEFAULT_SAT_COUNT_PRIOR)),
            min_samples_per_key=int(
                hyper.get("min_samples_per_key", threshold.DEFAULT_MIN_SAMPLES_PER_KEY)
            ),
        )
        return modelio.TrainedModel(method=method, feature_mode=mode, table=table)

    x, y = features.collect_training_vectors(train_sessions, mode)
    normalizer = features.fit_normalizer(x)
    xn = features.apply_normalizer(normalizer, x)
    tree_hp = ml.TreeHyperparams(
        max_depth=int(hyper.get("max_depth", 12)),
        min_leaf_size=int(hyper.get("min_leaf_size", 5)),
    )
    if method is MethodTag.DT:
        model: modelio.MlModel = ml.train_tree(xn, y, tree_hp)
    elif method is MethodTag.RF:
        model = ml.train_forest(
            xn,
            y,
            ml.ForestHyperparams(
                n_trees=int(hyper.get("n_trees", 100)),
                features_per_split=hyper.get("features_per_split"),
                bootstrap=bool(hyper.get("bootstrap", True)),
                seed=seed,
                tree=tree_hp,
            ),
        )
    else:
        model = ml.train_svm(
            xn,
            y,
            ml.SvmHyperparams(
                regularization=float(hyper.get("regularization", 1e-4)),
                epochs=int(hyper.get("epochs", 30)),
                seed=seed,
                learning_rate=hyper.get("learning_rate"),
            ),
        )
    return modelio.TrainedModel(
        method=method, feature_mode=mode, model=model, normalizer=normalizer
    )


def _training_report(bundle: modelio.TrainedModel, out_dir: Path) -> None:
    lines = [f"method: {bundle.method.value}", f"feature_mode: {bundle.feature_mode.value}"]
    if bundle.method is MethodTag.THRESHOLD:
        table = bundle.table
        lines.append(f"trained keys: {len(table.entries)}")
        lines.append(f"fallback mean-CNR threshold: {table.mean_cnr_fallback_threshold:.2f} dB/Hz")
        lines.append(f"satellite-count prior: <= {table.sat_count_prior}")
        with (out_dir / "threshold_entries.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["constellation", "svid", "frequency_mhz", "threshold_dbhz",
                 "train_accuracy", "n_indoor", "n_outdoor"]
            )
            for key in sorted(table.entries, key=features.SatelliteKey.sort_key):
                e = table.entries[key]
                writer.writerow(
                    [key.constellation.name, key.svid, key.frequency_bucket,
                     f"{e.threshold:.2f}", f"{e.train_accuracy:.4f}", e.n_indoor, e.n_outdoor]
                )
    elif bundle.method is MethodTag.DT:
        lines.append(f"nodes: {bundle.model.n_nodes}")
    elif bundle.method is MethodTag.RF:
        lines.append(f"trees: {bundle.model.n_trees}")
        lines.append(f"features per split: {bundle.model.features_per_split}")
        lines.append(f"total nodes: {sum(t.n_nodes for t in bundle.model.trees)}")
    else:
        lines.append(f"epochs trained: {bundle.model.epochs_trained}")
        lines.append(f"regularization: {bundle.model.regularization}")
    (out_dir / "training_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    overrides = _read_json_config(args.config)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.sessions_per_class is not None:
        overrides["n_sessions_per_class"] = args.sessions_per_class
    if args.session_minutes is not None:
        overrides["session_minutes"] = args.session_minutes
    if args.wifi:
        overrides["wifi_enabled"] = True
    if args.near_window_mix is not None:
        overrides["near_window_mix"] = args.near_window_mix
    cfg = synth.synth_config_from_dict(overrides)
    _write_run_config(out_dir, "synth", {**overrides, "containment": args.containment,
                                         "group": args.group})
    if args.containment:
        kind = args.containment.replace("-", "_")
        session_path, segments_path = synth.generate_containment_files(cfg, kind, out_dir)
        print(f"wrote {session_path} and {segments_path}")
    else:
        entries = synth.generate_sessions(cfg, out_dir, group=Group.parse(args.group))
        print(f"wrote {len(entries)} sessions under {out_dir} (manifest.csv)")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    _write_run_config(out_dir, "ingest", {"manifest": args.manifest})
    sessions = _load_sessions(args.manifest)
    with (out_dir / "ingest_report.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["path", "label", "group", "rows", "row_errors", "removed_startup",
             "removed_zero_cnr", "removed_missing_cnr", "removed_missing_frequency", "epochs"]
        )
        for s in sessions:
            st = s.stats
            writer.writerow(
                [s.entry.file_path, s.label.value, s.group.value, st.n_rows,
                 len(st.row_errors), st.cleaning.removed_startup, st.cleaning.removed_zero_cnr,
                 st.cleaning.removed_missing_cnr, st.cleaning.removed_missing_frequency,
                 st.n_epochs]
            )
    total_epochs = sum(s.stats.n_epochs for s in sessions)
    print(f"{len(sessions)} sessions, {total_epochs} epochs -> {out_dir / 'ingest_report.csv'}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    method = _METHODS[args.method]
    mode = _MODES[args.feature_mode]
    scenario = _SCENARIOS[args.scenario]
    hyper = _read_json_config(args.config)
    _write_run_config(out_dir, "train", {
        "manifest": args.manifest, "method": args.method, "feature_mode": args.feature_mode,
        "scenario": args.scenario, "seed": args.seed, "split_seed": args.split_seed,
        "hyperparameters": hyper,
    })
    sessions = _load_sessions(args.manifest)
    split = evaluation.make_split(sessions, scenario, seed=args.split_seed)
    bundle = _train_bundle(method, mode, split.train_sessions, args.seed, hyper)
    model_path = out_dir / "model.txt"
    modelio.save_model(bundle, model_path)
    _training_report(bundle, out_dir)
    print(f"trained {method.value} on {len(split.train_sessions)} sessions -> {model_path}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    _write_run_config(out_dir, "predict", {
        "model": args.model, "session": args.session, "wifi": args.wifi,
        "window_seconds": args.window_seconds,
    })
    bundle = modelio.load_model(args.model)
    epochs = _load_bare_session_epochs(args.session, args.wifi)
    traces = [bundle.predict_epoch(ep) for ep in epochs]
    windows = aggregate_window(traces, WindowConfig(args.window_seconds))
    pred_path = out_dir / "predictions.csv"
    report.write_predictions_csv(traces, windows, args.window_seconds, pred_path)
    if not args.no_figures:
        report.plot_prediction_timeline(
            traces, windows, args.window_seconds, out_dir / "predictions.png"
        )
    n_indoor = sum(1 for t in traces if t.final_label is Label.INDOOR)
    print(f"{len(traces)} epochs ({n_indoor} indoor), {len(windows)} windows -> {pred_path}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    scenario = _SCENARIOS[args.scenario]
    _write_run_config(out_dir, "evaluate", {
        "manifest": args.manifest, "model": args.model, "scenario": args.scenario,
        "window_seconds": args.window_seconds, "split_seed": args.split_seed,
        "feature_mode": args.feature_mode,
    })
    bundle = modelio.load_model(args.model)
    sessions = _load_sessions(args.manifest)
    split = evaluation.make_split(sessions, scenario, seed=args.split_seed)
    window_cfg = WindowConfig(args.window_seconds)
    result = evaluation.evaluate(
        bundle, split, window_cfg,
        feature_mode=_MODES[args.feature_mode] if args.feature_mode else None,
    )

    tag = (bundle.method.value, scenario.value, args.window_seconds, bundle.feature_mode.value)
    report.write_metrics_csv(result, out_dir / "metrics.csv", *tag)
    text = report.format_metrics_text(result, *tag)
    (out_dir / "metrics.txt").write_text(text, encoding="utf-8")
    if not args.no_figures:
        report.plot_accuracy_bars(
            result, out_dir / "metrics.png",
            f"{bundle.method.value} / {scenario.value} / {args.window_seconds}s",
        )
    sys.stdout.write(text)
    return 0


def cmd_export_roc(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    _write_run_config(out_dir, "export-roc", {
        "manifest": args.manifest, "feature": args.feature,
        "constellation": args.constellation, "svid": args.svid, "frequency": args.frequency,
    })
    sessions = _load_sessions(args.manifest)
    if args.feature == "per-satellite":
        if args.constellation is None or args.svid is None or args.frequency is None:
            raise InvalidConfig(
                "per-satellite ROC needs --constellation, --svid and --frequency"
            )
        key = features.SatelliteKey(
            constellation=Constellation.parse(args.constellation),
            svid=args.svid,
            frequency_bucket=round(args.frequency * 10.0) / 10.0,
        )
        feature = key
        name = f"{key.constellation.name}_svid{key.svid}_{key.frequency_bucket}MHz"
    else:
        feature = (
            evaluation.RocFeature.MEAN_CNR
            if args.feature == "mean-cnr"
            else evaluation.RocFeature.SATELLITE_COUNT
        )
        name = feature.value
    points = evaluation.export_roc(sessions, feature)
    csv_path = out_dir / f"roc_{name}.csv"
    report.write_roc_csv(points, csv_path)
    if not args.no_figures:
        report.plot_roc(points, out_dir / f"roc_{name}.png", f"ROC: {name}")
    print(f"{len(points)} thresholds -> {csv_path}")
    return 0


def cmd_export_scatter(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    _write_run_config(out_dir, "export-scatter", {"manifest": args.manifest, "label": args.label})
    sessions = _load_sessions(args.manifest)
    wanted = [Label.INDOOR, Label.OUTDOOR] if args.label == "both" else [Label.parse(args.label)]
    rows_by_label = {}
    for label in wanted:
        rows = evaluation.export_cnr_elevation(sessions, label)
        rows_by_label[label.value] = rows
        report.write_scatter_csv(rows, out_dir / f"cnr_elevation_{label.value}.csv")
    if not args.no_figures:
        report.plot_cnr_elevation(rows_by_label, out_dir / "cnr_elevation.png")
    total = sum(len(v) for v in rows_by_label.values())
    print(f"{total} scatter rows -> {out_dir}")
    return 0


def cmd_containment_report(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    _write_run_config(out_dir, "containment-report", {
        "model": args.model, "session": args.session, "segments": args.segments,
    })
    bundle = modelio.load_model(args.model)
    epochs = _load_bare_session_epochs(args.session, None)

    spans = []
    with Path(args.segments).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            spans.append((row["tag"], int(row["start_ms"]), int(row["end_ms"])))
    segments = [
        (tag, [e for e in epochs if start <= e.timestamp_ms < end])
        for tag, start, end in spans
    ]
    stats = evaluation.containment_report(bundle.predict_epoch, segments)
    report.write_containment_csv(stats, out_dir / "containment.csv")
    text = report.format_containment_text(stats)
    (out_dir / "containment.txt").write_text(text, encoding="utf-8")
    if not args.no_figures:
        report.plot_containment(stats, out_dir / "containment.png")
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnssio",
        description="Indoor/outdoor classification from per-satellite GNSS observations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out-dir", required=True, help="directory for outputs")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("synth", help="generate labeled synthetic sessions")
    add_common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="JSON file with generator settings")
    p.add_argument("--sessions-per-class", type=int, default=None)
    p.add_argument("--session-minutes", type=float, default=None)
    p.add_argument("--wifi", action="store_true", help="also emit Wi-Fi scan files")
    p.add_argument("--near-window-mix", type=float, default=None)
    p.add_argument("--group", choices=["A", "B"], default="A")
    p.add_argument("--containment", choices=["under-bridge", "near-window"], default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse and clean sessions, report counts")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a classifier on the scenario's training side")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", choices=sorted(_METHODS), required=True)
    p.add_argument("--feature-mode", choices=sorted(_MODES), default="gnss")
    p.add_argument("--scenario", choices=sorted(_SCENARIOS), default="s1")
    p.add_argument("--seed", type=int, default=0, help="training seed (rf/svm)")
    p.add_argument("--split-seed", type=int, default=0, help="scenario split seed")
    p.add_argument("--config", help="JSON file with hyperparameter overrides")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify one session CSV with a trained model")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--wifi", default=None, help="matching Wi-Fi scan CSV")
    p.add_argument("--window-seconds", type=int, default=5)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model on the scenario's test side")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", choices=sorted(_SCENARIOS), default="s1")
    p.add_argument("--window-seconds", type=int, default=5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--feature-mode", choices=sorted(_MODES), default=None,
                   help="assert the model's feature mode")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-roc", help="export a ROC threshold table (CSV + figure)")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--feature", choices=["mean-cnr", "satellite-count", "per-satellite"],
                   default="mean-cnr")
    p.add_argument("--constellation", default=None)
    p.add_argument("--svid", type=int, default=None)
    p.add_argument("--frequency", type=float, default=None, help="carrier frequency in MHz")
    p.set_defaults(func=cmd_export_roc)

    p = sub.add_parser("export-scatter", help="export CNR vs elevation scatter data")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--label", choices=["indoor", "outdoor", "both"], default="both")
    p.set_defaults(func=cmd_export_scatter)

    p = sub.add_parser("containment-report", help="per-segment stats and prediction rates")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--segments", required=True, help="CSV of tag,start_ms,end_ms spans")
    p.set_defaults(func=cmd_containment_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GnssioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
