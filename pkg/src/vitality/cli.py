"""``vitality`` command line: synth -> ingest -> influence -> features -> train/evaluate/ablate/predict -> plot.

Every stage reads the artifacts of earlier stages from the work directory and
writes its own there.  Exit codes: 0 success, 1 internal error, 2 missing
input, 3 validation failure.  Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import EventFormatError, iter_event_lines, iter_label_lines, load_timelines, parse_labels, \
    ingest_events, save_timelines, write_jsonl
from .evalx import (DEFAULT_COMBOS, ablate, classification_metrics, default_tau, harrell_c, reports_csv,
                    reports_table, uno_c)
from .features import FEATURE_NAMES, is_alive
from .influence import NormalizedWeight, SNAPSHOT_COLUMNS, write_snapshot_csv
from .pipeline import (MATRIX_COLUMNS, FeatureTable, InfluenceCache, feature_series, features_at, horizon_table,
                       read_table, split, survival_months, survival_table, write_table)
from .survival import (TrainConfig, ConfigError, fit, gbsa_fit, gbsa_predict_proba, load_model, predict_margin,
                       save_model, tune)
from .survival.tuning import write_trials
from .synthetic import default_scenario, generate_synthetic_corpus, Scenario
from .timeutil import format_month, month_index, months_between, parse_horizon, parse_instant, parse_month

log = logging.getLogger("vitality")

EXIT_INTERNAL, EXIT_MISSING, EXIT_INVALID = 1, 2, 3

# artifact -> stage that writes it
ARTIFACTS = {
    "events.jsonl": "synth",
    "labels.jsonl": "synth",
    "timelines.json": "ingest",
    "influence.csv": "influence",
    "influence_raw.csv": "influence",
    "features.csv": "features",
    "features_gbsa.csv": "features",
    "model_aft.json": "train",
    "model_gbsa.json": "train",
}
GBSA_DEFAULTS = {"min_samples_leaf": 10, "max_depth": 3}
PLOT_DEFAULT_FEATURES = ("latest_maintainer_activity_interval", "avg_response_time", "activity_deviation", "weight")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra

    def payload(self) -> dict:
        return {"error": self.kind, "message": str(self), **self.extra}


def missing(path: Path, stage: str | None = None) -> CliError:
    stage = stage or ARTIFACTS.get(path.name, "input")
    return CliError(EXIT_MISSING, "missing_input", f"{path} not found; run `vitality {stage}` first",
                    path=str(path), stage=stage)


def invalid(message: str, **extra) -> CliError:
    return CliError(EXIT_INVALID, "validation", message, **extra)


@dataclass
class RunConfig:
    workdir: Path
    seed: int
    fmt: str
    overrides: dict

    def path(self, name: str) -> Path:
        return self.workdir / name

    def need(self, name: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise missing(p)
        return p


def _load_overrides(value: str | None) -> dict:
    if not value:
        return {}
    text = value if value.lstrip().startswith("{") else None
    if text is None:
        p = Path(value)
        if not p.exists():
            raise missing(p, "config")
        text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise invalid(f"--config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise invalid("--config must hold a JSON object")
    return data


def _train_config(rc: RunConfig, kind: str) -> TrainConfig:
    flat = {k: v for k, v in rc.overrides.items() if k not in ("aft", "gbsa")}
    over = dict(GBSA_DEFAULTS) if kind == "gbsa" else {}
    over.update(flat)
    over.update(rc.overrides.get(kind, {}))
    over["seed"] = rc.seed
    try:
        return TrainConfig().with_overrides(over)
    except (TypeError, ValueError) as exc:
        raise invalid(f"bad training options: {exc}") from None


def _instant(value: str, flag: str):
    try:
        return parse_instant(value)
    except ValueError:
        raise invalid(f"{flag}: not an ISO-8601 date: {value!r}") from None


def _horizon(value: str) -> int:
    try:
        h = parse_horizon(value)
    except ValueError:
        raise invalid(f"--horizon must look like '6m', got {value!r}") from None
    if h <= 0:
        raise invalid("--horizon must be positive")
    return h


def _month(value: str, flag: str) -> int:
    try:
        return parse_month(value)
    except ValueError:
        raise invalid(f"{flag}: expected YYYY-MM, got {value!r}") from None


def _emit(rc: RunConfig, payload: dict) -> None:
    print(json.dumps({**payload, "seed": rc.seed}, sort_keys=True))


def _emit_rows(rc: RunConfig, rows: list[dict], columns) -> None:
    if rc.fmt == "json":
        print(json.dumps(rows, sort_keys=True))
    elif rc.fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        sys.stdout.write(buf.getvalue())
    else:
        widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) for c in columns}
        print("  ".join(c.ljust(widths[c]) for c in columns))
        for r in rows:
            print("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in columns))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def _write_rows(path: Path, rows: list[dict], columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: ("" if r.get(c) is None else repr(r[c]) if isinstance(r[c], float) else r[c])
                        for c in columns})


# -- stages ------------------------------------------------------------------------

def cmd_synth(rc: RunConfig, args) -> None:
    scenario = default_scenario()
    if args.scenario:
        p = Path(args.scenario)
        if not p.exists():
            raise missing(p, "scenario")
        scenario = json.loads(p.read_text(encoding="utf-8"))
    try:
        Scenario.from_dict(scenario)
    except (KeyError, ValueError) as exc:
        raise invalid(f"bad scenario: {exc}") from None
    tls = generate_synthetic_corpus(scenario, rc.seed)
    rc.workdir.mkdir(parents=True, exist_ok=True)
    write_jsonl(rc.path("events.jsonl"), iter_event_lines(tls.values()))
    write_jsonl(rc.path("labels.jsonl"), iter_label_lines(tls.values()))
    _emit(rc, {"command": "synth", "repos": len(tls), "events": sum(len(t.events) for t in tls.values()),
               "observation_end": scenario.get("observation_end", "2021-01-01")})


def cmd_ingest(rc: RunConfig, args) -> None:
    events = Path(args.events) if args.events else rc.path("events.jsonl")
    labels = Path(args.labels) if args.labels else rc.path("labels.jsonl")
    for p in (events, labels):
        if not p.exists():
            raise missing(p, "synth" if p.parent == rc.workdir else "input")
    obs_end = _instant(args.observation_end, "--observation-end") if args.observation_end else None
    try:
        with open(labels, encoding="utf-8") as fh:
            label_map = parse_labels(fh)
        with open(events, encoding="utf-8") as fh:
            tls = ingest_events(fh, label_map, min_stars=args.min_stars, observation_end=obs_end,
                                on_error="skip" if args.skip_bad_lines else "raise")
    except EventFormatError as exc:
        raise invalid(str(exc), line=exc.lineno) from None
    except ValueError as exc:
        raise invalid(str(exc)) from None
    if not tls:
        raise invalid("no repositories left after ingestion")
    if obs_end is None:
        obs_end = max(t.events[-1].timestamp for t in tls.values())
    rc.workdir.mkdir(parents=True, exist_ok=True)
    save_timelines(rc.path("timelines.json"), tls, obs_end)
    ceased = sum(t.label.ceased for t in tls.values())
    _emit(rc, {"command": "ingest", "repos": len(tls), "ceased": ceased,
               "observation_end": obs_end.strftime("%Y-%m-%dT%H:%M:%SZ")})


def _reference(args):
    return _instant(args.t, "--t"), _horizon(args.horizon)


def _protocol_months(tls, obs_end, T, as_of) -> list[int]:
    months = {survival_months(t, obs_end) for t in tls.values()}
    months.add(month_index(T) - 1)
    if as_of is not None:
        months.add(as_of)
    return sorted(months)


def cmd_influence(rc: RunConfig, args) -> None:
    tls, obs_end = load_timelines(rc.need("timelines.json"))
    T, _ = _reference(args)
    as_of = _month(args.as_of, "--as-of") if args.as_of else None
    cache = InfluenceCache(tls)
    rows, raw_rows = [], []
    for m in _protocol_months(tls, obs_end, T, as_of):
        norm = cache.normalized(m)
        hits = cache.hits(m)
        rows.extend((m, r, norm[r]) for r in sorted(norm))
        raw_rows.extend((m, r, hits[r]) for r in sorted(hits))
    write_snapshot_csv(rc.path("influence.csv"), rows)
    with open(rc.path("influence_raw.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "repo_id", "hits_score"])
        for m, r, v in raw_rows:
            w.writerow([format_month(m), r, repr(v)])
    _emit(rc, {"command": "influence", "months": len({m for m, _, _ in rows}), "rows": len(rows)})


def _load_influence(rc: RunConfig, tls) -> tuple[InfluenceCache, set[int]]:
    norm: dict[int, dict] = {}
    hits: dict[int, dict] = {}
    with open(rc.need("influence.csv"), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SNAPSHOT_COLUMNS:
            raise invalid("influence.csv has an unexpected header")
        for row in reader:
            m = parse_month(row["month"])
            norm.setdefault(m, {})[row["repo_id"]] = NormalizedWeight(
                row["repo_id"], float(row["weight"]), float(row["weight_rank_pct"]), float(row["weight_zscore"]))
    with open(rc.need("influence_raw.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            hits.setdefault(parse_month(row["month"]), {})[row["repo_id"]] = float(row["hits_score"])
    cache = InfluenceCache(tls)
    cache.preload(norm, hits)
    return cache, set(norm) & set(hits)


def cmd_features(rc: RunConfig, args) -> None:
    tls, obs_end = load_timelines(rc.need("timelines.json"))
    T, h = _reference(args)
    as_of = _month(args.as_of, "--as-of") if args.as_of else None
    cache, have = _load_influence(rc, tls)
    need = set(_protocol_months(tls, obs_end, T, as_of))
    if not need <= have:
        absent = sorted(format_month(m) for m in need - have)
        raise CliError(EXIT_MISSING, "missing_input",
                       f"influence.csv lacks months {absent[:5]}; rerun `vitality influence` with the same flags",
                       path=str(rc.path("influence.csv")), stage="influence")
    st = survival_table(tls, obs_end, cache)
    ht = horizon_table(tls, T, h, cache)
    write_table(rc.path("features.csv"), st)
    write_table(rc.path("features_gbsa.csv"), ht)
    out = {"command": "features", "survival_samples": len(st), "events": int(st.events.sum()),
           "gbsa_samples": len(ht), "gbsa_positive": int(ht.labels.sum())}
    if as_of is not None:
        ids = [r for r in sorted(tls) if is_alive(tls[r], as_of)]
        X = np.array([features_at(tls[r], as_of, cache).values(MATRIX_COLUMNS) for r in ids]).reshape(len(ids), -1)
        name = f"features_{format_month(as_of)}.csv"
        write_table(rc.path(name), FeatureTable(ids, [as_of] * len(ids), X))
        out["snapshot"] = name
    _emit(rc, out)


def _survival_data(rc: RunConfig):
    t = read_table(rc.need("features.csv"))
    if t.durations is None:
        raise invalid("features.csv has no duration/event columns")
    missing_cols = [n for n in FEATURE_NAMES if n not in t.names]
    if missing_cols:
        raise invalid(f"features.csv lacks columns {missing_cols}")
    return t


def _gbsa_data(rc: RunConfig):
    t = read_table(rc.need("features_gbsa.csv"))
    if t.labels is None:
        raise invalid("features_gbsa.csv has no label column")
    return t


def cmd_train(rc: RunConfig, args) -> None:
    st = _survival_data(rc)
    ht = _gbsa_data(rc)
    names = list(FEATURE_NAMES)
    X = st.columns(names)
    tr, _ = split(len(st), rc.seed)
    aft_cfg = _train_config(rc, "aft")
    gb_cfg = _train_config(rc, "gbsa")
    Xh = ht.columns(names)
    trh, _ = split(len(ht), rc.seed, ht.labels)
    out = {"command": "train"}
    if args.tune:
        try:
            aft_cfg, trials = tune(X[tr], (st.durations[tr], st.events[tr]), None, args.tune, rc.seed, "aft", aft_cfg, names)
            write_trials(rc.path("trials_aft.jsonl"), trials)
            gb_cfg, trials = tune(Xh[trh], ht.labels[trh], None, args.tune, rc.seed, "gbsa", gb_cfg, names)
            write_trials(rc.path("trials_gbsa.jsonl"), trials)
        except ConfigError as exc:
            raise invalid(str(exc)) from None
        out["tuned"] = args.tune
    try:
        aft = fit(X[tr], st.durations[tr], st.events[tr], aft_cfg, names)
        gb = gbsa_fit(Xh[trh], ht.labels[trh], gb_cfg, names)
    except ValueError as exc:
        raise invalid(str(exc)) from None
    aft.meta = {"seed": rc.seed, "config": aft_cfg.to_dict(), "n_train": int(len(tr))}
    gb.meta = {"seed": rc.seed, "config": gb_cfg.to_dict(), "n_train": int(len(trh)),
               "as_of": format_month(ht.as_of[0]) if len(ht) else None}
    save_model(aft, rc.path("model_aft.json"))
    save_model(gb, rc.path("model_gbsa.json"))
    out.update({"aft_trees": len(aft.trees), "gbsa_trees": len(gb.trees)})
    _emit(rc, out)


def _horizon_durations(tls, obs_end, ids, T):
    d, e = [], []
    for r in ids:
        lab = tls[r].label
        if lab.ceased and lab.cessation_time <= obs_end:
            d.append(months_between(T, lab.cessation_time))
            e.append(True)
        else:
            d.append(months_between(T, obs_end))
            e.append(False)
    return np.array(d), np.array(e, dtype=bool)


REPORT_COLUMNS = ("model", "n_test", "harrell_c", "uno_c", "tau", "accuracy", "precision", "recall", "f1",
                  "balanced_accuracy", "seed")


def cmd_evaluate(rc: RunConfig, args) -> None:
    st = _survival_data(rc)
    ht = _gbsa_data(rc)
    aft = load_model(rc.need("model_aft.json"))
    gb = load_model(rc.need("model_gbsa.json"))
    tls, obs_end = load_timelines(rc.need("timelines.json"))
    T, _ = _reference(args)
    _, te = split(len(st), rc.seed)
    X = st.columns(aft.feature_names)
    risk = -predict_margin(aft, X[te])
    tau = default_tau(st.durations[te])
    rows = [{
        "model": "aft", "n_test": int(len(te)),
        "harrell_c": harrell_c(risk, st.durations[te], st.events[te]),
        "uno_c": uno_c(risk, st.durations[te], st.events[te], tau), "tau": tau, "seed": rc.seed,
    }]
    _, teh = split(len(ht), rc.seed, ht.labels)
    p = gbsa_predict_proba(gb, ht.columns(gb.feature_names)[teh])
    cm = classification_metrics(p >= args.threshold, ht.labels[teh])
    d, e = _horizon_durations(tls, obs_end, [ht.repo_ids[i] for i in teh], T)
    row = {"model": "gbsa", "n_test": int(len(teh)), "accuracy": cm.accuracy, "precision": cm.precision,
           "recall": cm.recall, "f1": cm.f1, "balanced_accuracy": cm.balanced_accuracy, "seed": rc.seed}
    if e.any():
        gtau = default_tau(d)
        row.update(harrell_c=harrell_c(p, d, e), uno_c=uno_c(p, d, e, gtau), tau=gtau)
    rows.append(row)
    _write_rows(rc.path("report.csv"), rows, REPORT_COLUMNS)
    _emit_rows(rc, rows, REPORT_COLUMNS)


def cmd_ablate(rc: RunConfig, args) -> None:
    st = _survival_data(rc)
    combos = [c.strip() for c in args.combos.split(",")] if args.combos else list(DEFAULT_COMBOS)
    try:
        reports = ablate(st.X, st.names, st.durations, st.events, combos, _train_config(rc, "aft"), rc.seed)
    except ConfigError as exc:
        raise invalid(str(exc)) from None
    rc.path("ablation.csv").write_text(reports_csv(reports), encoding="utf-8")
    rc.path("ablation.txt").write_text(reports_table(reports), encoding="utf-8")
    if rc.fmt == "table":
        sys.stdout.write(reports_table(reports))
    else:
        _emit_rows(rc, [r.to_row() for r in reports], list(reports[0].to_row()))


def cmd_predict(rc: RunConfig, args) -> None:
    tls, _ = load_timelines(rc.need("timelines.json"))
    gb = load_model(rc.need("model_gbsa.json"))
    aft_path = rc.path("model_aft.json")
    aft = load_model(aft_path) if aft_path.exists() else None
    T, h = _reference(args)
    ht = horizon_table(tls, T, h, InfluenceCache(tls))
    if not len(ht):
        raise invalid(f"no repositories alive at {args.t}")
    prob = gbsa_predict_proba(gb, ht.columns(gb.feature_names))
    life = predict_margin(aft, ht.columns(aft.feature_names)) if aft is not None else [None] * len(ht)
    order = sorted(range(len(ht)), key=lambda i: (-prob[i], ht.repo_ids[i]))
    rows = [{"repo_id": ht.repo_ids[i], "risk": float(prob[i]), "predicted": int(prob[i] >= args.threshold),
             "aft_log_months": None if life[i] is None else float(life[i])} for i in order]
    cols = ("repo_id", "risk", "predicted", "aft_log_months")
    _write_rows(rc.path("predictions.csv"), rows, cols)
    _emit(rc, {"command": "predict", "t": args.t, "horizon_months": h, "repos": len(rows),
               "flagged": sum(r["predicted"] for r in rows)})


# -- plot ---------------------------------------------------------------------------

def minmax_scale(values, lo: float = 0.1, hi: float = 1.0) -> list[float]:
    """Map to ``[lo, hi]``; a constant series maps to the midpoint.  NaN stays NaN."""
    vals = [float(v) for v in values]
    present = [v for v in vals if not math.isnan(v)]
    if not present:
        return vals
    vmin, vmax = min(present), max(present)
    if vmax == vmin:
        mid = (lo + hi) / 2
        return [v if math.isnan(v) else mid for v in vals]
    out = []
    for v in vals:
        if math.isnan(v):
            out.append(v)
        else:
            f = (v - vmin) / (vmax - vmin)
            out.append(lo * (1.0 - f) + hi * f)
    return out


_PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")


def render_svg(months: list[int], series: dict[str, list[float]], title: str) -> str:
    W, H, pad = 720, 360, 48
    n = max(1, len(months) - 1)

    def x(i):
        return pad + (W - 2 * pad) * i / n

    def y(v):
        return H - pad - (H - 2 * pad) * v

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{title}</text>',
             f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>']
    for v in (0.1, 0.55, 1.0):
        parts.append(f'<text x="8" y="{y(v) + 4:.2f}" font-family="sans-serif" font-size="10">{v:g}</text>')
    for i in (0, len(months) - 1):
        if i >= 0:
            parts.append(f'<text x="{x(i) - 18:.2f}" y="{H - pad + 16}" font-family="sans-serif" '
                         f'font-size="10">{format_month(months[i])}</text>')
    for k, (name, vals) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{x(i):.2f},{y(v):.2f}" for i, v in enumerate(vals) if not math.isnan(v))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{W - pad - 200}" y="{pad + 14 * k}" font-family="sans-serif" font-size="10" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot(rc: RunConfig, args) -> None:
    names = [f.strip() for f in args.features.split(",")] if args.features else list(PLOT_DEFAULT_FEATURES)
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown or not names:
        raise invalid(f"unknown feature(s) {unknown}", valid=list(FEATURE_NAMES))
    tls, _ = load_timelines(rc.need("timelines.json"))
    tl = tls.get(args.repo)
    if tl is None:
        raise invalid(f"unknown repository {args.repo!r}")
    lo, hi = tl.first_month, tl.last_month
    if args.range:
        try:
            a, b = args.range.split(":")
        except ValueError:
            raise invalid("--range must look like YYYY-MM:YYYY-MM") from None
        lo, hi = max(lo, _month(a, "--range")), min(hi, _month(b, "--range"))
    if hi < lo:
        raise invalid("--range does not overlap the repository's lifetime")
    months = list(range(lo, hi + 1))
    raw = feature_series(tl, names, months, InfluenceCache(tls))
    scaled = {n: minmax_scale(raw[n]) for n in names}
    base = f"plot_{args.repo}"
    with open(rc.path(base + ".csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "feature", "value", "normalized"])
        for n in names:
            for m, v, s in zip(months, raw[n], scaled[n]):
                w.writerow([format_month(m), n, "" if math.isnan(v) else repr(v), "" if math.isnan(s) else repr(s)])
    rc.path(base + ".svg").write_text(render_svg(months, scaled, args.repo), encoding="utf-8")
    _emit(rc, {"command": "plot", "repo": args.repo, "features": names, "months": len(months),
               "csv": base + ".csv", "svg": base + ".svg"})


# -- argument parsing ------------------------------------------------------------------

COMMANDS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "influence": cmd_influence, "features": cmd_features,
    "train": cmd_train, "evaluate": cmd_evaluate, "ablate": cmd_ablate, "predict": cmd_predict, "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workdir", default=os.environ.get("VITALITY_WORKDIR", "."),
                        help="artifact directory (default: $VITALITY_WORKDIR or .)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON object or file with training overrides")
    common.add_argument("--format", dest="fmt", choices=("json", "csv", "table"), default="table")
    common.add_argument("--t", default="2018-07-01", help="reference date T")
    common.add_argument("--horizon", default="6m", help="prediction horizon, e.g. 6m")
    common.add_argument("--as-of", help="extra snapshot month YYYY-MM")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="vitality", description="Repository maintenance-cessation risk engine")
    ap.add_argument("--version", action="version", version=f"vitality {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate the bundled synthetic corpus")
    p.add_argument("--scenario", help="scenario JSON (default: bundled)")

    p = sub.add_parser("ingest", parents=[common], help="parse events and labels into timelines")
    p.add_argument("--events")
    p.add_argument("--labels")
    p.add_argument("--min-stars", type=int)
    p.add_argument("--observation-end")
    p.add_argument("--skip-bad-lines", action="store_true")

    sub.add_parser("influence", parents=[common], help="monthly influence snapshots")
    sub.add_parser("features", parents=[common], help="survival and horizon feature tables")
    p = sub.add_parser("train", parents=[common], help="fit the AFT and horizon models")
    p.add_argument("--tune", type=int, default=0, metavar="BUDGET", help="random-search trials per model")
    p = sub.add_parser("evaluate", parents=[common], help="held-out metrics")
    p.add_argument("--threshold", type=float, default=0.5)
    p = sub.add_parser("ablate", parents=[common], help="feature-group ablation table")
    p.add_argument("--combos", help="comma-separated combos, e.g. S,S+U,All")
    p = sub.add_parser("predict", parents=[common], help="per-repository risk at T")
    p.add_argument("--threshold", type=float, default=0.5)
    p = sub.add_parser("plot", parents=[common], help="normalised feature series for one repository")
    p.add_argument("--repo", required=True)
    p.add_argument("--features", help="comma-separated feature names")
    p.add_argument("--range", help="YYYY-MM:YYYY-MM")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed < 0:
            raise invalid("--seed must be non-negative")
        rc = RunConfig(Path(args.workdir), args.seed, args.fmt, _load_overrides(args.config))
        COMMANDS[args.command](rc, args)
        return 0
    except CliError as exc:
        print(json.dumps(exc.payload(), sort_keys=True), file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - last-resort JSON error
        log.debug("internal error", exc_info=True)
        print(json.dumps({"error": "internal", "message": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
