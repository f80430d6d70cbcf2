"""Command-line entry point: ``rhythmnmf <command> [options]``.

Exit codes: 0 success, 1 usage/config error, 2 data/format error,
3 numerical degeneracy.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np
import yaml

from . import exports, ingest, nmf, rankselect, sleep, stats, synthgen
from .config import PipelineConfig, config_from_dict, dump_config, load_config
from .errors import ConfigError, FormatError, ParameterError, RhythmError

logger = logging.getLogger("rhythmnmf")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_events(path: str, cfg: PipelineConfig) -> ingest.ParseResult:
    try:
        with open(path, "rb") as fh:
            return ingest.parse_events(fh, max_malformed=cfg.ingest.max_malformed)
    except OSError as exc:
        raise FormatError(f"cannot read events file {path}: {exc}") from exc


def _filtered_logs(path: str, cfg: PipelineConfig):
    parsed = _read_events(path, cfg)
    if not parsed.logs:
        raise FormatError(f"{path}: no events")
    kept, report = ingest.filter_participants(parsed.logs, cfg.filter, cfg.window)
    return parsed, kept, report


# commands -----------------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig, args) -> exports.OutputBatch:
    spec = cfg.population_spec()
    logs, truth = synthgen.generate_population(spec)
    out = exports.OutputBatch(cfg.out_dir)
    out.add("events.csv", ingest.format_events(logs))
    out.add("ground_truth.json", json.dumps(truth.to_dict(), indent=2) + "\n")
    logger.info("generated %d persons", len(logs))
    return out


def cmd_ingest(cfg: PipelineConfig, args) -> exports.OutputBatch:
    parsed, kept, report = _filtered_logs(args.events, cfg)
    logger.info("retained %d of %d persons", report.retained, report.total)
    if not kept:
        raise FormatError("no person passed the participant filters")
    kept = sorted(kept, key=lambda log: log.person_id)
    rhythms = [ingest.build_weekly_rhythm(log, cfg.window) for log in kept]
    X = np.vstack([r.bins for r in rhythms])
    out = exports.OutputBatch(cfg.out_dir)
    out.add("rhythms.csv", exports.rhythm_matrix_text([r.person_id for r in rhythms], X))
    out.add("filter_report.json", exports.filter_report_json(report, parsed.n_malformed))
    return out


def cmd_rank(cfg: PipelineConfig, args) -> exports.OutputBatch:
    _, X = exports.read_rhythm_matrix(args.rhythms)
    sweep = rankselect.rank_sweep(X, cfg.k_range(), cfg.rank.runs_per_k, cfg.solver_config(),
                                  base_seed=cfg.seed, n_jobs=cfg.n_jobs)
    logger.info("selected K=%d", sweep.selected_k)
    out = exports.OutputBatch(cfg.out_dir)
    out.add("rank_curve.csv", exports.rank_curve_text(sweep))
    out.add("rank_selection.json", exports.rank_selection_json(sweep))
    print(sweep.selected_k)
    return out


def cmd_decompose(cfg: PipelineConfig, args) -> exports.OutputBatch:
    ids, X = exports.read_rhythm_matrix(args.rhythms)
    K = args.k
    if K is None:
        raise ParameterError("decompose needs --k")
    solver = cfg.solver_config()
    f = nmf.multi_restart(X, K, solver, n_jobs=cfg.n_jobs)
    labels = stats.component_labels(K)
    Wn = nmf.normalize_weights(f, ids)
    out = exports.OutputBatch(cfg.out_dir)
    out.add("components_H.csv", exports.components_text(f, labels))
    out.add("weights_W.csv", exports.weights_text(ids, f.W, labels))
    out.add("weights_normalized.csv", exports.weights_text(ids, Wn, labels))
    out.add("factorization.json", exports.factorization_meta(f, len(solver.restart_seeds)))
    out.add("population_average.csv",
            exports.vector_text(ingest.population_average(X), "mean_activity"))
    return out


def cmd_sleep(cfg: PipelineConfig, args) -> exports.OutputBatch:
    if cfg.sleep.apply_filters:
        _, logs, _ = _filtered_logs(args.events, cfg)
    else:
        logs = _read_events(args.events, cfg).logs
    logs = sorted(logs, key=lambda log: log.person_id)
    summaries, skipped = sleep.summarize_population(logs, cfg.window, cfg.sleep.min_duration)
    for pid in skipped:
        print(f"warning: person {pid} has no usable nights; excluded", file=sys.stderr)
    out = exports.OutputBatch(cfg.out_dir)
    out.add("sleep_summary.csv", exports.sleep_summary_text(summaries))
    return out


def cmd_report(cfg: PipelineConfig, args) -> exports.OutputBatch:
    labels, ids, W = exports.read_weights(args.weights)
    summaries = exports.read_sleep_summaries(args.sleep)
    Wn = nmf.normalize_weights(W, ids)
    pairs = stats.weight_correlations(Wn, labels)
    grid = stats.sleep_weight_correlations(Wn, summaries, person_ids=ids, labels=labels)
    params = stats.sleep_parameter_matrix(stats.align_summaries(ids, summaries))
    hists = {f"{c.x_label}__{c.y_label}": stats.hist2d(Wn[:, labels.index(c.x_label)],
                                                       Wn[:, labels.index(c.y_label)], args.bins)
             for c in pairs}
    sleep_hists = {f"{labels[k]}__{name}": stats.hist2d(Wn[:, k], params[:, j], args.bins)
                   for k in range(len(labels)) for j, name in enumerate(stats.SLEEP_PARAMETERS)}
    out = exports.OutputBatch(cfg.out_dir)
    out.add("weight_correlations.csv", exports.weight_correlations_text(pairs))
    out.add("sleep_correlations.csv", exports.sleep_table_text(grid))
    out.add("hist_weights.json", exports.hist_json(hists))
    out.add("hist_sleep.json", exports.hist_json(sleep_hists))
    return out


def cmd_pipeline(cfg: PipelineConfig, args) -> exports.OutputBatch:
    """ingest -> rank -> decompose -> sleep -> report, all into one directory."""
    out_dir = Path(cfg.out_dir)
    staged = exports.OutputBatch(out_dir)
    work = _Workspace(staged)

    staged.files.update(cmd_ingest(cfg, args).files)
    rhythms = work.path("rhythms.csv")
    rank_args = argparse.Namespace(rhythms=rhythms)
    staged.files.update(cmd_rank(cfg, rank_args).files)
    K = args.k if args.k is not None else json.loads(staged.files["rank_selection.json"])["selected_k"]
    staged.files.update(cmd_decompose(cfg, argparse.Namespace(rhythms=rhythms, k=K)).files)
    staged.files.update(cmd_sleep(cfg, args).files)
    report_args = argparse.Namespace(weights=work.path("weights_W.csv"),
                                     sleep=work.path("sleep_summary.csv"), bins=args.bins)
    staged.files.update(cmd_report(cfg, report_args).files)
    work.close()
    return staged


class _Workspace:
    """Temporary copies of staged outputs for commands that read files."""

    def __init__(self, batch: exports.OutputBatch):
        self.batch = batch
        self.tmp = tempfile.TemporaryDirectory()

    def path(self, name: str) -> str:
        p = Path(self.tmp.name) / name
        p.write_text(self.batch.files[name], encoding="utf-8")
        return str(p)

    def close(self):
        self.tmp.cleanup()


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "rank": cmd_rank,
    "decompose": cmd_decompose,
    "sleep": cmd_sleep,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rhythmnmf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir")
    common.add_argument("--jobs", type=int, help="worker processes for NMF runs")
    common.add_argument("--restarts", type=int, help="NMF restarts (seeds) for decompose")
    common.add_argument("--runs-per-k", type=int)
    common.add_argument("--k-min", type=int)
    common.add_argument("--k-max", type=int)
    common.add_argument("--max-iterations", type=int)
    common.add_argument("--tz-offset", type=int, help="fixed UTC offset in minutes")
    common.add_argument("--start-week", type=int)
    common.add_argument("--end-week", type=int)
    common.add_argument("--year", type=int)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. synth.n_persons=50")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="generate a synthetic event log")
    p = sub.add_parser("ingest", parents=[common], help="filter persons and build rhythms")
    p.add_argument("events")
    p = sub.add_parser("rank", parents=[common], help="cophenetic rank sweep")
    p.add_argument("rhythms")
    p = sub.add_parser("decompose", parents=[common], help="multi-restart NMF")
    p.add_argument("rhythms")
    p.add_argument("--k", type=int)
    p = sub.add_parser("sleep", parents=[common], help="typical sleep parameters")
    p.add_argument("events")
    p = sub.add_parser("report", parents=[common], help="correlation tables and histograms")
    p.add_argument("--weights", required=True)
    p.add_argument("--sleep", required=True)
    p.add_argument("--bins", type=int, default=10)
    p = sub.add_parser("pipeline", parents=[common], help="run every stage on an events file")
    p.add_argument("events")
    p.add_argument("--k", type=int, help="skip rank selection's choice and use this K")
    p.add_argument("--bins", type=int, default=10)
    return parser


_FLAG_KEYS = {
    "seed": "seed",
    "out_dir": "out_dir",
    "jobs": "n_jobs",
    "restarts": "solver.restarts",
    "runs_per_k": "rank.runs_per_k",
    "k_min": "rank.k_min",
    "k_max": "rank.k_max",
    "max_iterations": "solver.max_iterations",
    "tz_offset": "window.tz_offset_minutes",
    "start_week": "window.start_week",
    "end_week": "window.end_week",
    "year": "window.year",
}


def _set_path(tree: dict, dotted: str, value) -> None:
    *parents, leaf = dotted.split(".")
    node = tree
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {key} is not a section")
    node[leaf] = value


def resolve_config(args) -> PipelineConfig:
    if args.config:
        base = yaml.safe_load(dump_config(load_config(args.config)))
    else:
        base = {}
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            _set_path(base, key, value)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        _set_path(base, key.strip(), yaml.safe_load(raw))
    return config_from_dict(base)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        batch = COMMANDS[args.command](cfg, args)
        batch.commit()
    except RhythmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
