"""Command-line entry point.

Every option can come from a TOML file (``--config``); flags override it.
Exit codes: 0 success, 1 usage/config error, 2 data/parse error, 3 judge failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
from collections.abc import Sequence

from . import __version__, FORMAT_VERSIONS
from .collection import DataError, JudgmentKey, Qrels
from .experiments import (correlate_rankings, kendall_at_k, rank_shift_report, regenerate_pool,
                          write_series)
from .judge import (BatchFailed, ChatBackend, ChatConfig, ConstantBackend, JudgeConfig, JudgeError,
                    JudgmentCache, MockBackend, OracleBackend, PromptMode, SamplingParams)
from .metrics import evaluate_run, parse_metrics
from .pooling import build_pool, holes
from .reporting import format_table, jsonl
from .splitter import SplitSpec, balance_and_split, export_finetune, write_records
from .stats import StatsError, cohen_kappa, confusion
from .trec_io import (load_passages, read_qrels, read_run, read_runs, read_topics, save_qrels,
                      write_qrels)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("holefill")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_JUDGE = 0, 1, 2, 3

DEFAULTS = {
    "depth": 10,
    "threshold": 2,
    "rbo_p": 0.9,
    "workers": 1,
    "mode": "zero_shot",
    "temperature": 0.0,
    "top_p": 1.0,
    "api_key_env": "OPENAI_API_KEY",
    "max_retries": 5,
    "format": "text",
    "ratios": "0.7,0.15,0.15",
    "log_level": "WARNING",
}
# options holding input paths, validated before any work starts
INPUT_PATHS = ("runs", "run", "qrels", "qrels_b", "topics", "passages", "reference", "exemplars", "keys")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _opt(p, *names, **kw):
    kw.setdefault("default", argparse.SUPPRESS)
    p.add_argument(*names, **kw)


def _common(p):
    _opt(p, "--config", help="TOML file with option values (flags win)")
    _opt(p, "--out", help="output path (default: stdout)")
    _opt(p, "--format", choices=["text", "jsonl"])
    _opt(p, "--log-level", dest="log_level")


def _judge_opts(p):
    _opt(p, "--topics", help="normalized topics JSON")
    _opt(p, "--ikat-topics", dest="ikat_topics", action="store_true",
         help="topics file uses the iKAT distribution layout")
    _opt(p, "--passages", help="TSV or JSONL passage store")
    _opt(p, "--backend", "--judge", dest="backend", choices=["oracle", "constant", "mock", "chat"])
    _opt(p, "--mode", choices=[m.value for m in PromptMode])
    _opt(p, "--reference", help="reference qrels for the oracle backend")
    _opt(p, "--grade", type=int, help="grade returned by the constant backend")
    _opt(p, "--exemplars", help="qrels to sample two-shot exemplars from")
    _opt(p, "--endpoint")
    _opt(p, "--model")
    _opt(p, "--api-key-env", dest="api_key_env")
    _opt(p, "--max-retries", dest="max_retries", type=int)
    _opt(p, "--temperature", type=float)
    _opt(p, "--top-p", dest="top_p", type=float)
    _opt(p, "--cache", help="judgment cache (JSONL, appended)")
    _opt(p, "--seed", type=int)
    _opt(p, "--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holefill", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"holefill {__version__} ({', '.join(f'{k} {v}' for k, v in FORMAT_VERSIONS.items())})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.commands = sub.choices

    p = sub.add_parser("pool", help="build a depth-k pool; with --qrels list its holes")
    _common(p)
    _opt(p, "--runs", help="directory of run files")
    _opt(p, "--depth", type=int)
    _opt(p, "--qrels")

    p = sub.add_parser("judge", help="judge pooled keys, holes, or a key list automatically")
    _common(p)
    _judge_opts(p)
    _opt(p, "--keys", help="JSONL work orders {topicId, docId}")
    _opt(p, "--runs")
    _opt(p, "--depth", type=int)
    _opt(p, "--qrels", help="only judge pooled keys missing from these qrels")
    _opt(p, "--records", help="also write full judgment records (JSONL, with timestamps) here")

    p = sub.add_parser("eval", help="trec_eval-style metrics")
    _common(p)
    _opt(p, "--run", action="append")
    _opt(p, "--runs")
    _opt(p, "--qrels")
    _opt(p, "--metrics")
    _opt(p, "--threshold", type=int)

    p = sub.add_parser("agree", help="confusion matrices and Cohen's kappa between two qrels")
    _common(p)
    _opt(p, "--qrels", help="human (gold) qrels; matrix columns")
    _opt(p, "--qrels-b", dest="qrels_b", help="model qrels; matrix rows")
    _opt(p, "--threshold", type=int)

    for name, helptext in (("correlate", "tau/rho/RBO between system rankings under two qrels"),
                           ("kendall-at-k", "tau over the K best systems, K = 2..n")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _judge_opts(p)
        _opt(p, "--runs")
        _opt(p, "--qrels", help="human qrels")
        _opt(p, "--qrels-b", dest="qrels_b", help="other qrels; if absent the pool is regenerated with the judge")
        _opt(p, "--depth", type=int)
        _opt(p, "--metrics")
        _opt(p, "--threshold", type=int)
        _opt(p, "--rbo-p", dest="rbo_p", type=float)
        _opt(p, "--series-dir", dest="series_dir")

    p = sub.add_parser("loro", help="leave-one-run-out hole filling and rank shifts")
    _common(p)
    _judge_opts(p)
    _opt(p, "--runs")
    _opt(p, "--qrels")
    _opt(p, "--depth", type=int)
    _opt(p, "--metrics")
    _opt(p, "--threshold", type=int)
    _opt(p, "--series-dir", dest="series_dir")

    p = sub.add_parser("split", help="balance and split qrels for fine-tuning")
    _common(p)
    _opt(p, "--qrels")
    _opt(p, "--seed", type=int)
    _opt(p, "--ratios", help="train,test,valid")
    _opt(p, "--threshold", type=int)
    _opt(p, "--out-dir", dest="out_dir")

    p = sub.add_parser("export-ft", help="export instruction-tuning records")
    _common(p)
    _opt(p, "--qrels")
    _opt(p, "--topics")
    _opt(p, "--ikat-topics", dest="ikat_topics", action="store_true")
    _opt(p, "--passages")
    _opt(p, "--mode", choices=[m.value for m in PromptMode])
    _opt(p, "--exemplars")
    _opt(p, "--seed", type=int)
    return parser


# ---------------------------------------------------------------- configuration

def _flatten(data: dict, known: set[str]) -> dict:
    out = {}
    for key, value in data.items():
        if isinstance(value, dict):
            out.update(_flatten(value, known))
            continue
        norm = key.replace("-", "_")
        if norm not in known:
            raise UsageError(f"unknown config key {key!r}")
        out[norm] = value
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    known = {a.dest for a in build_parser().commands[args.command]._actions}
    cfg = {k: v for k, v in DEFAULTS.items() if k in known}
    if "config" in flags:
        try:
            with open(flags["config"], "rb") as fh:
                cfg.update(_flatten(tomllib.load(fh), known))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"bad config {flags['config']}: {exc}") from None
    cfg.update(flags)
    cfg["command"] = args.command
    for key in INPUT_PATHS:
        paths = cfg.get(key)
        for path in (paths if isinstance(paths, list) else [paths] if paths else []):
            if not os.path.exists(path):
                raise UsageError(f"--{key.replace('_', '-')}: no such file or directory: {path}")
    out = cfg.get("out")
    if out:
        inputs = {os.path.realpath(p) for k in INPUT_PATHS for p in
                  (cfg[k] if isinstance(cfg.get(k), list) else [cfg.get(k)]) if p}
        if os.path.realpath(out) in inputs:
            raise UsageError("--out must not overwrite an input file")
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError(f"{cfg['command']}: missing required option(s): "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))


def _snapshot(cfg: dict) -> str:
    return json.dumps({k: v for k, v in sorted(cfg.items()) if k != "log_level"}, sort_keys=True)


def _emit(cfg: dict, body: str, report: bool = True) -> None:
    """Write ``body``; text reports get a config header, data files a sidecar."""
    text_report = report and cfg.get("format", "text") == "text"
    if text_report:
        body = f"# holefill {__version__} config: {_snapshot(cfg)}\n" + body
    out = cfg.get("out")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(body)
        if not text_report:
            with open(out + ".config.json", "w", encoding="utf-8") as fh:
                fh.write(_snapshot(cfg) + "\n")
    else:
        if not text_report:
            print(f"config: {_snapshot(cfg)}", file=sys.stderr)
        sys.stdout.write(body)


# ---------------------------------------------------------------------- loaders

def _runs(cfg):
    if cfg.get("run"):
        paths = [cfg["run"]] if isinstance(cfg["run"], str) else cfg["run"]
        return sorted((read_run(p) for p in paths), key=lambda r: r.tag)
    path = cfg["runs"]
    return read_runs(path) if os.path.isdir(path) else [read_run(path)]


def _topics(cfg):
    return read_topics(cfg["topics"], ikat=bool(cfg.get("ikat_topics")))


def _judge(cfg: dict, human: Qrels | None = None) -> JudgeConfig:
    _require(cfg, "backend")
    backend_name = cfg["backend"]
    mode = PromptMode(cfg["mode"])
    if (backend_name == "mock" or mode is PromptMode.TWO_SHOT) and cfg.get("seed") is None:
        raise UsageError(f"{backend_name} backend / {mode.value} mode is randomized: pass --seed")
    if backend_name == "oracle":
        reference = read_qrels(cfg["reference"]) if cfg.get("reference") else human
        if reference is None:
            raise UsageError("oracle backend needs --reference")
        backend = OracleBackend(reference)
    elif backend_name == "constant":
        _require(cfg, "grade")
        backend = ConstantBackend(cfg["grade"])
    elif backend_name == "mock":
        backend = MockBackend(cfg["seed"])
    else:
        _require(cfg, "endpoint", "model")
        backend = ChatBackend(ChatConfig(cfg["endpoint"], cfg["model"], cfg["api_key_env"],
                                         max_retries=cfg["max_retries"]))
    exemplars = None
    if mode is PromptMode.TWO_SHOT:
        exemplars = read_qrels(cfg["exemplars"]) if cfg.get("exemplars") else human
        if exemplars is None:
            raise UsageError("two-shot mode needs --exemplars")
    return JudgeConfig(
        backend=backend, mode=mode,
        sampling=SamplingParams(float(cfg["temperature"]), float(cfg["top_p"])),
        cache=JudgmentCache(cfg["cache"]) if cfg.get("cache") else None,
        workers=int(cfg["workers"]), exemplar_qrels=exemplars, seed=cfg.get("seed"))


# --------------------------------------------------------------------- commands

def cmd_pool(cfg):
    _require(cfg, "runs")
    pool = build_pool(_runs(cfg), int(cfg["depth"]))
    if cfg.get("qrels"):
        missing = sorted(holes(pool, read_qrels(cfg["qrels"])))
        print(f"{len(missing)} holes in a pool of {len(pool)}", file=sys.stderr)
        _emit(cfg, jsonl({"topicId": k.topic_id, "docId": k.doc_id} for k in missing), report=False)
    else:
        _emit(cfg, jsonl({"topicId": k.topic_id, "docId": k.doc_id,
                          "contributors": sorted(pool.contributors(k))} for k in pool.keys()),
              report=False)
    return EXIT_OK


def _read_keys(path) -> list[JudgmentKey]:
    keys = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    rec = json.loads(line)
                    keys.append(JudgmentKey(rec["topicId"], rec["docId"]))
                except (ValueError, KeyError) as exc:
                    raise DataError(f"{path}:{lineno}: bad work order: {exc}") from None
    return keys


def cmd_judge(cfg):
    _require(cfg, "topics", "passages")
    if cfg.get("keys"):
        keys = _read_keys(cfg["keys"])
    else:
        _require(cfg, "runs")
        pool = build_pool(_runs(cfg), int(cfg["depth"]))
        keys = pool.keys()
        if cfg.get("qrels"):
            keys = sorted(holes(pool, read_qrels(cfg["qrels"])))
    judge = _judge(cfg)
    result = judge.run(keys, _topics(cfg), load_passages(cfg["passages"]))
    fill = result.to_qrels(label=f"auto[{judge.describe()}]")
    buf = io.StringIO()
    write_qrels(fill, buf)
    _emit(cfg, buf.getvalue(), report=False)
    if cfg.get("records"):
        with open(cfg["records"], "w", encoding="utf-8") as fh:
            fh.write(jsonl(r.to_dict() for r in result.records))
    print(f"judged {len(result.records)} of {len(keys)} keys, {result.backend_calls} backend calls",
          file=sys.stderr)
    for f in result.failures:
        print(f"FAILED {f.key.topic_id} {f.key.doc_id} [{f.kind}] {f.message}", file=sys.stderr)
    return EXIT_JUDGE if result.failures else EXIT_OK


def cmd_eval(cfg):
    _require(cfg, "qrels")
    if not cfg.get("run") and not cfg.get("runs"):
        raise UsageError("eval: pass --run or --runs")
    metrics = parse_metrics(cfg.get("metrics", "all"))
    qrels = read_qrels(cfg["qrels"])
    threshold = int(cfg["threshold"])
    results = [evaluate_run(r, qrels, metrics, threshold) for r in _runs(cfg)]
    if cfg["format"] == "jsonl":
        _emit(cfg, jsonl(rec for res in results for rec in res.records()))
        return EXIT_OK
    rows = []
    for res in results:
        for topic_id, values in res.per_topic.items():
            rows.append([res.run_tag, topic_id] + [values[m] for m in metrics])
        rows.append([res.run_tag, "all"] + [res.mean[m] for m in metrics])
    _emit(cfg, f"# relevance threshold for binary metrics: {threshold}\n"
          + format_table(["run", "topic"] + [m.value for m in metrics], rows))
    return EXIT_OK


def cmd_agree(cfg):
    _require(cfg, "qrels", "qrels_b")
    gold_q, pred_q = read_qrels(cfg["qrels"]), read_qrels(cfg["qrels_b"])
    common = [k for k in gold_q if k in pred_q]
    if not common:
        raise DataError("the two qrels share no judged keys")
    threshold = int(cfg["threshold"])
    graded = confusion([pred_q[k] for k in common], [gold_q[k] for k in common])
    binary = graded.collapse(threshold)
    kg, kb = cohen_kappa(graded), cohen_kappa(binary)
    if cfg["format"] == "jsonl":
        _emit(cfg, jsonl([
            {"level": "graded", "kappa": kg, "n": len(common), "labels": list(map(int, graded.labels)),
             "matrix": graded.to_list()},
            {"level": "binary", "kappa": kb, "n": len(common), "threshold": threshold,
             "labels": [0, 1], "matrix": binary.to_list()}]))
        return EXIT_OK

    def matrix_table(m):
        rows = [[f"pred {lab}"] + r + [sum(r)] for lab, r in zip(m.labels, m.to_list())]
        rows.append(["sum"] + m.col_sums() + [m.total])
        return format_table([""] + [f"gold {int(x)}" for x in m.labels] + ["sum"], rows)

    _emit(cfg, f"# {len(common)} common keys ({len(gold_q)} gold, {len(pred_q)} predicted)\n"
          f"graded kappa = {kg:.4f}\n" + matrix_table(graded)
          + f"\nbinary kappa (grade >= {threshold} relevant) = {kb:.4f}\n" + matrix_table(binary))
    return EXIT_OK


def _other_qrels(cfg, runs, human):
    if cfg.get("qrels_b"):
        return read_qrels(cfg["qrels_b"])
    _require(cfg, "topics", "passages")
    judge = _judge(cfg, human)
    return regenerate_pool(build_pool(runs, int(cfg["depth"])), judge, _topics(cfg),
                           load_passages(cfg["passages"]))


def _write_series_file(cfg, name, points):
    if cfg.get("series_dir"):
        os.makedirs(cfg["series_dir"], exist_ok=True)
        with open(os.path.join(cfg["series_dir"], name), "w", encoding="utf-8") as fh:
            write_series(points, fh)


def cmd_correlate(cfg):
    _require(cfg, "runs", "qrels")
    runs, human = _runs(cfg), read_qrels(cfg["qrels"])
    other = _other_qrels(cfg, runs, human)
    rows = correlate_rankings(runs, human, other, parse_metrics(cfg.get("metrics", "all")),
                              float(cfg["rbo_p"]), int(cfg["threshold"]))
    if cfg["format"] == "jsonl":
        _emit(cfg, jsonl(r.to_record() for r in rows))
    else:
        _emit(cfg, format_table(["metric", "tau", "rho", "rbo", "n_systems"],
                                [[r.metric.value, r.tau, r.rho, r.rbo, r.n_systems] for r in rows]))
    return EXIT_OK


def cmd_kendall_at_k(cfg):
    _require(cfg, "runs", "qrels")
    runs, human = _runs(cfg), read_qrels(cfg["qrels"])
    other = _other_qrels(cfg, runs, human)
    curves = [kendall_at_k(runs, human, other, m, int(cfg["threshold"]))
              for m in parse_metrics(cfg.get("metrics", "ndcg_cut_5"))]
    for c in curves:
        _write_series_file(cfg, f"kendall_at_k.{c.metric.value}.tsv", c.points)
    if cfg["format"] == "jsonl":
        _emit(cfg, jsonl({"metric": c.metric.value, "K": k, "tau": t} for c in curves for k, t in c.points))
    else:
        ks = [k for k, _ in curves[0].points]
        rows = [[k] + [dict(c.points)[k] for c in curves] for k in ks]
        _emit(cfg, format_table(["K"] + [c.metric.value for c in curves], rows))
    return EXIT_OK


def cmd_loro(cfg):
    _require(cfg, "runs", "qrels", "topics", "passages")
    runs, human = _runs(cfg), read_qrels(cfg["qrels"])
    judge = _judge(cfg, human)
    metrics = parse_metrics(cfg.get("metrics", "ndcg_cut_5"))
    report = rank_shift_report(runs, human, judge, _topics(cfg), load_passages(cfg["passages"]),
                               int(cfg["depth"]), metrics, int(cfg["threshold"]),
                               workers=int(cfg["workers"]))
    for m in metrics:
        _write_series_file(cfg, f"rank_shift.{m.value}.tsv",
                           [(r.unjudged_at_10, r.abs_shift) for r in report.for_metric(m)])
    if cfg["format"] == "jsonl":
        _emit(cfg, jsonl(r.to_record() for r in report.rows))
    else:
        _emit(cfg, "# unjudged@10 = unjudged / min(10, retrieved), against the reduced qrels\n"
              + format_table(["metric", "run", "unjudged@10", "rank_human", "rank_hybrid", "abs_shift",
                              "removed", "prior_holes"],
                             [[r.metric.value, r.run_tag, r.unjudged_at_10, r.rank_human, r.rank_hybrid,
                               r.abs_shift, r.removed, r.prior_holes] for r in report.rows]))
    for tag, message in report.failures.items():
        print(f"FAILED {tag}: {message}", file=sys.stderr)
    return EXIT_JUDGE if report.failures else EXIT_OK


def cmd_split(cfg):
    _require(cfg, "qrels", "seed")
    try:
        ratios = tuple(float(x) for x in str(cfg["ratios"]).split(","))
        spec = SplitSpec(ratios, int(cfg["seed"]), int(cfg["threshold"]))
    except ValueError as exc:
        raise UsageError(f"--ratios: {exc}") from None
    result = balance_and_split(read_qrels(cfg["qrels"]), spec)
    summary = format_table(["split", "keys"] + [str(g) for g in range(5)],
                           [[name, len(part)] + [sum(1 for g in part.values() if g == grade)
                                                 for grade in range(5)]
                            for name, part in result.parts().items()])
    summary += f"removed while balancing: {result.removed_count}\nexcluded topics' keys: {len(result.excluded)}\n"
    manifest = "".join(line + "\n" for line in result.manifest_lines())
    out_dir = cfg.get("out_dir")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for name, part in result.parts().items():
            save_qrels(part, os.path.join(out_dir, f"{name}.qrels"))
        with open(os.path.join(out_dir, "manifest.tsv"), "w", encoding="utf-8") as fh:
            fh.write(manifest)
        with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
            fh.write(_snapshot(cfg) + "\n")
        _emit(cfg, summary)
    else:
        _emit(cfg, manifest, report=False)
        print(summary, file=sys.stderr, end="")
    return EXIT_OK


def cmd_export_ft(cfg):
    _require(cfg, "qrels", "topics", "passages")
    mode = PromptMode(cfg["mode"])
    exemplars = None
    if mode is PromptMode.TWO_SHOT:
        _require(cfg, "exemplars", "seed")
        exemplars = read_qrels(cfg["exemplars"])
    records = export_finetune(read_qrels(cfg["qrels"]), _topics(cfg), load_passages(cfg["passages"]),
                              mode, exemplars, cfg.get("seed"))
    buf = io.StringIO()
    write_records(records, buf)
    _emit(cfg, buf.getvalue(), report=False)
    return EXIT_OK


COMMANDS = {
    "pool": cmd_pool, "judge": cmd_judge, "eval": cmd_eval, "agree": cmd_agree,
    "correlate": cmd_correlate, "kendall-at-k": cmd_kendall_at_k, "loro": cmd_loro,
    "split": cmd_split, "export-ft": cmd_export_ft,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        logging.basicConfig(level=str(cfg.get("log_level", "WARNING")).upper(), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"holefill: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (JudgeError, BatchFailed) as exc:
        print(f"holefill: judge failure: {exc}", file=sys.stderr)
        return EXIT_JUDGE
    except (DataError, StatsError, KeyError, OSError) as exc:
        print(f"holefill: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"holefill: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
