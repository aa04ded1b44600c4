"""Command-line entry point: ``authorprof <command> [options]``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 on
data errors (missing or malformed input files).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import METHODS, PRESETS, ExperimentConfig, dump_config, load_config
from .corpus import ingest
from .errors import AuthorProfError, ConfigError, DataError
from .experiment import run_experiment
from .graph import read_edge_list
from .methods import FoldContext, get_method, run_method
from .node2vec import AuthorProfileTable, embed_graph
from .projection import dominant_classes, export_projection
from .synthetic import SPECS, generate_synthetic

log = logging.getLogger("authorprof")

REFERENCE_LR_F1 = 83.81
REFERENCE_LR_AUTH_F1 = 87.57
REPLICATION_BAND = 3.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 with help instead of argparse's 2
        self.print_help(sys.stderr)
        raise UsageError(message)


def _slug(method: str) -> str:
    return method.lower().replace("+", "_")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="global random seed (default 0)")
    p.add_argument("--config", metavar="FILE", help="flat 'section.key = value' config file")
    p.add_argument("--preset", choices=sorted(PRESETS), default="full",
                   help="base configuration before --config is applied (default full)")
    p.add_argument("--threads", type=int, default=1, help="accepted for compatibility; all trainers run single-threaded")
    p.add_argument("--deterministic", action="store_true", help="bit-reproducible runs (always the case; kept for scripts)")
    p.add_argument("-v", "--verbose", action="store_true")


def _inputs(p: argparse.ArgumentParser, docs: bool = True) -> None:
    if docs:
        p.add_argument("--docs", required=True, help="documents TSV: doc_id, author_id, label, text")
    p.add_argument("--edges", required=True, help="edge list TSV: author_id <TAB> author_id")
    p.add_argument("--authors", help="optional author list (one id per line) for solitary authors")
    p.add_argument("--profiles", help="precomputed profiles (word2vec text format); skips node2vec")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="authorprof", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="command")

    p = sub.add_parser("synth", help="generate a planted-community synthetic corpus")
    p.add_argument("--spec", choices=sorted(SPECS), default="default")
    p.add_argument("--out", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("embed", help="node2vec author profiles from an edge list")
    _inputs(p, docs=False)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("train", help="fit one method on all documents and save its models")
    _inputs(p)
    p.add_argument("--method", choices=METHODS, default="LR+AUTH")
    p.add_argument("--out", required=True)
    _common(p)

    for name, text in (("evaluate", "k-fold evaluation of the methods"),
                       ("replicate", "full protocol on user-supplied data, compared with reference numbers")):
        p = sub.add_parser(name, help=text)
        _inputs(p)
        p.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
        p.add_argument("--folds", type=int, help="number of CV folds (default from config, 10)")
        p.add_argument("--embeddings", help="pre-trained word vectors (text format) for the GRU")
        p.add_argument("--out", required=True)
        _common(p)

    p = sub.add_parser("project", help="2-D PCA coordinates of non-solitary author profiles")
    _inputs(p)
    p.add_argument("--out", required=True)
    _common(p)

    parser.epilog = "configuration defaults:\n" + dump_config(ExperimentConfig())
    parser.formatter_class = argparse.RawDescriptionHelpFormatter
    return parser


def _configure(args) -> ExperimentConfig:
    cfg = PRESETS[args.preset]()
    if args.config:
        cfg = load_config(args.config, cfg)
    cfg = cfg.with_seed(args.seed)
    updates = {}
    if getattr(args, "methods", None):
        updates["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if getattr(args, "folds", None):
        updates["folds"] = args.folds
    if getattr(args, "embeddings", None):
        updates["embedding_file"] = args.embeddings
    if updates:
        cfg = replace(cfg, **updates)
    cfg.validate()
    # every trainer is single-threaded, so --threads and --deterministic only
    # validate here; results do not depend on either
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return cfg


def _profiles(args, graph, cfg: ExperimentConfig, out: Path) -> AuthorProfileTable:
    if args.profiles:
        path = Path(args.profiles)
        if not path.is_file():
            raise DataError(f"profiles file not found: {path}")
        return AuthorProfileTable.load(path)
    profiles = embed_graph(graph, cfg.walk)
    (out / "profiles").mkdir(parents=True, exist_ok=True)
    profiles.save(out / "profiles" / "profiles.txt")
    return profiles


def _cmd_synth(args) -> int:
    corpus = generate_synthetic(SPECS[args.spec](args.seed))
    corpus.write(args.out)
    print(f"wrote {len(corpus.documents)} documents, {corpus.graph.n_edges} edges to {args.out}")
    return 0


def _cmd_embed(args) -> int:
    cfg = _configure(args)
    graph = read_edge_list(_existing(args.edges), _existing(args.authors) if args.authors else None)
    out = Path(args.out)
    _profiles(argparse.Namespace(profiles=None), graph, cfg, out)
    print(f"wrote {out / 'profiles' / 'profiles.txt'} ({graph.n_nodes} authors, {cfg.walk.dims} dims)")
    return 0


def _existing(path: str) -> str:
    if not Path(path).is_file():
        raise DataError(f"file not found: {path}")
    return path


def _load(args):
    return ingest(_existing(args.docs), _existing(args.edges), _existing(args.authors) if args.authors else None)


def _cmd_train(args) -> int:
    cfg = _configure(args)
    docs, graph = _load(args)
    out = Path(args.out)
    spec = get_method(args.method)
    profiles = _profiles(args, graph, cfg, out) if spec.profiles else AuthorProfileTable(cfg.walk.dims)
    ctx = FoldContext(docs, docs[:0], profiles, cfg)
    result = run_method(spec, ctx)
    models = out / "models"
    models.mkdir(parents=True, exist_ok=True)
    stem = models / _slug(spec.name)
    if spec.classifier == "gru":
        result.model.save(f"{stem}.gru.npz")
    else:
        if spec.classifier == "logistic":
            result.model.save(f"{stem}.lr.txt")
        else:
            result.model.save(f"{stem}.gbdt.txt")
        if spec.text_block == "ngram":
            Path(f"{stem}.ngrams.json").write_text(json.dumps(list(ctx.ngram_vocab().grams)) + "\n",
                                                   encoding="utf-8")
        if spec.text_block in ("hidden_state", "embedding_sum"):
            ctx.gru_model().save(f"{stem}.gru.npz")
    Path(f"{stem}.config").write_text(dump_config(cfg), encoding="utf-8")
    print(f"trained {spec.name} on {len(docs)} documents (feature width {result.feature_width}); "
          f"models in {models}")
    return 0


def _cmd_evaluate(args, replicate: bool = False) -> int:
    cfg = _configure(args)
    docs, graph = _load(args)
    out = Path(args.out)
    needs_profiles = any(get_method(m).profiles for m in cfg.methods)
    profiles = _profiles(args, graph, cfg, out) if needs_profiles else None
    result = run_experiment(docs, graph, cfg, profiles=profiles)
    txt, jsonl = result.write(out, "replicate" if replicate else "report")
    sys.stdout.write(result.table())
    if replicate:
        verdict = replication_verdict(result)
        (out / "reports" / "replicate_check.txt").write_text(verdict, encoding="utf-8")
        sys.stdout.write(verdict)
    print(f"wrote {txt} and {jsonl}")
    return 0


def replication_verdict(result) -> str:
    """Compare LR and LR+AUTH against the reference weighted F1 values."""
    lines = ["", "Replication check (best effort; reference LR 83.81, LR+AUTH 87.57)"]
    if "LR" not in result.reports or "LR+AUTH" not in result.reports:
        return "\n".join(lines + ["  skipped: LR and LR+AUTH must both be evaluated"]) + "\n"
    lr = 100 * result.report("LR").mean_weighted()[2]
    both = 100 * result.report("LR+AUTH").mean_weighted()[2]
    sig = result.significance_of("LR", "LR+AUTH")
    in_band = abs(lr - REFERENCE_LR_F1) <= REPLICATION_BAND
    gain_ok = both > lr and sig.p_value < 0.05
    lines.append(f"  LR weighted F1 {lr:.2f} (band {REFERENCE_LR_F1 - REPLICATION_BAND:.2f}"
                 f"..{REFERENCE_LR_F1 + REPLICATION_BAND:.2f}): {'PASS' if in_band else 'FAIL'}")
    lines.append(f"  LR+AUTH - LR = {both - lr:+.2f}, p = {sig.p_value:.4g}: {'PASS' if gain_ok else 'FAIL'}")
    return "\n".join(lines) + "\n"


def _cmd_project(args) -> int:
    cfg = _configure(args)
    docs, graph = _load(args)
    out = Path(args.out)
    profiles = _profiles(args, graph, cfg, out)
    proj = export_projection(profiles, dominant_classes(docs), graph)
    target = out / "projections"
    target.mkdir(parents=True, exist_ok=True)
    proj.write(target / "projection.tsv")
    raw = AuthorProfileTable(profiles.dims, {a: profiles.vectors[a] for a in proj.authors})
    raw.save(target / "embeddings.txt")
    var = proj.explained_variance
    print(f"projected {len(proj.authors)} non-solitary authors (PC variances {var[0]:.4g}, {var[1]:.4g}) "
          f"to {target}")
    return 0


COMMANDS = {"synth": _cmd_synth, "embed": _cmd_embed, "train": _cmd_train, "evaluate": _cmd_evaluate,
            "replicate": lambda a: _cmd_evaluate(a, replicate=True), "project": _cmd_project}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"authorprof: error: {exc}", file=sys.stderr)
        return 1
    if args.command is None:
        parser.print_help(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"authorprof: data error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, UsageError) as exc:
        print(f"authorprof: error: {exc}", file=sys.stderr)
        return 1
    except AuthorProfError as exc:
        print(f"authorprof: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
