"""Command-line entry point: ``pcfgcm <subcommand> ...``.

Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import contacts, dataio, evaluation, grammar as grammar_mod, parser
from .estimation import EstimatorKind
from .evaluation import NULL_ENV_VAR, NullModel
from .learner import LearnerConfig, train
from .trees import parse_bracket

log = logging.getLogger("pcfgcm")


def _fmt(value):
    return repr(float(value))


def _load_null(args, alphabet):
    if args.null:
        return NullModel.load(args.null, alphabet)
    return evaluation.default_null(alphabet)


def _load_config(args):
    data = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
    config = LearnerConfig.from_dict(data)
    overrides = {}
    if getattr(args, "estimator", None):
        overrides["estimator"] = args.estimator
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "generations", None) is not None:
        overrides["generations"] = args.generations
    if getattr(args, "population", None) is not None:
        overrides["population_size"] = args.population
    if overrides:
        merged = config.to_dict()
        merged.update(overrides)
        config = LearnerConfig.from_dict(merged)
    return config


def _optional_map(path, n=None):
    if not path:
        return None
    cmap = contacts.load(path)
    if n is not None and cmap.length != n:
        raise contacts.ContactMapError(f"contact map length {cmap.length} != sequence length {n}")
    return cmap


# -- subcommands -------------------------------------------------------------

def cmd_build_grammar(args):
    alphabet = grammar_mod.Alphabet.from_string(args.alphabet)
    g = grammar_mod.build_full_grammar(alphabet, args.vt, args.vn,
                                       with_contact_rules=not args.no_contact_rules)
    grammar_mod.save(g, args.out)
    log.info("wrote %d rules to %s", len(g.rules), args.out)


def cmd_train(args):
    base = grammar_mod.load(args.grammar)
    manifest = dataio.read_manifest(args.manifest)
    dataset = dataio.load_dataset(manifest)
    if dataset.alphabet != base.alphabet:
        raise ValueError("manifest alphabet differs from the grammar alphabet")
    config = _load_config(args)
    if config.estimator is EstimatorKind.CE_M and dataset.shared_map is None:
        raise _UsageError("estimator ce-m needs a manifest with a shared contact map (contacts=...)")
    result = train(dataset, base, config, use_maps=not args.ignore_contacts, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grammar_mod.save(result.grammar, out / "grammar.txt")
    (out / "trace.csv").write_text(result.trace_csv())
    if result.checkpoints:
        ckdir = out / "checkpoints"
        ckdir.mkdir(exist_ok=True)
        for generation, g in result.checkpoints:
            grammar_mod.save(g, ckdir / f"gen{generation:05d}.txt")
    log.info("best %s objective %.6g after %d generations",
             config.estimator.value, result.fitness, result.trace[-1][0])


def _read_inputs(args, g):
    records = dataio.read_fasta(args.fasta, g.alphabet)
    lengths = {len(s) for _, s in records}
    cmap = None
    if args.contacts:
        if len(lengths) > 1:
            raise ValueError("a contact map needs equal-length sequences")
        cmap = _optional_map(args.contacts, lengths.pop() if lengths else None)
    return records, cmap


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_score(args):
    g = grammar_mod.load(args.grammar)
    records, cmap = _read_inputs(args, g)
    null = _load_null(args, g.alphabet)
    scores = evaluation.score_many([s for _, s in records], g, null, cmap)
    fh, close = _open_out(args.out)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "log_odds"])
        for (ident, _), value in zip(records, scores):
            writer.writerow([ident, _fmt(value)])
    finally:
        if close:
            fh.close()


def cmd_parse(args):
    g = grammar_mod.load(args.grammar)
    records, cmap = _read_inputs(args, g)
    fh, close = _open_out(args.out)
    try:
        for ident, seq in records:
            try:
                tree, prob = parser.viterbi_constrained(seq, cmap, g)
                fh.write(f"# {ident} {_fmt(math.log(prob))}\n{tree.to_bracket()}\n")
            except parser.NoParse:
                fh.write(f"# {ident} -inf\nNOPARSE\n")
    finally:
        if close:
            fh.close()


def read_tree_file(path):
    """``[(id, log_prob, Tree or None), ...]`` from ``parse`` output."""
    out = []
    header = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            header = (parts[0], float(parts[1]) if len(parts) > 1 else math.nan)
            continue
        ident, logp = header if header else (f"tree{len(out) + 1}", math.nan)
        tree = None if line == "NOPARSE" else parse_bracket(line)
        out.append((ident, logp, tree))
        header = None
    return out


def cmd_predict_contacts(args):
    delta = math.inf if args.delta in ("inf", "infinity") else int(args.delta)
    fh, close = _open_out(args.out)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "i", "j"])
        for ident, _, tree in read_tree_file(args.trees):
            if tree is None:
                continue
            for i, j in sorted(contacts.predict_contacts(tree, delta)):
                writer.writerow([ident, i, j])
    finally:
        if close:
            fh.close()


def cmd_evaluate(args):
    g = grammar_mod.load(args.grammar)
    dataset = dataio.load_dataset(dataio.read_manifest(args.manifest))
    if dataset.alphabet != g.alphabet:
        raise ValueError("manifest alphabet differs from the grammar alphabet")
    null = _load_null(args, g.alphabet)
    if args.score_contacts and dataset.shared_map is None:
        raise _UsageError("--score-contacts needs a manifest with a shared contact map")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scoring_map = dataset.shared_map if args.score_contacts else None
    if args.cv:
        config = _load_config(args)
        if config.estimator is EstimatorKind.CE_M and dataset.shared_map is None:
            raise _UsageError("estimator ce-m needs a shared contact map")
        report = evaluation.cross_validate(
            dataset, g, config, args.cv, null,
            use_map_training=not args.ignore_contacts,
            use_map_scoring=args.score_contacts, threads=args.threads,
        )
    else:
        report, items = evaluation.evaluate_grammar(
            g, dataset.positives, dataset.negatives, null, scoring_map,
            training_map=dataset.shared_map, full_map=dataset.full_map,
        )
        (out / "rpc.csv").write_text(evaluation.format_rpc_csv(evaluation.rpc_points(items)))
    (out / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def cmd_gen_negatives(args):
    alphabet = grammar_mod.Alphabet.from_string(args.alphabet)
    records = dataio.read_fasta(args.fasta, alphabet)
    windows = dataio.cut_negative_records(records, args.window, args.stride)
    fh, close = _open_out(args.out)
    try:
        fh.write(dataio.format_fasta(windows))
    finally:
        if close:
            fh.close()


# -- argument parsing ----------------------------------------------------------

class _UsageError(Exception):
    pass


def _add_training_flags(p, require_estimator):
    p.add_argument("--estimator", choices=[k.value for k in EstimatorKind],
                   required=require_estimator, help="training objective")
    p.add_argument("--config", help="JSON learner config (LearnerConfig fields)")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--generations", type=int, help="overrides config")
    p.add_argument("--population", type=int, help="overrides config population_size")
    p.add_argument("--ignore-contacts", action="store_true",
                   help="train on sequences alone (no contact constraints)")


def build_parser():
    threads_default = os.cpu_count() or 1
    ap = argparse.ArgumentParser(prog="pcfgcm", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--threads", type=int, default=threads_default,
                    help="worker threads for fitness evaluation (results do not depend on it)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-grammar", help="write the full rule set with uniform probabilities")
    p.add_argument("--alphabet", default="protein", help="'protein' or a string of symbols")
    p.add_argument("--vt", type=int, default=3, help="number of lexical non-terminals")
    p.add_argument("--vn", type=int, default=4, help="number of structural non-terminals")
    p.add_argument("--no-contact-rules", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_grammar)

    p = sub.add_parser("train", help="estimate rule probabilities with the genetic algorithm")
    p.add_argument("--manifest", required=True)
    p.add_argument("--grammar", required=True, help="base grammar defining the rule set")
    _add_training_flags(p, require_estimator=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="log-odds against the null model")
    p.add_argument("--grammar", required=True)
    p.add_argument("--fasta", required=True)
    p.add_argument("--contacts", help="shared contact map; scores map-consistent parses only")
    p.add_argument("--null", help=f"null model file (default ${NULL_ENV_VAR} or built-in)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("parse", help="Viterbi trees in bracketed form")
    p.add_argument("--grammar", required=True)
    p.add_argument("--fasta", required=True)
    p.add_argument("--contacts")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("predict-contacts", help="contacts implied by parse trees")
    p.add_argument("--trees", required=True, help="output of 'parse'")
    p.add_argument("--delta", default="4", help="leaf-distance threshold (integer or 'inf')")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict_contacts)

    p = sub.add_parser("evaluate", help="AP and contact recovery, optionally under k-fold CV")
    p.add_argument("--grammar", required=True,
                   help="grammar to evaluate, or base grammar with --cv")
    p.add_argument("--manifest", required=True)
    p.add_argument("--null")
    p.add_argument("--score-contacts", action="store_true",
                   help="score with the shared contact map")
    p.add_argument("--cv", type=int, help="run k-fold cross-validation with k folds")
    _add_training_flags(p, require_estimator=False)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen-negatives", help="cut long sequences into fixed-length windows")
    p.add_argument("--fasta", required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--stride", type=int)
    p.add_argument("--alphabet", default="protein")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen_negatives)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except _UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"pcfgcm: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"pcfgcm: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
