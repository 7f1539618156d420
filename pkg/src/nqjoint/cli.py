"""``nqjoint`` command line: validate, preprocess, train-toy, score, decode, evaluate, synth.

Exit codes: 0 success, 1 bad input or usage, 2 internal error. Every flag
can also be set through an environment variable named ``NQJOINT_`` plus the
flag in upper case with dashes as underscores (``--downsample-rate`` ->
``NQJOINT_DOWNSAMPLE_RATE``); explicit flags win.

Each written output gets a sibling ``<output>.manifest.json`` recording the
package and library versions, the full configuration, the seed and the
SHA-256 of every input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .corpus import iter_examples, validate_corpus
from .decoder import DecodeConfig, decode_corpus
from .errors import InputError, NQJointError, ParseError, ValidationError
from .evaluator import evaluate
from .instances import GenConfig, TrainingInstance, preprocess_corpus
from .records import dumps, read_header, read_jsonl, write_jsonl
from .scorer import LogitsRecord, TrainConfig, load_params, mean_loss, save_params, score_instances, train
from .tokenizer import load_vocab, write_vocab

log = logging.getLogger("nqjoint")

ENV_PREFIX = "NQJOINT_"
EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --------------------------------------------------------------------------
# helpers

def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _check_inputs(*paths: str) -> None:
    for p in paths:
        if not Path(p).is_file():
            raise InputError(f"input file not found: {p}")


def _write_manifest(output: str, args: argparse.Namespace, inputs: Sequence[str], extra: dict | None = None) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    manifest = {
        "tool": "nqjoint",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "command": args.command,
        "seed": args.seed,
        "config": config,
        "inputs": {p: _sha256(p) for p in inputs},
    }
    if extra:
        manifest.update(extra)
    with open(f"{output}.manifest.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _header(kind: str, seed: int) -> dict:
    return {"kind": kind, "version": __version__, "seed": seed}


def _upstream_seed(args: argparse.Namespace, path: str) -> None:
    """Carry the seed of the input file forward unless one was given explicitly."""
    if args.seed is None:
        header = read_header(path)
        args.seed = int(header["seed"]) if header and "seed" in header else 0


def _read_instances(path: str):
    return (TrainingInstance.from_dict(r) for r in read_jsonl(path))


def _read_logits(path: str):
    return (LogitsRecord.from_dict(r) for r in read_jsonl(path))


# --------------------------------------------------------------------------
# subcommands

def cmd_validate(args) -> int:
    _check_inputs(args.input)
    violations = []
    examples = []

    def stream():
        try:
            for ex in iter_examples(args.input):
                examples.append(ex.example_id)
                yield ex
        except (ParseError, ValidationError) as exc:
            violations.append({"example_id": getattr(exc, "example_id", None), "field": "<record>", "message": str(exc)})

    violations = [v.to_dict() for v in validate_corpus(stream())] + violations
    lines = [dumps(v) for v in violations]
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(line + "\n" for line in lines)
        _write_manifest(args.output, args, [args.input])
    else:
        for line in lines:
            print(line)
    log.info("%d examples checked, %d violations", len(examples), len(violations))
    return EXIT_OK if not violations else EXIT_INPUT


def cmd_preprocess(args) -> int:
    _check_inputs(args.input, args.vocab)
    if args.seed is None:
        args.seed = 0
    config = GenConfig(
        max_seq_len=args.max_seq_len,
        stride=args.stride,
        max_question_wp=args.max_question_len,
        downsample_rate=args.downsample_rate,
        seed=args.seed,
        max_markup_index=args.max_markup_index,
    )
    vocab = load_vocab(args.vocab)
    counts = {"instances": 0, "null": 0}

    def counted(stream):
        for inst in stream:
            counts["instances"] += 1
            counts["null"] += inst.is_null
            yield inst.to_dict()

    stream = preprocess_corpus(iter_examples(args.input), vocab, config, args.mode, args.threads)
    write_jsonl(args.output, counted(stream), _header("instances", args.seed))
    _write_manifest(args.output, args, [args.input, args.vocab], {"counts": counts})
    log.info("wrote %d instances (%d null) to %s", counts["instances"], counts["null"], args.output)
    return EXIT_OK


def cmd_train_toy(args) -> int:
    _check_inputs(args.instances, args.vocab)
    _upstream_seed(args, args.instances)
    vocab = load_vocab(args.vocab)
    instances = list(_read_instances(args.instances))
    config = TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        embed_dim=args.embed_dim,
    )
    result = train(instances, config, len(vocab))
    final = mean_loss(result.params, instances)
    meta = {"seed": args.seed, "epoch_losses": result.epoch_losses, "final_mean_loss": final}
    save_params(result.params, args.output, meta)
    _write_manifest(args.output, args, [args.instances, args.vocab], {"final_mean_loss": final})
    log.info("trained %d steps; final mean loss %.6f", result.steps, final)
    return EXIT_OK


def cmd_score(args) -> int:
    _check_inputs(args.instances, args.params)
    _upstream_seed(args, args.instances)
    params = load_params(args.params)
    records = (r.to_dict() for r in score_instances(params, _read_instances(args.instances), args.threads))
    n = write_jsonl(args.output, records, _header("logits", args.seed))
    _write_manifest(args.output, args, [args.instances, args.params])
    log.info("scored %d instances", n)
    return EXIT_OK


def cmd_decode(args) -> int:
    _check_inputs(args.instances, args.logits, args.corpus)
    _upstream_seed(args, args.logits)
    config = DecodeConfig(
        max_answer_wp=args.max_answer_len,
        top_k=None if args.exhaustive else args.topk,
        forbid_interior_markup=args.forbid_interior_markup,
    )
    preds = decode_corpus(
        _read_instances(args.instances), _read_logits(args.logits), iter_examples(args.corpus), config, args.threads
    )
    n = write_jsonl(args.output, (p.to_dict() for p in preds), _header("predictions", args.seed))
    _write_manifest(args.output, args, [args.instances, args.logits, args.corpus])
    log.info("wrote %d predictions", n)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _check_inputs(args.predictions, args.gold)
    _upstream_seed(args, args.predictions)
    report = evaluate(args.predictions, args.gold, args.min_annotators)
    doc = {"_header": _header("report", args.seed), **report.to_dict(with_curve=args.dump_curve)}
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            json.dump(doc, f, indent=2, allow_nan=False)
            f.write("\n")
        _write_manifest(args.output, args, [args.predictions, args.gold])
    else:
        print(json.dumps(doc, indent=2, allow_nan=False))
    print(report.summary(), file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .corpus import serialize_example
    from .synthetic import synthetic_corpus, toy_vocab

    if args.seed is None:
        args.seed = 0
    corpus = synthetic_corpus(args.num_examples, args.seed, args.doc_tokens)
    with open(args.output, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(serialize_example(ex) + "\n" for ex in corpus)
    if args.vocab_output:
        write_vocab(args.vocab_output, toy_vocab(args.max_markup_index))
    _write_manifest(args.output, args, [])
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

def _env_defaults(parser: argparse.ArgumentParser) -> None:
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help",):
            continue
        flag = max(action.option_strings, key=len).lstrip("-")
        raw = os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"))
        if raw is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            action.default = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            try:
                action.default = action.type(raw) if action.type else raw
            except ValueError:
                raise UsageError(f"bad value {raw!r} for {ENV_PREFIX}{flag.upper().replace('-', '_')}") from None
            action.required = False


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nqjoint", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"nqjoint {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None, help="run seed (default: carried from the input header, else 0)")
        return p

    p = add("validate", cmd_validate, "check a corpus against the record schema and invariants")
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="write violations here instead of stdout")

    p = add("preprocess", cmd_preprocess, "turn a corpus into windowed instances")
    p.add_argument("--input", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--mode", choices=["train", "infer"], default="train")
    p.add_argument("--downsample-rate", type=int, default=50)
    p.add_argument("--max-seq-len", type=int, default=512)
    p.add_argument("--stride", type=int, default=128)
    p.add_argument("--max-question-len", type=int, default=64)
    p.add_argument("--max-markup-index", type=int, default=50)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output", required=True)

    p = add("train-toy", cmd_train_toy, "train the reference scorer with Adam")
    p.add_argument("--instances", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=3e-5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--output", required=True)

    p = add("score", cmd_score, "run the reference scorer over instances")
    p.add_argument("--instances", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output", required=True)

    p = add("decode", cmd_decode, "pick one short and long answer per example")
    p.add_argument("--instances", required=True)
    p.add_argument("--logits", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--max-answer-len", type=int, default=30)
    p.add_argument("--topk", type=int, default=20)
    p.add_argument("--exhaustive", action="store_true", help="score every span instead of top-k starts/ends")
    p.add_argument("--forbid-interior-markup", action="store_true")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output", required=True)

    p = add("evaluate", cmd_evaluate, "threshold-swept P/R/F1 for long and short answers")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--min-annotators", type=int, default=None,
                   help="default: 2 for 5-way annotated examples, else 1")
    p.add_argument("--dump-curve", action="store_true")
    p.add_argument("--output")

    p = add("synth", cmd_synth, "write a synthetic NQ-shaped corpus and toy vocab")
    p.add_argument("--output", required=True)
    p.add_argument("--vocab-output")
    p.add_argument("--num-examples", type=int, default=100)
    p.add_argument("--doc-tokens", type=int, default=400)
    p.add_argument("--max-markup-index", type=int, default=50)

    for sp in sub.choices.values():
        _env_defaults(sp)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"nqjoint: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except NQJointError as exc:
        log.error("%s", exc)
        return EXIT_INTERNAL
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
