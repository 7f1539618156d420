from pathlib import Path

import pytest

import numpy as np

from nqjoint.corpus import Annotation, DocToken, Example, LongAnswerCandidate
from nqjoint.instances import AnswerType, TrainingInstance
from nqjoint.scorer import LogitsRecord, init_params
from nqjoint.synthetic import toy_vocab
from nqjoint.tokenizer import Vocab, load_vocab

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def vocab() -> Vocab:
    return Vocab(toy_vocab())


@pytest.fixture(scope="session")
def fixture_vocab() -> Vocab:
    return load_vocab(DATA / "toy_vocab.txt")


def make_example(doc: str, example_id: int = 1, question: str = "who", candidates=(), annotations=None) -> Example:
    tokens = tuple(DocToken(t, i) for i, t in enumerate(doc.split(" ")))
    cands = tuple(LongAnswerCandidate(*c) for c in candidates)
    anns = tuple(annotations) if annotations is not None else (Annotation(),)
    return Example(example_id, question, tokens, cands, anns)


def random_instance(rng, vocab_size: int, n: int, example_id: int = 0) -> TrainingInstance:
    """[CLS] content [SEP]-shaped instance (n >= 2) with random ids and a random target."""
    ids = tuple(int(x) for x in rng.integers(0, vocab_size, n))
    s = int(rng.integers(0, n))
    e = int(rng.integers(s, n))
    t = AnswerType(int(rng.integers(0, 5)))
    wp_to_doc = (-1,) + tuple(range(n - 2)) + (-1,)
    return TrainingInstance(example_id, 0, ids, wp_to_doc, n - 2, s, e, t)


def scaled_params(vocab_size: int, d: int, seed: int, scale: float = 10.0):
    """init_params with a larger spread, so gradients are not vanishingly small."""
    p = init_params(vocab_size, d, seed)
    for a in p.arrays():
        a *= scale
    return p


def random_logits(rng, inst, scale: float = 2.0, quantum: float | None = None) -> LogitsRecord:
    """Gaussian logits for ``inst``; rounding to ``quantum`` manufactures exact ties."""
    n = len(inst)
    arrs = [rng.normal(0, scale, n), rng.normal(0, scale, n), rng.normal(0, scale, 5)]
    if quantum:
        arrs = [np.round(a / quantum) * quantum for a in arrs]
    return LogitsRecord(inst.example_id, inst.window_start, *arrs)
