"""Seeded NQ-shaped synthetic corpora and matching toy vocabularies.

Documents are sequences of paragraphs, tables and lists built from a small
closed word list, so every content token wordpieces without [UNK]. Roughly
half of the examples carry no answer, mirroring the real data.
"""

from __future__ import annotations

import random

from .corpus import Example, example_from_dict
from .tokenizer import vocab_entries

STEMS = (
    "the", "a", "of", "in", "river", "city", "king", "war", "song", "film", "year", "team",
    "born", "won", "played", "first", "last", "north", "south", "album", "series", "game",
    "state", "party", "world", "cup", "book", "novel", "author", "season", "episode",
    "actor", "capital", "island", "mountain", "lake", "bridge", "church", "school", "army",
)
SUFFIXES = ("s", "ed", "ing", "er")
QUESTION_WORDS = ("who", "what", "when", "where", "which", "how", "many", "is", "did")


def toy_vocab(max_markup_index: int = 50) -> list[str]:
    words = list(STEMS) + list(QUESTION_WORDS) + ["##" + s for s in SUFFIXES] + [str(d) for d in range(10)]
    return vocab_entries(words, max_markup_index)


def _word(rng: random.Random) -> str:
    w = rng.choice(STEMS)
    if rng.random() < 0.15:
        w += rng.choice(SUFFIXES)
    if rng.random() < 0.05:
        w = w.capitalize()
    return w


def synthetic_record(example_id: int, rng: random.Random, target_tokens: int = 400) -> dict:
    tokens: list[str] = []
    candidates: list[dict] = []
    while len(tokens) < target_tokens:
        start = len(tokens)
        kind = rng.random()
        if kind < 0.7:
            tokens.append("<P>")
            tokens += [_word(rng) for _ in range(rng.randint(5, 40))]
            tokens.append("</P>")
        elif kind < 0.85:
            tokens += ["<Table>"]
            for _ in range(rng.randint(1, 3)):
                row = len(tokens)
                tokens += ["<Tr>", "<Td>"] + [_word(rng) for _ in range(rng.randint(1, 6))] + ["</Td>", "</Tr>"]
                candidates.append({"start_token": row, "end_token": len(tokens), "top_level": False})
            tokens.append("</Table>")
        else:
            tag = rng.choice(["Ul", "Ol"])
            tokens.append(f"<{tag}>")
            for _ in range(rng.randint(1, 4)):
                item = len(tokens)
                tokens += ["<Li>"] + [_word(rng) for _ in range(rng.randint(1, 6))] + ["</Li>"]
                candidates.append({"start_token": item, "end_token": len(tokens), "top_level": False})
            tokens.append(f"</{tag}>")
        candidates.append({"start_token": start, "end_token": len(tokens), "top_level": True})
    candidates.sort(key=lambda c: (c["start_token"], -c["end_token"]))

    null_long = {"start_token": -1, "end_token": -1}
    annotation = {"long_answer": null_long, "short_answers": [], "yes_no_answer": "NONE"}
    if rng.random() < 0.5:
        top = [c for c in candidates if c["top_level"]]
        cand = rng.choice(top)
        annotation["long_answer"] = {"start_token": cand["start_token"], "end_token": cand["end_token"]}
        content = [i for i in range(cand["start_token"], cand["end_token"]) if not tokens[i].startswith("<")]
        r = rng.random()
        if r < 0.05:
            annotation["yes_no_answer"] = rng.choice(["YES", "NO"])
        elif r < 0.75 and content:
            a = rng.randrange(len(content))
            b = min(len(content) - 1, a + rng.randint(0, 3))
            annotation["short_answers"] = [{"start_token": content[a], "end_token": content[b] + 1}]
    question = " ".join([rng.choice(QUESTION_WORDS)] + [_word(rng) for _ in range(rng.randint(3, 10))])
    return {
        "example_id": example_id,
        "question_text": question,
        "document_text": " ".join(tokens),
        "long_answer_candidates": candidates,
        "annotations": [annotation],
    }


def synthetic_corpus(n: int, seed: int = 0, target_tokens: int = 400) -> list[Example]:
    rng = random.Random(seed)
    return [
        example_from_dict(synthetic_record(rng.getrandbits(62), rng, target_tokens))
        for _ in range(n)
    ]
