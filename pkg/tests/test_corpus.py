import json
import re

import pytest
from hypothesis import given, strategies as st

from nqjoint.corpus import (
    Annotation,
    DocToken,
    Example,
    LongAnswerCandidate,
    YesNo,
    is_html_token,
    iter_examples,
    parse_example,
    serialize_example,
    validate_corpus,
)
from nqjoint.errors import ParseError, ValidationError

from conftest import DATA, make_example

NULL_LONG = {"start_token": -1, "end_token": -1}


def record(**overrides):
    rec = {
        "example_id": 7,
        "question_text": "who won",
        "document_text": "<P> the king won </P>",
        "long_answer_candidates": [{"start_token": 0, "end_token": 5, "top_level": True}],
        "annotations": [{"long_answer": NULL_LONG, "short_answers": [], "yes_no_answer": "NONE"}],
    }
    rec.update(overrides)
    return json.dumps(rec)


def test_null_annotation():
    ex = parse_example(record())
    assert ex.annotations == (Annotation(None, (), YesNo.NONE),)
    assert ex.annotations[0].is_null


def test_fields_populated():
    ex = parse_example(record())
    assert ex.example_id == 7
    assert [t.text for t in ex.doc_tokens] == ["<P>", "the", "king", "won", "</P>"]
    assert [t.index for t in ex.doc_tokens] == [0, 1, 2, 3, 4]
    assert [t.is_html for t in ex.doc_tokens] == [True, False, False, False, True]
    assert ex.candidates == (LongAnswerCandidate(0, 5, True),)


def test_empty_document():
    with pytest.raises(ValidationError, match="empty document"):
        parse_example(record(document_text=""))


def test_round_trip_canonical_three_tokens():
    canonical = (
        '{"example_id":3,"question_text":"q","document_text":"<P> a </P>",'
        '"long_answer_candidates":[{"start_token":0,"end_token":3,"top_level":true}],'
        '"annotations":[{"long_answer":{"start_token":0,"end_token":3},'
        '"short_answers":[{"start_token":1,"end_token":2}],"yes_no_answer":"NONE"}]}'
    )
    assert serialize_example(parse_example(canonical)) == canonical


@pytest.mark.parametrize("field,value", [
    ("example_id", "7"),
    ("example_id", True),
    ("question_text", 3),
    ("document_text", None),
    ("long_answer_candidates", {}),
])
def test_malformed_field_named(field, value):
    with pytest.raises(ParseError) as info:
        parse_example(record(**{field: value}))
    assert field in str(info.value)


def test_missing_field_named():
    rec = json.loads(record())
    del rec["annotations"][0]["yes_no_answer"]
    with pytest.raises(ParseError, match=r"annotations\[0\]\.yes_no_answer"):
        parse_example(json.dumps(rec))


def test_bad_yes_no_value():
    rec = json.loads(record())
    rec["annotations"][0]["yes_no_answer"] = "MAYBE"
    with pytest.raises(ParseError, match="yes_no_answer"):
        parse_example(json.dumps(rec))


def test_invalid_json():
    with pytest.raises(ParseError, match="invalid JSON"):
        parse_example("{not json")


@pytest.mark.parametrize("span", [(0, 6), (-2, 1), (3, 3)])
def test_span_outside_document(span):
    rec = json.loads(record())
    rec["annotations"][0]["short_answers"] = [{"start_token": span[0], "end_token": span[1]}]
    with pytest.raises(ValidationError) as info:
        parse_example(json.dumps(rec))
    assert info.value.example_id == 7
    assert "7" in str(info.value)


def test_double_space_rejected():
    with pytest.raises(ValidationError, match="empty token"):
        parse_example(record(document_text="a  b"))


def test_unknown_fields_ignored():
    rec = json.loads(record())
    rec["document_url"] = "http://x"
    rec["annotations"][0]["annotation_id"] = 99
    assert parse_example(json.dumps(rec)).example_id == 7


def test_iter_examples_reports_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(record() + "\n" + record(document_text="") + "\n")
    it = iter_examples(path)
    assert next(it).example_id == 7
    with pytest.raises(ValidationError) as info:
        next(it)
    assert info.value.line == 2


def test_fixture_corpus_streams():
    ids = [ex.example_id for ex in iter_examples(DATA / "fixture_corpus.jsonl")]
    assert ids == [101, 102, 103]


# --------------------------------------------------------------------------
# validation

def clean_examples():
    out = []
    for i in range(5):
        ann = Annotation((0, 4), ((1, 2),), YesNo.NONE) if i % 2 else Annotation()
        out.append(make_example("<P> a b </P>", example_id=i, candidates=[(0, 4, True)], annotations=[ann]))
    return out


def test_clean_corpus():
    assert validate_corpus(clean_examples()) == []


def test_long_span_not_a_candidate():
    exs = clean_examples()
    exs[1] = make_example("<P> a b </P>", example_id=1, candidates=[(0, 4, True)],
                          annotations=[Annotation((1, 3), (), YesNo.NONE)])
    violations = validate_corpus(exs)
    assert len(violations) == 1
    assert violations[0].example_id == 1
    assert "candidate" in violations[0].message


def test_duplicate_id_names_both_records():
    exs = clean_examples()
    exs[3] = make_example("<P> a b </P>", example_id=0, candidates=[(0, 4, True)])
    violations = validate_corpus(exs)
    assert len(violations) == 1
    assert violations[0].field == "example_id"
    assert "records 0 and 3" in violations[0].message


@pytest.mark.parametrize("ann,fragment", [
    (Annotation(None, ((1, 2),), YesNo.NONE), "without a long answer"),
    (Annotation((0, 4), ((1, 2),), YesNo.YES), "yes/no"),
    (Annotation((0, 2), ((2, 3),), YesNo.NONE), "outside long answer"),
])
def test_annotation_invariants(ann, fragment):
    ex = make_example("<P> a b </P>", candidates=[(0, 4, True), (0, 2, False)], annotations=[ann])
    messages = [v.message for v in validate_corpus([ex])]
    assert any(fragment in m for m in messages), messages


# --------------------------------------------------------------------------
# properties

token_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=12)


@given(token_text)
def test_is_html_matches_regex(text):
    assert is_html_token(text) == bool(re.fullmatch(r"<\S*>", text))


@given(st.lists(st.sampled_from(["<P>", "</P>", "a", "b", "<Td>"]), min_size=1, max_size=8))
def test_is_html_on_doc_tokens(tokens):
    ex = make_example(" ".join(tokens))
    for t in ex.doc_tokens:
        assert t.is_html == (t.text.startswith("<") and t.text.endswith(">"))


word = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Zs", "Zl", "Zp", "Cc")), min_size=1, max_size=6)


@st.composite
def canonical_examples(draw):
    words = draw(st.lists(word, min_size=1, max_size=10))
    n = len(words)
    span = st.tuples(st.integers(0, n - 1), st.integers(1, n)).filter(lambda s: s[0] < s[1])
    cands = draw(st.lists(st.tuples(span, st.booleans()), max_size=3))
    anns = []
    for _ in range(draw(st.integers(1, 5))):
        long_ = draw(st.none() | span)
        shorts = tuple(draw(st.lists(span, max_size=2)))
        yn = draw(st.sampled_from(list(YesNo)))
        anns.append(Annotation(long_, shorts, yn))
    return Example(
        draw(st.integers(-(2 ** 63), 2 ** 63 - 1)),
        draw(st.text(max_size=20)),
        tuple(DocToken(w, i) for i, w in enumerate(words)),
        tuple(LongAnswerCandidate(s[0], s[1], top) for s, top in cands),
        tuple(anns),
    )


@given(canonical_examples())
def test_parse_serialize_identity(ex):
    line = serialize_example(ex)
    assert parse_example(line) == ex
    assert serialize_example(parse_example(line)) == line
