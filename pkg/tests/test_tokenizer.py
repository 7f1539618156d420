import pytest
from hypothesis import given, settings, strategies as st

from nqjoint.errors import ConfigError
from nqjoint.synthetic import STEMS, SUFFIXES
from nqjoint.tokenizer import (
    CLS,
    REQUIRED_TOKENS,
    Vocab,
    TokenizerConfig,
    load_vocab,
    normalize,
    tokenize_document,
    tokenize_text,
    vocab_entries,
    wordpiece,
    write_vocab,
)

from conftest import make_example

SPECIALS = list(REQUIRED_TOKENS)


def test_load_reference_size_vocab(tmp_path):
    entries = SPECIALS + [f"tok{i}" for i in range(30522 - len(SPECIALS))]
    path = tmp_path / "vocab.txt"
    write_vocab(path, entries)
    vocab = load_vocab(path)
    assert len(vocab) == 30522
    assert vocab.id_of["tok0"] == len(SPECIALS)


def test_load_twelve_line_vocab(tmp_path):
    path = tmp_path / "vocab.txt"
    write_vocab(path, SPECIALS + ["a", "b", "c", "d", "e"])
    vocab = load_vocab(path)
    assert len(vocab) == 12
    assert [vocab.id_of[t] for t in SPECIALS] == list(range(7))


def test_missing_cls(tmp_path):
    path = tmp_path / "vocab.txt"
    write_vocab(path, [t for t in SPECIALS if t != CLS] + ["a"])
    with pytest.raises(ConfigError, match=r"\[CLS\]"):
        load_vocab(path)


def test_duplicate_token():
    with pytest.raises(ConfigError, match="duplicate"):
        Vocab(SPECIALS + ["a", "a"])


@pytest.fixture
def ua_vocab():
    return Vocab(vocab_entries(["un", "##aff", "##af", "##able", "##ffable", "big", "cats", "##s", "cat"]))


def test_wordpiece_identity(ua_vocab):
    assert wordpiece("big", ua_vocab) == [ua_vocab.id_of["big"]]


def test_wordpiece_unaffable(ua_vocab):
    # un | affable: "##affable".."##affa" miss, "##aff" hits | able: "##able" hits
    ids = wordpiece("unaffable", ua_vocab)
    assert ids == [ua_vocab.id_of[p] for p in ("un", "##aff", "##able")]


def test_wordpiece_longest_first(ua_vocab):
    assert wordpiece("cats", ua_vocab) == [ua_vocab.id_of["cats"]]


def test_wordpiece_no_first_piece(ua_vocab):
    assert wordpiece("zebra", ua_vocab) == [ua_vocab.unk_id]


def test_wordpiece_unmatched_tail_is_whole_unk(ua_vocab):
    assert wordpiece("unzz", ua_vocab) == [ua_vocab.unk_id]


def test_wordpiece_overlong_token(ua_vocab):
    assert wordpiece("un" * 60, ua_vocab) == [ua_vocab.unk_id]


def test_normalize():
    assert normalize("Séries") == "series"
    assert normalize("ÅNGSTRÖM") == "angstrom"


def test_tokenize_document_markup(ua_vocab):
    ex = make_example("<P> big cats <Table> <Tr>")
    doc = tokenize_document(ex, ua_vocab)
    assert doc.wp_ids == tuple(ua_vocab.id_of[t] for t in ("[Paragraph=1]", "big", "cats", "[Table=1]"))
    assert doc.wp_to_doc == (-1, 1, 2, -1)


def test_tokenize_document_numbered_markup(vocab):
    ex = make_example("<P> the king <Table> <Tr> <Td> war </Td> </Tr> </Table> <P> a <Ul> <Li> b")
    doc = tokenize_document(ex, vocab)
    names = [vocab.entries[i] for i in doc.wp_ids]
    assert names == ["[Paragraph=1]", "the", "king", "[Table=1]", "war", "[Paragraph=2]", "a", "[List=1]", "[UNK]"]
    assert doc.wp_to_doc == (-1, 1, 2, -1, 6, -1, 11, -1, 14)
    assert doc.markup_count == {"Paragraph": 2, "Table": 1, "List": 1}


def test_no_html_means_no_markup(vocab):
    doc = tokenize_document(make_example("the king won the war"), vocab)
    assert -1 not in doc.wp_to_doc
    assert doc.wp_to_doc == (0, 1, 2, 3, 4)


def test_list_kinds_share_counter_case_insensitive(vocab):
    doc = tokenize_document(make_example("<ul> a <OL> a <Dl> a <p>"), vocab)
    names = [vocab.entries[i] for i, j in zip(doc.wp_ids, doc.wp_to_doc) if j < 0]
    assert names == ["[List=1]", "[List=2]", "[List=3]", "[Paragraph=1]"]


def test_markup_cap(vocab):
    doc = tokenize_document(make_example("<P> <P> <P>"), vocab, TokenizerConfig(max_markup_index=2))
    assert [vocab.entries[i] for i in doc.wp_ids] == ["[Paragraph=1]", "[Paragraph=2]", "[Paragraph]"]


def test_markup_beyond_vocab_block_falls_back():
    small = Vocab(vocab_entries(["a"], max_markup_index=1))
    doc = tokenize_document(make_example("<P> a <P> a"), small)
    assert [small.entries[i] for i in doc.wp_ids] == ["[Paragraph=1]", "a", "[Paragraph]", "a"]


def test_markup_token_is_atomic(vocab):
    for tok in ["[Paragraph=3]", "[Table=50]", "[List]", "[CLS]", "[SEP]", "[UNK]", "[PAD]"]:
        assert vocab.tokenize_word(tok) == (vocab.id_of[tok],)


def test_question_tokens(vocab):
    ids = tokenize_text("Who  played\tkings", vocab)
    assert [vocab.entries[i] for i in ids] == ["who", "played", "king", "##s"]


@given(st.sampled_from([e for e in vocab_entries([], 50) if e.startswith("[")]))
def test_atomicity_property(tok):
    vocab = Vocab(vocab_entries(["a"], 50))
    assert len(vocab.tokenize_word(tok)) == 1


doc_word = st.builds(
    lambda stem, suffix, upper: (stem + suffix).upper() if upper else stem + suffix,
    st.sampled_from(STEMS), st.sampled_from(("",) + SUFFIXES), st.booleans(),
)
doc_token = st.one_of(doc_word, st.sampled_from(["<P>", "</P>", "<Table>", "<Td>", "<Ul>", "<Li>"]))


@settings(max_examples=150)
@given(st.lists(doc_token, min_size=1, max_size=40))
def test_alignment_reconstructs_tokens(vocab, tokens):
    ex = make_example(" ".join(tokens))
    doc = tokenize_document(ex, vocab)
    assert len(doc.wp_ids) == len(doc.wp_to_doc)
    content = [j for j in doc.wp_to_doc if j >= 0]
    assert content == sorted(content)
    pieces: dict[int, str] = {}
    for i, j in zip(doc.wp_ids, doc.wp_to_doc):
        if j >= 0:
            pieces[j] = pieces.get(j, "") + vocab.entries[i].removeprefix("##")
    for j, text in pieces.items():
        assert text == normalize(tokens[j])
    # every non-html token contributes
    assert set(pieces) == {j for j, t in enumerate(tokens) if not ex.doc_tokens[j].is_html}


@given(st.lists(doc_token, min_size=1, max_size=40))
def test_tokenize_deterministic(vocab, tokens):
    ex = make_example(" ".join(tokens))
    fresh = Vocab(vocab.entries)
    assert tokenize_document(ex, vocab) == tokenize_document(ex, fresh)
