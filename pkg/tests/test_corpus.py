"""Corpus parsing, validation, serialization, and sampling."""

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpretrieval.corpus import (
    CorpusSplit,
    TaggedSentence,
    bio_violations,
    parse_conll,
    parse_conllu,
    repair_bio,
    sample_test_subset,
    scheme_for_task,
    serialize_conll,
    serialize_conllu,
    to_jsonl,
)
from cpretrieval.errors import ParseError, SchemeViolationError

from conftest import make_ner_corpus

NER = scheme_for_task("ner")
POS = scheme_for_task("pos")

CONLL2003_BLOCK = """EU NNP B-NP B-ORG
rejects VBZ B-VP O
"""

CONLLU_DOC = """# newdoc id = test-doc
# sent_id = 1
# text = Many forms of culture .
1\tMany\tmany\tADJ\tJJ\t_\t2\tamod\t_\t_
2\tforms\tform\tNOUN\tNNS\t_\t0\troot\t_\t_
3\tof\tof\tADP\tIN\t_\t4\tcase\t_\t_
4\tculture\tculture\tNOUN\tNN\t_\t2\tnmod\t_\t_
5\t.\t.\tPUNCT\t.\t_\t2\tpunct\t_\t_

# sent_id = 2
1-2\tcannot\t_\t_\t_\t_\t_\t_\t_\t_
1\tcan\tcan\tAUX\tMD\t_\t0\troot\t_\t_
2\tnot\tnot\tPART\tRB\t_\t1\tadvmod\t_\t_
2.1\tghost\tghost\tNOUN\t_\t_\t_\t_\t_\t_
3\tstop\tstop\tVERB\tVB\t_\t1\txcomp\t_\t_
"""


class TestParseConll:
    def test_two_sentence_block(self):
        split = parse_conll(CONLL2003_BLOCK, column=3, scheme=NER)
        assert len(split) == 1
        assert split[0].tokens == ("EU", "rejects")
        assert split[0].labels == ("B-ORG", "O")

    def test_empty_input_gives_empty_split(self):
        split = parse_conll("", column=3, scheme=NER)
        assert len(split) == 0

    def test_docstart_blocks_dropped(self):
        text = "-DOCSTART- -X- -X- O\n\n" + CONLL2003_BLOCK
        split = parse_conll(text, column=3, scheme=NER)
        assert len(split) == 1
        assert split[0].tokens == ("EU", "rejects")

    def test_wrong_column_count_reports_line_number(self):
        text = "EU NNP B-NP B-ORG\nrejects VBZ\n"
        with pytest.raises(ParseError, match="line 2"):
            parse_conll(text, column=3, scheme=NER)

    def test_unknown_label_names_it(self):
        text = "EU NNP B-NP B-COMPANY\n"
        with pytest.raises(SchemeViolationError, match="B-COMPANY"):
            parse_conll(text, column=3, scheme=NER)

    def test_underscore_token_rejected(self):
        text = "foo_bar NNP B-NP O\n"
        with pytest.raises(ParseError, match="underscore"):
            parse_conll(text, column=3, scheme=NER)

    def test_tag_column_out_of_range(self):
        with pytest.raises(ParseError, match="column"):
            parse_conll("EU NNP B-NP B-ORG\n", column=4, scheme=NER)

    def test_ids_are_dense_and_file_ordered(self):
        text = "a x y O\n\nb x y B-PER\n\nc x y O\n"
        split = parse_conll(text, column=3, scheme=NER)
        assert [s.id for s in split] == [0, 1, 2]
        assert [s.tokens[0] for s in split] == ["a", "b", "c"]

    def test_invalid_bio_repaired_by_default(self):
        text = "a x y I-PER\nb x y I-PER\n"
        split = parse_conll(text, column=3, scheme=NER)
        assert split[0].labels == ("B-PER", "I-PER")

    def test_invalid_bio_reject_drops_sentence(self):
        text = "a x y I-PER\n\nb x y B-PER\n"
        split = parse_conll(text, column=3, scheme=NER, on_invalid_bio="reject")
        assert len(split) == 1
        assert split[0].tokens == ("b",)

    def test_token_count_27_round_trips(self):
        tokens = [f"tok{i}" for i in range(27)]
        labels = ["O"] * 25 + ["B-LOC", "I-LOC"]
        text = "\n".join(f"{t} {l}" for t, l in zip(tokens, labels)) + "\n"
        split = parse_conll(text, column=1, scheme=NER)
        assert len(split[0]) == 27
        assert serialize_conll(split) == text


class TestParseConllu:
    def test_upos_sentence(self):
        split = parse_conllu(CONLLU_DOC)
        assert len(split) == 2
        assert split[0].tokens == ("Many", "forms", "of", "culture", ".")
        assert split[0].labels == ("ADJ", "NOUN", "ADP", "NOUN", "PUNCT")

    def test_ranges_and_empty_nodes_skipped(self):
        split = parse_conllu(CONLLU_DOC)
        assert split[1].tokens == ("can", "not", "stop")
        assert split[1].labels == ("AUX", "PART", "VERB")

    def test_comment_only_file_is_empty(self):
        split = parse_conllu("# text = nothing here\n# sent_id = 9\n")
        assert len(split) == 0

    def test_missing_upos_is_scheme_violation(self):
        bad = "1\tword\tword\t_\tNN\t_\t0\troot\t_\t_\n"
        with pytest.raises(SchemeViolationError, match="UPOS"):
            parse_conllu(bad)

    def test_wrong_column_count_reports_line(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_conllu("1\tword\tword\n")

    def test_minimal_serialization_reparses_identically(self):
        split = parse_conllu(CONLLU_DOC)
        again = parse_conllu(serialize_conllu(split))
        assert [s.tokens for s in again] == [s.tokens for s in split]
        assert [s.labels for s in again] == [s.labels for s in split]


_token = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), max_codepoint=0x7F),
    min_size=1,
    max_size=8,
)


@st.composite
def conll_corpus_text(draw):
    """Two-column corpus text built by hand, independent of the serializer."""
    n_sentences = draw(st.integers(1, 5))
    blocks = []
    for _ in range(n_sentences):
        n = draw(st.integers(1, 6))
        lines = []
        prev = "O"
        for _ in range(n):
            token = draw(_token)
            choices = ["O", "B-PER", "B-ORG"]
            if prev.startswith(("B-", "I-")):
                choices.append("I-" + prev[2:])
            label = draw(st.sampled_from(choices))
            prev = label
            lines.append(f"{token} {label}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


class TestRoundTrip:
    @settings(max_examples=200, deadline=None)
    @given(conll_corpus_text())
    def test_serialize_parse_identity(self, text):
        split = parse_conll(text, column=1, scheme=NER)
        assert serialize_conll(split) == text

    def test_jsonl_export_fields(self):
        split = parse_conll(CONLL2003_BLOCK, column=3, scheme=NER)
        rec = json.loads(to_jsonl(split).splitlines()[0])
        assert rec == {"id": 0, "tokens": ["EU", "rejects"], "labels": ["B-ORG", "O"]}


def brute_force_bio_violations(labels):
    """Independent scan: I-X is bad unless the previous label is B-X/I-X."""
    bad = []
    for i, lab in enumerate(labels):
        if not lab.startswith("I-"):
            continue
        if i == 0 or labels[i - 1] not in ("B-" + lab[2:], "I-" + lab[2:]):
            bad.append(i)
    return bad


class TestBioValidity:
    @pytest.mark.parametrize("labels,expected", [
        (["B-PER", "I-PER", "O"], []),
        (["I-PER"], [0]),
        (["O", "I-LOC", "I-LOC"], [1]),
        (["B-PER", "I-ORG"], [1]),
    ])
    def test_known_cases(self, labels, expected):
        assert bio_violations(labels) == expected

    def test_matches_brute_force_on_random_sequences(self):
        rng = random.Random(7)
        labels_all = list(NER.labels)
        for _ in range(1000):
            seq = [rng.choice(labels_all) for _ in range(rng.randint(1, 12))]
            assert bio_violations(seq) == brute_force_bio_violations(seq)

    def test_repair_produces_valid_sequences(self):
        rng = random.Random(11)
        labels_all = list(NER.labels)
        for _ in range(300):
            seq = [rng.choice(labels_all) for _ in range(rng.randint(1, 12))]
            repaired, n = repair_bio(seq)
            assert bio_violations(repaired) == []
            assert n == len(bio_violations(seq))
            assert len(repaired) == len(seq)


class TestSampling:
    def test_subset_size(self):
        split = make_ner_corpus(40, seed=3)
        sub = sample_test_subset(split, 10, seed=5)
        assert len(sub) == 10
        assert [s.id for s in sub] == list(range(10))

    def test_full_size_returns_original_order(self):
        split = make_ner_corpus(12, seed=3)
        sub = sample_test_subset(split, 12, seed=5)
        assert [s.tokens for s in sub] == [s.tokens for s in split]

    def test_oversized_request_warns_and_returns_all(self, caplog):
        split = make_ner_corpus(8, seed=3)
        with caplog.at_level("WARNING"):
            sub = sample_test_subset(split, 100, seed=5)
        assert len(sub) == 8
        assert any("returning all" in r.message for r in caplog.records)

    def test_same_seed_identical_subset(self):
        split = make_ner_corpus(60, seed=3)
        a = sample_test_subset(split, 25, seed=99)
        b = sample_test_subset(split, 25, seed=99)
        assert [s.tokens for s in a] == [s.tokens for s in b]

    def test_different_seed_differs(self):
        split = make_ner_corpus(60, seed=3)
        a = sample_test_subset(split, 25, seed=1)
        b = sample_test_subset(split, 25, seed=2)
        assert [s.tokens for s in a] != [s.tokens for s in b]


class TestInvariants:
    def test_every_label_in_scheme(self):
        split = make_ner_corpus(50, seed=9)
        assert all(l in NER for s in split for l in s.labels)

    def test_sentence_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            TaggedSentence(0, ("a", "b"), ("O",))

    def test_non_dense_ids_rejected(self):
        s = TaggedSentence(4, ("a",), ("O",))
        with pytest.raises(ValueError):
            CorpusSplit("x", (s,), NER)
