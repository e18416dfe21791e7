"""Parsing and validating tagging corpora.

Walks through the two supported input formats: blank-line-separated column
files (NER/chunking style) and CoNLL-U treebanks (UPOS tagging), including
what happens to document markers and broken BIO transitions.
"""

from cpretrieval import parse_conll, parse_conllu, scheme_for_task, to_jsonl

# A small column-format corpus: token, POS, chunk, NER tag.  The tag column
# is configurable because real corpora disagree about where the tag lives.
NER_TEXT = """\
-DOCSTART- -X- -X- O

The DT B-NP O
Finance NNP I-NP B-ORG
Ministry NNP I-NP I-ORG
raised VBD B-VP O
prices NNS B-NP O
. . O O

Swiss JJ B-NP B-MISC
bonds NNS I-NP O
ended VBD B-VP O
higher RBR B-ADVP O
. . O O
"""

ner = scheme_for_task("ner")
split = parse_conll(NER_TEXT, column=3, scheme=ner, name="demo")

print(f"parsed {len(split)} sentences ({split.token_count()} tokens)")
print("the -DOCSTART- block is a document marker, not a sentence, so it is dropped\n")

for sentence in split:
    pairs = ", ".join(f"{t}/{l}" for t, l in zip(sentence.tokens, sentence.labels))
    print(f"  [{sentence.id}] {pairs}")

# Label inventories are closed: anything outside the scheme is an error.
print(f"\nscheme '{ner.task}' has {len(ner.labels)} labels: {', '.join(ner.labels)}")

# Broken BIO transitions (an I-X with no live X span) are repaired to B-X by
# default; pass on_invalid_bio="reject" to drop such sentences instead.
BROKEN = "old JJ B-NP I-LOC\ntown NN I-NP I-LOC\n"
repaired = parse_conll(BROKEN, column=3, scheme=ner)
print(f"\nbroken BIO input  : I-LOC I-LOC")
print(f"after repair      : {' '.join(repaired[0].labels)}")

# CoNLL-U input: tokens come from FORM, labels from UPOS.  Multiword ranges
# ("1-2") and empty nodes ("2.1") are skipped; comments are ignored.
CONLLU_TEXT = """\
# sent_id = demo-1
1\tMany\tmany\tADJ\t_\t_\t2\t_\t_\t_
2\tforms\tform\tNOUN\t_\t_\t0\t_\t_\t_
3\tof\tof\tADP\t_\t_\t4\t_\t_\t_
4\tculture\tculture\tNOUN\t_\t_\t2\t_\t_\t_
5\t.\t.\tPUNCT\t_\t_\t2\t_\t_\t_
"""

pos_split = parse_conllu(CONLLU_TEXT, name="demo")
sentence = pos_split[0]
print("\nCoNLL-U sentence:")
print("  " + " ".join(f"{t}_{l}" for t, l in zip(sentence.tokens, sentence.labels)))

# Splits export to JSON lines for downstream tooling.
print("\nJSON-lines export of the first NER sentence:")
print("  " + to_jsonl(split).splitlines()[0])
