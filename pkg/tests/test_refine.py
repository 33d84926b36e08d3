import pytest
from hypothesis import given, strategies as st

from diarefine.adjudicate import LlmLabelResult
from diarefine.core import UNKNOWN, DiarSegment, SegmentOrigin, TimeInterval, Word
from diarefine.errors import MissingIdentity
from diarefine.refine import (
    AdjudicationRecord,
    FinalSegment,
    Provenance,
    clean_duplicates,
    majority_vote,
    merge_adjacent,
    refine_segment,
)

MAP = {"spk0": "Patient", "spk1": "Clinician", "spk2": "Patient", UNKNOWN: UNKNOWN}


def seg(a=0.0, b=5.0, label="spk0", texts=("well", "yes")):
    step = (b - a) / (len(texts) + 1) if texts else 1.0
    words = tuple(
        Word(t, TimeInterval(a + step * i, a + step * i + step / 4))
        for i, t in enumerate(texts)
    )
    return DiarSegment(TimeInterval(a, b), label, words)


def llm(label, confidence):
    return LlmLabelResult(0, label, confidence, "")


def run(original, reverified, llm_result, mapping=MAP, threshold=0.9):
    record = AdjudicationRecord(0, original, reverified, llm_result)
    return refine_segment(seg(label=original if original != UNKNOWN else "spk0"),
                          record, mapping, threshold)


# --- majority vote -----------------------------------------------------------


@pytest.mark.parametrize(
    "votes,expected",
    [
        (("P", "P", "C"), "P"),
        (("P", "C", "C"), "C"),
        (("P", "C", "S"), "P"),  # three-way tie falls back to the first
        (("C", "P", "C"), "C"),
        (("P", "P", "P"), "P"),
    ],
)
def test_majority_vote(votes, expected):
    assert majority_vote(*votes) == expected


# --- the decision tree --------------------------------------------------------


def test_agreeing_labels_keep_original_identity():
    out = run("spk0", "spk0", None)
    assert (out.identity, out.provenance) == ("Patient", Provenance.ORIGINAL_AGREED)


def test_unknown_with_confident_llm_is_assigned():
    out = run(UNKNOWN, UNKNOWN, llm("spk1", 0.95))
    assert (out.identity, out.provenance) == ("Clinician", Provenance.LLM_ASSIGNED)


def test_unknown_with_unconfident_llm_is_retained():
    out = run(UNKNOWN, UNKNOWN, llm("spk1", 0.5))
    assert (out.identity, out.provenance) == (UNKNOWN, Provenance.UNKNOWN_RETAINED)


def test_unknown_with_llm_unknown_is_retained():
    out = run(UNKNOWN, UNKNOWN, llm(UNKNOWN, 0.99))
    assert (out.identity, out.provenance) == (UNKNOWN, Provenance.UNKNOWN_RETAINED)


def test_disagreement_with_unconfident_llm_keeps_original():
    out = run("spk0", "spk1", llm("spk1", 0.89))
    assert (out.identity, out.provenance) == ("Patient", Provenance.ORIGINAL_AGREED)


def test_disagreement_votes_when_confident():
    # all three map to Patient via spk0/spk2 merge
    out = run("spk0", "spk2", llm("spk2", 0.95))
    assert (out.identity, out.provenance) == ("Patient", Provenance.MAJORITY_VOTE)


def test_vote_two_against_one():
    out = run("spk0", "spk1", llm("spk1", 0.95))
    assert (out.identity, out.provenance) == ("Clinician", Provenance.MAJORITY_VOTE)


def test_missing_identity_raises():
    with pytest.raises(MissingIdentity):
        run("spk9", "spk9", None, mapping={"spk0": "Patient"})


def test_threshold_is_inclusive():
    out = run("spk0", "spk1", llm("spk1", 0.9))
    assert out.provenance is Provenance.MAJORITY_VOTE


def test_source_ids_carried():
    record = AdjudicationRecord(7, "spk0", "spk0", None)
    out = refine_segment(seg(), record, MAP, 0.9)
    assert out.source_ids == (7,)


# --- merge_adjacent ----------------------------------------------------------------


def fseg(a, b, identity, texts=("hi",), provenance=Provenance.ORIGINAL_AGREED, ids=(0,)):
    step = (b - a) / (len(texts) + 1)
    words = tuple(
        Word(t, TimeInterval(a + step * i, a + step * i + step / 4))
        for i, t in enumerate(texts)
    )
    return FinalSegment(TimeInterval(a, b), identity, words, provenance, ids)


def test_merge_within_gap():
    merged = merge_adjacent(
        [fseg(0, 5, "Patient", ids=(0,)), fseg(5.2, 9, "Patient", ids=(1,))], max_gap=0.5
    )
    assert len(merged) == 1
    assert merged[0].interval == TimeInterval(0, 9)
    assert merged[0].source_ids == (0, 1)


def test_merge_skips_interleaved_identities():
    segments = [fseg(0, 5, "P"), fseg(5, 9, "C"), fseg(9, 12, "P")]
    assert merge_adjacent(segments, max_gap=0.5) == segments


def test_merge_respects_gap():
    segments = [fseg(0, 5, "P"), fseg(5.6, 9, "P")]
    assert merge_adjacent(segments, max_gap=0.5) == segments


def test_merge_never_touches_unknown():
    segments = [fseg(0, 5, UNKNOWN), fseg(5.0, 9, UNKNOWN)]
    assert merge_adjacent(segments, max_gap=1.0) == segments


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 10), st.sampled_from("PQ")), max_size=8))
def test_merge_preserves_words_and_span(raw):
    segments = []
    for a, d, identity in raw:
        segments.append(fseg(float(a), float(a + d), identity, texts=("a", "b")))
    segments.sort(key=lambda s: (s.start, s.end))
    merged = merge_adjacent(segments, max_gap=0.25)
    assert sum(len(s.words) for s in merged) == sum(len(s.words) for s in segments)
    if segments:
        assert min(s.start for s in merged) == min(s.start for s in segments)
        assert max(s.end for s in merged) == max(s.end for s in segments)


# --- clean_duplicates -----------------------------------------------------------------


def test_contained_duplicate_removed():
    inner = fseg(5, 7, "P", texts=("yes", "i", "did"))
    outer = fseg(4, 10, "P", texts=("well", "yes", "i", "did", "indeed"))
    assert clean_duplicates([outer, inner]) == [outer]


def test_different_identities_both_kept():
    inner = fseg(5, 7, "P", texts=("yes", "i", "did"))
    outer = fseg(4, 10, "C", texts=("well", "yes", "i", "did", "indeed"))
    assert clean_duplicates([outer, inner]) == [outer, inner]


def test_identical_twins_keep_one():
    a = fseg(5, 7, "P", texts=("same", "thing"))
    b = fseg(5, 7, "P", texts=("same", "thing"))
    assert clean_duplicates([a, b]) == [a]


def test_shorter_mutual_duplicate_removed():
    long = fseg(4, 9, "P", texts=("same", "thing"))
    short = fseg(5, 7, "P", texts=("same", "thing"))
    assert clean_duplicates([long, short]) == [long]


def test_overlap_without_containment_keeps_both():
    a = fseg(0, 6, "P", texts=("alpha", "beta"))
    b = fseg(5, 10, "P", texts=("gamma", "delta"))
    assert clean_duplicates([a, b]) == [a, b]


def test_no_overlap_keeps_duplicate_text():
    a = fseg(0, 2, "P", texts=("same",))
    b = fseg(10, 12, "P", texts=("same",))
    assert clean_duplicates([a, b]) == [a, b]


def test_containment_normalizes_text():
    inner = fseg(5, 7, "P", texts=("Yes,", "I", "DID!"))
    outer = fseg(4, 10, "P", texts=("well", "yes", "i", "did", "indeed"))
    assert clean_duplicates([outer, inner]) == [outer]


def test_wordless_segments_never_removed():
    empty = FinalSegment(TimeInterval(5, 7), "P", ())
    outer = fseg(4, 10, "P", texts=("a", "b"))
    assert clean_duplicates([outer, empty]) == [outer, empty]


dup_fixture = st.lists(
    st.tuples(
        st.integers(0, 20),
        st.integers(1, 8),
        st.sampled_from("PQ"),
        st.lists(st.sampled_from(["ya", "no", "ok", "hm"]), min_size=1, max_size=4),
    ),
    max_size=7,
)


@given(dup_fixture)
def test_clean_duplicates_idempotent(raw):
    segments = [
        fseg(float(a), float(a + d), identity, texts=tuple(texts))
        for a, d, identity, texts in raw
    ]
    segments.sort(key=lambda s: (s.start, s.end))
    once = clean_duplicates(segments)
    assert clean_duplicates(once) == once
