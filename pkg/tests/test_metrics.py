import numpy as np
import pytest

from diarefine.core import TimeInterval
from diarefine.errors import EmptyReference, ParseError
from diarefine.metrics import (
    Annotation,
    aggregate_reports,
    apply_collar,
    crop_annotation,
    der,
    format_der_table,
    merge_intervals,
    optimal_mapping,
    read_rttm,
    relative_reduction,
    subtract_intervals,
    wer,
    write_rttm,
)

from oracles import brute_force_assignment, frame_der, random_annotation


def ann(*triples):
    return Annotation.from_triples(triples)


# --- interval plumbing -------------------------------------------------------


def test_merge_intervals_unions_touching():
    merged = merge_intervals([TimeInterval(0, 2), TimeInterval(2, 3), TimeInterval(5, 6)])
    assert merged == [TimeInterval(0, 3), TimeInterval(5, 6)]


def test_subtract_intervals_splits():
    pieces = subtract_intervals(TimeInterval(0, 10), [TimeInterval(2, 3), TimeInterval(8, 12)])
    assert pieces == [TimeInterval(0, 2), TimeInterval(3, 8)]


# --- collar -------------------------------------------------------------------


def test_collar_bands_around_boundaries():
    mask = apply_collar(ann((0, 10, "X")), 0.25)
    assert mask == [TimeInterval(-0.25, 0.25), TimeInterval(9.75, 10.25)]


def test_zero_collar_is_empty_mask():
    assert apply_collar(ann((0, 10, "X")), 0.0) == []


def test_collar_merges_adjacent_boundaries():
    mask = apply_collar(ann((0, 5, "X"), (5, 10, "Y")), 0.25)
    assert mask == [
        TimeInterval(-0.25, 0.25),
        TimeInterval(4.75, 5.25),
        TimeInterval(9.75, 10.25),
    ]


def test_crop_annotation_drops_and_splits():
    cropped = crop_annotation(ann((0, 10, "X")), [TimeInterval(4, 6)])
    assert cropped.segments == ann((0, 4, "X"), (6, 10, "X")).segments


# --- optimal mapping -----------------------------------------------------------


def test_mapping_identical():
    assert optimal_mapping(ann((0, 10, "X")), ann((0, 10, "A"))) == {"A": "X"}


def test_mapping_prefers_total_overlap():
    reference = ann((0, 8, "X"), (8, 15, "Y"))
    hypothesis = ann((0, 8, "A"), (8, 10, "A"), (10, 15, "B"))
    assert optimal_mapping(reference, hypothesis) == {"A": "X", "B": "Y"}


def test_mapping_leaves_surplus_label_unmapped():
    reference = ann((0, 10, "X"), (10, 20, "Y"))
    hypothesis = ann((0, 9, "A"), (9, 10, "C"), (10, 20, "B"))
    mapping = optimal_mapping(reference, hypothesis)
    assert mapping == {"A": "X", "B": "Y"}


def test_mapping_matches_bruteforce_on_random_cases():
    rng = np.random.default_rng(7)
    for _ in range(60):
        reference = random_annotation(rng, max_speakers=6, horizon_s=30.0)
        hypothesis = random_annotation(rng, max_speakers=6, horizon_s=30.0)
        mapping = optimal_mapping(reference, hypothesis)
        ref_support = reference.label_support()
        hyp_support = hypothesis.label_support()
        hyp_labels = sorted(hyp_support)
        ref_labels = sorted(ref_support)
        overlap = np.zeros((len(hyp_labels), len(ref_labels)))
        for i, h in enumerate(hyp_labels):
            for j, r in enumerate(ref_labels):
                overlap[i, j] = sum(
                    max(0.0, min(a.end, b.end) - max(a.start, b.start))
                    for a in hyp_support[h]
                    for b in ref_support[r]
                )
        achieved = sum(
            overlap[hyp_labels.index(h), ref_labels.index(r)] for h, r in mapping.items()
        )
        assert achieved == pytest.approx(brute_force_assignment(overlap), abs=1e-9)


# --- DER ------------------------------------------------------------------------


def test_der_zero_for_renamed_reference():
    reference = ann((0, 10, "X"), (12, 20, "Y"))
    hypothesis = ann((0, 10, "B"), (12, 20, "A"))
    report = der(reference, hypothesis, collar=0.25)
    assert report.der == 0.0
    assert report.mapping == {"A": "Y", "B": "X"}


def test_der_half_missed_with_collar():
    report = der(ann((0, 10, "X")), ann((0, 5, "A")), collar=0.25)
    assert report.total_reference == pytest.approx(9.5)
    assert report.missed == pytest.approx(4.75 / 9.5)
    assert report.der == pytest.approx(0.5)
    assert report.false_alarm == 0.0
    assert report.confusion == 0.0


def test_der_components_sum_identity():
    rng = np.random.default_rng(3)
    for _ in range(40):
        reference = random_annotation(rng)
        hypothesis = random_annotation(rng)
        report = der(reference, hypothesis, collar=0.25)
        assert report.der == pytest.approx(
            report.false_alarm + report.confusion + report.missed, abs=1e-9
        )


def test_der_empty_reference_raises():
    with pytest.raises(EmptyReference):
        der(ann((0, 0.1, "X")), ann((0, 5, "A")), collar=0.25)


def test_der_matches_frame_oracle():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(150):
        reference = random_annotation(rng)
        hypothesis = random_annotation(rng)
        collar = float(rng.choice([0.0, 0.25]))
        expected = frame_der(reference, hypothesis, collar)
        if expected is None:
            with pytest.raises(EmptyReference):
                der(reference, hypothesis, collar)
            continue
        report = der(reference, hypothesis, collar)
        for name in ("der", "missed", "false_alarm", "confusion", "total_reference"):
            assert getattr(report, name) == pytest.approx(expected[name], abs=1e-6), name
        checked += 1
    assert checked > 100


def test_der_rename_invariance():
    rng = np.random.default_rng(23)
    for _ in range(25):
        reference = random_annotation(rng)
        hypothesis = random_annotation(rng)
        labels = sorted(hypothesis.labels())
        permuted = list(rng.permutation(labels))
        renamed = hypothesis.relabeled({a: f"r_{b}" for a, b in zip(labels, permuted)})
        try:
            before = der(reference, hypothesis, 0.25)
        except EmptyReference:
            continue
        after = der(reference, renamed, 0.25)
        assert before.der == after.der
        assert before.false_alarm == after.false_alarm
        assert before.confusion == after.confusion
        assert before.missed == after.missed
        assert before.total_reference == after.total_reference


def test_der_scores_overlapping_speech():
    reference = ann((0, 10, "X"), (0, 10, "Y"))  # two simultaneous speakers
    hypothesis = ann((0, 10, "A"))
    report = der(reference, hypothesis, collar=0.0)
    assert report.total_reference == pytest.approx(20.0)
    assert report.missed == pytest.approx(0.5)
    assert report.der == pytest.approx(0.5)


# --- WER -------------------------------------------------------------------------


def test_wer_identical():
    assert wer(["a", "b", "c"], ["a", "b", "c"]) == 0.0


def test_wer_single_substitution():
    assert wer(["a", "b", "c"], ["a", "x", "c"]) == pytest.approx(1 / 3)


def test_wer_insertions_can_exceed_one():
    assert wer(["a", "b"], ["a", "b", "c", "d"]) == pytest.approx(1.0)
    assert wer(["a"], ["a", "b", "c", "d"]) == pytest.approx(3.0)


def test_wer_normalizes_case_and_punctuation():
    assert wer(["Hello,", "World!"], ["hello", "world"]) == 0.0


def test_wer_empty_reference_raises():
    with pytest.raises(EmptyReference):
        wer([], ["a"])
    with pytest.raises(EmptyReference):
        wer(["..."], ["a"])


# --- relative reduction ------------------------------------------------------------


def test_relative_reduction_paper_scale():
    assert relative_reduction(0.2305, 0.1619) == pytest.approx(0.2976, abs=1e-4)


def test_relative_reduction_no_change():
    assert relative_reduction(0.3, 0.3) == 0.0


def test_relative_reduction_half():
    assert relative_reduction(0.10, 0.05) == pytest.approx(0.5)


def test_relative_reduction_zero_baseline():
    with pytest.raises(ZeroDivisionError):
        relative_reduction(0.0, 0.1)


# --- RTTM ----------------------------------------------------------------------------


def test_rttm_round_trip():
    annotation = ann((0.5, 3.25, "Patient"), (4.0, 9.5, "Therapist"))
    text = write_rttm("visit1", annotation)
    parsed = read_rttm(text)
    assert list(parsed) == ["visit1"]
    assert parsed["visit1"].segments == annotation.segments


def test_rttm_parse_error_names_line():
    text = "SPEAKER f 1 0.0 1.0 <NA> <NA> spk0 <NA> <NA>\nGARBAGE\n"
    with pytest.raises(ParseError) as err:
        read_rttm(text)
    assert err.value.line_number == 2


def test_rttm_bad_float_names_line():
    with pytest.raises(ParseError) as err:
        read_rttm("SPEAKER f 1 zero 1.0 <NA> <NA> spk0 <NA> <NA>\n")
    assert err.value.line_number == 1


def test_rttm_skips_comments_and_blanks():
    text = ";; comment\n\nSPEAKER f 1 0.000 1.000 <NA> <NA> spk0 <NA> <NA>\n"
    assert len(read_rttm(text)["f"].segments) == 1


# --- aggregation and formatting --------------------------------------------------------


def test_aggregate_micro_weights_by_duration():
    r1 = der(ann((0, 10, "X")), ann((0, 10, "A")), 0.0)  # DER 0, 10 s
    r2 = der(ann((0, 5, "X")), ann((0, 0.0001, "A")), 0.0)  # ~all missed, 5 s
    agg = aggregate_reports({"a": r1, "b": r2})
    assert agg["micro"]["der"] == pytest.approx((0 * 10 + r2.der * 5) / 15)
    assert agg["macro"]["der"] == pytest.approx((0 + r2.der) / 2)


def test_format_table_columns():
    report = der(ann((0, 10, "X")), ann((0, 5, "A")), 0.25)
    table = format_der_table([("case", report, 0.12)])
    head, row = table.splitlines()
    assert head.split() == ["DER", "FA", "Conf.", "Miss", "Det.", "WER"]
    assert "50.00" in row and "12.00" in row
