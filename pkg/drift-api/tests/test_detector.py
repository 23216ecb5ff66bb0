import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from conftest import make_chunk, make_substream
from models.detection_models import (
    BucketingConfig, BucketSpec, Chunk, CutStatus, DetectorConfig, PuSample,
    SkipHeuristic, SubStream, TableMode,
)
from models.stream_models import DriftSchedule
from services.detector_service import (
    build_table, build_table_eikmeans, build_table_with_spec, detect,
    error_rate_and_std, on_alarm, should_test, split_at_cut,
    theorem1_check, theorem_histogram,
)
from services.stream_service import gen_equal_error_stream
from utils.errors import EmptyWindow, TooFewSamples

OFF = DetectorConfig(skip_heuristic=SkipHeuristic.OFF)


def _drifting_substream(rng, n_before=5, n_after=5, size=200):
    before = [make_chunk(rng, i, size=size) for i in range(n_before)]
    after = [
        make_chunk(rng, n_before + i, size=size, pu_correct=(0.5, 1.0))
        for i in range(n_after)
    ]
    return SubStream(chunks=before + after)


def test_split_at_cut_windows(rng):
    sub = make_substream(rng, 4, start=10, size=50)
    uc1, uc2, um1, um2 = split_at_cut(sub, 11)
    first = sub.chunks[:2]
    second = sub.chunks[2:]
    assert uc1.size + um1.size == sum(c.size for c in first)
    assert uc2.size + um2.size == sum(c.size for c in second)
    assert uc1.size == sum(int(c.correct.sum()) for c in first)


def test_split_at_cut_rejects_empty_window(rng):
    sub = make_substream(rng, 3, size=20)
    with pytest.raises(EmptyWindow):
        split_at_cut(sub, 2)
    with pytest.raises(EmptyWindow):
        split_at_cut(sub, -1)


def test_build_table_with_spec_counts():
    spec = BucketSpec(centroids=(0.25, 0.75), boundaries=(0.0, 0.5, 1.0))
    table = build_table_with_spec(spec, [0.1, 0.2, 0.9], [0.6, 0.7], 4, 1)
    assert table.counts.tolist() == [[2, 1, 4], [0, 2, 1]]


def test_build_table_rows_match_windows(rng):
    uc1 = rng.random(300) * 0.5
    uc2 = rng.random(250) * 0.5
    table, spec = build_table(uc1, uc2, rng.random(40), rng.random(70), BucketingConfig())
    assert table.shape == (2, spec.k + 1)
    assert table.counts[0].sum() == 340
    assert table.counts[1].sum() == 320
    assert table.counts[0, -1] == 40 and table.counts[1, -1] == 70


def test_build_table_requires_correct_samples(rng):
    with pytest.raises(TooFewSamples):
        build_table([], rng.random(10), rng.random(5), rng.random(5), BucketingConfig())


def test_build_table_eikmeans_has_no_error_column(rng):
    table, spec = build_table_eikmeans(rng.random(400), rng.random(400), BucketingConfig())
    assert table.shape == (2, spec.k)
    assert table.counts[0].sum() == 400


@pytest.mark.parametrize("mode, first, second, expected", [
    (SkipHeuristic.PAPER_TEXT, 0.6, 0.7, True),
    (SkipHeuristic.PAPER_TEXT, 0.7, 0.7, False),
    (SkipHeuristic.PAPER_PSEUDOCODE, 0.7, 0.7, True),
    (SkipHeuristic.PAPER_PSEUDOCODE, 0.6, 0.7, False),
    (SkipHeuristic.OFF, 0.9, 0.1, True),
])
def test_should_test(mode, first, second, expected):
    assert should_test(mode, first, second) is expected


def test_detect_needs_two_chunks(rng):
    assert detect(SubStream(), OFF).per_cut == []
    report = detect(make_substream(rng, 1), OFF)
    assert report.t == 0
    assert not report.alarm and report.min_p is None


def test_detect_stationary_no_alarm(rng):
    report = detect(make_substream(rng, 5), OFF)
    assert [o.cut for o in report.per_cut] == [0, 1, 2, 3]
    assert all(o.status == CutStatus.TESTED for o in report.per_cut)
    assert not report.alarm
    assert report.min_p > 1e-5


def test_detect_finds_shift_in_correct_pu(rng):
    """Mesma taxa de erro, PU-index dos corretos deslocado: o PUDD detecta"""
    report = detect(_drifting_substream(rng), OFF)
    assert report.alarm
    assert 3 <= report.chosen_cut <= 5
    assert report.min_p < 1e-5


def test_detect_paper_text_skips_decreasing_error_pu(rng):
    chunks = [make_chunk(rng, i, pu_wrong=(0.8, 1.0)) for i in range(3)]
    chunks += [make_chunk(rng, 3 + i, pu_wrong=(0.5, 0.6)) for i in range(3)]
    sub = SubStream(chunks=chunks)

    report = detect(sub, DetectorConfig())
    assert all(o.status == CutStatus.SKIPPED_HEURISTIC for o in report.per_cut)
    assert report.min_p is None and not report.alarm

    pseudo = detect(sub, DetectorConfig(skip_heuristic=SkipHeuristic.PAPER_PSEUDOCODE))
    assert all(o.status == CutStatus.TESTED for o in pseudo.per_cut)


def test_detect_zero_marginal_is_skipped(rng):
    report = detect(make_substream(rng, 3, error_rate=0.0), OFF)
    assert all(o.status == CutStatus.SKIPPED_ZERO_MARGINAL for o in report.per_cut)
    assert not report.alarm


def test_detect_all_misclassified_is_too_few_samples(rng):
    report = detect(make_substream(rng, 3, error_rate=1.0), OFF)
    assert all(o.status == CutStatus.SKIPPED_TOO_FEW_SAMPLES for o in report.per_cut)


def test_detect_parallel_matches_serial(rng):
    sub = _drifting_substream(rng, 4, 3)
    serial = detect(sub, OFF)
    parallel = detect(sub, OFF.model_copy(update={"max_workers": 4}))
    assert parallel == serial


def test_detect_eikmeans_dof(rng):
    config = DetectorConfig(skip_heuristic=SkipHeuristic.OFF, table_mode=TableMode.EIKMEANS)
    report = detect(make_substream(rng, 4), config)
    tested = [o for o in report.per_cut if o.status == CutStatus.TESTED]
    assert tested
    assert all(1 <= o.dof <= 4 for o in tested)


def test_on_alarm_keeps_chunks_after_cut(rng):
    sub = make_substream(rng, 6, start=3, size=20)
    kept = on_alarm(sub, 5)
    assert [c.index for c in kept.chunks] == [6, 7, 8]
    assert on_alarm(sub, 8).chunks == []


def test_theorem_histogram_example():
    window = [
        PuSample(pu=0.2, correct=True),
        PuSample(pu=0.3, correct=False),
        PuSample(pu=0.7, correct=False),
        PuSample(pu=1.0, correct=False),
    ]
    assert theorem_histogram(window, [0.0, 0.5, 1.0]) == [1, 1, 2]


def test_error_rate_and_std_exact():
    window = [PuSample(pu=0.5, correct=c) for c in (True, False, False, True)]
    rate, var = error_rate_and_std(window)
    assert rate == 0.5
    assert var == 0.25
    with pytest.raises(EmptyWindow):
        error_rate_and_std([])


def test_theorem1_check_equal_proportions():
    w1 = [PuSample(pu=0.9, correct=False), PuSample(pu=0.1, correct=True)]
    w2 = w1 * 3
    assert theorem1_check(w1, w2, [0.0, 0.5, 1.0])
    # Proporções diferentes: a implicação vale trivialmente
    assert theorem1_check(w1, [PuSample(pu=0.1, correct=True)], [0.0, 1.0])
    with pytest.raises(EmptyWindow):
        theorem1_check([], w1, [0.0, 1.0])


def test_detect_report_is_sorted_and_consistent(rng):
    report = detect(make_substream(rng, 6, error_rate=0.3), OFF)
    cuts = [o.cut for o in report.per_cut]
    assert cuts == sorted(cuts)
    tested = [o.p_value for o in report.per_cut if o.status == CutStatus.TESTED]
    assert report.min_p == pytest.approx(np.min(tested))


def test_detect_equal_error_shift_at_injection_point():
    """Taxa de erro constante em 0.5; só a distribuição de PU muda no chunk 3"""
    schedule = DriftSchedule(period_chunks=3, concept_sequence=[0, 1], chunk_size=200, n_chunks=6)
    sub = SubStream(chunks=[chunk for chunk, _ in gen_equal_error_stream(0, schedule)])
    report = detect(sub, OFF)
    assert report.alarm
    assert 1 <= report.chosen_cut <= 3

    # Com a heurística padrão a média de uM cai (0.95 -> 0.85) e o corte não é testado
    assert not detect(sub, DetectorConfig()).alarm


def test_chunk_rejects_nan_pu():
    with pytest.raises(ValidationError):
        Chunk(index=0, pu=[0.2, float("nan")], correct=[True, False])
    with pytest.raises(ValidationError):
        Chunk(index=0, pu=[float("inf")], correct=[True])


def test_report_carries_critical_value(rng):
    """O relatório traz o limiar da estatística no dof do melhor corte"""
    report = detect(_drifting_substream(rng), OFF)
    best = next(o for o in report.per_cut if o.cut == report.chosen_cut)
    assert report.critical_value == pytest.approx(stats.chi2.isf(OFF.sigma, best.dof), rel=1e-6)
    assert best.statistic > report.critical_value

    assert detect(SubStream(), OFF).critical_value is None
    assert detect(make_substream(rng, 3, error_rate=0.0), OFF).critical_value is None
