import numpy as np
import pytest

from fmtone.dataset import build_dataset, split_dataset
from fmtone.errors import EmptyInput, NoNoteFound, NoRampFound, ZeroReference
from fmtone.metrics import (
    SNR_CAP_DB,
    evaluate_model,
    make_oracle_predictor,
    segment_note,
    snr_db,
)


def _ref(n=5000, seed=0):
    return np.sin(2 * np.pi * 440 * np.arange(n) / 44100)


def test_snr_identical_signals_hit_cap():
    ref = _ref()
    assert snr_db(ref, ref) == SNR_CAP_DB


def test_snr_zero_estimate_is_zero_db():
    ref = _ref()
    assert snr_db(ref, np.zeros_like(ref)) == pytest.approx(0.0, abs=1e-9)


def test_snr_one_percent_scale_error_is_forty_db():
    ref = _ref()
    assert snr_db(ref, ref * 1.01) == pytest.approx(40.0, abs=0.1)


def test_snr_scale_invariance():
    ref = _ref()
    est = ref + 0.01 * np.cos(np.arange(ref.size))
    assert snr_db(3.7 * ref, 3.7 * est) == pytest.approx(snr_db(ref, est), abs=1e-9)


def test_snr_errors():
    with pytest.raises(EmptyInput):
        snr_db(np.zeros(0), np.zeros(0))
    with pytest.raises(ZeroReference):
        snr_db(np.zeros(100), np.ones(100))


def _trapezoid(on, off, last, k=1000, amp=1.0):
    a = np.zeros(k)
    a[on:off] = amp
    ramp = np.arange(off, last + 1)
    a[ramp] = amp * (last + 1 - ramp) / (last + 2 - off)
    return a


def test_segment_note_onset_range():
    a = _trapezoid(on=100, off=800, last=860)
    segments = segment_note(a, hop=64, sample_rate=44100)
    assert segments.onset == (6400, 10810)
    assert segments.mid == (10810, 800 * 64)
    assert segments.end == (800 * 64, 861 * 64)


def test_segment_note_partition_covers_note():
    a = _trapezoid(on=50, off=700, last=740)
    segments = segment_note(a)
    assert segments.onset[1] == segments.mid[0]
    assert segments.mid[1] == segments.end[0]
    assert segments.onset[0] == 50 * 64
    assert segments.end[1] == 741 * 64


def test_segment_note_short_note_truncates_onset():
    a = _trapezoid(on=10, off=40, last=80)  # under 100 ms before the ramp
    segments = segment_note(a)
    assert segments.onset == (640, 40 * 64)
    assert segments.mid == (40 * 64, 40 * 64)  # empty


def test_segment_note_no_note():
    with pytest.raises(NoNoteFound):
        segment_note(np.zeros(100))


def test_segment_note_no_ramp():
    a = np.zeros(100)
    a[10:60] = 0.7  # note truncated before any release
    with pytest.raises(NoRampFound):
        segment_note(a)


@pytest.fixture(scope="module")
def small_split(epiano_patch):
    data = build_dataset(epiano_patch, 12, 1000, seed=77)
    _, _, test = split_dataset(data, seed=77)
    return test


def test_oracle_model_is_perfect(small_split, epiano_patch):
    row = evaluate_model(make_oracle_predictor(), small_split, epiano_patch)
    assert row.envelope_l1 == 0.0
    assert row.snr_onset_db == SNR_CAP_DB
    assert row.snr_mid_db == SNR_CAP_DB
    assert row.snr_end_db == SNR_CAP_DB


def test_scaled_prediction_on_single_carrier_patch_gives_forty_db(small_split, bank):
    # a patch with one carrier and no modulation: the render is linear in
    # the envelope, so a 1% envelope error is exactly -40 dB of error power
    from bankfactory import OpSpec, VoiceSpec, build_bank, default_voice
    from fmtone.sysex import parse_sysex_bank, unpack_voice

    silent = OpSpec(rates=(95, 70, 60, 82), levels=(0, 0, 0, 0), output_level=0)
    loud = OpSpec(rates=(95, 70, 60, 82), levels=(99, 90, 70, 0), output_level=99)
    voice = VoiceSpec(name="ONECARRIER", algorithm=32, feedback=0,
                      ops=[loud, silent, silent, silent, silent, silent])
    voices = [voice] + [default_voice(i) for i in range(1, 32)]
    patch = unpack_voice(parse_sysex_bank(build_bank(voices)), 0)

    data = build_dataset(patch, 12, 1000, seed=5)
    _, _, test = split_dataset(data, seed=5)
    row = evaluate_model(lambda tup: tup.ol * 0.99, test, patch)
    assert row.snr_onset_db == pytest.approx(40.0, abs=0.2)
    assert row.snr_mid_db == pytest.approx(40.0, abs=0.2)
    assert row.snr_end_db == pytest.approx(40.0, abs=0.2)
    assert row.envelope_l1 > 0


def test_evaluate_model_deterministic(small_split, epiano_patch):
    one = evaluate_model(make_oracle_predictor(), small_split, epiano_patch)
    two = evaluate_model(make_oracle_predictor(), small_split, epiano_patch)
    assert one == two


def test_evaluate_model_empty_split(epiano_patch):
    from fmtone.dataset import Dataset, DatasetMeta

    empty = Dataset(tuples=[], meta=DatasetMeta(patch_name="X"))
    with pytest.raises(EmptyInput):
        evaluate_model(make_oracle_predictor(), empty, epiano_patch)
