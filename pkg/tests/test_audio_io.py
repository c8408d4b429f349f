import csv
import struct

import numpy as np
import pytest

from tbcough.audio_io import (MANIFEST_COLUMNS, AudioClip, dataset_stats, decode_wav,
                              decode_wav_bytes, encode_wav, load_manifest, resample, write_wav)
from tbcough.errors import DecodeError, IntegrityError, SchemaError, UnsupportedFormatError


def _wav(payload, channels, rate, bits, fmt_tag=1):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, channels, rate, rate * block, block, bits)
    return (b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload)) + b"WAVE"
            + b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(payload)) + payload)


def test_16bit_scaling():
    clip = decode_wav_bytes(_wav(struct.pack("<hh", 16384, -32768), 1, 8000, 16))
    assert clip.samples.tolist() == [0.5, -1.0]
    assert clip.sample_rate == 8000


def test_stereo_averaged_to_mono():
    payload = np.array([[1.0, 0.0], [1.0, 0.0]], dtype="<f4").tobytes()
    clip = decode_wav_bytes(_wav(payload, 2, 16000, 32, fmt_tag=3))
    np.testing.assert_array_equal(clip.samples, [0.5, 0.5])


@pytest.mark.parametrize("bits,value,expected", [
    (8, bytes([192]), 0.5),
    (24, (1 << 22).to_bytes(3, "little"), 0.5),
    (24, (0x800000).to_bytes(3, "little"), -1.0),
    (32, struct.pack("<i", 1 << 30), 0.5),
])
def test_integer_widths(bits, value, expected):
    assert decode_wav_bytes(_wav(value, 1, 8000, bits)).samples[0] == expected


def test_truncated_file_raises(tmp_path):
    data = encode_wav(np.zeros(100), 8000)
    p = tmp_path / "t.wav"
    p.write_bytes(data[:60])
    with pytest.raises(DecodeError):
        decode_wav(p)


def test_garbage_header_raises():
    with pytest.raises(DecodeError):
        decode_wav_bytes(b"RIFX0000WAVEfmt ")


def test_unsupported_codec():
    with pytest.raises(UnsupportedFormatError):
        decode_wav_bytes(_wav(b"\x00\x00", 1, 8000, 16, fmt_tag=0x11))


def test_16bit_round_trip_within_one_lsb(tmp_path, rng):
    x = rng.uniform(-0.99, 0.99, 4000)
    write_wav(tmp_path / "a.wav", x, 22050)
    y = decode_wav(tmp_path / "a.wav").samples
    assert np.max(np.abs(x - y)) <= 1.0 / 32768


def _tone(freq, rate, n, amp=0.5):
    return AudioClip(amp * np.sin(2 * np.pi * freq * np.arange(n) / rate), rate)


def _peak(x, rate):
    spec = np.abs(np.fft.rfft(x * np.hanning(x.size)))
    return np.fft.rfftfreq(x.size, 1 / rate)[np.argmax(spec)]


def test_resample_length():
    assert resample(AudioClip(np.ones(44100), 44100), 16000).samples.size == 16000
    assert resample(AudioClip(np.ones(1000), 44100), 22050).samples.size == 500


def test_resample_identity_is_bit_exact(rng):
    x = rng.standard_normal(999)
    np.testing.assert_array_equal(resample(AudioClip(x, 16000), 16000).samples, x)


@pytest.mark.parametrize("src,dst", [(44100, 22050), (44100, 16000), (16000, 22050),
                                     (48000, 44100)])
def test_resample_tone_peak_and_amplitude(src, dst):
    y = resample(_tone(1000.0, src, src), dst).samples
    assert abs(_peak(y, dst) - 1000.0) <= 1.0
    # steady-state amplitude away from the filter edges
    mid = y[2000:-2000]
    amp = np.sqrt(2 * np.mean(mid ** 2))
    assert abs(amp - 0.5) / 0.5 < 0.01


def test_resample_round_trip_keeps_peak():
    clip = _tone(1500.0, 44100, 22050)
    back = resample(resample(clip, 16000), 44100)
    assert back.samples.size == clip.samples.size
    assert abs(_peak(back.samples, 44100) - _peak(clip.samples, 44100)) <= 2.0


def test_downsampling_suppresses_alias():
    # 10 kHz is past the transition band above the 8 kHz target Nyquist
    y = resample(_tone(10000.0, 44100, 44100), 16000).samples[1000:-1000]
    assert np.sqrt(np.mean(y ** 2)) < 1e-3


def _manifest_rows(spec):
    rows = []
    for cid, pid, label in spec:
        rows.append({c: "" for c in MANIFEST_COLUMNS} | dict(
            clip_id=cid, file_path=f"{cid}.wav", participant_id=pid, label=label))
    return rows


def _write_manifest(path, rows, columns=MANIFEST_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def test_load_manifest_groups(tmp_path):
    rows = _manifest_rows([("a", "p1", "TB+"), ("b", "p1", "TB+"), ("c", "p2", "TB-"),
                           ("d", "p2", "TB−")])
    rows[0].update(age="30", sex="female", fever="yes")
    _write_manifest(tmp_path / "m.csv", rows)
    m = load_manifest(tmp_path / "m.csv")
    assert len(m.participants) == 2
    assert m.participant_labels == {"p1": 1, "p2": 0}
    assert m.row("a").metadata.age == 30.0 and m.row("a").metadata.fever == 1.0
    assert m.row("a").file_path == tmp_path / "a.wav"


def test_conflicting_labels(tmp_path):
    _write_manifest(tmp_path / "m.csv", _manifest_rows([("a", "p1", "TB+"), ("b", "p1", "TB−")]))
    with pytest.raises(IntegrityError):
        load_manifest(tmp_path / "m.csv")


def test_duplicate_clip_id(tmp_path):
    _write_manifest(tmp_path / "m.csv", _manifest_rows([("a", "p1", "TB+"), ("a", "p2", "TB-")]))
    with pytest.raises(IntegrityError):
        load_manifest(tmp_path / "m.csv")


def test_missing_column(tmp_path):
    cols = [c for c in MANIFEST_COLUMNS if c != "fever"]
    _write_manifest(tmp_path / "m.csv", _manifest_rows([("a", "p1", "TB+")]), cols)
    with pytest.raises(SchemaError):
        load_manifest(tmp_path / "m.csv")


def test_unparseable_numeric(tmp_path):
    rows = _manifest_rows([("a", "p1", "TB+")])
    rows[0]["height"] = "tall"
    _write_manifest(tmp_path / "m.csv", rows)
    with pytest.raises(SchemaError):
        load_manifest(tmp_path / "m.csv")


def _table1_manifest(tmp_path):
    # 297 positives with 2930 clips, 810 negatives with 6842 clips
    spec = []
    for cls, n_part, n_clips, tag in ((1, 297, 2930, "TB+"), (0, 810, 6842, "TB-")):
        base, extra = divmod(n_clips, n_part)
        for i in range(n_part):
            pid = f"{tag}{i}"
            for j in range(base + (i < extra)):
                spec.append((f"{pid}_{j}", pid, tag))
    _write_manifest(tmp_path / "t1.csv", _manifest_rows(spec))
    return load_manifest(tmp_path / "t1.csv")


def test_table1_shaped_stats(tmp_path):
    st = dataset_stats(_table1_manifest(tmp_path))
    assert (st.n_participants, st.n_pos, st.n_neg, st.n_clips) == (1107, 297, 810, 9772)
    assert st.by_class["pos"]["n_clips"] == 2930 and st.by_class["neg"]["n_clips"] == 6842
    # totals fix the mean; the printed per-participant average cannot also hold
    assert st.mean_clips == pytest.approx(9772 / 1107)


def test_stats_small(tmp_path):
    spec = [(f"a{i}", "p1", "TB+") for i in range(3)] + [(f"b{i}", "p2", "TB-") for i in range(5)]
    _write_manifest(tmp_path / "m.csv", _manifest_rows(spec))
    m = load_manifest(tmp_path / "m.csv")
    st = dataset_stats(m, {r.clip_id: 0.5 for r in m})
    assert (st.mean_clips, st.min_clips, st.max_clips) == (4.0, 3, 5)
    assert st.std_clips == pytest.approx(np.sqrt(2.0))
    assert st.n_clips == sum(len(v) for v in m.participants.values())
    assert st.total_minutes == pytest.approx(8 * 0.5 / 60)


def test_stats_empty(tmp_path):
    _write_manifest(tmp_path / "m.csv", [])
    with pytest.raises(SchemaError):
        dataset_stats(load_manifest(tmp_path / "m.csv"))
