import math

import numpy as np
import pytest

from oracles import naive_dct2_ortho
from tbcough.audio_io import AudioClip
from tbcough.dsp import SPECTROTEMPORAL, FrameConfig
from tbcough.errors import ConfigError, TooShortError
from tbcough.lld import (LLD_NAMES, LOG_MEL_FLOOR, build_mel_filterbank, decode_log_mel,
                         encode_log_mel, extract_lld_matrix, frame_energy, intensity_db,
                         log_mel_spectrogram, mel_scale, mel_to_hz, mfcc, mfcc_from_log_mel,
                         spectral_centroid, spectral_entropy, spectral_flux,
                         spectral_flux_series, spectral_rolloff, spectral_spread,
                         write_lld_csv, zero_crossing_rate)


def test_energy_examples():
    rect = np.ones(3)
    assert frame_energy(np.zeros(5)) == 0.0
    assert frame_energy([2, 2, 2], rect) == 4.0
    assert frame_energy([1, -1, 1], rect) == 1.0
    # window applied per sample before squaring
    assert frame_energy([1, 1], [0.5, 1.0]) == pytest.approx((0.25 + 1) / 2)


def test_zcr_examples():
    assert zero_crossing_rate(np.full(10, 0.3)) == 0.0
    assert zero_crossing_rate([1, -1, 1, -1]) == 0.75
    assert zero_crossing_rate([1, 1, -1, -1]) == 0.25
    assert zero_crossing_rate(np.zeros(8)) == 0.0  # sgn(0) = +1


def test_intensity_examples():
    # mean square 2e-5 from a constant frame of sqrt(2e-5)
    assert intensity_db(np.full(10, math.sqrt(2e-5))) == pytest.approx(0.0, abs=1e-9)
    assert intensity_db(np.full(10, math.sqrt(2e-4))) == pytest.approx(10.0, abs=1e-9)
    assert intensity_db(np.zeros(10)) == pytest.approx(10 * math.log10(1e-12 / 2e-5))
    assert intensity_db(np.zeros(10)) == pytest.approx(-73.0103, abs=1e-4)


def _bins(n, **vals):
    x = np.zeros(n)
    for k, v in vals.items():
        x[int(k[1:])] = v
    return x


def test_centroid_and_spread():
    assert spectral_centroid(_bins(10, b5=3.0)) == 5.0
    assert spectral_spread(_bins(10, b5=3.0)) == 0.0
    two = _bins(10, b2=1.0, b6=1.0)
    assert spectral_centroid(two) == 4.0
    assert spectral_spread(two) == 2.0
    N = 64
    assert spectral_centroid(np.ones(N // 2 + 1)) == pytest.approx(N / 4, abs=1e-12)


def test_noise_spread_exceeds_tone():
    tone = _bins(33, b10=1.0)
    assert spectral_spread(np.ones(33)) > spectral_spread(tone)


def test_rolloff():
    assert spectral_rolloff(_bins(20, b7=2.0)) == 7
    assert spectral_rolloff(np.ones(10)) == 8
    assert spectral_rolloff(_bins(10, b9=1.0), fraction=1.0) == 9


def test_entropy():
    assert spectral_entropy(np.ones(16)) == pytest.approx(1.0, abs=1e-12)
    assert spectral_entropy(_bins(16, b3=4.0)) == 0.0
    assert spectral_entropy(np.array([1.0, 1.0, 0.0, 0.0])) == pytest.approx(0.5, abs=1e-12)


def test_flux():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert spectral_flux(a, a) == 0.0
    assert spectral_flux(b, a) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert spectral_flux(b, a, p=1) == 2.0
    # normalisation makes flux insensitive to overall level
    assert spectral_flux(5 * b, a) == pytest.approx(math.sqrt(2), abs=1e-12)
    series = spectral_flux_series(np.array([a, b, b]))
    np.testing.assert_allclose(series, [0.0, math.sqrt(2), 0.0], atol=1e-12)


def test_silent_spectrum_is_zero():
    z = np.zeros(9)
    for f in (spectral_centroid, spectral_spread, spectral_rolloff, spectral_entropy):
        assert f(z) == 0
    assert spectral_flux(z, z) == 0


def test_mel_scale():
    assert mel_scale(0) == 0
    assert mel_scale(700) == pytest.approx(2595 * math.log10(2), abs=1e-9)
    assert mel_scale(700) == pytest.approx(781.17, abs=5e-3)
    assert mel_scale(1000) == pytest.approx(999.99, abs=1e-2)
    f = np.linspace(0, 11025, 50)
    np.testing.assert_allclose(mel_to_hz(mel_scale(f)), f, atol=1e-9)


def test_filterbank_shape_and_coverage():
    fb = build_mel_filterbank(128, 2048, 22050)
    W = fb.weights
    assert W.shape == (128, 1025)
    assert (W >= 0).all()
    np.testing.assert_allclose(W.max(axis=1), 1.0)
    c = fb.centers_bin
    assert np.all(np.diff(c) > 0)
    # brute-force scan: every bin between the first and last centre is covered
    for k in range(c[0], c[-1] + 1):
        assert W[:, k].sum() > 0, k


def test_single_filter_spans_range():
    fb = build_mel_filterbank(1, 512, 16000)
    nz = np.nonzero(fb.weights[0])[0]
    assert fb.points_bin[0] == 0 and fb.points_bin[-1] == 256
    assert nz.min() == 1 and nz.max() == 255


def test_too_many_filters():
    with pytest.raises(ConfigError):
        build_mel_filterbank(128, 64, 8000)


def test_filterbank_is_shared_read_only():
    fb = build_mel_filterbank(128, 2048, 22050)
    assert build_mel_filterbank(128, 2048, 22050) is fb
    with pytest.raises(ValueError):
        fb.weights[0, 0] = 2.0


def test_log_mel_shape_and_silence():
    lm = log_mel_spectrogram(AudioClip(np.zeros(11025), 22050))
    assert lm.values.shape == (128, 24)
    assert np.all(lm.values == np.log(LOG_MEL_FLOOR))


def test_log_mel_tone_row():
    n = 11025
    clip = AudioClip(0.5 * np.sin(2 * np.pi * 1000 * np.arange(n) / 22050), 22050)
    lm = log_mel_spectrogram(clip).values
    rows = np.argmax(lm, axis=0)
    assert np.all(rows == rows[0])
    # oracle: the filter whose weight at the tone's bin is largest
    fb = build_mel_filterbank(128, 2048, 22050)
    k = int(round(1000 / (22050 / 2048)))
    assert rows[0] == int(np.argmax(fb.weights[:, k]))


def test_log_mel_resamples():
    clip = AudioClip(np.random.default_rng(0).standard_normal(22050), 44100)
    assert log_mel_spectrogram(clip).values.shape == (128, 24)


def test_mfcc_of_constant_column():
    c = -3.5
    cc = mfcc_from_log_mel(np.full((128, 4), c))
    assert cc.shape == (13, 4)
    np.testing.assert_allclose(cc[0], c * math.sqrt(128), rtol=1e-12)
    np.testing.assert_allclose(cc[1:], 0.0, atol=1e-12)


def test_mfcc_matches_naive_dct(rng):
    clip = AudioClip(rng.standard_normal(11025) * 0.1, 22050)
    lm = log_mel_spectrogram(clip).values
    cc = mfcc(clip)
    assert cc.shape[0] == 13
    np.testing.assert_allclose(cc, naive_dct2_ortho(lm)[:13], atol=1e-9, rtol=0)


def test_mfcc_too_many_coeffs():
    with pytest.raises(ConfigError):
        mfcc_from_log_mel(np.zeros((10, 3)), 11)


def test_lld_matrix_layout(rng):
    clip = AudioClip(rng.standard_normal(22050) * 0.1, 44100, clip_id="c")
    m = extract_lld_matrix(clip)
    assert m.descriptor_names == LLD_NAMES and m.n_descriptors == 21
    assert m.descriptor_names[:8] == ("energy", "zcr", "intensity", "centroid", "spread",
                                      "rolloff", "entropy", "flux")
    assert extract_lld_matrix(clip).descriptor_names == m.descriptor_names
    for b in m.blocks:
        assert np.all(np.isfinite(b.values))


def test_noise_entropy_exceeds_tone(rng):
    n = 16000
    noise = AudioClip(rng.standard_normal(n) * 0.1, 16000)
    tone = AudioClip(0.1 * np.sin(2 * np.pi * 440 * np.arange(n) / 16000), 16000)
    col = lambda c: extract_lld_matrix(c).blocks[0].values[:, 6].mean()  # noqa: E731
    assert col(noise) > col(tone)


def test_too_short_names_minimum():
    with pytest.raises(TooShortError, match="0.05 s"):
        extract_lld_matrix(AudioClip(np.zeros(700), 16000))


@pytest.mark.parametrize("kind", ["silence", "impulse", "dc", "full_scale"])
def test_descriptors_finite(kind, rng):
    n = 8000
    x = {"silence": np.zeros(n), "impulse": np.eye(1, n, 3000)[0], "dc": np.full(n, 0.7),
         "full_scale": np.clip(rng.standard_normal(n), -1, 1)}[kind]
    m = extract_lld_matrix(AudioClip(x, 16000))
    ts = m.blocks[0].values
    assert np.all(np.isfinite(ts)) and np.all(np.isfinite(m.blocks[1].values))
    zcr, rolloff, entropy, spread = ts[:, 1], ts[:, 5], ts[:, 6], ts[:, 4]
    assert np.all((0 <= zcr) & (zcr < 1))
    assert np.all((0 <= entropy) & (entropy <= 1 + 1e-12))
    assert np.all((0 <= rolloff) & (rolloff <= 512))
    assert np.all(spread >= 0)


def test_csv_and_binary_export(tmp_path, rng):
    clip = AudioClip(rng.standard_normal(8000) * 0.1, 16000)
    m = extract_lld_matrix(clip)
    write_lld_csv(m, tmp_path / "lld.csv")
    lines = (tmp_path / "lld.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["grid", "frame", "t_start"]
    assert len(lines) == 1 + sum(b.values.shape[0] for b in m.blocks)
    lm = log_mel_spectrogram(clip).values
    blob = encode_log_mel(lm)
    assert blob[:8] == np.array([128, lm.shape[1]], dtype="<u4").tobytes()
    np.testing.assert_array_equal(decode_log_mel(blob), lm.astype(np.float32))


def test_hamming_config_selectable(rng):
    cfg = FrameConfig(0.04, 0.02, 2048, 22050, "hamming")
    clip = AudioClip(rng.standard_normal(11025), 22050)
    assert not np.allclose(log_mel_spectrogram(clip, cfg).values,
                           log_mel_spectrogram(clip, SPECTROTEMPORAL).values)
