from unittest.mock import patch

import numpy as np
import pytest
from scipy.signal import convolve2d

from secnet.common.errors import DataError, DimensionError
from secnet.modules.datapipe.datapipe_types import (
    AugmentConfig,
    DegradeConfig,
    FrameSequence,
    MotionModel,
    Pattern,
    SynthSceneConfig,
)
from secnet.modules.datapipe.datapipe_utils import (
    augment_batch,
    cubic_upsample,
    decimate,
    degrade_frame,
    degrade_sequence,
    gaussian_blur,
    gaussian_kernel,
    make_rng,
    make_training_pair,
    synth_sequence,
)


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.fixture
def pair():
    hr, _ = synth_sequence(SynthSceneConfig(length=12, size=32), seed=3, name="person__a")
    return make_training_pair(hr, DegradeConfig())


# ── gaussian_blur ─────────────────────────────────────────────────────────────


class TestGaussianBlur:
    def test_kernel_normalized(self):
        kernel = gaussian_kernel(1.5, 5)
        assert kernel.shape == (11,)
        assert kernel.sum() == pytest.approx(1.0, abs=1e-12)

    def test_default_radius(self):
        assert DegradeConfig().kernel_radius == 5

    def test_constant_image_unchanged(self):
        image = np.full((3, 9, 9), 0.42)
        np.testing.assert_allclose(gaussian_blur(image, 1.5), image, atol=1e-12)

    def test_zero_sigma_is_identity(self, rng):
        image = rng.uniform(size=(3, 6, 6))
        np.testing.assert_array_equal(gaussian_blur(image, 0.0), image)

    def test_matches_direct_2d_convolution(self, rng):
        image = rng.uniform(size=(20, 20))
        radius = 5
        kernel = gaussian_kernel(1.5, radius)
        direct = convolve2d(np.pad(image, radius, mode="symmetric"), np.outer(kernel, kernel), mode="valid")
        np.testing.assert_allclose(gaussian_blur(image, 1.5, radius), direct, atol=1e-12)


# ── decimate ──────────────────────────────────────────────────────────────────


class TestDecimate:
    def test_scale_one_is_identity(self, rng):
        image = rng.uniform(size=(3, 5, 5))
        np.testing.assert_array_equal(decimate(image, 1), image)

    def test_picks_rows_and_columns(self):
        ramp = np.arange(64.0).reshape(1, 8, 8)
        out = decimate(ramp, 4, 0)
        np.testing.assert_array_equal(out[0], [[0.0, 4.0], [32.0, 36.0]])

    def test_phase_offset(self):
        ramp = np.arange(64.0).reshape(1, 8, 8)
        np.testing.assert_array_equal(decimate(ramp, 4, 3)[0], [[27.0, 31.0], [59.0, 63.0]])

    def test_nearest_upsample_preserves_samples(self, rng):
        image = rng.uniform(size=(2, 12, 12))
        lr = decimate(image, 4)
        up = np.repeat(np.repeat(lr, 4, axis=1), 4, axis=2)
        np.testing.assert_array_equal(up[:, ::4, ::4], image[:, ::4, ::4])

    def test_floor_size(self, rng):
        assert decimate(rng.uniform(size=(1, 9, 10)), 4).shape == (1, 2, 2)

    def test_invalid_phase(self, rng):
        with pytest.raises(DimensionError):
            decimate(rng.uniform(size=(1, 8, 8)), 4, 4)


# ── degrade_sequence ──────────────────────────────────────────────────────────


class TestDegradeSequence:
    def test_constant_sequence(self):
        hr = FrameSequence(frames=np.full((3, 3, 16, 16), 0.3))
        lr = degrade_sequence(hr, DegradeConfig())
        np.testing.assert_allclose(lr.frames, 0.3, atol=1e-12)

    def test_shape_and_metadata(self, pair):
        assert pair.lr.frames.shape == (12, 3, 8, 8)
        assert pair.lr.scale_factor == 4
        assert pair.lr.name == "person__a"

    def test_is_blur_then_decimate(self, pair):
        cfg = DegradeConfig()
        expected = decimate(gaussian_blur(pair.hr.frames[5], cfg.sigma, cfg.kernel_radius), 4, 0)
        np.testing.assert_array_equal(pair.lr.frames[5], expected)

    def test_commutes_with_flip_up_to_phase(self, rng):
        frame = rng.uniform(size=(3, 16, 16))
        # the phase applies to both axes, so mirror both
        flipped = frame[..., ::-1, ::-1]
        lhs = degrade_frame(frame, DegradeConfig(phase=0))[..., ::-1, ::-1]
        rhs = degrade_frame(flipped, DegradeConfig(phase=3))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_phase_must_fit_scale(self):
        with pytest.raises(ValueError):
            DegradeConfig(scale=4, phase=4)


class TestCubicUpsample:
    def test_constant_frame(self):
        out = cubic_upsample(np.full((3, 4, 4), 0.6), 4)
        assert out.shape == (3, 16, 16)
        np.testing.assert_allclose(out, 0.6, atol=1e-12)

    def test_reproduces_lr_samples(self, rng):
        lr = rng.uniform(size=(1, 6, 6))
        out = cubic_upsample(lr, 4)
        np.testing.assert_allclose(out[:, ::4, ::4], lr, atol=1e-9)


# ── synth_sequence ────────────────────────────────────────────────────────────


class TestSynthSequence:
    @pytest.mark.parametrize("pattern", list(Pattern))
    def test_seed_repeatability(self, pattern):
        cfg = SynthSceneConfig(pattern=pattern, size=24, length=4)
        a, _ = synth_sequence(cfg, seed=5)
        b, _ = synth_sequence(cfg, seed=5)
        np.testing.assert_array_equal(a.frames, b.frames)
        assert a.frames.min() >= 0.0 and a.frames.max() <= 1.0

    @pytest.mark.parametrize("motion", list(MotionModel))
    def test_zero_amplitude_is_static(self, motion):
        seq, meta = synth_sequence(SynthSceneConfig(amplitude=0.0, motion=motion, size=16, length=5), seed=1)
        for frame in seq.frames[1:]:
            np.testing.assert_array_equal(frame, seq.frames[0])
        assert meta.displacements == [(0.0, 0.0)] * 5

    def test_translation_matches_cross_correlation_peak(self):
        cfg = SynthSceneConfig(pattern=Pattern.BLOB, amplitude=3.0, direction=np.pi / 2, size=48, length=2)
        seq, meta = synth_sequence(cfg, seed=2)
        a = seq.frames[0].mean(axis=0) - seq.frames[0].mean()
        b = seq.frames[1].mean(axis=0) - seq.frames[1].mean()
        correlation = np.fft.ifft2(np.fft.fft2(b) * np.conj(np.fft.fft2(a))).real
        dy, dx = np.unravel_index(np.argmax(correlation), correlation.shape)
        dy = dy - 48 if dy > 24 else dy
        dx = dx - 48 if dx > 24 else dx
        assert (dy, dx) == (round(meta.displacements[1][0]), round(meta.displacements[1][1]))
        assert meta.displacements[1][0] == pytest.approx(3.0)

    def test_drift_is_periodic(self):
        _, meta = synth_sequence(SynthSceneConfig(motion=MotionModel.DRIFT, amplitude=2.0, period=4.0, length=9, size=8), seed=0)
        assert meta.displacements[4][1] == pytest.approx(meta.displacements[0][1], abs=1e-12)
        assert meta.displacements[1][1] == pytest.approx(2.0)

    def test_group_from_name(self):
        seq, _ = synth_sequence(SynthSceneConfig(size=8, length=1), seed=0, name="alice__take2")
        assert seq.group == "alice"


# ── augment_batch ─────────────────────────────────────────────────────────────


class TestAugmentBatch:
    def test_deterministic_settings(self, pair, rng):
        cfg = AugmentConfig.deterministic(n_frames=8, stride_min=1, stride_max=1, crop_size=16)
        (clip,) = augment_batch([pair], cfg, rng)
        # 32x32 frames, 16 crop: 4 LR blocks of slack, centred at block 2
        np.testing.assert_array_equal(clip.hr, pair.hr.frames[:8, :, 8:24, 8:24])
        np.testing.assert_array_equal(clip.lr, pair.lr.frames[:8, :, 2:6, 2:6])
        assert not clip.reversed and not clip.flipped

    def test_exactly_n_frames_and_aligned_crops(self, pair):
        cfg = AugmentConfig(n_frames=5, stride_min=1, stride_max=2, crop_size=16, flip=False, reverse=False)
        for epoch in range(10):
            (clip,) = augment_batch([pair], cfg, make_rng(0, 0, epoch))
            assert clip.lr.shape == (5, 3, 4, 4)
            assert clip.hr.shape == (5, 3, 16, 16)
            full_lr = pair.lr.frames[clip.start : clip.start + 4 * clip.stride + 1 : clip.stride]
            matched = [
                np.array_equal(clip.lr, full_lr[:, :, y : y + 4, x : x + 4]) for y in range(5) for x in range(5)
            ]
            assert any(matched)

    def test_reversal_twice_is_identity(self, pair):
        cfg = AugmentConfig.deterministic(n_frames=4, crop_size=16, stride_max=1)
        (clip,) = augment_batch([pair], cfg, make_rng(0))
        np.testing.assert_array_equal(clip.hr[::-1][::-1], clip.hr)

    def test_flip_preserves_pixel_multiset(self, pair):
        cfg = AugmentConfig.deterministic(n_frames=4, crop_size=16, stride_max=1)
        (plain,) = augment_batch([pair], cfg, make_rng(0))
        flipping = cfg.model_copy(update={"flip": True})
        for epoch in range(20):
            (clip,) = augment_batch([pair], flipping, make_rng(0, 0, epoch))
            if clip.flipped:
                break
        assert clip.flipped
        for a, b in zip(plain.hr, clip.hr):
            np.testing.assert_array_equal(np.sort(a, axis=None), np.sort(b, axis=None))

    def test_short_sequence_skipped_with_warning(self, pair, rng):
        short_hr, _ = synth_sequence(SynthSceneConfig(length=3, size=32), seed=9, name="short")
        short = make_training_pair(short_hr, DegradeConfig())
        cfg = AugmentConfig.deterministic(n_frames=8, crop_size=16, stride_max=1)
        with patch("secnet.modules.datapipe.datapipe_utils.logger") as logger:
            clips = augment_batch([short, pair], cfg, rng)
        assert [clip.source for clip in clips] == ["person__a"]
        logger.warning.assert_called_once()

    def test_nothing_usable(self, rng):
        short_hr, _ = synth_sequence(SynthSceneConfig(length=3, size=32), seed=9)
        with pytest.raises(DataError):
            augment_batch([make_training_pair(short_hr, DegradeConfig())], AugmentConfig.deterministic(crop_size=16), rng)

    def test_batch_size_limit(self, pair, rng):
        cfg = AugmentConfig(n_frames=4, crop_size=16)
        assert len(augment_batch([pair, pair, pair], cfg, rng, batch_size=2)) == 2

    def test_crop_must_be_multiple_of_scale(self):
        with pytest.raises(ValueError):
            AugmentConfig(crop_size=30, scale=4)

    def test_worker_streams_differ(self):
        assert make_rng(1, 0, 0).integers(1 << 30) != make_rng(1, 1, 0).integers(1 << 30)
        assert make_rng(1, 0, 3).integers(1 << 30) == make_rng(1, 0, 3).integers(1 << 30)
