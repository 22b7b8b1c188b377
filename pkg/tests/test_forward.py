import numpy as np
import pytest

from rollingspeckle import (
    ConfigurationError,
    DimensionError,
    ForwardOperator,
    PsfImage,
    SensorFrame,
    ShutterSchedule,
    VideoTensor,
    apply_adjoint,
    apply_forward,
    build_dense_operator,
    convolve2d_same,
    vec_to_video,
    video_to_vec,
)


def brute_convolve2d_same(image, psf_data, center):
    """Spatial-domain oracle: zero-padded linear convolution, centered crop."""
    h, w = image.shape
    ph, pw = psf_data.shape
    cy, cx = center
    full = np.zeros((h + ph - 1, w + pw - 1))
    for i in range(h):
        for j in range(w):
            if image[i, j] != 0.0:
                full[i:i + ph, j:j + pw] += image[i, j] * psf_data
    return full[cy:cy + h, cx:cx + w]


def random_psf(rng, shape, center=None):
    data = rng.random(shape)
    data /= data.sum()
    return PsfImage(data, center=center, normalized=True)


def delta_psf(shape, at=None):
    data = np.zeros(shape)
    at = at if at is not None else (shape[0] // 2, shape[1] // 2)
    data[at] = 1.0
    return PsfImage(data, center=(shape[0] // 2, shape[1] // 2), normalized=True)


def make_op(rng, dims=(8, 8, 4), rows_per_bin=2, center=None):
    n_y, n_x, n_t = dims
    psf = random_psf(rng, (n_y, n_x), center=center)
    sched = ShutterSchedule.default(n_y, rows_per_bin)
    return ForwardOperator(psf, sched, dims)


class TestConvolve2dSame:
    def test_delta_image_returns_psf(self):
        rng = np.random.default_rng(0)
        psf = random_psf(rng, (9, 9))
        delta = np.zeros((9, 9))
        delta[4, 4] = 1.0
        np.testing.assert_allclose(convolve2d_same(delta, psf), psf.data, atol=1e-15)

    def test_delta_psf_is_identity(self):
        rng = np.random.default_rng(1)
        image = rng.random((8, 8))
        np.testing.assert_allclose(
            convolve2d_same(image, delta_psf((8, 8))), image, atol=1e-14
        )

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(2)
        for center in [None, (0, 0), (7, 3), (2, 6)]:
            psf = random_psf(rng, (8, 8), center=center)
            image = rng.standard_normal((8, 8))
            expected = brute_convolve2d_same(image, psf.data, psf.center)
            got = convolve2d_same(image, psf)
            assert np.max(np.abs(got - expected)) < 1e-12

    def test_off_center_delta_translates_with_clipping(self):
        rng = np.random.default_rng(3)
        psf = random_psf(rng, (8, 8))
        delta = np.zeros((8, 8))
        delta[1, 6] = 1.0
        expected = brute_convolve2d_same(delta, psf.data, psf.center)
        np.testing.assert_allclose(convolve2d_same(delta, psf), expected, atol=1e-13)

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(4)
        with pytest.raises(DimensionError):
            convolve2d_same(np.zeros((8, 9)), random_psf(rng, (8, 8)))


class TestApplyForward:
    def test_zero_scene(self):
        op = make_op(np.random.default_rng(0))
        frame = apply_forward(op, VideoTensor(np.zeros((8, 8, 4))))
        assert not frame.data.any()

    def test_static_scene_delta_psf(self):
        rng = np.random.default_rng(1)
        image = rng.random((8, 8))
        scene = np.repeat(image[:, :, None], 4, axis=2)
        op = ForwardOperator(delta_psf((8, 8)), ShutterSchedule.default(8, 2), (8, 8, 4))
        np.testing.assert_allclose(op.forward(scene), image, atol=1e-14)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(2)
        op = make_op(rng)
        dense = build_dense_operator(op)
        scene = rng.standard_normal((8, 8, 4))
        expected = (dense @ video_to_vec(scene)).reshape(8, 8)
        assert np.max(np.abs(op.forward(scene) - expected)) < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(3)
        op = make_op(rng, dims=(12, 12, 4), rows_per_bin=3)
        u = rng.standard_normal((12, 12, 4))
        v = rng.standard_normal((12, 12, 4))
        combined = op.forward(2.5 * u - 1.25 * v)
        split = 2.5 * op.forward(u) - 1.25 * op.forward(v)
        scale = np.max(np.abs(combined)) or 1.0
        assert np.max(np.abs(combined - split)) / scale < 1e-12

    def test_dims_mismatch(self):
        op = make_op(np.random.default_rng(4))
        with pytest.raises(DimensionError):
            op.forward(np.zeros((8, 8, 5)))

    def test_energy_accounting_interior_ones(self):
        # 3x3 unit-sum box PSF on a 16x16 grid; a static all-ones scene must
        # give exactly 1 away from borders and border-loss values elsewhere
        box = np.zeros((16, 16))
        box[7:10, 7:10] = 1 / 9
        psf = PsfImage(box, normalized=True)
        op = ForwardOperator(psf, ShutterSchedule.default(16, 4), (16, 16, 4))
        frame = op.forward(np.ones((16, 16, 4)))
        np.testing.assert_allclose(frame[1:-1, 1:-1], 1.0, atol=1e-12)
        expected = brute_convolve2d_same(np.ones((16, 16)), psf.data, psf.center)
        np.testing.assert_allclose(frame, expected, atol=1e-12)
        assert frame[0, 0] < 1.0


class TestApplyAdjoint:
    def test_zero_frame(self):
        op = make_op(np.random.default_rng(0))
        out = apply_adjoint(op, SensorFrame(np.zeros((8, 8))))
        assert not out.data.any()

    def test_adjoint_identity_100_trials(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            center = None if trial % 2 == 0 else tuple(rng.integers(0, 16, 2))
            op = make_op(rng, dims=(16, 16, 4), rows_per_bin=4, center=center)
            u = rng.standard_normal((16, 16, 4))
            w = rng.standard_normal((16, 16))
            lhs = float(np.sum(op.forward(u) * w))
            rhs = float(np.sum(u * op.adjoint(w)))
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1e-30)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(8)
        op = make_op(rng)
        dense = build_dense_operator(op)
        frame = rng.standard_normal((8, 8))
        expected = vec_to_video(dense.T @ frame.ravel(), (8, 8, 4))
        assert np.max(np.abs(op.adjoint(frame) - expected)) < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(9)
        op = make_op(rng)
        u = rng.standard_normal((8, 8))
        v = rng.standard_normal((8, 8))
        combined = op.adjoint(0.5 * u + 3.0 * v)
        split = 0.5 * op.adjoint(u) + 3.0 * op.adjoint(v)
        scale = np.max(np.abs(combined)) or 1.0
        assert np.max(np.abs(combined - split)) / scale < 1e-12

    def test_dims_mismatch(self):
        op = make_op(np.random.default_rng(10))
        with pytest.raises(DimensionError):
            op.adjoint(np.zeros((8, 9)))


class TestDenseOperator:
    def test_identity_case(self):
        # delta PSF with a single bin: A is the identity on the frame
        op = ForwardOperator(delta_psf((6, 6)), ShutterSchedule.default(6, 6), (6, 6, 1))
        np.testing.assert_allclose(build_dense_operator(op), np.eye(36), atol=1e-14)

    def test_shape(self):
        op = make_op(np.random.default_rng(11))
        assert build_dense_operator(op).shape == (64, 256)

    def test_columns_are_sampled_translated_psfs(self):
        rng = np.random.default_rng(12)
        op = make_op(rng, dims=(8, 8, 4), rows_per_bin=2)
        dense = build_dense_operator(op)
        psf = op.psf.data
        cy, cx = op.psf.center
        bins = np.asarray(op.schedule.row_to_bin)
        n_y, n_x, n_t = op.dims
        for j in [0, 17, 100, 255]:
            t, y, x = np.unravel_index(j, (n_t, n_y, n_x))
            translated = np.zeros((n_y, n_x))
            for a in range(n_y):
                for b in range(n_x):
                    sy, sx = a - y + cy, b - x + cx
                    if 0 <= sy < n_y and 0 <= sx < n_x:
                        translated[a, b] = psf[sy, sx]
            expected = np.where((bins == t)[:, None], translated, 0.0)
            np.testing.assert_allclose(
                dense[:, j].reshape(n_y, n_x), expected, atol=1e-13
            )

    def test_cap_refusal(self):
        op = make_op(np.random.default_rng(13), dims=(16, 16, 4), rows_per_bin=4)
        with pytest.raises(ConfigurationError):
            build_dense_operator(op, cap=1000)


class TestOperatorConstruction:
    def test_rejects_exposure_violation(self):
        rng = np.random.default_rng(14)
        sched = ShutterSchedule.default(8, 2, row_period_s=1.0, exposure_s=1.5)
        with pytest.raises(ConfigurationError):
            ForwardOperator(random_psf(rng, (8, 8)), sched, (8, 8, 4))

    def test_rejects_psf_smaller_than_sensor(self):
        rng = np.random.default_rng(15)
        sched = ShutterSchedule.default(8, 2)
        with pytest.raises(DimensionError):
            ForwardOperator(random_psf(rng, (8, 7)), sched, (8, 8, 4))

    def test_rejects_bin_count_mismatch(self):
        rng = np.random.default_rng(16)
        sched = ShutterSchedule.default(8, 2)
        with pytest.raises(DimensionError):
            ForwardOperator(random_psf(rng, (8, 8)), sched, (8, 8, 5))

    def test_accepts_video_tensor_and_frame_wrappers(self):
        rng = np.random.default_rng(17)
        op = make_op(rng)
        scene = VideoTensor(rng.random((8, 8, 4)))
        frame = apply_forward(op, scene)
        back = apply_adjoint(op, frame)
        assert isinstance(frame, SensorFrame)
        assert isinstance(back, VideoTensor)
        assert back.dims == (8, 8, 4)


class TestWidePsf:
    """PSF extent beyond the sensor: the full-coverage capture geometry."""

    def test_convolve_matches_bruteforce(self):
        rng = np.random.default_rng(20)
        psf = random_psf(rng, (15, 15))  # 8x8 sensor, full-coverage extent
        image = rng.standard_normal((8, 8))
        expected = brute_convolve2d_same(image, psf.data, psf.center)
        got = convolve2d_same(image, psf)
        assert np.max(np.abs(got - expected)) < 1e-12

    def test_rejects_psf_smaller_than_image(self):
        rng = np.random.default_rng(21)
        with pytest.raises(DimensionError):
            convolve2d_same(np.zeros((8, 8)), random_psf(rng, (7, 8)))

    def test_forward_matches_dense_oracle(self):
        rng = np.random.default_rng(22)
        psf = random_psf(rng, (15, 15))
        op = ForwardOperator(psf, ShutterSchedule.default(8, 2), (8, 8, 4))
        dense = build_dense_operator(op)
        scene = rng.standard_normal((8, 8, 4))
        expected = (dense @ video_to_vec(scene)).reshape(8, 8)
        assert np.max(np.abs(op.forward(scene) - expected)) < 1e-12
        frame = rng.standard_normal((8, 8))
        adj_expected = vec_to_video(dense.T @ frame.ravel(), (8, 8, 4))
        assert np.max(np.abs(op.adjoint(frame) - adj_expected)) < 1e-12

    def test_adjoint_identity(self):
        rng = np.random.default_rng(23)
        psf = random_psf(rng, (31, 31))
        op = ForwardOperator(psf, ShutterSchedule.default(16, 4), (16, 16, 4))
        for _ in range(20):
            u = rng.standard_normal((16, 16, 4))
            w = rng.standard_normal((16, 16))
            lhs = float(np.sum(op.forward(u) * w))
            rhs = float(np.sum(u * op.adjoint(w)))
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1e-30)

    def test_no_dead_columns_at_full_extent(self):
        # every scene pixel reaches every sensor row: no zero columns in A
        rng = np.random.default_rng(24)
        psf = random_psf(rng, (15, 15))
        op = ForwardOperator(psf, ShutterSchedule.default(8, 2), (8, 8, 4))
        dense = build_dense_operator(op)
        assert np.linalg.norm(dense, axis=0).min() > 1e-8

    def test_sensor_size_psf_has_dead_columns(self):
        # with a sensor-sized PSF, edge-bin pixels far from their rows are
        # invisible; this is the geometry the full-coverage extent fixes
        rng = np.random.default_rng(25)
        psf = random_psf(rng, (8, 8))
        op = ForwardOperator(psf, ShutterSchedule.default(8, 2), (8, 8, 4))
        dense = build_dense_operator(op)
        assert (np.linalg.norm(dense, axis=0) < 1e-12).sum() > 0


class TestVecConventions:
    def test_round_trip(self):
        rng = np.random.default_rng(18)
        scene = rng.random((5, 7, 3))
        np.testing.assert_array_equal(
            vec_to_video(video_to_vec(scene), (5, 7, 3)), scene
        )

    def test_time_is_slowest(self):
        scene = np.zeros((2, 2, 2))
        scene[0, 0, 1] = 1.0  # second frame, first pixel
        vec = video_to_vec(scene)
        assert vec[4] == 1.0 and vec.sum() == 1.0
