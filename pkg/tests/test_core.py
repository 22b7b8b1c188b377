import numpy as np
import pytest

from rollingspeckle import (
    AcquisitionParams,
    ConfigurationError,
    DimensionError,
    PsfImage,
    SensorFrame,
    ShutterSchedule,
    VideoTensor,
    effective_fps,
    problem_dims,
)


class TestEffectiveFps:
    def test_fast_line_readout_rate(self):
        # 9.6 us per row group gives the 104,166 fps reconstruction rate
        sched = ShutterSchedule.default(108, 2, row_period_s=9.6e-6)
        assert abs(effective_fps(sched) - 104_166) <= 1.0

    def test_identity_case(self):
        sched = ShutterSchedule.default(4, 1, row_period_s=1.0)
        assert effective_fps(sched) == 1.0

    def test_fps_from_total_readout_time(self):
        # 108 rows in pairs read out over T seconds -> 54 bins, fps = 54/T
        total = 2.7
        sched = ShutterSchedule.default(108, 2, row_period_s=total / 54)
        assert sched.n_t == 54
        assert effective_fps(sched) == pytest.approx(54 / total, rel=1e-12)

    def test_consistency_with_shutter_speed(self):
        for rows_per_bin in (1, 2, 3):
            sched = ShutterSchedule.default(12, rows_per_bin, row_period_s=0.25)
            assert effective_fps(sched) == pytest.approx(
                sched.shutter_speed_rows_per_s / rows_per_bin
            )


class TestProblemDims:
    def test_paper_scale(self):
        # 108*108 = 11,664 pixel measurements and 54 bins of unknowns
        assert problem_dims((108, 108, 54)) == (11_664, 629_856)

    def test_single_pixel(self):
        assert problem_dims((1, 1, 1)) == (1, 1)

    def test_small(self):
        assert problem_dims((8, 8, 4)) == (64, 256)

    def test_multiplicative_order_independent(self):
        m, n = problem_dims((3, 5, 7))
        m2, n2 = problem_dims((5, 3, 7))
        assert (m, n) == (m2, n2) == (15, 105)

    def test_rejects_nonpositive(self):
        with pytest.raises(DimensionError):
            problem_dims((0, 4, 4))

    def test_rejects_absurd(self):
        with pytest.raises(DimensionError):
            problem_dims((2**21, 2**21, 2**21))


class TestShutterSchedule:
    def test_default_table(self):
        sched = ShutterSchedule.default(10, 2)
        assert list(sched.row_to_bin) == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]
        assert sched.n_t == 5

    def test_default_is_surjective_and_monotone(self):
        for n_rows, rpb in [(108, 2), (7, 3), (16, 5), (9, 1)]:
            sched = ShutterSchedule.default(n_rows, rpb)
            table = np.asarray(sched.row_to_bin)
            assert set(table) == set(range(sched.n_t))
            assert np.all(np.diff(table) >= 0)

    def test_ceil_bin_count(self):
        assert ShutterSchedule.default(7, 3).n_t == 3

    def test_rejects_bin_out_of_range(self):
        with pytest.raises(ConfigurationError):
            ShutterSchedule(4, 2, row_to_bin=np.array([0, 0, 1, 5]))

    def test_rejects_missed_bin(self):
        with pytest.raises(ConfigurationError):
            ShutterSchedule(4, 2, row_to_bin=np.array([0, 0, 0, 0]))

    def test_rejects_wrong_length(self):
        with pytest.raises(DimensionError):
            ShutterSchedule(4, 2, row_to_bin=np.array([0, 0, 1]))

    def test_custom_readout_order_allowed(self):
        # center-outward pairs: any surjective table is accepted
        sched = ShutterSchedule(4, 2, row_to_bin=np.array([1, 0, 0, 1]))
        assert sched.n_t == 2

    def test_short_exposure_flag(self):
        assert ShutterSchedule.default(4, 1, row_period_s=1.0, exposure_s=0.5).short_exposure_valid
        assert ShutterSchedule.default(4, 1, row_period_s=1.0).short_exposure_valid
        assert not ShutterSchedule.default(4, 1, row_period_s=1.0, exposure_s=2.0).short_exposure_valid

    def test_immutable_table(self):
        sched = ShutterSchedule.default(4, 2)
        with pytest.raises(ValueError):
            sched.row_to_bin[0] = 1


class TestDomainTypes:
    def test_video_tensor_rejects_negative(self):
        with pytest.raises(ConfigurationError):
            VideoTensor(-np.ones((2, 2, 2)))

    def test_video_tensor_signed_escape_hatch(self):
        vt = VideoTensor(-np.ones((2, 2, 2)), allow_negative=True)
        assert vt.data.min() == -1.0

    def test_video_tensor_rejects_nan_and_wrong_rank(self):
        with pytest.raises(ConfigurationError):
            VideoTensor(np.full((2, 2, 2), np.nan))
        with pytest.raises(DimensionError):
            VideoTensor(np.zeros((2, 2)))

    def test_video_tensor_immutable(self):
        vt = VideoTensor(np.zeros((2, 2, 2)))
        with pytest.raises(ValueError):
            vt.data[0, 0, 0] = 1.0

    def test_psf_normalization_enforced(self):
        with pytest.raises(ConfigurationError):
            PsfImage(np.ones((4, 4)), normalized=True)
        PsfImage(np.ones((4, 4)), normalized=False)
        PsfImage(np.full((4, 4), 1 / 16), normalized=True)

    def test_psf_center_default_and_bounds(self):
        psf = PsfImage(np.full((6, 8), 1 / 48))
        assert psf.center == (3, 4)
        with pytest.raises(ConfigurationError):
            PsfImage(np.full((6, 8), 1 / 48), center=(6, 0))

    def test_psf_rejects_negative(self):
        data = np.full((4, 4), 1 / 16)
        data[0, 0] = -data[0, 0]
        with pytest.raises(ConfigurationError):
            PsfImage(data, normalized=False)

    def test_sensor_frame_allows_negative_but_not_nan(self):
        SensorFrame(np.array([[-1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(ConfigurationError):
            SensorFrame(np.array([[np.inf, 0.0], [0.0, 0.0]]))

    def test_acquisition_params_snr_domain(self):
        AcquisitionParams(snr=256.0)
        AcquisitionParams(snr=None)
        with pytest.raises(ConfigurationError):
            AcquisitionParams(snr=0.0)
