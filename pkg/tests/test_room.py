import numpy as np
import pytest

import beamfilt.room as room
from beamfilt.geometry import SPEED_OF_SOUND, ula
from beamfilt.room import (
    RoomScenario,
    image_method_rir,
    rt60_to_reflection,
    schroeder_rt60,
    simulate_mixture,
)

FS = 16000


def _scenario(sir_db=0.0, rt60=0.2, seed=0):
    rng = np.random.default_rng(seed)
    target = rng.standard_normal(FS)
    interf = rng.standard_normal(FS)
    return RoomScenario(
        room_dims=(6.0, 5.0, 3.0),
        rt60=rt60,
        array_center=(3.0, 2.5, 1.5),
        geometry=ula(9, 0.04),
        target_position=(4.0, 3.5, 1.5),
        target_signal=target,
        interference_position=(2.0, 1.5, 1.5),
        interference_signal=interf,
        sir_db=sir_db,
    )


class TestReflectionCalibration:
    def test_frozen_regression_value(self):
        # Regression pin for a representative room; recalibration should not
        # drift silently.
        assert rt60_to_reflection((5.0, 4.0, 3.0), 0.3) == pytest.approx(
            0.7914208148956297, abs=1e-6
        )

    def test_monotone_in_rt60(self):
        dims = (6.0, 5.0, 3.0)
        coeffs = [rt60_to_reflection(dims, t) for t in (0.1, 0.2, 0.35, 0.5)]
        assert all(b > a for a, b in zip(coeffs, coeffs[1:]))

    def test_achieved_rt60_within_quarter(self):
        dims = (6.0, 5.0, 3.0)
        src = (1.8, 2.25, 1.5)
        mic = (4.2, 2.75, 1.5)
        for target in (0.2, 0.5):
            coeff = rt60_to_reflection(dims, target)
            h = image_method_rir(dims, coeff, src, mic, FS, length_s=1.0)
            measured = schroeder_rt60(h, FS)
            assert abs(measured - target) <= 0.25 * target

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            rt60_to_reflection((5.0, 4.0, 3.0), 0.0)

    def test_unreachable_target_raises(self):
        with pytest.raises(ValueError):
            rt60_to_reflection((3.0, 3.0, 2.5), 5.0)


class TestImageMethod:
    def test_anechoic_single_tap(self):
        # Zero reflection: exactly one tap at round(d fs / c) with 1/(4 pi d).
        src = (1.0, 2.5, 1.5)
        mic = (4.0, 2.5, 1.5)
        h = image_method_rir((6.0, 5.0, 3.0), 0.0, src, mic, FS, length_s=0.05)
        d = 3.0
        expected_idx = int(round(d * FS / SPEED_OF_SOUND))
        assert np.argmax(np.abs(h)) == expected_idx
        assert h[expected_idx] == pytest.approx(1.0 / (4.0 * np.pi * d), rel=1e-12)
        assert np.count_nonzero(h) == 1

    def test_inverse_distance_amplitude(self):
        # Doubling the distance halves the direct-path amplitude.
        h1 = image_method_rir(
            (8.0, 5.0, 3.0), 0.0, (1.0, 2.5, 1.5), (2.0, 2.5, 1.5), FS,
            length_s=0.05,
        )
        h2 = image_method_rir(
            (8.0, 5.0, 3.0), 0.0, (1.0, 2.5, 1.5), (3.0, 2.5, 1.5), FS,
            length_s=0.05,
        )
        assert h1.max() == pytest.approx(2.0 * h2.max(), rel=1e-12)

    def test_direct_peak_with_reflections(self):
        # With walls on, the largest tap is still the direct path within
        # one sample of round(d fs / c).
        src = (2.0, 2.0, 1.5)
        mic = (4.0, 3.0, 1.5)
        d = np.linalg.norm(np.subtract(mic, src))
        h = image_method_rir((6.0, 5.0, 3.0), 0.6, src, mic, FS, length_s=0.3)
        assert abs(np.argmax(np.abs(h)) - round(d * FS / SPEED_OF_SOUND)) <= 1

    def test_energy_grows_with_reflection(self):
        src = (2.0, 2.0, 1.5)
        mic = (4.0, 3.0, 1.5)
        energies = [
            np.sum(image_method_rir(
                (6.0, 5.0, 3.0), b, src, mic, FS, length_s=0.4) ** 2)
            for b in (0.0, 0.4, 0.8)
        ]
        assert energies[0] < energies[1] < energies[2]

    def test_max_order_truncates_image_grid(self):
        src = (2.0, 2.0, 1.5)
        mic = (4.0, 3.0, 1.5)
        energies = [
            np.sum(image_method_rir(
                (6.0, 5.0, 3.0), 0.8, src, mic, FS, length_s=0.1,
                max_order=k) ** 2)
            for k in (0, 1, 2)
        ]
        assert energies[0] < energies[1] < energies[2]
        # The direct-path tap is unaffected by the grid truncation.
        h0 = image_method_rir(
            (6.0, 5.0, 3.0), 0.8, src, mic, FS, length_s=0.1, max_order=0
        )
        d = np.linalg.norm(np.subtract(mic, src))
        idx = int(round(d * FS / SPEED_OF_SOUND))
        assert h0[idx] >= 1.0 / (4.0 * np.pi * d) - 1e-12

    def test_position_validation(self):
        with pytest.raises(ValueError):
            image_method_rir((6.0, 5.0, 3.0), 0.5, (7.0, 1.0, 1.0), (1.0, 1.0, 1.0), FS)
        with pytest.raises(ValueError):
            image_method_rir((6.0, 5.0, 3.0), 0.5, (1.0, 1.0, 1.0), (1.0, 6.0, 1.0), FS)
        with pytest.raises(ValueError):
            image_method_rir((6.0, 5.0, 3.0), 1.5, (1.0, 1.0, 1.0), (2.0, 1.0, 1.0), FS)

    def test_kernel_backends_agree(self, monkeypatch):
        from beamfilt._imgsrc_py import rir_core as py_core

        src = (2.2, 1.7, 1.5)
        mic = (4.1, 3.3, 1.4)
        href = image_method_rir((6.0, 5.0, 3.0), 0.7, src, mic, FS, length_s=0.3)
        monkeypatch.setattr(room, "_rir_core", py_core)
        hpy = image_method_rir((6.0, 5.0, 3.0), 0.7, src, mic, FS, length_s=0.3)
        np.testing.assert_allclose(hpy, href, rtol=0, atol=1e-12)


class TestScenario:
    def test_target_doa_geometry(self):
        s = _scenario()
        # Target at +x, +y from the array on the x-axis: 45 deg azimuth.
        assert s.target_doa().azimuth_deg == pytest.approx(45.0, abs=1e-9)
        assert s.interference_doa().azimuth_deg == pytest.approx(135.0, abs=1e-9)

    def test_validation_rejects_outside_positions(self):
        with pytest.raises(ValueError):
            RoomScenario(
                room_dims=(6.0, 5.0, 3.0),
                rt60=0.2,
                array_center=(3.0, 2.5, 1.5),
                geometry=ula(9, 0.04),
                target_position=(5.9, 4.9, 2.9),  # 3.5 m away: too far
                target_signal=np.ones(100),
                interference_position=(2.0, 1.5, 1.5),
                interference_signal=np.ones(100),
                sir_db=0.0,
            )

    def test_validation_rejects_bad_rt60(self):
        with pytest.raises(ValueError):
            s = _scenario()
            RoomScenario(
                room_dims=s.room_dims,
                rt60=1.5,
                array_center=s.array_center,
                geometry=s.geometry,
                target_position=s.target_position,
                target_signal=s.target_signal,
                interference_position=s.interference_position,
                interference_signal=s.interference_signal,
                sir_db=0.0,
            )


class TestSimulateMixture:
    def test_sir_is_exact(self):
        for sir in (-5.0, 0.0, 5.0):
            s = _scenario(sir_db=sir)
            out = simulate_mixture(s)
            p_t = np.mean(out["target_reverb"][0] ** 2)
            p_i = np.mean(out["interference"][0] ** 2)
            measured = 10.0 * np.log10(p_t / p_i)
            assert abs(measured - sir) < 0.01

    def test_sir_cap(self):
        s = _scenario(sir_db=90.0)
        out = simulate_mixture(s, anechoic=True)
        p_t = np.mean(out["target_reverb"][0] ** 2)
        p_i = np.mean(out["interference"][0] ** 2)
        assert 10.0 * np.log10(p_t / p_i) == pytest.approx(60.0, abs=0.01)

    def test_mixture_is_sum_of_components(self):
        out = simulate_mixture(_scenario())
        np.testing.assert_allclose(
            out["mixture"],
            out["target_reverb"] + out["interference"],
            atol=1e-10,
        )

    def test_anechoic_direct_equals_reverb(self):
        out = simulate_mixture(_scenario(), anechoic=True)
        n = min(out["target_direct"].shape[1], out["target_reverb"].shape[1])
        np.testing.assert_allclose(
            out["target_direct"][:, :n], out["target_reverb"][:, :n], atol=1e-12
        )

    def test_deterministic(self):
        a = simulate_mixture(_scenario(seed=3))
        b = simulate_mixture(_scenario(seed=3))
        np.testing.assert_array_equal(a["mixture"], b["mixture"])

    def test_silent_source_rejected(self):
        s = _scenario()
        s.target_signal = np.zeros(FS)
        with pytest.raises(ValueError):
            simulate_mixture(s)


class TestSchroeder:
    def test_synthetic_exponential_decay(self):
        # h(t) = e^(-t 3 ln 10 / rt60) noise has RT60 by construction.
        rt60 = 0.4
        t = np.arange(int(FS * 1.0)) / FS
        rng = np.random.default_rng(0)
        h = rng.standard_normal(len(t)) * np.exp(-3.0 * np.log(10.0) * t / rt60)
        assert schroeder_rt60(h, FS) == pytest.approx(rt60, rel=0.05)

    def test_rejects_truncated_decay(self):
        # Three equal taps never reach the -5 dB start of the fit range.
        with pytest.raises(ValueError):
            schroeder_rt60(np.ones(3), FS)
