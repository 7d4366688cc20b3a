import numpy as np
import pytest

from ssvepkit.baselines import (
    PsdaConfig,
    build_references,
    cca_detect_trial,
    cca_max_correlation,
    cca_pick,
    default_match_tolerance,
    psda_detect_trial,
    psda_pick,
    reference_set,
)
from ssvepkit.decision import Detected, TimedOut
from ssvepkit.filterbank import detect_trial, seeded_bank
from ssvepkit.signals import (
    PreprocessConfig,
    SampledSignal,
    Spectrum,
    WindowPlan,
    magnitude_spectrum,
)
from ssvepkit.data_io import SynthSpec, noise_std_for_snr, synth_trial

from conftest import SEVEN_TARGETS, THREE_TARGETS, make_tone

PLAN = WindowPlan(4.0, 1.0)
PRE = PreprocessConfig()


def clean_trial(freq, duration=12.0, fs=256.0, seed=0, snr_db=None):
    sigma = 0.0 if snr_db is None else noise_std_for_snr((1.0, 0.5), snr_db)
    return synth_trial(
        SynthSpec(stimulus=freq, duration=duration, sampling_rate=fs,
                  harmonic_amplitudes=(1.0, 0.5), noise_std=sigma, seed=seed)
    )


class TestDetectTrial:
    def test_clean_8hz_detects_at_earliest_time(self):
        result = detect_trial(clean_trial(8.0, snr_db=10.0), seeded_bank(THREE_TARGETS),
                              PLAN, PRE)
        assert result == Detected(8.0, 6.0)

    def test_clean_10hz_against_seven_target_set(self):
        result = detect_trial(clean_trial(10.0, snr_db=10.0), seeded_bank(SEVEN_TARGETS),
                              PLAN, PRE)
        assert isinstance(result, Detected)
        assert result.frequency == 10.0

    def test_zero_signal_is_deterministic(self):
        sig = SampledSignal(("Oz",), np.zeros(12 * 256), 256.0)
        bank = seeded_bank(THREE_TARGETS)
        first = detect_trial(sig, bank, PLAN, PRE)
        second = detect_trial(sig, bank, PLAN, PRE)
        assert first == second  # all-tie picks resolve identically every run

    def test_missing_channel_rejected(self):
        sig = clean_trial(8.0)
        with pytest.raises(ValueError, match="channel"):
            detect_trial(sig, seeded_bank(THREE_TARGETS), PLAN,
                         PreprocessConfig(channel="Pz"))

    def test_never_detects_before_third_window(self):
        for seed in range(5):
            noise = synth_trial(SynthSpec(stimulus=8.0, duration=12.0, sampling_rate=256.0,
                                          harmonic_amplitudes=(0.0,), noise_std=1.0,
                                          seed=seed))
            result = detect_trial(noise, seeded_bank(THREE_TARGETS), PLAN, PRE)
            if isinstance(result, Detected):
                assert result.detection_time >= 6.0


class TestPsda:
    def test_fundamental_peak(self):
        spec = magnitude_spectrum(make_tone(8.0, duration=4.0), PRE).restricted(5.0, 35.0)
        pick = psda_pick(spec, PsdaConfig(THREE_TARGETS, 0.25), end_time=4.0)
        assert pick.frequency == 8.0

    def test_second_harmonic_maps_to_fundamental(self):
        spec = magnitude_spectrum(make_tone(16.0, duration=4.0), PRE).restricted(5.0, 35.0)
        pick = psda_pick(spec, PsdaConfig(THREE_TARGETS, 0.25))
        assert pick.frequency == 8.0

    def test_unmatched_peak_falls_back_to_nearest(self):
        spec = magnitude_spectrum(make_tone(11.0, duration=4.0), PRE).restricted(5.0, 35.0)
        pick = psda_pick(spec, PsdaConfig(THREE_TARGETS, 0.25))
        assert pick.frequency == 8.0  # |11-8| < |11-14|

    def test_collision_prefers_fundamental(self):
        # 28 Hz is both a fundamental and 2 x 14; the fundamental must win
        spec = magnitude_spectrum(make_tone(28.0, duration=4.0), PRE).restricted(5.0, 35.0)
        pick = psda_pick(spec, PsdaConfig(THREE_TARGETS, 0.25))
        assert pick.frequency == 28.0

    def test_scale_invariance(self):
        spec = magnitude_spectrum(make_tone(9.3, duration=4.0), PRE).restricted(5.0, 35.0)
        cfg = PsdaConfig.for_targets(SEVEN_TARGETS)
        ref = psda_pick(spec, cfg).frequency
        scaled = Spectrum(spec.bin_frequencies, 123.456 * spec.magnitudes)
        assert psda_pick(scaled, cfg).frequency == ref

    def test_empty_spectrum_rejected(self):
        with pytest.raises(ValueError):
            psda_pick(Spectrum(np.empty(0), np.empty(0)), PsdaConfig(THREE_TARGETS, 0.25))

    def test_tolerance_invariant(self):
        with pytest.raises(ValueError, match="ambiguous"):
            PsdaConfig(THREE_TARGETS, 1.5)  # half the smallest gap is 1.0

    def test_default_tolerance_respects_dense_sets(self):
        assert default_match_tolerance(SEVEN_TARGETS) < 0.25
        cfg = PsdaConfig.for_targets(SEVEN_TARGETS)  # must construct cleanly
        assert cfg.match_tolerance > 0

    def test_trial_protocol(self):
        result = psda_detect_trial(clean_trial(14.0, snr_db=10.0),
                                   PsdaConfig.for_targets(THREE_TARGETS), PLAN, PRE)
        assert result == Detected(14.0, 6.0)


class TestReferences:
    def test_two_harmonics_give_four_rows(self):
        rows = build_references(8.0, PLAN, 256.0, harmonic_count=2)
        assert rows.shape == (4, 1024)

    def test_sin_cos_start_values(self):
        rows = build_references(8.0, PLAN, 256.0, harmonic_count=1)
        # integer-period window: mean removal leaves t=0 values intact
        assert abs(rows[0, 0] - 0.0) < 1e-10
        assert abs(rows[1, 0] - 1.0) < 1e-10

    def test_rows_are_zero_mean(self):
        rows = build_references(7.3, PLAN, 256.0, harmonic_count=3)
        assert np.all(np.abs(rows.mean(axis=1)) < 1e-10)

    def test_nyquist_violation_rejected(self):
        with pytest.raises(ValueError, match="Nyquist"):
            build_references(28.0, PLAN, 64.0, harmonic_count=2)

    def test_cross_target_harmonic_rows_excluded(self):
        refs = reference_set(THREE_TARGETS, PLAN, 256.0, harmonic_count=2)
        assert refs.entries[14.0].shape[0] == 2  # 2 x 14 collides with 28
        assert refs.entries[8.0].shape[0] == 4
        assert refs.entries[28.0].shape[0] == 4
        full = reference_set(THREE_TARGETS, PLAN, 256.0, harmonic_count=2,
                             exclude_cross_target=False)
        assert all(m.shape[0] == 4 for m in full.entries.values())


class TestCcaCorrelation:
    def test_reference_row_correlates_perfectly(self):
        rows = build_references(8.0, PLAN, 256.0, 2)
        sol = cca_max_correlation(rows[0:1], rows)
        assert sol.rho >= 0.999

    def test_phase_shift_spanned_by_sin_cos_pair(self):
        t = np.arange(1024) / 256.0
        for phase in (0.3, 1.1, 2.9, 4.4):
            x = np.sin(2 * np.pi * 8.0 * t + phase)[np.newaxis, :]
            sol = cca_max_correlation(x, build_references(8.0, PLAN, 256.0, 2))
            assert sol.rho >= 0.999

    def test_noise_null_distribution(self):
        rng = np.random.default_rng(7)
        refs = build_references(8.0, PLAN, 256.0, 2)
        rhos = [
            cca_max_correlation(rng.normal(size=(1, 1024)), refs).rho
            for _ in range(100)
        ]
        assert max(rhos) < 0.5

    def test_invariant_under_channel_mixing(self):
        rng = np.random.default_rng(3)
        t = np.arange(1024) / 256.0
        x = np.stack([
            np.sin(2 * np.pi * 8.0 * t + 0.4) + 0.1 * rng.normal(size=1024),
            np.cos(2 * np.pi * 8.0 * t) + 0.1 * rng.normal(size=1024),
            rng.normal(size=1024),
        ])
        refs = build_references(8.0, PLAN, 256.0, 2)
        base = cca_max_correlation(x, refs).rho
        for _ in range(5):
            mix = rng.normal(size=(3, 3))
            while abs(np.linalg.det(mix)) < 1e-3:
                mix = rng.normal(size=(3, 3))
            mixed = cca_max_correlation(mix @ x, refs).rho
            assert abs(mixed - base) < 1e-6

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(2, 500))
        y = rng.normal(size=(3, 500))
        assert abs(cca_max_correlation(x, y).rho - cca_max_correlation(y, x).rho) < 1e-9

    def test_underdetermined_rejected(self):
        with pytest.raises(ValueError, match="underdetermined"):
            cca_max_correlation(np.zeros((3, 6)), np.zeros((4, 6)))

    def test_non_finite_rejected(self):
        x = np.full((1, 100), np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            cca_max_correlation(x, np.zeros((2, 100)))


class TestCcaPick:
    def test_clean_14hz_window(self):
        sig = clean_trial(14.0, duration=4.0)
        refs = reference_set(THREE_TARGETS, PLAN, 256.0)
        assert cca_pick(sig, refs).frequency == 14.0

    def test_equal_rho_breaks_to_lowest(self):
        rows = build_references(8.0, PLAN, 256.0, 2)
        from ssvepkit.baselines import ReferenceSet
        refs = ReferenceSet(entries={8.0: rows, 14.0: rows})  # identical entries tie
        assert cca_pick(SampledSignal(("Oz",), rows[0], 256.0), refs).frequency == 8.0

    def test_28hz_windows_at_10db(self):
        refs = reference_set(THREE_TARGETS, PLAN, 256.0)
        sigma = noise_std_for_snr((1.0, 0.5), 10.0)
        wins = 0
        for seed in range(100):
            sig = synth_trial(SynthSpec(stimulus=28.0, duration=4.0, sampling_rate=256.0,
                                        harmonic_amplitudes=(1.0, 0.5), noise_std=sigma,
                                        seed=seed))
            if cca_pick(sig, refs).frequency == 28.0:
                wins += 1
        assert wins >= 95

    def test_trial_protocol(self):
        refs = reference_set(THREE_TARGETS, PLAN, 256.0)
        result = cca_detect_trial(clean_trial(28.0, snr_db=10.0), refs, PLAN, PRE)
        assert result == Detected(28.0, 6.0)

    def test_baselines_never_detect_before_third_window(self):
        for seed in range(5):
            noise = synth_trial(SynthSpec(stimulus=8.0, duration=10.0, sampling_rate=256.0,
                                          harmonic_amplitudes=(0.0,), noise_std=1.0,
                                          seed=seed))
            psda = psda_detect_trial(noise, PsdaConfig.for_targets(THREE_TARGETS), PLAN, PRE)
            cca = cca_detect_trial(noise, reference_set(THREE_TARGETS, PLAN, 256.0),
                                   PLAN, PRE)
            for result in (psda, cca):
                if isinstance(result, Detected):
                    assert result.detection_time >= 6.0
