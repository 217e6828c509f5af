import numpy as np
import pytest

from msk_pinn import data as D
from msk_pinn import simulator as S


@pytest.fixture(scope="module")
def trials():
    cfg = S.knee_config(duration=1.5)
    return S.generate_dataset(cfg, 3, [1.0, 1.5], seed=0)


def synthetic_trial(n, n_muscles=2, dt=1e-3, shift=0.0, seed=0):
    rng = np.random.default_rng(seed)
    return S.Trial(
        dt=dt, time=np.arange(n) * dt,
        forces=np.abs(rng.normal(size=(n, n_muscles))) + shift,
        theta=rng.normal(size=n) + shift,
        tau=rng.normal(size=n),
        emg_raw=rng.normal(size=(n, n_muscles)),
        emg_env=rng.uniform(size=(n, n_muscles)),
        speed=1.0, seed=seed,
    )


class TestMakeWindows:
    def test_exact_fit_single_window(self):
        windows = D.make_windows([synthetic_trial(100)], 100, 1)
        assert len(windows) == 1

    def test_stride_count(self):
        windows = D.make_windows([synthetic_trial(150)], 100, 25)
        assert len(windows) == 3  # floor((150-100)/25)+1

    def test_window_shapes(self):
        windows = D.make_windows([synthetic_trial(120, n_muscles=3)], 100, 10)
        w = windows[0]
        assert w.inputs.shape == (4, 100)
        assert w.targets.shape == (100, 4)

    def test_time_channel_normalized(self):
        windows = D.make_windows([synthetic_trial(100)], 100, 1)
        t = windows[0].inputs[0]
        assert t[0] == 0.0 and t[-1] == 1.0

    def test_trial_shorter_than_window(self):
        with pytest.raises(D.DataError, match="shorter"):
            D.make_windows([synthetic_trial(50)], 100, 1)

    def test_windows_do_not_straddle_trials(self):
        windows = D.make_windows([synthetic_trial(110), synthetic_trial(110)], 100, 5)
        assert all(w.offset + 100 <= 110 for w in windows)
        assert {w.trial_index for w in windows} == {0, 1}


class TestNormalization:
    def test_round_trip(self):
        rng = np.random.default_rng(1)
        targets = rng.normal(size=(50, 3)) * 10 + 5
        stats = D.NormStats(targets.mean(axis=0), targets.std(axis=0))
        back = D.denormalize(D.normalize(targets, stats), stats)
        assert np.abs(back - targets).max() < 1e-10

    def test_train_stats_standardize_train(self):
        windows = D.make_windows([synthetic_trial(200, seed=3)], 100, 10)
        stats = D.fit_stats(windows)
        stacked = np.concatenate([D.normalize(w.targets, stats) for w in windows])
        assert np.abs(stacked.mean(axis=0)).max() < 1e-10
        assert np.abs(stacked.std(axis=0) - 1).max() < 1e-9

    def test_shifted_test_split_has_nonzero_mean(self):
        train = D.make_windows([synthetic_trial(100, seed=5)], 100, 1)
        test = D.make_windows([synthetic_trial(100, shift=3.0, seed=6)], 100, 1)
        stats = D.fit_stats(train)
        normalized = np.concatenate([D.normalize(w.targets, stats) for w in test])
        assert np.abs(normalized.mean(axis=0)).min() > 1e-3

    def test_zero_variance_rejected(self):
        with pytest.raises(D.DataError, match="zero-variance"):
            D.NormStats(np.zeros(2), np.array([1.0, 0.0]))


class TestSplits:
    def test_by_trial_counts(self):
        ids = list(range(5))
        trials5 = [synthetic_trial(100, seed=i) for i in ids]
        train, test = D.split_trials(trials5, D.SplitSpec("by-trial", 0.8, 0))
        assert len(train) == 4 and len(test) == 1
        assert sorted(train + test) == ids

    def test_intrasession_80_20(self):
        train, test = D.split_windows(100, D.SplitSpec("intrasession", 0.8, 1))
        assert len(train) == 80 and len(test) == 20
        assert not set(train) & set(test)

    def test_disjoint_and_seeded(self):
        a = D.split_windows(50, D.SplitSpec("intrasession", 0.8, 7))
        b = D.split_windows(50, D.SplitSpec("intrasession", 0.8, 7))
        assert a == b

    def test_invalid_kind(self):
        with pytest.raises(D.DataError, match="split kind"):
            D.SplitSpec("leave-one-out", 0.8, 0)

    def test_invalid_fraction(self):
        with pytest.raises(D.DataError, match="fraction"):
            D.SplitSpec("by-trial", 1.0, 0)


class TestBuildSplits:
    def test_no_leakage(self, trials):
        spec = D.SplitSpec("by-trial", 0.8, 3)
        train, test, _ = D.build_splits(trials, spec, 100, 50)
        recomputed = D.fit_stats(list(train.windows))
        assert np.array_equal(recomputed.mean, train.stats.mean)
        assert np.array_equal(recomputed.std, train.stats.std)
        assert train.stats is test.stats

    def test_manifest_reproducibility(self, trials, tmp_path):
        spec = D.SplitSpec("intrasession", 0.8, 5)
        _, _, manifest = D.build_splits(trials, spec, 100, 50)
        path = tmp_path / "split.json"
        D.write_split_manifest(path, manifest)
        back = D.read_split_manifest(path)
        assert back == manifest
        assert not set(back["train_windows"]) & set(back["test_windows"])

    def test_windows_reference_not_copy(self, trials):
        spec = D.SplitSpec("by-trial", 0.8, 0)
        train, _, _ = D.build_splits(trials, spec, 100, 50)
        w = train.windows[0]
        trial = trials[w.trial_index]
        sl = slice(w.offset, w.offset + 100)
        assert np.array_equal(w.targets[:, -1], trial.theta[sl])
