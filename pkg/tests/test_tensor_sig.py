import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigfbm import (
    DomainError,
    MultiPath,
    TruncatedSignature,
    Word,
    chen_concat,
    path_signature,
    predictor_count,
    segment_signature,
    shuffle,
    shuffle_check,
    time_augment,
    word_index,
)
from sigfbm.tensor_sig import all_words, batch_signatures, signature_to_csv_string


def random_path(rng, d=2, n=20, t_max=1.0):
    times = np.linspace(0.0, t_max, n)
    values = rng.standard_normal((d, n)).cumsum(axis=1)
    return MultiPath(times, values)


class TestWords:
    def test_word_index_examples(self):
        assert word_index(Word((1,), 2)) == 0
        assert word_index(Word((2, 1), 2)) == 2
        assert word_index(Word((3, 3), 3)) == 8

    def test_letter_out_of_range(self):
        with pytest.raises(DomainError):
            Word((3,), 2)
        with pytest.raises(DomainError):
            Word((0,), 2)

    @given(d=st.integers(1, 4), k=st.integers(0, 4))
    @settings(max_examples=30, deadline=None)
    def test_word_index_is_bijective_within_level(self, d, k):
        indices = [word_index(w) for w in all_words(d, k)]
        assert sorted(indices) == list(range(d**k))

    def test_predictor_count(self):
        assert predictor_count(2, 3) == 15
        assert predictor_count(1, 3) == 4
        assert predictor_count(3, 2) == 13

    def test_predictor_count_matches_storage(self):
        sig = TruncatedSignature.identity(3, 4)
        assert sig.flatten().size == predictor_count(3, 4)


class TestTimeAugment:
    def test_first_row_is_time(self):
        path = random_path(np.random.default_rng(0), d=1)
        aug = time_augment(path)
        assert aug.d == 2
        np.testing.assert_array_equal(aug.values[0], path.times)

    def test_double_augment(self):
        path = random_path(np.random.default_rng(1), d=1)
        twice = time_augment(time_augment(path))
        np.testing.assert_array_equal(twice.values[0], path.times)
        np.testing.assert_array_equal(twice.values[1], path.times)

    def test_constant_path(self):
        times = np.linspace(0, 1, 5)
        aug = time_augment(MultiPath(times, np.full((1, 5), 3.0)))
        assert np.ptp(aug.values[1]) == 0.0
        np.testing.assert_array_equal(aug.values[0], times)


class TestSegmentSignature:
    def test_1d_powers(self):
        sig = segment_signature([2.0], 3)
        assert [float(lev[0]) for lev in sig.levels] == pytest.approx([1, 2, 2, 4 / 3])

    def test_zero_increment_is_identity(self):
        sig = segment_signature([0.0, 0.0], 3)
        assert sig.level(0)[0] == 1.0
        for k in range(1, 4):
            assert np.all(sig.level(k) == 0.0)

    def test_d2_level2_all_half(self):
        sig = segment_signature([1.0, 1.0], 2)
        np.testing.assert_allclose(sig.level(2), 0.5)

    def test_depth_zero_rejected(self):
        with pytest.raises(DomainError):
            segment_signature([1.0], 0)


class TestChen:
    def test_identity_is_neutral(self):
        sig = segment_signature([0.7, -0.3], 3)
        ident = TruncatedSignature.identity(2, 3)
        for combined in (chen_concat(sig, ident), chen_concat(ident, sig)):
            for k in range(4):
                np.testing.assert_allclose(combined.level(k), sig.level(k), atol=1e-15)

    def test_collinear_segments_merge(self):
        d1, d2 = np.array([0.5, 1.0]), np.array([1.0, 2.0])
        combined = chen_concat(segment_signature(d1, 4), segment_signature(d2, 4))
        direct = segment_signature(d1 + d2, 4)
        for k in range(5):
            np.testing.assert_allclose(combined.level(k), direct.level(k), rtol=1e-12)

    def test_mismatched_shapes_rejected(self):
        with pytest.raises(DomainError):
            chen_concat(segment_signature([1.0], 2), segment_signature([1.0, 2.0], 2))
        with pytest.raises(DomainError):
            chen_concat(segment_signature([1.0], 2), segment_signature([1.0], 3))

    def test_split_invariance_random_paths(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(20):
            path = random_path(rng, d=2, n=16)
            whole = path_signature(path, 4)
            m = int(rng.integers(2, 15))
            left = MultiPath(path.times[: m + 1], path.values[:, : m + 1])
            right = MultiPath(path.times[m:], path.values[:, m:])
            combined = chen_concat(path_signature(left, 4), path_signature(right, 4))
            for k in range(1, 5):
                scale = np.abs(whole.level(k)).max() + 1e-30
                worst = max(worst, np.abs(combined.level(k) - whole.level(k)).max() / scale)
        assert worst <= 1e-10


class TestPathSignature:
    def test_monotone_1d(self):
        times = np.linspace(0, 1, 9)
        path = MultiPath(times, (2.0 * times)[None, :])
        sig = path_signature(path, 4)
        for k in range(5):
            assert sig.level(k)[0] == pytest.approx(2.0**k / math.factorial(k), rel=1e-12)

    def test_two_segment_cross_terms(self):
        path = MultiPath(
            np.array([0.0, 1.0, 2.0]),
            np.array([[0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]),
        )
        sig = path_signature(path, 2)
        assert sig.component((1, 2)) == pytest.approx(1.0)
        assert sig.component((2, 1)) == pytest.approx(0.0)

    def test_level1_is_displacement(self):
        path = random_path(np.random.default_rng(3), d=3)
        sig = path_signature(path, 2)
        np.testing.assert_allclose(
            sig.level(1), path.values[:, -1] - path.values[:, 0], rtol=1e-12
        )

    def test_back_and_forth_is_identity(self):
        rng = np.random.default_rng(5)
        fwd = random_path(rng, d=2, n=12)
        values = np.concatenate([fwd.values, fwd.values[:, ::-1][:, 1:]], axis=1)
        times = np.linspace(0, 1, values.shape[1])
        sig = path_signature(MultiPath(times, values), 4)
        for k in range(1, 5):
            assert np.abs(sig.level(k)).max() <= 1e-10

    def test_reparameterization_invariance(self):
        # resample the same PL trace on a refined grid: same signature
        times = np.array([0.0, 0.25, 0.5, 1.0])
        values = np.array([[0.0, 1.0, -0.5, 2.0], [1.0, 0.0, 0.5, 1.5]])
        path = MultiPath(times, values)
        fine_times = np.sort(np.unique(np.concatenate([times, np.linspace(0, 1, 37)])))
        fine_values = np.vstack([
            np.interp(fine_times, times, values[0]),
            np.interp(fine_times, times, values[1]),
        ])
        fine = MultiPath(fine_times, fine_values)
        a, b = path_signature(path, 4), path_signature(fine, 4)
        for k in range(5):
            np.testing.assert_allclose(a.level(k), b.level(k), atol=1e-10)

    def test_time_augment_breaks_reparameterization(self):
        times = np.array([0.0, 0.5, 1.0])
        warped = np.array([0.0, 0.1, 1.0])
        values = np.array([[0.0, 1.0, 3.0]])
        a = path_signature(time_augment(MultiPath(times, values)), 2)
        b = path_signature(time_augment(MultiPath(warped, values)), 2)
        assert not np.allclose(a.level(2), b.level(2))

    def test_too_few_points_rejected(self):
        with pytest.raises(DomainError):
            MultiPath(np.array([0.0]), np.array([[1.0]]))

    def test_batch_matches_single(self):
        rng = np.random.default_rng(8)
        inc = rng.standard_normal((4, 9, 2))
        flat = batch_signatures(inc, 3)
        for i in range(4):
            values = np.concatenate(
                [np.zeros((2, 1)), inc[i].cumsum(axis=0).T], axis=1
            )
            path = MultiPath(np.arange(10.0), values)
            np.testing.assert_allclose(
                flat[i], path_signature(path, 3).flatten(), rtol=1e-12, atol=1e-14
            )


class TestShuffle:
    def test_basic_pair(self):
        result = shuffle((1,), (2,)).as_dict()
        assert {w.letters: m for w, m in result.items()} == {(1, 2): 1, (2, 1): 1}

    def test_repeated_letter(self):
        result = shuffle((1,), (1,)).as_dict()
        assert {w.letters: m for w, m in result.items()} == {(1, 1): 2}

    def test_three_shuffles(self):
        result = shuffle((1, 2), (3,)).as_dict()
        assert {w.letters: m for w, m in result.items()} == {
            (1, 2, 3): 1,
            (1, 3, 2): 1,
            (3, 1, 2): 1,
        }

    @given(
        li=st.integers(0, 3), lj=st.integers(0, 3),
        data=st.data(),
    )
    @settings(max_examples=40, deadline=None)
    def test_total_multiplicity_is_binomial(self, li, lj, data):
        letters_i = tuple(data.draw(st.integers(1, 2)) for _ in range(li))
        letters_j = tuple(data.draw(st.integers(1, 2)) for _ in range(lj))
        ms = shuffle(Word(letters_i, 2), Word(letters_j, 2))
        assert ms.total_multiplicity() == math.comb(li + lj, li)

    def test_shuffle_check_identity_signature(self):
        ident = TruncatedSignature.identity(2, 4)
        assert shuffle_check(ident, (1,), (2,)) == 0.0

    def test_shuffle_check_on_pl_paths(self):
        rng = np.random.default_rng(13)
        worst = 0.0
        for _ in range(10):
            sig = path_signature(random_path(rng, d=2, n=14), 4)
            for li in range(1, 4):
                for lj in range(1, 5 - li):
                    for wi in itertools.product((1, 2), repeat=li):
                        for wj in itertools.product((1, 2), repeat=lj):
                            worst = max(worst, shuffle_check(sig, Word(wi, 2), Word(wj, 2)))
        assert worst <= 1e-10

    def test_depth_overflow_rejected(self):
        sig = path_signature(random_path(np.random.default_rng(0)), 2)
        with pytest.raises(DomainError):
            shuffle_check(sig, (1, 2), (1,))


class TestSignatureCsv:
    def test_export_layout(self):
        sig = segment_signature([1.0, 2.0], 2)
        text = signature_to_csv_string(sig)
        lines = text.strip().splitlines()
        assert lines[0] == "word,value"
        assert lines[1].split(",") == ["", "1"]
        assert lines[2].startswith("1,")
        assert len(lines) == 1 + predictor_count(2, 2)
        row = dict(line.split(",", 1) for line in lines[1:])
        assert float(row["1.2"]) == pytest.approx(1.0)  # 1*2/2
