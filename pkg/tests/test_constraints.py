import numpy as np
import pytest

from deepmmc.constraints import (
    ConstraintSplit,
    PairwiseConstraint,
    SamplingExhaustedError,
    partition,
    read_constraints,
    sample_constraints,
    split_train_test,
    write_constraints,
)
from deepmmc.numeric import make_rng


class TestPairwiseConstraint:
    def test_canonical_order(self):
        c = PairwiseConstraint(5, 2, True)
        assert (c.i, c.j) == (2, 5)

    def test_rejects_self_pair(self):
        with pytest.raises(ValueError):
            PairwiseConstraint(3, 3, True)


class TestSampleConstraints:
    def test_exhaustive_small_case(self):
        labels = [1, 1, 2, 2]
        out = sample_constraints(labels, 2, 0.5, make_rng(0))
        must = [c for c in out if c.same]
        cannot = [c for c in out if not c.same]
        assert len(must) == 1 and len(cannot) == 1
        assert must[0].key in {(0, 1), (2, 3)}
        assert cannot[0].key in {(0, 2), (0, 3), (1, 2), (1, 3)}

    def test_balanced_200(self):
        labels = np.repeat([1, 2, 3], 60)
        out = sample_constraints(labels, 200, 0.5, make_rng(1))
        assert sum(c.same for c in out) == 100
        assert sum(not c.same for c in out) == 100
        assert len({c.key for c in out}) == 200

    def test_flags_match_labels(self):
        labels = make_rng(2).integers(1, 4, size=50)
        out = sample_constraints(labels, 80, 0.4, make_rng(3))
        for c in out:
            assert c.same == (labels[c.i] == labels[c.j])

    def test_deterministic(self):
        labels = np.repeat([1, 2], 20)
        a = sample_constraints(labels, 30, 0.5, make_rng(9))
        b = sample_constraints(labels, 30, 0.5, make_rng(9))
        assert a == b

    def test_exhaustion(self):
        # only one same-label pair exists but five are requested
        with pytest.raises(SamplingExhaustedError):
            sample_constraints([1, 1, 2], 10, 0.5, make_rng(0))

    def test_seed_variation_looks_uniform(self):
        # different seeds should overlap roughly per uniform sampling,
        # not reproduce the same pair set (sanity, not strict)
        labels = np.repeat([1, 2], 30)
        a = {c.key for c in sample_constraints(labels, 40, 0.5, make_rng(0))}
        b = {c.key for c in sample_constraints(labels, 40, 0.5, make_rng(1))}
        assert a != b
        assert len(a & b) < 30


class TestSplitTrainTest:
    def make_pairs(self, n_must, n_cannot):
        pairs = [PairwiseConstraint(2 * i, 2 * i + 1, True) for i in range(n_must)]
        offset = 2 * n_must
        pairs += [
            PairwiseConstraint(offset + 2 * i, offset + 2 * i + 1, False)
            for i in range(n_cannot)
        ]
        return pairs

    def test_paper_protocol_split(self):
        pairs = self.make_pairs(100, 100)
        train, test = split_train_test(pairs, 0.5, make_rng(0))
        assert sum(c.same for c in train) == 50
        assert sum(not c.same for c in train) == 50
        assert len(test) == 100
        assert set(c.key for c in train).isdisjoint(c.key for c in test)
        assert {c.key for c in train} | {c.key for c in test} == {c.key for c in pairs}

    def test_two_pairs_go_one_each_side(self):
        pairs = self.make_pairs(1, 1)
        train, test = split_train_test(pairs, 0.5, make_rng(0))
        assert len(train) == 1 and len(test) == 1

    def test_deterministic(self):
        pairs = self.make_pairs(7, 5)
        a = split_train_test(pairs, 0.6, make_rng(4))
        b = split_train_test(pairs, 0.6, make_rng(4))
        assert a == b

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            split_train_test(self.make_pairs(2, 2), 1.0, make_rng(0))


class TestPartition:
    def test_complement(self):
        train = [PairwiseConstraint(0, 1, True), PairwiseConstraint(1, 2, False)]
        split = partition(train, 5)
        assert split.unlabeled.tolist() == [3, 4]

    def test_empty_train(self):
        split = partition([], 4)
        assert split.n_plus == 0 and split.n_minus == 0
        assert split.unlabeled.tolist() == [0, 1, 2, 3]

    def test_enumerated_example(self):
        train = [PairwiseConstraint(0, 1, True), PairwiseConstraint(0, 2, False)]
        split = partition(train, 4)
        assert [c.key for c in split.c_plus] == [(0, 1)]
        assert [c.key for c in split.c_minus] == [(0, 2)]
        assert split.unlabeled.tolist() == [3]

    def test_is_a_partition(self):
        labels = np.repeat([1, 2, 3], 10)
        pairs = sample_constraints(labels, 12, 0.5, make_rng(5))
        split = partition(pairs, 30)
        touched = {i for c in pairs for i in (c.i, c.j)}
        assert touched | set(split.unlabeled.tolist()) == set(range(30))
        assert touched.isdisjoint(split.unlabeled.tolist())

    def test_out_of_range_index(self):
        with pytest.raises(ValueError):
            partition([PairwiseConstraint(0, 9, True)], 5)


class TestConstraintFiles:
    def test_round_trip(self, tmp_path):
        pairs = [PairwiseConstraint(0, 3, True), PairwiseConstraint(1, 2, False)]
        path = tmp_path / "pairs.tsv"
        write_constraints(pairs, path)
        assert path.read_text() == "0\t3\t1\n1\t2\t0\n"
        assert read_constraints(path) == pairs

    def test_bad_flag(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("0\t1\t2\n")
        with pytest.raises(ValueError):
            read_constraints(path)

    def test_index_bound_check(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        write_constraints([PairwiseConstraint(0, 7, True)], path)
        with pytest.raises(ValueError):
            read_constraints(path, n_instances=5)


class TestConstraintSplitType:
    def test_counts(self):
        split = ConstraintSplit(
            (PairwiseConstraint(0, 1, True),),
            (PairwiseConstraint(0, 2, False), PairwiseConstraint(1, 3, False)),
            np.array([4]),
        )
        assert split.n_plus == 1 and split.n_minus == 2 and split.n_unlabeled == 1
