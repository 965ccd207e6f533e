import json

import numpy as np
import pytest

from catfactor.classifier import (
    ModelFormatError,
    evaluate,
    joint_log_scores,
    load_model,
    model_from_dict,
    model_to_dict,
    predict,
    predict_proba,
    save_model,
    train,
)
from catfactor.dataset import Dataset, DatasetError, VariableSchema, load_csv
from catfactor.partitions import SetPartition
from catfactor.search import SearchConfig
from catfactor.synth import ClassSpec, GeneratorSpec, binary_schemas, generate
from oracles import joint_table_posteriors, naive_bayes_posteriors


def labelled(rows, cards, n_classes):
    schemas = [VariableSchema(f"f{i}", tuple(str(k) for k in range(c))) for i, c in enumerate(cards)]
    schemas.append(VariableSchema("y", tuple(f"c{k}" for k in range(n_classes))))
    return Dataset(tuple(schemas), np.array(rows, dtype=np.int64).reshape(len(rows), len(cards) + 1))


def random_labelled(rng, max_feats=4, max_rows=40):
    nf = int(rng.integers(1, max_feats + 1))
    cards = rng.integers(1, 4, size=nf).tolist()
    C = int(rng.integers(2, 4))
    n = int(rng.integers(1, max_rows + 1))
    cols = [rng.integers(0, c, size=n) for c in cards] + [rng.integers(0, C, size=n)]
    return labelled(np.column_stack(cols), cards, C), cards, C


def all_rows(cards):
    return np.array(np.meshgrid(*[np.arange(c) for c in cards], indexing="ij")).reshape(len(cards), -1).T


def dependent_pair_spec(seed=0):
    return GeneratorSpec(
        binary_schemas(3),
        seed=seed,
        label_schema=VariableSchema("y", ("n", "p")),
        class_probs=[0.5, 0.5],
        class_specs=(
            ClassSpec(SetPartition((0, 0, 1)), ([0.4, 0.1, 0.1, 0.4], [0.5, 0.5])),
            ClassSpec(SetPartition((0, 0, 1)), ([0.1, 0.4, 0.4, 0.1], [0.5, 0.5])),
        ),
    )


class TestOracles:
    @pytest.mark.parametrize("seed", range(10))
    def test_singletons_equal_naive_bayes(self, seed):
        rng = np.random.default_rng(seed)
        d, cards, C = random_labelled(rng)
        m = train(d, "y", partition=SetPartition.singletons(len(cards)))
        X, y = d.rows[:, :-1].tolist(), d.rows[:, -1].tolist()
        for x in all_rows(cards):
            want = naive_bayes_posteriors(X, y, C, cards, x.tolist())
            np.testing.assert_allclose(predict(m, x), want, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_full_block_equals_joint_table(self, seed):
        rng = np.random.default_rng(100 + seed)
        d, cards, C = random_labelled(rng)
        m = train(d, "y", partition=SetPartition.full(len(cards)))
        X, y = d.rows[:, :-1].tolist(), d.rows[:, -1].tolist()
        for x in all_rows(cards):
            want = joint_table_posteriors(X, y, C, cards, x.tolist())
            np.testing.assert_allclose(predict(m, x), want, rtol=0, atol=1e-12)

    def test_single_feature_by_hand(self):
        d = load_csv(b"f,y\na,0\na,0\nb,0\nb,1\nb,1\na,1\n")
        m = train(d, "y")
        # class prior (3+1)/(6+2); P(f=a|0) = (2+1)/(3+2), P(f=a|1) = (1+1)/(3+2)
        np.testing.assert_allclose(predict(m, [0]), [0.6, 0.4], atol=1e-15)
        np.testing.assert_allclose(predict(m, [1]), [0.4, 0.6], atol=1e-15)


class TestTrain:
    def test_shared_groups_dependent_pair(self):
        d = generate(dependent_pair_spec(seed=1), 5000)
        m = train(d, "y")
        assert m.partitions == (SetPartition((0, 0, 1)),)
        assert m.partition_mode == "shared"

    def test_per_class(self):
        d = generate(dependent_pair_spec(seed=2), 5000)
        m = train(d, "y", mode="per_class")
        assert m.partitions == (SetPartition((0, 0, 1)), SetPartition((0, 0, 1)))

    def test_invariants(self):
        rng = np.random.default_rng(4)
        d, cards, C = random_labelled(rng, max_rows=200)
        for mode in ("shared", "per_class"):
            m = train(d, "y", mode=mode)
            assert sum(m.class_counts) == d.sample_count
            for c in range(C):
                for t in m.block_tables[c]:
                    assert t.sum() == m.class_counts[c]

    def test_empty_class_kept(self):
        d = labelled([[0, 0], [1, 0], [1, 1]], [2], 3)
        m = train(d, "y")
        assert m.class_counts == (2, 1, 0)
        # empty class: prior (0+1)/(3+3), uniform predictive 1/2 for the feature
        s = joint_log_scores(m, [[0]])[0]
        assert s[2] == pytest.approx(np.log(1 / 6) + np.log(1 / 2), abs=1e-14)

    def test_errors(self):
        d = labelled([[0, 0], [1, 1]], [2], 2)
        with pytest.raises(DatasetError):
            train(d, "nope")
        with pytest.raises(DatasetError):
            train(d.select([1]), "y")
        one_class = Dataset((VariableSchema("f", ("a",)), VariableSchema("y", ("k",))), [[0, 0]])
        with pytest.raises(DatasetError):
            train(one_class, "y")
        with pytest.raises(ValueError):
            train(d, "y", mode="weird")

    def test_greedy_config(self):
        d = generate(dependent_pair_spec(seed=3), 3000)
        m = train(d, "y", SearchConfig(mode="greedy"))
        assert m.partitions == (SetPartition((0, 0, 1)),)


class TestPredict:
    def test_identical_tables_half(self):
        d = labelled([[0, 0], [1, 0], [0, 1], [1, 1]], [2], 2)
        m = train(d, "y")
        for x in ([0], [1]):
            np.testing.assert_allclose(predict(m, x), [0.5, 0.5], atol=1e-15)

    def test_posteriors_normalised(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            d, cards, C = random_labelled(rng, max_rows=100)
            m = train(d, "y")
            post = predict_proba(m, all_rows(cards))
            assert np.all(post > 0)
            np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)

    def test_argmax_invariant_to_shift(self):
        rng = np.random.default_rng(9)
        d, cards, C = random_labelled(rng, max_rows=100)
        m = train(d, "y")
        rows = all_rows(cards)
        s = joint_log_scores(m, rows)
        for shift in (-1e3, 7.5, 1e3):
            assert np.array_equal(np.argmax(s + shift, axis=1), np.argmax(predict_proba(m, rows), axis=1))

    def test_block_predictive_sums_to_one(self):
        d = generate(dependent_pair_spec(seed=5), 300)
        m = train(d, "y")
        for c in range(m.n_classes):
            for t in m.block_tables[c]:
                assert ((t + 1) / (m.class_counts[c] + len(t))).sum() == pytest.approx(1.0, abs=1e-14)

    def test_unseen_category(self):
        d = load_csv(b"f,g,y\na,,0\nb,x,1\n", missing_policy="category")
        m = train(d, "y")
        with pytest.raises(DatasetError):
            predict(m, [2, 0])
        with pytest.raises(DatasetError):
            predict(m, [0, 5])
        # g has a missing category ("" seen in row 1); clamp maps unknowns to it
        np.testing.assert_array_equal(predict(m, [0, 5], unknown="missing"), predict(m, [0, 0]))


class TestEvaluate:
    def test_empty(self):
        d = labelled([[0, 0], [1, 1]], [2], 2)
        m = train(d, "y")
        with pytest.raises(DatasetError):
            evaluate(m, d.subset_rows(np.zeros(2, dtype=bool)))

    def test_separable(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, size=2000)
        d = labelled(np.column_stack([y, y]), [2], 2)
        res = evaluate(train(d, "y"), d)
        assert res["accuracy"] == 1.0
        assert res["confusion"][0][1] == 0 and res["confusion"][1][0] == 0
        assert sum(map(sum, res["confusion"])) == 2000

    def test_matches_naive_bayes_oracle(self):
        rng = np.random.default_rng(12)
        d, cards, C = random_labelled(rng, max_rows=60)
        m = train(d, "y", partition=SetPartition.singletons(len(cards)))
        X, y = d.rows[:, :-1].tolist(), d.rows[:, -1].tolist()
        post = [naive_bayes_posteriors(X, y, C, cards, x) for x in X]
        acc = np.mean([int(np.argmax(p)) == t for p, t in zip(post, y)])
        loss = -np.mean([np.log(p[t]) for p, t in zip(post, y)])
        res = evaluate(m, d)
        assert res["accuracy"] == acc
        assert res["log_loss"] == pytest.approx(loss, abs=1e-12)

    def test_schema_mismatch(self):
        d = load_csv(b"f,y\na,0\nb,1\n")
        other = load_csv(b"f,y\nb,0\na,1\n")
        with pytest.raises(DatasetError):
            evaluate(train(d, "y"), other)


class TestModelFile:
    def test_roundtrip(self, tmp_path):
        d = generate(dependent_pair_spec(seed=6), 400)
        for mode in ("shared", "per_class"):
            m = train(d, "y", mode=mode)
            path = tmp_path / f"{mode}.json"
            save_model(m, path)
            back = load_model(path)
            rows = all_rows([2, 2, 2])
            assert np.array_equal(predict_proba(back, rows), predict_proba(m, rows))
            obj = json.loads(path.read_text())
            assert obj["format_version"] == 1
            assert obj["partitions"][0] == "(X1,X2),(X3)"

    def test_version_mismatch(self):
        d = labelled([[0, 0], [1, 1]], [2], 2)
        obj = model_to_dict(train(d, "y"))
        obj["format_version"] = 99
        with pytest.raises(ModelFormatError):
            model_from_dict(obj)

    def test_corrupt_tables(self):
        d = labelled([[0, 0], [1, 1]], [2], 2)
        obj = model_to_dict(train(d, "y"))
        obj["block_tables"][0][0] = [5, 5]
        with pytest.raises(ModelFormatError):
            model_from_dict(obj)

    def test_unwritable_names(self, tmp_path):
        d = load_csv(b"f(1),y\na,0\nb,1\n")
        with pytest.raises(ModelFormatError):
            save_model(train(d, "y"), tmp_path / "m.json")
