import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.datasets import make_blobs

from dsvm import (
    AccuracyMatrix,
    BestChoice,
    BestTable,
    EvalPolicy,
    OneVsOneSVC,
    SiteData,
    accuracy_percent,
    build_accuracy_matrix,
    elect_global_model,
    run_dsvm,
    select_best_per_site,
    train_local_models,
)
from oracles import ovo_vote_oracle

MFEAT_CELLS = [[-1, 96, 96.8], [98.2, -1, 98], [97, 96.3, -1]]
PENDIGITS_CELLS = [
    [-1, 99.45, 99.70, 99.30],
    [99.50, -1, 99.60, 99.40],
    [99.60, 99.25, -1, 99.20],
    [99.50, 99.35, 99.5, -1],
]
SDSS_CELLS = [
    [-1, 68.38, 68.39, 68.52],
    [37.45, -1, 89.16, 89.02],
    [37.45, 89.53, -1, 89.37],
    [37.47, 89.63, 89.66, -1],
]


class TestSiteData:
    def test_rejects_empty_shard(self):
        with pytest.raises(ValueError, match="nonempty"):
            SiteData(1, np.empty((0, 2)), np.empty(0, dtype=int))

    def test_rejects_row_label_mismatch(self):
        with pytest.raises(ValueError, match="2 rows but 3 labels"):
            SiteData(1, np.zeros((2, 2)), np.zeros(3, dtype=int))

    def test_rejects_bad_site_id(self):
        with pytest.raises(ValueError, match="site_id"):
            SiteData(0, np.zeros((2, 2)), np.zeros(2, dtype=int))


class TestEvalPolicy:
    def test_holdout_fraction_bounds(self):
        with pytest.raises(ValueError, match="fraction"):
            EvalPolicy.holdout(1.5)
        with pytest.raises(ValueError, match="unknown eval policy"):
            EvalPolicy(kind="bootstrap")

    def test_full_local_uses_whole_shard(self, blob_sites):
        from dsvm.protocol import Site

        site = Site(blob_sites[0], EvalPolicy.full_local())
        assert site.train_X.shape == blob_sites[0].X.shape
        assert site.eval_X.shape == blob_sites[0].X.shape

    def test_holdout_reserves_disjoint_split(self, blob_sites):
        from dsvm.protocol import Site

        site = Site(blob_sites[0], EvalPolicy.holdout(0.25, seed=5))
        assert site.eval_X.shape[0] == 30 and site.train_X.shape[0] == 90
        merged = np.vstack([site.train_X, site.eval_X])
        key = lambda m: m[np.lexsort(m.T)]
        np.testing.assert_array_equal(key(merged), key(blob_sites[0].X))
        again = Site(blob_sites[0], EvalPolicy.holdout(0.25, seed=5))
        np.testing.assert_array_equal(site.eval_X, again.eval_X)


class TestTrainLocalModels:
    def test_one_model_per_site_with_timings(self, blob_sites):
        local = train_local_models(blob_sites, OneVsOneSVC(C=1.0))
        assert [m.site_id for m in local] == [1, 2, 3]
        assert all(m.train_seconds > 0 for m in local)
        assert all(len(m.model.pair_models_) == 6 for m in local)

    def test_table1_shard_layout_trains_three_models(self):
        rng = np.random.default_rng(0)
        centers = rng.normal(0.0, 3.0, (10, 12))
        y = rng.integers(0, 10, 1800)
        X = centers[y] + rng.normal(0.0, 0.5, (1800, 12))
        sizes = (500, 800, 500)
        shards, start = [], 0
        for sid, size in enumerate(sizes, start=1):
            shards.append(SiteData(sid, X[start:start + size], y[start:start + size]))
            start += size
        local = train_local_models(shards, OneVsOneSVC(C=1.0))
        assert len(local) == 3
        assert all(len(m.model.pair_models_) == 45 for m in local)

    def test_identical_shards_identical_predictions(self, blob_sites):
        twin = [
            SiteData(1, blob_sites[0].X, blob_sites[0].y),
            SiteData(2, blob_sites[0].X.copy(), blob_sites[0].y.copy()),
        ]
        local = train_local_models(twin, OneVsOneSVC(C=1.0))
        probes = np.random.default_rng(1).normal(size=(50, 3))
        np.testing.assert_array_equal(
            local[0].model.predict(probes), local[1].model.predict(probes)
        )

    def test_self_accuracy_matches_direct_reevaluation(self, blob_sites):
        local = train_local_models(blob_sites, OneVsOneSVC(C=1.0))
        for shard, entry in zip(blob_sites, local):
            direct = accuracy_percent(entry.model, shard.X, shard.y)
            again = accuracy_percent(entry.model, shard.X, shard.y)
            assert direct == again

    def test_single_site_rejected(self, blob_sites):
        with pytest.raises(ValueError, match="at least 2 sites"):
            train_local_models(blob_sites[:1], OneVsOneSVC())

    def test_failing_site_named(self, blob_sites):
        lopsided = [
            blob_sites[0],
            SiteData(2, blob_sites[1].X[:5], np.zeros(5, dtype=int)),  # one class only
        ]
        with pytest.raises(ValueError, match="site 2"):
            train_local_models(lopsided, OneVsOneSVC())


class _FixedModel:
    """Stub predictor returning labels keyed by the probe's first feature."""

    def __init__(self, mapping, default=0):
        self.mapping = mapping
        self.default = default

    def predict(self, X):
        return np.array([self.mapping.get(float(x[0]), self.default) for x in np.atleast_2d(X)])


class TestAccuracyMatrix:
    def test_two_site_definition(self):
        eval_1 = (np.array([[1.0], [2.0]]), np.array([0, 0]))
        eval_2 = (np.array([[3.0], [4.0]]), np.array([1, 1]))
        model_1 = _FixedModel({3.0: 1, 4.0: 1}, default=9)     # perfect on site 2
        model_2 = _FixedModel({1.0: 0, 2.0: 5}, default=9)     # 50% on site 1
        matrix = build_accuracy_matrix([model_1, model_2], [eval_1, eval_2])
        np.testing.assert_array_equal(matrix.cells, [[-1.0, 100.0], [50.0, -1.0]])

    def test_cells_match_per_cell_recomputation(self, blob_sites):
        local = train_local_models(blob_sites, OneVsOneSVC(C=1.0))
        eval_sets = [(s.X, s.y) for s in blob_sites]
        matrix = build_accuracy_matrix([m.model for m in local], eval_sets)
        for i, entry in enumerate(local):
            for j, (X, y) in enumerate(eval_sets):
                if i == j:
                    assert matrix.cells[i, j] == -1.0
                else:
                    predictions = ovo_vote_oracle(entry.model, X)
                    expected = 100.0 * float(np.mean(predictions == y))
                    assert matrix.cells[i, j] == pytest.approx(expected, abs=1e-12)

    def test_identical_models_give_equal_columns(self, blob_sites):
        model = train_local_models(blob_sites, OneVsOneSVC(C=1.0))[0].model
        eval_sets = [(s.X, s.y) for s in blob_sites]
        matrix = build_accuracy_matrix([model, model, model], eval_sets)
        for j in range(3):
            off = [matrix.cells[i, j] for i in range(3) if i != j]
            assert off[0] == off[1]

    def test_length_mismatch_rejected(self, blob_sites):
        with pytest.raises(ValueError, match="2 models but 3"):
            build_accuracy_matrix([None, None], [(s.X, s.y) for s in blob_sites])

    def test_validation_rules(self):
        with pytest.raises(ValueError, match="square"):
            AccuracyMatrix(np.zeros((2, 3)))
        with pytest.raises(ValueError, match="sentinel"):
            AccuracyMatrix(np.array([[0.0, 50.0], [50.0, -1.0]]))
        with pytest.raises(ValueError, match=r"\[0, 100\]"):
            AccuracyMatrix(np.array([[-1.0, 101.0], [50.0, -1.0]]))

    def test_json_round_trip(self):
        matrix = AccuracyMatrix(np.array(MFEAT_CELLS, dtype=float))
        again = AccuracyMatrix.from_json(matrix.to_json())
        np.testing.assert_array_equal(again.cells, matrix.cells)

    def test_json_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="does not match n"):
            AccuracyMatrix.from_json(json.dumps({"n": 3, "cells": [[-1.0, 1.0], [1.0, -1.0]]}))


class TestSelection:
    def test_mfeat_best_table(self):
        best = select_best_per_site(AccuracyMatrix(np.array(MFEAT_CELLS, dtype=float)))
        assert [(r.model, r.site) for r in best.rows] == [(2, 1), (3, 2), (2, 3)]

    def test_sdss_best_table(self):
        best = select_best_per_site(AccuracyMatrix(np.array(SDSS_CELLS, dtype=float)))
        assert [r.model for r in best.rows] == [4, 4, 4, 3]

    def test_column_tie_goes_to_smallest_model(self):
        cells = np.array([[-1.0, 80.0, 70.0], [75.0, -1.0, 70.0], [75.0, 80.0, -1.0]])
        best = select_best_per_site(AccuracyMatrix(cells))
        assert [(r.model, r.site) for r in best.rows] == [(2, 1), (1, 2), (1, 3)]

    def test_every_row_attains_the_column_maximum(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            n = int(rng.integers(2, 7))
            cells = rng.uniform(0.0, 100.0, (n, n))
            np.fill_diagonal(cells, -1.0)
            matrix = AccuracyMatrix(cells)
            best = select_best_per_site(matrix)
            for row in best.rows:
                j = row.site - 1
                column_max = max(cells[i, j] for i in range(n) if i != j)
                assert cells[row.model - 1, j] == column_max
                assert row.model - 1 != j


class TestElection:
    def test_mfeat_elects_model_2(self):
        best = BestTable(rows=(BestChoice(2, 1), BestChoice(3, 2), BestChoice(2, 3)))
        result = elect_global_model(best)
        assert result.global_model_index == 2
        assert result.counts == {1: 0, 2: 2, 3: 1}

    def test_pendigits_elects_model_1(self):
        matrix = AccuracyMatrix(np.array(PENDIGITS_CELLS, dtype=float))
        best = select_best_per_site(matrix)
        assert [r.model for r in best.rows] == [3, 1, 1, 2]
        assert elect_global_model(best, matrix).global_model_index == 1

    def test_frequency_tie_goes_to_smallest_model(self):
        best = BestTable(rows=(BestChoice(1, 1), BestChoice(2, 2)))
        assert elect_global_model(best).global_model_index == 1

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            elect_global_model(BestTable(rows=()))

    @settings(max_examples=50, deadline=None)
    @given(
        data=st.data(),
        n=st.integers(min_value=2, max_value=6),
        transform=st.sampled_from(
            [lambda v: 0.37 * v + 4.2, lambda v: v**3 / 1e4, lambda v: np.expm1(v / 25.0)]
        ),
    )
    def test_property_election_invariant_under_monotone_rescaling(self, data, n, transform):
        """Selection and election only consume the ordering of the cells."""
        cells = np.asarray(
            data.draw(
                st.lists(
                    st.lists(
                        st.floats(min_value=0, max_value=100, allow_nan=False, width=32),
                        min_size=n, max_size=n,
                    ),
                    min_size=n, max_size=n,
                )
            ),
            dtype=np.float64,
        )
        np.fill_diagonal(cells, -1.0)
        base = elect_global_model(select_best_per_site(AccuracyMatrix(cells)))
        rescaled_cells = transform(cells)
        # map back into [0, 100] with a second monotone (affine) step
        lo = rescaled_cells.min()
        span = rescaled_cells.max() - lo
        rescaled_cells = (rescaled_cells - lo) / (span if span > 0 else 1.0) * 100.0
        np.fill_diagonal(rescaled_cells, -1.0)
        rescaled = elect_global_model(select_best_per_site(AccuracyMatrix(rescaled_cells)))
        assert rescaled.global_model_index == base.global_model_index
        assert [r.model for r in rescaled.best.rows] == [r.model for r in base.best.rows]


class TestRunDsvm:
    def test_composition_and_broadcast(self):
        X, y = make_blobs(n_samples=480, centers=4, n_features=3, cluster_std=1.3, random_state=21)
        y = y.astype(np.int64)
        shards = [SiteData(k + 1, X[k * 100:(k + 1) * 100], y[k * 100:(k + 1) * 100]) for k in range(4)]
        held_X, held_y = X[400:], y[400:]
        run = run_dsvm(shards, OneVsOneSVC(C=1.0))

        assert 1 <= run.election.global_model_index <= 4
        elected_site = run.sites[run.election.global_model_index - 1]
        probes = np.random.default_rng(0).normal(size=(200, 3))
        # the protocol selects one local model, it never averages
        np.testing.assert_array_equal(
            run.global_model.predict(probes), elected_site.model.predict(probes)
        )

        # round-trip broadcast copy scores identically to a fresh evaluation
        assert accuracy_percent(run.global_model, held_X, held_y) == accuracy_percent(
            elected_site.model, held_X, held_y
        )
        for site in run.sites:
            assert site.global_model is not None
            np.testing.assert_array_equal(
                site.global_model.predict(probes), run.global_model.predict(probes)
            )
        assert run.broadcast_bytes == run.payload_bytes * 3
        assert run.train_seconds == max(run.per_site_train_seconds)

    def test_two_identical_shards_elect_equivalent_model(self, blob_sites):
        twin = [
            SiteData(1, blob_sites[0].X, blob_sites[0].y),
            SiteData(2, blob_sites[0].X.copy(), blob_sites[0].y.copy()),
        ]
        run = run_dsvm(twin, OneVsOneSVC(C=1.0))
        probes = np.random.default_rng(3).normal(size=(80, 3))
        for site in run.sites:
            np.testing.assert_array_equal(
                run.global_model.predict(probes), site.model.predict(probes)
            )

    def test_deterministic_across_parallelism(self, blob_sites):
        runs = [run_dsvm(blob_sites, OneVsOneSVC(C=1.0), n_jobs=jobs) for jobs in (1, 2)]
        np.testing.assert_array_equal(
            runs[0].election.matrix.cells, runs[1].election.matrix.cells
        )
        assert runs[0].election.global_model_index == runs[1].election.global_model_index
        assert runs[0].election.counts == runs[1].election.counts
        probes = np.random.default_rng(4).normal(size=(60, 3))
        np.testing.assert_array_equal(
            runs[0].global_model.predict(probes), runs[1].global_model.predict(probes)
        )

    def test_holdout_policy_changes_eval_sets_not_determinism(self, blob_sites):
        policy = EvalPolicy.holdout(0.3, seed=17)
        first = run_dsvm(blob_sites, OneVsOneSVC(C=1.0), eval_policy=policy)
        second = run_dsvm(blob_sites, OneVsOneSVC(C=1.0), eval_policy=policy)
        np.testing.assert_array_equal(
            first.election.matrix.cells, second.election.matrix.cells
        )
        assert first.election.global_model_index == second.election.global_model_index
