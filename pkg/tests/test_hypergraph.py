import numpy as np
import pytest

from rankflow import (
    ConfigurationError, SparseScores, build_ranked_lists,
    position_weight, build_incidence, filter_incidence, hyperedge_weights,
    build_hypergraph, affinity, hypergraph_rerank,
)
from conftest import random_lists
import oracles


class TestPositionWeight:
    def test_rank_one_is_max(self):
        assert position_weight(1, 20) == pytest.approx(1.0)

    def test_rank_k_is_zero(self):
        assert position_weight(20, 20) == pytest.approx(0.0)

    def test_log_base_four(self):
        assert position_weight(2, 4) == pytest.approx(0.5)

    def test_decreasing(self):
        w = position_weight(np.arange(1, 21), 20)
        assert np.all(np.diff(w) < 0)

    def test_degenerate_base_rejected(self):
        with pytest.raises(ConfigurationError):
            position_weight(1, 1)


class TestBuildIncidence:
    def _chain(self):
        # N(0,2)={0,1}, N(1,2)={1,2}, N(2,2)={2,1}
        rows = [
            [(0, 0.0), (1, 1.0), (2, 2.0)],
            [(1, 0.0), (2, 1.0), (0, 2.0)],
            [(2, 0.0), (1, 1.0), (0, 2.0)],
        ]
        return build_ranked_lists(rows, depth=3)

    def test_membership_union(self):
        lists = self._chain()
        inc = build_incidence(lists, k=2)
        members, _ = inc.row(0)
        # hyperedge of 0 reaches 2 through 1, but w(rank 2 of 2) = 0,
        # so only positively scored members remain
        assert 0 in members.tolist()

    def test_matches_dense_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(4, 25))
            lists = random_lists(rng, n)
            k = int(rng.integers(2, min(n, 8) + 1))
            got = build_incidence(lists, k).to_dense()
            ref = oracles.dense_incidence(lists.ids, k, n)
            # zero-score members are dropped from the sparse rows
            assert np.max(np.abs(got - ref)) < 1e-9

    def test_self_score_two_paths(self):
        # with N(i,2) = {i, b} and i in N(b,2): r(i,i) = 1 + w(i,b)*w(b,i)
        rows = [
            [(0, 0.0), (1, 1.0)],
            [(1, 0.0), (0, 1.0)],
        ]
        lists = build_ranked_lists(rows, depth=2)
        inc = build_incidence(lists, k=2)
        w2 = float(position_weight(2, 2))  # == 0 for k=2
        assert inc.get(0, 0) == pytest.approx(1.0 + w2 * w2)


class TestFilterAndWeights:
    def test_identity_incidence(self):
        eye = SparseScores.from_dense(np.eye(5))
        assert np.array_equal(filter_incidence(eye).to_dense(), np.eye(5))

    def test_frozen_two_by_two(self):
        m = SparseScores.from_dense(np.array([[1.0, 1.0], [0.0, 1.0]]))
        assert filter_incidence(m).to_dense().tolist() == [[1.0, 2.0], [0.0, 1.0]]

    def test_diagonal_path_lower_bound(self, rng):
        n = 12
        dense = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
        np.fill_diagonal(dense, rng.random(n) + 0.5)
        h = filter_incidence(SparseScores.from_dense(dense)).to_dense()
        for i in range(n):
            for j in range(n):
                if dense[i, j] > 0:
                    assert h[i, j] >= dense[i, i] * dense[i, j] - 1e-12

    def test_weights_top_k_sum(self):
        h = SparseScores.from_rows(3, [
            ([0, 1, 2], [3.0, 2.0, 1.0]),
            ([], []),
            ([0, 2], [4.0, 1.0]),
        ])
        w = hyperedge_weights(h, k=2)
        assert w.tolist() == [5.0, 0.0, 5.0]

    def test_weights_whole_row_when_short(self):
        h = SparseScores.from_rows(1, [([0, 1], [1.5, 2.5])])
        assert hyperedge_weights(h, k=5).tolist() == [4.0]

    def test_weights_match_dense_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 25))
            dense = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
            k = int(rng.integers(1, 8))
            got = hyperedge_weights(SparseScores.from_dense(dense), k)
            ref = oracles.dense_hyperedge_weights(dense, k)
            assert np.max(np.abs(got - ref)) < 1e-9


class TestBuildHypergraph:
    def test_single_object(self):
        # the self path i -> i -> i has weight 1, so H_m = H = [[1]], w = [1]
        lists = build_ranked_lists([[(0, 0.0)]], depth=1, n=1)
        state = build_hypergraph(lists, k=2)
        assert state.incidence.to_dense().tolist() == [[1.0]]
        assert state.embeddings.to_dense().tolist() == [[1.0]]
        assert state.edge_weights.tolist() == [1.0]

    def test_duplicate_objects_symmetric_rows(self):
        # two identical pairs: 0/1 duplicates, 2/3 duplicates
        rows = [
            [(0, 0.0), (1, 0.5), (2, 9.0), (3, 9.5)],
            [(1, 0.0), (0, 0.5), (2, 9.0), (3, 9.5)],
            [(2, 0.0), (3, 0.5), (0, 9.0), (1, 9.5)],
            [(3, 0.0), (2, 0.5), (0, 9.0), (1, 9.5)],
        ]
        lists = build_ranked_lists(rows, depth=4)
        state = build_hypergraph(lists, k=2)
        h = state.embeddings.to_dense()
        swap = [1, 0, 3, 2]
        assert np.allclose(h[0][swap], h[1]) and np.allclose(h[2][swap], h[3])

    def test_pipeline_matches_dense_oracle(self, rng):
        for _ in range(8):
            n = int(rng.integers(5, 31))
            lists = random_lists(rng, n)
            k = int(rng.integers(2, min(n, 9) + 1))
            state = build_hypergraph(lists, k)
            inc_ref = oracles.dense_incidence(lists.ids, k, n)
            h_ref = oracles.dense_square(inc_ref)
            assert np.max(np.abs(state.incidence.to_dense() - inc_ref)) < 1e-9
            assert np.max(np.abs(state.embeddings.to_dense() - h_ref)) < 1e-9
            w_ref = oracles.dense_hyperedge_weights(h_ref, k)
            assert np.max(np.abs(state.edge_weights - w_ref)) < 1e-9

    def test_membership_bound(self, rng):
        n, k = 20, 4
        lists = random_lists(rng, n)
        state = build_hypergraph(lists, k)
        for i in range(n):
            members, scores = state.incidence.row(i)
            union = set(lists.ids[i][:k].tolist())
            for x in lists.ids[i][:k]:
                union.update(lists.ids[x][:k].tolist())
            assert set(members.tolist()) <= union
            assert len(members) <= k + k * k
            assert np.all(scores > 0)


class TestAffinity:
    def test_identity(self):
        eye = SparseScores.from_dense(np.eye(3))
        assert np.array_equal(affinity(eye).to_dense(), np.eye(3))

    def test_equal_rows_equal_affinity(self):
        h = SparseScores.from_dense(np.array([
            [1.0, 2.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 3.0]]))
        a = affinity(h).to_dense()
        assert a[0, 1] == a[0, 0] == a[1, 1]

    def test_matches_dense_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 31))
            dense = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
            got = affinity(SparseScores.from_dense(dense)).to_dense()
            assert np.max(np.abs(got - oracles.dense_affinity(dense))) < 1e-9

    def test_exact_symmetry(self, rng):
        n = 25
        dense = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
        a = affinity(SparseScores.from_dense(dense)).to_dense()
        assert np.array_equal(a, a.T)


class TestHypergraphRerank:
    def test_one_iteration_matches_manual(self, rng):
        from rankflow.hypergraph import affinity_scores
        from rankflow import stable_resort
        lists = random_lists(rng, 15, depth=10)
        k = 4
        out, state = hypergraph_rerank(lists, k, iterations=1)
        manual_state = build_hypergraph(lists, k)
        scores = affinity_scores(lists, manual_state.embeddings, None)
        manual = stable_resort(lists, scores)
        assert out.tobytes() == manual.tobytes()

    def test_rho_includes_rank_residual(self, rng):
        # rho(i, j) = a_ij / position; spot-check one stored pair
        from rankflow.hypergraph import affinity_scores
        lists = random_lists(rng, 12, depth=8)
        state = build_hypergraph(lists, k=3)
        scores = affinity_scores(lists, state.embeddings, None)
        a = affinity(state.embeddings)
        i = 5
        j = int(lists.ids[i][2])  # position 3
        assert scores.get(i, j) == pytest.approx(a.get(i, j) / 3.0, rel=1e-12)

    def test_planted_swap_recovers(self):
        # two tight blobs; one relevant item planted low in a list moves up
        rng = np.random.default_rng(3)
        a = rng.normal(0, 0.1, (5, 2))
        b = rng.normal(5, 0.1, (5, 2)) + np.array([5.0, 0.0])
        feats = np.concatenate([a, b])
        from conftest import euclidean_lists
        lists = euclidean_lists(feats)
        # plant: push 0's same-blob neighbor (rank 2) to the bottom
        ids = [row.copy() for row in lists.ids]
        row = ids[0]
        moved = row[1]
        ids[0] = np.concatenate([row[:1], row[2:], row[1:2]])
        planted = type(lists)(n=lists.n, depth=lists.depth, ids=ids,
                              scores=lists.scores)
        out, _ = hypergraph_rerank(planted, k=4, iterations=1)
        before = int(np.flatnonzero(planted.ids[0] == moved)[0])
        after = int(np.flatnonzero(out.ids[0] == moved)[0])
        assert after < before

    def test_t_must_be_positive(self, rng):
        with pytest.raises(ConfigurationError):
            hypergraph_rerank(random_lists(rng, 6), 2, iterations=0)
