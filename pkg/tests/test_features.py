import json

import numpy as np
import pytest

from htscan import (
    GateKind,
    NODE_FEATURE_DIM,
    PcaModel,
    build_graph,
    fit_pca,
    fnv1a64,
    from_edges,
    node_features,
    parse_netlist,
    pca_transform,
    wl_embed,
)
from htscan.benchgen import gen_clean
from htscan.errors import DegenerateDataError, DimensionMismatchError, KTooLargeError

from conftest import fnv1a64_reference, random_graph

KIND_COUNT = len(GateKind)


class TestNodeFeatures:
    def test_isolated_input_port(self):
        g = from_edges([GateKind.INPUT_PORT], [])
        row = node_features(g)[0]
        assert row[KIND_COUNT] == 0  # fan_in
        assert row[KIND_COUNT + 1] == 0  # fan_out
        assert row[KIND_COUNT + 2] == 0  # distance to an input port: itself

    def test_one_hot_block(self):
        g = random_graph(40, 80, 3)
        feats = node_features(g)
        assert feats.shape == (40, NODE_FEATURE_DIM)
        assert np.all(feats[:, :KIND_COUNT].sum(axis=1) == 1.0)

    def test_full_adder_sum_gate(self, full_adder):
        g = build_graph(full_adder)
        row = node_features(g)[g.node_of("x2")]
        # BFS by hand on the 10-node graph: x2 reads x1 and the cin port,
        # drives the sum port
        assert row[KIND_COUNT] == 2  # fan_in
        assert row[KIND_COUNT + 1] == 1  # fan_out
        assert row[KIND_COUNT + 2] == 1  # cin is adjacent
        assert row[KIND_COUNT + 3] == 1  # sum port is adjacent
        # neighbours are x1 (fan_in 2), cin (0), sum port (1)
        assert row[KIND_COUNT + 4] == pytest.approx(1.0)
        assert row[KIND_COUNT + 5] == pytest.approx(4.0 / 3.0)

    def test_reordering_instances_keeps_rows(self, full_adder):
        src2 = """module full_adder (a, b, cin, sum, cout);
          input a, b, cin;
          output sum, cout;
          wire w1, w2, w3;
          OR o1 (cout, w2, w3);
          AND a2 (w3, w1, cin);
          AND a1 (w2, a, b);
          XOR x2 (sum, w1, cin);
          XOR x1 (w1, a, b);
        endmodule
        """
        g1 = build_graph(full_adder)
        g2 = build_graph(parse_netlist(src2))
        f1, f2 = node_features(g1), node_features(g2)
        for ref in g1.refs:
            assert np.array_equal(f1[g1.node_of(ref)], f2[g2.node_of(ref)])

    def test_unreachable_distance_sentinel(self):
        g = build_graph(gen_clean("counter", 3, seed=0))  # no input ports
        feats = node_features(g)
        assert np.all(feats[:, KIND_COUNT + 2] == -1.0)

    def test_distances_match_bfs_oracle(self):
        for template, size in [("adder", 2), ("alu", 2), ("lfsr", 4)]:
            g = build_graph(gen_clean(template, size, seed=5))
            feats = node_features(g)
            adj = [set(g.in_adj[i]) | set(g.out_adj[i]) for i in range(g.n)]

            def bfs(sources):
                dist = {s: 0 for s in sources}
                frontier = list(sources)
                while frontier:
                    nxt = []
                    for u in frontier:
                        for v in adj[u]:
                            if v not in dist:
                                dist[v] = dist[u] + 1
                                nxt.append(v)
                    frontier = nxt
                return dist

            d_in = bfs([i for i in range(g.n) if g.kinds[i] is GateKind.INPUT_PORT])
            for i in range(g.n):
                assert feats[i, KIND_COUNT + 2] == d_in.get(i, -1)


class TestWlEmbedding:
    def test_unit_norm_and_dim(self, full_adder):
        h = wl_embed(build_graph(full_adder))
        assert h.shape == (256,)
        assert np.linalg.norm(h) == pytest.approx(1.0, abs=1e-9)

    def test_empty_graph_is_zero(self):
        h = wl_embed(from_edges([], []))
        assert np.all(h == 0)

    def test_single_and_node_iter0(self):
        h = wl_embed(from_edges([GateKind.AND], []), iterations=0)
        assert np.count_nonzero(h) == 1
        assert h[fnv1a64_reference("0:AND") % 256] == 1.0

    def test_path_one_iteration_hand_labels(self):
        # a -> b -> c with kinds INPUT_PORT, NOT, OUTPUT_PORT; the 6 labels
        # are the 3 initial kind names plus 3 refined compressed labels
        g = from_edges([GateKind.INPUT_PORT, GateKind.NOT, GateKind.OUTPUT_PORT], [(0, 1), (1, 2)])
        h = wl_embed(g, iterations=1)

        def refined(cur, ins, outs):
            s = f"{cur}({','.join(sorted(ins))}|{','.join(sorted(outs))})"
            return format(fnv1a64_reference(s), "016x")

        labels0 = ["INPUT_PORT", "NOT", "OUTPUT_PORT"]
        labels1 = [
            refined("INPUT_PORT", [], ["NOT"]),
            refined("NOT", ["INPUT_PORT"], ["OUTPUT_PORT"]),
            refined("OUTPUT_PORT", ["NOT"], []),
        ]
        expected = np.zeros(256)
        for r, labels in enumerate([labels0, labels1]):
            for lab in labels:
                expected[fnv1a64_reference(f"{r}:{lab}") % 256] += 1
        expected /= np.linalg.norm(expected)
        assert np.array_equal(h, expected)

    def test_isomorphic_graphs_equal(self):
        rng = np.random.default_rng(0)
        for seed in range(25):
            g = random_graph(20, 35, seed)
            perm = rng.permutation(g.n)
            kinds2 = [None] * g.n
            for i, k in enumerate(g.kinds):
                kinds2[perm[i]] = k
            edges2 = [(int(perm[s]), int(perm[d])) for s, d in g.edges]
            g2 = from_edges(kinds2, edges2)
            assert np.array_equal(wl_embed(g), wl_embed(g2))

    def test_fnv_matches_reference(self):
        for text in ("", "AND", "0:AND", "some/longer_label(1|2)"):
            assert fnv1a64(text) == fnv1a64_reference(text)


class TestPca:
    def test_two_points_single_component(self):
        model = fit_pca(np.array([[-1.0, 0.0], [1.0, 0.0]]), k=1)
        assert np.allclose(model.components, [[1.0, 0.0]])
        total = model.explained_variance.sum()
        assert model.explained_variance[0] / total == pytest.approx(1.0)

    def test_three_points_closed_form(self):
        # covariance [[4/3, -2/3], [-2/3, 4/3]]: eigenpairs (2, (1,-1)/sqrt2)
        # and (2/3, (1,1)/sqrt2)
        X = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
        model = fit_pca(X, k=2)
        s = 1 / np.sqrt(2)
        assert np.allclose(model.explained_variance, [2.0, 2.0 / 3.0])
        assert np.allclose(np.abs(model.components), [[s, s], [s, s]])
        assert np.allclose(model.components[0], [s, -s])
        assert np.allclose(model.components[1], [s, s])

    def test_case_dimensions_256_to_50(self):
        data = np.random.default_rng(0).normal(size=(60, 256))
        model = fit_pca(data, k=50)
        assert model.components.shape == (50, 256)
        gram = model.components @ model.components.T
        assert np.abs(gram - np.eye(50)).max() < 1e-8
        assert np.all(np.diff(model.explained_variance) <= 1e-12)

    def test_transform_mean_is_zero(self):
        X = np.random.default_rng(1).normal(size=(10, 4))
        model = fit_pca(X, k=2)
        assert np.allclose(pca_transform(model, model.mean), 0.0)

    def test_transform_two_points(self):
        X = np.array([[-1.0, 0.0], [1.0, 0.0]])
        model = fit_pca(X, k=1)
        assert np.allclose(pca_transform(model, X).ravel(), [-1.0, 1.0])

    def test_full_rank_reconstruction(self):
        X = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
        model = fit_pca(X, k=2)
        Z = pca_transform(model, X)
        back = model.mean + Z @ model.components
        assert np.abs(back - X).max() < 1e-9

    def test_reconstruction_error_non_increasing_in_k(self):
        X = np.random.default_rng(2).normal(size=(30, 8)) * np.arange(1, 9)
        errs = []
        for k in range(1, 8):
            model = fit_pca(X, k=k)
            Z = pca_transform(model, X)
            errs.append(np.linalg.norm(X - (model.mean + Z @ model.components)))
        assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))

    def test_total_variance_preserved_at_full_rank(self):
        X = np.random.default_rng(3).normal(size=(40, 6))
        model = fit_pca(X, k=6)
        total = X.var(axis=0, ddof=1).sum()
        assert model.explained_variance.sum() == pytest.approx(total, rel=1e-6)

    def test_serialization_roundtrip(self):
        X = np.random.default_rng(4).normal(size=(60, 256))
        model = fit_pca(X, k=50)
        clone = PcaModel.from_json(json.loads(json.dumps(model.to_json())))
        assert np.array_equal(clone.components, model.components)
        assert np.array_equal(pca_transform(clone, X), pca_transform(model, X))

    def test_errors(self):
        with pytest.raises(DegenerateDataError):
            fit_pca(np.ones((1, 3)), k=1)
        with pytest.raises(KTooLargeError):
            fit_pca(np.random.default_rng(0).normal(size=(3, 4)), k=3)
        model = fit_pca(np.random.default_rng(0).normal(size=(5, 4)), k=2)
        with pytest.raises(DimensionMismatchError):
            pca_transform(model, np.ones((2, 5)))
