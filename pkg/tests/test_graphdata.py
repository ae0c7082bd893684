import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gml import graphdata as gd
from gml import ndtape as nd
from gml.errors import DatasetError, ParameterError, ParseError

IRIS = Path(gd.__file__).parent / "data" / "iris.csv"


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


@pytest.fixture
def tiny_citation(tmp_path):
    content = write(tmp_path / "t.content", "a 1 0 1 x\nb 0 1 0 y\nc 1 1 0 x\n")
    cites = write(tmp_path / "t.cites", "a b\nc b\n")
    return content, cites


@pytest.fixture
def tiny_tu(tmp_path):
    # graph 1: triangle (nodes 1-3), graph 2: single edge (nodes 4-5)
    write(tmp_path / "DS_A.txt", "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n")
    write(tmp_path / "DS_graph_indicator.txt", "1\n1\n1\n2\n2\n")
    write(tmp_path / "DS_graph_labels.txt", "1\n-1\n")
    write(tmp_path / "DS_node_labels.txt", "0\n1\n2\n0\n1\n")
    write(tmp_path / "DS_node_attributes.txt", "0.5\n1.5\n2.5\n3.5\n4.5\n")
    return tmp_path


# --------------------------------------------------------------------------- loaders


def test_load_citation_fixture(tiny_citation):
    g = gd.load_citation(*tiny_citation)
    assert g.num_nodes == 3 and g.num_features == 3 and g.num_classes == 2
    assert g.adjacency.nnz == 4
    assert g.adjacency.is_symmetric()
    assert g.labels.tolist() == [0, 1, 0]


def test_load_citation_drops_dangling(tmp_path, tiny_citation, caplog):
    content, _ = tiny_citation
    cites = write(tmp_path / "d.cites", "a b\nzz b\na a\n")
    g = gd.load_citation(content, cites)
    assert g.report["dangling_edges"] == 1
    assert g.adjacency.nnz == 2  # self-citation dropped, one edge kept
    assert "unknown ids" in caplog.text


def test_load_citation_parse_error_has_line(tmp_path):
    content = write(tmp_path / "bad.content", "a 1 0 x\nb 1 q y\n")
    cites = write(tmp_path / "bad.cites", "")
    with pytest.raises(ParseError) as exc:
        gd.load_citation(content, cites)
    assert exc.value.line == 2


def test_load_citation_empty(tmp_path):
    with pytest.raises(DatasetError):
        gd.load_citation(write(tmp_path / "e.content", ""), write(tmp_path / "e.cites", ""))


def test_load_csv_graph(tmp_path):
    write(tmp_path / "edges.csv", "src,dst\n0,1\n1,2\n2,1\n")
    write(tmp_path / "features.csv", "1,0\n0,1\n1,1\n")
    write(tmp_path / "labels.csv", "label\n0\n1\n1\n")
    g = gd.load_csv_graph(tmp_path)
    assert g.num_nodes == 3 and g.num_edges == 2 and g.num_classes == 2


def test_load_tu_fixture(tiny_tu):
    coll = gd.load_tu(tiny_tu)
    assert len(coll) == 2
    assert coll.node_counts() == [3, 2]
    assert coll.labels.tolist() == [1, 0]
    assert coll.num_features == 3  # one-hot of three node labels
    for g in coll.graphs:
        assert g.adjacency.is_symmetric()
    assert coll.graphs[0].num_edges == 3 and coll.graphs[1].num_edges == 1
    with_attr = gd.load_tu(tiny_tu, use_node_attributes=True)
    assert with_attr.num_features == 4


def test_load_tu_cross_graph_edge(tiny_tu):
    write(tiny_tu / "DS_A.txt", "1, 4\n4, 1\n")
    with pytest.raises(DatasetError):
        gd.load_tu(tiny_tu)


def test_load_tu_missing_file(tiny_tu):
    (tiny_tu / "DS_graph_labels.txt").unlink()
    with pytest.raises(FileNotFoundError):
        gd.load_tu(tiny_tu)


def test_collection_batch(tiny_tu):
    b = gd.load_tu(tiny_tu).batch()
    assert b.num_nodes == 5 and b.num_edges == 4
    assert b.graph_index.tolist() == [0, 0, 0, 1, 1]
    assert b.is_graph_task and b.num_graphs == 2


def test_load_tabular_iris():
    x, y = gd.load_tabular(IRIS, "species")
    assert x.shape == (150, 4) and len(set(y.tolist())) == 3
    assert np.all(np.abs(x.mean(axis=0)) < 1e-10)
    assert np.allclose(x.std(axis=0), 1.0)


def test_load_tabular_constant_column(tmp_path):
    p = write(tmp_path / "c.csv", "a,b,lab\n1,5,x\n2,5,y\n3,5,x\n")
    x, y = gd.load_tabular(p, "lab")
    assert np.array_equal(x[:, 1], np.zeros(3))
    assert y.tolist() == [0, 1, 0]


def test_load_tabular_non_numeric(tmp_path):
    p = write(tmp_path / "c.csv", "a,lab\n1,x\nfoo,y\n")
    with pytest.raises(ParseError) as exc:
        gd.load_tabular(p, "lab")
    assert exc.value.line == 3


# --------------------------------------------------------------------------- operators


def two_node():
    return gd.adjacency_from_edges(2, [0], [1])


def test_normalize_two_nodes():
    assert np.allclose(gd.normalize_adjacency(two_node()).to_dense(), 0.5, atol=1e-15)


def test_normalize_isolated_node():
    a = gd.normalize_adjacency(gd.adjacency_from_edges(3, [0], [1]))
    assert a.to_dense()[2].tolist() == [0.0, 0.0, 1.0]


def test_normalize_star_row_sums():
    # center 0 linked to 1..4; degrees of A+I: center 5, leaves 2
    a = gd.normalize_adjacency(gd.adjacency_from_edges(5, [0, 0, 0, 0], [1, 2, 3, 4])).to_dense()
    dense = np.eye(5)
    dense[0, 1:] = dense[1:, 0] = 1
    d = dense.sum(axis=1)
    oracle = dense / np.sqrt(np.outer(d, d))
    assert np.allclose(a, oracle, atol=1e-15)
    assert abs(a[0].sum() - (1 / 5 + 4 / np.sqrt(10))) < 1e-12
    assert abs(a[1].sum() - (1 / 2 + 1 / np.sqrt(10))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.floats(0, 1), st.integers(0, 2**32))
def test_normalized_spectrum_bounded(n, p, seed):
    a = gd.normalize_adjacency(gd.gen_random(n, p, seed).adjacency)
    assert a.is_symmetric(1e-15)
    ev = np.linalg.eigvalsh(a.to_dense())
    assert ev.min() >= -1 - 1e-10 and ev.max() <= 1 + 1e-10


def test_mean_aggregation_cases():
    adj = gd.adjacency_from_edges(4, [0, 0], [1, 2])
    m = gd.mean_aggregation_operator(adj).to_dense()
    assert m[0, [1, 2]].tolist() == [0.5, 0.5]
    assert m[3].tolist() == [0, 0, 0, 0]
    sums = m.sum(axis=1)
    assert sums.tolist() == [1.0, 1.0, 1.0, 0.0]


def test_mean_aggregation_matches_neighbor_loop(rng):
    g = gd.gen_random(6, 0.5, 3)
    x = rng.normal(size=(6, 3))
    out = nd.spmm(gd.mean_aggregation_operator(g), nd.constant(x)).values
    dense = g.adjacency.to_dense()
    for i in range(6):
        nbrs = np.flatnonzero(dense[i])
        expected = x[nbrs].mean(axis=0) if nbrs.size else np.zeros(3)
        assert np.allclose(out[i], expected, atol=1e-14)


def test_readout_operator():
    r = gd.readout_operator(np.array([0, 0, 1])).to_dense()
    assert r.tolist() == [[0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]
    with pytest.raises(DatasetError):
        gd.readout_operator(np.array([0, 2]))


# --------------------------------------------------------------------------- splits


def test_split_sizes_cora():
    s = gd.split_nodes(2708, seed=0)
    assert s.sizes() == (1895, 406, 407)


def test_split_sizes_graphs():
    assert gd.split_graphs(10, seed=1).sizes() == (7, 1, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 500), st.integers(0, 2**40))
def test_split_is_seeded_partition(n, seed):
    a = gd.split_nodes(n, seed=seed)
    assert a == gd.split_nodes(n, seed=seed)
    allidx = np.concatenate([a.train, a.val, a.test])
    assert np.array_equal(np.sort(allidx), np.arange(n))


def test_split_errors():
    with pytest.raises(ParameterError):
        gd.split_nodes(2)
    with pytest.raises(ParameterError):
        gd.split_nodes(10, (0.5, 0.2, 0.2))


def test_split_json_roundtrip():
    s = gd.split_nodes(20, seed=7)
    back = gd.Split.from_json(s.to_json())
    assert back == s
    assert set(json.loads(s.to_json())) == {"train", "val", "test", "seed"}


# --------------------------------------------------------------------------- generators & noise


@pytest.mark.parametrize("n,m", [(10, 1), (30, 2), (50, 3), (12, 11)])
def test_ba_edge_count(n, m):
    g = gd.gen_barabasi_albert(n, m, seed=5)
    assert g.num_edges == m * (m - 1) // 2 + (n - m) * m
    assert g.adjacency.is_symmetric()
    assert np.all(g.adjacency.to_dense().diagonal() == 0)


def test_ba_deterministic():
    a = gd.gen_barabasi_albert(40, 2, seed=9).adjacency
    b = gd.gen_barabasi_albert(40, 2, seed=9).adjacency
    assert np.array_equal(a.col_idx, b.col_idx)


def test_random_graph_extremes():
    assert gd.gen_random(7, 0.0, 1).num_edges == 0
    assert gd.gen_random(7, 1.0, 1).num_edges == 21


def test_generator_parameter_errors():
    with pytest.raises(ParameterError):
        gd.gen_barabasi_albert(5, 5)
    with pytest.raises(ParameterError):
        gd.gen_random(5, 1.5)
    with pytest.raises(ParameterError):
        gd.add_laplace_noise(np.zeros(3), -1)


def test_laplace_scale_zero_identity(rng):
    x = rng.normal(size=(4, 3))
    assert np.array_equal(gd.add_laplace_noise(x, 0.0, 1), x)


def test_laplace_moments():
    scale = 0.7
    noise = gd.add_laplace_noise(np.zeros(10**6), scale, seed=3)
    assert abs(noise.mean()) < 3 * scale * np.sqrt(2) / 1e3
    assert abs(noise.var() / (2 * scale**2) - 1) < 0.05


def test_planted_partition_shape():
    g = gd.gen_planted_partition(60, 3, 30, 0.2, 0.01, seed=0)
    assert g.num_nodes == 60 and g.num_classes == 3 and g.adjacency.is_symmetric()
