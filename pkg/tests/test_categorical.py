import warnings

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from somlab import categorical as c
from somlab.topology import Lattice


def block_table():
    T = np.ones((6, 6), dtype=int)
    T[:3, :3] = 20
    T[3:, 3:] = 20
    return T


def test_chi2_distance_examples():
    npt.assert_allclose(c.chi2_distance([0.5, 0.5], [0.25, 0.75], [0.5, 0.5]), 0.5)
    assert c.chi2_distance([0.2, 0.8], [0.2, 0.8], [0.3, 0.7]) == 0.0
    u, v = np.array([0.1, 0.2, 0.7]), np.array([0.3, 0.3, 0.4])
    npt.assert_allclose(c.chi2_distance(u, v, np.full(3, 1 / 3)) ** 2, 3 * np.sum((u - v) ** 2))
    with pytest.raises(ValueError):
        c.chi2_distance(u, v, [0.5, 0.5, 0.0])


profiles = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda p: sum(p) > 0).map(
    lambda p: np.array(p) / sum(p))


@given(profiles, profiles, profiles, st.lists(st.floats(0.05, 1.0), min_size=4, max_size=4))
def test_chi2_is_a_metric(u, v, w, raw):
    f = np.array(raw) / sum(raw)
    d = lambda a, b: c.chi2_distance(a, b, f)
    assert d(u, v) == d(v, u)
    assert d(u, w) <= d(u, v) + d(v, w) + 1e-12


def test_table_profiles():
    t = c.ContingencyTable([[10, 0], [5, 5]])
    npt.assert_allclose(t.row_profiles(), [[1, 0], [0.5, 0.5]])
    npt.assert_allclose(t.col_profiles(), [[2 / 3, 1 / 3], [0, 1]])
    npt.assert_allclose(t.row_masses.sum(), 1.0)
    with pytest.raises(ValueError):
        c.ContingencyTable([[0, 0], [0, 0]])
    with pytest.raises(ValueError):
        c.ContingencyTable([[1, 0], [0, 0]]).row_profiles()


def test_data_matrix_examples():
    D = c.korresp_build_D(c.ContingencyTable([[10, 0], [0, 10]]))
    assert D.shape == (4, 4)
    npt.assert_array_equal(D[0], [1, 0, 1, 0])
    npt.assert_array_equal(D[2], [1, 0, 1, 0])
    # uniform table: every row picks column 1 by the tie rule
    U = c.korresp_build_D(c.ContingencyTable(np.full((3, 2), 4)))
    assert U.shape == (5, 5)
    npt.assert_allclose(U[:3, 2:], np.tile([1 / 3, 1 / 3, 1 / 3], (3, 1)))


def test_burt_by_hand():
    b = c.build_burt([(1, 2)], modalities=[[1, 2], [1, 2]])
    expected = np.zeros((4, 4), dtype=int)
    for i in (0, 3):
        for j in (0, 3):
            expected[i, j] = 1
    npt.assert_array_equal(b.counts, expected)
    with pytest.raises(c.IngestionError):
        c.build_burt([])
    with pytest.raises(c.IngestionError, match="row 1, question 'q2'"):
        c.build_burt([(1, 1), (1, 3)], modalities=[[1, 2], [1, 2]])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.lists(st.integers(1, 4), min_size=1, max_size=5), st.integers(0, 2 ** 32 - 1))
def test_burt_invariants(N, sizes, seed):
    rng = np.random.default_rng(seed)
    responses = np.column_stack([rng.integers(0, m, N) for m in sizes])
    b = c.build_burt(responses.tolist(), modalities=[list(range(m)) for m in sizes])
    assert all(c.check_invariants(b).values())
    assert b.counts.dtype.kind == "i"


def test_korresp_zero_steps_and_determinism():
    t = c.ContingencyTable(block_table())
    a = c.korresp_run(t, 0, np.random.default_rng(1))
    b = c.korresp_run(t, 0, np.random.default_rng(1))
    assert a == b
    x = c.korresp_run(t, 4000, np.random.default_rng(7))
    y = c.korresp_run(t, 4000, np.random.default_rng(7))
    assert x == y
    npt.assert_array_equal(x.weights, y.weights)
    with pytest.raises(ValueError):
        c.korresp_run(t, 10, np.random.default_rng(0), winner="diagonal")


def test_korresp_recovers_blocks():
    t = c.ContingencyTable(block_table())
    mp = c.korresp_run(t, 20_000, np.random.default_rng(0))
    for i in range(6):
        assert mp.adjacent(f"rows:r{i + 1}", f"columns:c{(i // 3) * 3 + 1}")
    full = c.korresp_run(t, 20_000, np.random.default_rng(0), winner="full")
    assert full.adjacent("rows:r1", "columns:c1")


def _block_responses():
    T = block_table()
    return [(f"r{i + 1}", f"c{j + 1}") for i in range(6) for j in range(6) for _ in range(T[i, j])]


def test_kacm_agrees_with_korresp_on_block_data():
    # on a small grid both pipelines keep the two blocks in separate units
    burt = c.build_burt(_block_responses())
    block = np.array([0, 0, 0, 1, 1, 1] * 2)
    lat = Lattice.grid(4, 4)
    for seed in range(5):
        k = c.kacm_run(burt, 20_000, np.random.default_rng(seed), lattice=lat)
        for unit in set(k.units):
            assert len(set(block[k.units == unit])) == 1
        r = c.korresp_run(c.ContingencyTable(block_table()), 20_000, np.random.default_rng(seed),
                          lattice=lat)
        for unit in set(r.units):
            assert len(set(block[r.units == unit])) == 1


def test_kacm_determinism_and_zero_frequency_warning():
    burt = c.build_burt([("a", "x"), ("b", "y"), ("a", "y")],
                        modalities=[["a", "b", "c"], ["x", "y"]])
    with pytest.warns(UserWarning, match="q1:c"):
        m1 = c.kacm_run(burt, 500, np.random.default_rng(3), lattice=Lattice.grid(2, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m2 = c.kacm_run(burt, 500, np.random.default_rng(3), lattice=Lattice.grid(2, 2))
    assert m1 == m2
    assert "c" not in m1.labels


def test_modality_map_outputs(tmp_path):
    mp = c.ModalityMap(["a", "b"], ["q1", "q1"], [0, 5], Lattice.grid(3, 3))
    assert mp.coords("b") == (2, 1)
    assert mp.lattice_distance("a", "b") == 2
    mp.to_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines() == [
        "modality,question,unit_row,unit_col", "a,q1,0,0", "b,q1,1,2"]
    assert mp.report_text() == "unit 0 (0, 0): q1:a\nunit 5 (1, 2): q1:b\n"


def test_csv_ingestion(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(",x,y\nA,3,1\nB,0,2\n")
    t = c.read_contingency_csv(p)
    assert t.row_labels == ["A", "B"] and t.col_labels == ["x", "y"]
    npt.assert_array_equal(t.counts, [[3, 1], [0, 2]])
    r = tmp_path / "r.csv"
    r.write_text("colour,size\nred,big\nblue,big\nred,small\n")
    b = c.read_responses_csv(r)
    assert b.questions == ["colour", "size"]
    assert b.modalities == [["blue", "red"], ["big", "small"]]
    bad = tmp_path / "bad.csv"
    bad.write_text(",x\nA,1.5\n")
    with pytest.raises(c.IngestionError):
        c.read_contingency_csv(bad)
