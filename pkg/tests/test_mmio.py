import numpy as np
import pytest
import scipy.sparse

from sketchqr.experiments import gen_cmatrix
from sketchqr.mmio import MatrixMarketError, load_matrix_market, write_matrix_market


def write_lines(path, *lines):
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_coordinate_identity(tmp_path):
    p = write_lines(tmp_path / "i.mtx",
                    "%%MatrixMarket matrix coordinate real general",
                    "% a comment",
                    "2 2 2",
                    "1 1 1.0",
                    "2 2 1.0")
    A = load_matrix_market(p)
    assert scipy.sparse.issparse(A)
    assert np.array_equal(A.toarray(), np.eye(2))


def test_array_is_column_major(tmp_path):
    p = write_lines(tmp_path / "a.mtx",
                    "%%MatrixMarket matrix array real general",
                    "3 2",
                    "1", "2", "3", "4", "5", "6")
    M = load_matrix_market(p)
    assert np.array_equal(M, [[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]])


def test_dense_round_trip_is_bitwise(tmp_path):
    C = gen_cmatrix(64, 8)
    p = tmp_path / "c.mtx"
    write_matrix_market(str(p), C)
    C2 = load_matrix_market(str(p))
    assert np.array_equal(C, C2)


def test_awkward_values_round_trip(tmp_path):
    M = np.array([[1e-308, -np.pi], [0.1 + 0.2, 2.0 ** -1074], [-0.0, 1e17]])
    p = tmp_path / "m.mtx"
    write_matrix_market(str(p), M)
    M2 = load_matrix_market(str(p))
    assert np.array_equal(M.view(np.uint64), M2.view(np.uint64))


def test_sparse_round_trip(tmp_path):
    A = scipy.sparse.random(30, 20, density=0.15,
                            random_state=np.random.RandomState(7))
    p = tmp_path / "s.mtx"
    write_matrix_market(str(p), A)
    A2 = load_matrix_market(str(p))
    assert A2.format == "csc"
    assert np.array_equal(A.toarray(), A2.toarray())


def test_symmetric_coordinate_expands(tmp_path):
    p = write_lines(tmp_path / "sym.mtx",
                    "%%MatrixMarket matrix coordinate real symmetric",
                    "3 3 4",
                    "1 1 2.0",
                    "2 1 -1.0",
                    "3 2 0.5",
                    "3 3 4.0")
    S = load_matrix_market(p).toarray()
    assert np.array_equal(S, S.T)
    assert S[0, 1] == -1.0 and S[1, 2] == 0.5
    assert S[1, 1] == 0.0


def test_symmetric_array_expands(tmp_path):
    p = write_lines(tmp_path / "sa.mtx",
                    "%%MatrixMarket matrix array real symmetric",
                    "2 2",
                    "1", "7", "4")
    M = load_matrix_market(p)
    assert np.array_equal(M, [[1.0, 7.0], [7.0, 4.0]])


def test_vector_write_read(tmp_path):
    v = np.linspace(-1, 1, 9)
    p = tmp_path / "v.mtx"
    write_matrix_market(str(p), v, comment="a right-hand side")
    M = load_matrix_market(str(p))
    assert M.shape == (9, 1)
    assert np.array_equal(M[:, 0], v)


def test_bad_banner(tmp_path):
    p = write_lines(tmp_path / "b.mtx", "MatrixMarket matrix coordinate real general", "1 1 0")
    with pytest.raises(MatrixMarketError, match="line 1"):
        load_matrix_market(p)


def test_complex_field_rejected(tmp_path):
    p = write_lines(tmp_path / "b.mtx",
                    "%%MatrixMarket matrix coordinate complex general", "1 1 0")
    with pytest.raises(MatrixMarketError, match="real"):
        load_matrix_market(p)


def test_skew_symmetry_rejected(tmp_path):
    p = write_lines(tmp_path / "b.mtx",
                    "%%MatrixMarket matrix coordinate real skew-symmetric", "1 1 0")
    with pytest.raises(MatrixMarketError, match="symmetry"):
        load_matrix_market(p)


def test_index_out_of_range_reports_line(tmp_path):
    p = write_lines(tmp_path / "b.mtx",
                    "%%MatrixMarket matrix coordinate real general",
                    "2 2 2",
                    "1 1 1.0",
                    "3 1 5.0")
    with pytest.raises(MatrixMarketError, match="line 4.*row index 3"):
        load_matrix_market(p)


def test_entry_count_mismatch(tmp_path):
    p = write_lines(tmp_path / "b.mtx",
                    "%%MatrixMarket matrix coordinate real general",
                    "2 2 3",
                    "1 1 1.0")
    with pytest.raises(MatrixMarketError, match="declared 3 entries"):
        load_matrix_market(p)


def test_unparseable_value_reports_line(tmp_path):
    p = write_lines(tmp_path / "b.mtx",
                    "%%MatrixMarket matrix array real general",
                    "2 1",
                    "1.5",
                    "oops")
    with pytest.raises(MatrixMarketError, match="line 4"):
        load_matrix_market(p)


def test_symmetric_upper_entry_rejected(tmp_path):
    p = write_lines(tmp_path / "b.mtx",
                    "%%MatrixMarket matrix coordinate real symmetric",
                    "2 2 1",
                    "1 2 3.0")
    with pytest.raises(MatrixMarketError, match="lower triangle"):
        load_matrix_market(p)


def test_symmetric_must_be_square(tmp_path):
    p = write_lines(tmp_path / "b.mtx",
                    "%%MatrixMarket matrix coordinate real symmetric",
                    "2 3 1",
                    "1 1 1.0")
    with pytest.raises(MatrixMarketError, match="square"):
        load_matrix_market(p)


def test_comment_written_and_skipped(tmp_path):
    p = tmp_path / "c.mtx"
    write_matrix_market(str(p), np.ones((2, 2)), comment="two lines\nof notes")
    text = p.read_text()
    assert "% two lines" in text and "% of notes" in text
    assert np.array_equal(load_matrix_market(str(p)), np.ones((2, 2)))
