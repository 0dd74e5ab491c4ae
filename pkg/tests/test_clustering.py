import numpy as np
import pytest

from commglasso.clustering import (
    cluster_pipeline,
    cor_abs_transform,
    drop_zero_rows,
    hamming_error,
    kmeans,
)
from commglasso.types import (
    AllRowsZero,
    ConfigError,
    InvalidK,
    LabelVector,
    LengthMismatch,
    symmetrize,
)


def test_drop_zero_rows_cases():
    M = np.diag([1.0, 2.0, 3.0])
    reduced, idx = drop_zero_rows(M, 0.0)
    assert np.array_equal(reduced, M) and idx.tolist() == [0, 1, 2]

    M = np.diag([1.0, 0.0, 3.0])
    reduced, idx = drop_zero_rows(M, 0.0)
    assert idx.tolist() == [0, 2]
    assert np.array_equal(reduced, np.diag([1.0, 3.0]))

    M = np.diag([1.0, 1e-9, 3.0])
    _, idx = drop_zero_rows(M, 1e-8)
    assert idx.tolist() == [0, 2]

    with pytest.raises(AllRowsZero):
        drop_zero_rows(np.zeros((3, 3)), 0.0)
    with pytest.raises(ConfigError):
        drop_zero_rows(np.eye(2), -1.0)


def test_cor_abs_scale_invariant_rows():
    # rows equal up to positive scaling have |row| correlation exactly 1
    u = np.array([1.0, 2.0, 3.0])
    M = symmetrize(np.outer(u, u))
    out = cor_abs_transform(M)
    assert np.allclose(out, np.ones((3, 3)), atol=1e-12)


def test_cor_abs_constant_row_convention():
    M = np.array([[2.0, 2.0, 2.0], [2.0, 1.0, 3.0], [2.0, 3.0, 0.5]])
    M = symmetrize(M)
    out = cor_abs_transform(M)
    assert out[0, 0] == 1.0
    assert out[0, 1] == 0.0 and out[0, 2] == 0.0  # zero-variance row


def test_cor_abs_matches_pearson_oracle():
    rng = np.random.default_rng(0)
    M = symmetrize(rng.normal(size=(4, 4)))
    out = cor_abs_transform(M)
    A = np.abs(M)
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            x, y = A[i], A[j]
            num = np.sum((x - x.mean()) * (y - y.mean()))
            den = np.sqrt(np.sum((x - x.mean()) ** 2) * np.sum((y - y.mean()) ** 2))
            assert abs(out[i, j] - num / den) < 1e-12


def test_kmeans_separated_clusters():
    pts = np.array([[0.0], [0.1], [10.0], [10.1]])
    result = kmeans(pts, 2, restarts=5, seed=0)
    labels = result.labels.labels
    assert labels[0] == labels[1] and labels[2] == labels[3]
    assert labels[0] != labels[2]


def test_kmeans_degenerate_k_and_determinism():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(6, 2))
    result = kmeans(pts, 6, restarts=3, seed=4)
    assert result.loss == pytest.approx(0.0, abs=1e-12)
    r1 = kmeans(pts, 3, restarts=4, seed=9)
    r2 = kmeans(pts, 3, restarts=4, seed=9)
    assert np.array_equal(r1.labels.labels, r2.labels.labels)
    with pytest.raises(InvalidK):
        kmeans(pts, 7)


def test_kmeans_loss_recomputes_from_labels_and_centers():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(20, 3))
    result = kmeans(pts, 4, restarts=6, seed=2)
    labels = result.labels.labels - 1
    loss = sum(
        float(np.sum((pts[labels == k] - result.centers[k]) ** 2)) for k in range(4)
    )
    assert abs(loss - result.loss) < 1e-10


def test_kmeans_loss_non_increasing():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(30, 2))
    result = kmeans(pts, 3, restarts=1, seed=5)
    hist = np.array(result.loss_history)
    assert np.all(np.diff(hist) <= 1e-9)


def test_hamming_error_basics():
    assert hamming_error([1, 2, 1, 2], [1, 2, 1, 2]) == 0.0
    assert hamming_error([1, 2, 1, 2], [2, 1, 2, 1]) == 0.0  # relabeling
    assert hamming_error([1, 1, 2, 2], [1, 1, 1, 2]) == pytest.approx(0.25)
    with pytest.raises(LengthMismatch):
        hamming_error([1, 2], [1, 2, 1])


def test_hamming_error_symmetric_and_permutation_invariant():
    rng = np.random.default_rng(4)
    for _ in range(20):
        m = int(rng.integers(2, 5))
        x = rng.integers(1, m + 1, size=30)
        y = rng.integers(1, m + 1, size=30)
        assert hamming_error(x, x) == 0.0
        assert hamming_error(x, y) == pytest.approx(hamming_error(y, x))
        perm = rng.permutation(m) + 1
        assert hamming_error(perm[x - 1], y) == pytest.approx(hamming_error(x, y))


def test_hamming_exhaustive_matches_assignment():
    rng = np.random.default_rng(5)
    for _ in range(100):
        m = int(rng.integers(2, 7))
        x = rng.integers(1, m + 1, size=40)
        y = rng.integers(1, m + 1, size=40)
        a = hamming_error(x, y, method="exhaustive")
        b = hamming_error(x, y, method="assignment")
        assert a == pytest.approx(b, abs=1e-12)


def test_hamming_accepts_label_vectors():
    lv = LabelVector(np.array([1, 2, 2]), 2)
    assert hamming_error(lv, np.array([2, 1, 1])) == 0.0


def _block_diag(*blocks):
    p = sum(b.shape[0] for b in blocks)
    out = np.zeros((p, p))
    at = 0
    for b in blocks:
        d = b.shape[0]
        out[at : at + d, at : at + d] = b
        at += d
    return out


def test_cluster_pipeline_block_diagonal_rows_mode():
    # low within-block variation keeps each block's rows in a tight cluster
    rng = np.random.default_rng(6)
    u = 1.0 + 0.1 * rng.normal(size=4)
    v = 1.0 + 0.1 * rng.normal(size=3)
    L = _block_diag(5 * np.outer(u, u), 3 * np.outer(v, v))
    labels = cluster_pipeline(L, 2, "rows", seed=0)
    truth = np.array([1, 1, 1, 1, 2, 2, 2])
    assert hamming_error(labels.labels, truth[labels.index_map]) == 0.0


def test_cluster_pipeline_identical_rows_within_blocks():
    # separated centers with zero within-community variation: the partition
    # is recovered exactly (the oracle clustering error term is zero)
    L = _block_diag(2.0 * np.ones((3, 3)), 5.0 * np.ones((4, 4)))
    labels = cluster_pipeline(L, 2, "rows", seed=1)
    truth = np.array([1, 1, 1, 2, 2, 2, 2])
    assert hamming_error(labels.labels, truth[labels.index_map]) == 0.0


def test_cluster_pipeline_corabs_rank_one_blocks():
    rng = np.random.default_rng(7)
    u = np.abs(rng.normal(size=5)) + 0.2
    v = rng.normal(size=4)
    w = rng.normal(size=3)
    L = _block_diag(np.outer(u, u), 2 * np.outer(v, v), 0.5 * np.outer(w, w))
    labels = cluster_pipeline(L, 3, "corabs", seed=2)
    truth = np.array([1] * 5 + [2] * 4 + [3] * 3)
    assert hamming_error(labels.labels, truth[labels.index_map]) == 0.0


def test_cluster_pipeline_corabs_scale_invariance():
    rng = np.random.default_rng(8)
    u = rng.normal(size=4)
    v = rng.normal(size=4)
    L = _block_diag(np.outer(u, u), np.outer(v, v))
    a = cluster_pipeline(L, 2, "corabs", seed=3)
    b = cluster_pipeline(17.0 * L, 2, "corabs", seed=3)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.index_map, b.index_map)


def test_cluster_pipeline_excised_nodes_label_zero():
    rng = np.random.default_rng(9)
    u = rng.normal(size=3)
    L = _block_diag(np.outer(u, u), np.zeros((2, 2)), 4.0 * np.ones((3, 3)))
    labels = cluster_pipeline(L, 2, "rows", seed=4)
    full = labels.full_labels(8)
    assert full[3] == 0 and full[4] == 0
    assert np.all(full[:3] > 0) and np.all(full[5:] > 0)


def test_cluster_pipeline_unknown_mode():
    with pytest.raises(ConfigError):
        cluster_pipeline(np.eye(3), 2, "spectral")
