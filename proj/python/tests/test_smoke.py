import hashlib

import numpy as np
import pytest

import eoescope


def test_taxonomy_round_trip():
    names = eoescope.class_names()
    assert len(names) == 11
    assert names[0] == "normal" and names[-1] == "retroflex-stomach"
    vec = eoescope.encode_labels(["rings", "furrows"])
    assert list(vec) == [0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0]
    assert eoescope.decode_labels(vec) == ["rings", "furrows"]
    with pytest.raises(eoescope.EoescopeError):
        eoescope.encode_labels(["edema", "pylorus"])


def test_published_totals():
    cells = eoescope.published_counts()
    eoe = sum(v for (src, _, col), v in cells.items() if col == "images" and src != "kvasir")
    gi = sum(v for (src, _, col), v in cells.items() if col == "images" and src == "kvasir")
    assert (eoe, gi) == (644, 6406)


def test_evaluate_matches_numpy():
    rng = np.random.default_rng(3)
    truth = rng.integers(0, 2, size=(40, 11))
    pred = rng.integers(0, 2, size=(40, 11))
    rep = eoescope.evaluate(truth.tolist(), pred.tolist(), "m")
    for k in range(11):
        tp = int(np.sum((truth[:, k] == 1) & (pred[:, k] == 1)))
        fp = int(np.sum((truth[:, k] == 0) & (pred[:, k] == 1)))
        fn = int(np.sum((truth[:, k] == 1) & (pred[:, k] == 0)))
        assert rep["classes"][k]["f1"] == pytest.approx(eoescope.f1(tp, fp, fn), abs=1e-12)
    t_any = truth[:, 1:6].any(axis=1)
    p_any = pred[:, 1:6].any(axis=1)
    tp = int(np.sum(t_any & p_any))
    fp = int(np.sum(~t_any & p_any))
    fn = int(np.sum(t_any & ~p_any))
    assert rep["eoe"]["f1"] == pytest.approx(2 * tp / (2 * tp + fp + fn), abs=1e-12)
    table = eoescope.format_table([rep["json"]])
    assert table.splitlines()[0] == "[EoE]"


def test_rollout_matches_numpy():
    rng = np.random.default_rng(5)
    layers, heads, t = 3, 2, 6
    att, grad = [], []
    for _ in range(layers):
        a = rng.random((heads, t, t))
        a /= a.sum(axis=2, keepdims=True)
        att.append(list(a))
        grad.append(list(rng.uniform(-1, 1, (heads, t, t))))
    grid, alphas, warning = eoescope.rollout(att, grad, 2, 2, 2)
    total = np.zeros((t, t))
    for a, g in zip(att, grad):
        pos = np.maximum(np.array(g), 0)
        total += pos.mean() * (pos * np.array(a)).mean(axis=0)
    row = total[0, 2:]
    assert not warning
    assert len(alphas) == layers
    np.testing.assert_allclose(np.array(grid).ravel(), row / row.max(), atol=1e-12)


def test_viridis_and_hashes():
    np.testing.assert_allclose(eoescope.viridis(0.0), [0.267004, 0.004874, 0.329415], atol=1e-6)
    np.testing.assert_allclose(eoescope.viridis(0.5), [0.128148, 0.565107, 0.550893], atol=1e-5)
    data = b"endoscopy"
    assert eoescope.sha256_hex(data) == hashlib.sha256(data).hexdigest()
