import json
from fractions import Fraction

import numpy as np
import pytest

import slowvary as sv
from slowvary.crosssection import _binormalise
from slowvary.errors import (
    DefectiveNormalisation,
    GapViolation,
    MissingBaseOperator,
    NoCentreMode,
    UnstableMode,
)

from conftest import random_gap_family


def diag_family(diag, **ops):
    table = {(0, 0): np.diag(np.asarray(diag, dtype=float))}
    table.update(ops)
    return sv.OperatorFamily(table)


def test_family_requires_base_operator():
    with pytest.raises(MissingBaseOperator):
        sv.OperatorFamily({(1, 0): np.eye(2)})


def test_family_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        sv.OperatorFamily({(0, 0): np.eye(2), (1, 0): np.eye(3)})
    with pytest.raises(ValueError):
        sv.OperatorFamily({(0, 0): np.eye(2), (1,): np.eye(2)})


def test_support_is_graded(walker):
    assert walker.support == [(0, 0), (1, 0), (0, 1)]
    assert walker.max_order == 1
    assert walker.M == 2 and walker.dimU == 3


def test_walker_split_is_clean(walker):
    split = sv.spectral_split(walker, N=2)
    assert split.m == 1
    assert np.allclose(np.sort(split.eigenvalues.real), [-3, -1, 0])
    assert split.beta == pytest.approx(1.0)
    assert split.alpha == pytest.approx(3e-9)  # 1e-9 * spectral radius
    np.testing.assert_allclose(split.V0[:, 0], [1, 0, 0], atol=1e-14)
    np.testing.assert_allclose(split.Z0.T @ split.V0, np.eye(1), atol=1e-14)
    np.testing.assert_allclose(split.A0, [[0.0]], atol=1e-14)


def test_exact_split_walker(walker_exact):
    split = sv.spectral_split(walker_exact, N=3)
    assert split.is_exact
    assert split.V0[0, 0] == Fraction(1)
    assert split.Z0[0, 0] == Fraction(1)
    assert split.A0[0, 0] == Fraction(0)
    assert (split.Z0.T @ split.V0)[0, 0] == Fraction(1)


def test_no_centre_mode():
    fam = diag_family([-1.0, -2.0])
    with pytest.raises(NoCentreMode):
        sv.spectral_split(fam, N=2)


def test_unstable_mode():
    fam = diag_family([0.0, 0.5, -2.0])
    with pytest.raises(UnstableMode):
        sv.spectral_split(fam, N=2)


def test_gap_violation():
    # stable eigenvalue closer than N * alpha: reduction order too greedy
    fam = diag_family([0.0, -1.5e-9, -1.0])
    with pytest.raises(GapViolation):
        sv.spectral_split(fam, N=2, alpha=1e-9)
    split = sv.spectral_split(fam, N=2, alpha=1e-8)  # widen centre instead
    assert split.m == 2


def test_alpha_scales_with_spectral_radius(walker):
    doubled = sv.OperatorFamily(
        {k: 2.0 * v for k, v in walker.ops.items()}
    )
    s1 = sv.spectral_split(walker, N=2)
    s2 = sv.spectral_split(doubled, N=2)
    assert s2.alpha == pytest.approx(2 * s1.alpha)


def test_binormalisation_guard():
    V = np.array([[1.0], [0.0]])
    W = np.array([[0.0], [1.0]])
    with pytest.raises(DefectiveNormalisation):
        _binormalise(W, V)


@pytest.mark.parametrize("seed", range(6))
def test_random_families_split_cleanly(seed):
    rng = np.random.default_rng(seed)
    fam = random_gap_family(rng, dimU=5, m=1)
    split = sv.spectral_split(fam, N=3)
    assert split.m == 1
    L0 = fam.L0
    # V0 spans an invariant subspace and the pairing is unit
    res = L0 @ split.V0 - split.V0 @ split.A0
    assert np.abs(res).max() < 1e-10
    res_left = split.Z0.T @ L0 - split.A0 @ split.Z0.T
    assert np.abs(res_left).max() < 1e-10
    assert np.abs(split.Z0.T @ split.V0 - np.eye(1)).max() < 1e-12


def test_jordan_centre_block():
    rng = np.random.default_rng(7)
    fam = random_gap_family(rng, dimU=5, m=2, centre="jordan")
    split = sv.spectral_split(fam, N=2, alpha=1e-6)
    assert split.m == 2
    # A0 is similar to the nilpotent chain: zero eigenvalues, nonzero matrix
    assert np.abs(np.linalg.eigvals(split.A0)).max() < 1e-6
    assert np.abs(split.A0).max() > 0.1
    res = fam.L0 @ split.V0 - split.V0 @ split.A0
    assert np.abs(res).max() < 1e-10


def test_rotation_centre_block():
    rng = np.random.default_rng(11)
    fam = random_gap_family(rng, dimU=6, m=2, centre="rotation")
    split = sv.spectral_split(fam, N=2)
    assert split.m == 2
    ev = np.sort(np.linalg.eigvals(split.A0).imag)
    assert ev[0] < -0.4 and ev[1] > 0.4
    assert np.abs(np.linalg.eigvals(split.A0).real).max() < 1e-10


def test_sparse_symmetric_split_cycle_graph():
    # cycle-graph Laplacian: uniform kernel, known spectral gap
    n = 700
    L0 = (
        -2.0 * np.eye(n)
        + np.eye(n, k=1)
        + np.eye(n, k=-1)
    )
    L0[0, -1] = L0[-1, 0] = 1.0
    fam = sv.OperatorFamily({(0,): L0, (1,): np.eye(n)})
    split = sv.spectral_split(fam, N=1)
    assert split.m == 1
    assert not split.spectrum_complete
    gap = 2.0 - 2.0 * np.cos(2 * np.pi / n)
    assert split.beta == pytest.approx(gap, rel=1e-8)
    assert np.abs(L0 @ split.V0).max() < 1e-8
    assert float((split.Z0.T @ split.V0)[0, 0]) == pytest.approx(1.0, abs=1e-10)


def test_validate_family_report(walker):
    rep = sv.validate_family(walker, N=2)
    assert rep.m == 1
    assert rep.gap_margin == pytest.approx(1.0, rel=1e-6)
    assert rep.binorm_residual < 1e-13
    assert rep.invariance_residual < 1e-13
    assert rep.residual_failures(1e-10) == []


def test_json_roundtrip(tmp_path, walker, walker_exact):
    p = tmp_path / "fam.json"
    walker.save(p)
    back = sv.OperatorFamily.load(p)
    for k in walker.support:
        np.testing.assert_allclose(back.ops[k], walker.ops[k], atol=0)

    pe = tmp_path / "fam_exact.json"
    walker_exact.save(pe)
    raw = json.loads(pe.read_text())
    assert raw["operators"]["1,0"][0][0] == "-1/3"
    back_exact = sv.OperatorFamily.load(pe, exact=True)
    assert back_exact.is_exact
    assert back_exact.ops[(1, 0)][0, 0] == Fraction(-1, 3)
    # exact file read as float still matches
    as_float = sv.OperatorFamily.load(pe)
    np.testing.assert_allclose(as_float.ops[(1, 0)], walker.ops[(1, 0)])


def test_from_json_rejects_garbage():
    with pytest.raises(ValueError):
        sv.OperatorFamily.from_json({"M": 2})
    with pytest.raises(ValueError):
        sv.OperatorFamily.from_json(
            {"M": 2, "dimU": 2, "operators": {"0,0": [[1, 0]]}}
        )


def test_centre_eigenvalues_listed(walker):
    split = sv.spectral_split(walker, N=2)
    ce = split.centre_eigenvalues()
    assert ce.shape == (1,)
    assert abs(ce[0]) < 1e-12
