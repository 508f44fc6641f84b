import json
from fractions import Fraction

import numpy as np
import pytest

import slowvary as sv
from slowvary.errors import GridTooCoarse, NonPositiveDiffusivity
from slowvary.models import (
    CellProblem,
    cell_gap_ratio,
    cell_spectral_split,
    homogenisation_cell,
    modal_transform,
    modal_transform_check,
    random_walker_modal,
    random_walker_physical,
)

F = Fraction


# -- the three-velocity walker ------------------------------------------------


def test_walker_modal_entries(walker):
    np.testing.assert_allclose(
        walker.ops[(0, 0)], np.diag([0.0, -1.0, -3.0]), atol=0
    )
    assert walker.ops[(1, 0)][0, 2] == pytest.approx(-4 / 3)
    assert walker.ops[(0, 1)][1, 0] == pytest.approx(-1.0)


def test_walker_physical_is_advection_exchange(walker_physical):
    L0 = walker_physical.ops[(0, 0)]
    # exchange generator: zero column sums, uniform kernel
    np.testing.assert_allclose(L0.sum(axis=0), 0.0, atol=1e-15)
    np.testing.assert_allclose(
        walker_physical.ops[(1, 0)], np.diag([-1.0, 1.0, -1.0]), atol=0
    )
    np.testing.assert_allclose(
        walker_physical.ops[(0, 1)], np.diag([-1.0, 0.0, 1.0]), atol=0
    )


def test_modal_transform_diagonalises(walker_physical, walker):
    T = modal_transform()
    Ti = np.linalg.inv(T)
    for k in walker.support:
        np.testing.assert_allclose(
            T @ walker_physical.ops[k] @ Ti, walker.ops[k], atol=1e-14
        )


def test_modal_transform_check_zero_exact():
    assert modal_transform_check() == 0


def test_modal_transform_check_detects_perturbation(walker_physical):
    ops = {k: v.copy() for k, v in walker_physical.ops.items()}
    ops[(1, 0)][0, 0] += 1e-3
    bad = sv.OperatorFamily(ops)
    assert modal_transform_check(physical=bad) > 1e-4


def test_physical_and_modal_reductions_agree(walker, walker_physical):
    mm, _ = sv.construct_reduction(walker, N=3)
    mp, _ = sv.construct_reduction(walker_physical, N=3)
    for n in mm.A:
        assert np.abs(mm.A[n] - mp.A[n]).max() < 1e-12, n


def test_walker_exact_flavours():
    fam = random_walker_modal(exact=True)
    assert fam.is_exact
    assert fam.ops[(1, 0)][0, 2] == F(-4, 3)
    fp = random_walker_physical(exact=True)
    assert fp.ops[(0, 0)][1, 1] == F(-2)


# -- diffusivity cells --------------------------------------------------------


def test_cell_validation():
    with pytest.raises(GridTooCoarse):
        CellProblem(h=1.0, n=2, K=np.full((2, 2), 1.0))
    with pytest.raises(GridTooCoarse):
        CellProblem(h=1.0, n=7, K=np.full((7, 7), 1.0))
    with pytest.raises(NonPositiveDiffusivity):
        CellProblem(h=1.0, n=8, K=np.full((8, 8), -0.5))
    with pytest.raises(NonPositiveDiffusivity):
        CellProblem.from_expression("layered_cos", n=8, amplitude=1.0)
    with pytest.raises(ValueError):
        CellProblem.from_expression("no_such_profile")


def test_cell_face_values_constant():
    cell = CellProblem.from_expression("constant", n=8, base=0.7)
    np.testing.assert_allclose(cell.face_K(0), 0.7, atol=0)
    np.testing.assert_allclose(cell.face_K(1), 0.7, atol=0)


def test_cell_face_values_layered_midpoints():
    n = 16
    cell = CellProblem.from_expression("layered_cos", n=n)
    d = cell.h / n
    midpoints = 1.0 + 0.5 * np.cos(2 * np.pi * (np.arange(n) + 0.5) * d)
    np.testing.assert_allclose(cell.face_K(0)[:, 0], midpoints, atol=1e-14)
    # layering varies along the first axis only
    assert np.ptp(cell.face_K(0), axis=1).max() < 1e-14


def test_homogenise_constant_recovers_K():
    cell = CellProblem.from_expression("constant", n=16, base=0.7)
    fam = homogenisation_cell(cell)
    split = cell_spectral_split(fam)
    model, _ = sv.construct_reduction(fam, N=2, split=split)
    assert float(model.coefficient((2, 0))[0, 0]) == pytest.approx(0.7, abs=1e-10)
    assert float(model.coefficient((0, 2))[0, 0]) == pytest.approx(0.7, abs=1e-10)
    assert abs(float(model.coefficient((1, 0))[0, 0])) < 1e-10
    assert abs(float(model.coefficient((0, 1))[0, 0])) < 1e-10


def test_homogenise_layered_harmonic_arithmetic():
    cell = CellProblem.from_expression("layered_cos", n=32)
    fam = homogenisation_cell(cell)
    split = cell_spectral_split(fam)
    model, _ = sv.construct_reduction(fam, N=2, split=split)
    a20 = float(model.coefficient((2, 0))[0, 0])
    a02 = float(model.coefficient((0, 2))[0, 0])
    # across the layers: harmonic mean sqrt(1 - a^2); along them: arithmetic
    assert a20 == pytest.approx(np.sqrt(0.75), rel=2e-3)
    assert a02 == pytest.approx(1.0, rel=1e-10)
    assert abs(float(model.coefficient((1, 0))[0, 0])) < 1e-10
    assert abs(float(model.coefficient((1, 1))[0, 0])) < 1e-10


def test_layered_convergence_second_order():
    errs = []
    for n in (16, 32, 64):
        cell = CellProblem.from_expression("layered_cos", n=n)
        split = cell_spectral_split(homogenisation_cell(cell))
        model, _ = sv.construct_reduction(
            homogenisation_cell(cell), N=2, split=split
        )
        errs.append(abs(float(model.coefficient((2, 0))[0, 0]) - np.sqrt(0.75)))
    rate = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert rate[0] == pytest.approx(2.0, abs=0.3)
    assert rate[1] == pytest.approx(2.0, abs=0.3)


def test_checkerboard_smooth_is_symmetric():
    cell = CellProblem.from_expression("checkerboard_smooth", n=16, amplitude=0.4)
    fam = homogenisation_cell(cell)
    split = cell_spectral_split(fam)
    model, _ = sv.construct_reduction(fam, N=2, split=split)
    a20 = float(model.coefficient((2, 0))[0, 0])
    a02 = float(model.coefficient((0, 2))[0, 0])
    assert a20 == pytest.approx(a02, rel=1e-8)
    K = cell.K
    assert 1 / np.mean(1 / K) - 1e-9 <= a20 <= K.mean() + 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_random_smooth_fields_obey_mean_bounds(seed):
    """Effective diffusivities sit between the harmonic and arithmetic means."""
    rng = np.random.default_rng(100 + seed)
    n, h = 32, 1.0
    y = np.arange(n) * (h / n)
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    K = np.full((n, n), 1.2)
    for _ in range(3):
        p, q = rng.integers(1, 4, size=2)
        amp = 0.15 * rng.random()
        ph1, ph2 = rng.random(2) * 2 * np.pi
        K += amp * np.cos(2 * np.pi * p * Y1 / h + ph1) * np.cos(
            2 * np.pi * q * Y2 / h + ph2
        )
    cell = CellProblem(h=h, n=n, K=K)
    fam = homogenisation_cell(cell)
    split = cell_spectral_split(fam)
    model, _ = sv.construct_reduction(fam, N=2, split=split)
    a20 = float(model.coefficient((2, 0))[0, 0])
    a02 = float(model.coefficient((0, 2))[0, 0])
    harm, arith = 1 / np.mean(1 / K), K.mean()
    assert harm - 1e-6 <= a20 <= arith + 1e-6
    assert harm - 1e-6 <= a02 <= arith + 1e-6
    assert abs(float(model.coefficient((1, 0))[0, 0])) < 1e-9
    assert abs(float(model.coefficient((0, 1))[0, 0])) < 1e-9


def test_cell_split_weights_are_uniform():
    cell = CellProblem.from_expression("layered_cos", n=16)
    fam = homogenisation_cell(cell)
    split = cell_spectral_split(fam)
    assert split.m == 1
    np.testing.assert_allclose(split.V0[:, 0], 1.0, atol=1e-11)
    np.testing.assert_allclose(split.Z0[:, 0], 1.0 / 16**2, atol=1e-14)


def test_cell_gap_ratio_constant():
    cell = CellProblem.from_expression("constant", n=32)
    fam = homogenisation_cell(cell)
    split = cell_spectral_split(fam)
    ratio = cell_gap_ratio(cell, split)
    # the discrete Laplacian gap trails 4 pi^2 K / h^2 by sinc(1/n)^2
    assert ratio == pytest.approx(np.sinc(1 / 32) ** 2, rel=1e-6)
    assert ratio >= 0.9


def test_cell_gap_ratio_layered_exceeds_worst_case():
    cell = CellProblem.from_expression("layered_cos", n=32)
    fam = homogenisation_cell(cell)
    split = cell_spectral_split(fam)
    assert cell_gap_ratio(cell, split) >= 0.9


def test_cell_json_roundtrip(tmp_path):
    cell = CellProblem.from_expression("layered_cos", n=8, amplitude=0.3)
    p = tmp_path / "cell.json"
    cell.save(p)
    doc = json.loads(p.read_text())
    assert doc["K_expr"] == "layered_cos"
    back = CellProblem.load(p)
    np.testing.assert_allclose(back.K, cell.K, atol=0)
    assert back.k_func is not None

    numeric = CellProblem(h=2.0, n=8, K=cell.K.copy())
    p2 = tmp_path / "numeric.json"
    numeric.save(p2)
    back2 = CellProblem.load(p2)
    assert back2.h == 2.0
    np.testing.assert_allclose(back2.K, cell.K, atol=0)
    assert back2.k_func is None
