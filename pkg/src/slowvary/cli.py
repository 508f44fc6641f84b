"""Command-line front end.

Subcommands::

    slowvary reduce   --model walker-modal --order 2 --out results/
    slowvary validate --model family.json
    slowvary simulate --model walker-modal --order 2 --T 26 --out run/
    slowvary converge --model walker-modal --order 2 --wavelengths 32,64,128
    slowvary demo walker

Built-in model names: ``walker-modal``, ``walker-physical``,
``homogenise-constant``, ``homogenise-layered``,
``homogenise-checkerboard``; anything else is read as a JSON file
holding either an operator family or a diffusivity cell problem.

Exit codes: 0 all checks pass; 2 the model violates a structural
assumption (or the config is invalid); 3 a numerical check failed.
``report.json`` is written (and stays valid JSON) in every case; wall
clock and environment go to ``run_meta.json`` so that ``report.json``
is byte-identical across reruns of the same config.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

BUILTIN_MODELS = (
    "walker-modal",
    "walker-physical",
    "homogenise-constant",
    "homogenise-layered",
    "homogenise-checkerboard",
)

# above this many block rows the dense cross-check matrices are not worth
# building (they grow as (N_indices * dimU)^2)
_BLOCK_CHECK_LIMIT = 2000


@dataclass
class RunConfig:
    command: str
    model: str
    N: int = 2
    alpha: float | None = None
    tol: float = 1e-10
    grid: tuple = (32,)
    dt: float | None = None
    T: float = 26.0
    wavelengths: tuple = (16.0, 32.0, 64.0, 128.0)
    out: Path | None = None
    exact: bool = False
    seed: int | None = None
    amplitude: float = 0.5
    method: str = "vectors"


def _parse_grid(text: str) -> tuple:
    return tuple(int(p) for p in text.split(","))


def _parse_wavelengths(text: str) -> tuple:
    return tuple(float(p) for p in text.split(","))


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="slowvary",
        description="Slow-variable reduction of linear lattice and PDE systems.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model_flag=True):
        if model_flag:
            p.add_argument("--model", required=True,
                           help="built-in name or JSON file path")
        p.add_argument("--order", "-N", dest="N", type=int, default=2,
                       help="truncation order of the closure (default 2)")
        p.add_argument("--alpha", type=float, default=None,
                       help="centre/stable split threshold override")
        p.add_argument("--tol", type=float, default=1e-10,
                       help="residual tolerance for numerical checks")
        p.add_argument("--grid", type=_parse_grid, default=(32,),
                       help="grid points, comma separated per direction")
        p.add_argument("--dt", type=float, default=None,
                       help="integrator step override")
        p.add_argument("--T", type=float, default=26.0,
                       help="simulation span")
        p.add_argument("--wavelengths", type=_parse_wavelengths,
                       default=(16.0, 32.0, 64.0, 128.0),
                       help="comma separated box sizes")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory")
        p.add_argument("--exact", action="store_true",
                       help="rational arithmetic (built-in models, dimU <= 8)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed recorded in run metadata")
        p.add_argument("--method", choices=("vectors", "generating"),
                       default="vectors", help="construction route")

    common(sub.add_parser("reduce", help="construct the macroscale closure"))
    common(sub.add_parser("validate", help="check model assumptions"))
    common(sub.add_parser("simulate", help="integrate micro and macro side by side"))
    common(sub.add_parser("converge", help="plateau error against wavelength"))
    pd = sub.add_parser("demo", help="run a built-in walkthrough")
    pd.add_argument("name", choices=("walker", "homogenise-constant",
                                     "homogenise-layered"))
    pd.add_argument("--a", dest="amplitude", type=float, default=0.5,
                    help="layer amplitude for homogenise-layered")
    common(pd, model_flag=False)
    return ap


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        command=args.command,
        model=getattr(args, "model", getattr(args, "name", "")),
        N=args.N,
        alpha=args.alpha,
        tol=args.tol,
        grid=args.grid,
        dt=args.dt,
        T=args.T,
        wavelengths=args.wavelengths,
        out=args.out,
        exact=args.exact,
        seed=args.seed,
        amplitude=getattr(args, "amplitude", 0.5),
        method=args.method,
    )
    if cfg.N < 1:
        raise SystemExit("slowvary: --order must be at least 1")
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg


# -- model resolution ---------------------------------------------------------


def _load_model(cfg: RunConfig):
    """Returns (family, split_hint, cell) for the configured model source."""
    from . import models
    from .crosssection import OperatorFamily

    name = cfg.model
    cell = None
    if name == "walker-modal":
        family = models.random_walker_modal(exact=cfg.exact)
    elif name == "walker-physical":
        family = models.random_walker_physical(exact=cfg.exact)
    elif name.startswith("homogenise-"):
        expr = {
            "homogenise-constant": "constant",
            "homogenise-layered": "layered_cos",
            "homogenise-checkerboard": "checkerboard_smooth",
        }[name]
        n = cfg.grid[0]
        cell = models.CellProblem.from_expression(
            expr, n=n, amplitude=cfg.amplitude
        )
        family = models.homogenisation_cell(cell)
    else:
        path = Path(name)
        if not path.exists():
            raise SystemExit(
                f"slowvary: model {name!r} is neither a built-in "
                f"({', '.join(BUILTIN_MODELS)}) nor an existing file"
            )
        with open(path) as fh:
            data = json.load(fh)
        if "operators" in data:
            family = OperatorFamily.from_json(data, exact=cfg.exact)
        elif "K" in data or "K_expr" in data:
            cell = models.CellProblem.from_json(data)
            family = models.homogenisation_cell(cell)
        else:
            raise SystemExit(
                f"slowvary: {name} holds neither an operator family "
                "(key 'operators') nor a cell problem (key 'K'/'K_expr')"
            )
    if cfg.exact:
        if name not in BUILTIN_MODELS and not family.is_exact:
            raise SystemExit("slowvary: --exact requires a built-in model "
                             "or a rational-valued model file")
        if family.dimU > 8:
            raise SystemExit("slowvary: --exact supports dimU <= 8, "
                             f"got dimU = {family.dimU}")
    return family, cell


def _split_family(cfg: RunConfig, family, cell):
    from . import models
    from .crosssection import spectral_split

    if cell is not None:
        return models.cell_spectral_split(family, N=cfg.N, alpha=cfg.alpha)
    return spectral_split(family, N=cfg.N, alpha=cfg.alpha)


# -- report plumbing ----------------------------------------------------------


def _sig(x, digits=12):
    """Round to a fixed number of significant digits for stable reports."""
    import numpy as np

    if isinstance(x, dict):
        return {k: _sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sig(v, digits) for v in x]
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    if isinstance(x, complex):
        return [_sig(x.real, digits), _sig(x.imag, digits)]
    if isinstance(x, np.ndarray):
        return _sig(x.tolist(), digits)
    xf = float(x)
    if xf == 0 or not np.isfinite(xf):
        return 0.0 if xf == 0 else repr(xf)
    return float(f"{xf:.{digits}e}")


def _write_report(out: Path | None, report: dict, meta: dict) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out is None:
        return
    (out / "report.json").write_text(text)
    meta = dict(meta)
    meta["wallclock_unix"] = time.time()
    (out / "run_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )


def _fail(out, report, meta, code, check, message):
    report["pass"] = False
    report["error"] = {"check": check, "message": message}
    _write_report(out, report, meta)
    print(f"slowvary: FAIL [{check}] {message}", file=sys.stderr)
    return code


def _meta(cfg: RunConfig) -> dict:
    return {
        "argv": sys.argv[1:],
        "command": cfg.command,
        "model": cfg.model,
        "seed": cfg.seed,
        "python": sys.version.split()[0],
    }


def _coeff_table(model) -> dict:
    from fractions import Fraction

    from .multiindex import format_index, order

    table = {}
    graded = sorted(
        model.A.items(),
        key=lambda kv: (order(kv[0]), tuple(-c for c in kv[0])),
    )
    for n, An in graded:
        if model.is_exact:
            table[format_index(n)] = [
                [str(Fraction(v)) for v in row] for row in An.tolist()
            ]
        else:
            table[format_index(n)] = _sig(An)
    return table


# -- subcommands --------------------------------------------------------------


def cmd_reduce(cfg: RunConfig) -> int:
    import numpy as np

    from . import slowreduce, taylorsystem
    from .crosssection import validate_family
    from .errors import FamilyValidationError, NumericalCheckError

    meta = _meta(cfg)
    report: dict = {"command": "reduce", "model": cfg.model, "N": cfg.N,
                    "exact": cfg.exact, "method": cfg.method}
    try:
        family, cell = _load_model(cfg)
    except SystemExit as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID, "config", str(exc))
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))

    try:
        split = _split_family(cfg, family, cell)
        vrep = validate_family(family, cfg.N, alpha=cfg.alpha, split=split)
        model, basis = slowreduce.construct_reduction(
            family, cfg.N, split=split, tol=cfg.tol, method=cfg.method
        )
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))
    except NumericalCheckError as exc:
        return _fail(cfg.out, report, meta, EXIT_NUMERICAL,
                     type(exc).__name__, str(exc))

    famf = family.to_float() if family.is_exact else family
    scale = max(1.0, max(float(np.abs(np.asarray(op, dtype=float)).max())
                         for op in famf.ops.values()))
    threshold = cfg.tol * scale

    inv = slowreduce.check_invariance(family, model, basis)
    checks = {"invariance_residual": _sig(inv),
              "invariance_pass": bool(inv <= threshold)}

    nblock = len(basis.poly) * family.dimU
    if nblock <= _BLOCK_CHECK_LIMIT:
        block = taylorsystem.build_block_operator(famf, cfg.N)
        blockA = taylorsystem.build_block_A(
            model.to_float() if model.is_exact else model
        )
        fbasis = basis.to_float() if basis.is_exact else basis
        spec_dist = taylorsystem.block_spectrum_check(block, famf)
        sub_res = taylorsystem.verify_slow_subspace(block, blockA, fbasis)
        checks["block_spectrum_distance"] = _sig(spec_dist)
        checks["block_spectrum_pass"] = bool(spec_dist <= threshold * 100)
        checks["slow_subspace_residual"] = _sig(sub_res)
        checks["slow_subspace_pass"] = bool(sub_res <= threshold)
    else:
        checks["block_spectrum_distance"] = "skipped"
        checks["slow_subspace_residual"] = "skipped"

    report.update({
        "dimU": family.dimU,
        "M": family.M,
        "m": split.m,
        "alpha": _sig(split.alpha),
        "beta": _sig(split.beta) if np.isfinite(split.beta) else None,
        "gap_margin": _sig(split.beta - cfg.N * split.alpha)
        if np.isfinite(split.beta) else None,
        "spectrum_complete": split.spectrum_complete,
        "validation": {
            "binorm_residual": _sig(vrep.binorm_residual),
            "centre_invariance_residual": _sig(vrep.invariance_residual),
            "checks_passed": not vrep.residual_failures(threshold),
        },
        "coefficients": _coeff_table(model),
        "checks": checks,
    })
    ok = all(v for k, v in checks.items() if k.endswith("_pass"))
    ok = ok and report["validation"]["checks_passed"]
    report["pass"] = bool(ok)

    if cfg.out is not None:
        model.save(cfg.out / "model.json")
        basis.save(cfg.out / "basis.json")
    _write_report(cfg.out, report, meta)

    if split.m == 1:
        print(model.equation_text())
    for idx, mat in report["coefficients"].items():
        print(f"A_({idx}) = {mat}")
    if not ok:
        failing = [k for k, v in checks.items() if k.endswith("_pass") and not v]
        print(f"slowvary: FAIL {failing}", file=sys.stderr)
        return EXIT_NUMERICAL
    print("all checks passed")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    import numpy as np

    from .crosssection import validate_family
    from .errors import FamilyValidationError, NumericalCheckError

    meta = _meta(cfg)
    report: dict = {"command": "validate", "model": cfg.model, "N": cfg.N}
    try:
        family, cell = _load_model(cfg)
    except SystemExit as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID, "config", str(exc))
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))
    try:
        split = _split_family(cfg, family, cell)
        vrep = validate_family(family, cfg.N, alpha=cfg.alpha, split=split)
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))
    except NumericalCheckError as exc:
        return _fail(cfg.out, report, meta, EXIT_NUMERICAL,
                     type(exc).__name__, str(exc))
    report.update({
        "dimU": family.dimU,
        "M": family.M,
        "m": split.m,
        "alpha": _sig(split.alpha),
        "beta": _sig(split.beta) if np.isfinite(split.beta) else None,
        "centre_eigenvalues": _sig(split.centre_eigenvalues()),
        "spectrum_complete": split.spectrum_complete,
        "binorm_residual": _sig(vrep.binorm_residual),
        "centre_invariance_residual": _sig(vrep.invariance_residual),
        "pass": True,
    })
    _write_report(cfg.out, report, meta)
    print(f"model ok: m={split.m} centre mode(s), "
          f"gap beta={report['beta']}, alpha={report['alpha']}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    import numpy as np

    from . import simulate, slowreduce
    from .errors import FamilyValidationError, NumericalCheckError

    meta = _meta(cfg)
    report: dict = {"command": "simulate", "model": cfg.model, "N": cfg.N}
    try:
        family, cell = _load_model(cfg)
    except SystemExit as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID, "config", str(exc))
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))
    try:
        split = _split_family(cfg, family, cell)
        model, basis = slowreduce.construct_reduction(
            family, cfg.N, split=split, tol=cfg.tol, method=cfg.method
        )
        famf = family.to_float() if family.is_exact else family
        modelf = model.to_float() if model.is_exact else model

        L = float(cfg.wavelengths[0])
        lengths = (L,) * famf.M
        grid = tuple(cfg.grid) + (1,) * (famf.M - len(cfg.grid))
        V0 = split.V0 if not split.is_exact else np.asarray(
            split.V0, dtype=float)
        profile = simulate.plane_wave(lengths, grid, split.m)
        values0 = np.einsum("...m,dm->...d", profile, np.asarray(V0, float))
        field0 = simulate.MicroField(lengths, values0)

        res = simulate.emergence_error(
            famf, modelf, split, field0, T=cfg.T, dt=cfg.dt, samples=200
        )
        closure = simulate.closure_residual(res.micro, modelf, split)
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))
    except NumericalCheckError as exc:
        return _fail(cfg.out, report, meta, EXIT_NUMERICAL,
                     type(exc).__name__, str(exc))

    report.update({
        "box": list(lengths),
        "grid": list(grid),
        "t_skip": _sig(res.t_skip),
        "plateau": _sig(res.plateau()),
        "closure_ratio": _sig(closure.ratio),
        "pass": True,
    })
    if cfg.out is not None:
        simulate.write_frames(cfg.out / "frames.bin", res.micro)
        with open(cfg.out / "emergence.csv", "w") as fh:
            fh.write("t,relative_error\n")
            for t, e in zip(res.times, res.error):
                fh.write(f"{float(t)!r},{float(e)!r}\n")
    _write_report(cfg.out, report, meta)
    print(f"emergence plateau {report['plateau']:.3e}, "
          f"closure ratio {report['closure_ratio']:.3e} "
          f"(t_skip {report['t_skip']:.3g})")
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    from . import simulate, slowreduce
    from .errors import FamilyValidationError, NumericalCheckError

    meta = _meta(cfg)
    report: dict = {"command": "converge", "model": cfg.model, "N": cfg.N,
                    "wavelengths": list(cfg.wavelengths)}
    try:
        family, cell = _load_model(cfg)
    except SystemExit as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID, "config", str(exc))
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))
    try:
        split = _split_family(cfg, family, cell)
        model, _ = slowreduce.construct_reduction(
            family, cfg.N, split=split, tol=cfg.tol, method=cfg.method
        )
        famf = family.to_float() if family.is_exact else family
        modelf = model.to_float() if model.is_exact else model
        study = simulate.closure_order_study(
            famf, modelf, split, cfg.wavelengths,
            grid_points=cfg.grid[0],
        )
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))
    except NumericalCheckError as exc:
        return _fail(cfg.out, report, meta, EXIT_NUMERICAL,
                     type(exc).__name__, str(exc))

    if cfg.out is not None:
        with open(cfg.out / "orders.csv", "w") as fh:
            fh.write("wavelength,plateau\n")
            for L, p in zip(study.wavelengths, study.plateaus):
                fh.write(f"{float(L)!r},{float(p)!r}\n")

    report.update({
        "plateaus": _sig(study.plateaus),
        "degenerate": study.degenerate,
        "order": _sig(study.order) if study.order is not None else None,
        "expected_order": cfg.N + 1,
    })
    if study.degenerate:
        report["pass"] = True
        _write_report(cfg.out, report, meta)
        print("degenerate study: plateau at rounding floor, slope undefined")
        return EXIT_OK
    lo, hi = cfg.N + 0.5, cfg.N + 1.5
    ok = lo <= study.order <= hi
    report["pass"] = bool(ok)
    _write_report(cfg.out, report, meta)
    print(f"fitted closure order {study.order:.3f} "
          f"(expected {cfg.N + 1}, acceptable [{lo}, {hi}])")
    if not ok:
        print(f"slowvary: FAIL [closure_order] slope {study.order:.3f} "
              f"outside [{lo}, {hi}]", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_demo(cfg: RunConfig) -> int:
    from .errors import FamilyValidationError, NumericalCheckError

    meta = _meta(cfg)
    report: dict = {"command": "demo", "model": cfg.model}
    try:
        return _run_demo(cfg, report, meta)
    except FamilyValidationError as exc:
        return _fail(cfg.out, report, meta, EXIT_INVALID,
                     type(exc).__name__, str(exc))
    except NumericalCheckError as exc:
        return _fail(cfg.out, report, meta, EXIT_NUMERICAL,
                     type(exc).__name__, str(exc))


def _run_demo(cfg: RunConfig, report: dict, meta: dict) -> int:
    import numpy as np

    from . import models, slowreduce
    from .crosssection import spectral_split

    if cfg.model == "walker":
        family = models.random_walker_modal(exact=True)
        split = spectral_split(family, N=cfg.N)
        model, basis = slowreduce.construct_reduction(
            family, cfg.N, split=split
        )
        inv = slowreduce.check_invariance(family, model, basis)
        print("three-velocity walker, modal coordinates")
        print(model.equation_text())
        for idx, mat in _coeff_table(model).items():
            print(f"  A_({idx}) = {mat}")
        print(f"  invariance residual: {inv!r}")
        report.update({"coefficients": _coeff_table(model),
                       "invariance_residual": _sig(inv), "pass": True})
    else:
        expr = {"homogenise-constant": "constant",
                "homogenise-layered": "layered_cos"}[cfg.model]
        n = cfg.grid[0]
        cell = models.CellProblem.from_expression(
            expr, n=n, amplitude=cfg.amplitude
        )
        family = models.homogenisation_cell(cell)
        split = models.cell_spectral_split(family, N=2, alpha=cfg.alpha)
        model, _ = slowreduce.construct_reduction(family, 2, split=split)
        a20 = float(model.coefficient((2, 0))[0, 0])
        a02 = float(model.coefficient((0, 2))[0, 0])
        ratio = models.cell_gap_ratio(cell, split)
        print(f"diffusion cell problem: {expr}, grid {n}x{n}")
        print(model.equation_text())
        if expr == "layered_cos":
            a = cfg.amplitude
            print(f"  effective coefficients: harmonic mean "
                  f"{np.sqrt(1 - a * a):.6f} along the layering, "
                  f"arithmetic mean 1.0 across it")
        print(f"  A_(2,0) = {a20:.6f}, A_(0,2) = {a02:.6f}, "
              f"gap ratio {ratio:.3f}")
        report.update({"A20": _sig(a20), "A02": _sig(a02),
                       "gap_ratio": _sig(ratio), "pass": True})
    _write_report(cfg.out, report, meta)
    return EXIT_OK


_COMMANDS = {
    "reduce": cmd_reduce,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except SystemExit as exc:
        if exc.code and not isinstance(exc.code, int):
            print(exc.code, file=sys.stderr)
            return EXIT_INVALID
        raise
    return _COMMANDS[cfg.command](cfg)


if __name__ == "__main__":
    raise SystemExit(main())
