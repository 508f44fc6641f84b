"""Operator families over the cross-section and their spectral splitting.

An evolution system ``du/dt = sum_k L_k d^k u / dx^k`` for fields with
``dimU`` components over ``M`` unbounded directions is described by the
finite family of cross-section operators ``L_k``, one square matrix per
derivative multi-index ``k``.  The base operator ``L_0`` generates the
cross-section dynamics; splitting its spectrum into a slow centre cluster
and a uniformly decaying remainder is the structural assumption every
reduction downstream rests on:

* centre eigenvalues satisfy ``|Re lam| <= alpha``,
* all remaining eigenvalues satisfy ``Re lam <= -beta < 0``,
* the gap is wide enough for the truncation order: ``beta > N * alpha``.

All pairings between left and right basis vectors are Euclidean dot
products.  Where a discretisation calls for quadrature weights they are
folded into the left basis ``Z0`` rather than kept as a separate metric.

Families are stored densely.  In exact mode the matrices are numpy object
arrays of ``fractions.Fraction``; numeric mode uses float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from . import _rational as rat
from .errors import (
    DefectiveNormalisation,
    GapViolation,
    MissingBaseOperator,
    NoCentreMode,
    UnstableMode,
)
from .multiindex import format_index, order, parse_index

__all__ = [
    "OperatorFamily",
    "SpectralSplit",
    "ValidationReport",
    "spectral_split",
    "validate_family",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-10

# Base operators larger than this fall back to sparse symmetric analysis.
_DENSE_EIG_LIMIT = 600


def _graded_key(idx: tuple[int, ...]):
    return (order(idx), tuple(-e for e in idx))


class OperatorFamily:
    """Finite map from derivative multi-indices to cross-section matrices.

    Parameters
    ----------
    ops : dict
        Mapping ``multi-index tuple -> (dimU, dimU) array``.  The zero
        index must be present; it is the base operator ``L_0``.
    label : str, optional
        Human-readable name carried through reports.

    The family is immutable by convention: hold the arrays, do not write
    to them.  ``is_exact`` is True when the matrices are Fraction-valued
    object arrays.
    """

    def __init__(self, ops: dict, label: str | None = None):
        if not ops:
            raise ValueError("operator family needs at least the base operator")
        keys = [tuple(int(e) for e in k) for k in ops]
        M = len(keys[0])
        for k in keys:
            if len(k) != M:
                raise ValueError(f"inconsistent multi-index dimensions: {keys[0]} vs {k}")
            if any(e < 0 for e in k):
                raise ValueError(f"negative derivative multi-index {k}")
        zero = (0,) * M
        if zero not in set(keys):
            raise MissingBaseOperator(
                f"family has no order-zero operator L_{zero}; "
                "the base operator is required"
            )
        first = np.asarray(ops[next(iter(ops))])
        exact = first.dtype == object
        dimU = first.shape[0]
        stored: dict[tuple[int, ...], np.ndarray] = {}
        for k_raw, mat in ops.items():
            k = tuple(int(e) for e in k_raw)
            arr = np.asarray(mat, dtype=object if exact else float)
            if arr.shape != (dimU, dimU):
                raise ValueError(
                    f"operator at {k} has shape {arr.shape}, expected {(dimU, dimU)}"
                )
            stored[k] = arr
        self.M = M
        self.dimU = dimU
        self.ops = dict(sorted(stored.items(), key=lambda kv: _graded_key(kv[0])))
        self.label = label

    @property
    def support(self) -> list[tuple[int, ...]]:
        """Multi-indices with a stored operator, in graded order."""
        return list(self.ops.keys())

    @property
    def zero_index(self) -> tuple[int, ...]:
        return (0,) * self.M

    @property
    def L0(self) -> np.ndarray:
        return self.ops[self.zero_index]

    @property
    def max_order(self) -> int:
        return max(order(k) for k in self.ops)

    @property
    def is_exact(self) -> bool:
        return self.L0.dtype == object

    def operator(self, k: tuple[int, ...]):
        """The matrix stored at ``k``, or None when absent (meaning zero)."""
        return self.ops.get(tuple(k))

    def to_float(self) -> "OperatorFamily":
        if not self.is_exact:
            return self
        return OperatorFamily(
            {k: rat.as_float(v) for k, v in self.ops.items()}, label=self.label
        )

    def to_exact(self) -> "OperatorFamily":
        if self.is_exact:
            return self
        return OperatorFamily(
            {k: rat.frac_matrix(v.tolist()) for k, v in self.ops.items()},
            label=self.label,
        )

    # -- JSON model documents ------------------------------------------

    def to_json(self) -> dict:
        """Model document; exact entries become ``"p/q"`` strings."""
        operators = {}
        for k, mat in self.ops.items():
            if self.is_exact:
                rows = [[str(x) for x in row] for row in mat.tolist()]
            else:
                rows = [[float(x) for x in row] for row in mat.tolist()]
            operators[format_index(k)] = rows
        doc = {"M": self.M, "dimU": self.dimU, "operators": operators}
        if self.label is not None:
            doc["label"] = self.label
        return doc

    @classmethod
    def from_json(cls, doc: dict, exact: bool = False) -> "OperatorFamily":
        """Parse a model document.

        Entries may be numbers or rational strings like ``"8/27"``; with
        ``exact=True`` all entries are kept as Fractions.
        """
        try:
            M = int(doc["M"])
            dimU = int(doc["dimU"])
            operators = doc["operators"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed model document: {exc}") from None
        if not isinstance(operators, dict) or not operators:
            raise ValueError("model document has no operators")
        ops = {}
        for key, rows in operators.items():
            idx = parse_index(key)
            if len(idx) != M:
                raise ValueError(f"operator key {key!r} does not have {M} components")
            if exact:
                mat = rat.frac_matrix(rows)
            else:
                mat = np.array(
                    [[float(Fraction(str(x))) for x in row] for row in rows], dtype=float
                )
            if mat.shape != (dimU, dimU):
                raise ValueError(
                    f"operator {key!r} has shape {mat.shape}, expected {(dimU, dimU)}"
                )
            ops[idx] = mat
        return cls(ops, label=doc.get("label"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path, exact: bool = False) -> "OperatorFamily":
        with open(path) as fh:
            return cls.from_json(json.load(fh), exact=exact)

    def __repr__(self) -> str:
        name = f" {self.label!r}" if self.label else ""
        return (
            f"OperatorFamily({name} M={self.M}, dimU={self.dimU}, "
            f"support={[format_index(k) for k in self.support]})"
        )


@dataclass
class SpectralSplit:
    """Centre/stable decomposition of a base operator.

    ``V0`` holds the right centre basis as columns, ``Z0`` the left basis
    with the binormalisation ``Z0.T @ V0 = I``.  ``A0 = Z0.T @ L0 @ V0`` is
    the centre block; it is kept exactly as computed and in particular is
    not forced diagonal (a defective centre cluster leaves it in Jordan-like
    form).  ``eigenvalues`` lists the spectrum of ``L0``; for very large
    symmetric operators only the computed extremes are recorded and
    ``spectrum_complete`` is False.
    """

    m: int
    V0: np.ndarray
    Z0: np.ndarray
    A0: np.ndarray
    alpha: float
    beta: float
    eigenvalues: np.ndarray
    spectrum_complete: bool = True

    @property
    def is_exact(self) -> bool:
        return self.V0.dtype == object

    def centre_eigenvalues(self) -> np.ndarray:
        lam = self.eigenvalues
        return lam[np.abs(lam.real) <= self.alpha]


def _classify(evals: np.ndarray, N: int, alpha: float | None):
    radius = float(np.abs(evals).max()) if evals.size else 0.0
    if alpha is None:
        alpha = 1e-9 * radius
    alpha = float(alpha)
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    centre = np.abs(evals.real) <= alpha
    m = int(centre.sum())
    if m == 0:
        raise NoCentreMode(
            f"no eigenvalue within the centre band |Re| <= {alpha:.6g}; "
            f"closest real part {evals.real[np.abs(evals.real).argmin()]:.6g}"
        )
    rest = evals[~centre]
    if rest.size and rest.real.max() > alpha:
        raise UnstableMode(
            f"eigenvalue with Re = {rest.real.max():.6g} > alpha = {alpha:.6g} "
            "outside the centre band grows in time"
        )
    beta = float(-rest.real.max()) if rest.size else np.inf
    if not beta > N * alpha:
        raise GapViolation(
            f"stable decay rate beta = {beta:.6g} does not exceed "
            f"N * alpha = {N * alpha:.6g}; the spectral gap is too narrow "
            f"for truncation order N = {N}"
        )
    return alpha, beta, m, centre


def _canonical_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    return V


def _binormalise(W: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Scale the left basis W so that the result Z satisfies Z.T V = I."""
    C = W.T @ V
    smin = np.linalg.svd(C, compute_uv=False).min()
    smax = np.linalg.svd(C, compute_uv=False).max()
    if smax == 0 or smin / smax < 1e-12:
        raise DefectiveNormalisation(
            "left/right centre bases pair singularly; "
            f"smallest singular value ratio {0.0 if smax == 0 else smin / smax:.3g}"
        )
    return W @ np.linalg.inv(C).T


def _invariant_basis(L0: np.ndarray, thr: float, m: int) -> np.ndarray:
    T, Q, sdim = sla.schur(
        L0, output="real", sort=lambda re, im: abs(re) <= thr
    )
    if sdim != m:
        raise DefectiveNormalisation(
            f"spectral reordering selected {sdim} modes where {m} were classified; "
            "the centre cluster is numerically inseparable"
        )
    return Q[:, :m]


def _dense_split(L0: np.ndarray, N: int, alpha: float | None) -> SpectralSplit:
    evals = sla.eigvals(L0)
    alpha, beta, m, centre = _classify(evals, N, alpha)
    centre_absre = np.abs(evals.real[centre]).max()
    # strictly separating threshold keeps the Schur reordering in agreement
    # with the eigenvalue classification
    thr = 0.5 * (centre_absre + beta) if np.isfinite(beta) else np.inf
    if not np.isfinite(thr):
        V0 = np.eye(L0.shape[0])[:, : L0.shape[0]]
        W = V0
    else:
        V0 = _invariant_basis(L0, thr, m)
        W = _invariant_basis(L0.T, thr, m)
    V0 = _canonical_signs(V0)
    Z0 = _binormalise(W, V0)
    A0 = Z0.T @ L0 @ V0
    return SpectralSplit(m, V0, Z0, A0, alpha, beta, evals, True)


def _exact_split(L0x: np.ndarray, N: int, alpha: float | None) -> SpectralSplit:
    L0f = rat.as_float(L0x)
    evals = sla.eigvals(L0f)
    alpha, beta, m, centre = _classify(evals, N, alpha)
    radius = float(np.abs(evals).max()) if evals.size else 0.0
    lam_centre = evals[centre]
    if np.abs(lam_centre.imag).max(initial=0.0) > max(1e-9 * max(radius, 1.0), alpha):
        raise ValueError(
            "exact mode supports only real rational centre eigenvalues; "
            "use the float path for oscillatory centre clusters"
        )
    # distinct rational candidates for the centre eigenvalues
    cands: list[Fraction] = []
    for lam in sorted(set(np.round(lam_centre.real, 9))):
        f = Fraction(float(lam)).limit_denominator(10**9)
        if f not in cands:
            cands.append(f)
    n = L0x.shape[0]
    blocks_V, blocks_Z = [], []
    for lam in cands:
        B = L0x - lam * rat.exact_eye(n)
        kern = rat.nullspace_exact(B)
        if kern.shape[1] == 0:
            raise ValueError(
                f"exact mode could not confirm {lam} as an eigenvalue of L0"
            )
        blocks_V.append(kern)
        blocks_Z.append(rat.nullspace_exact(B.T))
    V0 = np.concatenate(blocks_V, axis=1)
    Z0raw = np.concatenate(blocks_Z, axis=1)
    if V0.shape[1] != m:
        raise ValueError(
            "exact mode supports only semisimple centre clusters; "
            f"geometric multiplicity {V0.shape[1]} != algebraic {m}"
        )
    C = Z0raw.T @ V0
    try:
        Z0 = rat.solve_exact(C, Z0raw.T).T
    except ValueError:
        raise DefectiveNormalisation(
            "left/right centre bases pair singularly in exact arithmetic"
        ) from None
    A0 = Z0.T @ L0x @ V0
    return SpectralSplit(m, V0, Z0, A0, alpha, beta, evals, True)


def _sparse_symmetric_split(L0: np.ndarray, N: int, alpha: float | None) -> SpectralSplit:
    n = L0.shape[0]
    skew = np.abs(L0 - L0.T).max()
    if skew > 1e-10 * (1.0 + np.abs(L0).max()):
        raise ValueError(
            f"base operator of size {n} exceeds the dense eigenanalysis limit "
            f"({_DENSE_EIG_LIMIT}) and is not symmetric; cannot split its spectrum"
        )
    A = sparse.csr_matrix(L0)
    scale = max(float(np.abs(L0.diagonal()).max()), 1.0)
    lam_top = float(spla.eigsh(A, k=1, which="LA", return_eigenvectors=False)[0])
    lam_bot = float(spla.eigsh(A, k=1, which="SA", return_eigenvectors=False)[0])
    k = min(16, n - 2)
    # shift slightly above the spectrum top so the factorisation is regular
    # and the Lanczos sweep returns the eigenvalues closest to zero
    sigma = max(1e-6 * scale, 1e-3 * abs(lam_top), 1e-12)
    vals, vecs = spla.eigsh(A, k=k, sigma=sigma, which="LM")
    order_ = np.argsort(-vals)
    vals, vecs = vals[order_], vecs[:, order_]
    radius = max(abs(lam_top), abs(lam_bot))
    if alpha is None:
        alpha = 1e-9 * radius
    alpha = float(alpha)
    if lam_top > alpha:
        raise UnstableMode(
            f"largest eigenvalue Re = {lam_top:.6g} > alpha = {alpha:.6g}"
        )
    centre = np.abs(vals) <= alpha
    m = int(centre.sum())
    if m == 0:
        raise NoCentreMode(
            f"no eigenvalue within |Re| <= {alpha:.6g} among the {k} slowest modes"
        )
    if m == k:
        raise ValueError(
            f"all {k} computed slow eigenvalues sit inside the centre band; "
            "the sparse symmetric path cannot bound the gap"
        )
    beta = float(-vals[~centre].max())
    if not beta > N * alpha:
        raise GapViolation(
            f"stable decay rate beta = {beta:.6g} does not exceed "
            f"N * alpha = {N * alpha:.6g}"
        )
    V0 = _canonical_signs(vecs[:, centre])
    # symmetric operator: left basis equals right basis, already orthonormal
    Z0 = _binormalise(V0, V0)
    A0 = Z0.T @ (A @ V0)
    known = np.concatenate([vals, [lam_bot]]).astype(complex)
    return SpectralSplit(m, V0, Z0, A0, alpha, beta, known, False)


def spectral_split(family: OperatorFamily, N: int, alpha: float | None = None) -> SpectralSplit:
    """Split the base operator's spectrum into centre and stable parts.

    Parameters
    ----------
    family : OperatorFamily
        Source of the base operator ``L_0``.
    N : int
        Intended truncation order; the spectral gap must satisfy
        ``beta > N * alpha`` or :class:`GapViolation` is raised.
    alpha : float, optional
        Centre band half-width.  Defaults to ``1e-9`` times the spectral
        radius of ``L_0``, which captures exact zero modes while rejecting
        anything dynamically relevant.

    Returns
    -------
    SpectralSplit

    Raises
    ------
    NoCentreMode, UnstableMode, GapViolation, DefectiveNormalisation
    """
    if N < 0:
        raise ValueError("truncation order must be >= 0")
    L0 = family.L0
    if family.is_exact:
        return _exact_split(L0, N, alpha)
    if family.dimU > _DENSE_EIG_LIMIT:
        return _sparse_symmetric_split(L0, N, alpha)
    return _dense_split(L0, N, alpha)


@dataclass
class ValidationReport:
    """Quantities checked when admitting a family for reduction."""

    label: str | None
    M: int
    dimU: int
    N: int
    m: int
    alpha: float
    beta: float
    gap_margin: float
    binorm_residual: float
    invariance_residual: float
    support: list = field(default_factory=list)
    eigenvalues: np.ndarray | None = None

    def residual_failures(self, tol: float = DEFAULT_TOL) -> list[str]:
        out = []
        if self.binorm_residual > tol:
            out.append(
                f"binormalisation residual {self.binorm_residual:.3g} exceeds {tol:.3g}"
            )
        if self.invariance_residual > tol:
            out.append(
                f"centre invariance residual {self.invariance_residual:.3g} "
                f"exceeds {tol:.3g}"
            )
        return out


def validate_family(
    family: OperatorFamily,
    N: int,
    alpha: float | None = None,
    split: SpectralSplit | None = None,
) -> ValidationReport:
    """Run the structural checks that admit a family for order-N reduction.

    Raises the spectral errors on structural failure; numerical residuals
    are returned in the report for the caller to judge against a tolerance.
    A precomputed ``split`` skips the eigen-decomposition.
    """
    if split is None:
        split = spectral_split(family, N, alpha)
    Vf = rat.as_float(split.V0) if split.is_exact else split.V0
    Zf = rat.as_float(split.Z0) if split.is_exact else split.Z0
    Af = rat.as_float(split.A0) if split.is_exact else split.A0
    L0f = rat.as_float(family.L0) if family.is_exact else family.L0
    binorm = float(np.abs(Zf.T @ Vf - np.eye(split.m)).max())
    invres = float(np.abs(L0f @ Vf - Vf @ Af).max())
    gap = split.beta - N * split.alpha
    return ValidationReport(
        label=family.label,
        M=family.M,
        dimU=family.dimU,
        N=N,
        m=split.m,
        alpha=split.alpha,
        beta=split.beta,
        gap_margin=float(gap),
        binorm_residual=binorm,
        invariance_residual=invres,
        support=[format_index(k) for k in family.support],
        eigenvalues=split.eigenvalues,
    )
