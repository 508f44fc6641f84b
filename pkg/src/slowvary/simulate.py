"""Spectral simulation of micro and macro systems on periodic boxes.

Fields live on uniform periodic grids; spatial derivatives are evaluated
exactly in Fourier space, so for these linear systems every Fourier mode
evolves independently under the family symbol ``S(kappa) = sum_k L_k (i
kappa)^k``.  Time integration is classical fourth-order Runge-Kutta with a
step bounded by the fastest mode, which keeps the integrator honest as an
*approximation* whose accuracy can be checked against the per-mode matrix
exponential oracle.

The diagnostics here quantify how well a reduced model tracks the full
system: the emergence error between the projected micro solution and an
independently integrated macro solution, the closure residual of the macro
equation evaluated on projected micro data, and decay-rate fits for the
fast transients.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _rational as rat
from .crosssection import OperatorFamily, SpectralSplit
from .errors import InsufficientDecay, StabilityViolation
from .slowreduce import ReducedModel

__all__ = [
    "MicroField",
    "MacroField",
    "Trajectory",
    "plane_wave",
    "simulate_micro",
    "simulate_macro",
    "project",
    "emergence_error",
    "EmergenceResult",
    "closure_residual",
    "ClosureResult",
    "decay_rate_fit",
    "DecayFit",
    "symbol_matrix",
    "mode_evolution_oracle",
    "closure_order_study",
    "OrderStudy",
    "write_frames",
    "read_frames",
]

_GROWTH_LIMIT = 1e6


def _check_box(lengths, grid, values, ncomp_name):
    lengths = tuple(float(L) for L in lengths)
    grid = tuple(int(g) for g in grid)
    if len(lengths) != len(grid):
        raise ValueError("lengths and grid must have one entry per direction")
    for L in lengths:
        if L <= 0:
            raise ValueError("box lengths must be positive")
    for g in grid:
        if g < 1 or (g & (g - 1)):
            raise ValueError(f"grid sizes must be powers of two, got {g}")
    if values.shape[:-1] != grid:
        raise ValueError(
            f"values shape {values.shape} does not match grid {grid} + ({ncomp_name},)"
        )
    return lengths, grid


@dataclass
class MicroField:
    """Full-state field sampled on a periodic box; shape (*grid, dimU)."""

    lengths: tuple
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.lengths, self.grid = _check_box(
            self.lengths, self.values.shape[:-1], self.values, "dimU"
        )

    @property
    def dimU(self) -> int:
        return self.values.shape[-1]


@dataclass
class MacroField:
    """Slow-amplitude field sampled on a periodic box; shape (*grid, m)."""

    lengths: tuple
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.lengths, self.grid = _check_box(
            self.lengths, self.values.shape[:-1], self.values, "m"
        )

    @property
    def m(self) -> int:
        return self.values.shape[-1]


def plane_wave(lengths, grid, ncomp, component=0, mode=None, amplitude=1.0):
    """Sinusoidal profile in one component; returns a values array."""
    lengths = tuple(float(L) for L in lengths)
    grid = tuple(int(g) for g in grid)
    if mode is None:
        mode = (1,) + (0,) * (len(grid) - 1)
    axes = [
        np.arange(g) * (L / g) for g, L in zip(grid, lengths)
    ]
    coords = np.meshgrid(*axes, indexing="ij")
    phase = sum(
        2 * np.pi * mj * x / L for mj, x, L in zip(mode, coords, lengths)
    )
    values = np.zeros(grid + (ncomp,))
    values[..., component] = amplitude * np.sin(phase)
    return values


@dataclass
class Trajectory:
    """Uniformly sampled states of one run; values shape (nt, *grid, ncomp)."""

    times: np.ndarray
    values: np.ndarray
    lengths: tuple
    kind: str = "micro"

    @property
    def grid(self) -> tuple:
        return self.values.shape[1:-1]

    @property
    def ncomp(self) -> int:
        return self.values.shape[-1]

    def field(self, i: int):
        cls = MicroField if self.kind == "micro" else MacroField
        return cls(self.lengths, self.values[i])

    def rms(self) -> np.ndarray:
        axes = tuple(range(1, self.values.ndim))
        return np.sqrt(np.mean(self.values**2, axis=axes))

    def to_csv(self, path) -> None:
        """Long-format dump: one row per time and grid point."""
        grid = self.grid
        axes = [np.arange(g) * (L / g) for g, L in zip(grid, self.lengths)]
        coords = np.meshgrid(*axes, indexing="ij")
        flat_coords = [c.reshape(-1) for c in coords]
        ncomp = self.ncomp
        with open(path, "w") as fh:
            head = ["t"] + [f"x{j + 1}" for j in range(len(grid))]
            head += [f"c{j}" for j in range(ncomp)]
            fh.write(",".join(head) + "\n")
            for it, t in enumerate(self.times):
                vals = self.values[it].reshape(-1, ncomp)
                for p in range(vals.shape[0]):
                    row = [repr(float(t))]
                    row += [repr(float(c[p])) for c in flat_coords]
                    row += [repr(float(v)) for v in vals[p]]
                    fh.write(",".join(row) + "\n")


# -- spectral machinery -------------------------------------------------------


def _wavevectors(lengths, grid):
    axes = [
        2 * np.pi * np.fft.fftfreq(g, d=L / g) for g, L in zip(grid, lengths)
    ]
    return np.meshgrid(*axes, indexing="ij")


def _symbol_table(ops: dict, kvecs, dim: int) -> np.ndarray:
    shape = kvecs[0].shape
    S = np.zeros(shape + (dim, dim), dtype=complex)
    for k, mat in ops.items():
        matf = rat.as_float(mat) if mat.dtype == object else mat
        factor = np.ones(shape, dtype=complex)
        for kv, e in zip(kvecs, k):
            if e:
                factor = factor * (1j * kv) ** e
        S += factor[..., None, None] * matf
    return S


def symbol_matrix(source, kappa) -> np.ndarray:
    """Fourier symbol at a single wavevector, as a dense complex matrix."""
    if isinstance(source, OperatorFamily):
        ops, dim = source.ops, source.dimU
    elif isinstance(source, ReducedModel):
        ops, dim = source.A, source.m
    else:
        raise TypeError("source must be an OperatorFamily or a ReducedModel")
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    kvecs = [np.array([kj]) for kj in kappa]
    return _symbol_table(ops, kvecs, dim)[0]


def mode_evolution_oracle(source, kappa, t: float, u0=None):
    """Exact single-mode propagator ``expm(S(kappa) t)``, or its action."""
    P = sla.expm(symbol_matrix(source, kappa) * float(t))
    if u0 is None:
        return P
    return P @ np.asarray(u0, dtype=complex)


def _filter_mask(grid) -> np.ndarray:
    """True on modes to keep: drops the highest third per direction."""
    masks = []
    for g in grid:
        f = np.abs(np.fft.fftfreq(g, d=1.0 / g))
        masks.append(f <= g // 3 if g > 2 else np.ones(g, dtype=bool))
    out = np.ones(grid, dtype=bool)
    for ax, mk in enumerate(masks):
        shape = [1] * len(grid)
        shape[ax] = grid[ax]
        out &= mk.reshape(shape)
    return out


def _integrate(S, values0, T, dt, samples, grid, lengths, kind):
    dim = values0.shape[-1]
    uhat = np.fft.fftn(values0, axes=tuple(range(len(grid))))
    flatS = S.reshape(-1, dim, dim)
    u = uhat.reshape(-1, dim)
    rho = float(np.abs(np.linalg.eigvals(flatS)).max()) if flatS.size else 0.0
    if dt is None:
        dt = 0.2 / max(rho, 1e-12)
    if T < 0:
        raise ValueError("integration span must be >= 0")
    span = T / samples if samples else 0.0
    out_t = np.zeros(samples + 1)
    out_v = np.zeros((samples + 1,) + grid + (dim,))
    out_t[0] = 0.0
    out_v[0] = values0
    amp0 = max(float(np.abs(u).max()), 1e-300)
    nsub = max(1, int(np.ceil(span / dt))) if span else 1
    h = span / nsub if span else 0.0

    def deriv(x):
        return np.einsum("mij,mj->mi", flatS, x)

    for s in range(1, samples + 1):
        for _ in range(nsub):
            k1 = deriv(u)
            k2 = deriv(u + 0.5 * h * k1)
            k3 = deriv(u + 0.5 * h * k2)
            k4 = deriv(u + h * k3)
            u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.abs(u).max() > _GROWTH_LIMIT * amp0:
            raise StabilityViolation(
                f"solution grew beyond {_GROWTH_LIMIT:.0e} times its initial "
                f"amplitude by t = {s * span:.6g}; reduce dt or check the model"
            )
        out_t[s] = s * span
        out_v[s] = np.real(
            np.fft.ifftn(u.reshape(S.shape[:-1]), axes=tuple(range(len(grid))))
        )
    return Trajectory(out_t, out_v, lengths, kind)


def simulate_micro(
    family: OperatorFamily,
    field0: MicroField,
    T: float,
    dt: float | None = None,
    samples: int = 50,
) -> Trajectory:
    """Integrate the full system from ``field0`` to time T.

    Returns ``samples + 1`` uniformly spaced snapshots including t = 0.
    The default step is ``0.2 / max |eig S(kappa)|`` over the grid's
    wavevectors; explicit ``dt`` overrides it (the integrator subdivides
    each sampling interval into whole steps of at most ``dt``).
    """
    fam = family.to_float() if family.is_exact else family
    if field0.dimU != fam.dimU:
        raise ValueError(f"field has {field0.dimU} components, family {fam.dimU}")
    if len(field0.lengths) != fam.M:
        raise ValueError(f"field box is {len(field0.lengths)}-dimensional, family {fam.M}")
    kvecs = _wavevectors(field0.lengths, field0.grid)
    S = _symbol_table(fam.ops, kvecs, fam.dimU)
    return _integrate(
        S, field0.values, float(T), dt, samples, field0.grid, field0.lengths, "micro"
    )


def simulate_macro(
    model: ReducedModel,
    field0: MacroField,
    T: float,
    dt: float | None = None,
    samples: int = 50,
    spectral_filter: bool | None = None,
) -> Trajectory:
    """Integrate the reduced model from ``field0`` to time T.

    Odd truncation orders leave the top of the resolved spectrum weakly
    amplified; by default (``spectral_filter=None``) the highest third of
    wavenumbers per direction is therefore truncated when ``model.N`` is
    odd, and kept when it is even.  Pass True or False to force.
    """
    if field0.m != model.m:
        raise ValueError(f"field has {field0.m} components, model {model.m}")
    if len(field0.lengths) != model.M:
        raise ValueError(f"field box is {len(field0.lengths)}-dimensional, model {model.M}")
    if spectral_filter is None:
        spectral_filter = bool(model.N % 2)
    kvecs = _wavevectors(field0.lengths, field0.grid)
    S = _symbol_table(model.A, kvecs, model.m)
    values0 = field0.values
    if spectral_filter:
        mask = _filter_mask(field0.grid)
        S = S * mask[..., None, None]
        vhat = np.fft.fftn(values0, axes=tuple(range(len(field0.grid))))
        vhat *= mask[..., None]
        values0 = np.real(
            np.fft.ifftn(vhat, axes=tuple(range(len(field0.grid))))
        )
    return _integrate(
        S, values0, float(T), dt, samples, field0.grid, field0.lengths, "macro"
    )


def project(split: SpectralSplit, values: np.ndarray) -> np.ndarray:
    """Slow amplitudes ``Z0.T u`` of full-state values (last axis dimU)."""
    Z0 = rat.as_float(split.Z0) if split.is_exact else split.Z0
    return values @ Z0


# -- diagnostics --------------------------------------------------------------


@dataclass
class EmergenceResult:
    """Relative mismatch between projected micro and integrated macro."""

    times: np.ndarray       # observation times (from the sync point on)
    error: np.ndarray       # relative error at those times
    t_skip: float
    micro: Trajectory
    macro: Trajectory

    def plateau(self) -> float:
        """Settled error level: median over the later half of the window."""
        tail = self.error[len(self.error) // 2 :]
        return float(np.median(tail)) if tail.size else 0.0


def emergence_error(
    family: OperatorFamily,
    model: ReducedModel,
    split: SpectralSplit,
    field0: MicroField,
    T: float,
    t_skip: float | None = None,
    samples: int = 200,
    dt: float | None = None,
) -> EmergenceResult:
    """Run micro and macro side by side and compare slow amplitudes.

    The macro run starts at ``t_skip`` (after the fast transient has died;
    default six decades of decay, capped at half the span) from the
    projected micro state at that instant.  The error at each later sample
    is ``||Z0.T u_micro - U_macro|| / ||U_macro||`` in the grid RMS norm.
    """
    if t_skip is None:
        beta = split.beta if np.isfinite(split.beta) else 1.0
        t_skip = min(0.5 * T, 6 * np.log(10.0) / max(beta, 1e-12))
    micro = simulate_micro(family, field0, T, dt=dt, samples=samples)
    isk = int(np.argmin(np.abs(micro.times - t_skip)))
    if isk >= samples:
        raise ValueError("t_skip leaves no observation window")
    t_skip = float(micro.times[isk])
    U_mic = project(split, micro.values)
    macro0 = MacroField(field0.lengths, U_mic[isk])
    macro = simulate_macro(
        model,
        macro0,
        float(micro.times[-1] - t_skip),
        dt=dt,
        samples=samples - isk,
    )
    space_axes = tuple(range(1, U_mic.ndim))
    diff = np.sqrt(np.mean((U_mic[isk:] - macro.values) ** 2, axis=space_axes))
    ref = np.sqrt(np.mean(macro.values**2, axis=space_axes))
    floor = 1e-12 * max(float(ref[0]), 1e-300)
    err = diff / np.maximum(ref, floor)
    return EmergenceResult(micro.times[isk:], err, t_skip, micro, macro)


@dataclass
class ClosureResult:
    """How well the projected micro data satisfies the macro equation."""

    times: np.ndarray        # interior sample times
    residual_rms: np.ndarray
    rate_rms: np.ndarray     # RMS of dU/dt, the comparison scale
    ratio: float             # median residual/rate over the later half

    def series_ratio(self) -> np.ndarray:
        return self.residual_rms / np.maximum(self.rate_rms, 1e-300)


def closure_residual(
    micro: Trajectory, model: ReducedModel, split: SpectralSplit
) -> ClosureResult:
    """Residual ``dU/dt - sum_n A_n d^n U`` on projected micro samples.

    The time derivative is a centred difference on the uniform sample
    grid; spatial derivatives are spectral.  Returned ratio is the median
    of residual over rate across the second half of the samples, where
    transients no longer dominate.
    """
    U = project(split, micro.values)
    nt = U.shape[0]
    if nt < 3:
        raise ValueError("need at least three samples for a centred difference")
    dt = float(micro.times[1] - micro.times[0])
    kvecs = _wavevectors(micro.lengths, micro.grid)
    S = _symbol_table(model.A, kvecs, model.m)
    space = tuple(range(1, U.ndim - 1))
    Uhat = np.fft.fftn(U, axes=space)
    rhs_hat = np.einsum("...ij,t...j->t...i", S, Uhat)
    rhs = np.real(np.fft.ifftn(rhs_hat, axes=space))
    dU = (U[2:] - U[:-2]) / (2 * dt)
    resid = dU - rhs[1:-1]
    axes = tuple(range(1, resid.ndim))
    res_rms = np.sqrt(np.mean(resid**2, axis=axes))
    rate_rms = np.sqrt(np.mean(dU**2, axis=axes))
    tail = slice(res_rms.size // 2, None)
    ratio = float(
        np.median(res_rms[tail] / np.maximum(rate_rms[tail], 1e-300))
    )
    return ClosureResult(micro.times[1:-1], res_rms, rate_rms, ratio)


@dataclass
class DecayFit:
    gamma: float
    times: np.ndarray
    norms: np.ndarray
    efoldings: float


def decay_rate_fit(micro: Trajectory, split: SpectralSplit) -> DecayFit:
    """Exponential rate of the fast (stable-projected) content.

    Projects out the slow subspace via ``u - V0 Z0.T u``, then fits a line
    to the log of the RMS norms over the samples above the relative noise
    floor.  Raises :class:`InsufficientDecay` unless the usable window
    spans at least three e-foldings.
    """
    V0 = rat.as_float(split.V0) if split.is_exact else split.V0
    fast = micro.values - project(split, micro.values) @ V0.T
    axes = tuple(range(1, fast.ndim))
    norms = np.sqrt(np.mean(fast**2, axis=axes))
    if norms[0] <= 0:
        raise InsufficientDecay("no fast content in the initial state")
    valid = norms > 1e-13 * norms[0]
    if valid.sum() < 3:
        raise InsufficientDecay("fewer than three samples above the noise floor")
    t = micro.times[valid]
    y = np.log(norms[valid])
    efold = float(y[0] - y[-1])
    if efold < 3.0:
        raise InsufficientDecay(
            f"only {efold:.2f} e-foldings of decay in the usable window; "
            "need at least 3 to fit a rate"
        )
    slope = np.polyfit(t, y, 1)[0]
    return DecayFit(float(-slope), t, norms[valid], efold)


# -- wavelength ladder --------------------------------------------------------


@dataclass
class OrderStudy:
    """Emergence plateau against wavelength, and the fitted closure order."""

    wavelengths: np.ndarray
    plateaus: np.ndarray
    pairwise: np.ndarray     # log2 plateau ratios between successive L
    order: float | None      # least-squares slope, None when degenerate
    degenerate: bool


def closure_order_study(
    family: OperatorFamily,
    model: ReducedModel,
    split: SpectralSplit,
    wavelengths,
    grid_points: int = 32,
    window: float = 12.0,
    samples: int = 240,
    component: int = 0,
    floor: float = 1e-12,
) -> OrderStudy:
    """Measure how the emergence plateau scales under wavelength doubling.

    Each run seeds the slowest box mode of a square domain of side L in
    the chosen slow component, waits out the transient, and records the
    plateau error over a fixed observation window.  A closure truncated at
    order N has symbol error ``O(kappa^{N+1})``, so halving the wavenumber
    should shrink the plateau by about ``2^{N+1}``.
    """
    fam = family.to_float() if family.is_exact else family
    V0 = rat.as_float(split.V0) if split.is_exact else split.V0
    beta = split.beta if np.isfinite(split.beta) else 1.0
    t_skip = 6 * np.log(10.0) / max(beta, 1e-12)
    plateaus = []
    for L in wavelengths:
        lengths = (float(L),) * fam.M
        grid = (int(grid_points),) + (1,) * (fam.M - 1)
        profile = plane_wave(lengths, grid, split.m, component=component)
        values0 = np.einsum("...m,dm->...d", profile, V0)
        field0 = MicroField(lengths, values0)
        res = emergence_error(
            fam, model, split, field0, T=t_skip + window,
            t_skip=t_skip, samples=samples,
        )
        plateaus.append(res.plateau())
    plateaus = np.asarray(plateaus)
    wl = np.asarray([float(L) for L in wavelengths])
    degenerate = bool((plateaus < floor).any())
    if degenerate:
        return OrderStudy(wl, plateaus, np.array([]), None, True)
    logs = np.log2(plateaus)
    pairwise = -(np.diff(logs) / np.diff(np.log2(wl)))
    order = float(-np.polyfit(np.log2(wl), logs, 1)[0])
    return OrderStudy(wl, plateaus, pairwise, order, False)


# -- binary frame export ------------------------------------------------------

_MAGIC = b"SVFRAME1"


def write_frames(path, traj: Trajectory) -> None:
    """Binary trajectory dump: little-endian f64 frames with a fixed header."""
    grid = traj.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", 1, len(grid), traj.ncomp))
        fh.write(struct.pack(f"<{len(grid)}I", *grid))
        fh.write(struct.pack(f"<{len(grid)}d", *traj.lengths))
        fh.write(struct.pack("<Q", len(traj.times)))
        kind = traj.kind.encode()[:8].ljust(8, b"\0")
        fh.write(kind)
        for t, frame in zip(traj.times, traj.values):
            fh.write(struct.pack("<d", float(t)))
            fh.write(np.ascontiguousarray(frame, dtype="<f8").tobytes())


def read_frames(path) -> Trajectory:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path} is not a frame file")
        _, M, ncomp = struct.unpack("<III", fh.read(12))
        grid = struct.unpack(f"<{M}I", fh.read(4 * M))
        lengths = struct.unpack(f"<{M}d", fh.read(8 * M))
        (nframes,) = struct.unpack("<Q", fh.read(8))
        kind = fh.read(8).rstrip(b"\0").decode()
        times = np.zeros(nframes)
        values = np.zeros((nframes,) + grid + (ncomp,))
        count = int(np.prod(grid)) * ncomp
        for i in range(nframes):
            (times[i],) = struct.unpack("<d", fh.read(8))
            buf = fh.read(8 * count)
            values[i] = np.frombuffer(buf, dtype="<f8").reshape(grid + (ncomp,))
    return Trajectory(times, values, tuple(lengths), kind or "micro")
