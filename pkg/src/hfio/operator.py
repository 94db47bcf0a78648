"""Discretization of the h-Fourier integral operator.

The operator acts by

    (F_h phi)(x) = (2 pi h)^(-n) iint e^(i (S(x,theta) - y.theta)/h)
                   a(x,theta) phi(y) dy dtheta

and its distribution kernel is the regularized theta-integral

    K(x, y; h) = (2 pi h)^(-n) int e^(i (S(x,theta) - y.theta)/h)
                 a(x,theta) dtheta.

The convention ``(2 pi h)^(-n)`` applies to every theta integral and no
prefactor to x/y integrals.

Two regimes share the same cutoff-ladder machinery:

* scalar kernel values use a wide theta box containing the cutoff decay
  (``sigma0`` inside the box), optionally with the IBP accelerator, and
  converge to pointwise values of the regularized integral;
* dense assembly ties the theta box to what the target/source grids can
  resolve (box half-width <= 0.5 h / spacing) and runs the ladder in the
  box-plateau regime (``sigma0`` a multiple of the box), converging to
  the band-limited kernel that acts correctly on grid functions.

Matrix entries are kept raw; quadrature weights are stored alongside so
``apply`` computes ``sum_j K[i,j] w_j phi_j`` and spectral routines can
form the L2-faithful symmetrization ``sqrt(w) K sqrt(w)``.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._jsonutil import canonical_dumps, load_json
from .core import Grid, ScalarField, as_h, make_grid
from .errors import (
    InvalidArgumentError,
    KernelUnconvergedWarning,
    MatrixTooLargeError,
)
from .oscillatory import CutoffSpec, IBPSpec, OscillatoryResult, osc_integral
from .phase import PhaseSpec
from .symbols import AmplitudeSpec

#: Environment override for the dense-matrix node cap.
MATRIX_CAP_ENV = "FIO_MAX_MATRIX"
DEFAULT_MATRIX_CAP = 4096

#: Fraction of the Nyquist rate used when tying boxes to grids.
RESOLVE_FRACTION = 0.5

#: Assembly ladder defaults (box-plateau regime).
ASSEMBLY_SIGMA_FACTOR = 4.0
ASSEMBLY_TOL = 1e-5
ASSEMBLY_K_MAX = 10

_CHUNK_BYTES = 64 * 2 ** 20


def matrix_cap() -> int:
    value = os.environ.get(MATRIX_CAP_ENV)
    return int(value) if value else DEFAULT_MATRIX_CAP


@dataclass(frozen=True)
class FIOSpec:
    """Phase + amplitude + semiclassical parameter (+ quadrature knobs).

    ``theta_grid``/``cutoff`` left as None select the documented
    per-operation policies; ``ibp`` defaults to disabled.
    """

    phase: PhaseSpec
    amplitude: AmplitudeSpec
    h: float
    theta_grid: Optional[Grid] = None
    cutoff: Optional[CutoffSpec] = None
    ibp: Optional[IBPSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "h", as_h(self.h))
        if self.phase.dim != self.amplitude.dim:
            raise InvalidArgumentError("phase and amplitude dims differ")
        if self.theta_grid is not None and \
                self.theta_grid.dim != self.phase.dim:
            raise InvalidArgumentError("theta grid dim mismatch")

    @property
    def dim(self) -> int:
        return self.phase.dim


@dataclass(frozen=True)
class KernelMatrix:
    """Raw kernel samples ``K[i, j] = K(x_i, y_j; h)`` plus quadrature.

    The spec-level matrix (quadrature-weighted columns) is
    ``weighted_entries``; ``raw`` keeps the unweighted kernel samples so
    both the L2 symmetrization and exports stay exact.
    """

    target_grid: Grid
    source_grid: Grid
    h: float
    raw: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=complex)
        expected = (self.target_grid.node_count, self.source_grid.node_count)
        if raw.shape != expected:
            raise InvalidArgumentError(
                f"kernel matrix shape {raw.shape}, expected {expected}")
        if not np.all(np.isfinite(raw.real)) or not np.all(
                np.isfinite(raw.imag)):
            raise InvalidArgumentError("kernel matrix has non-finite entries")
        object.__setattr__(self, "raw", raw)

    @property
    def weighted_entries(self) -> np.ndarray:
        return self.raw * self.source_grid.node_weight

    def l2_matrix(self) -> np.ndarray:
        """Quadrature-symmetrized matrix whose singular values estimate
        L2 singular values: ``sqrt(w_t) K sqrt(w_s)``."""
        wt = np.sqrt(self.target_grid.node_weight)
        ws = np.sqrt(self.source_grid.node_weight)
        return wt * self.raw * ws


def assembly_cutoff(theta_grid: Grid) -> CutoffSpec:
    """Box-plateau ladder for dense assembly: base scale a fixed multiple
    of the theta box so the cutoff converges (upward) to the box-limited
    kernel, with a matrix-level tolerance.  Used when the spec does not
    pin a cutoff; a user-pinned cutoff is honored verbatim (e.g. for
    fixed-scale regularized objects)."""
    return CutoffSpec(sigma0=ASSEMBLY_SIGMA_FACTOR * theta_grid.half_width,
                      k_max=ASSEMBLY_K_MAX, tol=ASSEMBLY_TOL)


def _sup_grad_theta(phase: PhaseSpec, x_half: float, theta_half: float,
                    n_axis: int = 17) -> float:
    ax = np.linspace(-x_half, x_half, n_axis)
    at = np.linspace(-theta_half, theta_half, n_axis)
    if phase.dim == 1:
        X, T = np.meshgrid(ax, at, indexing="ij")
        pts_x = X.ravel()[:, None]
        pts_t = T.ravel()[:, None]
    else:
        grids = np.meshgrid(ax, ax, at, at, indexing="ij")
        pts_x = np.stack([grids[0].ravel(), grids[1].ravel()], axis=-1)
        pts_t = np.stack([grids[2].ravel(), grids[3].ravel()], axis=-1)
    g = np.asarray(phase.grad_theta(pts_x, pts_t), float)
    return float(np.max(np.abs(g)))


def default_theta_grid(phase: PhaseSpec, h, target_grid: Grid,
                       source_grid: Grid,
                       resolve: float = RESOLVE_FRACTION) -> Grid:
    """Theta box tied to the grids: half-width at the largest size the
    source grid resolves (``resolve * h / spacing``), spacing fine enough
    for the worst theta-oscillation ``|dS/dtheta - y|`` on the boxes."""
    h = as_h(h)
    half = resolve * h / max(target_grid.spacing, source_grid.spacing)
    sup_gt = _sup_grad_theta(phase, target_grid.half_width, half)
    slope = sup_gt + source_grid.half_width
    spacing = resolve * h / max(slope, 1e-9)
    pts = int(np.ceil(2.0 * half / spacing)) + 1
    pts = max(pts, 9)
    if phase.dim == 1 and pts > 2_000_000 or phase.dim == 2 and pts > 512:
        raise MatrixTooLargeError("theta grid would be too fine; refine "
                                  "x/y grids or increase h")
    return make_grid(phase.dim, half, pts)


def _scalar_theta_grid(spec: FIOSpec, x: np.ndarray, y: np.ndarray) -> Grid:
    """Wide box for pointwise kernel values: contains the cutoff decay
    scale and the stationary set of theta -> S(x,theta) - y.theta."""
    cutoff = spec.cutoff or CutoffSpec()
    reach = float(np.sum(np.abs(x)) + np.sum(np.abs(y)))
    half = max(2.0 * cutoff.sigma0, 2.0 * reach + 4.0)
    sup_gt = _sup_grad_theta(spec.phase, float(np.max(np.abs(x))) + 1.0, half)
    slope = sup_gt + float(np.max(np.abs(y)))
    spacing = 0.25 * spec.h / max(slope, 1.0)
    pts = min(int(np.ceil(2 * half / spacing)) + 1, 400_001)
    pts = max(pts, 33)
    return make_grid(spec.dim, half, pts)


def kernel_value(spec: FIOSpec, x, y) -> OscillatoryResult:
    """Pointwise kernel value ``(2 pi h)^(-n) x`` regularized integral.

    Returns the full oscillatory result (value, ladder index, residual,
    convergence flags); an unconverged ladder warns and flags but still
    returns the last value.
    """
    x = np.asarray(x, float).reshape(spec.dim)
    y = np.asarray(y, float).reshape(spec.dim)
    grid = spec.theta_grid or _scalar_theta_grid(spec, x, y)

    def _xb(th):
        return np.broadcast_to(x, np.asarray(th).shape)

    def phase_fn(th):
        return np.asarray(spec.phase.func(_xb(th), th), float) \
            - np.sum(np.asarray(th) * y, axis=-1)

    def phase_grad(th):
        return np.asarray(spec.phase.grad_theta(_xb(th), th), float) - y

    def amp_fn(th):
        return np.asarray(spec.amplitude.func(_xb(th), th), complex)

    res = osc_integral(phase_fn, amp_fn, spec.h, grid,
                       cutoff=spec.cutoff, ibp=spec.ibp,
                       phase_grad=phase_grad)
    prefac = (2.0 * np.pi * spec.h) ** (-spec.dim)
    if not res.converged:
        warnings.warn("kernel value ladder unconverged; value flagged",
                      KernelUnconvergedWarning, stacklevel=2)
    return replace(res, value=prefac * res.value)


def _check_caps(*grids: Grid):
    cap = matrix_cap()
    for g in grids:
        if g.node_count > cap:
            raise MatrixTooLargeError(
                f"grid with {g.node_count} nodes exceeds cap {cap} "
                f"(override with {MATRIX_CAP_ENV})")


def _ladder_product(rows_amp_phase: np.ndarray, right: np.ndarray,
                    theta_nodes: np.ndarray, cutoff: CutoffSpec,
                    prefactor: float):
    """Cutoff ladder for ``prefactor * (E * g_k) @ R`` with per-row
    successive-difference control.  Returns the final matrix, per-row
    residuals, per-row convergence and the ladder index used."""
    E = rows_amp_phase
    prev = None
    residual = np.full(E.shape[0], np.inf)
    k_used = cutoff.k_max
    for k in range(cutoff.k_max + 1):
        g = cutoff.value(theta_nodes, cutoff.sigma(k))
        cur = prefactor * ((E * g[None, :]) @ right)
        if prev is not None:
            diff = np.linalg.norm(cur - prev, axis=1)
            # purely relative so the ladder is scaling-invariant
            # (amplitude c*a stops at the same rung as a)
            scale = np.linalg.norm(cur, axis=1)
            residual = diff / np.maximum(scale, 1e-300)
            residual[(diff == 0.0) & (scale == 0.0)] = 0.0
            if np.max(residual) <= cutoff.tol:
                k_used = k
                prev = cur
                break
        prev = cur
        k_used = k
    converged = residual <= cutoff.tol
    return prev, residual, converged, k_used


def assemble(spec: FIOSpec, target_grid: Grid,
             source_grid: Grid) -> KernelMatrix:
    """Dense kernel matrix on target x source nodes.

    The theta box follows the grid-tied policy unless the spec pins one;
    the cutoff ladder runs in the box-plateau regime with a matrix-level
    tolerance.  Rows whose ladder residual stays above tolerance are
    flagged in the metadata, never zeroed.
    """
    if target_grid.dim != spec.dim or source_grid.dim != spec.dim:
        raise InvalidArgumentError("grid dims do not match operator dim")
    _check_caps(target_grid, source_grid)
    theta_grid = spec.theta_grid or default_theta_grid(
        spec.phase, spec.h, target_grid, source_grid)
    cutoff = spec.cutoff or assembly_cutoff(theta_grid)

    xs = target_grid.nodes()
    ys = source_grid.nodes()
    ts = theta_grid.nodes()
    n_t, n_s, n_q = xs.shape[0], ys.shape[0], ts.shape[0]
    prefac = theta_grid.node_weight * (2.0 * np.pi * spec.h) ** (-spec.dim)

    # e^{-i y.theta / h} with source columns; shared across row chunks.
    right = np.exp(-1j * (ts @ ys.T) / spec.h)

    out = np.empty((n_t, n_s), dtype=complex)
    residual = np.empty(n_t)
    converged = np.zeros(n_t, dtype=bool)
    k_used = 0
    chunk = max(1, int(_CHUNK_BYTES / (16 * n_q)))
    for lo in range(0, n_t, chunk):
        hi = min(lo + chunk, n_t)
        xc = xs[lo:hi]
        phase_vals = np.asarray(
            spec.phase.func(xc[:, None, :], ts[None, :, :]), float)
        amp_vals = np.asarray(
            spec.amplitude.func(xc[:, None, :], ts[None, :, :]), complex)
        E = amp_vals * np.exp(1j * phase_vals / spec.h)
        blk, res, conv, k_blk = _ladder_product(E, right, ts, cutoff, prefac)
        out[lo:hi] = blk
        residual[lo:hi] = res
        converged[lo:hi] = conv
        k_used = max(k_used, k_blk)

    bad = np.flatnonzero(~converged)
    if bad.size:
        warnings.warn(f"{bad.size} kernel rows unconverged at ladder end",
                      KernelUnconvergedWarning, stacklevel=2)
    meta = {
        "phase": spec.phase.name, "amplitude": spec.amplitude.name,
        "h": spec.h, "theta_grid": theta_grid.to_meta(),
        "cutoff": {"shape": cutoff.shape, "sigma0": cutoff.sigma0,
                   "k_max": cutoff.k_max, "tol": cutoff.tol},
        "k_used": int(k_used),
        "max_row_residual": float(np.max(residual)),
        "unconverged_rows": [int(i) for i in bad[:32]],
        "unconverged_count": int(bad.size),
        "kind": "kernel",
    }
    return KernelMatrix(target_grid, source_grid, spec.h, out, meta)


def apply(M: KernelMatrix, phi: ScalarField) -> ScalarField:
    """Quadrature application ``(M phi)(x_i) = sum_j K[i,j] w_j phi_j``."""
    if phi.grid != M.source_grid:
        raise InvalidArgumentError("field grid does not match source grid")
    vals = M.raw @ (M.source_grid.node_weight * phi.values)
    return ScalarField(M.target_grid, vals)


def adjoint(M: KernelMatrix) -> KernelMatrix:
    """Adjoint kernel ``K*(y, x) = conj K(x, y)`` with grids swapped."""
    meta = dict(M.metadata)
    meta["kind"] = meta.get("kind", "kernel") + "-adjoint"
    return KernelMatrix(M.source_grid, M.target_grid, M.h,
                        M.raw.conj().T, meta)


def compose_ffstar(spec: FIOSpec, target_grid: Grid,
                   source_grid: Grid | None = None,
                   route: str = "direct") -> KernelMatrix:
    """Composition kernel of ``F_h F_h*`` on (x, x~).

    route="direct" integrates
    ``(2 pi h)^(-n) int e^{i(S(x,th)-S(x~,th))/h} a(x,th) conj a(x~,th)``
    with the same cutoff ladder; route="matrix" computes the y-quadrature
    ``sum_j w_j K(x, y_j) conj K(x~, y_j)`` from the assembled kernel.
    The two must agree; the acceptance tests check it.
    """
    source_grid = source_grid or target_grid
    if route == "matrix":
        M = assemble(spec, target_grid, source_grid)
        w = M.source_grid.node_weight
        comp = (M.raw * w) @ M.raw.conj().T
        meta = {"kind": "ffstar", "route": "matrix", "h": spec.h,
                "phase": spec.phase.name, "amplitude": spec.amplitude.name,
                "theta_grid": M.metadata["theta_grid"],
                "cutoff": M.metadata["cutoff"]}
        return KernelMatrix(target_grid, target_grid, spec.h, comp, meta)
    if route != "direct":
        raise InvalidArgumentError("route must be 'direct' or 'matrix'")

    _check_caps(target_grid, source_grid)
    theta_grid = spec.theta_grid or default_theta_grid(
        spec.phase, spec.h, target_grid, source_grid)
    cutoff = spec.cutoff or assembly_cutoff(theta_grid)
    xs = target_grid.nodes()
    ts = theta_grid.nodes()
    prefac = theta_grid.node_weight * (2.0 * np.pi * spec.h) ** (-spec.dim)
    phase_vals = np.asarray(
        spec.phase.func(xs[:, None, :], ts[None, :, :]), float)
    amp_vals = np.asarray(
        spec.amplitude.func(xs[:, None, :], ts[None, :, :]), complex)
    E = amp_vals * np.exp(1j * phase_vals / spec.h)
    comp, residual, converged, k_used = _ladder_product(
        E, E.conj().T, ts, cutoff, prefac)
    bad = np.flatnonzero(~converged)
    if bad.size:
        warnings.warn(f"{bad.size} composition rows unconverged",
                      KernelUnconvergedWarning, stacklevel=2)
    meta = {"kind": "ffstar", "route": "direct", "h": spec.h,
            "phase": spec.phase.name, "amplitude": spec.amplitude.name,
            "theta_grid": theta_grid.to_meta(),
            "cutoff": {"shape": cutoff.shape, "sigma0": cutoff.sigma0,
                       "k_max": cutoff.k_max, "tol": cutoff.tol},
            "k_used": int(k_used),
            "max_row_residual": float(np.max(residual)),
            "unconverged_count": int(bad.size)}
    return KernelMatrix(target_grid, target_grid, spec.h, comp, meta)


def compose_fstarf(spec: FIOSpec, target_grid: Grid,
                   source_grid: Grid) -> KernelMatrix:
    """Composition kernel of ``F_h* F_h`` on (y, y'):
    ``sum_i w_i conj K(x_i, y) K(x_i, y')`` (x-quadrature of the
    assembled kernel)."""
    M = assemble(spec, target_grid, source_grid)
    w = M.target_grid.node_weight
    comp = (M.raw.conj().T * w) @ M.raw
    meta = {"kind": "fstarf", "route": "matrix", "h": spec.h,
            "phase": spec.phase.name, "amplitude": spec.amplitude.name,
            "theta_grid": M.metadata["theta_grid"]}
    return KernelMatrix(source_grid, source_grid, spec.h, comp, meta)


# ---------------------------------------------------------------------------
# File formats: CSV view + binary sidecar for kernels, CSV for fields.

def save_kernel(M: KernelMatrix, basename: str) -> dict:
    """Write ``<basename>.csv`` (i, j, coords, Re, Im), ``<basename>.npz``
    (exact complex entries) and ``<basename>.json`` (metadata).  Returns
    the paths."""
    paths = {"csv": basename + ".csv", "npz": basename + ".npz",
             "json": basename + ".json"}
    xs = M.target_grid.nodes()
    ys = M.source_grid.nodes()
    dim = M.target_grid.dim
    with open(paths["csv"], "w") as fh:
        xcols = ",".join(f"x{d}" for d in range(dim))
        ycols = ",".join(f"y{d}" for d in range(dim))
        fh.write(f"i,j,{xcols},{ycols},re,im\n")
        for i in range(xs.shape[0]):
            row = M.raw[i]
            for j in range(ys.shape[0]):
                coords = ",".join(f"{c:.17g}" for c in xs[i]) + "," + \
                    ",".join(f"{c:.17g}" for c in ys[j])
                fh.write(f"{i},{j},{coords},{row[j].real:.17g},"
                         f"{row[j].imag:.17g}\n")
    np.savez_compressed(paths["npz"], raw=M.raw)
    meta = dict(M.metadata)
    meta.update({"h": M.h,
                 "target_grid": M.target_grid.to_meta(),
                 "source_grid": M.source_grid.to_meta()})
    with open(paths["json"], "w") as fh:
        fh.write(canonical_dumps(meta))
    return paths


def load_kernel(basename: str) -> KernelMatrix:
    meta = load_json(basename + ".json")
    raw = np.load(basename + ".npz")["raw"]
    tg = make_grid(**meta.pop("target_grid"))
    sg = make_grid(**meta.pop("source_grid"))
    h = meta.get("h")
    return KernelMatrix(tg, sg, float(h), raw, meta)


def save_field(phi: ScalarField, path: str) -> None:
    g = phi.grid
    nodes = g.nodes()
    with open(path, "w") as fh:
        fh.write(f"# dim={g.dim} half_width={g.half_width:.17g} "
                 f"points_per_axis={g.points_per_axis}\n")
        cols = ",".join(f"x{d}" for d in range(g.dim))
        fh.write(f"{cols},re,im\n")
        for node, v in zip(nodes, phi.values):
            coords = ",".join(f"{c:.17g}" for c in node)
            fh.write(f"{coords},{v.real:.17g},{v.imag:.17g}\n")


def load_field(path: str) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise InvalidArgumentError("field CSV missing grid header")
        parts = dict(kv.split("=") for kv in header[1:].split())
        grid = make_grid(int(parts["dim"]), float(parts["half_width"]),
                         int(parts["points_per_axis"]))
        fh.readline()  # column header
        rows = [line.strip().split(",") for line in fh if line.strip()]
    vals = np.array([complex(float(r[-2]), float(r[-1])) for r in rows])
    return ScalarField(grid, vals)
