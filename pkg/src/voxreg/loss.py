"""The registration objective: windowed NCC + gradient smoothness.

total = lambda0 * (-ncc) + lambda1 * reg, minimized over the field.

NCC per window uses sums of deviations with an eps inside both
denominator square roots, so constant (zero-variance) windows
contribute 0.  Windows are edge-clamped: out-of-range samples replicate
the boundary voxel, which makes the window mean a 'nearest'-mode box
filter and gives the gradient a clean separable adjoint.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from ._interp import grid_coords, trilinear_with_grad
from .config import RegConfig
from .field import DispField
from .volume import GridMismatchError, Volume3

# added inside both denominator square roots; windows whose variance is
# far below this read as "no signal" and score ~0
NCC_EPS = 1e-5


@dataclass(frozen=True)
class LossReport:
    """One loss evaluation, decomposed."""

    ncc: float
    reg: float
    total: float
    lambda0: float
    lambda1: float


@dataclass(frozen=True)
class LossGrad:
    """d(total)/du on the field's grid, shape (nx,ny,nz,3), float64."""

    data: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError("loss gradient contains NaN or Inf")


def _require_same_grid(a: Volume3, b: Volume3):
    if a.dims != b.dims:
        raise GridMismatchError(f"volumes differ in dims: {a.dims} vs {b.dims}")
    if not np.allclose(a.spacing, b.spacing, rtol=0.0, atol=1e-9):
        raise GridMismatchError(
            f"volumes differ in spacing: {a.spacing} vs {b.spacing}")


def _box_sum(x, window):
    # clamped-window sum (with multiplicity) = 'nearest' box mean * slots
    return uniform_filter(x, size=window, mode="nearest") * float(window ** 3)


def _box_sum_adjoint_axis(z, radius, axis):
    """Adjoint of the edge-clamped 1D box sum along one axis.

    Forward: y_i = sum_{d=-r..r} x_{clip(i+d)}.  The adjoint scatters
    each z_i back to the voxels its window slots clipped to; interior
    voxels receive a plain box sum, the two edge voxels additionally
    absorb everything that clipped onto them.
    """
    zm = np.moveaxis(z, axis, 0)
    out = np.zeros_like(zm)
    L = zm.shape[0]
    for d in range(-radius, radius + 1):
        if d >= 0:
            if d < L:
                out[d:] += zm[:L - d]
                if d > 0:
                    out[L - 1] += zm[L - d:].sum(axis=0)
            else:
                out[L - 1] += zm.sum(axis=0)
        else:
            e = -d
            if e < L:
                out[:L - e] += zm[e:]
                out[0] += zm[:e].sum(axis=0)
            else:
                out[0] += zm.sum(axis=0)
    return np.moveaxis(out, 0, axis)


def _box_sum_adjoint(z, window):
    r = window // 2
    for ax in range(3):
        z = _box_sum_adjoint_axis(z, r, ax)
    return z


class _NccPlan:
    """Precomputed fixed-image window statistics, reused across iterations."""

    def __init__(self, b, window, mode):
        self.window = int(window)
        self.mode = mode
        self.b = b
        if mode == "local":
            self.sb = _box_sum(b, window)
            self.sbb = _box_sum(b * b, window)
            self.n = float(window ** 3)
        else:
            self.ybar = b.mean(dtype=np.float64)
            bc = b - self.ybar
            self.bc = bc
            self.varb = float((bc * bc).sum(dtype=np.float64))

    # returns (ncc_value, dncc_mean/da) with the gradient optional
    def value_and_grad(self, a, want_grad):
        if self.mode == "local":
            return self._local(a, want_grad)
        return self._global(a, want_grad)

    def _local(self, a, want_grad):
        w, n = self.window, self.n
        sa = _box_sum(a, w)
        saa = _box_sum(a * a, w)
        sab = _box_sum(a * self.b, w)
        cross = sab - sa * self.sb / n
        vara = saa - sa * sa / n
        varb = self.sbb - self.sb * self.sb / n
        denom = np.sqrt(vara + NCC_EPS) * np.sqrt(varb + NCC_EPS)
        ncc = cross / denom
        value = float(ncc.mean(dtype=np.float64))
        if not want_grad:
            return value, None
        # d ncc_c / d a(q) = mu_c(q) * [b(q)*alpha_c + a(q)*beta_c + gamma_c];
        # summing over windows c is the adjoint of the clamped box sum
        alpha = 1.0 / denom
        beta = -ncc / (vara + NCC_EPS)
        xbar = sa / n
        ybar = self.sb / n
        gamma = -(ybar * alpha + xbar * beta)
        grad = (self.b * _box_sum_adjoint(alpha, w)
                + a * _box_sum_adjoint(beta, w)
                + _box_sum_adjoint(gamma, w)) / a.size
        return value, grad

    def _global(self, a, want_grad):
        xbar = a.mean(dtype=np.float64)
        ac = a - xbar
        cross = float((ac * self.bc).sum(dtype=np.float64))
        vara = float((ac * ac).sum(dtype=np.float64))
        denom = np.sqrt(vara + NCC_EPS) * np.sqrt(self.varb + NCC_EPS)
        value = cross / denom
        if not want_grad:
            return value, None
        grad = self.bc / denom - (value / (vara + NCC_EPS)) * ac
        return value, grad


def local_ncc(a: Volume3, b: Volume3, window: int = 9) -> float:
    """Mean over voxels of per-window NCC, in [-1, 1].

    Every voxel centers one window; windows are edge-clamped.  Constant
    windows contribute 0 through the eps-guarded denominator.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    _require_same_grid(a, b)
    plan = _NccPlan(b.data.astype(np.float64), window, "local")
    value, _ = plan.value_and_grad(a.data.astype(np.float64), False)
    return value


def global_ncc(a: Volume3, b: Volume3) -> float:
    """Single NCC over the whole volume (one window spanning the grid)."""
    _require_same_grid(a, b)
    plan = _NccPlan(b.data.astype(np.float64), 0, "global")
    value, _ = plan.value_and_grad(a.data.astype(np.float64), False)
    return value


def grad_l2(u: DispField) -> float:
    """Smoothness term: squared forward differences of the field.

    Sum over 3 components x 3 axes of (u[.+1]-u[.])^2 with the last
    plane per axis contributing zero, normalized by the 9*Nvox slots.
    """
    return _grad_l2_arrays(u.data.astype(np.float64))[0]


def _grad_l2_arrays(ud, want_grad=False):
    nslots = 9.0 * ud[..., 0].size
    total = 0.0
    grad = np.zeros_like(ud) if want_grad else None
    for c in range(3):
        comp = ud[..., c]
        for ax in range(3):
            d = np.diff(comp, axis=ax)
            total += float((d * d).sum(dtype=np.float64))
            if want_grad:
                # d/du of sum(d^2): +2d flows to the right neighbor, -2d here
                sl_lo = [slice(None)] * 3
                sl_hi = [slice(None)] * 3
                sl_lo[ax] = slice(0, -1)
                sl_hi[ax] = slice(1, None)
                grad[(*sl_lo, c)] -= 2.0 * d
                grad[(*sl_hi, c)] += 2.0 * d
    if want_grad:
        grad /= nslots
    return total / nslots, grad


def _warp_with_grad(moving64, ud):
    x, y, z = grid_coords(ud.shape[:3])
    return trilinear_with_grad(moving64, x + ud[..., 0], y + ud[..., 1],
                               z + ud[..., 2])


def _loss_arrays(moving64, plan, ud, cfg, want_grad):
    """Core evaluation on raw float64 arrays; used by the optimizer loop."""
    aw, gx, gy, gz = _warp_with_grad(moving64, ud)
    ncc, dncc_da = plan.value_and_grad(aw, want_grad)
    reg, dreg = _grad_l2_arrays(ud, want_grad)
    total = cfg.lambda0 * (-ncc) + cfg.lambda1 * reg
    report = LossReport(ncc=float(ncc), reg=float(reg), total=float(total),
                        lambda0=cfg.lambda0, lambda1=cfg.lambda1)
    if not want_grad:
        return report, None
    grad = np.empty_like(ud)
    grad[..., 0] = dncc_da * gx
    grad[..., 1] = dncc_da * gy
    grad[..., 2] = dncc_da * gz
    grad *= -cfg.lambda0
    grad += cfg.lambda1 * dreg
    return report, grad


def _as_plan(fixed: Volume3, cfg: RegConfig) -> "_NccPlan":
    return _NccPlan(fixed.data.astype(np.float64), cfg.ncc_window, cfg.ncc_mode)


def total_loss(moving: Volume3, fixed: Volume3, u: DispField,
               cfg: RegConfig | None = None) -> LossReport:
    """Warp moving by u (linear) and evaluate the weighted objective."""
    cfg = cfg or RegConfig()
    _require_same_grid(moving, fixed)
    if fixed.dims != u.dims:
        raise GridMismatchError(f"field dims {u.dims} != image dims {fixed.dims}")
    report, _ = _loss_arrays(moving.data.astype(np.float64), _as_plan(fixed, cfg),
                             u.data.astype(np.float64), cfg, False)
    return report


def loss_gradient(moving: Volume3, fixed: Volume3, u: DispField,
                  cfg: RegConfig | None = None) -> tuple[LossReport, LossGrad]:
    """Objective plus its analytic gradient with respect to the field.

    The NCC part chains the per-window NCC derivative through trilinear
    sampling (image spatial gradient at the warped position; zero where
    the lookup clamped); the smoothness part applies the adjoint of the
    forward-difference stencil.
    """
    cfg = cfg or RegConfig()
    _require_same_grid(moving, fixed)
    if fixed.dims != u.dims:
        raise GridMismatchError(f"field dims {u.dims} != image dims {fixed.dims}")
    report, grad = _loss_arrays(moving.data.astype(np.float64), _as_plan(fixed, cfg),
                                u.data.astype(np.float64), cfg, True)
    return report, LossGrad(grad)
