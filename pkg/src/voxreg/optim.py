"""Adam on the raw displacement field, per level and across the cascade."""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._interp import grid_coords, trilinear_with_grad
from .bilateral import BFParams, bilateral_filter
from .config import RegConfig
from .field import DispField, identity_field, upsample2
from .loss import GridMismatchError, _as_plan, _loss_arrays
from .volume import Volume3, downsample2

TRACE_COLUMNS = ("level", "iter", "ncc", "reg", "total")


@dataclass(frozen=True)
class AdamState:
    """First/second-moment accumulators and the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, shape) -> "AdamState":
        return cls(np.zeros(shape, dtype=np.float64),
                   np.zeros(shape, dtype=np.float64), 0)


@dataclass
class LossTrace:
    """Per-iteration loss rows: (level, iter, ncc, reg, total)."""

    rows: list = dc_field(default_factory=list)

    def append(self, level, it, report):
        self.rows.append((int(level), int(it), report.ncc, report.reg, report.total))

    def extend(self, other: "LossTrace"):
        self.rows.extend(other.rows)

    def totals(self):
        return [r[4] for r in self.rows]

    def to_csv(self, path):
        with open(path, "w") as f:
            f.write(",".join(TRACE_COLUMNS) + "\n")
            for level, it, ncc, reg, total in self.rows:
                f.write(f"{level},{it},{ncc:.10g},{reg:.10g},{total:.10g}\n")


def adam_step(param, grad, state: AdamState, lr, beta1=0.9, beta2=0.999,
              eps=1e-8):
    """One bias-corrected Adam update; returns (new_param, new_state)."""
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if param.shape != grad.shape:
        raise ValueError(f"param shape {param.shape} != grad shape {grad.shape}")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    new_param = param - lr * mhat / (np.sqrt(vhat) + eps)
    return new_param, AdamState(m, v, t)


def _compose_with_jac(carry_ud, r_ud):
    """Total field w(p) = r(p) + carry(p + r(p)) plus d(carry)/dx there.

    Returns (w, jac) with jac[i][j] = d carry_i / d x_j sampled at the
    displaced positions — exactly what the chain rule needs to push a
    gradient in w back onto the residual r.
    """
    x, y, z = grid_coords(r_ud.shape[:3])
    wx = x + r_ud[..., 0]
    wy = y + r_ud[..., 1]
    wz = z + r_ud[..., 2]
    w = r_ud.copy()
    jac = [[None] * 3 for _ in range(3)]
    for i in range(3):
        ci, dx, dy, dz = trilinear_with_grad(carry_ud[..., i], wx, wy, wz)
        w[..., i] += ci
        jac[i][0], jac[i][1], jac[i][2] = dx, dy, dz
    return w, jac


def _optimize_residual(moving64, plan, carry_ud, cfg, iterations, level):
    """Adam on a fresh residual r composed onto a frozen carry field.

    The objective is the true one — warp(moving, compose(carry, r)) —
    so the gradient in the total field w is pulled back through the
    composition: dL/dr_j = dL/dw_j + sum_i dL/dw_i * dcarry_i/dx_j.
    With a zero carry this reduces to plain optimization of w itself.
    Returns (best total field as float64, trace).
    """
    shape = moving64.shape + (3,)
    r_ud = np.zeros(shape, dtype=np.float64)
    state = AdamState.fresh(shape)
    trace = LossTrace()
    best_w = None
    best_total = math.inf

    for it in range(iterations):
        if carry_ud is not None:
            w, jac = _compose_with_jac(carry_ud, r_ud)
        else:
            w, jac = r_ud, None
        report, gw = _loss_arrays(moving64, plan, w, cfg, True)
        if not math.isfinite(report.total):
            raise FloatingPointError(
                f"non-finite loss at level {level}, iteration {it}: "
                f"ncc={report.ncc}, reg={report.reg}")
        trace.append(level, it, report)
        if report.total < best_total:
            best_total = report.total
            best_w = w.copy()
        if jac is None:
            grad = gw
        else:
            grad = gw.copy()
            for j in range(3):
                for i in range(3):
                    grad[..., j] += gw[..., i] * jac[i][j]
        r_ud, state = adam_step(r_ud, grad, state, cfg.learning_rate,
                                cfg.beta1, cfg.beta2, cfg.adam_eps)

    return best_w, trace


def register_level(moving: Volume3, fixed: Volume3, u_init: DispField,
                   cfg: RegConfig | None = None, iterations: int | None = None,
                   level: int = 1) -> tuple[DispField, LossTrace]:
    """Optimize the field at one resolution, keeping the best iterate seen.

    u_init enters as the frozen carry of a residual parameterization:
    the returned field is compose(u_init, r) for the best residual r.
    iterations defaults to the config's finest-level count.  The trace
    gets one row per executed iteration (the loss of the iterate the
    step departed from), tagged with `level` (the downsample factor).
    """
    cfg = cfg or RegConfig()
    if moving.dims != fixed.dims or fixed.dims != u_init.dims:
        raise GridMismatchError(
            f"level grids disagree: moving {moving.dims}, fixed {fixed.dims}, "
            f"field {u_init.dims}")
    if iterations is None:
        iterations = cfg.levels[-1][1]

    moving64 = moving.data.astype(np.float64)
    plan = _as_plan(fixed, cfg)
    carry_ud = u_init.data.astype(np.float64)
    best_w, trace = _optimize_residual(
        moving64, plan, carry_ud if np.any(carry_ud) else None, cfg,
        iterations, level)
    return (DispField(best_w.astype(np.float32), u_init.spacing, u_init.origin),
            trace)


def _bf_params(cfg: RegConfig, guide: Volume3) -> BFParams:
    lo = float(guide.data.min())
    hi = float(guide.data.max())
    sig_r = cfg.bf_sigma_range
    if sig_r is None:
        sig_r = max(0.1 * (hi - lo), 1e-6)
    radius = cfg.bf_radius
    if radius is None:
        radius = max(1, math.ceil(3.0 * cfg.bf_sigma_spatial))
    return BFParams(sigma_spatial=cfg.bf_sigma_spatial, sigma_range=sig_r,
                    radius=radius)


def register(moving: Volume3, fixed: Volume3,
             cfg: RegConfig | None = None) -> tuple[DispField, LossTrace]:
    """Coarse-to-fine registration of one pair.

    Builds 2x pyramids, then per level: upsample the carried field and
    optimize a fresh residual composed onto it (the level objective is
    the true loss of compose(carry, residual), differentiated through
    the composition).  The bilateral filter runs on the final field
    when bf_enabled (and per level behind bf_per_level).  If the whole
    cascade somehow ends worse than no motion at all, the zero field
    is returned instead.
    """
    cfg = cfg or RegConfig()
    if moving.dims != fixed.dims:
        raise GridMismatchError(
            f"moving dims {moving.dims} != fixed dims {fixed.dims}")

    # pyramid images keyed by downsample factor
    factors_needed = sorted({f for f, _ in cfg.levels}, reverse=True)
    pyr = {1: (moving, fixed)}
    f = 1
    while f < factors_needed[0]:
        m, x = pyr[f]
        f *= 2
        pyr[f] = (downsample2(m), downsample2(x))

    trace = LossTrace()
    carry: DispField | None = None
    carry_factor = None
    for factor, iters in cfg.levels:
        mov_f, fix_f = pyr[factor]
        if carry is None:
            carry_f = identity_field(fix_f.dims, fix_f.spacing, fix_f.origin)
        else:
            carry_f = carry
            cf = carry_factor
            while cf > factor:
                cf //= 2
                carry_f = upsample2(carry_f, pyr[cf][1].dims)
        carry, level_trace = register_level(mov_f, fix_f, carry_f, cfg, iters,
                                            level=factor)
        trace.extend(level_trace)
        carry_factor = factor
        if cfg.bf_per_level:
            carry = bilateral_filter(carry, fix_f, _bf_params(cfg, fix_f))

    assert carry is not None and carry.dims == fixed.dims
    if cfg.bf_enabled and not cfg.bf_per_level:
        carry = bilateral_filter(carry, fixed, _bf_params(cfg, fixed))

    # never hand back something worse than "don't move": keeps the
    # reported final loss <= the zero-field loss unconditionally
    moving64 = moving.data.astype(np.float64)
    plan = _as_plan(fixed, cfg)
    zero = identity_field(fixed.dims, fixed.spacing, fixed.origin)
    report0, _ = _loss_arrays(moving64, plan, zero.data.astype(np.float64), cfg, False)
    report1, _ = _loss_arrays(moving64, plan, carry.data.astype(np.float64), cfg, False)
    if report1.total > report0.total:
        return zero, trace
    return carry, trace
