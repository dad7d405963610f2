"""Quadratic-distance registration by inverse-compositional Gauss-Newton.

The mean squared intensity difference over the valid overlap is
minimized coarse-to-fine.  Template gradient and steepest-descent rows
are precomputed once per pyramid level; each iteration warps the source,
solves the damped 8x8 normal equations, and composes the inverse of the
incremental warp onto the current estimate.  Steps that worsen the score
are rolled back under increasing damping, so the accepted trajectory is
monotone up to the damping epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyOverlap, SingularHessian
from .geometry import Homography, invert, warp_jacobian_identity
from .imaging import GrayImage, pyramid

_MONOTONE_EPS = 1e-9      # relative score increase attributable to damping
_MAX_REJECTS = 5          # consecutive damped retries before the level ends
_DAMPING_CEILING = 1e12


@dataclass(frozen=True)
class QDOptions:
    max_iterations_per_level: int = 50
    step_norm_tolerance: float = 1e-4
    pyramid_levels: int = 3
    hessian_damping: float = 1e-6   # relative Marquardt term
    coarse_shift_radius: int = 8    # integer pre-scan at the coarsest level

    def __post_init__(self):
        if self.max_iterations_per_level < 1 or self.pyramid_levels < 1:
            raise ValueError("iteration and level counts must be positive")
        if self.step_norm_tolerance <= 0 or self.hessian_damping < 0:
            raise ValueError("tolerance must be positive, damping nonnegative")


@dataclass(frozen=True)
class RegistrationResult:
    """Outcome of one pairwise registration.

    theta_hat maps source-frame coordinates onto target-frame
    coordinates; final_score is the mean squared difference for the
    quadratic-distance algorithm and mutual information in bits for the
    mutual-information algorithm.
    """

    theta_hat: Homography
    final_score: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.to_dict(),
            "final_score": self.final_score,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _raster_matrix(w_centered, tgt_shape, src_shape):
    th, tw = tgt_shape
    sh, sw = src_shape
    t_out = np.array([[1.0, 0.0, -(tw - 1) / 2.0],
                      [0.0, 1.0, -(th - 1) / 2.0],
                      [0.0, 0.0, 1.0]])
    t_src = np.array([[1.0, 0.0, (sw - 1) / 2.0],
                      [0.0, 1.0, (sh - 1) / 2.0],
                      [0.0, 0.0, 1.0]])
    return np.ascontiguousarray(t_src @ w_centered @ t_out)


def ssd(target: GrayImage, source: GrayImage, h: Homography) -> float:
    """Mean squared intensity difference over the valid overlap after
    resampling the source into the target frame through h (source ->
    target convention)."""
    m = _raster_matrix(invert(h).m, target.data.shape, source.data.shape)
    warped, mask = kernels.warp_bilinear(source.data, m,
                                         target.height, target.width)
    n = int(mask.sum())
    if n == 0:
        raise EmptyOverlap("no valid pixel in overlap")
    diff = (target.data - warped)[mask]
    return float(diff @ diff) / n


def _level_map(lvl: int, img_full: GrayImage, img_lvl: GrayImage) -> np.ndarray:
    """Centered level-l coordinates -> centered full-res coordinates
    (raster index i at level l sits at full-resolution raster 2^l * i)."""
    s = float(2 ** lvl)
    cxf, cyf = img_full.center
    cxl, cyl = img_lvl.center
    return np.array([[s, 0.0, s * cxl - cxf],
                     [0.0, s, s * cyl - cyf],
                     [0.0, 0.0, 1.0]])


def _steepest_descent_rows(tpl: GrayImage) -> np.ndarray:
    """(n_pixels, 8) steepest-descent image for the identity increment."""
    gy, gx = np.gradient(tpl.data, edge_order=1)
    h, w = tpl.data.shape
    cx, cy = tpl.center
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = (xs - cx).ravel()
    ys = (ys - cy).ravel()
    jac = warp_jacobian_identity(xs, ys)
    grad = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return np.einsum("nk,nkp->np", grad, jac)


def _coarse_shift_scan(tpl: np.ndarray, warped: np.ndarray,
                       mask: np.ndarray, radius: int):
    """Best integer (dx, dy) minimizing the masked mean squared
    difference between tpl and the shifted warped image."""
    best = None
    best_shift = (0, 0)
    h, w = tpl.shape
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            ty0, ty1 = max(0, -dy), min(h, h - dy)
            tx0, tx1 = max(0, -dx), min(w, w - dx)
            if ty1 <= ty0 or tx1 <= tx0:
                continue
            sub_t = tpl[ty0:ty1, tx0:tx1]
            sub_w = warped[ty0 + dy:ty1 + dy, tx0 + dx:tx1 + dx]
            sub_m = mask[ty0 + dy:ty1 + dy, tx0 + dx:tx1 + dx]
            n = int(sub_m.sum())
            if n == 0:
                continue
            d = (sub_t - sub_w)[sub_m]
            score = float(d @ d) / n
            if best is None or score < best:
                best = score
                best_shift = (dx, dy)
    return best_shift


def _solve_damped(hess: np.ndarray, rhs: np.ndarray, lam: float):
    """Marquardt-damped solve with escalation; (step, lam) or
    SingularHessian past the ceiling."""
    diag = np.diag(hess).copy()
    diag[diag <= 0.0] = 1.0
    while lam <= _DAMPING_CEILING:
        try:
            return np.linalg.solve(hess + np.diag(lam * diag), rhs), lam
        except np.linalg.LinAlgError:
            lam = max(lam * 10.0, 1e-12)
    raise SingularHessian("normal equations singular after damping retries")


def register_qd(target: GrayImage, source: GrayImage, init: Homography,
                opts: QDOptions = QDOptions()) -> RegistrationResult:
    """Estimate the transform mapping source coordinates onto target
    coordinates, starting from init (same convention)."""
    if min(target.width, target.height, source.width, source.height) < 32:
        raise ValueError("images must be at least 32x32")

    levels = opts.pyramid_levels
    while levels > 1 and (min(target.width, target.height,
                              source.width, source.height) >> (levels - 1)) < 32:
        levels -= 1
    tgt_levels = pyramid(target, levels)
    src_levels = pyramid(source, levels)

    w_full = invert(init).m.copy()   # template -> source warp
    total_iterations = 0
    converged = False
    final_score = 0.0

    for lvl in range(levels - 1, -1, -1):
        tpl = tgt_levels[lvl]
        src = src_levels[lvl]
        m_t = _level_map(lvl, target, tpl)
        m_s = _level_map(lvl, source, src)
        w_lvl = np.linalg.solve(m_s, w_full @ m_t)
        w_lvl = w_lvl / w_lvl[2, 2]

        def evaluate(w):
            warped, mask = kernels.warp_bilinear(
                src.data, _raster_matrix(w, tpl.data.shape, src.data.shape),
                tpl.height, tpl.width)
            valid = mask.ravel()
            n = int(valid.sum())
            if n == 0:
                return None, None, np.inf
            resid = np.where(valid, warped.ravel() - tpl.data.ravel(), 0.0)
            return resid, valid, float(resid @ resid) / n

        if lvl == levels - 1 and opts.coarse_shift_radius > 0:
            warped, mask = kernels.warp_bilinear(
                src.data, _raster_matrix(w_lvl, tpl.data.shape, src.data.shape),
                tpl.height, tpl.width)
            if not mask.any():
                raise EmptyOverlap("no valid pixel in overlap")
            dx, dy = _coarse_shift_scan(tpl.data, warped, mask,
                                        opts.coarse_shift_radius)
            w_lvl = w_lvl @ np.array([[1.0, 0.0, dx], [0.0, 1.0, dy],
                                      [0.0, 0.0, 1.0]])

        resid, valid, best_score = evaluate(w_lvl)
        if resid is None:
            raise EmptyOverlap("no valid pixel in overlap")
        w_best = w_lvl

        sd = _steepest_descent_rows(tpl)
        lam = opts.hessian_damping
        applied = 0
        rejects = 0
        lvl_converged = False

        while applied < opts.max_iterations_per_level and rejects <= _MAX_REJECTS:
            g = sd[valid]
            hess = g.T @ g
            rhs = sd.T @ resid
            step, lam = _solve_damped(hess, rhs, lam)
            if float(np.linalg.norm(step)) < opts.step_norm_tolerance:
                lvl_converged = True
                break
            inc = np.array([[1.0 + step[0], step[1], step[2]],
                            [step[3], 1.0 + step[4], step[5]],
                            [step[6], step[7], 1.0]])
            w_cand = w_best @ np.linalg.inv(inc)
            w_cand = w_cand / w_cand[2, 2]
            applied += 1
            total_iterations += 1
            cand_resid, cand_valid, cand_score = evaluate(w_cand)
            if cand_score <= best_score * (1.0 + _MONOTONE_EPS):
                w_best = w_cand
                resid, valid = cand_resid, cand_valid
                if cand_score < best_score:
                    best_score = cand_score
                rejects = 0
                lam = max(opts.hessian_damping, lam * 0.1)
            else:
                rejects += 1
                lam *= 10.0

        if lvl == 0:
            converged = lvl_converged
            final_score = best_score
        w_full = m_s @ w_best @ np.linalg.inv(m_t)
        w_full = w_full / w_full[2, 2]

    theta = invert(Homography(w_full))
    return RegistrationResult(theta_hat=theta, final_score=float(final_score),
                              iterations=total_iterations, converged=converged)
