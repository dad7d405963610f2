"""Mutual-information registration by stochastic gradient ascent.

Two estimators on purpose: the deterministic joint-histogram mutual
information (used for scoring and evaluation) and a Parzen-window
sample-pair estimate whose analytic derivative drives the ascent, after
Viola and Wells.  Each iteration draws two pixel-location samples from
the valid overlap, forms the kernel-weighted gradient, and composes a
small incremental warp onto the current estimate; per-group learning
rates decay as 1/sqrt(iteration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateSamples, EmptyOverlap
from .geometry import Homography, invert, warp_jacobian_identity
from .imaging import GrayImage, joint_histogram, warp
from .register_qd import RegistrationResult, _raster_matrix

_MAX_SAMPLE_ROUNDS = 64


@dataclass(frozen=True)
class LearningRates:
    """Per-parameter-group step sizes: translation entries are in pixels,
    the linear (rotation/scale/shear) block is dimensionless, and the
    perspective row is in 1/pixels.  Defaults were tuned on the
    procedural fixture textures and are recorded in benchmark reports."""

    translation: float = 40.0
    linear: float = 0.010
    perspective: float = 2.5e-7

    def as_vector(self) -> np.ndarray:
        lt, ll, lp = self.translation, self.linear, self.perspective
        return np.array([ll, ll, lt, ll, ll, lt, lp, lp])


@dataclass(frozen=True)
class MIOptions:
    sample_size_a: int = 64
    sample_size_b: int = 64
    parzen_sigma: float = 10.0
    learning_rates: LearningRates = field(default_factory=LearningRates)
    max_iterations: int = 500
    seed: int = 0
    bins: int = 64
    decay_t0: float = 100.0         # lr(t) = lr0 / sqrt(1 + t / decay_t0)
    momentum: float = 0.9           # EMA smoothing of the gradient stream
    plateau_window: int = 50
    plateau_tolerance: float = 0.35  # trailing mean corner step, px
    tail_average: int = 50           # Polyak tail: average the last k iterates
    starts: int = 4                  # parallel exploration streams
    explore_iterations: int = 80     # budget per stream before selection

    def __post_init__(self):
        if self.sample_size_a < 8 or self.sample_size_b < 8:
            raise ValueError("sample sizes must be at least 8")
        if self.parzen_sigma <= 0:
            raise ValueError("parzen_sigma must be positive")
        r = self.learning_rates
        if r.translation <= 0 or r.linear <= 0 or r.perspective <= 0:
            raise ValueError("all learning rates must be positive")
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if self.starts * self.explore_iterations >= self.max_iterations:
            raise ValueError("exploration would consume the whole budget")


@dataclass(frozen=True)
class EntropyEstimate:
    value: float        # bits
    estimator: str      # "histogram" or "parzen"


def entropy_histogram(img: GrayImage, mask, bins: int = 64) -> EntropyEstimate:
    """Shannon entropy of the masked intensity histogram, in bits."""
    if mask is None:
        mask = np.ones(img.data.shape, dtype=bool)
    vals = img.data[mask]
    if vals.size == 0:
        raise EmptyOverlap("no valid pixel")
    idx = np.clip((vals * bins / 256.0).astype(np.int64), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return EntropyEstimate(value=_entropy_bits(counts), estimator="histogram")


def _entropy_bits(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def mutual_information_hist(target: GrayImage, warped, bins: int = 64) -> float:
    """Histogram mutual information in bits: H(a) + H(b) - H(a, b), all
    three entropies from the same masked joint histogram."""
    jh = joint_histogram(target, warped, bins)
    h_a = _entropy_bits(jh.marginal_a())
    h_b = _entropy_bits(jh.marginal_b())
    h_ab = _entropy_bits(jh.bins.ravel())
    return h_a + h_b - h_ab


def _draw_overlap_samples(target: GrayImage, source: GrayImage,
                          w_matrix: np.ndarray, count: int, rng):
    """Integer pixel locations of the target frame whose warped position
    lies inside the source domain, drawn uniformly; returns
    (u, v, gx, gy, xw, yw) for `count` samples."""
    th, tw = target.data.shape
    m = _raster_matrix(w_matrix, target.data.shape, source.data.shape)
    got_u, got_v, got_gx, got_gy, got_xw, got_yw = [], [], [], [], [], []
    need = count
    for _ in range(_MAX_SAMPLE_ROUNDS):
        xs = rng.integers(0, tw, size=2 * need)
        ys = rng.integers(0, th, size=2 * need)
        wd = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
        ok = np.abs(wd) >= 1e-8
        wd = np.where(ok, wd, 1.0)
        xw = (m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / wd
        yw = (m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / wd
        vals, gx, gy, valid = kernels.sample_points(source.data, xw, yw)
        valid &= ok
        take = min(int(valid.sum()), need)
        if take > 0:
            sel = np.nonzero(valid)[0][:take]
            got_u.append(target.data[ys[sel], xs[sel]])
            got_v.append(vals[sel])
            got_gx.append(gx[sel])
            got_gy.append(gy[sel])
            got_xw.append(xw[sel])
            got_yw.append(yw[sel])
            need -= take
        if need == 0:
            break
    if need > 0:
        raise EmptyOverlap("could not draw samples from the valid overlap")
    return (np.concatenate(got_u), np.concatenate(got_v),
            np.concatenate(got_gx), np.concatenate(got_gy),
            np.concatenate(got_xw), np.concatenate(got_yw))


def _jac_rows(gx, gy, xw, yw, cx, cy) -> np.ndarray:
    """dv/dp rows for the source-side increment chart, centered coords."""
    jac = warp_jacobian_identity(xw - cx, yw - cy)
    grad = np.stack([gx, gy], axis=1)
    return np.einsum("nk,nkp->np", grad, jac)


def mi_stochastic_gradient(target: GrayImage, source: GrayImage,
                           h: Homography, opts: MIOptions,
                           rng=None) -> np.ndarray:
    """Derivative of the Parzen/EMMA mutual-information estimate with
    respect to the 8 entries of an incremental warp composed onto h
    (chart: h o (I + d), evaluated at d = 0).  Deterministic given the
    seed; raises DegenerateSamples when every sampled intensity is
    identical."""
    if rng is None:
        rng = np.random.default_rng(opts.seed)
    w = invert(h).m
    cx, cy = source.center
    u_b, v_b, gx_b, gy_b, xw_b, yw_b = _draw_overlap_samples(
        target, source, w, opts.sample_size_b, rng)
    u_a, v_a, gx_a, gy_a, xw_a, yw_a = _draw_overlap_samples(
        target, source, w, opts.sample_size_a, rng)
    if (np.all(u_b == u_b[0]) and np.all(v_b == v_b[0])
            and np.all(u_a == u_b[0]) and np.all(v_a == v_b[0])):
        raise DegenerateSamples("all sampled intensities identical")
    jac_b = _jac_rows(gx_b, gy_b, xw_b, yw_b, cx, cy)
    jac_a = _jac_rows(gx_a, gy_a, xw_a, yw_a, cx, cy)
    g = kernels.emma_gradient(u_b, v_b, jac_b, u_a, v_a, jac_a,
                              opts.parzen_sigma)
    # the increment perturbs the source-side map inversely
    return -np.asarray(g)


def _increment(delta: np.ndarray) -> Homography:
    return Homography(np.array([
        [1.0 + delta[0], delta[1], delta[2]],
        [delta[3], 1.0 + delta[4], delta[5]],
        [delta[6], delta[7], 1.0],
    ]))


def _corner_step(delta: np.ndarray, half: float) -> float:
    """Largest corner displacement the increment induces on a frame of
    half-extent `half` (centered coordinates)."""
    worst = 0.0
    for sx in (-half, half):
        for sy in (-half, half):
            wd = delta[6] * sx + delta[7] * sy + 1.0
            dx = ((1.0 + delta[0]) * sx + delta[1] * sy + delta[2]) / wd - sx
            dy = (delta[3] * sx + (1.0 + delta[4]) * sy + delta[5]) / wd - sy
            worst = max(worst, math.hypot(dx, dy))
    return worst


class _Stream:
    """One ascent stream: state, gradient average, and step history."""

    def __init__(self, h: Homography, rng):
        self.h = h
        self.rng = rng
        self.g_ema = np.zeros(8)
        self.t = 0
        self.steps: list[float] = []
        self.trajectory = [h.m]


def _ascend(stream: _Stream, target, source, opts, rates, half,
            iterations: int, detect_plateau: bool) -> bool:
    """Advance one stream; True when the trailing step average fell
    below the plateau tolerance."""
    for _ in range(iterations):
        try:
            g = mi_stochastic_gradient(target, source, stream.h, opts,
                                       stream.rng)
        except DegenerateSamples:
            g = np.zeros(8)
        stream.g_ema = opts.momentum * stream.g_ema + (1.0 - opts.momentum) * g
        g_hat = stream.g_ema / (1.0 - opts.momentum ** (stream.t + 1))
        decay = 1.0 / math.sqrt(1.0 + stream.t / opts.decay_t0)
        delta = rates * decay * g_hat
        stream.h = Homography(stream.h.m @ _increment(delta).m)
        stream.t += 1
        stream.trajectory.append(stream.h.m)
        stream.steps.append(_corner_step(delta, half))
        if detect_plateau and len(stream.steps) >= opts.plateau_window:
            window = stream.steps[-opts.plateau_window:]
            if sum(window) / len(window) < opts.plateau_tolerance:
                return True
    return False


def _full_mi(target, source, h, bins) -> float:
    warped = warp(source, invert(h), target.width, target.height)
    if not warped.mask.any():
        return -np.inf
    return mutual_information_hist(target, warped, bins)


def register_mi(target: GrayImage, source: GrayImage, init: Homography,
                opts: MIOptions = MIOptions()) -> RegistrationResult:
    """Maximize mutual information from init by stochastic ascent.

    Several seeded exploration streams share the iteration budget; the
    one reaching the highest histogram mutual information continues
    through the remaining iterations (guarding against spurious local
    maxima), and the returned estimate is the tail average of that
    finishing trajectory.  Fully reproducible given opts.seed.
    """
    if min(target.width, target.height, source.width, source.height) < 32:
        raise ValueError("images must be at least 32x32")
    seeds = np.random.SeedSequence(opts.seed).spawn(opts.starts)
    rates = opts.learning_rates.as_vector()
    half = (min(target.width, target.height) - 1) / 2.0
    converged = False
    others = 0

    if opts.starts > 1:
        streams = [_Stream(init, np.random.default_rng(s)) for s in seeds]
        for stream in streams:
            _ascend(stream, target, source, opts, rates, half,
                    opts.explore_iterations, detect_plateau=False)
        scores = [_full_mi(target, source, s.h, opts.bins) for s in streams]
        best = streams[int(np.argmax(scores))]
        others = (opts.starts - 1) * opts.explore_iterations
    else:
        best = _Stream(init, np.random.default_rng(seeds[0]))

    remaining = opts.max_iterations - others - best.t
    if remaining > 0:
        converged = _ascend(best, target, source, opts, rates, half,
                            remaining, detect_plateau=True)
    iterations = others + best.t

    h = best.h
    if opts.tail_average > 1:
        tail = best.trajectory[-opts.tail_average:]
        h = Homography(np.mean(tail, axis=0))

    warped = warp(source, invert(h), target.width, target.height)
    if not warped.mask.any():
        raise EmptyOverlap("no valid pixel in overlap at final estimate")
    score = mutual_information_hist(target, warped, opts.bins)
    return RegistrationResult(theta_hat=h, final_score=score,
                              iterations=iterations, converged=converged)
