"""Projective transform algebra for dense registration and mosaicing.

All transforms act on image coordinates with the origin at the image
center (rotation and scale are about the center); raster coordinates are
converted at the imaging API boundary.  A registration transform maps
source-frame coordinates onto target-frame coordinates; resampling the
source into the target frame therefore uses the inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDivisor, SingularTransform

# Degeneracy guards; both overridable per call.
DIVISOR_FLOOR = 1e-8
DETERMINANT_FLOOR = 1e-12


@dataclass(frozen=True)
class TransformParams:
    """Named 8-parameter form of the perspective transform.

    tx, ty in pixels; phi in radians (in-plane rotation); f dimensionless
    scale (> 0); sx, sy dimensionless shears; a31, a32 in 1/pixels.
    """

    tx: float = 0.0
    ty: float = 0.0
    phi: float = 0.0
    f: float = 1.0
    sx: float = 1.0
    sy: float = 1.0
    a31: float = 0.0
    a32: float = 0.0

    def __post_init__(self):
        if not self.f > 0.0:
            raise ValueError(f"scale factor f must be > 0, got {self.f}")

    def to_dict(self) -> dict:
        return {
            "tx": self.tx, "ty": self.ty, "phi": self.phi, "f": self.f,
            "sx": self.sx, "sy": self.sy, "a31": self.a31, "a32": self.a32,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransformParams":
        return cls(**{k: float(d[k]) for k in
                      ("tx", "ty", "phi", "f", "sx", "sy", "a31", "a32")})


class Homography:
    """Normalized 3x3 projective matrix (m[2,2] == 1), immutable."""

    __slots__ = ("m",)

    def __init__(self, m, divisor_floor: float = DIVISOR_FLOOR,
                 det_floor: float = DETERMINANT_FLOOR):
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"expected 3x3 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite entry in transform matrix")
        w = m[2, 2]
        if abs(w) < divisor_floor:
            raise DegenerateDivisor(
                f"normalizing entry m[2,2]={w!r} below floor {divisor_floor}")
        m = m / w
        m[2, 2] = 1.0  # exact, regardless of rounding in the division
        if abs(np.linalg.det(m)) < det_floor:
            raise SingularTransform("determinant magnitude below floor")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def __repr__(self):
        rows = "; ".join(" ".join(f"{v:.6g}" for v in row) for row in self.m)
        return f"Homography([{rows}])"

    def __eq__(self, other):
        return isinstance(other, Homography) and np.array_equal(self.m, other.m)

    def to_dict(self) -> dict:
        return {"matrix": [[float(v) for v in row] for row in self.m]}

    @classmethod
    def from_dict(cls, d: dict) -> "Homography":
        return cls(np.array(d["matrix"], dtype=np.float64))


def identity() -> Homography:
    return Homography(np.eye(3))


def translate(tx: float, ty: float) -> Homography:
    return Homography([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])


def rotate(phi: float) -> Homography:
    c, s = math.cos(phi), math.sin(phi)
    return Homography([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def scale(f: float) -> Homography:
    return Homography([[f, 0.0, 0.0], [0.0, f, 0.0], [0.0, 0.0, 1.0]])


def params_to_matrix(p: TransformParams) -> Homography:
    """Build the homography whose entries follow the 8-parameter form:
    a11 = a22 = f*cos(phi), a12 = -sx*sin(phi), a21 = sy*sin(phi),
    a13 = tx, a23 = ty, a31/a32 as given, a33 = 1."""
    c, s = math.cos(p.phi), math.sin(p.phi)
    return Homography([
        [p.f * c, -p.sx * s, p.tx],
        [p.sy * s, p.f * c, p.ty],
        [p.a31, p.a32, 1.0],
    ])


def matrix_to_params(h: Homography) -> TransformParams:
    """Read the named parameters back from a normalized matrix.

    The decomposition is canonical only on the sx == sy == f sub-family,
    where it is exact; elsewhere the convention below is applied:
    phi = atan2(a21 - a12, a11 + a22), f = hypot of those half-sums, and
    the shears are recovered from the off-diagonal when sin(phi) is
    nonzero (otherwise they are unobservable and reported equal to f).
    """
    m = h.m
    c = 0.5 * (m[0, 0] + m[1, 1])
    s = 0.5 * (m[1, 0] - m[0, 1])
    f = math.hypot(c, s)
    if f <= 0.0:
        raise SingularTransform("vanishing linear part; parameters undefined")
    phi = math.atan2(s, c)
    sin_phi = math.sin(phi)
    if abs(sin_phi) > 1e-12:
        sx = -m[0, 1] / sin_phi
        sy = m[1, 0] / sin_phi
    else:
        sx = sy = f
    return TransformParams(tx=m[0, 2], ty=m[1, 2], phi=phi, f=f,
                           sx=sx, sy=sy, a31=m[2, 0], a32=m[2, 1])


def apply(h: Homography, x: float, y: float,
          divisor_floor: float = DIVISOR_FLOOR) -> tuple[float, float]:
    """Map one point; raises DegenerateDivisor when w is below the floor."""
    m = h.m
    w = m[2, 0] * x + m[2, 1] * y + 1.0
    if abs(w) < divisor_floor:
        raise DegenerateDivisor(f"|w|={abs(w):.3e} at point ({x}, {y})")
    u = m[0, 0] * x + m[0, 1] * y + m[0, 2]
    v = m[1, 0] * x + m[1, 1] * y + m[1, 2]
    return u / w, v / w


def apply_points(h: Homography, xs, ys, divisor_floor: float = DIVISOR_FLOOR):
    """Vectorized point mapping.

    Returns (xp, yp, ok) where ok flags points whose divisor stayed above
    the floor; coordinates under a False flag are set to 0.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    m = h.m
    w = m[2, 0] * xs + m[2, 1] * ys + 1.0
    ok = np.abs(w) >= divisor_floor
    w_safe = np.where(ok, w, 1.0)
    xp = np.where(ok, (m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / w_safe, 0.0)
    yp = np.where(ok, (m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / w_safe, 0.0)
    return xp, yp, ok


def compose(h1: Homography, h2: Homography) -> Homography:
    """Matrix product renormalized so a33 = 1; applies h2 first."""
    return Homography(h1.m @ h2.m)


def invert(h: Homography, det_floor: float = DETERMINANT_FLOOR) -> Homography:
    if abs(np.linalg.det(h.m)) < det_floor:
        raise SingularTransform("determinant magnitude below floor")
    return Homography(np.linalg.inv(h.m))


def warp_jacobian_identity(xs, ys):
    """Jacobian of the mapped point w.r.t. the 8 matrix entries
    (a11-1, a12, a13, a21, a22-1, a23, a31, a32), evaluated at the
    identity transform.

    Returns an (n, 2, 8) array: rows d(x')/dp and d(y')/dp per point.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n = xs.shape[0]
    jac = np.zeros((n, 2, 8))
    jac[:, 0, 0] = xs
    jac[:, 0, 1] = ys
    jac[:, 0, 2] = 1.0
    jac[:, 1, 3] = xs
    jac[:, 1, 4] = ys
    jac[:, 1, 5] = 1.0
    jac[:, 0, 6] = -xs * xs
    jac[:, 0, 7] = -xs * ys
    jac[:, 1, 6] = -xs * ys
    jac[:, 1, 7] = -ys * ys
    return jac


@dataclass(frozen=True)
class ViewpointChange:
    """Simulated 3-D camera displacement over a fronto-parallel plane.

    tx, ty in pixels; tz_as_scale is the axial displacement expressed
    directly as the induced scale factor (1.0 = none); phi is the in-plane
    rotation; psi and alpha are the out-of-plane rotations about the
    vertical and horizontal image axes; focal is the virtual pinhole focal
    length in pixels.
    """

    tx: float = 0.0
    ty: float = 0.0
    tz_as_scale: float = 1.0
    phi: float = 0.0
    psi: float = 0.0
    alpha: float = 0.0
    focal: float = 256.0

    def __post_init__(self):
        if not self.focal > 0.0:
            raise ValueError("focal must be > 0")
        if not self.tz_as_scale > 0.0:
            raise ValueError("tz_as_scale must be > 0")


def viewpoint_to_homography(v: ViewpointChange) -> Homography:
    """Exact homography induced by the simulated camera displacement.

    The out-of-plane part is K R K^-1 for a pinhole with K =
    diag(focal, focal, 1) rotated about its center, composed with the
    recentering translation that keeps the fixated image center in place
    (equivalently: the camera tilts while fixating the same surface
    point).  Rotation senses are chosen so that a single-axis rotation
    yields exactly a31 = -tan(psi)/focal, respectively
    a32 = -tan(alpha)/focal.  Scale, in-plane rotation and translation are
    applied on top, in that order.
    """
    if not (abs(v.psi) < math.pi / 2 and abs(v.alpha) < math.pi / 2):
        raise ValueError("out-of-plane angles must lie within (-90, 90) deg")
    fl = v.focal
    cp, sp = math.cos(v.psi), math.sin(v.psi)
    ca, sa = math.cos(v.alpha), math.sin(v.alpha)
    r_y = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    r_x = np.array([[1.0, 0.0, 0.0], [0.0, ca, sa], [0.0, -sa, ca]])
    k = np.diag([fl, fl, 1.0])
    k_inv = np.diag([1.0 / fl, 1.0 / fl, 1.0])
    oop = k @ (r_x @ r_y) @ k_inv
    oop = oop / oop[2, 2]
    # Pin the image center: cancel the shift the rotation gives (0, 0).
    recenter = np.eye(3)
    recenter[0, 2] = -oop[0, 2]
    recenter[1, 2] = -oop[1, 2]
    oop = recenter @ oop

    c, s = math.cos(v.phi), math.sin(v.phi)
    f = v.tz_as_scale
    inplane = np.array([
        [f * c, -f * s, v.tx],
        [f * s, f * c, v.ty],
        [0.0, 0.0, 1.0],
    ])
    return Homography(inplane @ oop)
