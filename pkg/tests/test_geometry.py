import math

import numpy as np
import pytest

from mosreg.errors import DegenerateDivisor, SingularTransform
from mosreg.geometry import (
    Homography,
    TransformParams,
    ViewpointChange,
    apply,
    apply_points,
    compose,
    identity,
    invert,
    matrix_to_params,
    params_to_matrix,
    rotate,
    translate,
    viewpoint_to_homography,
)


def random_params(rng):
    return TransformParams(
        tx=rng.uniform(-40, 40),
        ty=rng.uniform(-40, 40),
        phi=rng.uniform(-0.4, 0.4),
        f=rng.uniform(0.7, 1.4),
        sx=rng.uniform(0.7, 1.4),
        sy=rng.uniform(0.7, 1.4),
        a31=rng.uniform(-1e-3, 1e-3),
        a32=rng.uniform(-1e-3, 1e-3),
    )


def test_params_identity_gives_identity_matrix():
    h = params_to_matrix(TransformParams())
    assert np.array_equal(h.m, np.eye(3))


def test_params_translation_30px():
    h = params_to_matrix(TransformParams(tx=30, ty=30))
    assert h.m[0, 2] == 30.0
    assert h.m[1, 2] == 30.0
    assert np.array_equal(h.m[:2, :2], np.eye(2))


def test_params_rotation_10deg_entries():
    # cos(10 deg) and sin(10 deg), evaluated independently
    c10 = 0.984807753012208
    s10 = 0.17364817766693033
    h = params_to_matrix(TransformParams(phi=math.radians(10)))
    assert h.m[0, 0] == pytest.approx(c10, abs=1e-15)
    assert h.m[1, 1] == pytest.approx(c10, abs=1e-15)
    assert h.m[0, 1] == pytest.approx(-s10, abs=1e-15)
    assert h.m[1, 0] == pytest.approx(s10, abs=1e-15)


def test_params_rejects_nonpositive_scale():
    with pytest.raises(ValueError):
        TransformParams(f=0.0)


def test_apply_identity():
    assert apply(identity(), 5.0, 7.0) == (5.0, 7.0)


def test_apply_pure_translation():
    assert apply(translate(10, 0), 0.0, 0.0) == (10.0, 0.0)


def test_apply_perspective_divisor():
    h = Homography([[1, 0, 0], [0, 1, 0], [0.001, 0, 1]])
    x, y = apply(h, 100.0, 50.0)
    # w = 1 + 0.001 * 100 = 1.1
    assert x == pytest.approx(100.0 / 1.1, abs=1e-12)
    assert y == pytest.approx(50.0 / 1.1, abs=1e-12)


def test_apply_degenerate_divisor_raises():
    h = Homography([[1, 0, 0], [0, 1, 0], [-0.01, 0, 1]])
    with pytest.raises(DegenerateDivisor):
        apply(h, 100.0, 0.0)  # w == 0 exactly


def test_apply_points_flags_degenerate_rows():
    h = Homography([[1, 0, 0], [0, 1, 0], [-0.01, 0, 1]])
    xp, yp, ok = apply_points(h, [0.0, 100.0], [0.0, 0.0])
    assert ok.tolist() == [True, False]
    assert xp[0] == 0.0 and yp[0] == 0.0


def test_projective_scale_invariance():
    m = np.array([[1.1, 0.02, 5.0], [-0.03, 0.95, -2.0], [1e-4, -2e-4, 1.0]])
    a = Homography(m)
    b = Homography(4.5 * m)
    assert apply(a, 30.0, -12.0) == apply(b, 30.0, -12.0)


def test_compose_with_identity():
    h = params_to_matrix(TransformParams(tx=3, phi=0.1))
    assert np.allclose(compose(h, identity()).m, h.m)
    assert np.allclose(compose(identity(), h).m, h.m)


def test_compose_translations():
    h = compose(translate(10, 0), translate(0, 5))
    assert np.allclose(h.m, translate(10, 5).m)


def test_compose_applies_second_argument_first():
    h1 = rotate(0.3)
    h2 = translate(7, -4)
    p = (3.0, 11.0)
    lhs = apply(compose(h1, h2), *p)
    rhs = apply(h1, *apply(h2, *p))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_compose_invert_roundtrip_100_random():
    rng = np.random.default_rng(42)
    for _ in range(100):
        h = params_to_matrix(random_params(rng))
        r = compose(h, invert(h))
        assert np.allclose(r.m, np.eye(3), atol=1e-9)


def test_compose_associative():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a, b, c = (params_to_matrix(random_params(rng)) for _ in range(3))
        lhs = compose(compose(a, b), c)
        rhs = compose(a, compose(b, c))
        assert np.allclose(lhs.m, rhs.m, atol=1e-9)


def test_invert_identity_and_translation():
    assert np.array_equal(invert(identity()).m, np.eye(3))
    assert np.allclose(invert(translate(10, 5)).m, translate(-10, -5).m)


def test_singular_matrix_rejected():
    with pytest.raises(SingularTransform):
        Homography([[1, 0, 0], [1, 0, 0], [0, 0, 1]])


def test_degenerate_normalizer_rejected():
    with pytest.raises(DegenerateDivisor):
        Homography([[1, 0, 0], [0, 1, 0], [0, 0, 1e-12]])


def test_roundtrip_unambiguous_subfamily():
    rng = np.random.default_rng(3)
    for _ in range(100):
        f = rng.uniform(0.7, 1.4)
        p = TransformParams(
            tx=rng.uniform(-40, 40), ty=rng.uniform(-40, 40),
            phi=rng.uniform(-1.2, 1.2), f=f, sx=f, sy=f,
            a31=rng.uniform(-1e-3, 1e-3), a32=rng.uniform(-1e-3, 1e-3))
        q = matrix_to_params(params_to_matrix(p))
        assert q.tx == p.tx and q.ty == p.ty
        assert q.a31 == p.a31 and q.a32 == p.a32
        assert q.phi == pytest.approx(p.phi, abs=1e-9)
        assert q.f == pytest.approx(p.f, rel=1e-9)
        assert q.sx == pytest.approx(p.sx, rel=1e-9)
        assert q.sy == pytest.approx(p.sy, rel=1e-9)


def test_viewpoint_zero_change_is_identity():
    h = viewpoint_to_homography(ViewpointChange(focal=256.0))
    assert np.allclose(h.m, np.eye(3), atol=1e-15)


def test_viewpoint_psi_populates_a31():
    w = 256.0
    v = ViewpointChange(psi=math.radians(20), focal=w)
    h = viewpoint_to_homography(v)
    assert abs(h.m[2, 0]) == pytest.approx(math.tan(math.radians(20)) / w, rel=1e-12)
    assert h.m[2, 1] == pytest.approx(0.0, abs=1e-15)
    # the image center stays fixed
    assert apply(h, 0.0, 0.0) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_viewpoint_alpha_populates_a32():
    w = 256.0
    v = ViewpointChange(alpha=math.radians(20), focal=w)
    h = viewpoint_to_homography(v)
    assert abs(h.m[2, 1]) == pytest.approx(math.tan(math.radians(20)) / w, rel=1e-12)
    assert h.m[2, 0] == pytest.approx(0.0, abs=1e-15)


def test_viewpoint_at_mi_robustness_limit_is_valid():
    v = ViewpointChange(psi=math.radians(20), alpha=math.radians(20), focal=256.0)
    h = viewpoint_to_homography(v)
    invert(h)  # must be invertible


def test_viewpoint_continuity_in_angles():
    corners = [(-127.5, -127.5), (127.5, -127.5), (-127.5, 127.5), (127.5, 127.5)]
    base = ViewpointChange(psi=math.radians(5), alpha=math.radians(-3), focal=256.0)
    h0 = viewpoint_to_homography(base)
    for dpsi, dalpha in [(1e-6, 0.0), (0.0, 1e-6), (1e-6, 1e-6)]:
        h1 = viewpoint_to_homography(ViewpointChange(
            psi=base.psi + dpsi, alpha=base.alpha + dalpha, focal=base.focal))
        for x, y in corners:
            p0 = apply(h0, x, y)
            p1 = apply(h1, x, y)
            assert math.hypot(p1[0] - p0[0], p1[1] - p0[1]) < 1e-3


def test_serialization_roundtrips():
    p = TransformParams(tx=1.5, ty=-2.0, phi=0.2, f=1.1, sx=0.9, sy=1.05,
                        a31=1e-4, a32=-2e-4)
    assert TransformParams.from_dict(p.to_dict()) == p
    h = params_to_matrix(p)
    assert Homography.from_dict(h.to_dict()) == h
