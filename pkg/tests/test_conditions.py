from dataclasses import replace

import numpy as np
import pytest

from conditions.cones import Cone, ConeKind, parse_cone, parse_cones
from conditions.margins import (
    FormObjective, berger_bound, berger_bound_residual, certificate_value, cone_margin, implication_check,
    pic1_weight_minimum, pic2_weight_minimum, pointwise_pinching_ratio, same_minimizer, sectional_extremes,
    sphere_product_margin,
)
from conditions.stiefel import LocalResult, multistart_minimize
from curvature.quantities import isotropic_quantity, scalar, sectional_coefficients
from flow.integrator import integrate
from models.builders import constant_curvature, flat_extend, random_tensor
from models.shift import shift_into_cone
from utils.errors import BlowupReached, NonpositiveCurvature, ParseError, RangeViolation, WrongDimension


@pytest.mark.parametrize("text, kind", [
    ("pic", ConeKind.PIC),
    ("PIC2", ConeKind.PIC2),
    ("2pos", ConeKind.TWO_POSITIVE),
    ("sec_nonneg", ConeKind.SEC_NONNEG),
    ("opnonneg", ConeKind.OPERATOR_NONNEG),
])
def test_parse_cone_aliases(text, kind):
    assert parse_cone(text).kind == kind


def test_parse_cone_arguments():
    assert parse_cone("pinch").delta == 0.25
    assert parse_cone("pinch(0.3)").delta == 0.3
    assert parse_cone("ric_pinched(0.1)").rho == 0.1
    assert parse_cone("pic2(sym)").lambda_range == "sym"
    assert parse_cone("pic1", lambda_range="sym").lambda_range == "sym"
    # the scalar-margin PIC2 cone defaults to the symmetric weight range
    assert parse_cone("pic2_scal(0.05)").lambda_range == "sym"


def test_cone_text_round_trip():
    for text in ["pic", "pic1(sym)", "pinch(0.3)", "ric_pinched(0.1)", "pic2_scal(0.05)", "two_positive"]:
        assert parse_cone(parse_cone(text).text()) == parse_cone(text)


def test_parse_cones_keeps_inner_commas():
    cones = parse_cones("pic, pic2_scal(0.05,01), pinch(0.3)")
    assert [c.kind for c in cones] == [ConeKind.PIC, ConeKind.PIC2_SCAL_MARGIN, ConeKind.POINTWISE_PINCHED]
    assert cones[1].lambda_range == "01"


@pytest.mark.parametrize("text", ["", "nope", "pic(", "sec(1)", "ric_pinched", "pinch(x)"])
def test_parse_cone_errors(text):
    with pytest.raises(ParseError):
        parse_cone(text)


@pytest.mark.parametrize("kwargs", [
    {"kind": ConeKind.POINTWISE_PINCHED, "delta": 1.5},
    {"kind": ConeKind.RIC_PINCHED, "rho": 0.0},
    {"kind": ConeKind.PIC1, "lambda_range": "02"},
])
def test_cone_range_checks(kwargs):
    with pytest.raises(RangeViolation):
        Cone(**kwargs)


@pytest.mark.parametrize("text, margin", [
    ("pic", 4.0),
    ("pic1", 2.0),
    ("pic2", 1.0),
    ("sec", 1.0),
    ("pinch(0.25)", 0.75),
    ("two_positive", 8.0),
    ("operator_nonneg", 4.0),
    ("ric_pinched(0.1)", 1.8),
    ("pic1_scal(0.01)", 2.0 - 0.12),
])
def test_round_sphere_margins(sphere4, settings, text, margin):
    report = cone_margin(sphere4, parse_cone(text), settings, seed=1)
    assert report.margin == pytest.approx(margin, abs=1e-8)
    assert report.strict and report.member
    assert certificate_value(sphere4, report) == pytest.approx(report.margin, abs=1e-8)


def test_split_product_is_on_the_pic_boundary(s2xs2, settings):
    report = cone_margin(s2xs2, Cone(ConeKind.PIC), settings, seed=2)
    assert report.margin == pytest.approx(0.0, abs=1e-8)
    assert not report.strict
    assert report.member
    assert cone_margin(s2xs2, Cone(ConeKind.SEC_NONNEG), settings, seed=2).margin == pytest.approx(0.0, abs=1e-8)


def test_fubini_study_extremes(fs2, settings):
    ext = sectional_extremes(fs2, settings, seed=3)
    assert ext.k_min == pytest.approx(1.0, abs=1e-8)
    assert ext.k_max == pytest.approx(4.0, abs=1e-8)
    assert pointwise_pinching_ratio(fs2, settings, extremes=ext) == pytest.approx(0.25, abs=1e-8)
    assert cone_margin(fs2, Cone(ConeKind.PIC), settings, seed=3).margin == pytest.approx(0.0, abs=1e-8)


def test_pinching_ratio_needs_positive_curvature(settings):
    with pytest.raises(NonpositiveCurvature):
        pointwise_pinching_ratio(constant_curvature(4, -1.0), settings)


def test_isotropic_cones_need_four_dimensions(settings):
    with pytest.raises(WrongDimension):
        cone_margin(constant_curvature(3), Cone(ConeKind.PIC), settings)


def test_zero_tensor_is_degenerate(zero4, settings):
    report = cone_margin(zero4, Cone(ConeKind.PIC2), settings)
    assert report.degenerate
    assert report.margin == 0.0 and not report.strict
    assert certificate_value(zero4, report) == 0.0


def test_margin_is_rotation_invariant(random_tensors, random_orthogonal, settings):
    R = random_tensors(4, 1, seed=13)[0] + constant_curvature(4, 1.0)
    Q = random_orthogonal(4, seed=7)
    for cone in (Cone(ConeKind.PIC), Cone(ConeKind.PIC1), Cone(ConeKind.TWO_POSITIVE)):
        a = cone_margin(R, cone, settings, seed=4).margin
        b = cone_margin(R.rotated(Q), cone, settings, seed=4).margin
        assert a == pytest.approx(b, abs=1e-7)


def test_margin_scales_linearly(random_tensors, settings):
    R = random_tensors(4, 1, seed=17)[0]
    cone = Cone(ConeKind.PIC1)
    assert cone_margin(3.0 * R, cone, settings, seed=5).margin == pytest.approx(
        3.0 * cone_margin(R, cone, settings, seed=5).margin, abs=1e-7)


def test_certificates_re_evaluate(random_tensors, settings):
    R = random_tensors(5, 1, seed=23)[0]
    for text in ("pic", "pic1", "pic2", "sec", "pinch(0.3)", "two_positive", "ric_pinched(0.05)"):
        report = cone_margin(R, parse_cone(text), settings, seed=6)
        assert certificate_value(R, report) == pytest.approx(report.margin, abs=1e-8)


def test_nested_cones_do_not_violate(random_tensors, settings):
    R = constant_curvature(4, 1.0) + 0.2 * random_tensors(4, 1, seed=31)[0]
    for stronger, weaker in ((ConeKind.PIC2, ConeKind.PIC1), (ConeKind.PIC1, ConeKind.PIC),
                             (ConeKind.OPERATOR_NONNEG, ConeKind.PIC2)):
        verdict = implication_check(R, Cone(stronger), Cone(weaker), settings, seed=8)
        assert not verdict.violation


@pytest.mark.parametrize("n", [4, 5])
def test_strict_quarter_pinching_implies_pic2(n, random_tensors, settings):
    for k, E in enumerate(random_tensors(n, 3, seed=60 + n)):
        R = constant_curvature(n, 1.0) + 0.05 * E
        assert pointwise_pinching_ratio(R, settings, seed=k) > 0.25
        for weaker in (ConeKind.PIC2, ConeKind.PIC):
            verdict = implication_check(R, Cone(ConeKind.POINTWISE_PINCHED, delta=0.25), Cone(weaker), settings, seed=k)
            assert verdict.stronger.strict
            assert not verdict.violation
            assert verdict.weaker.margin > 0.0


def test_near_round_quarter_pinched_is_two_positive(random_tensors, settings):
    for k, E in enumerate(random_tensors(4, 3, seed=80)):
        R = constant_curvature(4, 1.0) + 0.05 * E
        verdict = implication_check(R, Cone(ConeKind.POINTWISE_PINCHED, delta=0.25), Cone(ConeKind.TWO_POSITIVE),
                                    settings, seed=k)
        assert not verdict.violation


@pytest.mark.parametrize("n", [4, 5])
def test_two_positive_implies_pic2(n, settings):
    for k in range(3):
        R = shift_into_cone(random_tensor(n, 90 + k, 1.0), Cone(ConeKind.TWO_POSITIVE), 0.1, settings).tensor
        verdict = implication_check(R, Cone(ConeKind.TWO_POSITIVE), Cone(ConeKind.PIC2), settings, seed=k)
        assert verdict.stronger.strict
        assert not verdict.violation
        assert verdict.weaker.margin >= -verdict.tolerance


def test_unitary_mixed_frame_is_the_same_minimizer(random_tensors):
    R = random_tensors(5, 1, seed=31)[0]
    E = np.eye(5)[:4]
    zeta, eta = E[0] + 1j * E[1], E[2] + 1j * E[3]
    a, b = 0.6 + 0.48j, 0.64j
    mixed_zeta, mixed_eta = a * zeta + b * eta, -np.conj(b) * zeta + np.conj(a) * eta
    E2 = np.array([mixed_zeta.real, mixed_zeta.imag, mixed_eta.real, mixed_eta.imag])
    assert np.allclose(E2 @ E2.T, np.eye(4), atol=1e-14)
    assert isotropic_quantity(R, E2) == pytest.approx(isotropic_quantity(R, E), abs=1e-12)

    weights = {"lam": 1.0, "mu": 1.0}
    first = LocalResult(0.0, E, weights)
    assert same_minimizer(first, LocalResult(0.0, E2, weights))
    assert same_minimizer(first, LocalResult(0.0, E[[2, 3, 0, 1]], weights))
    assert not same_minimizer(first, LocalResult(0.0, E[[0, 2, 1, 3]], weights))


def test_multistart_keeps_best_without_stationarity(settings):
    opt = replace(settings.optimizer, max_iters=1, grad_tol=0.0, stall_tol=0.0, window_tol=0.0)
    objective = FormObjective(random_tensor(5, 1, 1.0), sectional_coefficients())
    result = multistart_minimize(objective, 5, 2, opt, seed=0, restarts=4)
    assert not result.converged
    assert np.isfinite(result.best.value)
    assert result.best.value == min(r.value for r in result.results)


def test_sectional_extremes_of_near_round_flow_state(settings):
    R0 = shift_into_cone(random_tensor(4, 2, 1.0), Cone(ConeKind.POINTWISE_PINCHED, delta=0.3), 0.0, settings).tensor
    with pytest.raises(BlowupReached) as exc:
        integrate(R0, 100.0 / R0.max_norm, settings=settings)
    last = exc.value.trajectory.final
    R = (12.0 / scalar(last)) * last
    ext = sectional_extremes(R, settings)
    assert np.isfinite(ext.k_min) and np.isfinite(ext.k_max)
    assert 0.9 < ext.k_min / ext.k_max <= 1.0 + 1e-9


def test_berger_bound_holds(random_tensors, settings):
    bound = berger_bound(constant_curvature(4, 1.0), settings)
    assert bound.residual == pytest.approx(0.0, abs=1e-8)
    for R in random_tensors(4, 3, seed=50):
        assert berger_bound_residual(R, settings, seed=9) >= -1e-6 * max(1.0, R.max_norm)


def test_berger_bound_needs_four_dimensions(settings):
    with pytest.raises(WrongDimension):
        berger_bound(constant_curvature(3), settings)


def test_sphere_product_is_weakly_pic(sphere4, settings):
    report = sphere_product_margin(sphere4, settings, seed=10)
    assert report.margin == pytest.approx(0.0, abs=1e-6)


def test_cylinder_facts(settings):
    cylinder = flat_extend(constant_curvature(3, 1.0), 1)
    assert cone_margin(cylinder, Cone(ConeKind.PIC), settings, seed=11).strict
    assert cone_margin(cylinder, Cone(ConeKind.PIC1), settings, seed=11).margin == pytest.approx(0.0, abs=1e-8)
    assert cone_margin(cylinder, Cone(ConeKind.PIC2), settings, seed=11).margin == pytest.approx(0.0, abs=1e-8)


def test_weight_minimizers():
    # a=1, b=1, c=1, d=1, e=1: 2 + 2 lam^2 - 2 lam has its minimum 1.5 at lam = 0.5
    value, lam = pic1_weight_minimum((1.0, 1.0, 1.0, 1.0, 1.0))
    assert value == pytest.approx(1.5) and lam == pytest.approx(0.5)
    value, lam, mu = pic2_weight_minimum((1.0, 1.0, 1.0, 1.0, 0.0))
    assert value == pytest.approx(1.0) and lam == 0.0 and mu == 0.0


def test_report_dict(sphere4, settings):
    data = cone_margin(sphere4, Cone(ConeKind.PIC2), settings, seed=12).to_dict()
    assert data["cone"] == "pic2"
    assert data["minimizer"]["kind"] == "frame"
    assert len(data["minimizer"]["frame"]) == 4
    assert set(data["minimizer"]) >= {"lambda", "mu"}
