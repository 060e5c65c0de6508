"""Sampler and verification-harness tests: soundness, determinism, reports."""

from types import SimpleNamespace

import numpy as np
import pytest

from pinchflow.curvature import Dims, PinchingParams, pinching_report
from pinchflow.errors import InfeasibleParams, UnknownProperty
from pinchflow.ineqlab import (
    SampleSpec,
    format_report,
    parse_report,
    sample_codazzi,
    sample_pinched,
    verify_property,
)

PARAMS5 = PinchingParams(n=5, c=0.25, a=0.1, eps0=1 / 60)


def spec5(count=100, seed=1, k=2, params=PARAMS5):
    return SampleSpec(Dims(5, k), params, count=count, seed=seed)


class TestSamplePinched:
    def test_all_outputs_pinched(self):
        # soundness re-checked through the independent report path
        for data in sample_pinched(spec5(count=100, seed=1)):
            rep = pinching_report(data, PARAMS5)
            assert rep.pinched
            assert rep.normH2 > 0

    def test_codimension_one_has_no_ahat(self):
        for data in sample_pinched(spec5(count=50, k=1)):
            rep = pinching_report(data, PARAMS5)
            assert rep.normAhat2 <= 1e-28

    def test_deterministic_stream(self):
        a = sample_pinched(spec5(count=40, seed=9))
        b = sample_pinched(spec5(count=40, seed=9))
        for x, y in zip(a, b):
            assert np.array_equal(x.A, y.A)

    def test_prefix_stability(self):
        # per-sample streams: the first samples do not depend on the count
        a = sample_pinched(spec5(count=10, seed=3))
        b = sample_pinched(spec5(count=25, seed=3))
        for x, y in zip(a, b[:10]):
            assert np.array_equal(x.A, y.A)

    def test_infeasible_c(self):
        bad = SimpleNamespace(c=0.19, a=0.1)   # c <= 1/5: no pinched data exists
        spec = SampleSpec(Dims(5, 2), bad, count=10, seed=1)
        with pytest.raises(InfeasibleParams):
            sample_pinched(spec)

    def test_scale_range_respected(self):
        spec = SampleSpec(Dims(5, 2), PARAMS5, count=200, seed=5,
                          scale_range=(2.0, 20.0))
        norms = [d.norm_H() for d in sample_pinched(spec)]
        # targets are log-uniform in range; the pinching floor can push above
        assert min(norms) >= 2.0 * (1 - 1e-12)


class TestSampleCodazzi:
    def test_full_symmetry(self):
        for gt in sample_codazzi(Dims(4, 2), 20, seed=7):
            S = gt.S
            for perm in ((1, 0, 2, 3), (0, 2, 1, 3), (2, 1, 0, 3)):
                assert np.abs(S - S.transpose(perm)).max() <= 1e-14 * np.abs(S).max()

    def test_deterministic(self):
        a = sample_codazzi(Dims(5, 1), 10, seed=2)
        b = sample_codazzi(Dims(5, 1), 10, seed=2)
        for x, y in zip(a, b):
            assert np.array_equal(x.S, y.S)


class TestVerifyProperty:
    def test_unknown_property(self):
        with pytest.raises(UnknownProperty):
            verify_property("no_such_thing", spec5(), 1e-9)

    def test_poincare_identity_clean(self):
        rep = verify_property("poincare_identity", spec5(count=2000), 1e-10)
        assert rep.violations == []
        assert rep.worst_margin >= -1e-10

    def test_pinch_reaction_clean(self):
        rep = verify_property("pinch_reaction", spec5(count=5000), 1e-9)
        assert rep.violations == []

    def test_gradient_ineq_clean(self):
        rep = verify_property("gradient_ineq", spec5(count=3000), 1e-12)
        assert rep.violations == []

    def test_simons_codim1_exact(self):
        rep = verify_property("simons_codim1_exact", spec5(count=1000, k=1), 1e-9)
        assert rep.violations == []

    def test_simons_fitted_constant(self):
        rep = verify_property("simons_lower_bound_fitC", spec5(count=1000), 1e-9)
        assert rep.fitted_constant is not None
        assert rep.fitted_constant >= 0.0
        assert rep.violations == []   # no fixed constant, so never a violation list

    def test_pythagoras_and_frame_invariance(self):
        assert verify_property("pythagoras", spec5(count=2000), 1e-12).violations == []
        assert verify_property("frame_invariance", spec5(count=300), 1e-10).violations == []

    def test_coefficient_signs_scan(self):
        rep = verify_property("coefficient_signs", spec5(count=8000), 0.0)
        assert rep.violations == []
        assert rep.worst_margin >= 0.0

    def test_reports_reproducible(self):
        a = verify_property("pinch_reaction", spec5(count=3000, seed=11), 1e-9)
        b = verify_property("pinch_reaction", spec5(count=3000, seed=11), 1e-9)
        assert a.worst_margin == b.worst_margin
        assert a.violations == b.violations
        assert a.fitted_constant == b.fitted_constant

    def test_parallel_matches_serial(self, monkeypatch):
        monkeypatch.setenv("PINCHFLOW_THREADS", "1")
        a = verify_property("gradient_ineq", spec5(count=9000, seed=4), 1e-12)
        monkeypatch.setenv("PINCHFLOW_THREADS", "4")
        b = verify_property("gradient_ineq", spec5(count=9000, seed=4), 1e-12)
        assert a.worst_margin == b.worst_margin


class TestReportFormat:
    def test_round_trip(self):
        rep = verify_property("pinch_reaction", spec5(count=500), 1e-9)
        text = format_report(rep)
        parsed = parse_report(text)
        assert parsed["property"] == "pinch_reaction"
        assert parsed["samples"] == 500
        assert parsed["worst_margin"] == rep.worst_margin
        assert parsed["violation_count"] == len(rep.violations)
        assert parsed["fitted_constant"] is None

    def test_violations_serialized_sorted(self):
        # force artificial violations with an absurd tolerance
        rep = verify_property("simons_lower_bound_fitC", spec5(count=200), -1.0)
        # margins of a strict bound are positive, so tol = -1 flags everything
        assert len(rep.violations) > 0
        margins = [m for _, m in rep.violations]
        assert margins == sorted(margins)
        parsed = parse_report(format_report(rep))
        assert parsed["violations"] == rep.violations
