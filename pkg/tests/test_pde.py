import math

import numpy as np
import pytest

from pinnlab.autodiff import Jet2, ParamVector, Tape
from pinnlab.errors import ConfigurationError, StructuralError
from pinnlab.networks import ModelHandle, build_model, plan_cpinn
from pinnlab.pde import (BoundaryFamily, Domain, LossBreakdown, PdeProblem,
                         loss_terms, residual, weighted_loss,
                         weighted_loss_on_tape)
from pinnlab.sampling import CollocationSampler, CollocationSet


class TestFamilies:
    def test_initial_condition_examples(self):
        xsin = BoundaryFamily("xsin")
        poly = BoundaryFamily("poly")
        assert xsin.initial_condition(0.0) == 0.0
        assert poly.initial_condition(0.3) == pytest.approx(0.0, abs=1e-15)
        assert xsin.initial_condition(0.5) == pytest.approx(-0.5, abs=1e-12)

    def test_forcing_examples(self):
        xsin = BoundaryFamily("xsin")
        poly = BoundaryFamily("poly")
        assert xsin.forcing(0.25) == pytest.approx(0.0, abs=1e-12)
        assert poly.forcing(0.4) == pytest.approx(0.0, abs=1e-15)
        assert poly.forcing(0.2) == pytest.approx(0.48, abs=1e-12)

    def test_xsinc_family(self):
        fam = BoundaryFamily("xsinc", c=3.0)
        xsin = BoundaryFamily("xsin")
        x = np.linspace(0, 1, 11)
        assert np.allclose(fam.initial_condition(x), xsin.initial_condition(x))
        with pytest.raises(ConfigurationError):
            BoundaryFamily("xsinc")

    def test_boundary_values_constant_in_time(self):
        dom = Domain()
        for fam in (BoundaryFamily("xsin"), BoundaryFamily("poly"),
                    BoundaryFamily("xsinc", c=2.5)):
            lo, hi = fam.boundary_values(dom)
            assert lo == pytest.approx(float(fam.initial_condition(0.0)))
            assert hi == pytest.approx(float(fam.initial_condition(1.0)))

    def test_problem_validation(self):
        with pytest.raises(ConfigurationError):
            PdeProblem(0.0, 1.0, BoundaryFamily("xsin"), Domain())
        p = PdeProblem(0.1, 0.5, BoundaryFamily("xsin"), Domain())
        assert not p.in_paper_matrix
        assert PdeProblem(0.1, 1.0, BoundaryFamily("xsin"), Domain()).in_paper_matrix


class TestResidual:
    def test_constant_jet_zero_forcing(self, silent_problem):
        assert residual(Jet2(3.0, 0, 0, 0), silent_problem, 0.5) == pytest.approx(0.0)

    def test_heat_mode_analytic(self):
        lin = 0.1
        problem = PdeProblem(lin, 0.0, BoundaryFamily("xsinc", c=0.0), Domain())
        t, x = 0.4, 0.3
        amp = math.exp(-lin * math.pi ** 2 * t)
        u = Jet2(amp * math.sin(math.pi * x),
                 -lin * math.pi ** 2 * amp * math.sin(math.pi * x),
                 amp * math.pi * math.cos(math.pi * x),
                 -amp * math.pi ** 2 * math.sin(math.pi * x))
        assert abs(residual(u, problem, t)) < 1e-12

    def test_x_seed_burgers(self):
        problem = PdeProblem(0.1, 1.0, BoundaryFamily("xsinc", c=0.0), Domain())
        x = 0.73
        assert residual(Jet2(x, 0, 1, 0), problem, 0.2) == pytest.approx(x)

    def test_linear_in_x_heat_exact(self):
        # u(t,x) = a*x + b solves the heat equation with no forcing
        problem = PdeProblem(0.3, 0.0, BoundaryFamily("xsinc", c=0.0), Domain())
        u = Jet2(2.0 * 0.4 + 1.0, 0.0, 2.0, 0.0)
        assert abs(residual(u, problem, 0.9)) < 1e-12


def zero_model():
    spec = plan_cpinn(40, 1)
    return ModelHandle("cpinn", spec, ParamVector(np.zeros(spec.param_count)), 40, 0)


class TestLossTerms:
    def test_zero_model_initial_loss_matches_direct_sum(self, heat_problem):
        sampler = CollocationSampler(256, 3, heat_problem.domain)
        br = loss_terms(zero_model(), heat_problem, sampler.train)
        x0 = sampler.train.initial[:, 1]
        expected = float(np.mean(heat_problem.family.initial_condition(x0) ** 2))
        assert br.l_t == pytest.approx(expected, rel=1e-12)
        assert br.l_x == pytest.approx(0.0, abs=1e-15)  # xsin walls are zero

    def test_bounds_additivity(self, burgers_problem):
        sampler = CollocationSampler(256, 1, burgers_problem.domain)
        model = build_model("cpinn", 40, 1, seed=2)
        br = loss_terms(model, burgers_problem, sampler.train)
        assert br.l_bounds == br.l_t + br.l_x
        assert br.l_pde >= 0 and br.l_t >= 0 and br.l_x >= 0

    def test_duplicating_points_leaves_means(self, burgers_problem):
        sampler = CollocationSampler(256, 5, burgers_problem.domain)
        model = build_model("cpinn", 40, 1, seed=2)
        s = sampler.train
        doubled = CollocationSet(np.tile(s.interior, (2, 1)),
                                 np.tile(s.initial, (2, 1)),
                                 np.tile(s.boundary, (2, 1)))
        a = loss_terms(model, burgers_problem, s)
        b = loss_terms(model, burgers_problem, doubled)
        assert a.l_pde == pytest.approx(b.l_pde, rel=1e-12)
        assert a.l_t == pytest.approx(b.l_t, rel=1e-12)
        assert a.l_x == pytest.approx(b.l_x, rel=1e-12)

    def test_empty_sets_rejected(self, burgers_problem):
        model = build_model("cpinn", 40, 1, seed=2)
        empty = CollocationSet(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 2)))
        with pytest.raises(StructuralError):
            loss_terms(model, burgers_problem, empty)

    def test_weighted_total_on_tape_matches(self, burgers_problem):
        sampler = CollocationSampler(256, 2, burgers_problem.domain)
        model = build_model("cpinn", 40, 2, seed=0)
        tape = Tape(model.params)
        total, br = weighted_loss_on_tape(tape, model, burgers_problem,
                                          sampler.train, 2.0, 0.5)
        assert total.value() == pytest.approx(
            2.0 * (br.l_t + br.l_x) + 0.5 * br.l_pde, rel=1e-12)


class TestWeightedLoss:
    def test_plain_sum(self):
        br = LossBreakdown(0.4, 0.06, 0.04)
        assert weighted_loss(br, 1.0, 1.0) == pytest.approx(0.5)

    def test_arithmetic(self):
        br = LossBreakdown(l_pde=0.4, l_t=0.07, l_x=0.03)
        assert weighted_loss(br, 2.0, 0.5) == pytest.approx(0.4)

    def test_zero_breakdown(self):
        assert weighted_loss(LossBreakdown(0.0, 0.0, 0.0), 1.0, 1.0) == 0.0

    def test_nonpositive_weight_rejected(self):
        br = LossBreakdown(0.1, 0.1, 0.1)
        with pytest.raises(ConfigurationError):
            weighted_loss(br, 0.0, 1.0)
        with pytest.raises(ConfigurationError):
            weighted_loss(br, 1.0, -2.0)
