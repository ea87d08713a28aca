from collections import deque

import numpy as np
import pytest

import cqe.optimize as opt
from cqe.ansatz import SparsifierConfig
from cqe.oracle import SectorSpec, fci_ground_state
from cqe.optimize import (
    CQEProblem,
    LineSearchError,
    OptimizerConfig,
    bfgs_update,
    fr_beta,
    lbfgs_direction,
    quadratic_alpha,
    run_cqe,
    wolfe_line_search,
)
from cqe.pauli import hamiltonian_to_pauli
from conftest import load


def curvature_pair(rng, mu):
    s = rng.normal(size=mu)
    y = s + 0.3 * rng.normal(size=mu)
    if y @ s <= 0:
        y = -y
    return s, y


class TestBFGSUpdate:
    def test_identity_case(self, rng):
        s = rng.normal(size=6)
        assert np.allclose(bfgs_update(np.eye(6), s, s.copy()), np.eye(6), atol=1e-14)

    def test_secant(self, rng):
        binv = np.eye(10)
        for _ in range(10):
            s, y = curvature_pair(rng, 10)
            binv = bfgs_update(binv, s, y)
            assert np.abs(binv @ y - s).max() < 1e-12

    def test_stays_symmetric_positive_definite(self, rng):
        binv = np.eye(20)
        for _ in range(100):
            s, y = curvature_pair(rng, 20)
            binv = bfgs_update(binv, s, y)
        assert np.array_equal(binv, binv.T)
        assert np.linalg.eigvalsh(binv).min() > 0

    def test_skips_without_curvature(self, rng):
        binv = np.eye(4)
        s = rng.normal(size=4)
        assert bfgs_update(binv, s, -s) is binv
        assert bfgs_update(binv, s, np.zeros(4)) is binv


class TestLBFGS:
    def test_empty_history(self, rng):
        g = rng.normal(size=5)
        assert np.array_equal(lbfgs_direction(deque(), g), -g)

    def test_matches_dense_chain(self, rng):
        mu = 8
        a = rng.normal(size=(mu, mu))
        hess = a @ a.T + mu * np.eye(mu)
        history = []
        for _ in range(mu):
            s = rng.normal(size=mu)
            history.append((s, hess @ s))
        g = rng.normal(size=mu)
        s_new, y_new = history[-1]
        dense = (s_new @ y_new) / (y_new @ y_new) * np.eye(mu)
        for s, y in history:
            dense = bfgs_update(dense, s, y)
        assert np.abs(lbfgs_direction(deque(history), g) + dense @ g).max() < 1e-10

    def test_is_descent(self, rng):
        history = deque(curvature_pair(rng, 12) for _ in range(3))
        for _ in range(20):
            g = rng.normal(size=12)
            assert g @ lbfgs_direction(history, g) < 0


class TestScalars:
    def test_fr_beta(self, rng):
        g = rng.normal(size=5)
        assert fr_beta(-g, g) == pytest.approx(1)
        assert fr_beta(0.5 * g, g) == pytest.approx(0.25)

    def test_quadratic_alpha_recovers_parabola(self):
        e0, slope0 = 1.0, -0.8
        energy = lambda a: e0 + slope0 * a + 2 * a * a  # noqa: E731
        assert quadratic_alpha(e0, slope0, energy(0.5), 0.5) == pytest.approx(0.2)

    def test_quadratic_alpha_fallbacks(self):
        assert quadratic_alpha(1.0, -1.0, -5.0, 0.5) == 0.5  # concave fit
        assert quadratic_alpha(1.0, -1.0, 0.501, 0.5, alpha_max=2.0) == 2.0


class TestLineSearch:
    @staticmethod
    def parabola(a):
        return (a - 1) ** 2, 2 * (a - 1)

    def test_unit_step_on_parabola(self):
        res = wolfe_line_search(self.parabola, 1.0, -2.0, 1.0)
        assert res.alpha == 1.0 and res.evaluations == 1

    def test_tight_curvature_finds_minimizer(self):
        res = wolfe_line_search(self.parabola, 1.0, -2.0, 0.1, c2=0.1)
        assert res.alpha == pytest.approx(1, abs=0.1)

    @pytest.mark.parametrize("alpha0", [0.01, 0.5, 3.0, 20.0])
    def test_strong_wolfe_holds(self, alpha0):
        def phi(a):
            return np.cos(3 * a) + 0.5 * a * a, -3 * np.sin(3 * a) + a

        f0, d0 = phi(0.0)[0], -1.0
        phi_shift = lambda a: (phi(a)[0] - a, phi(a)[1] - 1)  # noqa: E731
        res = wolfe_line_search(phi_shift, f0, d0, alpha0, c1=1e-4, c2=0.4)
        assert res.value <= f0 + 1e-4 * res.alpha * d0
        assert abs(res.slope) <= 0.4 * abs(d0)
        assert res.evaluations <= 20

    def test_rejects_ascent(self):
        with pytest.raises(LineSearchError, match="descent"):
            wolfe_line_search(self.parabola, 1.0, 0.5, 1.0)

    def test_unbounded_line_fails(self):
        with pytest.raises(LineSearchError):
            wolfe_line_search(lambda a: (-a, -1.0), 0.0, -1.0, 1.0)


class TestConfig:
    def test_defaults(self):
        cfg = OptimizerConfig()
        assert cfg.kind == "bfgs" and cfg.lbfgs_memory == 3 and cfg.max_iter == 300
        assert cfg.wolfe_c2 == 0.9 and OptimizerConfig(kind="cg-fr").wolfe_c2 == 0.4

    @pytest.mark.parametrize("kwargs", [{"kind": "newton"}, {"threshold": 0}, {"c1": 0.95},
                                        {"lbfgs_memory": 0}, {"c2": 1.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)


@pytest.fixture(scope="module")
def h4_problem():
    return CQEProblem(load("h4_1.0"))


@pytest.fixture(scope="module")
def fci_h4():
    ints = load("h4_1.0")
    return fci_ground_state(hamiltonian_to_pauli(ints), SectorSpec.of(ints))


@pytest.fixture(scope="module")
def bfgs_trace(h4_problem):
    return run_cqe(h4_problem, OptimizerConfig(kind="bfgs"))


class TestRun:
    def test_converges_to_fci(self, bfgs_trace, fci_h4):
        assert bfgs_trace.converged
        assert bfgs_trace.final_grad_norm < bfgs_trace.threshold
        assert bfgs_trace.final_energy == pytest.approx(fci_h4[0], abs=1e-6)
        assert bfgs_trace.residual_evaluations == 150 * bfgs_trace.iterations

    def test_records(self, bfgs_trace):
        recs = bfgs_trace.records
        assert [r.n for r in recs] == list(range(len(recs)))
        assert all(r.grad_norm >= 0 for r in recs)
        cumulative = np.cumsum([r.circuit_cnots for r in recs])
        assert [r.cumulative_cnots for r in recs] == cumulative.tolist()
        assert recs[-1].layer_count == bfgs_trace.iterations  # p_depth=0 appends every step

    def test_wolfe_conditions_on_every_step(self, bfgs_trace):
        recs = bfgs_trace.records
        for prev, rec in zip(recs, recs[1:]):
            assert rec.slope0 < 0
            assert rec.energy <= prev.energy + 1e-4 * rec.alpha * rec.slope0
            assert abs(rec.slope) <= 0.9 * abs(rec.slope0)

    def test_energy_strictly_decreases(self, bfgs_trace):
        assert np.all(np.diff(bfgs_trace.energies) < 0)

    def test_secant_relation_each_iteration(self, bfgs_trace):
        errors = [r.secant_error for r in bfgs_trace.records[1:] if not np.isnan(r.secant_error)]
        assert len(errors) >= bfgs_trace.iterations - 1
        assert max(errors) < 1e-10

    def test_variational_bound(self, bfgs_trace, fci_h4):
        assert bfgs_trace.energies.min() >= fci_h4[0] - 1e-12

    def test_start_at_eigenstate(self, h4_problem, fci_h4):
        trace = run_cqe(h4_problem, OptimizerConfig(), initial_state=fci_h4[1])
        assert trace.converged and trace.iterations == 0

    def test_loose_threshold_stops_immediately(self, h4_problem):
        trace = run_cqe(h4_problem, OptimizerConfig(threshold=10.0))
        assert trace.converged and trace.iterations == 0 and trace.residual_evaluations == 0

    def test_max_iter(self, h4_problem):
        trace = run_cqe(h4_problem, OptimizerConfig(kind="gd", max_iter=3))
        assert trace.termination == "max_iter" and trace.iterations == 3

    def test_cg_starts_as_gradient_descent(self, h4_problem):
        cg = run_cqe(h4_problem, OptimizerConfig(kind="cg-fr", max_iter=1)).records[1]
        first_norm = run_cqe(h4_problem, OptimizerConfig(max_iter=0)).records[0].grad_norm
        assert cg.slope0 == pytest.approx(-first_norm**2)

    @pytest.mark.parametrize("kind", ["gd", "gd-quad", "cg-fr", "lbfgs"])
    def test_other_optimizers_descend(self, h4_problem, kind):
        trace = run_cqe(h4_problem, OptimizerConfig(kind=kind, max_iter=15))
        assert trace.energies[-1] < trace.energies[0]
        for rec in trace.records[1:]:
            assert rec.slope0 < 0

    def test_gd_quad_residual_oscillates(self):
        trace = run_cqe(CQEProblem(load("h4_2.0")), OptimizerConfig(kind="gd-quad", max_iter=30))
        assert np.any(np.diff(trace.grad_norms) > 0)

    def test_unencoded_problem(self):
        trace = run_cqe(CQEProblem(load("h2_0.7414"), "unencoded"), OptimizerConfig())
        assert trace.converged
        assert trace.final_energy == pytest.approx(-1.137270174660903, abs=1e-8)

    def test_sparsified_run_respects_window(self, h4_problem):
        cfg = OptimizerConfig(sparsifier=SparsifierConfig(criterion="descent", c=0.5, include=True, p_depth=3))
        trace = run_cqe(h4_problem, cfg)
        assert trace.converged
        assert trace.ansatz.term_count == trace.records[-1].term_count
        assert len(trace.ansatz.layers) < trace.iterations

    def test_empty_step_stalls(self, h4_problem, monkeypatch):
        monkeypatch.setattr(opt, "sparsify", lambda step, *a, **k: np.zeros_like(step))
        trace = run_cqe(h4_problem, OptimizerConfig())
        assert trace.termination == "stalled" and trace.iterations == 0

    def test_callback_sees_every_record(self, h4_problem):
        seen = []
        trace = run_cqe(h4_problem, OptimizerConfig(max_iter=4), callback=seen.append)
        assert seen == trace.records

    def test_deterministic(self, h4_problem):
        a = run_cqe(h4_problem, OptimizerConfig(kind="lbfgs", max_iter=10)).records
        b = run_cqe(h4_problem, OptimizerConfig(kind="lbfgs", max_iter=10)).records
        assert a == b
