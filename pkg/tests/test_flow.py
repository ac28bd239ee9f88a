import numpy as np
import pytest

from crflab.errors import (
    DegenerateReference,
    NotPositiveDefinite,
    PositivityLost,
    PositivityUnreachable,
)
from crflab.geometry import (
    HermitianMatrixField,
    ScalarField,
    i_ddbar,
    metric_volume,
)
from crflab.flow import (
    FlowState,
    StepControl,
    equivalence_check,
    read_checkpoint,
    run,
    run_normalized,
    scenario_from_metric,
    step,
    write_checkpoint,
)
from crflab.tensors import chern_ricci, closedness_residual

from conftest import bandlimited_scalar


@pytest.fixture
def n1_metric(chart1):
    x = chart1.axis_coordinates(0)
    vals = np.exp(0.1 * np.sin(x))[..., None, None] * np.ones(chart1.shape + (1, 1))
    return HermitianMatrixField(chart1, vals.astype(complex))


@pytest.fixture
def n2_metric(chart2):
    from crflab.models import random_metric_recipe

    rng = np.random.default_rng(11)
    return random_metric_recipe(rng, 2, scale=0.12, peaked=False).build(chart2)


class TestScenarioConstruction:
    def test_flat_metric_trivial_references(self, chart2):
        g0 = HermitianMatrixField.constant(chart2, 1.5 * np.eye(2))
        sc = scenario_from_metric(g0, 10.0)
        assert np.max(np.abs(sc.chi.values)) <= 1e-14
        assert np.max(np.abs(sc.omega_density.values - 1.5 ** 2)) <= 1e-12

    def test_auto_potential_solves_trace_equation(self, chart2, n2_metric):
        sc = scenario_from_metric(n2_metric, 7.0)
        ric = chern_ricci(n2_metric)
        recovered = i_ddbar(sc.f_T0)
        assert np.max(np.abs(recovered.values - 7.0 * ric.values)) <= 1e-10
        assert closedness_residual(chart2, sc.chi.values) <= 1e-10

    def test_kahler_density_matches_definition(self, chart2):
        phi = bandlimited_scalar(chart2, 5, amplitude=0.1)
        g0 = HermitianMatrixField(chart2, 1.2 * np.eye(2) + i_ddbar(phi).values)
        sc = scenario_from_metric(g0, 5.0)
        from crflab.geometry import herm_det

        expected = herm_det(g0.values) * np.exp(sc.f_T0.values / 5.0)
        assert np.max(np.abs(sc.omega_density.values - expected)) <= 1e-12

    def test_unreachable_positivity_rejected(self, chart1, n1_metric):
        # a user-supplied potential that destroys positivity of alpha_T0
        x = chart1.axis_coordinates(0)
        f_bad = ScalarField(chart1, 10.0 * np.cos(x) * np.ones(chart1.shape))
        with pytest.raises(PositivityUnreachable):
            scenario_from_metric(n1_metric, 5.0, f_T0=f_bad)


class TestStepping:
    def test_flat_scenario_is_stationary(self, chart2):
        g0 = HermitianMatrixField.constant(chart2, np.eye(2))
        sc = scenario_from_metric(g0, 10.0)
        state = FlowState.initial(sc)
        for _ in range(3):
            state = step(state, sc)
        assert np.max(np.abs(state.phi.values)) <= 1e-14

    def test_rk4_reversibility_order(self, chart1, n1_metric):
        sc = scenario_from_metric(n1_metric, 50.0)
        state = FlowState.initial(sc)
        forward = step(state, sc, dt_max=1e-3)
        # reverse the step by integrating the reversed vector field
        class Reversed:
            def __init__(self, base):
                self.base = base

            def rhs(self, phi, t):
                vals, G = self.base.rhs(phi, forward.t - (t - state.t))
                return -vals, G

        from crflab.flow import _rk4

        back = _rk4(Reversed(sc).rhs, forward.phi.values, state.t, 1e-3)
        assert np.max(np.abs(back - state.phi.values)) <= 1e-3 ** 5

    def test_area_conserved_per_unit_time(self, chart1, n1_metric):
        sc = scenario_from_metric(n1_metric, 50.0)
        record, state = run(sc, 1.0)
        vol = record.column("volume")
        assert state.t >= 1.0 - 1e-9
        assert np.max(np.abs(vol - vol[0])) <= 1e-10

    def test_exactness_of_potential_decomposition(self, chart1, n1_metric):
        sc = scenario_from_metric(n1_metric, 50.0)
        _, state = run(sc, 0.5)
        diff = state.omega.values - sc.reference_metric(state.t)
        assert np.max(np.abs(state.phi.chart.mean(diff))) <= 1e-13

    def test_step_underflow(self, chart1, n1_metric):
        from crflab.errors import StepUnderflow

        sc = scenario_from_metric(
            n1_metric, 50.0, control=StepControl(dt_min=1.0)
        )
        with pytest.raises(StepUnderflow):
            step(FlowState.initial(sc), sc)

    def test_positivity_floor_triggers(self, chart1):
        # hand-built state below the eigenvalue floor: step must refuse
        g0 = HermitianMatrixField.constant(chart1, np.array([[1.0]]))
        sc = scenario_from_metric(g0, 10.0, control=StepControl(eps_pd=1e-2))
        x = chart1.axis_coordinates(0)
        phi_vals = -3.97 * np.cos(x) * np.ones(chart1.shape)
        omega = HermitianMatrixField(
            chart1, g0.values + chart1.complex_hessian(phi_vals)
        )
        assert 0 < np.min(omega.values[..., 0, 0].real) < 1e-2
        state = FlowState(
            0.0, ScalarField(chart1, phi_vals), ScalarField.zeros(chart1), omega
        )
        with pytest.raises(PositivityLost):
            step(state, sc)

    def test_interior_stage_positivity_guard(self, chart1):
        g0 = HermitianMatrixField.constant(chart1, np.array([[1.0]]))
        sc = scenario_from_metric(g0, 10.0)
        x = chart1.axis_coordinates(0)
        with pytest.raises(PositivityLost):
            sc.rhs(-8.0 * np.cos(x) * np.ones(chart1.shape), 0.0)


class TestRun:
    def test_gauge_consistency_fd_in_time(self, chart1, n1_metric):
        # evolving phi then forming omega agrees with evolving omega by -Ric
        sc = scenario_from_metric(n1_metric, 50.0)
        state = FlowState.initial(sc)
        dt = 5e-4
        minus = step(state, sc, dt_max=dt)
        center = step(minus, sc, dt_max=dt)
        plus = step(center, sc, dt_max=dt)
        fd = (plus.omega.values - minus.omega.values) / (plus.t - minus.t)
        ric = chern_ricci(center.omega).values
        assert np.max(np.abs(fd + ric)) <= 1e-6

    def test_monitors_monotone(self, chart1, n1_metric):
        sc = scenario_from_metric(n1_metric, 50.0)
        record, _ = run(sc, 3.0)
        q1 = record.column("q1_max")
        q0 = record.column("q0_min")
        assert np.max(np.diff(q1)) <= 1e-8
        assert np.min(np.diff(q0)) >= -1e-8
        drift = record.column("phi_sup") - sc.monitor_A * record.column("t")
        assert np.max(np.diff(drift)) <= 1e-8

    def test_horizon_validation(self, chart1, n1_metric):
        sc = scenario_from_metric(n1_metric, 2.0)
        with pytest.raises(ValueError):
            run(sc, 3.0)

    def test_convergence_declaration(self, chart1, n1_metric):
        sc = scenario_from_metric(
            n1_metric, 500.0, convergence_tol=1e-5, convergence_patience=2
        )
        record, state = run(sc, 400.0)
        assert "converged_at" in record.meta
        assert state.t < 400.0

    def test_positivity_lost_propagates_with_state(self, chart1):
        g0 = HermitianMatrixField.constant(chart1, np.array([[1.0]]))
        sc = scenario_from_metric(g0, 10.0, control=StepControl(eps_pd=1e-2))
        x = chart1.axis_coordinates(0)
        phi_vals = -3.97 * np.cos(x) * np.ones(chart1.shape)
        omega = HermitianMatrixField(
            chart1, g0.values + chart1.complex_hessian(phi_vals)
        )
        state = FlowState(
            0.0, ScalarField(chart1, phi_vals), ScalarField.zeros(chart1), omega
        )
        with pytest.raises(PositivityLost) as info:
            run(sc, 1.0, state=state)
        assert info.value.last_state is not None
        assert hasattr(info.value, "record")

    def test_checkpoint_roundtrip(self, tmp_path, chart1, n1_metric):
        sc = scenario_from_metric(n1_metric, 50.0)
        _, state = run(sc, 0.2)
        path = str(tmp_path / "state.snap")
        write_checkpoint(path, state, dt_hint=1e-3)
        loaded = read_checkpoint(path, sc)
        assert abs(loaded.t - state.t) <= 1e-15
        assert np.max(np.abs(loaded.phi.values - state.phi.values)) <= 1e-15
        assert np.max(np.abs(loaded.omega.values - state.omega.values)) <= 1e-13


class TestNormalized:
    def test_requires_target_on_degenerate_chart(self, chart2, n2_metric):
        sc = scenario_from_metric(n2_metric, 10.0)
        with pytest.raises(DegenerateReference):
            run_normalized(sc, 1.0)

    def test_target_must_be_positive(self, chart2, n2_metric):
        sc = scenario_from_metric(n2_metric, 10.0)
        bad = HermitianMatrixField.constant(chart2, np.diag([1.0, -1.0]))
        with pytest.raises(NotPositiveDefinite):
            run_normalized(sc, 1.0, target_form=bad)

    def test_flat_exponential_decay(self, chart1):
        g0 = HermitianMatrixField.constant(chart1, np.array([[2.0]]))
        sc = scenario_from_metric(g0, 10.0)
        _, _, samples = run_normalized(
            sc, 2.0, target_form=g0, sample_times=[1.0, 2.0]
        )
        for t, vals in samples.items():
            ratio = vals[..., 0, 0].real / 2.0
            assert np.max(np.abs(ratio - np.exp(-t))) <= 0.05 * np.exp(-t)

    def test_equivalence_small_grid(self, chart1, n1_metric):
        sc = scenario_from_metric(n1_metric, 100.0)
        out = equivalence_check(sc, s_end=2.0, samples=9)
        assert out["max_discrepancy"] <= 1e-5


class TestTrajectoryRecord:
    def test_rows_strictly_increasing(self):
        from crflab.flow import TrajectoryRecord

        rec = TrajectoryRecord()
        row = {c: 0.0 for c in rec.columns}
        rec.append(**row)
        with pytest.raises(ValueError):
            rec.append(**row)

    def test_volume_matches_direct_integral(self, chart1, n1_metric):
        sc = scenario_from_metric(n1_metric, 50.0)
        record, state = run(sc, 0.1)
        assert abs(record.column("volume")[-1] - metric_volume(state.omega)) <= 1e-12
