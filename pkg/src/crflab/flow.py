"""Time stepping of the scalar metric-evolution equation on torus charts.

The metric flow d_t omega = -Ric(omega) reduces to the scalar equation

    d_t phi = log( det(ghat_t + Hess phi) / Omega0 ),   omega = ghat_t + i ddbar phi,

for a reference family ghat_t = g0 + t*chi and a positive density Omega0
with i ddbar log Omega0 = chi. The normalized variant integrates

    d_t phi = log( det(ghat_t + Hess phi) / Omega0 ) - phi,
    ghat_t = chi + e^{-t} (g0 - chi),

whose metric solves d_t omega = -Ric(omega) - omega; the two runs are
related by omega_norm(t) = omega(s)/(s+1) at t = log(s+1).

Stepping is explicit fourth-order Runge-Kutta with a diffusion-limited
adaptive step: dt <= safety * 2.7 / max_nodes( lambda_max(g^{-1}) *
sum_active k_max^2 / 4 ), the stability interval of the classical scheme on
the negative real axis against the largest symbol of the complex Laplacian.
Positivity of omega is asserted after every accepted step; dropping below
the eigenvalue floor signals the approach to the maximal existence time.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateReference,
    NotPositiveDefinite,
    PositivityLost,
    PositivityUnreachable,
    StepUnderflow,
)
from .geometry import (
    HermitianMatrixField,
    ScalarField,
    VolumeField,
    herm_det,
    herm_eig_bounds,
    herm_logdet,
    i_ddbar,
    metric_volume,
    min_eigenvalue,
)
from .tensors import _check_closed, chern_ricci

_RK4_STABILITY = 2.7


@dataclass
class StepControl:
    dt_init: float = 1e-3
    safety: float = 0.8
    eps_pd: float = 1e-8
    dt_min: float = 1e-12


TRAJECTORY_COLUMNS = (
    "t",
    "dt",
    "volume",
    "eig_min",
    "eig_max",
    "phi_sup",
    "phi_inf",
    "phidot_sup",
    "phidot_inf",
    "q1_max",
    "q0_min",
    "schwarz_u_sup",
)


class TrajectoryRecord:
    """Per-step monitor rows with a fixed column order."""

    columns = TRAJECTORY_COLUMNS

    def __init__(self, meta=None):
        self.rows = []
        self.meta = dict(meta or {})

    def append(self, **kwargs):
        row = tuple(float(kwargs[c]) for c in self.columns)
        if self.rows and not row[0] > self.rows[-1][0]:
            raise ValueError("trajectory rows must be strictly increasing in t")
        self.rows.append(row)

    def column(self, name):
        idx = self.columns.index(name)
        return np.array([r[idx] for r in self.rows])

    def to_csv(self, path):
        from .io import write_csv

        write_csv(path, self.columns, self.rows)


class FlowScenario:
    """Reference data for one flow run.

    Attributes
    ----------
    g0 : initial metric field.
    T0 : horizon of the reference family (Q0 bookkeeping uses it).
    chi : closed (1,1) form with ghat_t = g0 + t*chi.
    omega_density : positive density Omega0; the equation's volume form is
        n! 2^n Omega0 dLeb, so the right side is log(det(g)/Omega0).
    f_T0 : the potential used to build chi and Omega0 (None when chi given
        directly).
    control : StepControl.
    """

    def __init__(
        self,
        g0,
        T0,
        chi,
        omega_density,
        f_T0=None,
        control=None,
        convergence_tol=1e-6,
        convergence_patience=50,
        closedness_tol=1e-10,
    ):
        chart = g0.chart
        chart.require_same(chi.chart)
        chart.require_same(omega_density.chart)
        self.chart = chart
        self.g0 = g0
        self.T0 = float(T0)
        self.chi = chi
        self.omega_density = omega_density
        self.f_T0 = f_T0
        self.control = control or StepControl()
        self.convergence_tol = float(convergence_tol)
        self.convergence_patience = int(convergence_patience)

        _check_closed(chart, chi.values, closedness_tol, "chi")
        self._log_density = np.log(omega_density.values)
        for ts in np.linspace(0.0, self.T0, 17):
            lo, _ = herm_eig_bounds(self.reference_metric(ts))
            if lo <= 0.0:
                raise PositivityUnreachable(
                    f"reference family loses positivity at t = {ts:.4g}"
                )
        # constant for the drift monitor max_M(phi - A t)
        a = -np.inf
        for ts in np.linspace(0.0, self.T0, 9):
            val = herm_logdet(
                HermitianMatrixField(chart, self.reference_metric(ts)).values
            )
            a = max(a, float(np.max(val - self._log_density)))
        self.monitor_A = a + 0.1
        self._ksum = sum(
            ((chart.resolution[ax] // 2 - 1) * 2.0 * np.pi / chart.periods[ax]) ** 2
            for ax in chart.active_axes
        )

    def reference_metric(self, t):
        return self.g0.values + t * self.chi.values

    def rhs(self, phi_values, t):
        """log(det(ghat_t + Hess phi)/Omega0); raises on loss of positivity."""
        G = self.reference_metric(t) + self.chart.complex_hessian(phi_values)
        det = herm_det(G)
        tr = np.einsum("...ii->...", G).real
        if det.min() <= 0.0 or tr.min() <= 0.0:
            raise PositivityLost("interior stage lost positivity", t=t)
        return np.log(det) - self._log_density, G

    def cfl_dt(self, omega_values):
        lo, _ = herm_eig_bounds(omega_values)
        if lo <= 0.0:
            raise PositivityLost("metric not positive at step start")
        rate = 0.25 * self._ksum / lo
        return self.control.safety * _RK4_STABILITY / rate


@dataclass
class FlowState:
    t: float
    phi: ScalarField
    phidot: ScalarField
    omega: HermitianMatrixField

    @classmethod
    def initial(cls, scenario, phi=None):
        chart = scenario.chart
        phi = phi if phi is not None else ScalarField.zeros(chart)
        pd_vals, G = scenario.rhs(phi.values, 0.0)
        omega = HermitianMatrixField(chart, G)
        low = min_eigenvalue(omega)
        if low < scenario.control.eps_pd:
            raise NotPositiveDefinite(f"initial metric eigenvalue {low:.3e}")
        return cls(0.0, phi, ScalarField(chart, pd_vals), omega)


def scenario_from_metric(g0, T0, f_T0=None, **kwargs):
    """Build the reference family and volume density from an initial metric.

    With ``f_T0`` omitted the potential is derived spectrally: the trace of
    the target T0*Ric(omega_0) is inverted through the flat Laplacian, which
    recovers the exact discrete potential because Ric(omega_0) is itself a
    discrete complex Hessian. The resulting chi = (1/T0) i ddbar f - Ric(omega_0)
    vanishes at rounding level and Omega0 = det(g0) e^{f/T0} is the
    corresponding flat density.
    """
    chart = g0.chart
    T0 = float(T0)
    if T0 <= 0.0:
        raise ValueError("T0 must be positive")
    ric0 = chern_ricci(g0)
    if f_T0 is None:
        target = T0 * ric0.values
        trace = np.einsum("...ii->...", target).real
        f_vals = chart.solve_flat_poisson(4.0 * trace)
        f_T0 = ScalarField(chart, f_vals)
    else:
        chart.require_same(f_T0.chart)
    hess_f = i_ddbar(f_T0)
    alpha_T0 = HermitianMatrixField(
        chart, g0.values - T0 * ric0.values + hess_f.values
    )
    if min_eigenvalue(alpha_T0) <= 0.0:
        raise PositivityUnreachable(
            "alpha_T0 + i ddbar f_T0 is not positive definite"
        )
    chi = HermitianMatrixField(chart, hess_f.values / T0 - ric0.values)
    density = VolumeField(
        chart, herm_det(g0.values) * np.exp(f_T0.values / T0)
    )
    return FlowScenario(g0, T0, chi, density, f_T0=f_T0, **kwargs)


def _rk4(rhs, phi, t, dt):
    k1, _ = rhs(phi, t)
    k2, _ = rhs(phi + 0.5 * dt * k1, t + 0.5 * dt)
    k3, _ = rhs(phi + 0.5 * dt * k2, t + 0.5 * dt)
    k4, _ = rhs(phi + dt * k3, t + dt)
    return phi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state, scenario, dt_max=None):
    """One accepted explicit step; returns the new FlowState."""
    dt = scenario.cfl_dt(state.omega.values)
    if dt_max is not None:
        dt = min(dt, dt_max)
    if dt < scenario.control.dt_min:
        raise StepUnderflow(f"dt = {dt:.3e} underflow at t = {state.t:.6g}")
    chart = scenario.chart
    phi_new = _rk4(scenario.rhs, state.phi.values, state.t, dt)
    t_new = state.t + dt
    pd_vals, G = scenario.rhs(phi_new, t_new)
    omega = HermitianMatrixField(chart, G)
    low = min_eigenvalue(omega)
    if low < scenario.control.eps_pd:
        raise PositivityLost(
            f"metric eigenvalue {low:.3e} below floor at t = {t_new:.6g}",
            t=t_new,
            last_state=state,
        )
    return FlowState(t_new, ScalarField(chart, phi_new), ScalarField(chart, pd_vals), omega)


def _monitor_row(state, scenario, dt):
    omega = state.omega
    lo, hi = herm_eig_bounds(omega.values)
    phi = state.phi.values
    pd = state.phidot.values
    t = state.t
    q0 = (scenario.T0 - t) * pd + phi + scenario.chart.n * t
    q1 = t * pd - phi - scenario.chart.n * t
    u = herm_det(scenario.g0.values) / herm_det(omega.values)
    return dict(
        t=t,
        dt=dt,
        volume=metric_volume(omega),
        eig_min=lo,
        eig_max=hi,
        phi_sup=phi.max(),
        phi_inf=phi.min(),
        phidot_sup=pd.max(),
        phidot_inf=pd.min(),
        q1_max=q1.max(),
        q0_min=q0.min(),
        schwarz_u_sup=u.max(),
    )


def run(scenario, t_end, state=None, callback=None):
    """Integrate to t_end (or early convergence); monitors every step.

    Convergence is declared when the per-unit-time update rate
    sup|dphi|/dt stays below ``convergence_tol`` for ``convergence_patience``
    consecutive whole time units. Step errors propagate with the last good
    state and partial record attached.
    """
    t_end = float(t_end)
    if t_end > scenario.T0 + 1e-12:
        raise ValueError("t_end exceeds the scenario horizon T0")
    state = state or FlowState.initial(scenario)
    record = TrajectoryRecord(meta={"mode": "unnormalized"})
    record.append(**_monitor_row(state, scenario, 0.0))
    quiet_since = None
    while state.t < t_end - 1e-12:
        prev = state
        try:
            state = step(state, scenario, dt_max=t_end - state.t)
        except PositivityLost as err:
            err.record = record
            err.last_state = err.last_state or prev
            raise
        dt = state.t - prev.t
        # rate of the mean-free update: the spatial mean of phi is gauge
        # (it drops out of i ddbar phi) and drifts linearly in general
        dphi = state.phi.values - prev.phi.values
        rate = float(np.max(np.abs(dphi - dphi.mean()))) / dt
        record.append(**_monitor_row(state, scenario, dt))
        if callback is not None:
            callback(state, record)
        if rate < scenario.convergence_tol:
            if quiet_since is None:
                quiet_since = state.t
            elif state.t - quiet_since >= scenario.convergence_patience:
                record.meta["converged_at"] = state.t
                break
        else:
            quiet_since = None
    return record, state


def ricci_sup_norm(omega):
    """Certificate ||Ric(omega)||_inf, max over nodes and entries."""
    return float(np.max(np.abs(chern_ricci(omega).values)))


# -- normalized mode -----------------------------------------------------------


class NormalizedScenario:
    """Reference family of the normalized flow built over a FlowScenario.

    The limiting form of the family is the scenario's chi; on charts with
    vanishing first Bott-Chern class no volume form makes that limit
    positive, so running requires an explicit positive ``target_form``
    acknowledgment, recorded in the trajectory metadata (the hypothesis
    c1(M) < 0 of the long-time convergence statement is unavailable here).
    """

    def __init__(self, base, target_form=None):
        self.base = base
        self.chart = base.chart
        self.control = base.control
        limit_lo, _ = herm_eig_bounds(base.chi.values)
        if limit_lo <= 0.0:
            if target_form is None:
                raise DegenerateReference(
                    "the limiting reference form -Ric(Omega) is not positive "
                    "definite on this chart; pass an explicit positive "
                    "target_form to run the degenerate normalized flow"
                )
            self.chart.require_same(target_form.chart)
            if min_eigenvalue(target_form) <= 0.0:
                raise NotPositiveDefinite("target_form must be positive definite")
            self.target_note = "degenerate reference; user target form recorded"
        else:
            self.target_note = "positive limiting reference"
        self._log_density = base._log_density
        self._ksum = base._ksum

    def reference_metric(self, t):
        decay = math.exp(-t)
        return self.base.chi.values * (1.0 - decay) + decay * self.base.g0.values

    def rhs(self, phi_values, t):
        G = self.reference_metric(t) + self.chart.complex_hessian(phi_values)
        det = herm_det(G)
        tr = np.einsum("...ii->...", G).real
        if det.min() <= 0.0 or tr.min() <= 0.0:
            raise PositivityLost("interior stage lost positivity", t=t)
        return np.log(det) - self._log_density - phi_values, G

    def cfl_dt(self, omega_values):
        lo, _ = herm_eig_bounds(omega_values)
        if lo <= 0.0:
            raise PositivityLost("metric not positive at step start")
        rate = 0.25 * self._ksum / lo + 1.0
        return self.control.safety * _RK4_STABILITY / rate


def run_normalized(scenario, t_end, target_form=None, sample_times=()):
    """Integrate the normalized potential equation; returns
    (TrajectoryRecord, FlowState, samples) where samples maps requested
    times to metric values."""
    norm = NormalizedScenario(scenario, target_form)
    chart = scenario.chart
    phi = np.zeros(chart.shape)
    t = 0.0
    pd_vals, G = norm.rhs(phi, t)
    state = FlowState(
        0.0,
        ScalarField(chart, phi),
        ScalarField(chart, pd_vals),
        HermitianMatrixField(chart, G),
    )
    record = TrajectoryRecord(
        meta={"mode": "normalized", "target_note": norm.target_note}
    )
    record.append(**_monitor_row(state, scenario, 0.0))
    samples = {}
    targets = sorted(float(s) for s in sample_times)
    while targets and targets[0] <= state.t + 1e-12:
        samples[targets.pop(0)] = state.omega.values.copy()
    while state.t < t_end - 1e-12:
        dt = norm.cfl_dt(state.omega.values)
        dt = min(dt, t_end - state.t)
        if targets:
            dt = min(dt, targets[0] - state.t)
        if dt < norm.control.dt_min:
            raise StepUnderflow(f"dt underflow at t = {state.t:.6g}")
        phi_new = _rk4(norm.rhs, state.phi.values, state.t, dt)
        t_new = state.t + dt
        pd_vals, G = norm.rhs(phi_new, t_new)
        omega = HermitianMatrixField(chart, G)
        low = min_eigenvalue(omega)
        if low < norm.control.eps_pd:
            raise PositivityLost(
                f"normalized metric eigenvalue {low:.3e} below floor",
                t=t_new,
                last_state=state,
            )
        state = FlowState(
            t_new, ScalarField(chart, phi_new), ScalarField(chart, pd_vals), omega
        )
        record.append(**_monitor_row(state, scenario, dt))
        while targets and state.t >= targets[0] - 1e-12:
            samples[targets.pop(0)] = state.omega.values.copy()
    return record, state, samples


def equivalence_check(scenario, s_end=5.0, samples=21):
    """Sup-norm agreement between the two integrations.

    Runs the unnormalized flow to s_end and the normalized flow to
    log(s_end + 1), comparing omega_norm(t_j) against omega(s_j)/(s_j + 1)
    at t_j = log(s_j + 1).
    """
    t_samples = np.linspace(0.0, math.log(s_end + 1.0), samples)
    s_samples = np.expm1(t_samples)

    stored = {}
    state = FlowState.initial(scenario)
    stored[0.0] = state.omega.values.copy()
    for s_target in s_samples[1:]:
        while state.t < s_target - 1e-12:
            state = step(state, scenario, dt_max=s_target - state.t)
        stored[float(s_target)] = state.omega.values.copy()

    record, _, nsamples = run_normalized(
        scenario,
        float(t_samples[-1]),
        target_form=HermitianMatrixField(scenario.chart, scenario.g0.values),
        sample_times=[float(t) for t in t_samples],
    )
    disc = 0.0
    for t_j, s_j in zip(t_samples, s_samples):
        a = nsamples[float(t_j)]
        b = stored[float(s_j)] / (s_j + 1.0)
        disc = max(disc, float(np.max(np.abs(a - b))))
    return {"max_discrepancy": disc, "normalized_record": record}


# -- checkpointing --------------------------------------------------------------


def write_checkpoint(path, state, dt_hint):
    from .io import write_snapshot

    write_snapshot(path, state.phi, footer=(state.t, dt_hint))


def read_checkpoint(path, scenario):
    from .io import read_snapshot

    phi, footer = read_snapshot(path, chart=scenario.chart, want_footer=True)
    t, _ = footer
    pd_vals, G = scenario.rhs(phi.values, t)
    return FlowState(
        t,
        phi,
        ScalarField(scenario.chart, pd_vals),
        HermitianMatrixField(scenario.chart, G),
    )
