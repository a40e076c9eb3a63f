"""Runtime functionals of the flow and the identities they must satisfy.

Everything here is a pure function of sampled states.  The series produced by
:func:`evaluate_series` contains, per sample time:

* the entropy-type energy E = int R(v - ln v - 1) + u^2/2 + cv(theta - ln theta - 1),
* the four nonnegative dissipation integrals
  int v u^2/(r^2 theta), int r^(2(n-1)) u_x^2/(v theta),
  int (r^(n-1)u)_x^2/(v theta), int r^(2(n-1)) theta_x^2/(v theta^2),
* the running defect of the exact energy-dissipation identity
  d/dt int U + int [beta (r^(n-1)u)_x^2/(v theta)
  - 2 mu (n-1) (r^(n-2)u^2)_x/theta + kappa r^(2(n-1)) theta_x^2/(v theta^2)] = 0
  (the boundary flux vanishes under u(0)=0, theta_x(0)=0 and the far field),
* L2 and sup norms of (v-1, u, theta-1) and weighted gradient norms,
* the weighted functionals f(t) = int r^(2(n-1)) theta_x^2/(v theta^2) and
  g(t) = int v u^2/(r^2 theta) + int r^(2(n-1)) u_x^2/(v theta),
* the measure of the temperature superlevel set with its energy bound,
* the pointwise gap of the viscous quadratic form,
* unit-interval averages of v and theta (Jensen anchors),
* five running dissipation accumulators plus the total variation in time of
  the gradient norms,
* the relative defect of the local representation formula for v at the probe.

Time integrals use the trapezoid rule over the sampling cadence; the time
derivative accumulators use backward difference quotients between samples.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .grid import MassGrid, PhysParams
from .state import FlowState, discrete_gradients, div_ru, stress_sigma

__all__ = [
    "DiagnosticsSeries",
    "SERIES_COLUMNS",
    "energy_functional",
    "dissipation_rate",
    "balance_integrand",
    "energy_balance_residual",
    "viscous_form_gap",
    "quadratic_form",
    "pointwise_form_gap",
    "cell_averages",
    "anchor_roots",
    "superlevel_measure",
    "superlevel_bound",
    "cutoff_phi",
    "local_representation",
    "RepresentationResult",
    "norm_report",
    "evaluate_series",
]


# ---------------------------------------------------------------------------
# pointwise building blocks

def _u_sq_centers(state: FlowState) -> np.ndarray:
    """u^2 averaged onto centers (average of squares keeps positivity)."""
    return 0.5 * (state.u[:-1] ** 2 + state.u[1:] ** 2)


def _edge_theta_x_quadrature(state: FlowState, params: PhysParams):
    """Native interior-edge values of theta_x with quadrature weights.

    Returns (weights, theta_x, v_edge, theta_edge, w2_edge) for the integrals
    whose integrand is built on theta differences.
    """
    g = state.grid
    he = g.edge_gaps
    theta_x = np.diff(state.theta) / he
    v_e = 0.5 * (state.v[:-1] + state.v[1:])
    th_e = 0.5 * (state.theta[:-1] + state.theta[1:])
    w2 = state.r[1:-1] ** (2 * (params.n - 1))
    return he, theta_x, v_e, th_e, w2


def energy_functional(state: FlowState, params: PhysParams) -> float:
    """Entropy-type energy, zero exactly at the equilibrium (1, 0, 1)."""
    v, th = state.v, state.theta
    U = (
        params.R * (v - np.log(v) - 1.0)
        + 0.5 * _u_sq_centers(state)
        + params.cv * (th - np.log(th) - 1.0)
    )
    return float(np.sum(U * state.grid.cell_widths))


def dissipation_rate(state: FlowState, params: PhysParams) -> np.ndarray:
    """The four nonnegative dissipation integrals, in the order
    (v u^2/(r^2 theta), r^(2(n-1)) u_x^2/(v theta), (r^(n-1)u)_x^2/(v theta),
    r^(2(n-1)) theta_x^2/(v theta^2))."""
    g = state.grid
    h = g.cell_widths
    n = params.n
    v, th = state.v, state.theta
    gr = discrete_gradients(state)
    r_c = gr.r_centers
    u2 = _u_sq_centers(state)

    d1 = np.sum(v * u2 / (r_c**2 * th) * h)
    d2 = np.sum(r_c ** (2 * (n - 1)) * gr.u_x**2 / (v * th) * h)
    d3 = np.sum(gr.div_ru**2 / (v * th) * h)
    he, theta_x, v_e, th_e, w2 = _edge_theta_x_quadrature(state, params)
    d4 = np.sum(w2 * theta_x**2 / (v_e * th_e**2) * he)
    return np.array([d1, d2, d3, d4])


def balance_integrand(state: FlowState, params: PhysParams) -> float:
    """Spatial integral of the three-term dissipation bracket in the exact
    energy identity (its time integral balances the energy drop)."""
    g = state.grid
    h = g.cell_widths
    n = params.n
    v, th = state.v, state.theta
    G = div_ru(state)
    term_visc = params.beta * np.sum(G**2 / (v * th) * h)
    ru2 = state.r ** (n - 2) * state.u**2
    term_cross = 2.0 * params.mu * (n - 1) * np.sum(np.diff(ru2) / h / th * h)
    he, theta_x, v_e, th_e, w2 = _edge_theta_x_quadrature(state, params)
    term_cond = params.kappa * np.sum(w2 * theta_x**2 / (v_e * th_e**2) * he)
    return float(term_visc - term_cross + term_cond)


def energy_balance_residual(history, params: PhysParams) -> float:
    """|E(t_end) + int_0^t_end (dissipation bracket) - E(0)| over a history of
    states at increasing times; the time integral is a trapezoid over the
    samples."""
    states = list(history)
    if len(states) < 2:
        raise ValueError("need at least two states to form a balance residual")
    t = np.array([s.t for s in states])
    E = np.array([energy_functional(s, params) for s in states])
    phi = np.array([balance_integrand(s, params) for s in states])
    integral = np.sum(0.5 * (phi[1:] + phi[:-1]) * np.diff(t))
    return float(abs(E[-1] + integral - E[0]))


# ---------------------------------------------------------------------------
# viscous quadratic form

def viscous_form_gap(params: PhysParams) -> float:
    """Smallest eigenvalue C of the quadratic form Q(a, b) with
    a = r^(n-1) u_x and b = v u / r,

        Q = beta (a + (n-1) b)^2 - 2 mu (n-1) [2 b (a + (n-1) b) - n b^2],

    so that Q >= C (a^2 + b^2) pointwise.  Positive for all admissible
    viscosities."""
    n, beta, mu, lam = params.n, params.beta, params.mu, params.lam
    m11 = beta
    m12 = (n - 1) * lam
    m22 = (n - 1) * (beta * (n - 1) - 2.0 * mu * (n - 2))
    # stable 2x2 symmetric eigenvalue: no cancellation in the discriminant
    half_tr = 0.5 * (m11 + m22)
    disc = np.hypot(0.5 * (m11 - m22), m12)
    return float(half_tr - disc)


def quadratic_form(a, b, params: PhysParams):
    """Q(a, b) as above (vectorised)."""
    n, beta, mu = params.n, params.beta, params.mu
    s = a + (n - 1) * b
    return beta * s**2 - 2.0 * mu * (n - 1) * (2.0 * b * s - n * b**2)


def pointwise_form_gap(state: FlowState, params: PhysParams) -> float:
    """min over centers of Q(a, b) - C_min (a^2 + b^2); nonnegative up to
    floating-point rounding."""
    gr = discrete_gradients(state)
    a = gr.r_pow_ux
    b = gr.geom_vu / (params.n - 1)
    gap = quadratic_form(a, b, params) - viscous_form_gap(params) * (a**2 + b**2)
    return float(np.min(gap))


# ---------------------------------------------------------------------------
# Jensen anchors and superlevel sets

def _clipped_weights(grid: MassGrid, lo: float, hi: float) -> np.ndarray:
    """Per-cell overlap widths with the interval [lo, hi]."""
    return np.clip(
        np.minimum(grid.x_edges[1:], hi) - np.maximum(grid.x_edges[:-1], lo),
        0.0,
        None,
    )


def cell_averages(state: FlowState, k: int) -> tuple[float, float]:
    """Midpoint-quadrature averages of v and theta over the unit mass
    interval [k, k+1]."""
    g = state.grid
    if not (0 <= k and k + 1 <= g.x_max + 1e-12):
        raise ValueError(f"interval [{k}, {k + 1}] lies outside the grid")
    w = _clipped_weights(g, float(k), float(k + 1))
    total = w.sum()
    return float(np.dot(w, state.v) / total), float(np.dot(w, state.theta) / total)


def anchor_roots(cbar: float, tol: float = 1e-12) -> tuple[float, float]:
    """The two roots alpha1 <= 1 <= alpha2 of y - ln y - 1 = cbar, by
    bisection to absolute tolerance ``tol``."""
    if cbar < 0:
        raise ValueError(f"the bound must be nonnegative, got {cbar}")
    if cbar == 0.0:
        return 1.0, 1.0

    def f(y):
        return y - np.log(y) - 1.0 - cbar

    def bisect(lo, hi):
        f_lo = f(lo)
        for _ in range(200):
            if hi - lo <= tol:
                break
            mid = 0.5 * (lo + hi)
            f_mid = f(mid)
            if (f_mid > 0) == (f_lo > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    lower_bracket = min(0.5, np.exp(-(cbar + 1.0)))
    alpha1 = bisect(lower_bracket, 1.0)
    alpha2 = bisect(1.0, 2.0 * cbar + 2.0)
    return float(alpha1), float(alpha2)


def superlevel_measure(state: FlowState, a: float) -> float:
    """Total width of cells whose temperature exceeds the threshold a > 1."""
    if not (a > 1.0):
        raise ValueError(f"threshold must exceed 1, got {a}")
    return float(np.sum(state.grid.cell_widths[state.theta > a]))


def superlevel_bound(energy: float, a: float, params: PhysParams) -> float:
    """Explicit energy bound E / (cv (a - ln a - 1)) on the superlevel measure."""
    if not (a > 1.0):
        raise ValueError(f"threshold must exceed 1, got {a}")
    return float(energy / (params.cv * (a - np.log(a) - 1.0)))


# ---------------------------------------------------------------------------
# local representation of the specific volume

def cutoff_phi(x, k: int):
    """Piecewise-linear localizer: 1 below k, decaying to 0 on [k, k+1]."""
    if int(k) != k or k < 1:
        raise ValueError(f"cut-off level must be an integer >= 1, got {k}")
    x = np.asarray(x, dtype=float)
    return np.clip(k + 1.0 - x, 0.0, 1.0) if x.ndim else float(np.clip(k + 1.0 - x, 0.0, 1.0))


@dataclass(frozen=True)
class RepresentationResult:
    times: np.ndarray
    B: np.ndarray
    Y: np.ndarray
    v_repr: np.ndarray
    v_actual: np.ndarray
    residual: float  # max relative deviation over the sampled times


def _integral_linear_exp(h0, h1, ell0, ell1, dtau):
    """Exact integral of (linear h) * exp(-(linear ell)) over a segment.

    integral_0^dtau [h0 + (h1-h0) s/dtau] exp(-[ell0 + (ell1-ell0) s/dtau]) ds.
    Exact when the exponent is genuinely linear, which makes the equilibrium
    representation identity hold to rounding.  Vectorised over segments.
    """
    z = ell1 - ell0
    small = np.abs(z) < 1e-6
    z_safe = np.where(small, 1.0, z)
    em = np.exp(-z_safe)
    a0 = np.where(small, 1.0 - z / 2 + z**2 / 6 - z**3 / 24, -np.expm1(-z_safe) / z_safe)
    a1 = np.where(
        small,
        0.5 - z / 3 + z**2 / 8 - z**3 / 30,
        (1.0 - (1.0 + z_safe) * em) / z_safe**2,
    )
    return dtau * np.exp(-ell0) * (h0 * a0 + (h1 - h0) * a1)


def _trapz_tail(x_nodes, f_nodes, lo):
    """Trapezoid integral of the piecewise-linear interpolant from lo to the
    last node."""
    if lo <= x_nodes[0]:
        return float(np.trapezoid(f_nodes, x_nodes))
    idx = int(np.searchsorted(x_nodes, lo, side="right"))
    f_lo = float(np.interp(lo, x_nodes, f_nodes))
    xs = np.concatenate(([lo], x_nodes[idx:]))
    fs = np.concatenate(([f_lo], f_nodes[idx:]))
    return float(np.trapezoid(fs, xs))


def _representation_trajectory(states, params: PhysParams, k: int, x_probe: float):
    """ln B, ln Y, the represented v and the solved v at the probe point.

    The tail integral in Y depends on the probe point through the localizer;
    it is evaluated at ``x_probe`` throughout (Y is really Y(x_probe, t)).
    """
    first = states[0]
    g = first.grid
    n = params.n
    if not (k >= 1 and k + 1 <= g.x_max + 1e-12):
        raise ValueError(f"cut-off interval [{k}, {k + 1}] outside the grid")
    if not (max(k - 2, 0.0) < x_probe < k):
        raise ValueError(
            f"probe {x_probe} must lie in ({max(k - 2, 0)}, {k}) for cut-off level {k}"
        )
    if len(states) < 1:
        raise ValueError("empty history")

    xe, xc = g.x_edges, g.cell_centers
    phi_e = cutoff_phi(xe, k)
    w_unit = _clipped_weights(g, float(k), float(k + 1))
    beta, R = params.beta, params.R

    u0 = first.u
    r0_pow = first.r ** (1 - n)
    v0_probe = float(np.interp(x_probe, xc, first.v))

    times = np.array([s.t for s in states])
    m = len(states)
    ln_B = np.empty(m)
    theta_probe = np.empty(m)
    v_actual = np.empty(m)
    S = np.empty(m)  # integral of sigma over [k, k+1]
    W = np.empty(m)  # tail integral of phi r^-n u^2
    for j, st in enumerate(states):
        tail = phi_e * (r0_pow * u0 - st.r ** (1 - n) * st.u)
        ln_B[j] = np.log(v0_probe) + _trapz_tail(xe, tail, x_probe) / beta
        sigma = stress_sigma(st, params)
        S[j] = float(np.dot(w_unit, sigma))
        W[j] = _trapz_tail(xe, phi_e * st.r ** (-n) * st.u**2, x_probe)
        theta_probe[j] = np.interp(x_probe, xc, st.theta)
        v_actual[j] = np.interp(x_probe, xc, st.v)

    dt = np.diff(times)
    cum_S = np.concatenate(([0.0], np.cumsum(0.5 * (S[1:] + S[:-1]) * dt)))
    cum_W = np.concatenate(([0.0], np.cumsum(0.5 * (W[1:] + W[:-1]) * dt)))
    ln_Y = (cum_S - (n - 1) * cum_W) / beta
    ln_Z = ln_B + ln_Y

    v_repr = np.empty(m)
    v_repr[0] = np.exp(ln_Z[0])
    for i in range(1, m):
        # exponent measured relative to the evaluation time keeps it bounded
        # and already carries the B(t)Y(t) factor of the correction integrand
        ell = ln_Z[:i + 1] - ln_Z[i]
        segs = _integral_linear_exp(
            theta_probe[:i], theta_probe[1:i + 1], ell[:-1], ell[1:], dt[:i]
        )
        v_repr[i] = np.exp(ln_Z[i]) + (R / beta) * float(np.sum(segs))
    return times, ln_B, ln_Y, v_repr, v_actual


def local_representation(history, params: PhysParams, k: int, x_probe: float) -> RepresentationResult:
    """Evaluate the closed-form representation of v at the probe point against
    the solved field, over the whole sampled history."""
    states = list(history)
    times, ln_B, ln_Y, v_repr, v_actual = _representation_trajectory(
        states, params, k, x_probe
    )
    rel = np.abs(v_repr - v_actual) / np.abs(v_actual)
    return RepresentationResult(
        times=times,
        B=np.exp(ln_B),
        Y=np.exp(ln_Y),
        v_repr=v_repr,
        v_actual=v_actual,
        residual=float(np.max(rel)),
    )


# ---------------------------------------------------------------------------
# per-sample report and the assembled series

def _second_derivative(x, f):
    """Three-point second derivative on a possibly non-uniform axis
    (interior points only)."""
    dm = x[1:-1] - x[:-2]
    dp = x[2:] - x[1:-1]
    return 2.0 * (
        f[:-2] / (dm * (dm + dp)) - f[1:-1] / (dm * dp) + f[2:] / (dp * (dm + dp))
    )


def norm_report(state: FlowState, params: PhysParams, prev: FlowState | None = None) -> dict:
    """Instantaneous functionals of one state (plus difference-quotient
    integrals against ``prev`` when given)."""
    g = state.grid
    h = g.cell_widths
    n = params.n
    v, th = state.v, state.theta
    gr = discrete_gradients(state)
    r_c = gr.r_centers
    rpow = r_c ** (n - 1)
    u2 = _u_sq_centers(state)

    E = energy_functional(state, params)
    D = dissipation_rate(state, params)
    out = {
        "E": E,
        "D_vu2": D[0],
        "D_ux": D[1],
        "D_divru": D[2],
        "D_thx": D[3],
        "l2_v": np.sqrt(np.sum((v - 1.0) ** 2 * h)),
        "l2_u": np.sqrt(np.sum(u2 * h)),
        "l2_theta": np.sqrt(np.sum((th - 1.0) ** 2 * h)),
        "l2_rvx": np.sqrt(np.sum((rpow * gr.v_x) ** 2 * h)),
        "l2_rux": np.sqrt(np.sum((rpow * gr.u_x) ** 2 * h)),
        "l2_rthx": np.sqrt(np.sum((rpow * gr.theta_x) ** 2 * h)),
        "sup_v": np.max(np.abs(v - 1.0)),
        "sup_u": np.max(np.abs(state.u)),
        "sup_theta": np.max(np.abs(th - 1.0)),
        "min_v": np.min(v),
        "max_v": np.max(v),
        "min_theta": np.min(th),
        "max_theta": np.max(th),
        "f_thx": D[3],
        "g_u": D[0] + D[1],
        "grad2_v": np.sum(gr.v_x**2 * h),
        "grad2_u": np.sum(gr.u_x**2 * h),
        "grad2_theta": np.sum(gr.theta_x**2 * h),
        "balance_phi": balance_integrand(state, params),
        "b6_gap_min": pointwise_form_gap(state, params),
    }

    # second-derivative integrands (standard three-point stencils)
    uxx = _second_derivative(g.x_edges, state.u)
    out["int_r_uxx2"] = np.sum(state.r[1:-1] ** (2 * (n - 1)) * uxx**2 * g.edge_gaps)
    thxx = _second_derivative(g.cell_centers, th)
    out["int_r_thxx2"] = np.sum(r_c[1:-1] ** (2 * (n - 1)) * thxx**2 * h[1:-1])
    out["int_theta_vx2"] = np.sum((1.0 + th) * gr.v_x**2 * h)

    if prev is not None:
        dtau = state.t - prev.t
        du = (state.u - prev.u) / dtau
        dth = (state.theta - prev.theta) / dtau
        out["int_ut2"] = np.sum(0.5 * (du[:-1] ** 2 + du[1:] ** 2) * h)
        out["int_tht2"] = np.sum(dth**2 * h)
    else:
        out["int_ut2"] = 0.0
        out["int_tht2"] = 0.0
    return {key: float(val) for key, val in out.items()}


SERIES_COLUMNS = [
    "t",
    "E",
    "D_vu2",
    "D_ux",
    "D_divru",
    "D_thx",
    "balance_residual",
    "l2_v",
    "l2_u",
    "l2_theta",
    "l2_rvx",
    "l2_rux",
    "l2_rthx",
    "sup_v",
    "sup_u",
    "sup_theta",
    "min_v",
    "max_v",
    "min_theta",
    "max_theta",
    "f_thx",
    "g_u",
    "omega_measure",
    "omega_bound",
    "b6_gap_min",
    "vbar_min",
    "vbar_max",
    "thbar_min",
    "thbar_max",
    "acc_theta_vx2",
    "acc_uxx",
    "acc_thxx",
    "acc_ut",
    "acc_tht",
    "acc_tv_grad",
    "repr_residual",
]


@dataclass(frozen=True)
class DiagnosticsSeries:
    """Column-oriented time series of all runtime functionals."""

    data: np.ndarray  # shape (n_samples, len(SERIES_COLUMNS))

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != len(SERIES_COLUMNS):
            raise ValueError("series data does not match the documented columns")

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, SERIES_COLUMNS.index(name)]

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        buf.write(",".join(SERIES_COLUMNS) + "\n")
        for row in self.data:
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def from_csv(cls, path) -> "DiagnosticsSeries":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header != SERIES_COLUMNS:
                raise ValueError(f"{path}: unexpected series columns")
            rows = [
                [float(tok) for tok in line.split(",")]
                for line in fh
                if line.strip()
            ]
        return cls(data=np.array(rows, dtype=float))


def evaluate_series(samples, params: PhysParams, config) -> DiagnosticsSeries:
    """Assemble the full diagnostics series from sampled states.

    ``config`` provides the superlevel threshold and the representation probe;
    an out-of-range probe just leaves the representation column at NaN.
    """
    states = list(samples)
    if not states:
        raise ValueError("no samples to evaluate")
    g = states[0].grid
    ks = np.arange(0, int(np.floor(g.x_max + 1e-12)))
    unit_w = [_clipped_weights(g, float(k), float(k + 1)) for k in ks]

    try:
        _, _, _, v_repr, v_actual = _representation_trajectory(
            states, params, config.probe_k, config.probe_x
        )
        repr_rel = np.abs(v_repr - v_actual) / np.abs(v_actual)
    except ValueError:
        repr_rel = np.full(len(states), np.nan)

    E0 = energy_functional(states[0], params)
    rows = np.empty((len(states), len(SERIES_COLUMNS)))
    acc = {"acc_theta_vx2": 0.0, "acc_uxx": 0.0, "acc_thxx": 0.0,
           "acc_ut": 0.0, "acc_tht": 0.0, "acc_tv_grad": 0.0}
    prev = None
    prev_report = None
    cum_phi = 0.0
    for i, st in enumerate(states):
        rep = norm_report(st, params, prev)
        if prev is not None:
            dtau = st.t - prev.t
            cum_phi += 0.5 * (rep["balance_phi"] + prev_report["balance_phi"]) * dtau
            acc["acc_theta_vx2"] += 0.5 * (rep["int_theta_vx2"] + prev_report["int_theta_vx2"]) * dtau
            acc["acc_uxx"] += 0.5 * (rep["int_r_uxx2"] + prev_report["int_r_uxx2"]) * dtau
            acc["acc_thxx"] += 0.5 * (rep["int_r_thxx2"] + prev_report["int_r_thxx2"]) * dtau
            acc["acc_ut"] += rep["int_ut2"] * dtau
            acc["acc_tht"] += rep["int_tht2"] * dtau
            acc["acc_tv_grad"] += (
                abs(rep["grad2_v"] - prev_report["grad2_v"])
                + abs(rep["grad2_u"] - prev_report["grad2_u"])
                + abs(rep["grad2_theta"] - prev_report["grad2_theta"])
            )
        vbars = np.array([np.dot(w, st.v) / w.sum() for w in unit_w])
        thbars = np.array([np.dot(w, st.theta) / w.sum() for w in unit_w])
        values = {
            "t": st.t,
            "balance_residual": abs(rep["E"] + cum_phi - E0),
            "omega_measure": superlevel_measure(st, config.superlevel_a),
            "omega_bound": superlevel_bound(rep["E"], config.superlevel_a, params),
            "vbar_min": vbars.min(),
            "vbar_max": vbars.max(),
            "thbar_min": thbars.min(),
            "thbar_max": thbars.max(),
            "repr_residual": repr_rel[i],
            **acc,
            **rep,
        }
        rows[i] = [values[c] for c in SERIES_COLUMNS]
        prev, prev_report = st, rep
    return DiagnosticsSeries(data=rows)
