"""Discrete flow state, admissible initial data, and discrete operators.

Staggering convention: velocity u and radius r live on cell edges, specific
volume v and temperature theta on cell centers.  This pairing makes the mass
update v_t = D_c(r^(n-1) u) and the momentum stress gradient discrete
adjoints, which is what keeps the discrete energy balance tight.

Boundary handling: the inner edge carries u = 0 and a mirrored temperature
ghost (zero heat flux); the outermost cell is pinned to the far-field state
(v, u, theta) = (1, 0, 1).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .grid import MassGrid, PhysParams, radius_at_centers, radius_from_volume

__all__ = [
    "FlowState",
    "InitProfile",
    "Gradients",
    "make_initial_data",
    "stress_sigma",
    "discrete_gradients",
    "save_snapshot",
    "load_snapshot",
]


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FlowState:
    """Immutable snapshot of (v, u, theta) at time t, with the cached radius.

    v, theta are per-cell (positive), u per-edge with u[0] = 0.  ``n`` is the
    spatial dimension; r is always reconstructed from v, never stored
    independently, so the cache cannot drift out of coherence.
    """

    grid: MassGrid
    t: float
    v: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    n: int
    r: np.ndarray = None

    def __post_init__(self):
        nc = self.grid.n_cells
        v = np.asarray(self.v, dtype=float)
        u = np.asarray(self.u, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if v.shape != (nc,) or theta.shape != (nc,) or u.shape != (nc + 1,):
            raise ValueError(
                f"field shapes {v.shape}, {u.shape}, {theta.shape} do not match "
                f"grid with {nc} cells"
            )
        if np.any(v <= 0):
            raise ValueError("specific volume must stay positive")
        if np.any(theta <= 0):
            raise ValueError("temperature must stay positive")
        if u[0] != 0.0:
            raise ValueError("velocity at the inner boundary edge must vanish")
        object.__setattr__(self, "v", _frozen(v))
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "r", _frozen(radius_from_volume(self.grid, v, self.n)))

    def with_fields(self, t=None, v=None, u=None, theta=None) -> "FlowState":
        return FlowState(
            grid=self.grid,
            t=self.t if t is None else float(t),
            v=self.v if v is None else v,
            u=self.u if u is None else u,
            theta=self.theta if theta is None else theta,
            n=self.n,
        )


@dataclass(frozen=True)
class InitProfile:
    """Initial-data profile: equilibrium, a gaussian bump, or a table.

    Amplitudes perturb (v-1, u, theta-1); ``center`` and ``width`` are in mass
    coordinate.  Table profiles carry columns (x, v, u, theta) interpolated
    onto the grid.
    """

    kind: str = "equilibrium"
    amp_v: float = 0.0
    amp_u: float = 0.0
    amp_theta: float = 0.0
    center: float = 4.0
    width: float = 1.0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("equilibrium", "gaussian_bump", "table"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "gaussian_bump":
            if not (self.width > 0):
                raise ValueError("bump width must be positive")
            # admissibility at the continuum peak, not the grid sampling of it
            if 1.0 + self.amp_v <= 0.0:
                raise ValueError(
                    f"v amplitude {self.amp_v} reaches zero at the bump peak"
                )
            if 1.0 + self.amp_theta <= 0.0:
                raise ValueError(
                    f"theta amplitude {self.amp_theta} reaches zero at the bump peak"
                )
        if self.kind == "table" and self.table is None:
            raise ValueError("table profile requires table data")


def _bump(x: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-(((x - center) / width) ** 2))


def make_initial_data(grid: MassGrid, profile: InitProfile, params: PhysParams) -> FlowState:
    """Initial FlowState at t = 0 satisfying boundary and far-field values.

    Rejects amplitudes that drive v or theta to zero or below.
    """
    xc, xe = grid.cell_centers, grid.x_edges
    if profile.kind == "equilibrium":
        v = np.ones(grid.n_cells)
        theta = np.ones(grid.n_cells)
        u = np.zeros(grid.n_cells + 1)
    elif profile.kind == "gaussian_bump":
        v = 1.0 + profile.amp_v * _bump(xc, profile.center, profile.width)
        theta = 1.0 + profile.amp_theta * _bump(xc, profile.center, profile.width)
        u = profile.amp_u * _bump(xe, profile.center, profile.width)
    else:
        tab = np.asarray(profile.table, dtype=float)
        if tab.ndim != 2 or tab.shape[1] != 4:
            raise ValueError("table must have columns x, v, u, theta")
        tx = tab[:, 0]
        v = np.interp(xc, tx, tab[:, 1])
        u = np.interp(xe, tx, tab[:, 2])
        theta = np.interp(xc, tx, tab[:, 3])
    # compatibility at the boundary and the far field
    u[0] = 0.0
    u[-1] = 0.0
    v[-1] = 1.0
    theta[-1] = 1.0
    if np.min(v) <= 0:
        raise ValueError(f"profile drives min(v) = {np.min(v)} <= 0")
    if np.min(theta) <= 0:
        raise ValueError(f"profile drives min(theta) = {np.min(theta)} <= 0")
    return FlowState(grid=grid, t=0.0, v=v, u=u, theta=theta, n=params.n)


def edge_weight(state: FlowState) -> np.ndarray:
    """r^(n-1) at edges — the geometric weight of the reduced equations."""
    return state.r ** (state.n - 1)


def div_ru(state: FlowState) -> np.ndarray:
    """(r^(n-1) u)_x at cell centers (the native staggered difference)."""
    return np.diff(edge_weight(state) * state.u) / state.grid.cell_widths


def stress_sigma(state: FlowState, params: PhysParams) -> np.ndarray:
    """Reduced normal stress beta*(r^(n-1)u)_x/v - R*theta/v at centers."""
    return (params.beta * div_ru(state) - params.R * state.theta) / state.v


@dataclass(frozen=True)
class Gradients:
    """Center-collocated first derivatives and the split of (r^(n-1)u)_x.

    ``div_ru`` is the native staggered divergence; ``r_pow_ux`` and
    ``geom_vu`` are the two terms of the identity
    (r^(n-1)u)_x = r^(n-1) u_x + (n-1) v u / r, and ``div_ru2`` is the
    staggered derivative of r^(n-2) u^2 feeding the heat equation.
    """

    v_x: np.ndarray
    u_x: np.ndarray
    theta_x: np.ndarray
    div_ru: np.ndarray
    r_pow_ux: np.ndarray
    geom_vu: np.ndarray
    div_ru2: np.ndarray
    r_centers: np.ndarray


def _center_gradient(xc: np.ndarray, f: np.ndarray, mirror_left: bool = False) -> np.ndarray:
    """Centered differences at interior centers, one-sided at the ends.

    ``mirror_left`` treats the field as even across x = 0 (zero-gradient
    boundary), matching the temperature condition.
    """
    g = np.empty_like(f)
    g[1:-1] = (f[2:] - f[:-2]) / (xc[2:] - xc[:-2])
    if mirror_left:
        g[0] = (f[1] - f[0]) / (xc[1] + xc[0])
    else:
        g[0] = (f[1] - f[0]) / (xc[1] - xc[0])
    g[-1] = (f[-1] - f[-2]) / (xc[-1] - xc[-2])
    return g


def discrete_gradients(state: FlowState) -> Gradients:
    """All first-derivative fields used by the solver and the diagnostics."""
    g = state.grid
    xc, h = g.cell_centers, g.cell_widths
    n = state.n
    w = edge_weight(state)
    u_c = 0.5 * (state.u[:-1] + state.u[1:])
    r_c = radius_at_centers(g, state.v, n)
    u_x = np.diff(state.u) / h
    ru2 = state.r ** (n - 2) * state.u**2
    return Gradients(
        v_x=_center_gradient(xc, state.v),
        u_x=u_x,
        theta_x=_center_gradient(xc, state.theta, mirror_left=True),
        div_ru=np.diff(w * state.u) / h,
        r_pow_ux=r_c ** (n - 1) * u_x,
        geom_vu=(n - 1) * state.v * u_c / r_c,
        div_ru2=np.diff(ru2) / h,
        r_centers=r_c,
    )


_SNAP_COLUMNS = "x,v,u,theta,r"


def save_snapshot(state: FlowState, params: PhysParams, path) -> None:
    """Write one state as CSV: columns x, v, u, theta, r at the edges.

    Row j carries edge quantities u[j], r[j] and the values of cell j for v
    and theta; the final edge row leaves v and theta empty.  The header
    comment carries t and the physical parameters; floats are written with
    repr so the file round-trips losslessly.
    """
    g = state.grid
    buf = io.StringIO()
    meta = {"t": state.t, **params.as_dict()}
    buf.write("# " + " ".join(f"{k}={float(v)!r}" for k, v in meta.items()) + "\n")
    buf.write(_SNAP_COLUMNS + "\n")
    for j in range(g.n_cells):
        buf.write(
            f"{float(g.x_edges[j])!r},{float(state.v[j])!r},{float(state.u[j])!r},"
            f"{float(state.theta[j])!r},{float(state.r[j])!r}\n"
        )
    j = g.n_cells
    buf.write(f"{float(g.x_edges[j])!r},,{float(state.u[j])!r},,{float(state.r[j])!r}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_snapshot(path) -> tuple[FlowState, PhysParams]:
    """Read a snapshot written by :func:`save_snapshot`."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing metadata header")
        meta = {}
        for tok in header[1:].split():
            k, _, val = tok.partition("=")
            meta[k] = float(val)
        cols = fh.readline().strip()
        if cols != _SNAP_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {cols!r}")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    params = PhysParams(
        mu=meta["mu"], lam=meta["lambda"], R=meta["R"],
        cv=meta["cv"], kappa=meta["kappa"], n=int(meta["n"]),
    )
    xe = np.array([float(r[0]) for r in rows])
    u = np.array([float(r[2]) for r in rows])
    v = np.array([float(r[1]) for r in rows[:-1]])
    theta = np.array([float(r[3]) for r in rows[:-1]])
    grid = MassGrid(x_edges=xe)
    return FlowState(grid=grid, t=meta["t"], v=v, u=u, theta=theta, n=params.n), params
