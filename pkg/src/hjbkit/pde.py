"""Explicit finite-difference solvers for the scalar HJB problems.

Finite horizon: march backward from the terminal reward.  Infinite
horizon: march the forward parabolic problem started from zero until the
discrete time derivative is below tolerance; the limit field is the
candidate solution of the stationary equation.

Scheme: explicit Euler in time, centered second difference for the unit
diffusion, first difference upwinded by the sign of the drift per
candidate control.  The step must satisfy
``dt * (1/dy^2 + max|i|/dy + max h+) <= 1`` with the maxima taken over
grid x controls; this is enforced, not assumed.
"""

import time as _time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError, StabilityError

__all__ = [
    "Grid1D",
    "TimeGrid",
    "ValueField",
    "PolicyField",
    "SolveReport",
    "solve_finite_horizon",
    "solve_infinite_horizon",
    "residual",
    "gradient_bound_check",
]

_OVERFLOW_GUARD = 1e10


@dataclass(frozen=True)
class Grid1D:
    y_min: float
    y_max: float
    nodes: int
    boundary: str = "one_sided"

    def __post_init__(self):
        if not self.y_min < self.y_max:
            raise ParameterError("need y_min < y_max")
        if self.nodes < 3:
            raise ParameterError("need at least 3 nodes")
        if self.boundary not in ("one_sided", "linear_extrapolation"):
            raise ParameterError(f"unknown boundary scheme {self.boundary!r}")

    @property
    def spacing(self):
        return (self.y_max - self.y_min) / (self.nodes - 1)

    @property
    def ys(self):
        return np.linspace(self.y_min, self.y_max, self.nodes)


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ParameterError("horizon must be positive")
        if self.steps < 1:
            raise ParameterError("steps must be >= 1")

    @property
    def dt(self):
        return self.horizon / self.steps


@dataclass
class ValueField:
    grid: Grid1D
    values: np.ndarray       # (layers, nodes)
    time_stamps: np.ndarray  # (layers,)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, float))
        self.time_stamps = np.atleast_1d(np.asarray(self.time_stamps, float))
        if len(self.values) != len(self.time_stamps):
            raise ParameterError("layer count must match time stamps")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("value field contains non-finite entries")

    def layer(self, t=None):
        if t is None:
            return self.values[0]
        j = int(np.argmin(np.abs(self.time_stamps - t)))
        return self.values[j]

    def to_csv(self, path, header_lines=()):
        ys = self.grid.ys
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("y,t,u\n")
            for j, t in enumerate(self.time_stamps):
                for y, u in zip(ys, self.values[j]):
                    fh.write(f"{float(y)!r},{float(t)!r},{float(u)!r}\n")


@dataclass
class PolicyField:
    grid: Grid1D
    controls: np.ndarray      # (layers, nodes, k)
    time_stamps: np.ndarray

    def __post_init__(self):
        self.controls = np.asarray(self.controls, float)
        if self.controls.ndim == 2:
            self.controls = self.controls[None]
        self.time_stamps = np.atleast_1d(np.asarray(self.time_stamps, float))

    def as_policy(self):
        """Feedback map (y, t) -> control, nearest node and time stamp."""
        ys = self.grid.ys
        stamps = self.time_stamps
        table = self.controls

        def policy(y, t):
            y = np.asarray(y, float)[..., 0]
            ny = np.clip(np.rint((y - ys[0]) / self.grid.spacing).astype(int),
                         0, len(ys) - 1)
            nt = int(np.argmin(np.abs(stamps - t)))
            return table[nt, ny]

        return policy

    def to_csv(self, path, header_lines=()):
        ys = self.grid.ys
        k = self.controls.shape[-1]
        cols = ",".join(f"delta_star_{j}" for j in range(k))
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(f"y,t,{cols}\n")
            for j, t in enumerate(self.time_stamps):
                for i, y in enumerate(ys):
                    vals = ",".join(repr(float(v)) for v in self.controls[j, i])
                    fh.write(f"{float(y)!r},{float(t)!r},{vals}\n")


@dataclass
class SolveReport:
    scheme: dict
    cfl_ratio: float
    residual_norm: float
    dvdt_norm: float
    steps: int
    wall_time: float
    converged: bool = True

    def as_dict(self):
        # wall time is excluded so artifacts stay byte-reproducible
        return {
            "scheme": self.scheme,
            "cfl_ratio": float(self.cfl_ratio),
            "residual_norm": float(self.residual_norm),
            "dvdt_norm": float(self.dvdt_norm),
            "steps": int(self.steps),
            "converged": bool(self.converged),
        }


def _coefficient_tables(model, ys):
    """Per-control drift/discount/reward sampled on the grid, (M, nodes)."""
    ybatch = ys[:, None]
    i_tab, h_tab, f_tab = [], [], []
    for delta in model.controls:
        i_tab.append(model.eval_checked("drift", ybatch, delta)[:, 0])
        h_tab.append(model.eval_checked("discount_rate", ybatch, delta))
        f_tab.append(model.eval_checked("running_reward", ybatch, delta))
    return np.array(i_tab), np.array(h_tab), np.array(f_tab)


def _cfl_limit(i_tab, h_tab, dy):
    denom = 1.0 / dy ** 2 + np.max(np.abs(i_tab)) / dy + max(np.max(h_tab), 0.0)
    return 1.0 / denom


def _second_difference(u, dy, boundary):
    d2 = np.empty_like(u)
    d2[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dy ** 2
    if boundary == "one_sided":
        d2[0] = (u[0] - 2.0 * u[1] + u[2]) / dy ** 2
        d2[-1] = (u[-1] - 2.0 * u[-2] + u[-3]) / dy ** 2
    else:  # linear_extrapolation: impose zero curvature at the edge
        d2[0] = 0.0
        d2[-1] = 0.0
    return d2


def _upwind_gradient(u, drift_row, dy):
    """First difference selected by the drift sign, one-sided at the edges."""
    fwd = np.empty_like(u)
    fwd[:-1] = (u[1:] - u[:-1]) / dy
    fwd[-1] = fwd[-2]
    bwd = np.empty_like(u)
    bwd[1:] = (u[1:] - u[:-1]) / dy
    bwd[0] = bwd[1]
    return np.where(drift_row >= 0.0, fwd, bwd)


def _centered_gradient(u, dy):
    grad = np.empty_like(u)
    grad[1:-1] = (u[2:] - u[:-2]) / (2.0 * dy)
    grad[0] = (u[1] - u[0]) / dy
    grad[-1] = (u[-1] - u[-2]) / dy
    return grad


def _hamiltonian_step(u, ys, dy, i_tab, h_tab, f_tab, model, override):
    """Max over controls of i*Du_upwind + h*u + f, plus the argmax control."""
    if override is not None:
        grad = _centered_gradient(u, dy)
        delta = np.asarray(override(ys, u, grad), float)  # (nodes, k)
        ybatch = ys[:, None]
        drift = np.asarray(model.drift(ybatch, delta), float)[:, 0]
        hv = np.asarray(model.discount_rate(ybatch, delta), float)
        fv = np.asarray(model.running_reward(ybatch, delta), float)
        du = _upwind_gradient(u, drift, dy)
        return drift * du + hv * u + fv, delta
    best = None
    best_idx = None
    for m in range(len(i_tab)):
        du = _upwind_gradient(u, i_tab[m], dy)
        cand = i_tab[m] * du + h_tab[m] * u + f_tab[m]
        if best is None:
            best = cand
            best_idx = np.zeros(len(u), dtype=int)
        else:
            better = cand > best
            best = np.where(better, cand, best)
            best_idx = np.where(better, m, best_idx)
    return best, model.controls[best_idx]


def _apply_boundary(u, boundary):
    if boundary == "linear_extrapolation":
        u[0] = 2.0 * u[1] - u[2]
        u[-1] = 2.0 * u[-2] - u[-3]
    return u


def solve_finite_horizon(model, grid, time, control_override=None,
                         terminal_values=None, slice_stride=1):
    """Backward sweep of the parabolic HJB problem from the terminal reward.

    Returns the value field (time-0 layer plus retained slices at
    ``slice_stride`` steps), the argmax policy on the same slices, and a
    report.  ``terminal_values`` overrides the model's terminal reward on
    the grid (used for split-interval solves).
    """
    if model.dim != 1:
        raise ParameterError("grid solver supports dim=1 only")
    ys = grid.ys
    dy = grid.spacing
    dt = time.dt
    i_tab, h_tab, f_tab = _coefficient_tables(model, ys)
    dt_max = _cfl_limit(i_tab, h_tab, dy)
    if dt > dt_max * (1.0 + 1e-12):
        raise StabilityError(dt, dt_max, int(np.ceil(time.horizon / dt_max)))

    t0 = _time.perf_counter()
    if terminal_values is not None:
        u = np.array(terminal_values, float)
        if u.shape != ys.shape:
            raise ParameterError("terminal_values must match the grid")
    else:
        u = model.eval_checked("terminal_reward", ys[:, None]).astype(float)

    layers = [u.copy()]
    stamps = [time.horizon]
    policies = [_hamiltonian_step(u, ys, dy, i_tab, h_tab, f_tab, model,
                                  control_override)[1]]
    for s in range(time.steps):
        H, _ = _hamiltonian_step(u, ys, dy, i_tab, h_tab, f_tab, model,
                                 control_override)
        u = u + dt * (0.5 * _second_difference(u, dy, grid.boundary) + H)
        _apply_boundary(u, grid.boundary)
        if not np.all(np.isfinite(u)):
            bad = int(np.argmax(~np.isfinite(u)))
            raise DivergenceError(
                f"non-finite update at node {bad} (y={ys[bad]:g}), step {s}"
            )
        t = time.horizon - (s + 1) * dt
        if (s + 1) % slice_stride == 0 or s == time.steps - 1:
            layers.append(u.copy())
            stamps.append(t)
            policies.append(_hamiltonian_step(u, ys, dy, i_tab, h_tab, f_tab,
                                              model, control_override)[1])

    order = np.argsort(stamps)
    vf = ValueField(grid, np.array(layers)[order], np.array(stamps)[order])
    pf = PolicyField(grid, np.array(policies)[order], np.array(stamps)[order])
    res = residual(model, ValueField(grid, u, 0.0), control_override)
    report = SolveReport(
        scheme={
            "kind": "finite_horizon_explicit_upwind",
            "dt": dt,
            "dy": dy,
            "boundary": grid.boundary,
            "override": control_override is not None,
        },
        cfl_ratio=float(dt / dt_max),
        residual_norm=float(np.max(np.abs(res))),
        dvdt_norm=float(np.max(np.abs(0.5 * _second_difference(u, dy, grid.boundary)
                                      + _hamiltonian_step(u, ys, dy, i_tab, h_tab,
                                                          f_tab, model,
                                                          control_override)[0])[1:-1])),
        steps=time.steps,
        wall_time=_time.perf_counter() - t0,
    )
    return vf, pf, report


def solve_infinite_horizon(model, grid, dt, tol_dt, t_max,
                           control_override=None):
    """March the forward problem from zero until the field is stationary.

    Stops when the sup-norm of the discrete time derivative over interior
    nodes drops below ``tol_dt``; if ``t_max`` is reached first, the report
    carries ``converged=False``.  A sup-norm blow-up past the overflow
    guard raises: the discounted reward appears non-integrable over an
    infinite horizon for this model.
    """
    if model.dim != 1:
        raise ParameterError("grid solver supports dim=1 only")
    if not tol_dt > 0:
        raise ParameterError("tol_dt must be positive")
    ys = grid.ys
    dy = grid.spacing
    i_tab, h_tab, f_tab = _coefficient_tables(model, ys)
    dt_max = _cfl_limit(i_tab, h_tab, dy)
    if dt > dt_max * (1.0 + 1e-12):
        raise StabilityError(dt, dt_max, int(np.ceil(t_max / dt_max)))

    t0 = _time.perf_counter()
    v = np.zeros(len(ys))
    pol = model.controls[np.zeros(len(ys), dtype=int)]
    steps = int(np.ceil(t_max / dt))
    dvdt = np.inf
    converged = False
    s = 0
    for s in range(1, steps + 1):
        H, pol = _hamiltonian_step(v, ys, dy, i_tab, h_tab, f_tab, model,
                                   control_override)
        rhs = 0.5 * _second_difference(v, dy, grid.boundary) + H
        v = v + dt * rhs
        _apply_boundary(v, grid.boundary)
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > _OVERFLOW_GUARD:
            raise DivergenceError(
                "long-time march diverged: the discounted reward appears "
                "non-integrable over an infinite horizon for this model"
            )
        dvdt = float(np.max(np.abs(rhs[1:-1])))
        if dvdt < tol_dt:
            converged = True
            break

    t_final = s * dt
    vf = ValueField(grid, v, t_final)
    pf = PolicyField(grid, pol, t_final)
    res = residual(model, vf, control_override)
    report = SolveReport(
        scheme={
            "kind": "infinite_horizon_long_time",
            "dt": dt,
            "dy": dy,
            "boundary": grid.boundary,
            "tol_dt": tol_dt,
            "t_max": t_max,
            "override": control_override is not None,
        },
        cfl_ratio=float(dt / dt_max),
        residual_norm=float(np.max(np.abs(res))),
        dvdt_norm=dvdt,
        steps=s,
        wall_time=_time.perf_counter() - t0,
        converged=converged,
    )
    return vf, pf, report


def residual(model, fld, control_override=None):
    """Interior residual of the stationary equation on a single-layer field."""
    if model.dim != 1:
        raise ParameterError("residual supports dim=1 only")
    if len(fld.values) != 1:
        raise ParameterError("field must be stationary (single layer)")
    ys = fld.grid.ys
    dy = fld.grid.spacing
    u = fld.values[0]
    d2 = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dy ** 2
    grad = (u[2:] - u[:-2]) / (2.0 * dy)
    yin = ys[1:-1][:, None]
    uin = u[1:-1]
    if control_override is not None:
        delta = np.asarray(control_override(ys[1:-1], uin, grad), float)
        drift = np.asarray(model.drift(yin, delta), float)[:, 0]
        hv = np.asarray(model.discount_rate(yin, delta), float)
        fv = np.asarray(model.running_reward(yin, delta), float)
        H = drift * grad + hv * uin + fv
    else:
        from .hamiltonian import scan
        H, _ = scan(model, yin, uin, grad[:, None])
    return 0.5 * d2 + H


@dataclass(frozen=True)
class GradientBoundReport:
    status: str                # "met" or "inconclusive"
    value_bound: float
    gradient_bound: float
    worst_value_slack: float
    worst_gradient_slack: float

    def as_dict(self):
        return {
            "status": self.status,
            "value_bound": float(self.value_bound),
            "gradient_bound": float(self.gradient_bound),
            "worst_value_slack": float(self.worst_value_slack),
            "worst_gradient_slack": float(self.worst_gradient_slack),
        }


def gradient_bound_check(fld, kappa, L1, L2):
    """Check the value/gradient growth estimates against a kappa table.

    Value bound: integral of kappa over [0, T] plus the terminal envelope.
    Gradient bound: ``(L1 + L1/|L2|)`` times the ``max(1, e^{L2 s})``
    weighted integral plus the weighted terminal envelope.  The table is a
    sampled lower envelope of the true supremum, so failures are reported
    as "inconclusive" rather than as hard errors.
    """
    T = kappa.horizon
    ts = np.linspace(0.0, T, 257)
    kv = kappa.kappa_at(ts)
    p_T = kappa.p_at(T)
    value_bound = float(np.trapezoid(kv, ts) + p_T)
    weight = np.maximum(1.0, np.exp(L2 * ts))
    gradient_bound = float(
        (L1 + L1 / abs(L2))
        * (np.trapezoid(weight * kv, ts) + max(1.0, np.exp(L2 * T)) * p_T)
    )

    ys = fld.grid.ys
    inside = np.abs(ys) <= kappa.radius_n
    u = fld.values[0]
    grad = _centered_gradient(u, fld.grid.spacing)
    vmax = float(np.max(np.abs(u[inside]))) if inside.any() else 0.0
    gmax = float(np.max(np.abs(grad[inside]))) if inside.any() else 0.0
    v_slack = value_bound - vmax
    g_slack = gradient_bound - gmax
    status = "met" if (v_slack >= 0 and g_slack >= 0) else "inconclusive"
    return GradientBoundReport(
        status=status,
        value_bound=value_bound,
        gradient_bound=gradient_bound,
        worst_value_slack=float(v_slack),
        worst_gradient_slack=float(g_slack),
    )
