"""Mirror and synchronous couplings, and intrinsic Wasserstein decay curves.

In square-root coordinates the diffusion coefficient is constant and the
state space is an open Euclidean domain, so the mirror coupling needs no
parallel transport: the second copy is driven by the first copy's noise
reflected across the hyperplane orthogonal to the connecting direction.
Under the curvature bound the inter-copy distance is then dominated in
expectation by an exponential envelope with rate 1/2.

Discrete time needs one extra ingredient: a pair driven by pure reflection
crosses zero without ever satisfying a fixed closeness tolerance, so the
mirror stepper couples each one-step proposal maximally, sticking the two
legs together with the Gaussian overlap probability and reflecting
otherwise.  Each leg's one-step marginal stays exactly standard normal,
and coalescence happens at the rate the continuous coupling prescribes.

Both legs of a coupled pair advance on a shared step clock: when either
leg's proposal is rejected, the step is halved for both, so the copies
stay aligned in time.  Refinement events are taming-tail rare, which keeps
each leg's marginal law indistinguishable in practice from a solo run.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .errors import DomainError, NumericError, ValidationError
from .model import ParticleState
from .simulate import (
    DT_HALVING_LIMIT,
    RngStream,
    _coerce_generator,
    _propose_batch,
    default_dt,
    dl_paths_batch,
)

MERGE_TOL = 1e-8


@dataclass
class CoupledPath:
    """Two coupled trajectories on a common grid.

    After coalesce_time the two legs are forced equal; the constructor
    checks that invariant on the grid points it can see.
    """

    times: np.ndarray
    x_path: list
    y_path: list
    coalesce_time: float
    coupling_kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if not (len(self.x_path) == len(self.y_path) == self.times.size):
            raise ValidationError("times and both paths must have equal length")
        for t, a, b in zip(self.times, self.x_path, self.y_path):
            if t >= self.coalesce_time and not np.array_equal(a.as_array(), b.as_array()):
                raise ValidationError(
                    f"paths differ at t={t} although coalescence was recorded earlier"
                )

    def distance_series(self):
        """Intrinsic distance between the legs at each grid time."""
        out = np.empty(self.times.size)
        for k, (a, b) in enumerate(zip(self.x_path, self.y_path)):
            out[k] = 2.0 * math.sqrt(
                float(np.sum((np.sqrt(a.as_array()) - np.sqrt(b.as_array())) ** 2))
            )
        return out


def _mirror_second_noise(ya, yb, dt, params, xi, uniforms, merged):
    """Second-leg noise for the mirror coupling, with one-step coalescence.

    Writing m_a, m_b for the one-step proposal means, the first leg proposes
    p_a = m_a + sqrt(2 dt) xi.  The second leg takes the same point p_a with
    the Gaussian overlap probability min(1, N(p_a; m_b) / N(p_a; m_a)) and
    otherwise takes xi reflected across the hyperplane orthogonal to
    (m_a - m_b).  Either branch leaves the second leg's one-step marginal
    exactly standard normal, and the sticking branch is what lets a
    discrete-time pair actually coalesce: a plain reflection essentially
    never brings the y-distance below a fixed tolerance on a fixed grid.
    Returns (xi_b, drift_a, drift_b, stuck_rows).
    """
    drift_a = _kernels.edl_drift_batch(ya, params.alpha, params.beta)
    drift_b = _kernels.edl_drift_batch(yb, params.alpha, params.beta)
    xi_b = xi.copy()
    stuck = merged.copy()
    rows = ~merged
    if not np.any(rows):
        return xi_b, drift_a, drift_b, stuck
    step_sd = math.sqrt(2.0 * dt)
    gap = (ya[rows] + drift_a[rows] * dt) - (yb[rows] + drift_b[rows] * dt)
    nrm = np.linalg.norm(gap, axis=1, keepdims=True)
    # d = (m_a - m_b)/sd in noise units; accept p_a for leg b iff
    # log u <= (|xi|^2 - |xi + d|^2)/2 = -<d, xi> - |d|^2/2
    d = gap / step_sd
    log_u = np.log(uniforms[rows])
    accept = log_u <= -(np.sum(d * xi[rows], axis=1) + 0.5 * np.sum(d * d, axis=1))
    accept |= nrm[:, 0] <= MERGE_TOL
    sub = xi_b[rows]
    sub[accept] = xi[rows][accept] + d[accept]
    e = gap / np.maximum(nrm, 1e-300)
    proj = np.sum(e * xi[rows], axis=1, keepdims=True)
    refl = xi[rows] - 2.0 * proj * e
    sub[~accept] = refl[~accept]
    xi_b[rows] = sub
    stuck_rows = np.zeros(accept.size, dtype=bool)
    stuck_rows[accept] = True
    stuck[rows] = stuck_rows
    return xi_b, drift_a, drift_b, stuck


def _advance_pairs(ya, yb, dt, params, gen, depth, kind, merged):
    """Advance both legs of every row by dt, halving rejected rows jointly."""
    xi = gen.standard_normal(ya.shape)
    uniforms = gen.random(ya.shape[0])
    if kind == "mirror":
        xi_b, drift_a, drift_b, stuck = _mirror_second_noise(
            ya, yb, dt, params, xi, uniforms, merged
        )
    else:
        xi_b, drift_a, drift_b, stuck = xi, None, None, merged
    prop_a, ok_a = _propose_batch(ya, dt, params, gen, noise=xi, drift=drift_a)
    prop_b, ok_b = _propose_batch(yb, dt, params, gen, noise=xi_b, drift=drift_b)
    new_merged = stuck if kind == "mirror" else merged
    prop_b[new_merged] = prop_a[new_merged]
    ok = ok_a & (ok_b | new_merged)
    if not np.all(ok):
        if depth >= DT_HALVING_LIMIT:
            raise NumericError(
                f"coupled step halving exhausted after {DT_HALVING_LIMIT} levels"
            )
        bad = ~ok
        half = 0.5 * dt
        sa, sb, sm = ya[bad], yb[bad], merged[bad]
        sa, sb, sm = _advance_pairs(sa, sb, half, params, gen, depth + 1, kind, sm)
        sa, sb, sm = _advance_pairs(sa, sb, half, params, gen, depth + 1, kind, sm)
        prop_a[bad], prop_b[bad] = sa, sb
        out_merged = new_merged.copy()
        out_merged[bad] = sm
        new_merged = out_merged
    if kind == "mirror":
        dist = np.linalg.norm(prop_a - prop_b, axis=1)
        just = (~new_merged) & (dist <= MERGE_TOL)
        if np.any(just):
            new_merged = new_merged | just
            prop_b[just] = prop_a[just]
    return prop_a, prop_b, new_merged


def run_coupled_batch(x0a, x0b, times, params, rng, replicas=1, kind="mirror", dt=None):
    """Coupled pairs observed on a grid; the batch backbone for both
    couplings.

    Returns (states_a, states_b, coalesce_times) with state arrays of shape
    (len(times), replicas, n).  Coalescence times have step-size resolution;
    synchronous pairs never merge (0 when the starts already agree, inf
    otherwise).
    """
    if kind not in ("mirror", "synchronous"):
        raise DomainError(f"coupling kind must be mirror or synchronous, got {kind!r}")
    a0 = x0a.as_array() if isinstance(x0a, ParticleState) else np.asarray(x0a, float)
    b0 = x0b.as_array() if isinstance(x0b, ParticleState) else np.asarray(x0b, float)
    if a0.shape != (params.n,) or b0.shape != (params.n,):
        raise DomainError(f"start states must have {params.n} coordinates")
    if np.any(a0 <= 0) or np.any(b0 <= 0):
        raise DomainError("coupled runs need strictly positive start coordinates")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(times < 0) or np.any(np.diff(times) <= 0):
        if not (times.size == 1 and times[0] >= 0):
            raise DomainError("times must be a nonempty strictly increasing nonnegative grid")
    gen = _coerce_generator(rng)
    if dt is None:
        dt = default_dt(a0)
    r = int(replicas)
    ya = np.tile(2.0 * np.sqrt(a0)[None, :], (r, 1))
    yb = np.tile(2.0 * np.sqrt(b0)[None, :], (r, 1))
    equal_start = np.array_equal(a0, b0)
    if kind == "mirror":
        merged = np.full(r, equal_start)
        coal = np.where(merged, 0.0, np.inf)
    else:
        merged = np.zeros(r, dtype=bool)
        coal = np.full(r, 0.0 if equal_start else np.inf)
    out_a = np.empty((times.size, r, params.n))
    out_b = np.empty((times.size, r, params.n))
    t_now = 0.0
    for k, t in enumerate(times):
        span = t - t_now
        if span > 0:
            n_steps = max(1, int(math.ceil(span / dt - 1e-12)))
            h = span / n_steps
            for _ in range(n_steps):
                was = merged.copy()
                ya, yb, merged = _advance_pairs(ya, yb, h, params, gen, 0, kind, merged)
                t_now += h
                fresh = merged & ~was
                if np.any(fresh):
                    coal[fresh] = t_now
            t_now = t
        out_a[k] = 0.25 * ya**2
        out_b[k] = 0.25 * yb**2
    return out_a, out_b, coal


def _single_run(x0, y0, times, params, rng, kind, dt):
    sa, sb, coal = run_coupled_batch(x0, y0, times, params, rng, 1, kind, dt)
    xs = [ParticleState(sa[k, 0]) for k in range(sa.shape[0])]
    ys = [ParticleState(sb[k, 0]) for k in range(sb.shape[0])]
    return CoupledPath(
        times=np.asarray(times, float),
        x_path=xs,
        y_path=ys,
        coalesce_time=float(coal[0]),
        coupling_kind=kind,
        meta={"dt": dt},
    )


def mirror_coupling_run(x0, y0, times, params, rng, dt=None):
    """Two copies coupled by reflected noise.

    The second copy's noise is the first's reflected across the hyperplane
    orthogonal to the unit vector connecting the square-root states.  Once
    the y-distance drops below 1e-8 the copies are set equal and share
    noise from then on; coalesce_time records that moment at step
    resolution.
    """
    return _single_run(x0, y0, times, params, rng, "mirror", dt)


def synchronous_coupling_run(x0, y0, times, params, rng, dt=None):
    """Two copies driven by the same noise; diagnostic only.

    No merge rule and no contraction guarantee: the square-root energy is
    not convex, so the inter-copy distance need not contract under shared
    noise.  Equal starts stay equal for all time.
    """
    return _single_run(x0, y0, times, params, rng, "synchronous", dt)


def coupled_distance_curve(x0, y0, times, params, rng, replicas=500, kind="mirror", dt=None):
    """Mean intrinsic distance between coupled copies over a grid.

    Returns (mean, stderr, coalesce_times).  The domination envelope for
    the mirror coupling is exp(-t/2) times the starting distance.
    """
    sa, sb, coal = run_coupled_batch(x0, y0, times, params, rng, replicas, kind, dt)
    d = 2.0 * np.sqrt(np.sum((np.sqrt(sa) - np.sqrt(sb)) ** 2, axis=2))
    mean = d.mean(axis=1)
    stderr = d.std(axis=1, ddof=1) / math.sqrt(d.shape[1])
    return mean, stderr, coal


@dataclass
class WgDecayCurve:
    """Estimated intrinsic Wasserstein distance to equilibrium over a grid,
    with the exponential envelope and the finite-sample floor."""

    times: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    envelope: np.ndarray
    w0: float
    floor: float
    meta: dict = field(default_factory=dict)

    def rows(self):
        return [
            {
                "t": float(t),
                "value": float(v),
                "stderr": float(s),
                "envelope": float(e),
                "floor": self.floor,
            }
            for t, v, s, e in zip(self.times, self.values, self.stderrs, self.envelope)
        ]


def _draw_cloud(mu0_sampler, gen, replicas, n):
    if isinstance(mu0_sampler, ParticleState):
        return np.tile(mu0_sampler.as_array()[None, :], (replicas, 1))
    if isinstance(mu0_sampler, np.ndarray) and mu0_sampler.ndim == 1:
        return np.tile(np.asarray(mu0_sampler, float)[None, :], (replicas, 1))
    cloud = np.asarray(mu0_sampler(gen, replicas), dtype=float)
    if cloud.shape != (replicas, n):
        raise DomainError(f"mu0_sampler must return a ({replicas}, {n}) array")
    return cloud


def _w_with_bootstrap(cloud_a, cloud_b, gen, n_boot=8):
    from .transport import wasserstein_intrinsic

    est = wasserstein_intrinsic(cloud_a, cloud_b)
    if n_boot < 2:
        return est.value, float("nan")
    vals = np.empty(n_boot)
    r = cloud_a.shape[0]
    for i in range(n_boot):
        ia = gen.integers(0, r, size=r)
        ib = gen.integers(0, r, size=r)
        vals[i] = wasserstein_intrinsic(cloud_a[ia], cloud_b[ib]).value
    return est.value, float(np.std(vals, ddof=1))


def wg_decay_estimate(mu0_sampler, times, params, replicas, rng, dt=None, n_boot=8):
    """Intrinsic Wasserstein decay of Law(X_t) toward the invariant gas.

    mu0_sampler is either a start state (point mass) or a callable
    (gen, size) -> (size, n) array of start rows.  Each grid time compares
    the simulated cloud against a fresh equilibrium cloud of equal size;
    the envelope is exp(-t/2) times the starting distance, and the floor
    is the self-distance of two independent equilibrium clouds.
    """
    from .equilibrium import sample_equilibrium_batch

    if replicas < 100:
        raise DomainError(f"replicas must be at least 100, got {replicas}")
    times = np.asarray(times, dtype=float)
    gen = _coerce_generator(rng)
    cloud0 = _draw_cloud(mu0_sampler, gen, replicas, params.n)
    eq0 = sample_equilibrium_batch(params, gen, replicas)
    w0, _ = _w_with_bootstrap(cloud0, eq0, gen, n_boot=0)
    floor, _ = _w_with_bootstrap(
        sample_equilibrium_batch(params, gen, replicas),
        sample_equilibrium_batch(params, gen, replicas),
        gen,
        n_boot=0,
    )
    paths = dl_paths_batch(cloud0, times, params, gen, dt=dt)
    values = np.empty(times.size)
    stderrs = np.empty(times.size)
    for k in range(times.size):
        eq_k = sample_equilibrium_batch(params, gen, replicas)
        values[k], stderrs[k] = _w_with_bootstrap(paths[k], eq_k, gen, n_boot=n_boot)
    envelope = w0 * np.exp(-0.5 * times)
    return WgDecayCurve(
        times=times,
        values=values,
        stderrs=stderrs,
        envelope=envelope,
        w0=w0,
        floor=floor,
        meta={"replicas": replicas, "n_boot": n_boot},
    )
