"""Samplers and path generation: exact transitions and the Euler scheme.

Three routes to the particle law are implemented.

* An Euler-Maruyama scheme in square-root coordinates y_i = 2 sqrt(x_i),
  where the noise is additive.  Proposals are tamed: a small negative
  coordinate is reflected, a breach beyond the taming threshold raises
  StepRejected, and path drivers respond by halving the step (down to a
  floor of dt * 2**-12 before giving up).
* The exact transition of the one-particle system (a squared Bessel-type
  process with reversion), sampled through a Poisson mixture of Gammas.
* The matrix route: an exactly sampled rectangular Ornstein-Uhlenbeck
  matrix flow whose spectrum, after scaling, follows the interacting system
  with beta = 1 and alpha = m/2.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .errors import DomainError, EigenFailure, NumericError, StepRejected, ValidationError
from .model import ModelParams, ParticleState, collision_tol

DT_HALVING_LIMIT = 12


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Streams with the same seed and distinct stream_id values are
    statistically independent (they key separate PCG64 states through
    SeedSequence spawn keys).  generator() returns a fresh generator at the
    start of the stream each time it is called; hold on to one generator
    per logical consumer.
    """

    seed: int
    stream_id: int = 0

    def generator(self):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id):
        return RngStream(self.seed, stream_id=stream_id)


def _coerce_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    if hasattr(rng, "generator"):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot interpret {rng!r} as a random source")


def default_dt(x0, scale=1e-3):
    """Step-size heuristic: scale times a spacing statistic of the start state.

    The spacing statistic is the mean nearest-neighbor gap, clipped to
    [0.1, 1] so degenerate starts neither stall nor blow up the step.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size > 1:
        spacing = float(np.mean(np.diff(np.sort(x))))
    else:
        spacing = 1.0
    return scale * min(1.0, max(spacing, 0.1))


def _validate_times(times, allow_zero_first=True):
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size == 0:
        raise DomainError("empty time grid")
    if not np.all(np.isfinite(t)):
        raise DomainError("time grid must be finite")
    if np.any(t < 0):
        raise DomainError("times must be nonnegative")
    if np.any(np.diff(t) <= 0):
        raise DomainError("time grid must be strictly increasing")
    if not allow_zero_first and t[0] == 0:
        raise DomainError("times must be strictly positive")
    return t


@dataclass
class Path:
    """States observed along a time grid, one configuration per grid time."""

    times: np.ndarray
    states: list
    scheme: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.states) != self.times.size:
            raise ValidationError("times and states must have equal length")

    def phi_series(self):
        return np.array([float(np.sum(s.as_array())) for s in self.states])


def _propose_batch(y, dt, params, gen, noise=None, drift=None):
    """One tamed Euler proposal for every row of y; returns (proposal, ok_rows).

    A row fails if a coordinate falls at or below the negative taming
    threshold -6*sqrt(2 dt), hits zero exactly, or (beta > 0) if the sorted
    proposal has a gap at or below the collision tolerance in x space.
    Small negative coordinates are reflected; proposals are re-sorted.
    Callers running coupled copies pass their own standard-normal noise and
    may pass the drift if they already computed it.
    """
    if drift is None:
        drift = _kernels.edl_drift_batch(y, params.alpha, params.beta)
    step_sd = math.sqrt(2.0 * dt)
    if noise is None:
        noise = gen.standard_normal(y.shape)
    prop = y + drift * dt + step_sd * noise
    tau = 6.0 * step_sd
    ok = ~np.any(prop <= -tau, axis=1)
    prop = np.abs(prop)
    prop.sort(axis=1)
    ok &= prop[:, 0] > 0.0
    if params.beta > 0 and y.shape[1] > 1:
        x = 0.25 * prop**2
        tol = 1e-12 * (1.0 + x[:, -1])
        ok &= np.min(np.diff(x, axis=1), axis=1) > tol
    return prop, ok


def _advance_rows(y, dt, params, gen, depth):
    """Advance all rows of y by dt, recursively halving rejected rows."""
    prop, ok = _propose_batch(y, dt, params, gen)
    if np.all(ok):
        return prop
    if depth >= DT_HALVING_LIMIT:
        raise NumericError(
            f"step halving exhausted after {DT_HALVING_LIMIT} levels (dt={dt:.3e})"
        )
    bad = ~ok
    sub = y[bad]
    half = 0.5 * dt
    sub = _advance_rows(sub, half, params, gen, depth + 1)
    sub = _advance_rows(sub, half, params, gen, depth + 1)
    prop[bad] = sub
    return prop


def step_dl_sqrt(state, dt, params, rng):
    """One tamed Euler-Maruyama step in square-root coordinates.

    Raises StepRejected if the proposal breaches the taming threshold or
    produces a collision; callers wanting automatic recovery should use the
    path drivers, which halve dt and retry.
    """
    if dt <= 0 or not math.isfinite(dt):
        raise DomainError(f"dt must be positive and finite, got {dt}")
    x = state.as_array() if isinstance(state, ParticleState) else None
    if x is None:
        x = ParticleState(state).as_array()
    if x.size != params.n:
        raise DomainError(f"state has {x.size} coordinates, params expect {params.n}")
    if np.any(x <= 0):
        raise DomainError("square-root stepping needs strictly positive coordinates")
    gen = _coerce_generator(rng)
    y = 2.0 * np.sqrt(x)[None, :]
    prop, ok = _propose_batch(y, dt, params, gen)
    if not ok[0]:
        raise StepRejected(f"proposal left the admissible region at dt={dt:.3e}")
    return ParticleState(0.25 * prop[0] ** 2)


def dl_paths_batch(x0, times, params, rng, dt=None):
    """Euler paths for a batch of replicas, observed on a shared time grid.

    x0: (r, n) array of strictly positive ordered start states, or a single
    state broadcast to r rows via x0=(state, replicas).
    Returns an array of shape (len(times), r, n).
    """
    if isinstance(x0, tuple):
        state, r = x0
        base = state.as_array() if isinstance(state, ParticleState) else np.asarray(state, float)
        x0 = np.tile(base.reshape(1, -1), (int(r), 1))
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 2 or x0.shape[1] != params.n:
        raise DomainError(f"x0 must be (replicas, {params.n})")
    if np.any(x0 <= 0):
        raise DomainError("square-root stepping needs strictly positive start coordinates")
    times = _validate_times(times)
    gen = _coerce_generator(rng)
    if dt is None:
        dt = default_dt(x0[0])
    out = np.empty((times.size, x0.shape[0], x0.shape[1]))
    y = 2.0 * np.sqrt(x0)
    t_now = 0.0
    for k, t in enumerate(times):
        span = t - t_now
        if span > 0:
            n_steps = max(1, int(math.ceil(span / dt - 1e-12)))
            h = span / n_steps
            for _ in range(n_steps):
                y = _advance_rows(y, h, params, gen, 0)
        out[k] = 0.25 * y**2
        t_now = t
    return out


def dl_path(x0, times, params, rng, dt=None):
    """A single Euler path observed on a time grid; see dl_paths_batch."""
    state = x0 if isinstance(x0, ParticleState) else ParticleState(x0)
    arr = dl_paths_batch((state, 1), times, params, rng, dt=dt)
    states = [ParticleState(arr[k, 0]) for k in range(arr.shape[0])]
    return Path(times=np.asarray(times, float), states=states, scheme="euler-sqrt",
                meta={"dt": dt if dt is not None else default_dt(state.as_array())})


def cir_exact_transition(x0, t, alpha, rng):
    """Exact transition of the one-particle system started from x0.

    The time-t law given x0 is (1 - e^-t) * Gamma(alpha + K, 1) with
    K ~ Poisson(x0 e^-t / (1 - e^-t)); sampling goes through that mixture,
    which is exact and needs no special functions.  Accepts scalar or array
    x0 (one draw per entry).
    """
    if alpha <= 0 or not math.isfinite(alpha):
        raise DomainError(f"alpha must be positive, got {alpha}")
    if t < 0 or not math.isfinite(t):
        raise DomainError(f"t must be nonnegative, got {t}")
    x = np.asarray(x0, dtype=float)
    if np.any(x < 0):
        raise DomainError("x0 must be nonnegative")
    if t == 0:
        return x.copy() if x.ndim else float(x)
    gen = _coerce_generator(rng)
    ec = math.exp(-t)
    c = -math.expm1(-t)
    lam = x * (ec / c)
    k = gen.poisson(lam)
    draw = c * gen.standard_gamma(alpha + k)
    return draw if x.ndim else float(draw)


@dataclass(frozen=True)
class MatrixParams:
    """Parameters of the rectangular matrix flow dM = kappa dB - gamma M dt.

    Scaling the spectrum of M M^T by gamma/kappa^2 and time by 2*gamma
    turns the eigenvalue flow into the canonical system with alpha = m/2
    and beta = 1.
    """

    n: int
    m: int
    kappa: float
    gamma: float

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and isinstance(self.m, (int, np.integer))):
            raise ValidationError("n and m must be integers")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        if self.n < 1 or self.m < self.n:
            raise ValidationError(f"need m >= n >= 1, got n={self.n}, m={self.m}")
        if self.kappa <= 0 or self.gamma <= 0:
            raise ValidationError("kappa and gamma must be positive")

    @classmethod
    def bru(cls, n, m):
        """Normalization with kappa^2 = m/2, gamma = 1/2: eigenvalues/m follow
        the canonical clock directly (space scale 1/m, time scale 1)."""
        return cls(n, m, math.sqrt(m / 2.0), 0.5)

    @property
    def space_scale(self):
        return self.gamma / self.kappa**2

    @property
    def time_scale(self):
        return 2.0 * self.gamma

    def induced_model(self):
        """Canonical particle parameters carried by the spectrum.

        delta = (m - n + 1)/2 is below 1 when m <= n + 1, outside the
        certified interacting regime, so the params are built allow_weak.
        """
        return ModelParams(self.n, self.m / 2.0, 1.0, allow_weak=True)


class MatrixState:
    """An n x m real matrix, frozen."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2:
            raise DomainError("matrix state must be two-dimensional")
        if not np.all(np.isfinite(a)):
            raise DomainError("matrix entries must be finite")
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    def __setattr__(self, name, value):
        raise AttributeError("MatrixState is immutable")

    @property
    def shape(self):
        return self.entries.shape

    def frobenius_sq(self):
        return float(np.sum(self.entries**2))


def rect_ou_transition(M0, t, params, rng):
    """Exact transition of the matrix flow over time t (matrix clock)."""
    M = M0.entries if isinstance(M0, MatrixState) else MatrixState(M0).entries
    if M.shape != (params.n, params.m):
        raise DomainError(f"matrix shape {M.shape} does not match params ({params.n}, {params.m})")
    if t < 0 or not math.isfinite(t):
        raise DomainError(f"t must be nonnegative, got {t}")
    if t == 0:
        return MatrixState(M)
    gen = _coerce_generator(rng)
    decay = math.exp(-params.gamma * t)
    var = params.kappa**2 * (-math.expm1(-2.0 * params.gamma * t)) / (2.0 * params.gamma)
    return MatrixState(decay * M + math.sqrt(var) * gen.standard_normal(M.shape))


def spectral_projection(M):
    """Ordered eigenvalues of M M^T as a ParticleState.

    Tiny negative eigenvalues from roundoff are clipped to zero; anything
    materially negative or non-finite raises EigenFailure.
    """
    A = M.entries if isinstance(M, MatrixState) else np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise DomainError("expected a matrix")
    try:
        w = np.linalg.eigvalsh(A @ A.T)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"symmetric eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise EigenFailure("eigensolver produced non-finite eigenvalues")
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.any(w < -1e-8 * scale):
        raise EigenFailure(f"materially negative eigenvalue {np.min(w):.3e} from a Gram matrix")
    return ParticleState(np.maximum(np.sort(w), 0.0))


def matrix_dl_path(M0, times, params, rng, canonical=False):
    """Exact matrix transitions chained along a grid, projected to spectra.

    With canonical=False states carry the raw eigenvalues of M M^T on the
    matrix clock (so sum of coordinates equals the squared Frobenius norm).
    With canonical=True the grid is read in canonical time units and states
    are scaled by space_scale, making them comparable to the canonical
    system with the induced parameters.
    """
    times = _validate_times(times)
    gen = _coerce_generator(rng)
    M = M0 if isinstance(M0, MatrixState) else MatrixState(M0)
    if M.shape != (params.n, params.m):
        raise DomainError(f"matrix shape {M.shape} does not match params ({params.n}, {params.m})")
    wall = times / params.time_scale if canonical else times
    states = []
    t_prev = 0.0
    for tw in wall:
        if tw > t_prev:
            M = rect_ou_transition(M, tw - t_prev, params, gen)
        t_prev = tw
        s = spectral_projection(M)
        if canonical:
            s = ParticleState(params.space_scale * s.as_array())
        states.append(s)
    return Path(times=times, states=states, scheme="matrix-exact",
                meta={"canonical": bool(canonical), "space_scale": params.space_scale,
                      "time_scale": params.time_scale})
