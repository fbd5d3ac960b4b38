"""Quasiclassical atom motion in the cavity field.

The atom moves in the effective potential set by the steady-state field at
its instantaneous position, with random momentum kicks representing
spontaneous-emission momentum diffusion.  The integrator is a leapfrog
(velocity-Verlet) with an Euler-Maruyama noise impulse appended to each
step; the dynamical timestep subdivides the 1 MHz information timestep.

Coordinates: x along the cavity axis (standing wave), (y, z) transverse
with rho = sqrt(y^2 + z^2); atoms fall along -z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .params import G_EARTH, HBAR, KB, SystemParams


@dataclass(frozen=True)
class SimConfig:
    """Trajectory integration and initial-condition settings."""

    mode: str = "full3d"              # or "axial_pinned"
    dt_info: float = 1e-6             # sampling/information step, s
    substeps: int = 3000              # dynamics steps per info step
    t_max: float = 20e-3              # hard stop, s
    drop_height: float = 3e-3         # MOT height above the mode, m
    mot_temperature: float = 10e-6    # K
    entry_width: float = 45e-6        # transverse entry window (y), m
    entry_height_w0: float = 2.5      # starting z in units of w0
    escape_rho_w0: float = 2.5
    energy_escape_steps: int = 10
    gravity: bool = True
    friction_beta: float = 0.0        # 1/s, optional linear drag
    axial_diffusion_factor: float = 1.0

    def __post_init__(self):
        if self.mode not in ("full3d", "axial_pinned"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.dt_info <= 0 or self.substeps < 1:
            raise ValueError("dt_info and substeps must be positive")

    @property
    def dt_dynamics(self) -> float:
        return self.dt_info / self.substeps

    @property
    def pinned(self) -> bool:
        return self.mode == "axial_pinned"

    @classmethod
    def full3d(cls, **kw) -> "SimConfig":
        kw.setdefault("substeps", 3000)
        return cls(mode="full3d", **kw)

    @classmethod
    def axial_pinned(cls, **kw) -> "SimConfig":
        # coarser step: dt = (1/30) us at the default 1 us info step
        kw.setdefault("substeps", 30)
        return cls(mode="axial_pinned", **kw)


@dataclass
class AtomState:
    """Instantaneous phase-space state plus the active drive level."""

    t: float
    position: np.ndarray   # (x, y, z), m
    momentum: np.ndarray   # (px, py, pz), kg m/s
    level: str

    @property
    def rho(self) -> float:
        return float(math.hypot(self.position[1], self.position[2]))

    @property
    def theta(self) -> float:
        return float(math.atan2(-self.position[2], self.position[1]))

    @property
    def rho_dot(self) -> float:
        """Radial velocity d rho/dt, m/s."""
        y, z = self.position[1], self.position[2]
        r = math.hypot(y, z)
        if r == 0.0:
            return 0.0
        return float((y * self.momentum[1] + z * self.momentum[2]) / r) / self._mass

    @property
    def angular_momentum(self) -> float:
        """L = m (y zdot - z ydot) = y pz - z py, kg m^2/s."""
        y, z = self.position[1], self.position[2]
        return float(y * self.momentum[2] - z * self.momentum[1])

    _mass: float = 1.0  # set on creation; avoids carrying SystemParams around

    def copy(self) -> "AtomState":
        return AtomState(self.t, self.position.copy(), self.momentum.copy(),
                         self.level, _mass=self._mass)


def make_state(t, xyz, pxyz, level, mass) -> AtomState:
    return AtomState(t, np.asarray(xyz, dtype=float),
                     np.asarray(pxyz, dtype=float), level, _mass=mass)


def reduced_quantities(state: AtomState, depth: float, waist: float, mass: float):
    """Dimensionless radius, control strength, and angular momentum.

    rho_t = rho/w, E = 2 U0/(m w^2), L_t = L^2/(m^2 w^4) for the scaled
    radial equation of motion.
    """
    return {
        "rho_t": state.rho / waist,
        "E": 2.0 * depth / (mass * waist**2),
        "L_t": state.angular_momentum**2 / (mass**2 * waist**4),
    }


def sample_initial(config: SimConfig, params: SystemParams,
                   rng: np.random.Generator) -> AtomState:
    """Draw one atom from the drop distribution.

    Free-fall speed from the configured drop height, isotropic thermal
    spread at the MOT temperature, entry position uniform over the
    transverse window and over one wavelength along the axis.
    """
    v_fall = math.sqrt(2.0 * G_EARTH * config.drop_height)
    sigma_v = math.sqrt(KB * config.mot_temperature / params.mass)
    # fixed draw order: x, y, then the three velocity components
    x = rng.uniform(-0.5, 0.5) * params.wavelength
    y = rng.uniform(-0.5, 0.5) * config.entry_width
    z = config.entry_height_w0 * params.w0
    vx, vy, vz = rng.normal(0.0, sigma_v, size=3) if sigma_v > 0 else (0.0, 0.0, 0.0)
    vz = vz - v_fall
    if config.pinned:
        x, vx = 0.0, 0.0
    m = params.mass
    return make_state(0.0, (x, y, z), (m * vx, m * vy, m * vz), "exlo", m)


@njit(cache=True)
def _integrate(pos, mom, n_sub, dt, level_idx, corr_tab, pe_tab, g_max,
               g0, inv_w0sq, k_opt, hbar, mass, diff_scale, axial_factor,
               friction, grav_accel, pinned, noise):
    """Advance one information interval in place.

    Force: F = -hbar * grad|g| * corr(|g|) with corr interpolated on the
    uniform coupling grid; diffusion kicks with variance 2 D dt per
    tracked momentum component, D = diff_scale * pe(|g|).  Returns the
    accumulated second-order kick energy sum(|dp|^2)/2m, an unbiased
    low-variance sample of the diffusive heating over the interval.
    """
    ng = corr_tab.shape[1]
    hg = g_max / (ng - 1)
    x, y, z = pos[0], pos[1], pos[2]
    px, py, pz = mom[0], mom[1], mom[2]

    # force at the current position
    gfac = math.exp(-(y * y + z * z) * inv_w0sq)
    cx = math.cos(k_opt * x)
    sx = math.sin(k_opt * x)
    gax = g0 * cx * gfac
    ga = abs(gax)
    sgn = 1.0 if gax >= 0.0 else -1.0
    j = int(ga / hg)
    if j > ng - 2:
        j = ng - 2
    w = ga / hg - j
    corr = corr_tab[level_idx, j] * (1.0 - w) + corr_tab[level_idx, j + 1] * w
    fx = hbar * corr * sgn * g0 * k_opt * sx * gfac
    fy = hbar * corr * 2.0 * y * inv_w0sq * ga
    fz = hbar * corr * 2.0 * z * inv_w0sq * ga - mass * grav_accel

    half = 0.5 * dt
    heat = 0.0
    for i in range(n_sub):
        py += half * fy
        pz += half * fz
        y += dt * py / mass
        z += dt * pz / mass
        if not pinned:
            px += half * fx
            x += dt * px / mass

        gfac = math.exp(-(y * y + z * z) * inv_w0sq)
        cx = math.cos(k_opt * x)
        sx = math.sin(k_opt * x)
        gax = g0 * cx * gfac
        ga = abs(gax)
        sgn = 1.0 if gax >= 0.0 else -1.0
        j = int(ga / hg)
        if j > ng - 2:
            j = ng - 2
        w = ga / hg - j
        corr = corr_tab[level_idx, j] * (1.0 - w) + corr_tab[level_idx, j + 1] * w
        fx = hbar * corr * sgn * g0 * k_opt * sx * gfac
        fy = hbar * corr * 2.0 * y * inv_w0sq * ga
        fz = hbar * corr * 2.0 * z * inv_w0sq * ga - mass * grav_accel

        py += half * fy
        pz += half * fz
        if not pinned:
            px += half * fx

        if diff_scale > 0.0:
            pe = pe_tab[level_idx, j] * (1.0 - w) + pe_tab[level_idx, j + 1] * w
            kick = math.sqrt(2.0 * diff_scale * pe * dt)
            dpy = kick * noise[i, 0]
            dpz = kick * noise[i, 1]
            py += dpy
            pz += dpz
            heat += dpy * dpy + dpz * dpz
            if not pinned:
                dpx = math.sqrt(axial_factor) * kick * noise[i, 2]
                px += dpx
                heat += dpx * dpx
        if friction > 0.0:
            damp = 1.0 - friction * dt
            px *= damp
            py *= damp
            pz *= damp

    pos[0], pos[1], pos[2] = x, y, z
    mom[0], mom[1], mom[2] = px, py, pz
    return heat / (2.0 * mass)


_NO_NOISE = np.zeros((0, 3))


class Integrator:
    """Binds the kernel to a map set and a simulation config."""

    def __init__(self, maps, config: SimConfig):
        self.maps = maps
        self.config = config
        tabs = maps.kernel_tables()
        self._corr = np.ascontiguousarray(tabs["corr"])
        self._pe = np.ascontiguousarray(tabs["pe"])
        self._g_max = float(tabs["g_grid"][-1])
        self._level_index = tabs["level_index"]
        p = maps.params
        self._args = (self._g_max, p.g0, 1.0 / p.w0**2, p.k_optical,
                      HBAR, p.mass)

    def level_index(self, level: str) -> int:
        return self._level_index[level]

    def step_interval(self, state: AtomState, n_sub: int,
                      noise: np.ndarray | None = None,
                      diff_scale: float = 0.0) -> float:
        """Advance state by n_sub dynamics steps at its current level.

        Returns the accumulated diffusive kick energy over the interval
        (J); zero for noise-free propagation.
        """
        cfg = self.config
        if noise is None:
            noise = _NO_NOISE
            diff_scale = 0.0
        heat = _integrate(state.position, state.momentum, n_sub,
                          cfg.dt_dynamics,
                          self._level_index[state.level], self._corr, self._pe,
                          *self._args, diff_scale, cfg.axial_diffusion_factor,
                          cfg.friction_beta,
                          G_EARTH if cfg.gravity else 0.0,
                          cfg.pinned, noise)
        state.t += n_sub * cfg.dt_dynamics
        return heat

    def total_energy(self, state: AtomState, level: str | None = None) -> float:
        """Kinetic plus optical potential energy (gravity excluded), J."""
        level = level or state.level
        ke = float(state.momentum @ state.momentum) / (2.0 * self.maps.params.mass)
        u = float(self.maps.potential_at(level, state.position[0], state.rho))
        return ke + u


def effective_potential(maps, level, rho, L):
    """V_eff(rho) = U(rho) + L^2/(2 m rho^2), J."""
    U = maps.potential(level, rho)
    if L == 0:
        return U
    rho = np.asarray(rho, dtype=float)
    m = maps.params.mass
    with np.errstate(divide="ignore"):
        cent = np.where(rho > 0, L**2 / (2.0 * m * rho**2), np.inf)
    return U + cent


def _turning_radius_inner(maps, level, energy, L, rho_max):
    """Inner turning point of V_eff at the given energy (L > 0)."""
    lo, hi = 1e-12, rho_max
    f = lambda r: effective_potential(maps, level, r, L) - energy
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def oscillation_period(maps, level, amplitude, L=0.0, n_nodes=600) -> float:
    """Radial oscillation period by quadrature in the effective potential.

    For L = 0 this is the period of rho = |y| for the line orbit through
    the axis (half the full 1-D oscillation); for L > 0 it is the closed
    rho_min -> rho_max -> rho_min time.  amplitude is the outer turning
    radius.  Uses the substitution rho = a + (b-a)(1-cos u)/2 to remove
    the turning-point singularity, then fixed-order Gauss-Legendre.
    """
    m = maps.params.mass
    depth = maps.depth(level)
    if depth <= 0:
        raise ValueError(f"level {level!r} does not trap")
    energy = float(effective_potential(maps, level, amplitude, L))
    if energy >= 0.0:
        raise ValueError("amplitude beyond the trap edge: energy >= 0")
    inner = 0.0 if L == 0 else _turning_radius_inner(maps, level, energy, L, amplitude)
    u, wts = np.polynomial.legendre.leggauss(n_nodes)
    u = 0.5 * (u + 1.0) * math.pi          # map to [0, pi]
    wts = wts * 0.5 * math.pi
    span = amplitude - inner
    rho = inner + span * 0.5 * (1.0 - np.cos(u))
    drho_du = span * 0.5 * np.sin(u)
    v2 = 2.0 / m * (energy - effective_potential(maps, level, rho, L))
    v2 = np.maximum(v2, 0.0)
    integrand = np.where(v2 > 0, drho_du / np.sqrt(np.where(v2 > 0, v2, 1.0)), 0.0)
    half_period = float(np.sum(wts * integrand))
    return 2.0 * half_period


def period_amplitude_curve(maps, level, amplitudes=None, L=0.0):
    """Tabulate (amplitude, period) for radial oscillations at fixed L."""
    if amplitudes is None:
        w = maps.fitted_waist(level)
        amplitudes = np.linspace(0.15, 1.3, 12) * w
    periods = np.array([oscillation_period(maps, level, a, L=L) for a in amplitudes])
    return np.asarray(amplitudes, dtype=float), periods


def harmonic_period(maps, level) -> float:
    """Small-amplitude rho-oscillation period of an L = 0 line orbit, s.

    The 1-D motion through the axis has angular frequency
    omega = sqrt(U''(0)/m); rho = |y| repeats every half cycle, so the
    rho period is pi/omega.
    """
    r = maps.rho
    U = maps.radial[level]["U"]
    h = r[1] - r[0]
    d2u = (U[2] - 2.0 * U[1] + U[0]) / h**2
    return math.pi / math.sqrt(d2u / maps.params.mass)


def circular_orbit_state(maps, level, radius) -> AtomState:
    """State on a circular orbit at the given radius (centrifugal balance)."""
    m = maps.params.mass
    f = float(maps.force(level, radius))
    if f >= 0:
        raise ValueError("no restoring force at this radius")
    v_t = math.sqrt(-f * radius / m)
    return make_state(0.0, (0.0, radius, 0.0), (0.0, 0.0, m * v_t), level, m)


def line_orbit_state(maps, level, amplitude) -> AtomState:
    """State at the apex of an L = 0 radial line oscillation."""
    m = maps.params.mass
    return make_state(0.0, (0.0, amplitude, 0.0), (0.0, 0.0, 0.0), level, m)


def simulate_periods(maps, config: SimConfig, state: AtomState,
                     n_periods: int = 8) -> float:
    """Measure the mean rho-oscillation period of a noise-free orbit, s.

    Integrates at the configured dynamics step, samples rho each info
    step, and averages the spacing of successive rho maxima (parabolic
    interpolation around each sample maximum).
    """
    integ = Integrator(maps, config)
    st = state.copy()
    guess = oscillation_period(maps, state.level, max(state.rho, 1e-9),
                               L=abs(state.angular_momentum)) \
        if state.rho > 0 else harmonic_period(maps, state.level)
    n_steps = int((n_periods + 2.5) * guess / config.dt_info) + 10
    rhos = np.empty(n_steps + 1)
    rhos[0] = st.rho
    for i in range(n_steps):
        integ.step_interval(st, config.substeps)
        rhos[i + 1] = st.rho
    peaks = []
    for i in range(1, n_steps):
        if rhos[i] >= rhos[i - 1] and rhos[i] > rhos[i + 1]:
            denom = rhos[i - 1] - 2.0 * rhos[i] + rhos[i + 1]
            frac = 0.5 * (rhos[i - 1] - rhos[i + 1]) / denom if denom != 0 else 0.0
            peaks.append(i + frac)
    if len(peaks) < 3:
        raise RuntimeError("too few rho maxima to measure a period")
    spacings = np.diff(peaks)
    return float(np.mean(spacings) * config.dt_info)
