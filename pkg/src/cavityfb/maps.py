"""Radial field maps: potential, transmission, force, and diffusion profiles.

All trajectory-level physics consumes these precomputed steady-state scans
rather than solving the master equation in the inner loop (the cavity and
atomic dynamics are fast compared to the motion, so the field follows the
instantaneous coupling adiabatically).

Two tables are built per drive level:

* a radial table on a uniform rho grid at the standing-wave antinode
  (x = 0): transmission T, force F, potential U (integrated from F inward
  with U(rho_max) = 0), excited-state population, photon number;
* an auxiliary table on a uniform coupling grid g in [0, g0]: T, the
  dipole correlation <a+s + s+a>, excited population, and the potential
  Phi(g) = hbar * integral_0^g corr dg', which extends the potential and
  force off-axis through g(x, rho).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import curve_fit

from . import jc
from .params import HBAR, HilbertSpace, SystemParams, n_fock_for

MAPS_SCHEMA_VERSION = 1


class MapBuildError(RuntimeError):
    """Map construction failed (solver error or non-monotonic inversion branch)."""


@dataclass(frozen=True)
class GridSpec:
    n_rho: int = 2048
    rho_max_w0: float = 3.0
    n_g: int = 2048

    def __post_init__(self):
        if self.n_rho < 8 or self.n_g < 8:
            raise ValueError("grids need at least 8 points")
        if self.rho_max_w0 < 3.0:
            raise ValueError("rho_max must cover at least 3 waists")


@dataclass
class DiffusionModel:
    """Momentum diffusion D = gain * projection * (hbar k)^2 gamma * pop_e.

    The recoil scale fixes the dimensions; the calibration gain absorbs
    everything the single-rate model cannot resolve (dipole-force
    fluctuations, angular factors) and is set by matching the target
    heating rate per radial oscillation.
    """

    recoil_scale: float
    dimensional_projection: float = 1.0
    calibration_gain: float = 1.0

    def __post_init__(self):
        if self.recoil_scale < 0 or self.dimensional_projection < 0 \
                or self.calibration_gain < 0:
            raise ValueError("diffusion model fields must be non-negative")

    @property
    def scale(self) -> float:
        """Prefactor multiplying the excited-state population, kg^2 m^2 / s^3."""
        return self.recoil_scale * self.dimensional_projection * self.calibration_gain

    @classmethod
    def for_params(cls, params: SystemParams, **kw) -> "DiffusionModel":
        return cls(recoil_scale=(HBAR * params.k_optical) ** 2 * params.gamma, **kw)


def _solve_one(args):
    params, n_fock, g, eps = args
    obs = jc.solve_observables(params, HilbertSpace(n_fock), g, eps)
    return obs.transmission, obs.dipole_corr, obs.excited_pop, obs.photon_number


def _solve_grid(params, n_fock, g_values, eps, jobs=1):
    work = [(params, n_fock, float(g), eps) for g in g_values]
    if jobs > 1 and len(work) > 32:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_solve_one, work, chunksize=32))
    else:
        rows = [_solve_one(w) for w in work]
    T, C, pe, nph = map(np.array, zip(*rows))
    return T, C, pe, nph


class RadialMaps:
    """Per-drive-level lookup tables over radius and over coupling."""

    def __init__(self, params: SystemParams, levels, rho, g_grid,
                 radial, coupling, n_fock_used, diffusion: DiffusionModel | None = None):
        self.params = params
        self.levels = tuple(levels)
        self.rho = np.asarray(rho, dtype=float)
        self.g_grid = np.asarray(g_grid, dtype=float)
        self.radial = radial        # level -> dict of arrays U, F, T, pe, nphot
        self.coupling = coupling    # level -> dict of arrays T, corr, pe, Phi
        self.n_fock_used = dict(n_fock_used)
        self.diffusion_model = diffusion
        self._branch_start = {}
        self._fits = {}
        self._finalize()

    # -- construction ---------------------------------------------------

    def _finalize(self):
        for level in self.levels:
            T = self.radial[level]["T"]
            i0 = int(np.argmax(T))
            contrast = T.max() - T.min()
            if contrast <= 1e-12 * max(T.max(), 1.0):
                # undriven or atom-blind level: flat map, degenerate inverse
                self._branch_start[level] = T.size - 1
            elif not np.all(np.diff(T[i0:]) < 0):
                bad = i0 + int(np.argmax(np.diff(T[i0:]) >= 0))
                raise MapBuildError(
                    f"transmission at level {level!r} is not monotone on the "
                    f"inversion branch (first violation near rho = "
                    f"{self.rho[bad] * 1e6:.2f} um); refusing to build a "
                    f"single-valued inverse"
                )
            else:
                self._branch_start[level] = i0
            self._fits[level] = self._fit_gaussian(level)

    def _fit_gaussian(self, level):
        U = self.radial[level]["U"]
        sel = self.rho <= 1.5 * self.params.w0
        u0_guess = max(-U.min(), 1e-30)
        try:
            popt, _ = curve_fit(
                lambda r, u0, w: -u0 * np.exp(-(r / w) ** 2),
                self.rho[sel], U[sel], p0=[u0_guess, 0.7 * self.params.w0],
            )
        except RuntimeError:
            return {"U0_fit": float("nan"), "w": float("nan"), "rms": float("nan")}
        u0, w = float(popt[0]), float(abs(popt[1]))
        resid = U[sel] + u0 * np.exp(-(self.rho[sel] / w) ** 2)
        rms = float(np.sqrt(np.mean(resid**2)) / u0)
        return {"U0_fit": u0, "w": w, "rms": rms}

    # -- scalar properties ----------------------------------------------

    def depth(self, level) -> float:
        """Trap depth U0 = -min U, J."""
        return float(-self.radial[level]["U"].min())

    def fitted_waist(self, level) -> float:
        return self._fits[level]["w"]

    def fit_report(self, level) -> dict:
        return dict(self._fits[level])

    def branch_start_rho(self, level) -> float:
        return float(self.rho[self._branch_start[level]])

    # -- interpolating accessors -----------------------------------------

    def _check_level(self, level):
        if level not in self.radial:
            raise KeyError(f"unknown drive level {level!r}; have {self.levels}")

    def potential(self, level, rho):
        """U(rho) at the antinode, J.  Clamps to 0 beyond the grid edge."""
        self._check_level(level)
        return np.interp(rho, self.rho, self.radial[level]["U"])

    def force(self, level, rho):
        """Radial force at the antinode, N."""
        self._check_level(level)
        return np.interp(rho, self.rho, self.radial[level]["F"])

    def excited_pop(self, level, rho):
        self._check_level(level)
        return np.interp(rho, self.rho, self.radial[level]["pe"])

    def diffusion(self, level, rho):
        """Momentum diffusion coefficient D(rho), kg^2 m^2/s^3."""
        if self.diffusion_model is None:
            raise MapBuildError("no diffusion model attached; calibrate first")
        return self.diffusion_model.scale * self.excited_pop(level, rho)

    def transmission(self, level, rho, x=0.0):
        """|<a>|^2 at the instantaneous coupling g(x, rho)."""
        self._check_level(level)
        g = np.abs(self.params.coupling(x, rho)) if np.isscalar(rho) else \
            np.abs(self.params.g0 * np.cos(self.params.k_optical * x)
                   * np.exp(-(np.asarray(rho) / self.params.w0) ** 2))
        return np.interp(g, self.g_grid, self.coupling[level]["T"])

    def transmission_at_g(self, level, g):
        self._check_level(level)
        return np.interp(np.abs(g), self.g_grid, self.coupling[level]["T"])

    def transmission_radial(self, level, rho):
        """T from the radial table (the inverse lookup's own mesh)."""
        self._check_level(level)
        return np.interp(rho, self.rho, self.radial[level]["T"])

    def potential_at(self, level, x, rho):
        """U at an arbitrary point, from the coupling-indexed table, J."""
        self._check_level(level)
        g = np.abs(self.params.coupling(x, rho)) if np.isscalar(rho) else \
            np.abs(self.params.g0 * np.cos(self.params.k_optical * x)
                   * np.exp(-(np.asarray(rho) / self.params.w0) ** 2))
        return np.interp(g, self.g_grid, self.coupling[level]["Phi"])

    def invert_transmission(self, level, t_value):
        """Radius on the monotone branch whose transmission is t_value, m.

        Values above the branch maximum clamp to the branch start (the
        axis for trapping levels); values below the edge transmission
        clamp to the grid edge.
        """
        self._check_level(level)
        i0 = self._branch_start[level]
        T = self.radial[level]["T"][i0:]
        r = self.rho[i0:]
        return np.interp(t_value, T[::-1], r[::-1])

    def empty_transmission(self, level) -> float:
        """Transmission with the atom absent (g = 0)."""
        return float(self.coupling[level]["T"][0])

    def peak_transmission(self, level) -> float:
        return float(self.radial[level]["T"].max())

    def normalized_transmission(self, level, rho, x=0.0):
        """T relative to the empty-cavity value at the same drive."""
        return self.transmission(level, rho, x=x) / self.empty_transmission(level)

    def steepest_slope(self, level):
        """(rho, |dT/drho|) at the steepest point of the inversion branch."""
        i0 = self._branch_start[level]
        T = self.radial[level]["T"][i0:]
        r = self.rho[i0:]
        slopes = np.abs(np.diff(T) / np.diff(r))
        j = int(np.argmax(slopes))
        return 0.5 * (r[j] + r[j + 1]), float(slopes[j])

    # -- arrays for the dynamics kernel -----------------------------------

    def kernel_tables(self):
        """Uniform-coupling tables stacked by level index for the integrator."""
        nl = len(self.levels)
        C = np.empty((nl, self.g_grid.size))
        pe = np.empty_like(C)
        T = np.empty_like(C)
        Phi = np.empty_like(C)
        for i, level in enumerate(self.levels):
            C[i] = self.coupling[level]["corr"]
            pe[i] = self.coupling[level]["pe"]
            T[i] = self.coupling[level]["T"]
            Phi[i] = self.coupling[level]["Phi"]
        return {"g_grid": self.g_grid, "corr": C, "pe": pe, "T": T, "Phi": Phi,
                "level_index": {lv: i for i, lv in enumerate(self.levels)}}

    # -- persistence -------------------------------------------------------

    def save(self, stem):
        """Write radial CSV, coupling CSV, and a JSON sidecar; returns paths."""
        stem = str(stem)
        radial_path = stem + ".csv"
        gmap_path = stem + "_gmap.csv"
        meta_path = stem + "_meta.json"
        dm = self.diffusion_model
        with open(radial_path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["level", "rho_m", "U_J", "F_N", "T", "D", "pop_e"])
            for level in self.levels:
                tab = self.radial[level]
                D = (dm.scale * tab["pe"]) if dm else np.zeros_like(tab["pe"])
                for i, r in enumerate(self.rho):
                    wr.writerow([level, f"{r:.17g}", f"{tab['U'][i]:.17g}",
                                 f"{tab['F'][i]:.17g}", f"{tab['T'][i]:.17g}",
                                 f"{D[i]:.17g}", f"{tab['pe'][i]:.17g}"])
        with open(gmap_path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["level", "g_rad_per_s", "T", "dipole_corr", "pop_e", "Phi_J"])
            for level in self.levels:
                tab = self.coupling[level]
                for i, g in enumerate(self.g_grid):
                    wr.writerow([level, f"{g:.17g}", f"{tab['T'][i]:.17g}",
                                 f"{tab['corr'][i]:.17g}", f"{tab['pe'][i]:.17g}",
                                 f"{tab['Phi'][i]:.17g}"])
        meta = {
            "schema_version": MAPS_SCHEMA_VERSION,
            "levels": list(self.levels),
            "n_fock_used": self.n_fock_used,
            "params": {
                "g0": self.params.g0, "kappa": self.params.kappa,
                "gamma": self.params.gamma, "delta_cp": self.params.delta_cp,
                "delta_ap": self.params.delta_ap,
                "wavelength": self.params.wavelength, "w0": self.params.w0,
                "mass": self.params.mass,
                "drive_levels": self.params.drive_levels,
                "drive_reference": self.params.drive_reference,
            },
            "diffusion_model": asdict(dm) if dm else None,
            "depths_J": {lv: self.depth(lv) for lv in self.levels},
            "fits": {lv: self._fits[lv] for lv in self.levels},
        }
        with open(meta_path, "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
        return radial_path, gmap_path, meta_path

    @classmethod
    def load(cls, stem) -> "RadialMaps":
        stem = str(stem)
        with open(stem + "_meta.json") as f:
            meta = json.load(f)
        if meta.get("schema_version") != MAPS_SCHEMA_VERSION:
            raise MapBuildError(
                f"map file schema {meta.get('schema_version')!r} unsupported "
                f"(expected {MAPS_SCHEMA_VERSION})"
            )
        params = SystemParams(**meta["params"])
        levels = meta["levels"]
        radial_rows = {lv: [] for lv in levels}
        with open(stem + ".csv", newline="") as f:
            for row in csv.DictReader(f):
                radial_rows[row["level"]].append(row)
        gmap_rows = {lv: [] for lv in levels}
        with open(stem + "_gmap.csv", newline="") as f:
            for row in csv.DictReader(f):
                gmap_rows[row["level"]].append(row)
        rho = np.array([float(r["rho_m"]) for r in radial_rows[levels[0]]])
        g_grid = np.array([float(r["g_rad_per_s"]) for r in gmap_rows[levels[0]]])
        radial = {}
        for lv in levels:
            rows = radial_rows[lv]
            radial[lv] = {
                "U": np.array([float(r["U_J"]) for r in rows]),
                "F": np.array([float(r["F_N"]) for r in rows]),
                "T": np.array([float(r["T"]) for r in rows]),
                "pe": np.array([float(r["pop_e"]) for r in rows]),
                "nphot": np.full(len(rows), np.nan),
            }
        coupling = {}
        for lv in levels:
            rows = gmap_rows[lv]
            coupling[lv] = {
                "T": np.array([float(r["T"]) for r in rows]),
                "corr": np.array([float(r["dipole_corr"]) for r in rows]),
                "pe": np.array([float(r["pop_e"]) for r in rows]),
                "Phi": np.array([float(r["Phi_J"]) for r in rows]),
            }
        dm = meta.get("diffusion_model")
        model = DiffusionModel(**dm) if dm else None
        return cls(params, levels, rho, g_grid, radial, coupling,
                   meta["n_fock_used"], diffusion=model)


def build_maps(params: SystemParams, levels=None, grid: GridSpec | None = None,
               n_fock: dict | None = None, jobs: int = 1) -> RadialMaps:
    """Solve the master equation over the radial and coupling grids.

    levels defaults to every named drive level of params; n_fock overrides
    the per-level truncation defaults.
    """
    grid = grid or GridSpec()
    if levels is None:
        levels = sorted(params.drive_levels, key=params.drive_levels.get)
    rho = np.linspace(0.0, grid.rho_max_w0 * params.w0, grid.n_rho)
    g_grid = np.linspace(0.0, params.g0, grid.n_g)
    radial, coupling, used = {}, {}, {}
    for level in levels:
        nf = n_fock_for(level, n_fock)
        used[level] = nf
        eps = params.drive_amplitude(level)
        g_of_rho = params.g0 * np.exp(-(rho / params.w0) ** 2)
        try:
            T, C, pe, nph = _solve_grid(params, nf, g_of_rho, eps, jobs)
            Tg, Cg, peg, _ = _solve_grid(params, nf, g_grid, eps, jobs)
        except jc.SteadyStateError as exc:
            raise MapBuildError(f"steady-state scan failed at level {level!r}: {exc}") from exc
        dg_drho = -2.0 * rho / params.w0**2 * g_of_rho
        F = -HBAR * dg_drho * C
        U = np.zeros_like(rho)
        for i in range(rho.size - 2, -1, -1):
            U[i] = U[i + 1] + 0.5 * (F[i] + F[i + 1]) * (rho[i + 1] - rho[i])
        Phi = HBAR * np.concatenate(
            ([0.0], np.cumsum(0.5 * (Cg[1:] + Cg[:-1]) * np.diff(g_grid))))
        radial[level] = {"U": U, "F": F, "T": T, "pe": pe, "nphot": nph}
        coupling[level] = {"T": Tg, "corr": Cg, "pe": peg, "Phi": Phi}
    return RadialMaps(params, levels, rho, g_grid, radial, coupling, used,
                      diffusion=DiffusionModel.for_params(params))
