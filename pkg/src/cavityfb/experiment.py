"""Monte Carlo campaigns and per-trajectory feedback metrics.

The damping figure of merit compares the variance of the estimated radial
velocity between an early and a late window of equal duration, both timed
from the trapping switch:

    M  = var(rho_dot_est, 15-215 us) / var(rho_dot_est, 415-615 us)
    M' = var(rho_dot_est, 15-215 us) / var(rho_dot_est, 1015-1215 us)

Values above one indicate damped radial motion.  A trajectory must dwell
to the end of the late window for the statistic to exist.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .controllers import ControllerConfig
from .detection import NoiseModel
from .dynamics import SimConfig
from .estimators import EstimatorSettings
from .trajectory import TrajectoryRecord, run_trajectory

M_EARLY = (15e-6, 215e-6)
M_LATE = (415e-6, 615e-6)
M_PRIME_LATE = (1015e-6, 1215e-6)

M_HISTOGRAM_BINS = np.logspace(-1.0, 2.0, 17)   # 16 log bins over [0.1, 100]


class InsufficientDwellError(ValueError):
    """The record does not cover the requested analysis windows."""


def _window_variance(record: TrajectoryRecord, window) -> float:
    sl = record.window_slice(*window)
    expected = int(round((window[1] - window[0]) / record.dt_info))
    if sl.stop - sl.start < expected:
        raise InsufficientDwellError(
            f"record covers {sl.stop - sl.start} of {expected} samples in "
            f"window {window[0] * 1e6:.0f}-{window[1] * 1e6:.0f} us")
    return float(np.var(record.rho_dot_est[sl]))


def figure_of_merit(record: TrajectoryRecord, early=M_EARLY, late=M_LATE) -> float:
    """Early/late variance ratio of rho_dot_est, trigger-referenced."""
    if not record.triggered:
        raise InsufficientDwellError("trajectory never triggered")
    v_early = _window_variance(record, early)
    v_late = _window_variance(record, late)
    if v_late == 0.0:
        raise InsufficientDwellError("degenerate late window (zero variance)")
    return v_early / v_late


def energy_accounting(record: TrajectoryRecord, depth_ref: float,
                      early=M_EARLY, late=M_PRIME_LATE) -> dict:
    """Mean total-energy change between windows, J and fractional.

    Energies use the potential of the fixed reference level so that drive
    switching does not redefine the zero; the fractional change is taken
    relative to the energy above the reference trap bottom.
    """
    if not record.triggered:
        raise InsufficientDwellError("trajectory never triggered")
    sl_e = record.window_slice(*early)
    sl_l = record.window_slice(*late)
    for sl, win in ((sl_e, early), (sl_l, late)):
        expected = int(round((win[1] - win[0]) / record.dt_info))
        if sl.stop - sl.start < expected:
            raise InsufficientDwellError("record too short for energy windows")
    e_early = float(np.mean(record.energy_ref[sl_e]))
    e_late = float(np.mean(record.energy_ref[sl_l]))
    above_early = e_early + depth_ref
    frac = (e_late - e_early) / above_early if above_early > 0 else math.nan
    return {"delta_e": e_late - e_early, "fractional": frac,
            "early_mean": e_early, "late_mean": e_late}


def reconstruct_trajectory(record: TrajectoryRecord, maps, t_start=None,
                           t_stop=None) -> dict:
    """Planar (rho, theta) trajectory estimate from the radial record.

    The angular momentum is inferred from consecutive radial turning
    points by equating the effective potential at rho_min and rho_max,
    then theta is integrated as L/(m rho^2).  The handedness, the initial
    angle, and the occupied antinode are unobservable and fixed by
    convention (positive L, theta0 = 0, x = 0).
    """
    t = record.t
    sel = np.ones(t.size, dtype=bool)
    if t_start is not None:
        sel &= t >= t_start
    if t_stop is not None:
        sel &= t <= t_stop
    rho = record.rho[sel]
    tt = t[sel]
    levels = [record.level[i] for i in np.nonzero(sel)[0]]
    if rho.size < 5:
        raise ValueError("too few samples for reconstruction")
    m = maps.params.mass
    maxima, minima = [], []
    for i in range(1, rho.size - 1):
        if rho[i] >= rho[i - 1] and rho[i] > rho[i + 1]:
            maxima.append(i)
        elif rho[i] <= rho[i - 1] and rho[i] < rho[i + 1]:
            minima.append(i)
    L_samples = []
    for i_max in maxima:
        later_mins = [j for j in minima if j > i_max]
        if not later_mins:
            continue
        j = later_mins[0]
        r_max, r_min = float(rho[i_max]), float(rho[j])
        if r_min <= 0 or r_max <= r_min * (1 + 1e-9):
            continue
        level = levels[i_max]
        du = float(maps.potential(level, r_max) - maps.potential(level, r_min))
        denom = 1.0 / r_min**2 - 1.0 / r_max**2
        l2 = 2.0 * m * du / denom
        if l2 > 0:
            L_samples.append(math.sqrt(l2))
    if not L_samples:
        # no turning structure: treat as circular at the mean radius
        v_circ2 = -float(maps.force(levels[0], float(np.mean(rho)))) \
            * float(np.mean(rho)) / m
        if v_circ2 <= 0:
            raise ValueError("no radial turning points found")
        L_samples = [m * math.sqrt(v_circ2) * float(np.mean(rho))]
    L_est = float(np.mean(L_samples))
    dt = record.dt_info
    theta = np.concatenate(([0.0], np.cumsum(L_est / (m * rho[:-1] ** 2) * dt)))
    return {"t": tt, "rho": rho, "theta": theta, "L": L_est,
            "n_turning_pairs": len(L_samples)}


@dataclass
class MeritReport:
    """Summary row for one simulated drop."""

    index: int
    triggered: bool
    termination: str
    trigger_time: float | None = None
    dwell_time: float | None = None
    merit: float | None = None
    merit_prime: float | None = None
    var_early: float | None = None
    var_late: float | None = None
    delta_e: float | None = None
    fractional_delta_e: float | None = None
    n_switches: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def summarize_record(record: TrajectoryRecord, index: int, depth_ref: float) -> MeritReport:
    rep = MeritReport(index=index, triggered=record.triggered,
                      termination=record.termination,
                      trigger_time=record.trigger_time,
                      dwell_time=record.dwell_time,
                      n_switches=max(len(record.events) - 1, 0))
    if not record.triggered:
        return rep
    try:
        rep.var_early = _window_variance(record, M_EARLY)
    except InsufficientDwellError:
        pass
    try:
        rep.var_late = _window_variance(record, M_LATE)
        rep.merit = figure_of_merit(record)
    except InsufficientDwellError:
        pass
    try:
        rep.merit_prime = figure_of_merit(record, late=M_PRIME_LATE)
        acct = energy_accounting(record, depth_ref)
        rep.delta_e = acct["delta_e"]
        rep.fractional_delta_e = acct["fractional"]
    except InsufficientDwellError:
        pass
    return rep


@dataclass(frozen=True)
class CampaignSpec:
    """Everything needed to reproduce a Monte Carlo data set."""

    n_drops: int
    master_seed: int
    sim: SimConfig
    controller: ControllerConfig
    noise: NoiseModel | None
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    label: str = "campaign"

    def __post_init__(self):
        if self.n_drops < 0:
            raise ValueError("n_drops must be non-negative")

    def rng_for(self, index: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.master_seed, spawn_key=(index,)))


_WORKER = {}


def _campaign_init(maps, spec):
    _WORKER["maps"] = maps
    _WORKER["spec"] = spec
    _WORKER["depth_ref"] = maps.depth(spec.controller.fb_high)


def _campaign_one(index: int) -> dict:
    maps, spec = _WORKER["maps"], _WORKER["spec"]
    rec = run_trajectory(maps, spec.sim, spec.controller, spec.noise,
                         spec.rng_for(index), estimator=spec.estimator)
    return summarize_record(rec, index, _WORKER["depth_ref"]).as_dict()


def run_campaign(maps, spec: CampaignSpec, jobs: int = 1) -> dict:
    """Simulate spec.n_drops independent drops; returns rows plus summary.

    Per-trajectory seeding is a pure function of (master_seed, index), and
    rows are assembled in index order, so results do not depend on the
    worker count.
    """
    indices = list(range(spec.n_drops))
    if jobs > 1 and spec.n_drops > 1:
        ctx = ProcessPoolExecutor(max_workers=jobs,
                                  initializer=_campaign_init,
                                  initargs=(maps, spec))
        with ctx as pool:
            rows = list(pool.map(_campaign_one, indices, chunksize=8))
    else:
        _campaign_init(maps, spec)
        rows = [_campaign_one(i) for i in indices]
    rows.sort(key=lambda r: r["index"])
    return {"label": spec.label, "rows": rows,
            "summary": summarize_campaign(rows, t_max=spec.sim.t_max)}


def exponential_lifetime(dwells_s, censored=None, burn_in: float = 200e-6) -> dict:
    """Maximum-likelihood exponential fit of dwell times beyond a burn-in.

    Right-censored dwells (ended by the simulation cap rather than
    escape) contribute exposure time but not events:
        lifetime = sum(dwell_i - burn_in) / n_events.
    """
    d = np.asarray(list(dwells_s), dtype=float)
    if censored is None:
        censored = np.zeros(d.size, dtype=bool)
    censored = np.asarray(list(censored), dtype=bool)
    keep = d > burn_in
    d, censored = d[keep], censored[keep]
    n_events = int((~censored).sum())
    if n_events == 0:
        return {"lifetime": math.nan, "stderr": math.nan,
                "n_events": 0, "n_censored": int(censored.sum()),
                "burn_in": burn_in}
    total = float((d - burn_in).sum())
    lam = total / n_events
    return {"lifetime": lam, "stderr": lam / math.sqrt(n_events),
            "n_events": n_events, "n_censored": int(censored.sum()),
            "burn_in": burn_in}


def summarize_campaign(rows, t_max: float | None = None) -> dict:
    n = len(rows)
    triggered = [r for r in rows if r["triggered"]]
    merits = [r["merit"] for r in triggered if r["merit"] is not None]
    merits_p = [r["merit_prime"] for r in triggered if r["merit_prime"] is not None]
    dwells = [r["dwell_time"] for r in triggered if r["dwell_time"] is not None]
    censored = [r["termination"] == "t_max" for r in triggered
                if r["dwell_time"] is not None]
    fracs = [r["fractional_delta_e"] for r in triggered
             if r.get("fractional_delta_e") is not None
             and not math.isnan(r["fractional_delta_e"])]
    hist, _ = np.histogram(merits, bins=M_HISTOGRAM_BINS) if merits else \
        (np.zeros(M_HISTOGRAM_BINS.size - 1, dtype=int), None)
    out = {
        "n_drops": n,
        "n_triggered": len(triggered),
        "n_merit": len(merits),
        "n_merit_prime": len(merits_p),
        "mean_merit": float(np.mean(merits)) if merits else None,
        "median_merit": float(np.median(merits)) if merits else None,
        "mean_merit_prime": float(np.mean(merits_p)) if merits_p else None,
        "mean_dwell": float(np.mean(dwells)) if dwells else None,
        "mean_fractional_delta_e": float(np.mean(fracs)) if fracs else None,
        "merit_histogram": {
            "bin_edges": M_HISTOGRAM_BINS.tolist(),
            "counts": hist.tolist(),
        },
        "lifetime_fit": exponential_lifetime(dwells, censored) if dwells else None,
    }
    return out


def welch_comparison(merits_a, merits_b) -> dict:
    """Welch two-sample test that mean(a) > mean(b); returns t, dof, z-ish."""
    from scipy import stats
    a = np.asarray(list(merits_a), dtype=float)
    b = np.asarray(list(merits_b), dtype=float)
    t, p = stats.ttest_ind(a, b, equal_var=False, alternative="greater")
    return {"t": float(t), "p_one_sided": float(p),
            "mean_a": float(a.mean()) if a.size else math.nan,
            "mean_b": float(b.mean()) if b.size else math.nan,
            "n_a": int(a.size), "n_b": int(b.size)}


def write_jsonl(rows, path):
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
