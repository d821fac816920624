"""Verdicts comparing ensemble statistics against the spectral predictions.

Each check produces a TheoremReport: a predicted value computed purely from
the eigenpair / moment machinery, an ensemble estimate with its standard
error, and a pass flag at |estimate - predicted| <= max(tol, 3 * s.e.).
Population means are taken over replicas that still have data at the
relevant time (replicas stop reporting once they hit the particle cap).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .mc import EnsembleStats
from .moments import MomentTable, xi_moment
from .regions import Region
from .spectral import SpectralData, mass_and_alpha

Z_GATE = 3.0


class NotSupercritical(RuntimeError):
    """The rate field has no positive principal eigenvalue; check is void."""


@dataclass
class TheoremReport:
    theorem: str
    statistic: str
    predicted: float
    estimate: float
    stderr: float
    tol: float
    passed: bool
    replicas: int
    horizon: float
    note: str = ""
    details: dict = dc_field(default_factory=dict)

    @staticmethod
    def gated(theorem, statistic, predicted, estimate, stderr, tol,
              replicas, horizon, note="", details=None) -> "TheoremReport":
        ok = abs(estimate - predicted) <= max(tol, Z_GATE * stderr)
        return TheoremReport(theorem, statistic, predicted, estimate, stderr,
                             tol, ok, replicas, horizon, note, details or {})

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("theorem", "statistic", "predicted", "estimate", "stderr",
              "tol", "passed", "replicas", "horizon", "note")}
        d["details"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                        for k, v in self.details.items()}
        return d

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return (f"[{mark}] {self.theorem:24s} {self.statistic}: "
                f"estimate={self.estimate:.6g} +/- {self.stderr:.2g}, "
                f"predicted={self.predicted:.6g}"
                + (f"  ({self.note})" if self.note else ""))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def reports_to_json(reports, path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2,
                  default=_json_default)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _full_obs_mask(stats: EnsembleStats) -> np.ndarray:
    """Observation times at which every replica still has data."""
    return ~np.isnan(stats.N).any(axis=0)

def _final_full_index(stats: EnsembleStats) -> int:
    full = np.nonzero(_full_obs_mask(stats))[0]
    if len(full) == 0:
        raise ValueError("no observation time with all replicas intact")
    return int(full[-1])


def _mean_sem(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    m = float(x.mean())
    s = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan
    return m, s


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def growth_rate_fit(stats: EnsembleStats, rate: float,
                    tail_fraction: float = 0.5) -> TheoremReport:
    """Least-squares slope of log mean(N_t) over the tail of the run.

    `rate` is the predicted exponent: lambda0 in the supercritical case,
    beta for the pure-birth regime, 0 when the field vanishes.
    """
    full = _full_obs_mask(stats)
    t = stats.obs_times[full]
    if len(t) < 2:
        raise ValueError("need at least two fully observed times")
    k0 = max(0, int(len(t) * (1.0 - tail_fraction)))
    t = t[k0:]
    means = np.empty(len(t))
    sig = np.empty(len(t))
    cols = np.nonzero(full)[0][k0:]
    for i, j in enumerate(cols):
        m, s = _mean_sem(stats.N[:, j])
        means[i] = m
        sig[i] = s / m if m > 0 else math.nan   # s.e. of log(mean)
    y = np.log(means)
    tc = t - t.mean()
    denom = float(np.sum(tc * tc))
    slope = float(np.sum(tc * y) / denom)
    slope_se = float(math.sqrt(np.sum((tc / denom) ** 2 * sig ** 2)))
    if not np.isfinite(slope_se) or slope_se == 0.0:
        slope_se = 1e-12
    return TheoremReport.gated(
        "exponential-growth", "slope of log E[N_t]", rate, slope, slope_se,
        tol=0.0, replicas=stats.replicas, horizon=float(t[-1]),
        details={"times": t, "log_means": y})


def limit_moment_check(stats: EnsembleStats, table: MomentTable,
                       n: int) -> TheoremReport:
    if stats.config.field.max_rate() == 0.0:
        j = _final_full_index(stats)
        m, s = _mean_sem(stats.N[:, j] ** n)
        return TheoremReport(
            "limit-moments", f"E[(N_T)^{n}] (no branching)", 1.0, m,
            s if np.isfinite(s) else 0.0, 0.0, passed=(m == 1.0),
            replicas=stats.replicas, horizon=float(stats.obs_times[j]),
            note="NotSupercritical")
    spectral = table.spectral
    j = _final_full_index(stats)
    T = float(stats.obs_times[j])
    scaled = stats.N[:, j] / math.exp(spectral.lambda0 * T)
    m, s = _mean_sem(scaled ** n)
    pred = xi_moment(table, n, stats.config.x0)
    return TheoremReport.gated(
        "limit-moments", f"E[(N_T/e^(l0 T))^{n}]", pred, m, s, tol=0.0,
        replicas=stats.replicas, horizon=T)


def domain_fraction_check(stats: EnsembleStats, spectral: SpectralData,
                          region: Region,
                          region_index: int | None = None) -> TheoremReport:
    """Occupation fraction of the region vs its psi weight alpha(U).

    The statistic is the pooled fraction sum_i n_i / sum_i N_i, i.e. the
    per-replica ratio weighted by population.  The equal-weight mean of
    n/N converges far more slowly: replicas that happen to stay small with
    a stray particle far out contribute 0/1 fractions for a long time.
    The standard error comes from the delta method on the two sums.
    """
    if region_index is None:
        names = [r.name for r in stats.config.regions]
        if region.name not in names:
            raise ValueError(f"region {region.name!r} was not recorded")
        region_index = names.index(region.name)
    j = _final_full_index(stats)
    T = float(stats.obs_times[j])
    n_u = stats.region_counts[region_index, :, j]
    n_all = stats.N[:, j]
    m1, m2 = n_u.mean(), n_all.mean()
    r = float(m1 / m2)
    cov = np.cov(n_u, n_all, ddof=1)
    var_r = r ** 2 * (cov[0, 0] / m1 ** 2 + cov[1, 1] / m2 ** 2
                      - 2 * cov[0, 1] / (m1 * m2)) / len(n_u)
    s = float(math.sqrt(max(var_r, 0.0)))
    alpha = mass_and_alpha(spectral, region)
    m_eq, s_eq = _mean_sem(n_u / n_all)
    return TheoremReport.gated(
        "occupation-fraction", f"pooled n_T({region.name or 'U'})/N_T",
        alpha, r, s, tol=0.0, replicas=stats.replicas, horizon=T,
        details={"equal_weight_mean": m_eq, "equal_weight_sem": s_eq})


def moving_window_check(stats: EnsembleStats, spectral: SpectralData,
                        region: Region, velocity,
                        window_index: int | None = None) -> TheoremReport:
    """Two estimators of the same limit must agree.

    n_t(U + t*velocity)/g(t) and N_t/e^{lambda0 t} both converge to the
    rescaled-population limit, so the ratio of their ensemble means tends
    to 1.  The last three observation times are reported as drift evidence.
    """
    from .moments import g_window
    if window_index is None:
        names = [r.name for r, _ in stats.config.windows]
        if region.name not in names:
            raise ValueError(f"window {region.name!r} was not recorded")
        window_index = names.index(region.name)
    full = np.nonzero(_full_obs_mask(stats))[0]
    lam = spectral.lambda0
    tail = full[-3:] if len(full) >= 3 else full
    ratios = []
    for j in tail:
        t = float(stats.obs_times[j])
        g = float(g_window(spectral, region, velocity, [t])[0])
        e1 = stats.window_counts[window_index, :, j] / g
        e2 = stats.N[:, j] / math.exp(lam * t)
        m1, m2 = e1.mean(), e2.mean()
        n = len(e1)
        cov = np.cov(e1, e2, ddof=1)
        var_r = (m1 / m2) ** 2 * (cov[0, 0] / m1 ** 2 + cov[1, 1] / m2 ** 2
                                  - 2 * cov[0, 1] / (m1 * m2)) / n
        ratios.append((t, float(m1 / m2), float(math.sqrt(max(var_r, 0.0)))))
    t, r, se = ratios[-1]
    return TheoremReport.gated(
        "moving-window", f"Exi ratio in {region.name or 'U'}", 1.0, r, se,
        tol=0.0, replicas=stats.replicas, horizon=t,
        details={"trail": ratios})


def front_speed_check(stats: EnsembleStats, spectral: SpectralData,
                      delta_frac: float = 0.15, confidence: float = 0.95,
                      min_time_frac: float = 0.6) -> TheoremReport:
    """Fraction of replicas whose maximal radius over t sits in the band
    [b(1-delta), b(1+delta)], b = sqrt(lambda0/2).

    Replicas that hit the particle cap are scored at their last recorded
    observation time, provided it is at least min_time_frac of the horizon;
    later-time data does not exist for them and the front position changes
    only slowly on the log scale.
    """
    if stats.config.field.max_rate() == 0.0 or spectral is None:
        raise NotSupercritical("no front without a positive eigenvalue")
    b = math.sqrt(spectral.lambda0 / 2.0)
    lo, hi = b * (1.0 - delta_frac), b * (1.0 + delta_frac)
    speeds = []
    t_min = min_time_frac * stats.config.t_end
    for i in range(stats.replicas):
        js = np.nonzero(~np.isnan(stats.rmax[i]))[0]
        if len(js) == 0:
            continue
        j = js[-1]
        t = float(stats.obs_times[j])
        if t < t_min:
            continue
        speeds.append(stats.rmax[i, j] / t)
    speeds = np.asarray(speeds)
    n = len(speeds)
    if n == 0:
        raise ValueError("no replica observed late enough to score")
    inside = np.count_nonzero((speeds >= lo) & (speeds <= hi))
    p = inside / n
    se = math.sqrt(max(p * (1 - p), 1e-12) / n)
    details = {"band": [lo, hi], "scored": n, "b": b,
               "median_speed": float(np.median(speeds))}
    if len(stats.config.windows):
        # covering direction: occupancy of the configured trailing windows
        j = _final_full_index(stats) if not stats.exploded.any() else None
        occ = []
        for k in range(len(stats.config.windows)):
            col = stats.window_counts[k]
            vals = []
            for i in range(stats.replicas):
                js = np.nonzero(~np.isnan(col[i]))[0]
                if len(js) and stats.obs_times[js[-1]] >= t_min:
                    vals.append(col[i, js[-1]] >= 1)
            occ.append(float(np.mean(vals)) if vals else math.nan)
        details["covering_occupancy"] = occ
    return TheoremReport(
        "front-speed", "fraction with R_t/t in band", confidence, p, se,
        tol=0.0, passed=(p >= confidence), replicas=n,
        horizon=float(stats.config.t_end), details=details)


def classify_survival(stats: EnsembleStats, recent_frac: float = 0.2,
                      quiet_frac: float = 0.5) -> np.ndarray:
    """Label each replica "growing", "finite", or "unclassified".

    Growing: hit the cap, or split within the final recent_frac of the
    horizon.  Finite: quiet for at least the last quiet_frac of the horizon
    with every particle outside the split-rate support.  The rest cannot be
    called either way at this horizon.
    """
    t_end = stats.config.t_end
    from .rate_field import support_radius
    a = support_radius(stats.config.field)
    labels = np.empty(stats.replicas, dtype=object)
    for i in range(stats.replicas):
        lb = stats.last_branch_time[i]
        if stats.exploded[i] or (np.isfinite(lb) and lb >= (1 - recent_frac) * t_end):
            labels[i] = "growing"
        elif ((not np.isfinite(lb)) or lb <= (1 - quiet_frac) * t_end) \
                and stats.final_min_radius[i] > a:
            labels[i] = "finite"
        else:
            labels[i] = "unclassified"
    return labels


def dichotomy_check(stats: EnsembleStats,
                    stats_double: EnsembleStats | None = None,
                    max_unclassified: float = 0.01) -> TheoremReport:
    """Finite / growing split, and its behaviour under horizon doubling.

    In d >= 3 the finite fraction must stabilize (the two horizons agree
    within 2 combined standard errors and the value is positive); in d <= 2
    it must shrink, since every excursion eventually revisits the split
    region.
    """
    def fractions(s):
        lab = classify_survival(s)
        n = len(lab)
        f = np.count_nonzero(lab == "finite") / n
        g = np.count_nonzero(lab == "growing") / n
        u = np.count_nonzero(lab == "unclassified") / n
        se = math.sqrt(max(f * (1 - f), 1e-12) / n)
        return f, g, u, se

    f1, g1, u1, se1 = fractions(stats)
    d = stats.config.field.dim
    details = {"finite": f1, "growing": g1, "unclassified": u1,
               "horizon": float(stats.config.t_end)}
    if stats.config.field.max_rate() == 0.0:
        return TheoremReport(
            "dichotomy", "finite fraction (no branching)", 1.0, f1, se1,
            0.0, passed=(f1 == 1.0), replicas=stats.replicas,
            horizon=float(stats.config.t_end), details=details)
    if stats_double is None:
        passed = u1 <= max_unclassified
        return TheoremReport(
            "dichotomy", "unclassified fraction", 0.0, u1,
            math.sqrt(max(u1 * (1 - u1), 1e-12) / stats.replicas),
            max_unclassified, passed, stats.replicas,
            float(stats.config.t_end), details=details)
    f2, g2, u2, se2 = fractions(stats_double)
    details.update({"finite_2T": f2, "growing_2T": g2, "unclassified_2T": u2,
                    "horizon_2T": float(stats_double.config.t_end)})
    se = math.sqrt(se1 ** 2 + se2 ** 2)
    if d >= 3:
        stable = abs(f2 - f1) <= 2.0 * se
        positive = f2 > 3.0 * se2
        passed = stable and positive and u1 <= max_unclassified
        note = "stabilization" + ("" if positive else "; fraction not positive")
    else:
        passed = (f2 <= f1 + 2.0 * se) and (f2 < f1 or f1 == 0.0) \
            and u1 <= max_unclassified
        note = "shrinking finite fraction"
    return TheoremReport(
        "dichotomy", "finite fraction at 2T vs T", f1, f2, se, 0.0,
        passed, stats.replicas, float(stats_double.config.t_end),
        note=note, details=details)
