"""Exact Monte Carlo of branching Brownian motion with a spatial split rate.

Particles perform independent standard Brownian motion and duplicate at rate
v(x).  Splits are simulated exactly by thinning: candidate events arrive at
the uniform rate vmax per particle and each candidate is accepted with
probability v(x)/vmax evaluated at the candidate position.  Between events
the Gaussian increment is sampled directly, so there is no time-step bias.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .rate_field import RateField
from .regions import Region


@dataclass(frozen=True)
class ParticleSnapshot:
    """Positions of every particle alive at one instant (one replica)."""

    time: float
    positions: np.ndarray  # (n, dim)

    @property
    def count(self) -> int:
        return len(self.positions)

    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)


def count_in(snapshot: ParticleSnapshot, region: Region) -> int:
    if snapshot.count == 0:
        return 0
    return int(np.count_nonzero(region.contains(snapshot.positions)))


@dataclass(frozen=True)
class MCConfig:
    """One ensemble: rate field, start point, horizon, bookkeeping targets."""

    field: RateField
    x0: np.ndarray
    t_end: float
    obs_times: np.ndarray
    replicas: int
    seed: int = 0
    cap: int = 1_000_000
    regions: tuple = ()             # (Region, ...) counted at every obs time
    windows: tuple = ()             # ((Region, velocity), ...) translated by t*v
    keep_final_positions: bool = False
    # Front tracking past the cap: splits occur only inside the compact
    # support, and fresh particles cannot catch the frontier over the
    # remaining horizon, so once the cap is hit the outermost front_keep
    # particles are carried on as plain Brownian motions and only the
    # maximal radius keeps being recorded (counts stay NaN).
    front_mode: bool = False
    front_keep: int = 50_000

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if len(x0) != self.field.dim:
            from .rate_field import DimensionMismatch
            raise DimensionMismatch(
                f"x0 has dim {len(x0)}, field has dim {self.field.dim}")
        obs = np.sort(np.atleast_1d(np.asarray(self.obs_times, dtype=float)))
        if obs[0] < 0 or obs[-1] > self.t_end + 1e-12:
            raise ValueError("observation times must lie in [0, t_end]")
        if self.replicas < 1:
            raise ValueError("need at least one replica")
        if self.cap < 1:
            raise ValueError("cap must be positive")
        wins = tuple((reg, np.atleast_1d(np.asarray(vel, dtype=float)))
                     for reg, vel in self.windows)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "obs_times", obs)
        object.__setattr__(self, "windows", wins)

    @classmethod
    def from_config(cls, cfg: dict) -> "MCConfig":
        fld = RateField.from_config(cfg["field"])
        obs = cfg.get("obs_times")
        if obs is None:
            dt = cfg["obs_spacing"]
            obs = np.arange(dt, cfg["t_end"] + 1e-9, dt)
        regions = tuple(Region.from_config(r) for r in cfg.get("regions", []))
        windows = tuple((Region.from_config(w["region"]), w["velocity"])
                        for w in cfg.get("windows", []))
        return cls(field=fld, x0=cfg.get("x0", np.zeros(fld.dim)),
                   t_end=cfg["t_end"], obs_times=obs,
                   replicas=cfg.get("replicas", 100),
                   seed=cfg.get("seed", 0), cap=cfg.get("cap", 1_000_000),
                   regions=regions, windows=windows)


@dataclass
class ReplicaRecord:
    """Per-observation trajectories of one replica; NaN after explosion."""

    index: int
    N: np.ndarray                   # particle count at each obs time
    rmax: np.ndarray                # largest particle radius
    psi_sum: np.ndarray             # sum of psi over particles (if psi given)
    region_counts: np.ndarray       # (n_regions, n_obs)
    window_counts: np.ndarray       # (n_windows, n_obs)
    exploded: bool
    explode_time: float             # NaN when the cap was never hit
    last_branch_time: float         # NaN when no split happened
    final_min_radius: float
    final_count: int
    final: ParticleSnapshot | None = None


def _advance(rng, pos: np.ndarray, dt) -> np.ndarray:
    dt = np.asarray(dt, dtype=float)
    step = rng.standard_normal(pos.shape)
    return pos + step * np.sqrt(dt)[:, None]


def simulate_replica(config: MCConfig, replica: int,
                     psi_eval=None) -> ReplicaRecord:
    """Run one replica with its own counter-based stream.

    psi_eval, when given, maps an (n, dim) position array to psi values and
    feeds the discounted-sum observable used for the martingale check.
    """
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([config.seed, replica])))
    fld = config.field
    vmax = fld.max_rate()
    obs = config.obs_times
    n_obs = len(obs)
    nR, nW = len(config.regions), len(config.windows)

    rec = ReplicaRecord(
        index=replica,
        N=np.full(n_obs, np.nan), rmax=np.full(n_obs, np.nan),
        psi_sum=np.full(n_obs, np.nan),
        region_counts=np.full((nR, n_obs), np.nan),
        window_counts=np.full((nW, n_obs), np.nan),
        exploded=False, explode_time=np.nan, last_branch_time=np.nan,
        final_min_radius=np.nan, final_count=0)

    pos = config.x0[None, :].copy()
    t_prev = 0.0
    frozen = False
    for j, t_obs in enumerate(obs):
        if frozen:
            pos = _advance(rng, pos, np.full(len(pos), t_obs - t_prev))
            rec.rmax[j] = float(np.linalg.norm(pos, axis=1).max())
            t_prev = t_obs
            continue
        # carry every particle from t_prev to t_obs, splitting on the way
        tcur = np.full(len(pos), t_prev)
        while True:
            live = tcur < t_obs - 1e-15
            if not np.any(live):
                break
            idx = np.nonzero(live)[0]
            if vmax == 0.0:
                pos[idx] = _advance(rng, pos[idx], t_obs - tcur[idx])
                tcur[idx] = t_obs
                continue
            gap = rng.exponential(1.0 / vmax, size=len(idx))
            t_next = tcur[idx] + gap
            done = t_next >= t_obs
            d_idx = idx[done]
            pos[d_idx] = _advance(rng, pos[d_idx], t_obs - tcur[d_idx])
            tcur[d_idx] = t_obs
            c_idx = idx[~done]
            if len(c_idx):
                pos[c_idx] = _advance(rng, pos[c_idx], gap[~done])
                tcur[c_idx] = t_next[~done]
                accept = rng.random(len(c_idx)) * vmax < fld.eval_many(pos[c_idx])
                if np.any(accept):
                    born = c_idx[accept]
                    rec.last_branch_time = float(np.max(tcur[born]))
                    pos = np.concatenate([pos, pos[born]])
                    tcur = np.concatenate([tcur, tcur[born]])
                    if len(pos) > config.cap:
                        rec.exploded = True
                        rec.explode_time = rec.last_branch_time
            if rec.exploded:
                break
        if rec.exploded:
            if not config.front_mode:
                break
            # finish the interval without further splits, keep the outermost
            live = tcur < t_obs - 1e-15
            pos[live] = _advance(rng, pos[live], t_obs - tcur[live])
            radii = np.linalg.norm(pos, axis=1)
            if len(pos) > config.front_keep:
                keep = np.argpartition(radii, -config.front_keep)[-config.front_keep:]
                pos = pos[keep]
                radii = radii[keep]
            rec.rmax[j] = float(radii.max())
            frozen = True
            t_prev = t_obs
            continue
        radii = np.linalg.norm(pos, axis=1)
        rec.N[j] = len(pos)
        rec.rmax[j] = float(radii.max())
        if psi_eval is not None:
            rec.psi_sum[j] = float(np.sum(psi_eval(pos)))
        for k, reg in enumerate(config.regions):
            rec.region_counts[k, j] = np.count_nonzero(reg.contains(pos))
        for k, (reg, vel) in enumerate(config.windows):
            moved = reg.translate(t_obs * vel)
            rec.window_counts[k, j] = np.count_nonzero(moved.contains(pos))
        t_prev = t_obs

    radii = np.linalg.norm(pos, axis=1)
    rec.final_min_radius = float(radii.min())
    rec.final_count = len(pos)
    if config.keep_final_positions and not rec.exploded:
        rec.final = ParticleSnapshot(time=t_prev, positions=pos.copy())
    return rec


@dataclass
class EnsembleStats:
    """Stacked per-replica trajectories for a whole ensemble."""

    config: MCConfig
    obs_times: np.ndarray
    N: np.ndarray                   # (replicas, n_obs), NaN past explosion
    rmax: np.ndarray
    psi_sum: np.ndarray
    region_counts: np.ndarray       # (n_regions, replicas, n_obs)
    window_counts: np.ndarray
    exploded: np.ndarray            # bool (replicas,)
    explode_time: np.ndarray
    last_branch_time: np.ndarray
    final_min_radius: np.ndarray
    final_count: np.ndarray

    @property
    def replicas(self) -> int:
        return len(self.N)

    def valid(self) -> np.ndarray:
        """Mask of (replica, obs) entries that were actually observed."""
        return ~np.isnan(self.N)

    def mean_sem(self, values: np.ndarray, j: int) -> tuple[float, float]:
        """Mean and standard error over replicas valid at obs index j."""
        col = values[:, j]
        col = col[~np.isnan(col)]
        if len(col) == 0:
            return math.nan, math.nan
        sem = col.std(ddof=1) / math.sqrt(len(col)) if len(col) > 1 else math.nan
        return float(col.mean()), float(sem)

    def to_csv(self, path) -> None:
        names_r = [reg.name or f"region{k}"
                   for k, reg in enumerate(self.config.regions)]
        names_w = [(reg.name or f"window{k}")
                   for k, (reg, _) in enumerate(self.config.windows)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replica", "time", "N", "rmax", "psi_sum"]
                       + [f"in_{s}" for s in names_r]
                       + [f"win_{s}" for s in names_w])
            for i in range(self.replicas):
                for j, t in enumerate(self.obs_times):
                    if np.isnan(self.N[i, j]):
                        continue
                    row = [i, f"{t:.17g}", f"{self.N[i, j]:.17g}",
                           f"{self.rmax[i, j]:.17g}",
                           f"{self.psi_sum[i, j]:.17g}"]
                    row += [f"{self.region_counts[k, i, j]:.17g}"
                            for k in range(len(names_r))]
                    row += [f"{self.window_counts[k, i, j]:.17g}"
                            for k in range(len(names_w))]
                    w.writerow(row)

    def manifest(self) -> dict:
        return {
            "replicas": int(self.replicas),
            "seed": int(self.config.seed),
            "t_end": float(self.config.t_end),
            "cap": int(self.config.cap),
            "exploded": int(np.count_nonzero(self.exploded)),
            "obs_times": [float(t) for t in self.obs_times],
        }

    def save_manifest(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, indent=2)


def run_ensemble(config: MCConfig, psi_eval=None, threads: int = 1,
                 progress=None) -> EnsembleStats:
    """Simulate all replicas and stack their trajectories.

    Streams are keyed by (seed, replica index), so the result is identical
    whatever the thread count or replica order.
    """
    records = [None] * config.replicas
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = {ex.submit(simulate_replica, config, i, psi_eval): i
                    for i in range(config.replicas)}
            for fut, i in futs.items():
                records[i] = fut.result()
    else:
        for i in range(config.replicas):
            records[i] = simulate_replica(config, i, psi_eval)
            if progress is not None:
                progress(i + 1, config.replicas)

    n_obs = len(config.obs_times)
    nR, nW = len(config.regions), len(config.windows)
    stats = EnsembleStats(
        config=config, obs_times=config.obs_times,
        N=np.stack([r.N for r in records]),
        rmax=np.stack([r.rmax for r in records]),
        psi_sum=np.stack([r.psi_sum for r in records]),
        region_counts=np.stack([r.region_counts for r in records], axis=1)
        if nR else np.zeros((0, config.replicas, n_obs)),
        window_counts=np.stack([r.window_counts for r in records], axis=1)
        if nW else np.zeros((0, config.replicas, n_obs)),
        exploded=np.array([r.exploded for r in records]),
        explode_time=np.array([r.explode_time for r in records]),
        last_branch_time=np.array([r.last_branch_time for r in records]),
        final_min_radius=np.array([r.final_min_radius for r in records]),
        final_count=np.array([r.final_count for r in records]))
    return stats


def with_horizon(config: MCConfig, t_end: float) -> MCConfig:
    """Same ensemble stretched (or cut) to a new horizon, same streams."""
    obs = config.obs_times[config.obs_times <= t_end + 1e-12]
    if len(obs) == 0 or obs[-1] < t_end - 1e-12:
        spacing = (config.obs_times[1] - config.obs_times[0]
                   if len(config.obs_times) > 1 else t_end)
        obs = np.arange(spacing, t_end + 1e-9, spacing)
        if len(obs) == 0 or obs[-1] < t_end - 1e-12:
            obs = np.append(obs, t_end)
    return replace(config, t_end=t_end, obs_times=obs)
