"""Discrete-event simulation of the threshold queue.

The event loop is compiled with numba and fed by pre-drawn random streams
(one Philox generator each for inter-arrival times, batch sizes, B1 and
B2 service times).  Time is split into buckets that mirror
:mod:`largedam.stationary`: empty, B1 service by start level ``1..L``,
and B2 service.  Occupancy time ``Pr{L_t = i}`` is tallied alongside.
Standard errors of the time fractions come from batch means; per-busy-
period quantities are i.i.d. across busy periods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import DamModel

_CHUNK = 1 << 16


@numba.njit(cache=True)
def _run(
    budget, L, measure, sf, si,
    inter, sizes, s1, s2, pos,
    bucket_time, occ_time, busy_out,
):
    """Advance the simulation by at most ``budget`` events.

    ``sf`` = (t, next_arr, next_dep, idle_start, idle_len, T1, T2) and
    ``si`` = (n, bucket, n1, n2, busy_measured, busy_count) are updated in
    place; ``pos`` holds the read positions of the four streams.  Returns
    the number of events processed; fewer than ``budget`` means a stream
    ran dry and must be refilled.
    """
    done = 0
    while done < budget:
        if pos[0] >= inter.shape[0] or pos[1] >= sizes.shape[0]:
            break
        if pos[2] >= s1.shape[0] or pos[3] >= s2.shape[0]:
            break
        t = sf[0]
        n = si[0]
        if sf[1] <= sf[2]:
            te = sf[1]
            dt = te - t
            if measure:
                bucket_time[si[1]] += dt
                occ_time[min(n, L + 1)] += dt
            sf[0] = te
            b = sizes[pos[1]]
            pos[1] += 1
            sf[1] = te + inter[pos[0]]
            pos[0] += 1
            if n == 0:
                sf[4] = te - sf[3]
                si[4] = measure
                si[0] = b
                si[1] = min(b, L)
                d = s1[pos[2]]
                pos[2] += 1
                sf[5] = d
                sf[6] = 0.0
                si[2] = 1
                si[3] = 0
                sf[2] = te + d
            else:
                si[0] = n + b
        else:
            te = sf[2]
            dt = te - t
            if measure:
                bucket_time[si[1]] += dt
                occ_time[min(n, L + 1)] += dt
            sf[0] = te
            n -= 1
            si[0] = n
            if n == 0:
                si[1] = 0
                sf[2] = np.inf
                if si[4]:
                    k = si[5]
                    busy_out[k, 0] = sf[4]
                    busy_out[k, 1] = sf[5]
                    busy_out[k, 2] = sf[6]
                    busy_out[k, 3] = si[2]
                    busy_out[k, 4] = si[3]
                    si[5] = k + 1
                sf[3] = te
            elif n <= L:
                si[1] = n
                d = s1[pos[2]]
                pos[2] += 1
                sf[5] += d
                si[2] += 1
                sf[2] = te + d
            else:
                si[1] = L + 1
                d = s2[pos[3]]
                pos[3] += 1
                sf[6] += d
                si[3] += 1
                sf[2] = te + d
        done += 1
    return done


@dataclass(frozen=True)
class SimConfig:
    model: DamModel
    events: int = 1_000_000
    seed: int = 0
    warmup: float = 0.1
    batches: int = 32

    def __post_init__(self):
        if self.events <= 0:
            raise ValueError("event budget must be positive")
        if not 0.0 <= self.warmup <= 0.5:
            raise ValueError("warmup must lie in [0, 0.5]")
        if self.batches < 20:
            raise ValueError("batch means need at least 20 batches")


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def __iter__(self):
        yield self.value
        yield self.se


@dataclass(frozen=True)
class BusyStats:
    count: int
    busy: Estimate
    nu1: Estimate
    nu2: Estimate
    t1: Estimate
    t2: Estimate
    idle: Estimate
    renewal_p1: Estimate

    def cycle_balance_residual(self, m: DamModel) -> float:
        """Sample value of ``lam Es (E T + 1/lam) - E nu`` with its standard error."""
        return m.lam * m.e_sigma * (self.busy.value + 1.0 / m.lam) - (self.nu1.value + self.nu2.value)


@dataclass(frozen=True)
class SimEstimate:
    p1: Estimate
    p2: Estimate
    q: np.ndarray
    q_se: np.ndarray
    occupancy: np.ndarray
    occupancy_se: np.ndarray
    busy_stats: BusyStats
    events: int
    sim_time: float
    seed: int
    batch_fractions: np.ndarray = field(repr=False)

    @property
    def p1_hat(self) -> float:
        return self.p1.value

    @property
    def p2_hat(self) -> float:
        return self.p2.value

    @property
    def q_hat(self) -> np.ndarray:
        return self.q

    @property
    def total(self) -> float:
        return math.fsum([self.p1.value, self.p2.value, *self.q])

    def to_record(self) -> dict:
        b = self.busy_stats
        return {
            "events": self.events,
            "seed": self.seed,
            "sim_time": self.sim_time,
            "p1": self.p1.value, "p1_se": self.p1.se,
            "p2": self.p2.value, "p2_se": self.p2.se,
            "q": [float(x) for x in self.q], "q_se": [float(x) for x in self.q_se],
            "occupancy": [float(x) for x in self.occupancy],
            "occupancy_se": [float(x) for x in self.occupancy_se],
            "busy_periods": b.count,
            "busy_mean": b.busy.value, "busy_mean_se": b.busy.se,
            "nu1": b.nu1.value, "nu1_se": b.nu1.se,
            "nu2": b.nu2.value, "nu2_se": b.nu2.se,
            "t1": b.t1.value, "t1_se": b.t1.se,
            "t2": b.t2.value, "t2_se": b.t2.se,
            "idle": b.idle.value, "idle_se": b.idle.se,
            "renewal_p1": b.renewal_p1.value, "renewal_p1_se": b.renewal_p1.se,
        }

    @classmethod
    def from_record(cls, d: dict) -> "SimEstimate":
        """Inverse of :meth:`to_record`; per-batch fractions are not serialized."""
        def e(k: str) -> Estimate:
            return Estimate(float(d[k]), float(d[k + "_se"]))

        busy = BusyStats(int(d["busy_periods"]), e("busy_mean"), e("nu1"), e("nu2"),
                         e("t1"), e("t2"), e("idle"), e("renewal_p1"))
        def arr(k: str) -> np.ndarray:
            return np.asarray(d[k], dtype=float)

        return cls(e("p1"), e("p2"), arr("q"), arr("q_se"), arr("occupancy"), arr("occupancy_se"),
                   busy, int(d["events"]), float(d["sim_time"]), int(d["seed"]), np.zeros((0, 0)))


class _Streams:
    def __init__(self, m: DamModel, seed: int):
        ss = np.random.SeedSequence(seed)
        self.gens = [np.random.Generator(np.random.Philox(s)) for s in ss.spawn(4)]
        self.m = m
        self.data = [np.empty(0), np.empty(0, dtype=np.int64), np.empty(0), np.empty(0)]
        self.pos = np.zeros(4, dtype=np.int64)

    def refill(self):
        m, g = self.m, self.gens
        fresh = [
            g[0].exponential(1.0 / m.lam, _CHUNK),
            m.batches.sample(g[1], _CHUNK).astype(np.int64),
            np.asarray(m.b1.sample(g[2], _CHUNK), dtype=float),
            np.asarray(m.b2.sample(g[3], _CHUNK), dtype=float),
        ]
        for i in range(4):
            self.data[i] = np.concatenate((self.data[i][self.pos[i]:], fresh[i]))
            self.pos[i] = 0


def _mean_se(x: np.ndarray) -> Estimate:
    if len(x) == 0:
        return Estimate(math.nan, math.nan)
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan
    return Estimate(float(np.mean(x)), se)


def _ratio_se(num: np.ndarray, den: np.ndarray) -> Estimate:
    """Ratio of means with a delta-method standard error."""
    n = len(num)
    if n < 2:
        return Estimate(math.nan, math.nan)
    r = num.mean() / den.mean()
    resid = num - r * den
    return Estimate(float(r), float(np.std(resid, ddof=1) / math.sqrt(n) / den.mean()))


def simulate(cfg: SimConfig) -> SimEstimate:
    m = cfg.model
    L = m.level
    st = _Streams(m, cfg.seed)
    sf = np.array([0.0, 0.0, np.inf, 0.0, 0.0, 0.0, 0.0])
    si = np.zeros(6, dtype=np.int64)
    st.refill()
    sf[1] = st.data[0][0]
    st.pos[0] = 1

    warm = int(cfg.warmup * cfg.events)
    per_batch = (cfg.events - warm) // cfg.batches
    if per_batch < 1:
        raise ValueError("event budget too small for the requested batches")

    scratch_b = np.zeros(L + 2)
    scratch_o = np.zeros(L + 2)
    busy_buf = np.zeros((per_batch + 2, 5))
    records = []

    def advance(k, measure, bucket, occ):
        left = k
        while left > 0:
            si[5] = 0
            done = _run(left, L, measure, sf, si, st.data[0], st.data[1], st.data[2],
                        st.data[3], st.pos, bucket, occ, busy_buf)
            if si[5]:
                records.append(busy_buf[: si[5]].copy())
            left -= done
            if left > 0:
                st.refill()

    advance(warm, 0, scratch_b, scratch_o)
    buckets = np.zeros((cfg.batches, L + 2))
    occs = np.zeros((cfg.batches, L + 2))
    for b in range(cfg.batches):
        advance(per_batch, 1, buckets[b], occs[b])

    dur = buckets.sum(axis=1)
    total_time = dur.sum()
    frac = buckets / dur[:, None]
    ofrac = occs / dur[:, None]
    est = buckets.sum(axis=0) / total_time
    oest = occs.sum(axis=0) / total_time
    se = frac.std(axis=0, ddof=1) / math.sqrt(cfg.batches)
    ose = ofrac.std(axis=0, ddof=1) / math.sqrt(cfg.batches)

    rec = np.concatenate(records) if records else np.zeros((0, 5))
    idle, t1, t2, n1, n2 = (rec[:, i] for i in range(5))
    busy = BusyStats(
        count=len(rec),
        busy=_mean_se(t1 + t2),
        nu1=_mean_se(n1),
        nu2=_mean_se(n2),
        t1=_mean_se(t1),
        t2=_mean_se(t2),
        idle=_mean_se(idle),
        renewal_p1=_ratio_se(idle, idle + t1 + t2),
    )
    return SimEstimate(
        p1=Estimate(float(est[0]), float(se[0])),
        p2=Estimate(float(est[L + 1]), float(se[L + 1])),
        q=est[1 : L + 1].copy(),
        q_se=se[1 : L + 1].copy(),
        occupancy=oest,
        occupancy_se=ose,
        busy_stats=busy,
        events=warm + per_batch * cfg.batches,
        sim_time=float(sf[0]),
        seed=cfg.seed,
        batch_fractions=frac,
    )


def busy_period_stats(cfg: SimConfig) -> BusyStats:
    return simulate(cfg).busy_stats
