"""Baseline signers and the seeded multi-trial comparison harness."""
from __future__ import annotations

import configparser
import csv
import heapq
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .core import CombinationForest, DEFAULT_ORACLE_CAP, DiscrepancyReport, Signing, VectorSet, brute_force_min, discrepancy
from .dist import BoundedDensity, parse_density, sample_instance
from .errors import DomainError, ValidationError, VecbalError
from .gkk import GkkConfig, gkk_run
from .reduce import reduce
from .rng import RngStream, as_generator, generator_from_key
from .theory import epsilon_threshold

SIGNERS = ("gkk", "random", "oracle", "reduce_only", "kk1d")
# stream slot 0 is the instance itself
SIGNER_IDS = {name: i + 1 for i, name in enumerate(SIGNERS)}
_VERIFY_STREAM = 1 << 30
CSV_FIELDS = ["n", "m", "signer", "trial", "sup_norm", "wall_ms", "seed_hi", "seed_lo", "error"]


def random_signing(X: VectorSet, rng) -> DiscrepancyReport:
    gen = as_generator(rng)
    s = gen.integers(0, 2, size=X.count, dtype=np.int8) * 2 - 1
    return discrepancy(X, Signing(s))


def kk1d(values) -> DiscrepancyReport:
    """Largest differencing: replace the two largest magnitudes by their difference."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 2:
        if x.shape[0] != 1:
            raise DomainError("kk1d needs one-dimensional vectors")
        x = x[0]
    if x.ndim != 1 or x.size == 0:
        raise DomainError("kk1d needs a non-empty list of reals")
    n = x.size
    forest = CombinationForest(n, capacity=2 * n + 16)
    neg = np.flatnonzero(x < 0)
    nodes = np.arange(n, dtype=np.int64)
    if neg.size:
        nodes[neg] = forest.combine(neg, -1, -np.ones(neg.size, dtype=np.int64), 1)
    # (negated magnitude, insertion counter, node) keeps ties deterministic
    heap = [(-abs(float(v)), i, int(nodes[i])) for i, v in enumerate(x)]
    heapq.heapify(heap)
    counter = n
    while len(heap) > 1:
        a, _, na = heapq.heappop(heap)
        b, _, nb = heapq.heappop(heap)
        node = int(forest.combine([na], 1, [nb], -1)[0])
        heapq.heappush(heap, (a - b, counter, node))
        counter += 1
    root = heap[0][2]
    signs = forest.leaf_signs(root)
    X = VectorSet(x[None, :])
    return discrepancy(X, Signing(np.where(signs == 0, 1, signs)))


def _parse_grid(text: str) -> list[tuple[int, int]]:
    cells = []
    for tok in text.replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            n, m = tok.lower().split("x")
            cells.append((int(n), int(m)))
        except ValueError:
            raise ValidationError(f"grid cell {tok!r} is not of the form <n>x<m>") from None
    return cells


def _parse_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


@dataclass
class RunConfig:
    """Benchmark description.

    File format (``key = value`` lines, ``#`` comments)::

        density = gaussian          # any density spec
        grid = 20x1, 20x2           # cells n x m
        signers = oracle, random    # subset of gkk, random, oracle, reduce_only, kk1d
        trials = 300
        seed = 7
        gammas = 0.5, 1, 2          # threshold overlays
        timing = false              # fill wall_ms (breaks byte-identical reruns)
        verify_fraction = 0.01
    """

    density: str = "gaussian"
    grid: list = field(default_factory=lambda: [(20, 2)])
    signers: list = field(default_factory=lambda: ["random"])
    trials: int = 10
    seed: int = 0
    gammas: list = field(default_factory=lambda: [1.0])
    timing: bool = False
    verify_fraction: float = 0.01
    gkk_gamma: float | None = None
    oracle_cap: int = DEFAULT_ORACLE_CAP

    def __post_init__(self):
        unknown = [s for s in self.signers if s not in SIGNERS]
        if unknown:
            raise ValidationError(f"unknown signer(s) {unknown}; choose from {list(SIGNERS)}")
        if self.trials < 0:
            raise ValidationError("trials must be non-negative")
        for n, m in self.grid:
            if n < 1 or m < 1:
                raise ValidationError(f"bad cell {n}x{m}")
        if not 0 <= self.verify_fraction <= 1:
            raise ValidationError("verify_fraction must lie in [0, 1]")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            text = fh.read()
        if not text.lstrip().startswith("["):
            text = "[run]\n" + text
        cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
        cp.read_string(text)
        sec = cp[cp.sections()[0]]
        kw = {}
        if "density" in sec:
            kw["density"] = sec["density"]
        if "grid" in sec:
            kw["grid"] = _parse_grid(sec["grid"])
        if "signers" in sec:
            kw["signers"] = _parse_list(sec["signers"])
        if "trials" in sec:
            kw["trials"] = sec.getint("trials")
        if "seed" in sec:
            kw["seed"] = sec.getint("seed")
        if "gammas" in sec:
            kw["gammas"] = [float(g) for g in _parse_list(sec["gammas"])]
        if "timing" in sec:
            kw["timing"] = sec.getboolean("timing")
        if "verify_fraction" in sec:
            kw["verify_fraction"] = sec.getfloat("verify_fraction")
        if "gkk_gamma" in sec:
            kw["gkk_gamma"] = sec.getfloat("gkk_gamma")
        known = {"density", "grid", "signers", "trials", "seed", "gammas", "timing", "verify_fraction", "gkk_gamma"}
        extra = set(sec) - known
        if extra:
            raise ValidationError(f"unknown config keys {sorted(extra)}")
        return cls(**kw)

    def scheduled(self, n: int, m: int) -> list[str]:
        out = []
        for s in self.signers:
            if s == "oracle" and n > self.oracle_cap:
                continue
            if s == "kk1d" and m != 1:
                continue
            out.append(s)
        return out


@dataclass
class TrialRecord:
    n: int
    m: int
    signer: str
    trial: int
    sup_norm: float
    wall_ms: float | None
    seed_hi: int
    seed_lo: int
    error: str = ""
    cell: int = 0
    signing: Signing | None = None
    phases: list = field(default_factory=list)

    def row(self) -> list:
        wall = "" if self.wall_ms is None else "%.3f" % self.wall_ms
        return [self.n, self.m, self.signer, self.trial, repr(float(self.sup_norm)), wall, self.seed_hi, self.seed_lo, self.error]


def instance_stream(seed: int, cell: int, trial: int) -> RngStream:
    return RngStream(seed, (cell, trial, 0))


def regenerate_instance(rho: BoundedDensity, m: int, n: int, seed_hi: int, seed_lo: int) -> VectorSet:
    return sample_instance(rho, m, n, generator_from_key(seed_hi, seed_lo))


def run_signer(name: str, X: VectorSet, rho: BoundedDensity, stream: RngStream, cfg: RunConfig):
    """Returns (report, phase diagnostics)."""
    if name == "gkk":
        res = gkk_run(X, rho, GkkConfig(gamma=cfg.gkk_gamma), stream)
        return res.report, [d.to_dict() for d in res.phases]
    if name == "random":
        return random_signing(X, stream), []
    if name == "oracle":
        return brute_force_min(X, cap=cfg.oracle_cap), []
    if name == "reduce_only":
        return discrepancy(X, reduce(X)), []
    if name == "kk1d":
        return kk1d(X.data), []
    raise ValidationError(f"unknown signer {name!r}")


def run_trials(cfg: RunConfig) -> list[TrialRecord]:
    records = []
    for cell, (n, m) in enumerate(cfg.grid):
        rho = parse_density(cfg.density, n)
        names = cfg.scheduled(n, m)
        if not names:
            continue
        for trial in range(cfg.trials):
            ist = instance_stream(cfg.seed, cell, trial)
            hi, lo = ist.key
            X = sample_instance(rho, m, n, generator_from_key(hi, lo))
            for name in names:
                stream = RngStream(cfg.seed, (cell, trial, SIGNER_IDS[name]))
                t0 = time.perf_counter()
                try:
                    rep, phases = run_signer(name, X, rho, stream, cfg)
                    sup, err, sig = rep.sup_norm, "", rep.signing
                except VecbalError as exc:
                    sup, err, sig, phases = math.nan, f"{type(exc).__name__}: {exc}", None, []
                wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
                records.append(TrialRecord(n, m, name, trial, sup, wall, hi, lo, err, cell, sig, phases))
    records.sort(key=lambda r: (r.cell, SIGNER_IDS[r.signer], r.trial))
    return records


def reverify(records: list[TrialRecord], cfg: RunConfig) -> dict:
    """Regenerate the instance of a random subset of records and recompute sup_norm."""
    done = [r for r in records if r.signing is not None]
    if not done or cfg.verify_fraction == 0:
        return {"checked": 0, "mismatches": 0}
    k = max(1, math.ceil(cfg.verify_fraction * len(done)))
    gen = RngStream(cfg.seed, (_VERIFY_STREAM,)).generator()
    pick = np.sort(gen.choice(len(done), size=min(k, len(done)), replace=False))
    bad = []
    dens = {}
    for i in pick:
        r = done[int(i)]
        rho = dens.setdefault(r.n, parse_density(cfg.density, r.n))
        X = regenerate_instance(rho, r.m, r.n, r.seed_hi, r.seed_lo)
        again = discrepancy(X, r.signing).sup_norm
        if again != r.sup_norm:
            bad.append({"n": r.n, "m": r.m, "signer": r.signer, "trial": r.trial, "stored": r.sup_norm, "recomputed": again})
    return {"checked": int(pick.size), "mismatches": len(bad), "failures": bad}


def summarize(records: list[TrialRecord], cfg: RunConfig) -> dict:
    cells = []
    for cell, (n, m) in enumerate(cfg.grid):
        eps = {repr(g): epsilon_threshold(n, m, g) for g in cfg.gammas}
        entry = {"n": n, "m": m, "epsilon": eps, "signers": {}}
        by = {}
        for r in records:
            if r.cell == cell:
                by.setdefault(r.signer, []).append(r)
        for name, rs in by.items():
            vals = np.array([r.sup_norm for r in rs if not math.isnan(r.sup_norm)])
            s = {"trials": len(rs), "failures": len(rs) - int(vals.size)}
            if vals.size:
                q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
                s.update(median=float(med), q1=float(q1), q3=float(q3))
                s["fraction_below"] = {k: float(np.mean(vals <= e)) for k, e in eps.items()}
            entry["signers"][name] = s
        if "oracle" in by:
            entry["limit_cdf"] = {repr(g): 1.0 - math.exp(-2.0 * g**m) for g in cfg.gammas}
        if "gkk" in by and "oracle" in by:
            orc = {r.trial: r.sup_norm for r in by["oracle"]}
            entry["gkk_below_oracle"] = sum(
                1 for r in by["gkk"] if r.trial in orc and r.sup_norm < orc[r.trial]
            )
        cells.append(entry)
    return {"density": cfg.density, "seed": cfg.seed, "trials": cfg.trials, "cells": cells}


def write_outputs(records: list[TrialRecord], summary: dict, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow(r.row())
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "phases.jsonl"), "w") as fh:
        for r in records:
            for d in r.phases:
                fh.write(json.dumps({"n": r.n, "m": r.m, "trial": r.trial, **d}, sort_keys=True) + "\n")


def compare(cfg: RunConfig, out_dir=None) -> tuple[list[TrialRecord], dict]:
    records = run_trials(cfg)
    summary = summarize(records, cfg)
    summary["reverify"] = reverify(records, cfg)
    if out_dir is not None:
        write_outputs(records, summary, out_dir)
    return records, summary
