from __future__ import annotations
import csv, time, pathlib
from dataclasses import dataclass, replace, asdict
from typing import Optional, Sequence, List, Dict, Any, Union, Literal, TextIO
import numpy as np
from lighterx.helpers import DEBUG, THREADS, Timing, seed_stream
from lighterx.data import InteractionMatrix
from lighterx.features import RandomMatrixSpec
from lighterx.model import TrainConfig, PrecomputeSpec, precompute_inputs, train

# *** synthetic data ***

def synthetic_interactions(num_users:int, num_items:int, density:Optional[float]=None, avg_degree:Optional[float]=None,
                           power_law:bool=False, alpha:float=1.0, seed:int=0) -> InteractionMatrix:
  """Erdos-Renyi style bipartite interactions, every user has at least one item. power_law draws items by a Zipf popularity."""
  if (density is None) == (avg_degree is None): raise ValueError("give exactly one of density and avg_degree")
  m = int(round(density * num_users * num_items)) if density is not None else int(round(avg_degree * num_users))
  m = min(max(m, num_users), num_users * num_items)
  rng = seed_stream(seed, "synthetic")
  p = None
  if power_law:
    p = 1.0 / np.arange(1, num_items+1) ** alpha
    p = rng.permutation(p / p.sum())
  def draw(k:int) -> np.ndarray: return rng.choice(num_items, size=k, p=p)
  keys = np.unique(np.arange(num_users) * num_items + draw(num_users))
  while len(keys) < m:
    need = m - len(keys)
    keys = np.unique(np.concatenate([keys, rng.integers(num_users, size=need) * num_items + draw(need)]))
  return InteractionMatrix.from_pairs(keys // num_items, keys % num_items, num_users, num_items)

# *** timing ***

@dataclass(frozen=True)
class TimingReport:
  variant: str
  precompute_s: float
  epoch_s_mean: float
  epoch_s_std: float
  total_s: float
  params: int
  threads: int
  epochs: int

def bench_epoch(variant:str, dataset:InteractionMatrix, cfg:TrainConfig, repetitions:int=3, fspec:Optional[RandomMatrixSpec]=None,
                pspec:Optional[PrecomputeSpec]=None) -> TimingReport:
  assert repetitions >= 1, "need at least one timed epoch"
  fspec, pspec = fspec or RandomMatrixSpec(seed=cfg.seed), pspec or PrecomputeSpec()
  with Timing(enabled=False) as tp:
    pre = precompute_inputs(variant, dataset, fspec, pspec, cfg.seed)
  # one warmup epoch, the batch schedule only depends on cfg.seed so variants see the same triples
  res = train(variant, pre.inputs, replace(cfg, epochs=repetitions+1), dataset, None, quiet=True)
  secs = np.array([h["seconds"] for h in res.history[1:]])
  rep = TimingReport(variant, tp.seconds, float(secs.mean()), float(secs.std()), tp.seconds + float(sum(h["seconds"] for h in res.history)),
                     res.model.num_params(), THREADS.value, repetitions)
  if DEBUG >= 1: print(f"{variant}: precompute {rep.precompute_s:.3f}s, epoch {rep.epoch_s_mean:.3f}+-{rep.epoch_s_std:.3f}s, {rep.params} params")
  return rep

def timer_overhead(iterations:int=10000, interval_s:float=1e-2) -> Dict[str, float]:
  """Cost of one Timing enter/exit around a no-op, as a fraction of a measured interval."""
  st = time.perf_counter_ns()
  for _ in range(iterations):
    with Timing(enabled=False): pass
  per_call = (time.perf_counter_ns() - st) * 1e-9 / iterations
  return {"per_call_s": per_call, "interval_s": interval_s, "fraction": per_call / interval_s}

# *** scaling sweeps ***

CSV_FIELDS = ["axis", "value", "variant", "precompute_s", "epoch_s_mean", "epoch_s_std", "params"]
Axis = Literal["n", "d", "h", "L", "c", "quantile"]
FEATURE_AXES = ("c", "quantile")

@dataclass(frozen=True)
class SweepBase:
  n: int = 2000
  avg_degree: float = 10.0
  d: int = 64
  h: int = 128
  L: int = 3
  power_law: bool = False
  # only read when c or quantile is swept, h then comes from the sizing rule
  c: float = 1.0
  sparsity: Literal["mean", "quantile"] = "mean"
  quantile: float = 0.5

def scaling_sweep(axis:Axis, values:Sequence[float], variants:Union[str, Sequence[str]], out:Union[str, pathlib.Path, TextIO, None]=None,
                  base:SweepBase=SweepBase(), cfg:TrainConfig=TrainConfig(epochs=1, dtype="float32"), repetitions:int=3) -> List[Dict[str, Any]]:
  if axis not in ("n", "d", "h", "L", *FEATURE_AXES): raise ValueError(f"unknown sweep axis {axis}")
  variants = [variants] if isinstance(variants, str) else list(variants)
  rows: List[Dict[str, Any]] = []
  f = open(out, "w", newline="") if isinstance(out, (str, pathlib.Path)) else out
  try:
    writer = csv.DictWriter(f, fieldnames=CSV_FIELDS) if f is not None else None
    if writer is not None: writer.writeheader()
    for value in values:
      b = replace(base, **{axis: float(value) if axis in FEATURE_AXES else int(value)})
      data = synthetic_interactions(b.n//2, b.n - b.n//2, avg_degree=b.avg_degree, power_law=b.power_law, seed=cfg.seed)
      if axis in FEATURE_AXES:
        fspec = RandomMatrixSpec(c=b.c, sparsity="quantile" if axis == "quantile" else b.sparsity, quantile=b.quantile, seed=cfg.seed)
      else:
        # h is held fixed through the explicit width override so only the swept axis moves
        fspec = RandomMatrixSpec(seed=cfg.seed, h=(b.h//2, b.h - b.h//2))
      for v in variants:
        rep = bench_epoch(v, data, replace(cfg, d=b.d), repetitions, fspec, PrecomputeSpec(L=b.L))
        row = {"axis": axis, "value": getattr(b, axis), "variant": v, "precompute_s": rep.precompute_s, "epoch_s_mean": rep.epoch_s_mean,
               "epoch_s_std": rep.epoch_s_std, "params": rep.params}
        rows.append(row)
        if writer is not None: writer.writerow(row)
  finally:
    if isinstance(out, (str, pathlib.Path)) and f is not None: f.close()
  return rows

def report_dict(rep:TimingReport) -> Dict[str, Any]: return asdict(rep)
