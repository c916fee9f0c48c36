from __future__ import annotations
import json, math, functools
from dataclasses import dataclass
from typing import List, Optional, Sequence, Dict, Tuple, Union, Collection
import numpy as np
import scipy.sparse as sp
from lighterx.helpers import DEBUG, fmt_table
from lighterx.data import InteractionMatrix

METRICS = ("recall", "ndcg", "hit", "mrr")

@dataclass(frozen=True)
class RankingResult:
  users: np.ndarray
  items: List[np.ndarray]    # per user, best first
  scores: List[np.ndarray]
  k: int

  def __post_init__(self):
    assert len(self.users) == len(self.items) == len(self.scores), "one ranked list per user"

  def top(self, k:int) -> List[np.ndarray]:
    assert k <= self.k, f"ranked to {self.k}, can't cut at {k}"
    return [x[:k] for x in self.items]

def _mask_matrix(mask) -> Optional[sp.csr_matrix]:
  if mask is None: return None
  if isinstance(mask, InteractionMatrix): return mask.interactions
  if isinstance(mask, (list, tuple)):
    ms = [m for m in (_mask_matrix(x) for x in mask) if m is not None]
    return functools.reduce(lambda a,b: a+b, ms).tocsr() if ms else None
  return sp.csr_matrix(mask)

def _top_row(s:np.ndarray, k:int) -> Tuple[np.ndarray, np.ndarray]:
  finite = np.flatnonzero(np.isfinite(s))
  if (kk := min(k, len(finite))) == 0: return np.zeros(0, dtype=np.int64), np.zeros(0)
  vals = s[finite]
  # every candidate tied with the kth best score, then an exact sort by (-score, index)
  thresh = np.partition(vals, len(vals)-kk)[len(vals)-kk]
  cand = finite[vals >= thresh]
  order = np.lexsort((cand, -s[cand]))[:kk]
  return cand[order].astype(np.int64), s[cand[order]]

def full_rank(E_user:np.ndarray, E_item:np.ndarray, mask:Union[None, InteractionMatrix, sp.spmatrix, Sequence]=None, k:int=10,
              users:Optional[np.ndarray]=None, chunk:int=1024) -> RankingResult:
  if E_user.shape[1] != E_item.shape[1]: raise ValueError(f"embedding widths differ {E_user.shape} {E_item.shape}")
  if k > E_item.shape[0]: raise ValueError(f"k={k} exceeds the {E_item.shape[0]} items")
  users = np.arange(E_user.shape[0]) if users is None else np.asarray(users, dtype=np.int64)
  M = _mask_matrix(mask)
  items, scores = [], []
  for lo in range(0, len(users), chunk):
    us = users[lo:lo+chunk]
    S = np.asarray(E_user[us] @ E_item.T, dtype=np.float64)
    S[np.isnan(S)] = -np.inf
    if M is not None:
      r, c = M[us].nonzero()
      S[r, c] = -np.inf
    for row in S:
      it, sc = _top_row(row, k)
      items.append(it)
      scores.append(sc)
  if DEBUG >= 2: print(f"full_rank: {len(users)} users x {E_item.shape[0]} items, k={k}")
  return RankingResult(users, items, scores, k)

# *** metrics, binary relevance ***

def _as_ranked(ranked, k:Optional[int]) -> List[np.ndarray]:
  if isinstance(ranked, RankingResult): return ranked.top(k if k is not None else ranked.k)
  return [np.asarray(r)[:k] if k is not None else np.asarray(r) for r in ranked]

def _per_user(ranked, ground_truth:Sequence[Collection[int]], k:Optional[int], fxn) -> float:
  lists = _as_ranked(ranked, k)
  assert len(lists) == len(ground_truth), f"{len(lists)} ranked lists for {len(ground_truth)} ground truth sets"
  vals = [fxn(r, set(int(x) for x in gt)) for r,gt in zip(lists, ground_truth) if len(gt)]
  return float(np.mean(vals)) if vals else 0.0

def _hits(r:np.ndarray, gt:set) -> np.ndarray: return np.array([int(x) in gt for x in r], dtype=bool)

def recall_at_k(ranked, ground_truth:Sequence[Collection[int]], k:Optional[int]=None) -> float:
  return _per_user(ranked, ground_truth, k, lambda r,gt: _hits(r, gt).sum() / len(gt))
def hit_at_k(ranked, ground_truth:Sequence[Collection[int]], k:Optional[int]=None) -> float:
  return _per_user(ranked, ground_truth, k, lambda r,gt: float(_hits(r, gt).any()))
def mrr_at_k(ranked, ground_truth:Sequence[Collection[int]], k:Optional[int]=None) -> float:
  def mrr(r, gt):
    h = np.flatnonzero(_hits(r, gt))
    return 1.0 / (h[0]+1) if len(h) else 0.0
  return _per_user(ranked, ground_truth, k, mrr)
def ndcg_at_k(ranked, ground_truth:Sequence[Collection[int]], k:Optional[int]=None) -> float:
  kk = k if k is not None else (ranked.k if isinstance(ranked, RankingResult) else None)
  def ndcg(r, gt):
    cut = len(r) if kk is None else kk
    dcg = sum(1.0/math.log2(rank+2) for rank in np.flatnonzero(_hits(r, gt)))
    idcg = sum(1.0/math.log2(i+2) for i in range(min(cut, len(gt))))
    return dcg / idcg
  return _per_user(ranked, ground_truth, k, ndcg)

METRIC_FXNS = {"recall": recall_at_k, "ndcg": ndcg_at_k, "hit": hit_at_k, "mrr": mrr_at_k}

def evaluate(E:np.ndarray, num_users:int, mask, truth:InteractionMatrix, ks:Sequence[int]=(10, 20),
             metrics:Sequence[str]=METRICS) -> Dict[Tuple[int, str], float]:
  users = np.flatnonzero(np.diff(truth.interactions.indptr) > 0)
  if len(users) == 0: return {(k, m): 0.0 for k in ks for m in metrics}
  ranked = full_rank(E[:num_users], E[num_users:], mask, max(ks), users)
  gt = [truth.user_items(u) for u in users]
  return {(k, m): METRIC_FXNS[m](ranked, gt, k) for k in ks for m in metrics}

def metric_lines(results:Dict[Tuple[int, str], float], **extra) -> List[str]:
  return [json.dumps({"k": k, "metric": m, "value": v, **extra}) for (k, m), v in results.items()]

def metric_table(results:Dict[Tuple[int, str], float]) -> str:
  ks, ms = sorted({k for k,_ in results}), [m for m in METRICS if any(m == mm for _,mm in results)]
  return fmt_table([(f"@{k}",)+tuple(results[(k, m)] for m in ms) for k in ks], ("k",)+tuple(ms))
