from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Literal
import numpy as np
import scipy.sparse as sp
from lighterx.helpers import DEBUG, NumericError, seed_stream
from lighterx.data import InteractionMatrix
from lighterx.graph import SparseMatrix, bipartite_normalize

Distribution = Literal["bernoulli", "gaussian", "uniform", "orthogonal"]

@dataclass(frozen=True)
class RandomMatrixSpec:
  distribution: Distribution = "bernoulli"
  c: float = 1.0
  sparsity: Literal["mean", "quantile"] = "mean"
  quantile: float = 0.5
  seed: int = 0
  normalize: bool = True
  h: Optional[Tuple[int, int]] = None   # explicit (h_user, h_item), skips the sizing rule

  def __post_init__(self):
    if self.distribution not in ("bernoulli", "gaussian", "uniform", "orthogonal"): raise ValueError(f"unknown distribution {self.distribution}")
    if self.c < 1: raise ValueError(f"c must be >= 1, got {self.c}")
    if self.sparsity not in ("mean", "quantile"): raise ValueError(f"unknown sparsity estimator {self.sparsity}")
    if not 0 < self.quantile <= 1: raise ValueError(f"quantile must be in (0,1], got {self.quantile}")
    if self.h is not None and (len(self.h) != 2 or min(self.h) < 1): raise ValueError(f"h override must be two positive widths, got {self.h}")

@dataclass(frozen=True)
class FeatureMatrix:
  data: np.ndarray
  h_user: int
  h_item: int
  spec: RandomMatrixSpec

  @property
  def h(self) -> int: return self.h_user + self.h_item
  @property
  def shape(self) -> Tuple[int, int]: return self.data.shape

# *** dimensioning ***

def _h_from_sparsity(n:int, r:float, c:float) -> int:
  if r < 1:
    print(f"WARNING: sparsity {r:.4f} below 1, clamped to 1")
    r = 1.0
  if r >= n: raise NumericError(f"sparsity exceeds signal dimension (r={r:.4f}, n={n})")
  return math.ceil(c * r * math.log(n / r))

def compute_h(n:int, f:int, nnz:int, c:float) -> int:
  if nnz <= 0 or f <= 0: raise NumericError(f"compute_h needs nnz > 0 and f > 0, got nnz={nnz} f={f}")
  return _h_from_sparsity(n, nnz / f, c)

# *** random matrices ***

def gen_random_matrix(rows:int, cols:int, spec:RandomMatrixSpec, rng:Optional[np.random.Generator]=None) -> np.ndarray:
  assert rows > 0 and cols > 0, f"random matrix needs positive shape, got {(rows, cols)}"
  if rng is None: rng = seed_stream(spec.seed, "features")
  # unit variance draws, then scaled to variance 1/rows
  if spec.distribution == "bernoulli": S = rng.choice(np.array([1.0, -1.0]), size=(rows, cols))
  elif spec.distribution == "gaussian": S = rng.standard_normal((rows, cols))
  elif spec.distribution == "uniform": S = rng.uniform(-math.sqrt(3), math.sqrt(3), size=(rows, cols))
  else:
    Q, Rq = np.linalg.qr(rng.standard_normal((max(rows, cols), min(rows, cols))))
    Q = Q * np.sign(np.diag(Rq))
    S = (Q if rows >= cols else Q.T) * math.sqrt(max(rows, cols))
  return S / math.sqrt(rows) if spec.normalize else S

def _width(n:int, f:int, B:SparseMatrix, degrees:np.ndarray, spec:RandomMatrixSpec) -> int:
  if spec.sparsity == "mean": return compute_h(n, f, B.nnz, spec.c)
  return _h_from_sparsity(n, float(np.quantile(degrees, spec.quantile)), spec.c)

def gen_feat(R:InteractionMatrix, spec:RandomMatrixSpec) -> FeatureMatrix:
  assert R.nnz > 0, "can't generate features for an empty dataset"
  B = bipartite_normalize(R)
  nu, ni = R.num_users, R.num_items
  if spec.h is not None:
    h_user, h_item = spec.h
    if h_user + h_item >= nu + ni: print(f"WARNING: h={h_user+h_item} is not below n={nu+ni}")
  else:
    du, di = R.degrees()
    h_user, h_item = _width(ni, nu, B, du, spec), _width(nu, ni, B, di, spec)
    if h_user + h_item >= nu + ni: raise NumericError(f"h={h_user+h_item} must stay below n={nu+ni}, lower c")
  rng = seed_stream(spec.seed, "features")
  S1, S2 = gen_random_matrix(h_user, ni, spec, rng), gen_random_matrix(h_item, nu, spec, rng)
  X = np.zeros((nu+ni, h_user+h_item), dtype=np.float64)
  X[:nu, :h_user] = B @ S1.T
  X[nu:, h_user:] = B.T @ S2.T
  if not np.all(np.isfinite(X)): raise NumericError("feature matrix has non-finite entries")
  if DEBUG >= 1: print(f"gen_feat: h_user={h_user} h_item={h_item} h={h_user+h_item} n={nu+ni}")
  return FeatureMatrix(X, h_user, h_item, spec)

def identity_features(num_users:int, num_items:int) -> FeatureMatrix:
  return FeatureMatrix(np.eye(num_users+num_items), num_users, num_items, RandomMatrixSpec(h=(num_users, num_items)))

# *** RIP ***

@dataclass(frozen=True)
class RipReport:
  pass_fraction: float
  worst_ratio: float
  mean_ratio: float
  checked: int

def rip_check(S:np.ndarray, B:SparseMatrix, delta:float, sample_count:int, seed:int=0) -> RipReport:
  if not 0 < delta < 1: raise ValueError(f"delta must be in (0,1), got {delta}")
  # S may be given as h x cols(B) or cols(B) x h
  if S.shape[1] == B.shape[1]: proj = S
  elif S.shape[0] == B.shape[1]: proj = S.T
  else: raise ValueError(f"S of shape {S.shape} can't project rows of length {B.shape[1]}")
  rng = seed_stream(seed, "rip")
  rows = rng.choice(B.shape[0], size=sample_count, replace=sample_count > B.shape[0])
  P = sp.csr_matrix(B)[rows].toarray()
  pnorm = np.einsum("ij,ij->i", P, P)
  P, pnorm = P[pnorm > 0], pnorm[pnorm > 0]
  if len(P) == 0: return RipReport(0.0, float("nan"), float("nan"), 0)
  SP = P @ proj.T
  ratio = np.einsum("ij,ij->i", SP, SP) / pnorm
  ok = ((1-delta) <= ratio) & (ratio <= (1+delta))
  return RipReport(float(ok.mean()), float(ratio[np.argmax(np.abs(ratio - 1))]), float(ratio.mean()), len(ratio))
