from __future__ import annotations
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Dict, Any, Literal, Union
import numpy as np
import scipy.sparse as sp
from lighterx.helpers import DEBUG, NumericError, seed_stream
from lighterx.graph import SparseMatrix, spmm, inv_sqrt

@dataclass(frozen=True)
class PropagationResult:
  Z: np.ndarray
  layer_weights: Tuple[float, ...]
  kind: Literal["plain", "jacobi", "perturbed"]
  L: int
  params: Dict[str, Any] = field(default_factory=dict)

  def __post_init__(self):
    assert len(self.layer_weights) == self.L+1, f"{len(self.layer_weights)} layer weights for L={self.L}"
    if not np.all(np.isfinite(self.Z)): raise NumericError(f"{self.kind} propagation produced non-finite values")

def layer_weights(L:int, w:Optional[Sequence[float]]=None) -> Tuple[float, ...]:
  if L < 0: raise ValueError(f"layer count must be >= 0, got {L}")
  if w is None: return tuple([1.0/(L+1)]*(L+1))
  if len(w) != L+1: raise ValueError(f"expected {L+1} layer weights, got {len(w)}")
  return tuple(float(x) for x in w)

def _check_operands(P, X:np.ndarray):
  if P.shape[0] != P.shape[1]: raise ValueError(f"propagation matrix must be square, got {P.shape}")
  if P.shape[1] != X.shape[0]: raise ValueError(f"propagation shape mismatch {P.shape} @ {X.shape}")

def propagate(P:SparseMatrix, X:np.ndarray, L:int, w:Optional[Sequence[float]]=None) -> PropagationResult:
  _check_operands(P, X)
  ws = layer_weights(L, w)
  Z, cur = ws[0] * X, X
  for l in range(1, L+1):
    cur = spmm(P, cur)
    Z = Z + ws[l] * cur
  return PropagationResult(Z, ws, "plain", L)

# *** Jacobi polynomial filters ***

def jacobi_theta(l:int, a:float, b:float) -> Tuple[float, float, float]:
  if l < 2: raise ValueError(f"recurrence coefficients start at l=2, got {l}")
  if a <= -1 or b <= -1: print(f"WARNING: Jacobi parameters a={a} b={b} outside a,b > -1")
  if 2*l+a+b-2 == 0 or l*(l+a+b) == 0: raise NumericError(f"degenerate Jacobi parameters l={l} a={a} b={b}")
  theta = (2*l+a+b) * (2*l+a+b-1) / (2*l*(l+a+b))
  theta_p = (2*l+a+b-1) * (a*a-b*b) / (2*l*(l+a+b)*(2*l+a+b-2))
  theta_pp = (l+a-1) * (l+b-1) * (2*l+a+b) / (l*(l+a+b)*(2*l+a+b-2))
  return theta, theta_p, theta_pp

def jacobi_propagate(P:SparseMatrix, X:np.ndarray, L:int, a:float, b:float, w:Optional[Sequence[float]]=None) -> PropagationResult:
  _check_operands(P, X)
  ws = layer_weights(L, w)
  thetas = [jacobi_theta(l, a, b) for l in range(2, L+1)]
  Z, prev, cur = ws[0] * X, None, X
  for l in range(1, L+1):
    PZ = spmm(P, cur)
    if l == 1: nxt = (a-b)/2 * X + (a+b+2)/2 * PZ
    else:
      theta, theta_p, theta_pp = thetas[l-2]
      nxt = theta * PZ + theta_p * cur - theta_pp * prev
    # only the last two layers are kept
    prev, cur = cur, nxt
    Z = Z + ws[l] * cur
  return PropagationResult(Z, ws, "jacobi", L, {"a": a, "b": b})

# *** SVD perturbation ***

@dataclass(frozen=True)
class SvdFactors:
  U: np.ndarray   # |U| x q
  s: np.ndarray   # q, descending
  V: np.ndarray   # |I| x q

  @property
  def q(self) -> int: return len(self.s)

def truncated_svd(R:Union[SparseMatrix, np.ndarray], q:int, oversample:int=10, power_iters:int=4, seed:int=0) -> SvdFactors:
  m, n = R.shape
  if not 1 <= q <= min(m, n): raise ValueError(f"q={q} must be in [1, {min(m, n)}] for a {m}x{n} matrix")
  R = sp.csr_matrix(R, dtype=np.float64) if sp.issparse(R) else np.asarray(R, dtype=np.float64)
  k = min(q + oversample, min(m, n))
  rng = seed_stream(seed, "svd")
  # randomized range finder with power iterations, re-orthonormalized every half step
  Q, _ = np.linalg.qr(R @ rng.standard_normal((n, k)))
  for _ in range(power_iters):
    W, _ = np.linalg.qr(R.T @ Q)
    Q, _ = np.linalg.qr(R @ W)
  Ub, s, Vt = np.linalg.svd(np.asarray((R.T @ Q).T), full_matrices=False)
  U, V = Q @ Ub[:, :q], Vt[:q].T
  # deterministic signs: largest entry of each left vector is positive
  signs = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(q)])
  signs[signs == 0] = 1
  if DEBUG >= 2: print(f"truncated_svd: {m}x{n} q={q} k={k} sigma={s[:q]}")
  return SvdFactors(U * signs, s[:q].copy(), V * signs)

class PerturbedAdjacency:
  """D^-1/2 [[0, R],[R^T, 0]] D^-1/2 for R = U diag(s) V^T, applied in factored form."""
  def __init__(self, factors:SvdFactors, du:np.ndarray, di:np.ndarray):
    self.factors, self.du, self.di = factors, du, di
    self.num_users, self.num_items = factors.U.shape[0], factors.V.shape[0]
  @property
  def shape(self) -> Tuple[int, int]: return (self.num_users+self.num_items,)*2
  @property
  def T(self) -> PerturbedAdjacency: return self

  def __matmul__(self, x:np.ndarray) -> np.ndarray:
    if x.shape[0] != self.shape[1]: raise ValueError(f"perturbed adjacency shape mismatch {self.shape} @ {x.shape}")
    f, nu = self.factors, self.num_users
    xu, xi = x[:nu], x[nu:]
    du, di = self.du.reshape((-1,)+(1,)*(x.ndim-1)), self.di.reshape((-1,)+(1,)*(x.ndim-1))
    su = f.s.reshape((-1,)+(1,)*(x.ndim-1))
    yu = du * (f.U @ (su * (f.V.T @ (di * xi))))
    yi = di * (f.V @ (su * (f.U.T @ (du * xu))))
    return np.concatenate([yu, yi], axis=0)

  def to_dense(self) -> np.ndarray: return self @ np.eye(self.shape[0])

def perturbed_adjacency(f:SvdFactors, chunk:int=1024) -> PerturbedAdjacency:
  # absolute row and column sums of the low rank matrix, built a block of user rows at a time
  row, col = np.zeros(f.U.shape[0]), np.zeros(f.V.shape[0])
  VsT = (f.V * f.s).T
  for lo in range(0, f.U.shape[0], chunk):
    blk = np.abs(f.U[lo:lo+chunk] @ VsT)
    row[lo:lo+chunk] = blk.sum(axis=1)
    col += blk.sum(axis=0)
  return PerturbedAdjacency(f, inv_sqrt(row), inv_sqrt(col))

def perturbed_propagate(Phat:PerturbedAdjacency, P:SparseMatrix, X:np.ndarray, L:int, w:Optional[Sequence[float]]=None) -> PropagationResult:
  return propagate_with_perturbation(P, Phat, X, L, w)[1]

def propagate_with_perturbation(P:SparseMatrix, Phat:PerturbedAdjacency, X:np.ndarray, L:int,
                                w:Optional[Sequence[float]]=None) -> Tuple[PropagationResult, PropagationResult]:
  _check_operands(P, X)
  _check_operands(Phat, X)
  ws = layer_weights(L, w)
  Z, Zhat, cur = ws[0] * X, ws[0] * X, X
  for l in range(1, L+1):
    # cur is P^(l-1) X here
    Zhat = Zhat + ws[l] * (Phat @ cur)
    cur = spmm(P, cur)
    Z = Z + ws[l] * cur
  return PropagationResult(Z, ws, "plain", L), PropagationResult(Zhat, ws, "perturbed", L, {"q": Phat.factors.q})
