from __future__ import annotations
import math, time
from dataclasses import dataclass, field
from typing import Optional, Tuple, List, Dict, Any, Callable, Sequence, Iterable, Literal
import numpy as np
from tqdm import trange
from lighterx.helpers import DEBUG, CI, DataError, NumericError, seed_stream
from lighterx.data import InteractionMatrix
from lighterx.graph import SparseMatrix, spmm, build_adjacency, normalize_adjacency
from lighterx.features import RandomMatrixSpec, FeatureMatrix, gen_feat, identity_features
from lighterx.propagation import PerturbedAdjacency, SvdFactors, layer_weights, propagate, jacobi_propagate, truncated_svd, perturbed_adjacency
from lighterx.propagation import propagate_with_perturbation
from lighterx.nn import MLP, init_weight
from lighterx.nn.loss import bpr_loss, infonce_loss
from lighterx.nn.optim import Adam, AdamState
from lighterx.eval import evaluate

DECOUPLED = ("lighter_gcn", "lighter_jgcf", "lighter_gcl")
COUPLED = ("coupled_lightgcn", "coupled_jgcf", "coupled_lightgcl")
VARIANTS = DECOUPLED + COUPLED

@dataclass(frozen=True)
class TrainConfig:
  d: int = 64
  batch_size: int = 2048
  lr: float = 1e-3
  epochs: int = 100
  weight_decay: float = 0.0
  negatives_per_positive: int = 1
  lambda1: float = 0.01
  temp: float = 0.8
  beta: float = 0.1
  seed: int = 0
  patience: int = 10
  hidden: Tuple[int, ...] = ()
  activation: Literal["none", "tanh", "relu"] = "none"
  bias: bool = False
  init: Literal["xavier", "gaussian"] = "xavier"
  dtype: Literal["float32", "float64"] = "float64"
  eval_k: int = 10

  def __post_init__(self):
    for name in ("d", "batch_size", "epochs", "negatives_per_positive", "patience", "eval_k"):
      if getattr(self, name) < 1: raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
    if self.lr <= 0: raise ValueError(f"lr must be positive, got {self.lr}")
    if self.temp <= 0: raise ValueError(f"temp must be positive, got {self.temp}")
    if self.weight_decay < 0 or self.lambda1 < 0: raise ValueError("weight_decay and lambda1 must be nonnegative")
    if any(h < 1 for h in self.hidden): raise ValueError(f"hidden sizes must be positive, got {self.hidden}")

@dataclass(frozen=True)
class EmbeddingTable:
  E: np.ndarray
  num_users: int

  def __post_init__(self):
    if not np.all(np.isfinite(self.E)): raise NumericError("embedding table has non-finite entries")
  @property
  def users(self) -> np.ndarray: return self.E[:self.num_users]
  @property
  def items(self) -> np.ndarray: return self.E[self.num_users:]

@dataclass
class ModelInputs:
  """Precomputed matrices a variant trains on. Decoupled variants read Z (+X, +Zhat), coupled ones the graph operators."""
  num_users: int
  num_items: int
  Z: Optional[np.ndarray] = None
  X: Optional[np.ndarray] = None
  Zhat: Optional[np.ndarray] = None
  P: Optional[SparseMatrix] = None
  Phat: Optional[PerturbedAdjacency] = None
  L: int = 3
  weights: Optional[Tuple[float, ...]] = None
  a: float = 1.0
  b: float = 1.0

  def require(self, variant:str, *names:str):
    if missing := [n for n in names if getattr(self, n) is None]: raise DataError(f"{variant} needs precomputed {', '.join(missing)}")

# *** negative sampling ***

def sample_negatives(train:InteractionMatrix, u:int, count:int, rng:np.random.Generator) -> np.ndarray:
  pos = train.user_items(u)
  if len(pos) >= train.num_items: raise DataError(f"user {train.user_ids[u]} interacted with every item, no negatives to sample")
  out = np.empty(count, dtype=np.int64)
  for k in range(count):
    while (i := int(rng.integers(train.num_items))) in pos: pass
    out[k] = i
  return out

class NegativeSampler:
  def __init__(self, train:InteractionMatrix):
    self.num_items = train.num_items
    us, its = train.pairs()
    self.keys = np.sort(us * train.num_items + its)
    if np.any(np.diff(train.interactions.indptr) >= train.num_items):
      raise DataError("a user interacted with every item, no negatives to sample")
  def is_positive(self, users:np.ndarray, items:np.ndarray) -> np.ndarray:
    q = users * self.num_items + items
    idx = np.minimum(np.searchsorted(self.keys, q), len(self.keys)-1)
    return self.keys[idx] == q
  def __call__(self, users:np.ndarray, rng:np.random.Generator) -> np.ndarray:
    # uniform over non-interacted items by rejection, vectorized over the batch
    out = rng.integers(self.num_items, size=len(users))
    while (bad := np.flatnonzero(self.is_positive(users, out))).size: out[bad] = rng.integers(self.num_items, size=len(bad))
    return out

# *** models ***

def _scatter(n:int, nodes:np.ndarray, g:np.ndarray) -> np.ndarray:
  out = np.zeros((n, g.shape[1]), dtype=g.dtype)
  np.add.at(out, nodes, g)
  return out

class Recommender:
  """A trainable embedding producer. loss_and_grads works on one batch of (user, positive, negative) triples."""
  num_users: int
  def parameters(self) -> List[np.ndarray]: raise NotImplementedError
  def num_params(self) -> int: return sum(p.size for p in self.parameters())
  def loss_and_grads(self, users:np.ndarray, pos:np.ndarray, neg:np.ndarray) -> Tuple[Dict[str, float], List[np.ndarray]]: raise NotImplementedError
  def embeddings(self) -> EmbeddingTable: raise NotImplementedError

  def _bpr_rows(self, E:np.ndarray, users:np.ndarray, pos:np.ndarray, neg:np.ndarray):
    b = len(users)
    loss, (gu, gi, gj) = bpr_loss(E[:b], E[b:2*b], E[2*b:])
    return loss, np.concatenate([gu, gi, gj])
  def _nodes(self, users:np.ndarray, pos:np.ndarray, neg:np.ndarray) -> np.ndarray:
    return np.concatenate([users, self.num_users + pos, self.num_users + neg])

class DecoupledGCN(Recommender):
  def __init__(self, Z:np.ndarray, num_users:int, mlp:MLP):
    self.Z, self.num_users, self.mlp = Z, num_users, mlp
  def parameters(self) -> List[np.ndarray]: return self.mlp.parameters()

  def loss_and_grads(self, users, pos, neg):
    E, tape = self.mlp.forward(self.Z[self._nodes(users, pos, neg)])
    loss, g = self._bpr_rows(E, users, pos, neg)
    return {"loss": loss, "bpr": loss}, self.mlp.backward(tape, g, input_grad=False)[1]

  def embeddings(self, chunk:int=65536) -> EmbeddingTable:
    return EmbeddingTable(np.concatenate([self.mlp(self.Z[lo:lo+chunk]) for lo in range(0, len(self.Z), chunk)]), self.num_users)

class DecoupledJGCF(Recommender):
  """Low band from MLP(Z), mid band tanh(beta MLP(X) - low), one MLP shared by both."""
  def __init__(self, Z:np.ndarray, X:np.ndarray, num_users:int, mlp:MLP, beta:float):
    assert Z.shape == X.shape, f"Z {Z.shape} and X {X.shape} must match"
    self.Z, self.X, self.num_users, self.mlp, self.beta = Z, X, num_users, mlp, beta
  def parameters(self) -> List[np.ndarray]: return self.mlp.parameters()

  def _forward(self, Zr:np.ndarray, Xr:np.ndarray):
    low, tz = self.mlp.forward(Zr)
    a, tx = self.mlp.forward(Xr)
    mid = np.tanh(self.beta * a - low)
    return np.concatenate([low, mid], axis=1), (tz, tx, mid)

  def loss_and_grads(self, users, pos, neg):
    nodes = self._nodes(users, pos, neg)
    E, (tz, tx, mid) = self._forward(self.Z[nodes], self.X[nodes])
    loss, g = self._bpr_rows(E, users, pos, neg)
    d = mid.shape[1]
    dpre = g[:, d:] * (1 - mid*mid)
    _, gz = self.mlp.backward(tz, g[:, :d] - dpre, input_grad=False)
    _, gx = self.mlp.backward(tx, self.beta * dpre, input_grad=False)
    return {"loss": loss, "bpr": loss}, [a+b for a,b in zip(gz, gx)]

  def embeddings(self, chunk:int=65536) -> EmbeddingTable:
    return EmbeddingTable(np.concatenate([self._forward(self.Z[lo:lo+chunk], self.X[lo:lo+chunk])[0] for lo in range(0, len(self.Z), chunk)]), self.num_users)

def _contrast_nodes(num_users:int, users:np.ndarray, pos:np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
  return np.unique(users), num_users + np.unique(pos)

class DecoupledGCL(DecoupledGCN):
  """BPR on MLP(Z) plus node level InfoNCE between MLP(Z) and MLP(Zhat) for the batch users and positive items."""
  def __init__(self, Z:np.ndarray, Zhat:np.ndarray, num_users:int, mlp:MLP, lambda1:float, temp:float):
    assert Z.shape == Zhat.shape, f"Z {Z.shape} and Zhat {Zhat.shape} must match"
    super().__init__(Z, num_users, mlp)
    self.Zhat, self.lambda1, self.temp = Zhat, lambda1, temp

  def loss_and_grads(self, users, pos, neg):
    rec, grads = super().loss_and_grads(users, pos, neg)
    ssl = 0.0
    for nodes in _contrast_nodes(self.num_users, users, pos):
      E, te = self.mlp.forward(self.Z[nodes])
      Eh, th = self.mlp.forward(self.Zhat[nodes])
      l, (gE, gEh) = infonce_loss(E, Eh, self.temp)
      ssl += l
      for g in (self.mlp.backward(te, self.lambda1 * gE, False)[1], self.mlp.backward(th, self.lambda1 * gEh, False)[1]):
        grads = [a+b for a,b in zip(grads, g)]
    return {"loss": rec["bpr"] + self.lambda1 * ssl, "bpr": rec["bpr"], "ssl": ssl}, grads

# coupled baselines, E0 is the n x d parameter and the whole graph is propagated every batch

def coupled_lightgcn_forward(P:SparseMatrix, E0:np.ndarray, L:int, w:Optional[Sequence[float]]=None, num_users:int=0) -> EmbeddingTable:
  return EmbeddingTable(propagate(P, E0, L, w).Z, num_users)

def coupled_jgcf_forward(P:SparseMatrix, E0:np.ndarray, L:int, a:float, b:float, beta:float, w:Optional[Sequence[float]]=None,
                         num_users:int=0) -> EmbeddingTable:
  low = jacobi_propagate(P, E0, L, a, b, w).Z
  return EmbeddingTable(np.concatenate([low, np.tanh(beta * E0 - low)], axis=1), num_users)

def _perturbed_apply(P:SparseMatrix, Phat:PerturbedAdjacency, E0:np.ndarray, ws:Tuple[float, ...]) -> np.ndarray:
  out, cur = ws[0] * E0, E0
  for l in range(1, len(ws)):
    out = out + ws[l] * (Phat @ cur)
    if l != len(ws)-1: cur = spmm(P, cur)
  return out

def _perturbed_adjoint(P:SparseMatrix, Phat:PerturbedAdjacency, G:np.ndarray, ws:Tuple[float, ...]) -> np.ndarray:
  # both operators are symmetric: sum_l w_l (Phat P^(l-1))^T G = w_0 G + sum_l w_l P^(l-1) Phat G
  H = Phat @ G
  return ws[0] * G + (propagate(P, H, len(ws)-2, ws[1:]).Z if len(ws) > 1 else 0)

def coupled_gcl_forward(P:SparseMatrix, Phat:PerturbedAdjacency, E0:np.ndarray, L:int,
                        w:Optional[Sequence[float]]=None, num_users:int=0) -> Tuple[EmbeddingTable, EmbeddingTable]:
  ws = layer_weights(L, w)
  return EmbeddingTable(propagate(P, E0, L, ws).Z, num_users), EmbeddingTable(_perturbed_apply(P, Phat, E0, ws), num_users)

class CoupledGCN(Recommender):
  def __init__(self, P:SparseMatrix, E0:np.ndarray, num_users:int, L:int, w:Optional[Sequence[float]]=None):
    self.P, self.E0, self.num_users, self.L, self.w = P, E0, num_users, L, layer_weights(L, w)
  def parameters(self) -> List[np.ndarray]: return [self.E0]
  def _full(self) -> np.ndarray: return propagate(self.P, self.E0, self.L, self.w).Z
  def _adjoint(self, G:np.ndarray) -> np.ndarray: return propagate(self.P, G, self.L, self.w).Z

  def loss_and_grads(self, users, pos, neg):
    nodes = self._nodes(users, pos, neg)
    loss, g = self._bpr_rows(self._full()[nodes], users, pos, neg)
    return {"loss": loss, "bpr": loss}, [self._adjoint(_scatter(len(self.E0), nodes, g))]

  def embeddings(self) -> EmbeddingTable: return EmbeddingTable(self._full(), self.num_users)

class CoupledJGCF(CoupledGCN):
  def __init__(self, P:SparseMatrix, E0:np.ndarray, num_users:int, L:int, a:float, b:float, beta:float, w:Optional[Sequence[float]]=None):
    super().__init__(P, E0, num_users, L, w)
    self.a, self.b, self.beta = a, b, beta
  def _full(self) -> np.ndarray: return jacobi_propagate(self.P, self.E0, self.L, self.a, self.b, self.w).Z
  # the Jacobi filter is a polynomial in the symmetric P, so it is its own adjoint
  def _adjoint(self, G:np.ndarray) -> np.ndarray: return jacobi_propagate(self.P, G, self.L, self.a, self.b, self.w).Z

  def loss_and_grads(self, users, pos, neg):
    nodes = self._nodes(users, pos, neg)
    low = self._full()
    mid = np.tanh(self.beta * self.E0[nodes] - low[nodes])
    loss, g = self._bpr_rows(np.concatenate([low[nodes], mid], axis=1), users, pos, neg)
    d = self.E0.shape[1]
    dpre = g[:, d:] * (1 - mid*mid)
    n = len(self.E0)
    return {"loss": loss, "bpr": loss}, [self._adjoint(_scatter(n, nodes, g[:, :d] - dpre)) + _scatter(n, nodes, self.beta * dpre)]

  def embeddings(self) -> EmbeddingTable:
    low = self._full()
    return EmbeddingTable(np.concatenate([low, np.tanh(self.beta * self.E0 - low)], axis=1), self.num_users)

class CoupledGCL(CoupledGCN):
  def __init__(self, P:SparseMatrix, Phat:PerturbedAdjacency, E0:np.ndarray, num_users:int, L:int, lambda1:float, temp:float,
               w:Optional[Sequence[float]]=None):
    super().__init__(P, E0, num_users, L, w)
    self.Phat, self.lambda1, self.temp = Phat, lambda1, temp

  def loss_and_grads(self, users, pos, neg):
    n, nodes = len(self.E0), self._nodes(users, pos, neg)
    E, Eh = self._full(), _perturbed_apply(self.P, self.Phat, self.E0, self.w)
    bpr, g = self._bpr_rows(E[nodes], users, pos, neg)
    G, Gh, ssl = _scatter(n, nodes, g), np.zeros_like(self.E0), 0.0
    for cn in _contrast_nodes(self.num_users, users, pos):
      l, (gE, gEh) = infonce_loss(E[cn], Eh[cn], self.temp)
      ssl += l
      G[cn] += self.lambda1 * gE
      Gh[cn] += self.lambda1 * gEh
    return {"loss": bpr + self.lambda1 * ssl, "bpr": bpr, "ssl": ssl}, [self._adjoint(G) + _perturbed_adjoint(self.P, self.Phat, Gh, self.w)]

def build_model(variant:str, inputs:ModelInputs, cfg:TrainConfig) -> Recommender:
  if variant not in VARIANTS: raise ValueError(f"unknown variant {variant}, expected one of {VARIANTS}")
  dtype, rng = np.dtype(cfg.dtype), seed_stream(cfg.seed, "init")
  nu, n = inputs.num_users, inputs.num_users + inputs.num_items
  if variant in DECOUPLED:
    inputs.require(variant, "Z", *{"lighter_jgcf": ("X",), "lighter_gcl": ("Zhat",)}.get(variant, ()))
    assert inputs.Z is not None
    if inputs.Z.shape[0] != n: raise DataError(f"Z has {inputs.Z.shape[0]} rows for {n} nodes")
    mlp = MLP([inputs.Z.shape[1], *cfg.hidden, cfg.d], cfg.activation, cfg.bias, cfg.init, rng, dtype)
    Z = inputs.Z.astype(dtype, copy=False)
    if variant == "lighter_gcn": return DecoupledGCN(Z, nu, mlp)
    if variant == "lighter_jgcf": return DecoupledJGCF(Z, inputs.X.astype(dtype, copy=False), nu, mlp, cfg.beta)
    return DecoupledGCL(Z, inputs.Zhat.astype(dtype, copy=False), nu, mlp, cfg.lambda1, cfg.temp)
  inputs.require(variant, "P", *(("Phat",) if variant == "coupled_lightgcl" else ()))
  assert inputs.P is not None
  if inputs.P.shape[0] != n: raise DataError(f"P has {inputs.P.shape[0]} rows for {n} nodes")
  E0 = init_weight(rng, n, cfg.d, cfg.init, dtype)
  if variant == "coupled_lightgcn": return CoupledGCN(inputs.P, E0, nu, inputs.L, inputs.weights)
  if variant == "coupled_jgcf": return CoupledJGCF(inputs.P, E0, nu, inputs.L, inputs.a, inputs.b, cfg.beta, inputs.weights)
  return CoupledGCL(inputs.P, inputs.Phat, E0, nu, inputs.L, cfg.lambda1, cfg.temp, inputs.weights)

# *** parameter update instrumentation ***

@dataclass(frozen=True)
class UpdateReport:
  counts: np.ndarray          # per scalar parameter, steps with |dw| > eps
  steps: int
  heat: Tuple[Dict[str, float], ...]   # per epoch summary

  def fraction_exceeding(self, k:int) -> float: return float(np.mean(self.counts > k)) if self.counts.size else 0.0
  def curve(self, ks:Optional[Iterable[int]]=None) -> List[Tuple[int, float]]:
    ks = range(self.steps+1) if ks is None else ks
    srt = np.sort(self.counts)
    # fraction of counts strictly above k
    return [(k, float(1 - np.searchsorted(srt, k, side="right") / max(len(srt), 1))) for k in ks]

class UpdateTracker:
  def __init__(self, eps:float=1e-4):
    if eps < 0: raise ValueError(f"eps must be >= 0, got {eps}")
    self.eps, self.steps = eps, 0
    self.counts: List[np.ndarray] = []
    self.heat: List[Dict[str, float]] = []
    self._epoch: Optional[List[np.ndarray]] = None
    self._epoch_steps, self._snap = 0, None

  def observe(self, deltas:Sequence[np.ndarray]):
    if not self.counts: self.counts = [np.zeros(d.shape, dtype=np.int64) for d in deltas]
    if self._epoch is None: self._epoch = [np.zeros(d.shape, dtype=np.int64) for d in deltas]
    for c, e, d in zip(self.counts, self._epoch, deltas):
      hit = np.abs(d) > self.eps
      c += hit
      e += hit
    self.steps += 1
    self._epoch_steps += 1

  # wrap an optimizer step
  def before(self, params:Sequence[np.ndarray]): self._snap = [p.copy() for p in params]
  def after(self, params:Sequence[np.ndarray]):
    assert self._snap is not None, "after without before"
    self.observe([p - s for p,s in zip(params, self._snap)])
    self._snap = None

  def end_epoch(self):
    if self._epoch is None: return
    flat = np.concatenate([e.ravel() for e in self._epoch])
    self.heat.append({"epoch": len(self.heat), "steps": self._epoch_steps, "updated_fraction": float(np.mean(flat > 0)),
                      "mean_updates": float(flat.mean()), "max_updates": int(flat.max())})
    self._epoch, self._epoch_steps = None, 0

  def report(self) -> UpdateReport:
    self.end_epoch()
    counts = np.concatenate([c.ravel() for c in self.counts]) if self.counts else np.zeros(0, dtype=np.int64)
    return UpdateReport(counts, self.steps, tuple(self.heat))

def track_updates(stream:Iterable[Sequence[np.ndarray]], eps:float=1e-4) -> UpdateReport:
  """Count, per scalar parameter, the steps whose update |dw| exceeds eps. An empty delta list marks an epoch boundary."""
  tracker = UpdateTracker(eps)
  for deltas in stream:
    if len(deltas): tracker.observe(deltas)
    else: tracker.end_epoch()
  return tracker.report()

# *** training ***

@dataclass
class TrainState:
  epoch: int = 0
  best: float = -math.inf
  best_epoch: int = -1
  bad_evals: int = 0
  history: List[Dict[str, Any]] = field(default_factory=list)
  params: Optional[List[np.ndarray]] = None
  best_params: Optional[List[np.ndarray]] = None
  adam: Optional[AdamState] = None
  rng_state: Optional[Dict[str, Any]] = None
  stopped: bool = False

@dataclass
class TrainResult:
  model: Recommender
  embeddings: EmbeddingTable
  history: List[Dict[str, Any]]
  state: TrainState

def train(variant:str, inputs:ModelInputs, cfg:TrainConfig, train_R:InteractionMatrix, valid_R:Optional[InteractionMatrix]=None,
          resume:Optional[TrainState]=None, on_epoch:Optional[Callable[[Recommender, TrainState], None]]=None,
          tracker:Optional[UpdateTracker]=None, quiet:bool=False) -> TrainResult:
  model = build_model(variant, inputs, cfg)
  params = model.parameters()
  opt = Adam(params, cfg.lr, weight_decay=cfg.weight_decay)
  sampler, rng = NegativeSampler(train_R), seed_stream(cfg.seed, "sampling")
  st = resume if resume is not None else TrainState()
  if resume is not None:
    assert st.params is not None and st.adam is not None and st.rng_state is not None, "resume state needs parameters, optimizer moments and the sampler rng"
    for p, v in zip(params, st.params): p[...] = v
    opt.state = st.adam
    rng.bit_generator.state = st.rng_state
  us, its = train_R.pairs()
  us, its = np.repeat(us, cfg.negatives_per_positive), np.repeat(its, cfg.negatives_per_positive)
  do_eval = valid_R is not None and valid_R.nnz > 0
  if not do_eval and DEBUG >= 1: print("WARNING: no validation interactions, early stopping disabled")
  if DEBUG >= 1: print(f"{variant}: {model.num_params()} trainable parameters, {len(us)} triples per epoch")

  for epoch in (t := trange(cfg.epochs if st.stopped else st.epoch, cfg.epochs, disable=CI or quiet)):
    st0 = time.perf_counter()
    perm = rng.permutation(len(us))
    totals: Dict[str, float] = {}
    nb = 0
    for lo in range(0, len(perm), cfg.batch_size):
      idx = perm[lo:lo+cfg.batch_size]
      bu, bi = us[idx], its[idx]
      losses, grads = model.loss_and_grads(bu, bi, sampler(bu, rng))
      if tracker is not None: tracker.before(params)
      opt.step(grads)
      if tracker is not None: tracker.after(params)
      for k,v in losses.items(): totals[k] = totals.get(k, 0.0) + v
      nb += 1
    if tracker is not None: tracker.end_epoch()
    rec: Dict[str, Any] = {"epoch": epoch, **{k: v/nb for k,v in totals.items()}}
    if do_eval:
      assert valid_R is not None
      res = evaluate(model.embeddings().E, train_R.num_users, train_R, valid_R, ks=(cfg.eval_k,), metrics=("recall", "ndcg"))
      rec.update({f"{m}@{k}": v for (k, m), v in res.items()})
      score = res[(cfg.eval_k, "recall")]
      if score > st.best: st.best, st.best_epoch, st.bad_evals, st.best_params = score, epoch, 0, [p.copy() for p in params]
      else: st.bad_evals += 1
    rec["seconds"] = time.perf_counter() - st0
    st.history.append(rec)
    st.epoch, st.params, st.adam, st.rng_state = epoch+1, params, opt.state, rng.bit_generator.state
    t.set_description(f"loss {rec['loss']:.4f}" + (f" recall@{cfg.eval_k} {rec[f'recall@{cfg.eval_k}']:.4f}" if do_eval else ""))
    if do_eval and st.bad_evals >= cfg.patience:
      st.stopped = True
    if on_epoch is not None: on_epoch(model, st)
    if st.stopped:
      if DEBUG >= 1: print(f"early stop at epoch {epoch}, best recall@{cfg.eval_k} {st.best:.4f} at epoch {st.best_epoch}")
      break

  if st.best_params is not None:
    # the state keeps the last iterate for resuming, the model gets the best one
    st.params = [p.copy() for p in params]
    for p, b in zip(params, st.best_params): p[...] = b
  return TrainResult(model, model.embeddings(), st.history, st)

def param_count(variant:str, h:int, d:int, num_nodes:int, hidden:Sequence[int]=(), bias:bool=False) -> int:
  if variant in COUPLED: return num_nodes * d
  sizes = [h, *hidden, d]
  return sum(i*o + (o if bias else 0) for i,o in zip(sizes[:-1], sizes[1:]))


# *** precompute ***

@dataclass(frozen=True)
class PrecomputeSpec:
  L: int = 3
  a: float = 1.0
  b: float = 1.0
  q: int = 5
  weights: Optional[Tuple[float, ...]] = None
  features: Literal["random", "identity"] = "random"
  oversample: int = 10
  power_iters: int = 4

  def __post_init__(self):
    if self.L < 0: raise ValueError(f"L must be >= 0, got {self.L}")
    if self.q < 1: raise ValueError(f"q must be positive, got {self.q}")
    if self.features not in ("random", "identity"): raise ValueError(f"unknown features {self.features}")
    if self.weights is not None: layer_weights(self.L, self.weights)

@dataclass
class Precomputed:
  inputs: ModelInputs
  features: Optional[FeatureMatrix]
  svd: Optional[SvdFactors]

def precompute_inputs(variant:str, train_R:InteractionMatrix, fspec:RandomMatrixSpec, pspec:PrecomputeSpec, seed:int=0) -> Precomputed:
  if variant not in VARIANTS: raise ValueError(f"unknown variant {variant}, expected one of {VARIANTS}")
  P = normalize_adjacency(build_adjacency(train_R))
  inputs = ModelInputs(train_R.num_users, train_R.num_items, P=P, L=pspec.L, weights=pspec.weights, a=pspec.a, b=pspec.b)
  svd = None
  if variant in ("lighter_gcl", "coupled_lightgcl"):
    svd = truncated_svd(train_R.interactions, pspec.q, pspec.oversample, pspec.power_iters, seed)
    inputs.Phat = perturbed_adjacency(svd)
  if variant in COUPLED: return Precomputed(inputs, None, svd)
  feats = gen_feat(train_R, fspec) if pspec.features == "random" else identity_features(train_R.num_users, train_R.num_items)
  X = feats.data
  if variant == "lighter_gcn": inputs.Z = propagate(P, X, pspec.L, pspec.weights).Z
  elif variant == "lighter_jgcf": inputs.Z, inputs.X = jacobi_propagate(P, X, pspec.L, pspec.a, pspec.b, pspec.weights).Z, X
  else:
    assert inputs.Phat is not None
    plain, pert = propagate_with_perturbation(P, inputs.Phat, X, pspec.L, pspec.weights)
    inputs.Z, inputs.Zhat = plain.Z, pert.Z
  return Precomputed(inputs, feats, svd)
