# numpy parameters updated in place, gradients are passed to step
from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple
import numpy as np

@dataclass
class AdamState:
  t: int = 0
  m: List[np.ndarray] = field(default_factory=list)
  v: List[np.ndarray] = field(default_factory=list)

  @staticmethod
  def zeros(params:Sequence[np.ndarray]) -> AdamState: return AdamState(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])

# https://pytorch.org/docs/stable/generated/torch.optim.Adam.html
def adam_step(params:Sequence[np.ndarray], grads:Sequence[np.ndarray], state:AdamState, lr:float=1e-3, betas:Tuple[float, float]=(0.9, 0.999),
              eps:float=1e-8, weight_decay:float=0.0, decoupled:bool=False) -> AdamState:
  assert len(params) == len(grads) == len(state.m) == len(state.v), "params, grads and optimizer state must line up"
  b1, b2 = betas
  state.t += 1
  for p, g, m, v in zip(params, grads, state.m, state.v):
    assert p.shape == g.shape, f"grad shape {g.shape} != param shape {p.shape}"
    if weight_decay and not decoupled: g = g + weight_decay * p
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    m_hat, v_hat = m / (1.0 - b1**state.t), v / (1.0 - b2**state.t)
    if weight_decay and decoupled: p -= lr * weight_decay * p
    p -= lr * m_hat / (np.sqrt(v_hat) + eps)
  return state

class Optimizer:
  def __init__(self, params:List[np.ndarray], lr:float):
    self.params: List[np.ndarray] = list({id(p):p for p in params}.values())   # arrays are unhashable, dedup by identity
    assert len(self.params) != 0, "optimizer must have at least one param"
    self.lr = lr
  def step(self, grads:Sequence[np.ndarray]) -> None: raise NotImplementedError("implement step")

class Adam(Optimizer):
  def __init__(self, params:List[np.ndarray], lr=0.001, b1=0.9, b2=0.999, eps=1e-8, weight_decay=0.0, decoupled=False):
    super().__init__(params, lr)
    self.b1, self.b2, self.eps, self.wd, self.decoupled = b1, b2, eps, weight_decay, decoupled
    self.state = AdamState.zeros(self.params)

  def step(self, grads:Sequence[np.ndarray]) -> None:
    adam_step(self.params, grads, self.state, self.lr, (self.b1, self.b2), self.eps, self.wd, self.decoupled)

def AdamW(params:List[np.ndarray], lr=0.001, b1=0.9, b2=0.999, eps=1e-8, weight_decay=0.01): return Adam(params, lr, b1, b2, eps, weight_decay, True)
