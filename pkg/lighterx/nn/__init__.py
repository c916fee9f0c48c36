from __future__ import annotations
import math
from typing import Optional, List, Tuple, Literal
import numpy as np
from lighterx.helpers import prod
from lighterx.nn import optim, state, loss  # noqa: F401

Activation = Literal["none", "tanh", "relu"]
Init = Literal["xavier", "gaussian"]

# https://www.tensorflow.org/api_docs/python/tf/keras/initializers/GlorotUniform
def glorot_uniform(rng:np.random.Generator, *shape, dtype=np.float64) -> np.ndarray:
  return rng.uniform(-1.0, 1.0, size=shape).astype(dtype) * (6/(shape[0]+prod(shape[1:])))**0.5
# same variance as glorot_uniform
def glorot_normal(rng:np.random.Generator, *shape, dtype=np.float64) -> np.ndarray:
  return rng.standard_normal(size=shape).astype(dtype) * (2/(shape[0]+prod(shape[1:])))**0.5

def init_weight(rng:np.random.Generator, in_features:int, out_features:int, init:Init="xavier", dtype=np.float64) -> np.ndarray:
  if init == "xavier": return glorot_uniform(rng, in_features, out_features, dtype=dtype)
  if init == "gaussian": return glorot_normal(rng, in_features, out_features, dtype=dtype)
  raise ValueError(f"unknown init {init}")

class Linear:
  def __init__(self, in_features:int, out_features:int, bias=False, init:Init="xavier", rng:Optional[np.random.Generator]=None, dtype=np.float64):
    rng = rng if rng is not None else np.random.default_rng(0)
    # stored in x out so that the forward is x @ weight
    self.weight = init_weight(rng, in_features, out_features, init, dtype)
    self.bias: Optional[np.ndarray] = np.zeros(out_features, dtype=dtype) if bias else None

  def __call__(self, x:np.ndarray) -> np.ndarray:
    if x.shape[-1] != self.weight.shape[0]: raise ValueError(f"linear expects {self.weight.shape[0]} input columns, got {x.shape[-1]}")
    return x @ self.weight if self.bias is None else x @ self.weight + self.bias

  def backward(self, x:np.ndarray, grad:np.ndarray, input_grad=True) -> Tuple[Optional[np.ndarray], List[np.ndarray]]:
    grads = [x.T @ grad] + ([grad.sum(axis=0)] if self.bias is not None else [])
    return (grad @ self.weight.T if input_grad else None), grads

  def parameters(self) -> List[np.ndarray]: return [self.weight] + ([self.bias] if self.bias is not None else [])

class MLP:
  """Linear layers with an activation between them. One layer without bias is the plain h x d projection."""
  def __init__(self, sizes:List[int], activation:Activation="none", bias=False, init:Init="xavier", rng:Optional[np.random.Generator]=None,
               dtype=np.float64):
    assert len(sizes) >= 2, f"MLP needs an input and an output size, got {sizes}"
    if activation not in ("none", "tanh", "relu"): raise ValueError(f"unknown activation {activation}")
    rng = rng if rng is not None else np.random.default_rng(0)
    self.layers = [Linear(i, o, bias, init, rng, dtype) for i,o in zip(sizes[:-1], sizes[1:])]
    self.activation = activation

  @property
  def in_features(self) -> int: return self.layers[0].weight.shape[0]
  @property
  def out_features(self) -> int: return self.layers[-1].weight.shape[1]

  def _act(self, x:np.ndarray) -> np.ndarray:
    if self.activation == "tanh": return np.tanh(x)
    if self.activation == "relu": return np.maximum(x, 0)
    return x
  def _act_grad(self, y:np.ndarray, grad:np.ndarray) -> np.ndarray:
    if self.activation == "tanh": return grad * (1 - y*y)
    if self.activation == "relu": return grad * (y > 0)
    return grad

  def forward(self, x:np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    tape = [x]
    for i,l in enumerate(self.layers):
      x = l(x)
      if i != len(self.layers)-1: x = self._act(x)
      tape.append(x)
    return x, tape
  def __call__(self, x:np.ndarray) -> np.ndarray: return self.forward(x)[0]

  def backward(self, tape:List[np.ndarray], grad:np.ndarray, input_grad=True) -> Tuple[Optional[np.ndarray], List[np.ndarray]]:
    """Parameter gradients, plus the input gradient unless input_grad is False."""
    grads: List[List[np.ndarray]] = []
    gx: Optional[np.ndarray] = grad
    for i in reversed(range(len(self.layers))):
      assert gx is not None
      if i != len(self.layers)-1: gx = self._act_grad(tape[i+1], gx)
      gx, g = self.layers[i].backward(tape[i], gx, input_grad or i != 0)
      grads.insert(0, g)
    return gx, [x for g in grads for x in g]

  def parameters(self) -> List[np.ndarray]: return [p for l in self.layers for p in l.parameters()]
  def num_params(self) -> int: return sum(p.size for p in self.parameters())
  def layer_shapes(self) -> List[Tuple[int, int, bool]]: return [(*l.weight.shape, l.bias is not None) for l in self.layers]

def mlp_forward(Z_rows:np.ndarray, params:MLP) -> np.ndarray: return params(Z_rows)
