from typing import Tuple
import numpy as np
from scipy.special import expit, logsumexp, softmax

def bpr_loss(e_u:np.ndarray, e_i:np.ndarray, e_neg:np.ndarray) -> Tuple[float, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
  """-ln sigmoid(e_u.e_i - e_u.e_neg), averaged over rows for b x d inputs. Returns the loss and its gradients."""
  if not e_u.shape == e_i.shape == e_neg.shape: raise ValueError(f"bpr shapes differ {e_u.shape} {e_i.shape} {e_neg.shape}")
  diff = e_i - e_neg
  x = np.sum(e_u * diff, axis=-1)
  b = 1 if x.ndim == 0 else x.shape[0]
  # softplus(-x), stable for large |x|
  loss = float(np.mean(np.logaddexp(0.0, -x)))
  dx = (-expit(-x) / b)[..., None] if x.ndim else -expit(-x)
  return loss, (dx * diff, dx * e_u, -dx * e_u)

def infonce_loss(E:np.ndarray, Ehat:np.ndarray, temp:float) -> Tuple[float, Tuple[np.ndarray, np.ndarray]]:
  """In-batch InfoNCE between two views, row i of E is positive with row i of Ehat and negative with every other row."""
  if E.shape != Ehat.shape or E.ndim != 2: raise ValueError(f"infonce expects matching b x d views, got {E.shape} {Ehat.shape}")
  if temp <= 0: raise ValueError(f"temperature must be positive, got {temp}")
  b = E.shape[0]
  S = (E @ Ehat.T) / temp
  loss = float(np.mean(logsumexp(S, axis=1) - np.diag(S)))
  G = softmax(S, axis=1)
  G[np.diag_indices(b)] -= 1
  G /= b * temp
  return loss, (G @ Ehat, G.T @ E)
