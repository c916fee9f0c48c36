from typing import Callable, Tuple
import numpy as np

def mask_like(like:np.ndarray, mask_inx:int, mask_value:float=1.0) -> np.ndarray:
  mask = np.zeros_like(like, dtype=np.float64).reshape(-1)
  mask[mask_inx] = mask_value
  return mask.reshape(like.shape)

def numerical_jacobian(func:Callable[[np.ndarray], np.ndarray], input:np.ndarray, eps:float=1e-6) -> np.ndarray:
  x = np.asarray(input, dtype=np.float64)
  ji, jo = x.size, np.asarray(func(x)).size
  NJ = np.zeros((jo, ji))
  for i in range(ji):
    eps_perturb = mask_like(x, i, mask_value=eps)
    out_add = np.asarray(func(x + eps_perturb), dtype=np.float64).reshape(-1)
    out_sub = np.asarray(func(x - eps_perturb), dtype=np.float64).reshape(-1)
    NJ[:,i] = (out_add - out_sub) / (2*eps)
  return NJ

def numerical_grad(func:Callable[[np.ndarray], float], input:np.ndarray, eps:float=1e-6) -> np.ndarray:
  """Central difference gradient of a scalar function, same shape as input."""
  return numerical_jacobian(lambda x: np.array([func(x)]), input, eps).reshape(np.shape(input))

def gradcheck(func:Callable[[np.ndarray], Tuple[float, np.ndarray]], input:np.ndarray, eps:float=1e-6, atol:float=1e-6, rtol:float=1e-4) -> bool:
  # func returns (value, analytic gradient)
  _, g = func(np.asarray(input, dtype=np.float64))
  return np.allclose(g, numerical_grad(lambda x: func(x)[0], input, eps), atol=atol, rtol=rtol)
