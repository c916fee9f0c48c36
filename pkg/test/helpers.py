import numpy as np
from scipy import stats
from lighterx.data import InteractionMatrix

def random_R(nu:int, ni:int, p:float, seed:int) -> InteractionMatrix:
  """Bernoulli(p) interactions, every user gets at least one item."""
  rng = np.random.default_rng(seed)
  M = rng.random((nu, ni)) < p
  M[np.arange(nu), rng.integers(ni, size=nu)] = True
  us, its = np.nonzero(M)
  return InteractionMatrix.from_pairs(us, its, nu, ni)

def dense_P(R:InteractionMatrix) -> np.ndarray:
  Rd = R.interactions.toarray()
  A = np.block([[np.zeros((R.num_users,)*2), Rd], [Rd.T, np.zeros((R.num_items,)*2)]])
  d = A.sum(1)
  dinv = np.where(d > 0, 1/np.sqrt(np.where(d > 0, d, 1)), 0)
  return dinv[:,None] * A * dinv[None,:]

def ks_pvalue(samples:np.ndarray, dist:str, *args) -> float:
  """Kolmogorov-Smirnov p-value of the flattened samples against a scipy.stats distribution."""
  return float(stats.kstest(np.ravel(samples), dist, args=args).pvalue)
