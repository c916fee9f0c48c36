from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from typing import Union
import numpy as np
import scipy.sparse as sp
from lighterx.helpers import THREADS, DEBUG, array_hash
from lighterx.data import InteractionMatrix

# CSR, rows sorted, no explicit zeros, double precision
SparseMatrix = sp.csr_matrix

def check_csr(M:SparseMatrix) -> SparseMatrix:
  assert sp.isspmatrix_csr(M), f"expected CSR, got {type(M).__name__}"
  rows, cols = M.shape
  assert len(M.indptr) == rows+1 and M.indptr[0] == 0 and M.indptr[-1] == M.nnz, "row_ptr must have rows+1 entries ending at nnz"
  assert np.all(np.diff(M.indptr) >= 0), "row_ptr must be nondecreasing"
  assert M.nnz == 0 or (M.indices.min() >= 0 and M.indices.max() < cols), "column index out of range"
  assert M.has_sorted_indices, "column indices must be sorted within each row"
  assert np.all(M.data != 0), "explicit zeros stored"
  return M

def _canonical(M) -> SparseMatrix:
  M = sp.csr_matrix(M, dtype=np.float64)
  M.sum_duplicates()
  M.eliminate_zeros()
  M.sort_indices()
  return M

def build_adjacency(R:InteractionMatrix) -> SparseMatrix:
  assert R.nnz > 0, "can't build a graph without interactions"
  Rm = R.interactions
  # users take indices 0..|U|, items |U|..n
  return check_csr(_canonical(sp.bmat([[None, Rm], [Rm.T, None]], format="csr")))

def inv_sqrt(deg:np.ndarray) -> np.ndarray:
  # 0^-1/2 is taken as 0, isolated nodes keep all zero rows and columns
  out = np.zeros_like(deg, dtype=np.float64)
  np.power(deg.astype(np.float64), -0.5, out=out, where=deg > 0)
  return out

def normalize_adjacency(A:SparseMatrix) -> SparseMatrix:
  if A.shape[0] != A.shape[1]: raise ValueError(f"adjacency must be square, got {A.shape}")
  assert A.nnz == 0 or A.data.min() >= 0, "adjacency must be nonnegative"
  d = inv_sqrt(np.asarray(A.sum(axis=1)).ravel())
  if DEBUG >= 2: print(f"normalize_adjacency: {A.shape[0]} nodes, {int((d == 0).sum())} isolated")
  return check_csr(_canonical(sp.diags(d) @ A @ sp.diags(d)))

def bipartite_normalize(R:InteractionMatrix) -> SparseMatrix:
  du, di = R.degrees()
  return check_csr(_canonical(sp.diags(inv_sqrt(du)) @ R.interactions @ sp.diags(inv_sqrt(di))))

def spmm(M:SparseMatrix, X:np.ndarray) -> np.ndarray:
  if M.shape[1] != X.shape[0]: raise ValueError(f"spmm shape mismatch {M.shape} @ {X.shape}")
  if (threads := THREADS.value) <= 1 or M.shape[0] < 2*threads: return np.asarray(M @ X)
  # each output row depends only on its own CSR row, the chunks are independent
  bounds = np.linspace(0, M.shape[0], threads+1, dtype=np.int64)
  out = np.empty((M.shape[0],)+X.shape[1:], dtype=np.result_type(M.dtype, X.dtype))
  def run(k:int):
    lo, hi = bounds[k], bounds[k+1]
    out[lo:hi] = M[lo:hi] @ X
  with ThreadPoolExecutor(threads) as pool: list(pool.map(run, range(threads)))
  return out

def matrix_hash(M:Union[SparseMatrix, np.ndarray]) -> str:
  if sp.issparse(M):
    M = sp.csr_matrix(M)
    return array_hash(np.array(M.shape), M.indptr, M.indices, M.data)
  return array_hash(M)
