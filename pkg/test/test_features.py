import math, unittest
import numpy as np
import scipy.sparse as sp
from lighterx.data import InteractionMatrix
from lighterx.features import RandomMatrixSpec, compute_h, gen_random_matrix, gen_feat, identity_features, rip_check
from lighterx.graph import bipartite_normalize
from lighterx.helpers import NumericError
from test.helpers import random_R, ks_pvalue

class TestComputeH(unittest.TestCase):
  def test_formula(self):
    self.assertEqual(compute_h(1000, 500, 5000, 2), 93)
    self.assertEqual(compute_h(1000, 500, 5000, 1), math.ceil(10*math.log(100)))

  def test_dense_fails(self):
    with self.assertRaises(NumericError) as cm: compute_h(50, 60, 50*60, 1)
    self.assertIn("sparsity exceeds signal dimension", str(cm.exception))

  def test_sparse_clamps(self):
    # r = 0.5 is clamped to 1
    self.assertEqual(compute_h(100, 10, 5, 1), math.ceil(math.log(100)))

  def test_bad_inputs(self):
    with self.assertRaises(NumericError): compute_h(100, 0, 5, 1)
    with self.assertRaises(NumericError): compute_h(100, 10, 0, 1)

  def test_monotone(self):
    for n in (200, 400, 800):
      hs = [compute_h(n, 50, nnz, c) for c in (1, 2, 3) for nnz in (100, 200, 400)]
      self.assertEqual(hs[:3], sorted(hs[:3]))
      self.assertLessEqual(compute_h(n, 50, 400, 1), compute_h(n, 50, 400, 2))
      self.assertLessEqual(compute_h(n, 50, 400, 1), compute_h(2*n, 50, 400, 1))

class TestRandomMatrix(unittest.TestCase):
  def test_bernoulli_support(self):
    S = gen_random_matrix(16, 40, RandomMatrixSpec())
    np.testing.assert_allclose(np.abs(S), 1/4)
    self.assertTrue(np.all(np.abs(gen_random_matrix(16, 40, RandomMatrixSpec(normalize=False))) == 1))

  def test_gaussian_moments(self):
    rows = 25
    S = gen_random_matrix(rows, 400, RandomMatrixSpec("gaussian", seed=3))
    sigma = math.sqrt(1/rows)
    self.assertLess(abs(S.mean()), 3*sigma/math.sqrt(S.size))
    self.assertLess(abs(S.var() - 1/rows), 0.1/rows)

  def test_entry_distributions(self):
    rows = 25
    S = gen_random_matrix(rows, 200, RandomMatrixSpec("gaussian", seed=5))
    self.assertGreater(ks_pvalue(S, "norm", 0, 1/math.sqrt(rows)), 1e-3)
    U = gen_random_matrix(rows, 200, RandomMatrixSpec("uniform", seed=6))
    # uniform on [-sqrt(3/rows), sqrt(3/rows)], scipy takes (loc, scale)
    half = math.sqrt(3/rows)
    self.assertGreater(ks_pvalue(U, "uniform", -half, 2*half), 1e-3)
    self.assertLess(ks_pvalue(U, "norm", 0, 1/math.sqrt(rows)), 1e-3)

  def test_uniform_and_orthogonal_variance(self):
    for dist in ("uniform", "orthogonal"):
      S = gen_random_matrix(50, 200, RandomMatrixSpec(dist, seed=1))
      self.assertLess(abs((S*S).mean() - 1/50), 0.1/50, dist)
    Q = gen_random_matrix(20, 20, RandomMatrixSpec("orthogonal", normalize=False))
    np.testing.assert_allclose(Q.T @ Q / 20, np.eye(20), atol=1e-10)

  def test_deterministic(self):
    spec = RandomMatrixSpec("gaussian", seed=11)
    np.testing.assert_array_equal(gen_random_matrix(8, 9, spec), gen_random_matrix(8, 9, spec))
    self.assertFalse(np.array_equal(gen_random_matrix(8, 9, spec), gen_random_matrix(8, 9, RandomMatrixSpec("gaussian", seed=12))))

  def test_spec_validation(self):
    with self.assertRaises(ValueError): RandomMatrixSpec("cauchy")
    with self.assertRaises(ValueError): RandomMatrixSpec(c=0.5)
    with self.assertRaises(ValueError): RandomMatrixSpec(h=(3, 0))

class TestGenFeat(unittest.TestCase):
  def test_single_edge(self):
    R = InteractionMatrix.from_pairs(np.array([0]), np.array([0]), 1, 1)
    F = gen_feat(R, RandomMatrixSpec(h=(1, 1)))
    np.testing.assert_allclose(np.abs(F.data), [[1, 0], [0, 1]])

  def test_block_structure(self):
    R = random_R(60, 80, 0.05, 0)
    F = gen_feat(R, RandomMatrixSpec(seed=2))
    self.assertEqual(F.shape, (140, F.h_user + F.h_item))
    np.testing.assert_array_equal(F.data[:60, F.h_user:], 0)
    np.testing.assert_array_equal(F.data[60:, :F.h_user], 0)
    self.assertLess(F.h, 140)
    B = bipartite_normalize(R)
    self.assertEqual(F.h_user, compute_h(80, 60, B.nnz, 1.0))
    self.assertEqual(F.h_item, compute_h(60, 80, B.nnz, 1.0))

  def test_deterministic_and_finite(self):
    R = random_R(30, 40, 0.08, 5)
    a, b = gen_feat(R, RandomMatrixSpec(seed=4)), gen_feat(R, RandomMatrixSpec(seed=4))
    np.testing.assert_array_equal(a.data, b.data)
    self.assertTrue(np.all(np.isfinite(a.data)))

  def test_width_must_stay_below_n(self):
    # every user saw every item, r = n
    R = InteractionMatrix.from_pairs(np.repeat(np.arange(6), 6), np.tile(np.arange(6), 6), 6, 6)
    with self.assertRaises(NumericError): gen_feat(R, RandomMatrixSpec())

  def test_quantile_estimator(self):
    R = random_R(60, 80, 0.05, 0)
    F = gen_feat(R, RandomMatrixSpec(sparsity="quantile", quantile=0.9))
    self.assertGreater(F.h, 0)

  def test_identity(self):
    F = identity_features(3, 4)
    np.testing.assert_array_equal(F.data, np.eye(7))
    self.assertEqual((F.h_user, F.h_item), (3, 4))

class TestRip(unittest.TestCase):
  def test_identity_and_zero(self):
    B = bipartite_normalize(random_R(30, 20, 0.2, 0))
    rep = rip_check(np.eye(20), B, 0.1, 50)
    self.assertEqual(rep.pass_fraction, 1.0)
    self.assertAlmostEqual(rep.worst_ratio, 1.0)
    self.assertEqual(rip_check(np.zeros((5, 20)), B, 0.5, 50).pass_fraction, 0.0)

  def test_zero_rows_are_skipped(self):
    B = sp.csr_matrix(np.array([[0., 0.], [1., 0.], [0., 2.]]))
    rep = rip_check(np.eye(2), B, 0.1, 3)
    self.assertEqual((rep.checked, rep.pass_fraction), (2, 1.0))

  def test_gaussian_concentrates(self):
    R = random_R(300, 1000, 0.01, 1)
    B = bipartite_normalize(R)
    h = compute_h(1000, 300, B.nnz, 4)
    S = gen_random_matrix(h, 1000, RandomMatrixSpec("gaussian", seed=0))
    rep = rip_check(S, B, 0.5, 1000)
    self.assertGreaterEqual(rep.pass_fraction, 0.95)
    self.assertLess(abs(rep.mean_ratio - 1), 0.05)

  def test_bad_shape(self):
    with self.assertRaises(ValueError): rip_check(np.eye(3), sp.csr_matrix(np.eye(4)), 0.5, 4)

if __name__ == '__main__':
  unittest.main()
