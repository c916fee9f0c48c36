import unittest
from fractions import Fraction
import numpy as np
import scipy.sparse as sp
from scipy import special
from lighterx.graph import build_adjacency, normalize_adjacency
from lighterx.propagation import layer_weights, propagate, jacobi_theta, jacobi_propagate, truncated_svd, perturbed_adjacency
from lighterx.propagation import perturbed_propagate, propagate_with_perturbation, SvdFactors
from lighterx.helpers import NumericError
from test.helpers import random_R, dense_P

def graph(nu, ni, p, seed):
  R = random_R(nu, ni, p, seed)
  return R, normalize_adjacency(build_adjacency(R))

def jacobi_dense(P:np.ndarray, L:int, a:float, b:float):
  # the same three term recurrence on dense matrices, written out independently
  I = np.eye(len(P))
  J = [I, (a-b)/2*I + (a+b+2)/2*P]
  for l in range(2, L+1):
    c = 2*l+a+b
    t = c*(c-1)/(2*l*(l+a+b))
    tp = (c-1)*(a*a-b*b)/(2*l*(l+a+b)*(c-2))
    tpp = (l+a-1)*(l+b-1)*c/(l*(l+a+b)*(c-2))
    J.append(t*P@J[-1] + tp*J[-1] - tpp*J[-2])
  return J

class TestPropagate(unittest.TestCase):
  def test_default_weights(self):
    self.assertEqual(layer_weights(3), (0.25,)*4)
    with self.assertRaises(ValueError): layer_weights(2, [1.0, 1.0])
    with self.assertRaises(ValueError): layer_weights(-1)

  def test_zero_layers(self):
    _, P = graph(5, 6, 0.3, 0)
    X = np.random.default_rng(0).standard_normal((11, 3))
    np.testing.assert_array_equal(propagate(P, X, 0, [2.0]).Z, 2*X)

  def test_identity_one_layer(self):
    _, P = graph(5, 6, 0.3, 1)
    np.testing.assert_allclose(propagate(P, np.eye(11), 1).Z, (np.eye(11) + P.toarray())/2, atol=1e-15)

  def test_dense_powers(self):
    R, P = graph(12, 18, 0.2, 2)
    Pd = dense_P(R)
    X = np.random.default_rng(1).standard_normal((30, 7))
    w = [0.1, 0.2, 0.3, 0.4]
    ref = sum(wl * np.linalg.matrix_power(Pd, l) @ X for l,wl in enumerate(w))
    res = propagate(P, X, 3, w)
    np.testing.assert_allclose(res.Z, ref, atol=1e-10)
    self.assertEqual((res.kind, res.L, res.layer_weights), ("plain", 3, tuple(w)))

  def test_deterministic(self):
    _, P = graph(20, 20, 0.2, 3)
    X = np.random.default_rng(2).standard_normal((40, 5))
    np.testing.assert_array_equal(propagate(P, X, 3).Z, propagate(P, X, 3).Z)

  def test_mismatch(self):
    _, P = graph(4, 4, 0.5, 0)
    with self.assertRaises(ValueError): propagate(P, np.ones((7, 2)), 2)

class TestJacobi(unittest.TestCase):
  def test_legendre(self):
    np.testing.assert_allclose(jacobi_theta(2, 0, 0), (1.5, 0.0, 0.5))

  def test_exact_rational(self):
    a, b = Fraction(2), Fraction(11, 10)
    for l in range(2, 6):
      c = 2*l+a+b
      ref = (c*(c-1)/(2*l*(l+a+b)), (c-1)*(a*a-b*b)/(2*l*(l+a+b)*(c-2)), (l+a-1)*(l+b-1)*c/(l*(l+a+b)*(c-2)))
      np.testing.assert_allclose(jacobi_theta(l, 2.0, 1.1), [float(x) for x in ref], rtol=1e-15)

  def test_symmetric_middle_term(self):
    for l in range(2, 6): self.assertEqual(jacobi_theta(l, 0.7, 0.7)[1], 0.0)

  def test_degenerate(self):
    with self.assertRaises(NumericError): jacobi_theta(2, -1.0, -1.0)
    with self.assertRaises(ValueError): jacobi_theta(1, 1, 1)

  def test_scalar_graph(self):
    x = 0.3
    P = sp.csr_matrix(np.array([[x]]))
    res = jacobi_propagate(P, np.ones((1, 1)), 2, 0, 0, [0, 0, 1])
    np.testing.assert_allclose(res.Z, [[1.5*x*x - 0.5]])
    self.assertEqual(res.params, {"a": 0, "b": 0})

  def test_first_order_is_one_hop(self):
    _, P = graph(8, 9, 0.3, 4)
    X = np.random.default_rng(3).standard_normal((17, 4))
    np.testing.assert_allclose(jacobi_propagate(P, X, 1, 0, 0, [0, 1]).Z, P @ X, atol=1e-14)
    np.testing.assert_array_equal(jacobi_propagate(P, X, 0, 1, 1, [1]).Z, X)

  def test_dense_polynomial(self):
    R, P = graph(8, 12, 0.25, 5)
    Pd = dense_P(R)
    X = np.random.default_rng(4).standard_normal((20, 3))
    J = jacobi_dense(Pd, 4, 1.0, 0.6)
    ref = sum(Jl @ X for Jl in J) / 5
    np.testing.assert_allclose(jacobi_propagate(P, X, 4, 1.0, 0.6).Z, ref, atol=1e-9)

  def test_legendre_spectral(self):
    # a = b = 0 gives Legendre polynomials of the eigenvalues
    for seed in range(5):
      R, P = graph(8, 12, 0.2, 10 + seed)
      lam, V = np.linalg.eigh(dense_P(R))
      X = np.random.default_rng(seed).standard_normal((20, 3))
      for L in range(1, 6):
        for l in range(L+1):
          w = [0.0]*(L+1)
          w[l] = 1.0
          ref = V @ np.diag(special.eval_legendre(l, lam)) @ V.T @ X
          np.testing.assert_allclose(jacobi_propagate(P, X, L, 0, 0, w).Z, ref, atol=1e-9, err_msg=f"seed {seed} L={L} l={l}")

  def test_high_precision_polynomial(self):
    # diagonal operator, each entry is the polynomial evaluated at that point
    xs = np.array([-1.0, -0.83, -0.4, 0.0, 0.15, 0.5, 0.91, 1.0])
    P = sp.diags(xs, format="csr")
    a, b = Fraction(2.0), Fraction(1.1)
    for row, x in enumerate(xs):
      fx = Fraction(x)
      J = [Fraction(1), (a-b)/2 + (a+b+2)/2*fx]
      for l in range(2, 6):
        c = 2*l+a+b
        J.append(c*(c-1)/(2*l*(l+a+b))*fx*J[-1] + (c-1)*(a*a-b*b)/(2*l*(l+a+b)*(c-2))*J[-1] - (l+a-1)*(l+b-1)*c/(l*(l+a+b)*(c-2))*J[-2])
      for l in range(6):
        w = [0.0]*6
        w[l] = 1.0
        got = jacobi_propagate(P, np.ones((len(xs), 1)), 5, 2.0, 1.1, w).Z[row, 0]
        np.testing.assert_allclose(got, float(J[l]), rtol=1e-8, atol=1e-12, err_msg=f"x={x} l={l}")
        np.testing.assert_allclose(got, special.eval_jacobi(l, 2.0, 1.1, x), rtol=1e-8, atol=1e-12)

class TestSvd(unittest.TestCase):
  def test_identity(self):
    np.testing.assert_allclose(truncated_svd(np.eye(3), 2).s, [1, 1], atol=1e-12)

  def test_rank_one(self):
    f = truncated_svd(np.array([[2., 0.], [0., 0.]]), 1)
    np.testing.assert_allclose(f.s, [2])
    np.testing.assert_allclose((f.U * f.s) @ f.V.T, [[2, 0], [0, 0]], atol=1e-12)

  def test_matches_dense(self):
    # five planted communities over light noise, a clear gap after the fifth singular value
    rng = np.random.default_rng(6)
    Rd = (rng.random((100, 80)) < 0.02).astype(np.float64)
    for g in range(5): Rd[20*g:20*g+20, 16*g:16*g+16] = rng.random((20, 16)) < 0.8
    f = truncated_svd(sp.csr_matrix(Rd), 5, power_iters=8, seed=3)
    Ud, sd, Vtd = np.linalg.svd(Rd)
    np.testing.assert_allclose(f.s, sd[:5], rtol=1e-6)
    np.testing.assert_allclose(f.U.T @ f.U, np.eye(5), atol=1e-8)
    np.testing.assert_allclose(f.V.T @ f.V, np.eye(5), atol=1e-8)
    self.assertTrue(np.all(np.diff(f.s) <= 0))
    best = np.linalg.norm(Rd - (Ud[:, :5] * sd[:5]) @ Vtd[:5])
    self.assertLessEqual(np.linalg.norm(Rd - (f.U * f.s) @ f.V.T), 1.05 * best)

  def test_q_out_of_range(self):
    with self.assertRaises(ValueError): truncated_svd(np.eye(3), 4)
    with self.assertRaises(ValueError): truncated_svd(np.eye(3), 0)

  def test_seeded(self):
    R = random_R(30, 20, 0.2, 7).interactions
    a, b = truncated_svd(R, 4, seed=1), truncated_svd(R, 4, seed=1)
    np.testing.assert_array_equal(a.U, b.U)

class TestPerturbed(unittest.TestCase):
  def setUp(self):
    self.R, self.P = graph(15, 12, 0.25, 8)
    self.full = perturbed_adjacency(truncated_svd(self.R.interactions, 12))

  def test_full_rank_is_P(self):
    x = np.random.default_rng(5).standard_normal((27, 3))
    np.testing.assert_allclose(self.full @ x, self.P @ x, atol=1e-6)
    np.testing.assert_allclose(self.full.to_dense(), self.P.toarray(), atol=1e-6)

  def test_symmetric(self):
    Phat = perturbed_adjacency(truncated_svd(self.R.interactions, 3))
    rng = np.random.default_rng(6)
    x, y = rng.standard_normal(27), rng.standard_normal(27)
    self.assertAlmostEqual(float((Phat @ x) @ y), float(x @ (Phat @ y)), delta=1e-8)

  def test_zero_degree_row(self):
    f = SvdFactors(np.array([[1.0], [0.0]]), np.array([1.0]), np.array([[1.0]]))
    Phat = perturbed_adjacency(f)
    D = Phat.to_dense()
    np.testing.assert_array_equal(D[1], 0)
    self.assertTrue(np.all(np.isfinite(D)))

  def test_perturbed_layers(self):
    X = np.random.default_rng(7).standard_normal((27, 4))
    np.testing.assert_array_equal(perturbed_propagate(self.full, self.P, X, 0, [1.0]).Z, X)
    # one hop through a full rank perturbation is one hop through P
    np.testing.assert_allclose(perturbed_propagate(self.full, self.P, X, 1, [0, 1]).Z, self.P @ X, atol=1e-6)
    Phat = perturbed_adjacency(truncated_svd(self.R.interactions, 3))
    plain, pert = propagate_with_perturbation(self.P, Phat, X, 3)
    np.testing.assert_allclose(plain.Z, propagate(self.P, X, 3).Z, atol=1e-14)
    Pd, Hd = self.P.toarray(), Phat.to_dense()
    ref = (X + sum(Hd @ np.linalg.matrix_power(Pd, l-1) @ X for l in range(1, 4))) / 4
    np.testing.assert_allclose(pert.Z, ref, atol=1e-10)
    self.assertEqual((pert.kind, pert.Z.shape, pert.params), ("perturbed", (27, 4), {"q": 3}))

if __name__ == '__main__':
  unittest.main()
