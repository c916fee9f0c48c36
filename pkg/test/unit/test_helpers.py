import unittest, pathlib, tempfile, time
import numpy as np
from lighterx.helpers import Context, ContextVar, THREADS, Timing, prod, dedup, seed_stream, array_hash, file_hash, crc32, fetch, fmt_table

VARIABLE = ContextVar("VARIABLE", 0)

class TestContextVars(unittest.TestCase):
  # Ensuring that the test does not modify variables outside the tests.
  ctx = Context()
  def setUp(self): TestContextVars.ctx.__enter__()
  def tearDown(self): TestContextVars.ctx.__exit__()

  def test_initial_value_is_set(self):
    _TMP = ContextVar("_TMP", 5)
    self.assertEqual(_TMP.value, 5)

  def test_multiple_creation_ignored(self):
    _TMP2 = ContextVar("_TMP2", 1)
    _TMP2 = ContextVar("_TMP2", 2)
    self.assertEqual(_TMP2.value, 1)

  def test_value_accross_modules(self):
    exec('from lighterx.helpers import ContextVar;C = ContextVar("C", 13)', {}) # pylint:disable=exec-used
    C = ContextVar("C", 0)
    self.assertEqual(C.value, 13)

  def test_context_assignment(self):
    with Context(VARIABLE=1):
      self.assertEqual(VARIABLE.value, 1)
    self.assertEqual(VARIABLE.value, 0)

  def test_unknown_param_to_context(self):
    with self.assertRaises(KeyError):
      with Context(SOMETHING_ELSE=1):
        pass

  def test_nested_context(self):
    with Context(VARIABLE=1):
      with Context(VARIABLE=2):
        self.assertEqual(VARIABLE.value, 2)
      self.assertEqual(VARIABLE.value, 1)
    self.assertEqual(VARIABLE.value, 0)

  def test_threads_decorator(self):
    @Context(THREADS=4)
    def inner(): return THREADS.value
    before = THREADS.value
    self.assertEqual(inner(), 4)
    self.assertEqual(THREADS.value, before)

  def test_context_exit_reverts_updated_values(self):
    D = ContextVar("D", 1)
    D.value = 2
    with Context(D=3):
      ...
    self.assertEqual(D.value, 2)

class TestProd(unittest.TestCase):
  def test_empty(self): self.assertEqual(1, prod(tuple()))
  def test_ints(self): self.assertEqual(30, prod((2, 3, 5)))

class TestDedup(unittest.TestCase):
  def test_order(self): self.assertEqual(dedup([3, 1, 3, 2, 1]), [3, 1, 2])

class TestSeedStream(unittest.TestCase):
  def test_reproducible(self):
    np.testing.assert_array_equal(seed_stream(7, "split").random(5), seed_stream(7, "split").random(5))

  def test_streams_differ(self):
    self.assertFalse(np.array_equal(seed_stream(7, "split").random(5), seed_stream(7, "init").random(5)))
    self.assertFalse(np.array_equal(seed_stream(7, "split").random(5), seed_stream(8, "split").random(5)))

  def test_unknown_purpose(self):
    with self.assertRaises(AssertionError): seed_stream(0, "dropout")

class TestHashing(unittest.TestCase):
  def test_array_hash_sees_dtype_and_shape(self):
    a = np.arange(6, dtype=np.float32)
    self.assertEqual(array_hash(a), array_hash(a.copy()))
    self.assertNotEqual(array_hash(a), array_hash(a.astype(np.float64)))
    self.assertNotEqual(array_hash(a), array_hash(a.reshape(2, 3)))

  def test_array_hash_noncontiguous(self):
    a = np.arange(12, dtype=np.int64).reshape(3, 4)
    self.assertEqual(array_hash(a.T), array_hash(np.ascontiguousarray(a.T)))

  def test_crc32(self):
    # standard check value
    self.assertEqual(crc32(b"123456789"), 0xcbf43926)

  def test_file_hash(self):
    with tempfile.TemporaryDirectory() as d:
      fn = pathlib.Path(d) / "a.txt"
      fn.write_bytes(b"0 1\n")
      h = file_hash(fn)
      fn.write_bytes(b"0 2\n")
      self.assertNotEqual(file_hash(fn), h)

class TestTiming(unittest.TestCase):
  def test_seconds(self):
    with Timing(enabled=False) as t: time.sleep(0.01)
    self.assertGreaterEqual(t.seconds, 0.005)
    self.assertLess(t.seconds, 5)

class TestFetch(unittest.TestCase):
  def test_local_path(self):
    with tempfile.TemporaryDirectory() as d:
      fn = pathlib.Path(d) / "ratings.txt"
      fn.write_text("0 0\n")
      self.assertEqual(fetch(str(fn)), fn)

class TestFmtTable(unittest.TestCase):
  def test_aligned(self):
    out = fmt_table([("recall@20", 0.5), ("ndcg@20", 0.25)], ("metric", "value"))
    lines = out.split("\n")
    self.assertEqual(len(lines), 3)
    self.assertEqual(len(set(len(l) for l in lines)), 1)
    self.assertIn("0.500000", lines[1])

if __name__ == '__main__':
  unittest.main()
