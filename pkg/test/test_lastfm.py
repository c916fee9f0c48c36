import tempfile, unittest
from lighterx.data import SplitSpec, fetch_dataset, load_interactions, split_per_user, save_split
from lighterx.features import RandomMatrixSpec
from lighterx.model import TrainConfig, PrecomputeSpec, precompute_inputs, train
from lighterx.bench import bench_epoch
from lighterx.eval import evaluate
from lighterx.helpers import getenv

FETCH, SLOW = getenv("FETCH"), getenv("SLOW")

@unittest.skipUnless(FETCH, "set FETCH=1 to download LastFM")
class TestLastFM(unittest.TestCase):
  @classmethod
  def setUpClass(cls):
    path, header = fetch_dataset("lastfm")
    cls.R = load_interactions(path, header=header)
    cls.splits = split_per_user(cls.R, SplitSpec(seed=0))

  def test_statistics(self):
    self.assertEqual((self.R.num_users, self.R.num_items, self.R.nnz), (1892, 17632, 92834))
    with tempfile.TemporaryDirectory() as d:
      manifest = save_split(*self.splits, d, "lastfm", SplitSpec(seed=0))
    self.assertEqual(manifest["sparsity"], 99.72)
    self.assertEqual(manifest["interactions"], 92834)

  @unittest.skipUnless(SLOW, "set SLOW=1 for the full training runs")
  def test_decoupled_matches_coupled(self):
    train_R, valid_R, test_R = self.splits
    cfg, recall, params = TrainConfig(d=64, epochs=100, patience=10, dtype="float32"), {}, {}
    for v in ("lighter_gcn", "coupled_lightgcn"):
      pre = precompute_inputs(v, train_R, RandomMatrixSpec(seed=0), PrecomputeSpec(L=3), 0)
      res = train(v, pre.inputs, cfg, train_R, valid_R, quiet=True)
      recall[v] = evaluate(res.embeddings.E, train_R.num_users, [train_R, valid_R], test_R, ks=(10,), metrics=("recall",))[(10, "recall")]
      params[v] = res.model.num_params()
    self.assertGreaterEqual(recall["lighter_gcn"], 0.17)
    self.assertLessEqual(abs(recall["lighter_gcn"] - recall["coupled_lightgcn"]), 0.02)
    self.assertLess(params["lighter_gcn"], 0.2 * params["coupled_lightgcn"])

  @unittest.skipUnless(SLOW, "set SLOW=1 for the timing runs")
  def test_precompute_amortizes(self):
    cfg = TrainConfig(d=64, batch_size=2048, dtype="float32")
    dec, cpl = bench_epoch("lighter_gcn", self.splits[0], cfg, repetitions=2), bench_epoch("coupled_lightgcn", self.splits[0], cfg, repetitions=2)
    self.assertLess(dec.epoch_s_mean, cpl.epoch_s_mean)
    self.assertLessEqual(dec.precompute_s, 5 * cpl.epoch_s_mean)

if __name__ == '__main__':
  unittest.main()
