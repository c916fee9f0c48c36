from __future__ import annotations
import argparse, json, sys, pathlib, csv
from dataclasses import asdict
from typing import Optional, Dict, Any, Tuple, Sequence
import numpy as np
import scipy.sparse as sp
from lighterx.helpers import DEBUG, THREADS, Context, DataError, NumericError, Timing, file_hash, fmt_table
from lighterx.data import SplitSpec, InteractionMatrix, load_interactions, fetch_dataset, split_per_user, save_split, load_split
from lighterx.graph import build_adjacency, normalize_adjacency, matrix_hash
from lighterx.features import RandomMatrixSpec
from lighterx.propagation import SvdFactors, perturbed_adjacency
from lighterx.model import VARIANTS, DECOUPLED, TrainConfig, PrecomputeSpec, ModelInputs, TrainState, UpdateTracker, Recommender
from lighterx.model import precompute_inputs, train
from lighterx.nn.optim import AdamState
from lighterx.nn.state import Checkpoint, cache_save, cache_load, save_checkpoint, load_checkpoint
from lighterx.eval import METRICS, evaluate, metric_lines, metric_table
from lighterx.bench import SweepBase, synthetic_interactions, bench_epoch, scaling_sweep, timer_overhead, report_dict

def _floats(s:str) -> Tuple[float, ...]: return tuple(float(x) for x in s.split(",") if x.strip())
def _ints(s:str) -> Tuple[int, ...]: return tuple(int(x) for x in s.split(",") if x.strip())

def emit(obj:Dict[str, Any]): print(json.dumps(obj), flush=True)

# *** prepare ***

def cmd_prepare(args) -> int:
  if args.fetch: path, header = fetch_dataset(args.fetch)
  elif args.input: path, header = pathlib.Path(args.input), args.header
  else: raise DataError("prepare needs --input or --fetch")
  fr = _floats(args.split)
  if len(fr) != 3: raise ValueError(f"--split needs three fractions, got {args.split}")
  spec = SplitSpec(*fr, seed=args.seed)
  R = load_interactions(path, args.min_degree, header)
  train_R, valid_R, test_R = split_per_user(R, spec)
  manifest = save_split(train_R, valid_R, test_R, args.out_dir, args.stem or pathlib.Path(path).stem, spec)
  emit({k: manifest[k] for k in ("num_users", "num_items", "interactions", "sparsity", "counts", "hash")})
  return 0

# *** precompute ***

def _graph_hash(train_R:InteractionMatrix) -> str: return matrix_hash(normalize_adjacency(build_adjacency(train_R)))

def cmd_precompute(args) -> int:
  train_R, _, _, manifest = load_split(args.dataset_dir)
  fspec = RandomMatrixSpec(args.dist, args.c, args.sparsity, args.quantile, args.seed, not args.no_normalize, _ints(args.h) if args.h else None)
  pspec = PrecomputeSpec(args.layers, args.jacobi_a, args.jacobi_b, args.svd_q, _floats(args.weights) if args.weights else None, args.features)
  with Timing(enabled=False) as tm:
    pre = precompute_inputs(args.variant, train_R, fspec, pspec, args.seed)
  inp = pre.inputs
  assert inp.P is not None
  tensors: Dict[str, np.ndarray] = {"P.indptr": inp.P.indptr.astype(np.int64), "P.indices": inp.P.indices.astype(np.int64), "P.data": inp.P.data}
  for name in ("Z", "X", "Zhat"):
    if (t := getattr(inp, name)) is not None: tensors[name] = t
  if pre.svd is not None: tensors.update({"svd.U": pre.svd.U, "svd.s": pre.svd.s, "svd.V": pre.svd.V})
  feats = pre.features
  meta = {"variant": args.variant, "dataset_dir": str(pathlib.Path(args.dataset_dir).resolve()), "dataset_hash": manifest["hash"],
          "num_users": train_R.num_users, "num_items": train_R.num_items, "P_hash": matrix_hash(inp.P),
          "X_hash": matrix_hash(feats.data) if feats is not None else None, "propagation": asdict(pspec), "features": asdict(fspec),
          "h_user": feats.h_user if feats is not None else None, "h_item": feats.h_item if feats is not None else None}
  cache_save(tensors, args.out, meta)
  emit({"h_user": meta["h_user"], "h_item": meta["h_item"], "h": feats.h if feats is not None else None, "seconds": tm.seconds,
        "cache": str(args.out), "cache_hash": file_hash(args.out)})
  return 0

def load_cache(fn:str, variant:Optional[str], train_R:InteractionMatrix, manifest:Dict[str, Any]) -> Tuple[str, ModelInputs, Dict[str, Any]]:
  tensors, meta = cache_load(fn)
  if variant is not None and variant != meta["variant"]: raise DataError(f"cache {fn} holds {meta['variant']}, not {variant}")
  if meta["dataset_hash"] != manifest["hash"]: raise DataError(f"cache {fn} was built from a different dataset")
  n = train_R.num_users + train_R.num_items
  P = sp.csr_matrix((tensors["P.data"], tensors["P.indices"], tensors["P.indptr"]), shape=(n, n))
  if matrix_hash(P) != meta["P_hash"] or _graph_hash(train_R) != meta["P_hash"]: raise DataError(f"cache {fn} is stale, its P does not match the dataset")
  if "X" in tensors and matrix_hash(tensors["X"]) != meta["X_hash"]: raise DataError(f"cache {fn} is stale, its X hash does not match")
  ps = meta["propagation"]
  inputs = ModelInputs(train_R.num_users, train_R.num_items, tensors.get("Z"), tensors.get("X"), tensors.get("Zhat"), P, None, ps["L"],
                       tuple(ps["weights"]) if ps["weights"] is not None else None, ps["a"], ps["b"])
  if "svd.U" in tensors: inputs.Phat = perturbed_adjacency(SvdFactors(tensors["svd.U"], tensors["svd.s"], tensors["svd.V"]))
  return meta["variant"], inputs, meta

# *** train ***

# wall clock stays on the epoch log so reruns write identical checkpoints
def _untimed(rec:Dict[str, Any]) -> Dict[str, Any]: return {k:v for k,v in rec.items() if k != "seconds"}

def _to_checkpoint(model:Recommender, st:TrainState, variant:str, cfg:TrainConfig, inputs:ModelInputs, meta:Dict[str, Any],
                   final:bool) -> Checkpoint:
  params = model.parameters()
  weights = st.best_params if final and st.best_params is not None else params
  if variant in DECOUPLED:
    mlp = model.mlp  # type: ignore[attr-defined]
    layers, it = [], iter(weights)
    for l in mlp.layers: layers.append((next(it), next(it) if l.bias is not None else None))
    h = mlp.in_features
  else: layers, h = [(weights[0], None)], weights[0].shape[0]
  state: Dict[str, np.ndarray] = {}
  # kept in the final checkpoint too, so --resume after the last epoch is a no-op
  for i,p in enumerate(st.params if st.params is not None else params): state[f"param.{i}"] = p
  if st.best_params is not None:
    for i,p in enumerate(st.best_params): state[f"best.{i}"] = p
  if st.adam is not None:
    for i,(m,v) in enumerate(zip(st.adam.m, st.adam.v)): state[f"adam.m.{i}"], state[f"adam.v.{i}"] = m, v
  E = model.embeddings().E
  ck_meta = {"variant": variant, "config": asdict(cfg), "cache_hash": meta.get("cache_hash"), "dataset_hash": meta["dataset_hash"],
             "epoch": st.epoch, "best": st.best if np.isfinite(st.best) else None, "best_epoch": st.best_epoch, "bad_evals": st.bad_evals,
             "stopped": st.stopped, "history": [_untimed(h) for h in st.history], "adam_t": st.adam.t if st.adam is not None else 0, "rng_state": st.rng_state,
             "final": final, "num_params": model.num_params()}
  return Checkpoint(inputs.num_users, inputs.num_items, h, cfg.d, layers, E, state, ck_meta)

def _from_checkpoint(ck:Checkpoint) -> TrainState:
  m = ck.meta
  count = len([k for k in ck.state if k.startswith("param.")])
  get = lambda pre: [ck.state[f"{pre}.{i}"] for i in range(count)] if f"{pre}.0" in ck.state else None  # noqa: E731
  adam_m, adam_v = get("adam.m"), get("adam.v")
  return TrainState(m["epoch"], m["best"] if m["best"] is not None else -np.inf, m["best_epoch"], m["bad_evals"], m["history"], get("param"),
                    get("best"), AdamState(m["adam_t"], adam_m or [], adam_v or []), m["rng_state"], m["stopped"])

def _train_config(args) -> TrainConfig:
  return TrainConfig(args.d, args.batch, args.lr, args.epochs, args.weight_decay, args.negatives, args.lambda1, args.temp, args.beta, args.seed,
                     args.patience, _ints(args.hidden) if args.hidden else (), args.activation, args.bias, args.init, args.dtype, args.eval_k)

# only the epoch budget may change between a run and its resume
def _resumable(cfg:Dict[str, Any]) -> Dict[str, Any]: return {k:v for k,v in json.loads(json.dumps(cfg)).items() if k != "epochs"}

def cmd_train(args) -> int:
  _, meta0 = cache_load(args.cache)
  dataset_dir = args.dataset_dir or meta0["dataset_dir"]
  train_R, valid_R, _, manifest = load_split(dataset_dir)
  variant, inputs, meta = load_cache(args.cache, args.variant, train_R, manifest)
  meta["cache_hash"] = file_hash(args.cache)
  cfg = _train_config(args)
  resume = None
  if args.resume and pathlib.Path(args.ckpt).is_file():
    ck = load_checkpoint(args.ckpt)
    if ck.meta.get("variant") != variant or ck.meta.get("cache_hash") != meta["cache_hash"]: raise DataError(f"{args.ckpt} was trained from another cache")
    if _resumable(ck.meta.get("config", {})) != _resumable(asdict(cfg)): raise DataError(f"{args.ckpt} was trained with a different config")
    resume = _from_checkpoint(ck)
    if DEBUG >= 1: print(f"resuming {args.ckpt} at epoch {resume.epoch}")
  def on_epoch(model:Recommender, st:TrainState):
    emit({"record": "epoch", **st.history[-1]})
    save_checkpoint(_to_checkpoint(model, st, variant, cfg, inputs, meta, False), args.ckpt)
  res = train(variant, inputs, cfg, train_R, valid_R, resume, on_epoch)
  save_checkpoint(_to_checkpoint(res.model, res.state, variant, cfg, inputs, meta, True), args.ckpt)
  emit({"record": "final", "params": res.model.num_params(), "epochs": res.state.epoch, "best_epoch": res.state.best_epoch,
        "best": res.state.best if np.isfinite(res.state.best) else None, "ckpt": str(args.ckpt)})
  return 0

# *** eval ***

def cmd_eval(args) -> int:
  ck = load_checkpoint(args.ckpt)
  train_R, valid_R, test_R, manifest = load_split(args.dataset_dir)
  if (ck.n_users, ck.n_items) != (manifest["num_users"], manifest["num_items"]):
    raise DataError(f"{args.ckpt} has {ck.n_users} users and {ck.n_items} items, dataset has {manifest['num_users']} and {manifest['num_items']}")
  if ck.embeddings.shape[0] != ck.n_users + ck.n_items: raise DataError(f"{args.ckpt} embedding table has {ck.embeddings.shape[0]} rows")
  truth, mask = (test_R, (train_R, valid_R)) if args.split == "test" else (valid_R, train_R)
  res = evaluate(ck.embeddings.astype(np.float64), ck.n_users, mask, truth, _ints(args.k), METRICS)
  for line in metric_lines(res, split=args.split): print(line)
  if not args.json_only: print(metric_table(res))
  return 0

# *** parameter updates ***

def _dataset_or_synthetic(args) -> InteractionMatrix:
  if args.dataset_dir: return load_split(args.dataset_dir)[0]
  nu, ni, m = _ints(args.synthetic)
  return synthetic_interactions(nu, ni, avg_degree=m/nu, power_law=args.power_law, seed=args.seed)

def cmd_inspect_updates(args) -> int:
  train_R = _dataset_or_synthetic(args)
  cfg = TrainConfig(d=args.d, batch_size=args.batch, lr=args.lr, epochs=args.epochs, seed=args.seed)
  pre = precompute_inputs(args.variant, train_R, RandomMatrixSpec(seed=args.seed, c=args.c), PrecomputeSpec(L=args.layers), args.seed)
  tracker = UpdateTracker(args.eps)
  train(args.variant, pre.inputs, cfg, train_R, None, tracker=tracker)
  rep = tracker.report()
  curve = rep.curve()
  if args.out:
    with open(args.out, "w", newline="") as f:
      w = csv.writer(f)
      w.writerow(["k", "fraction"])
      w.writerows(curve)
  for h in rep.heat: emit({"record": "heat", **h})
  emit({"record": "summary", "variant": args.variant, "steps": rep.steps, "params": int(rep.counts.size), "eps": args.eps,
        "fraction_at_half": rep.fraction_exceeding(rep.steps // 2), "sparsity": round(100 * train_R.sparsity, 4)})
  return 0

# *** benchmarks ***

def cmd_bench(args) -> int:
  data = _dataset_or_synthetic(args)
  cfg = TrainConfig(d=args.d, batch_size=args.batch, seed=args.seed, dtype=args.dtype)
  fspec = RandomMatrixSpec(seed=args.seed, c=args.c, h=_ints(args.h) if args.h else None)
  rows = []
  for v in args.variants.split(","):
    rep = bench_epoch(v, data, cfg, args.repetitions, fspec, PrecomputeSpec(L=args.layers))
    emit({"record": "timing", **report_dict(rep)})
    rows.append((v, rep.precompute_s, rep.epoch_s_mean, rep.epoch_s_std, rep.params))
  emit({"record": "timer_overhead", **timer_overhead()})
  print(fmt_table(rows, ("variant", "precompute_s", "epoch_s_mean", "epoch_s_std", "params")))
  return 0

def cmd_sweep(args) -> int:
  base = SweepBase(args.n, args.avg_degree, args.d, args.h, args.layers, args.power_law, args.c, args.sparsity, args.quantile)
  rows = scaling_sweep(args.axis, _floats(args.values), args.variants.split(","), args.out, base,
                       TrainConfig(d=args.d, batch_size=args.batch, epochs=1, seed=args.seed, dtype=args.dtype), args.repetitions)
  for r in rows: emit({"record": "sweep", **r})
  return 0

# *** parser ***

def build_parser() -> argparse.ArgumentParser:
  fmt = argparse.ArgumentDefaultsHelpFormatter
  parser = argparse.ArgumentParser(prog="lighterx", description="Decoupled graph recommendation with compressed random features", formatter_class=fmt)
  parser.add_argument('--config', type=str, default=None, help="File of key = value lines, overridden by flags")
  parser.add_argument('--threads', type=int, default=THREADS.value, help="SpMM worker threads, 1 is the deterministic mode")
  sub = parser.add_subparsers(dest="command", required=True)

  p = sub.add_parser("prepare", help="Load interactions and write a train/valid/test split", formatter_class=fmt)
  p.add_argument('--input', type=str, default=None, help="user<TAB>item[<TAB>rating][<TAB>timestamp] file")
  p.add_argument('--fetch', type=str, default=None, choices=["lastfm"], help="Download a public dataset instead of --input")
  p.add_argument('--header', action='store_true', help="Skip the first line of --input")
  p.add_argument('--out-dir', type=str, required=True, help="Dataset directory to write")
  p.add_argument('--stem', type=str, default=None, help="Split file stem, defaults to the input name")
  p.add_argument('--split', type=str, default="0.8,0.1,0.1", help="train,valid,test fractions")
  p.add_argument('--seed', type=int, default=0, help="Random seed")
  p.add_argument('--min-degree', type=int, default=1, help="Iteratively drop users and items below this degree")

  p = sub.add_parser("precompute", help="Generate features and propagate them into a cache", formatter_class=fmt)
  p.add_argument('--dataset-dir', type=str, required=True, help="Directory written by prepare")
  p.add_argument('--variant', type=str, default="lighter_gcn", choices=VARIANTS, help="Model variant the cache is for")
  p.add_argument('--c', type=float, default=1.0, help="Scale constant of the feature width rule")
  p.add_argument('--dist', type=str, default="bernoulli", choices=["bernoulli", "gaussian", "uniform", "orthogonal"], help="Random matrix entries")
  p.add_argument('--sparsity', type=str, default="mean", choices=["mean", "quantile"], help="Sparsity estimator for the width rule")
  p.add_argument('--quantile', type=float, default=0.5, help="Degree quantile for --sparsity quantile")
  p.add_argument('--h', type=str, default=None, help="Explicit h_user,h_item widths")
  p.add_argument('--no-normalize', action='store_true', help="Keep unnormalized +-1 Bernoulli entries")
  p.add_argument('--features', type=str, default="random", choices=["random", "identity"], help="identity gives the Equal-X variants")
  p.add_argument('--layers', type=int, default=3, help="Propagation depth L")
  p.add_argument('--weights', type=str, default=None, help="Comma separated layer weights, default uniform")
  p.add_argument('--jacobi-a', type=float, default=1.0, help="Jacobi a")
  p.add_argument('--jacobi-b', type=float, default=1.0, help="Jacobi b")
  p.add_argument('--svd-q', type=int, default=5, help="Truncated SVD rank")
  p.add_argument('--seed', type=int, default=0, help="Random seed")
  p.add_argument('--out', type=str, required=True, help="Cache file to write")

  p = sub.add_parser("train", help="Train on a cache and write a checkpoint", formatter_class=fmt)
  p.add_argument('--cache', type=str, required=True, help="Cache written by precompute")
  p.add_argument('--dataset-dir', type=str, default=None, help="Dataset directory, defaults to the one recorded in the cache")
  p.add_argument('--variant', type=str, default=None, choices=VARIANTS, help="Refuse caches built for another variant")
  p.add_argument('--d', type=int, default=64, help="Embedding size")
  p.add_argument('--lr', type=float, default=1e-3, help="Adam learning rate")
  p.add_argument('--batch', type=int, default=2048, help="Batch size")
  p.add_argument('--epochs', type=int, default=100, help="Maximum epochs")
  p.add_argument('--weight-decay', type=float, default=0.0, help="L2 penalty")
  p.add_argument('--negatives', type=int, default=1, help="Negatives per positive")
  p.add_argument('--lambda1', type=float, default=0.01, help="InfoNCE weight")
  p.add_argument('--temp', type=float, default=0.8, help="InfoNCE temperature")
  p.add_argument('--beta', type=float, default=0.1, help="JGCF mid band weight")
  p.add_argument('--patience', type=int, default=10, help="Early stopping patience in evaluations")
  p.add_argument('--eval-k', type=int, default=10, help="Validation Recall cutoff")
  p.add_argument('--hidden', type=str, default=None, help="Comma separated hidden sizes of the MLP")
  p.add_argument('--activation', type=str, default="none", choices=["none", "tanh", "relu"], help="Activation between MLP layers")
  p.add_argument('--bias', action='store_true', help="Biases in the MLP")
  p.add_argument('--init', type=str, default="xavier", choices=["xavier", "gaussian"], help="Weight init")
  p.add_argument('--dtype', type=str, default="float64", choices=["float32", "float64"], help="Training precision")
  p.add_argument('--seed', type=int, default=0, help="Random seed")
  p.add_argument('--ckpt', type=str, required=True, help="Checkpoint to write")
  p.add_argument('--resume', action='store_true', help="Continue from --ckpt if it exists")

  p = sub.add_parser("eval", help="Full ranking metrics of a checkpoint", formatter_class=fmt)
  p.add_argument('--ckpt', type=str, required=True, help="Checkpoint written by train")
  p.add_argument('--dataset-dir', type=str, required=True, help="Dataset directory")
  p.add_argument('--k', type=str, default="10,20", help="Cutoffs")
  p.add_argument('--split', type=str, default="test", choices=["test", "valid"], help="Ground truth split")
  p.add_argument('--json-only', action='store_true', help="Skip the table")

  for name, hlp in (("inspect-updates", "Count parameter updates while training"), ("bench", "Per epoch timing of variants")):
    p = sub.add_parser(name, help=hlp, formatter_class=fmt)
    p.add_argument('--dataset-dir', type=str, default=None, help="Dataset directory, else --synthetic")
    p.add_argument('--synthetic', type=str, default="5000,5000,10000", help="users,items,interactions of a synthetic dataset")
    p.add_argument('--power-law', action='store_true', help="Zipf item popularity for the synthetic dataset")
    p.add_argument('--d', type=int, default=64, help="Embedding size")
    p.add_argument('--batch', type=int, default=2048 if name == "bench" else 16, help="Batch size")
    p.add_argument('--layers', type=int, default=3 if name == "bench" else 1, help="Propagation depth L")
    p.add_argument('--c', type=float, default=1.0, help="Scale constant of the feature width rule")
    p.add_argument('--seed', type=int, default=0, help="Random seed")
    if name == "inspect-updates":
      p.add_argument('--variant', type=str, default="coupled_lightgcn", choices=VARIANTS, help="Model to instrument")
      p.add_argument('--eps', type=float, default=1e-4, help="An update counts when |dw| exceeds this")
      p.add_argument('--epochs', type=int, default=1, help="Epochs")
      p.add_argument('--lr', type=float, default=1e-3, help="Adam learning rate")
      p.add_argument('--out', type=str, default=None, help="CSV of the fraction updated more than k times")
    else:
      p.add_argument('--variants', type=str, default="lighter_gcn,coupled_lightgcn", help="Comma separated variants")
      p.add_argument('--repetitions', type=int, default=3, help="Timed epochs after the warmup")
      p.add_argument('--h', type=str, default=None, help="Explicit h_user,h_item widths")
      p.add_argument('--dtype', type=str, default="float32", choices=["float32", "float64"], help="Training precision of the timed epochs")

  p = sub.add_parser("sweep", help="Scaling curves on synthetic data", formatter_class=fmt)
  p.add_argument('--axis', type=str, required=True, choices=["n", "d", "h", "L", "c", "quantile"], help="Swept quantity")
  p.add_argument('--values', type=str, required=True, help="Comma separated values of the axis")
  p.add_argument('--variants', type=str, default="lighter_gcn,coupled_lightgcn", help="Comma separated variants")
  p.add_argument('--n', type=int, default=2000, help="Nodes when not swept")
  p.add_argument('--avg-degree', type=float, default=10.0, help="Interactions per user")
  p.add_argument('--d', type=int, default=64, help="Embedding size when not swept")
  p.add_argument('--h', type=int, default=128, help="Feature width when not swept")
  p.add_argument('--layers', type=int, default=3, help="Propagation depth when not swept")
  p.add_argument('--c', type=float, default=1.0, help="Width rule scale constant, used when c or quantile is swept")
  p.add_argument('--sparsity', type=str, default="mean", choices=["mean", "quantile"], help="Sparsity estimator when c is swept")
  p.add_argument('--quantile', type=float, default=0.5, help="Degree quantile when c is swept with --sparsity quantile")
  p.add_argument('--power-law', action='store_true', help="Zipf item popularity")
  p.add_argument('--dtype', type=str, default="float32", choices=["float32", "float64"], help="Training precision of the timed epochs")
  p.add_argument('--batch', type=int, default=2048, help="Batch size")
  p.add_argument('--repetitions', type=int, default=3, help="Timed epochs after the warmup")
  p.add_argument('--seed', type=int, default=0, help="Random seed")
  p.add_argument('--out', type=str, default=None, help="CSV file to write")
  # --threads also works after the subcommand, SUPPRESS keeps a value given before it
  for p in sub.choices.values(): p.add_argument('--threads', type=int, default=argparse.SUPPRESS, help="SpMM worker threads")
  return parser

def read_config(fn:str) -> Dict[str, str]:
  ret = {}
  try: lines = pathlib.Path(fn).read_text(encoding="utf-8").splitlines()
  except OSError as e: raise DataError(f"can't read config {fn}: {e}") from e
  for lineno, line in enumerate(lines, start=1):
    if not (line := line.split("#", 1)[0].strip()): continue
    if "=" not in line: raise DataError(f"{fn}:{lineno}: expected key = value")
    k, v = (x.strip() for x in line.split("=", 1))
    ret[k.replace("-", "_")] = v
  return ret

def _subparsers(parser:argparse.ArgumentParser) -> Dict[str, argparse.ArgumentParser]:
  return next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices

def _config_defaults(actions:Dict[str, argparse.Action], config:Dict[str, str]) -> Dict[str, Any]:
  defaults = {}
  for k, v in config.items():
    if (a := actions.get(k)) is None: continue
    if isinstance(a, argparse._StoreTrueAction): defaults[k] = v.lower() in ("1", "true", "yes")
    else: defaults[k] = a.type(v) if a.type is not None else v
    a.required = False
  return defaults

def apply_config(parser:argparse.ArgumentParser, config:Dict[str, str]):
  # file values become defaults, so explicit flags still win
  top = {a.dest: a for a in parser._actions if a.dest not in ("help", "config", "command")}
  parser.set_defaults(**_config_defaults(top, config))
  for sub in _subparsers(parser).values():
    sub.set_defaults(**_config_defaults({a.dest: a for a in sub._actions if a.dest not in top}, config))
  if unknown := sorted(k for k in config if k not in top and not any(k in {a.dest for a in s._actions} for s in _subparsers(parser).values())):
    parser.error(f"unknown config keys {', '.join(unknown)}")

def parse(argv:Optional[Sequence[str]]=None) -> argparse.Namespace:
  parser = build_parser()
  pre = argparse.ArgumentParser(add_help=False)
  pre.add_argument('--config', type=str, default=None)
  known, _ = pre.parse_known_args(argv)
  if known.config is not None: apply_config(parser, read_config(known.config))
  return parser.parse_args(argv)

COMMANDS = {"prepare": cmd_prepare, "precompute": cmd_precompute, "train": cmd_train, "eval": cmd_eval, "inspect-updates": cmd_inspect_updates,
            "bench": cmd_bench, "sweep": cmd_sweep}

def main(argv:Optional[Sequence[str]]=None) -> int:
  try:
    args = parse(argv)
    emit({"record": "config", **vars(args)})
    with Context(THREADS=args.threads):
      return COMMANDS[args.command](args)
  except (DataError, OSError) as e:
    print(f"error: {e}", file=sys.stderr)
    return 3
  except (NumericError, FloatingPointError) as e:
    print(f"numeric error: {e}", file=sys.stderr)
    return 4
  except ValueError as e:
    print(f"error: {e}", file=sys.stderr)
    return 2

if __name__ == "__main__":
  sys.exit(main())
