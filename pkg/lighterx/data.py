from __future__ import annotations
import math, json, pathlib, zipfile, functools
from dataclasses import dataclass, asdict
from typing import Tuple, List, Dict, Optional, Union
import numpy as np
import scipy.sparse as sp
from lighterx.helpers import DEBUG, DataError, dedup, fetch, file_hash, seed_stream, array_hash

@dataclass(frozen=True)
class InteractionMatrix:
  num_users: int
  num_items: int
  interactions: sp.csr_matrix   # binary, rows are users
  user_ids: Tuple[str, ...]
  item_ids: Tuple[str, ...]

  def __post_init__(self):
    R = self.interactions
    assert R.shape == (self.num_users, self.num_items), f"interactions shape {R.shape} != {(self.num_users, self.num_items)}"
    assert len(self.user_ids) == self.num_users and len(self.item_ids) == self.num_items, "id maps must cover every index"
    assert R.has_canonical_format, "interactions must be sorted and duplicate free"
    assert np.all(R.data == 1), "interactions must be binary"

  @property
  def nnz(self) -> int: return self.interactions.nnz
  @property
  def sparsity(self) -> float: return 1.0 - self.nnz / (self.num_users * self.num_items)

  @functools.cached_property
  def user_index(self) -> Dict[str, int]: return {u:i for i,u in enumerate(self.user_ids)}
  @functools.cached_property
  def item_index(self) -> Dict[str, int]: return {it:i for i,it in enumerate(self.item_ids)}

  def user_items(self, u:int) -> np.ndarray:
    R = self.interactions
    return R.indices[R.indptr[u]:R.indptr[u+1]]
  def pairs(self) -> Tuple[np.ndarray, np.ndarray]:
    R = self.interactions
    return np.repeat(np.arange(self.num_users), np.diff(R.indptr)), R.indices.copy()
  def degrees(self) -> Tuple[np.ndarray, np.ndarray]:
    return np.diff(self.interactions.indptr), np.bincount(self.interactions.indices, minlength=self.num_items)
  def to_external(self, u:int, i:int) -> Tuple[str, str]: return self.user_ids[u], self.item_ids[i]
  def to_dense_index(self, user:str, item:str) -> Tuple[int, int]: return self.user_index[user], self.item_index[item]

  def like(self, users:np.ndarray, items:np.ndarray) -> InteractionMatrix:
    return InteractionMatrix.from_pairs(users, items, self.num_users, self.num_items, self.user_ids, self.item_ids)

  @staticmethod
  def from_pairs(users:np.ndarray, items:np.ndarray, num_users:int, num_items:int,
                 user_ids:Optional[Tuple[str, ...]]=None, item_ids:Optional[Tuple[str, ...]]=None) -> InteractionMatrix:
    R = sp.csr_matrix((np.ones(len(users)), (np.asarray(users, dtype=np.int64), np.asarray(items, dtype=np.int64))), shape=(num_users, num_items))
    R.sum_duplicates()
    R.data[:] = 1.0
    return InteractionMatrix(num_users, num_items, R, user_ids if user_ids is not None else tuple(str(u) for u in range(num_users)),
                             item_ids if item_ids is not None else tuple(str(i) for i in range(num_items)))

@dataclass(frozen=True)
class SplitSpec:
  train_frac: float = 0.8
  valid_frac: float = 0.1
  test_frac: float = 0.1
  seed: int = 0
  def __post_init__(self):
    fracs = (self.train_frac, self.valid_frac, self.test_frac)
    if not all(0 < f < 1 for f in fracs): raise ValueError(f"split fractions must be in (0,1), got {fracs}")
    if abs(sum(fracs) - 1) > 1e-9: raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")

# *** loading ***

def _is_number(s:str) -> bool:
  try: float(s)
  except ValueError: return False
  return True

def load_interactions(path:Union[str, pathlib.Path], min_degree:int=1, header:bool=False) -> InteractionMatrix:
  try: lines = pathlib.Path(path).read_text(encoding="utf-8").splitlines()
  except (OSError, UnicodeDecodeError) as e: raise DataError(f"can't read {path}: {e}") from e
  raw: List[Tuple[str, str]] = []
  for lineno, line in enumerate(lines, start=1):
    if header and lineno == 1: continue
    if not line.strip(): continue
    cols = line.rstrip("\r").split("\t")
    if not (2 <= len(cols) <= 4) or not cols[0] or not cols[1] or not all(_is_number(c) for c in cols[2:]):
      raise DataError(f"{path}:{lineno}: malformed line {line!r}, expected user<TAB>item[<TAB>rating][<TAB>timestamp]")
    raw.append((cols[0], cols[1]))
  pairs = dedup(raw)

  # k-core style filter, dropping users and items can lower the other side's degree so iterate until stable
  while min_degree > 1:
    udeg: Dict[str, int] = {}
    ideg: Dict[str, int] = {}
    for u,i in pairs: udeg[u], ideg[i] = udeg.get(u, 0)+1, ideg.get(i, 0)+1
    kept = [(u,i) for u,i in pairs if udeg[u] >= min_degree and ideg[i] >= min_degree]
    if len(kept) == len(pairs): break
    if DEBUG >= 2: print(f"min_degree {min_degree} dropped {len(pairs)-len(kept)} interactions")
    pairs = kept
  if not pairs: raise DataError(f"{path}: no interactions left after filtering with min_degree={min_degree}")

  user_ids, item_ids = tuple(dedup(u for u,_ in pairs)), tuple(dedup(i for _,i in pairs))
  uidx, iidx = {u:k for k,u in enumerate(user_ids)}, {i:k for k,i in enumerate(item_ids)}
  users, items = np.array([uidx[u] for u,_ in pairs], dtype=np.int64), np.array([iidx[i] for _,i in pairs], dtype=np.int64)
  if DEBUG >= 1: print(f"loaded {path}: {len(user_ids)} users, {len(item_ids)} items, {len(pairs)} interactions")
  return InteractionMatrix.from_pairs(users, items, len(user_ids), len(item_ids), user_ids, item_ids)

DATASETS = {
  # name: (url, member in the archive, has header line)
  "lastfm": ("https://files.grouplens.org/datasets/hetrec2011/hetrec2011-lastfm-2k.zip", "user_artists.dat", True),
}

def fetch_dataset(name:str) -> Tuple[pathlib.Path, bool]:
  if name not in DATASETS: raise ValueError(f"unknown dataset {name}, known are {list(DATASETS)}")
  url, member, header = DATASETS[name]
  archive = fetch(url, f"{name}.zip")
  out = archive.parent / f"{name}.{member}"
  if not out.is_file():
    with zipfile.ZipFile(archive) as z: out.write_bytes(z.read(member))
  return out, header

# *** splitting ***

def split_per_user(R:InteractionMatrix, spec:SplitSpec) -> Tuple[InteractionMatrix, InteractionMatrix, InteractionMatrix]:
  rng = seed_stream(spec.seed, "split")
  parts: List[List[np.ndarray]] = [[], [], []]
  users: List[List[np.ndarray]] = [[], [], []]
  for u in range(R.num_users):
    items = R.user_items(u)
    assert len(items) > 0, f"user {R.user_ids[u]} has no interactions"
    # fewer than 3 interactions can't be spread over three parts, everything goes to train
    if len(items) < 3: cuts = (len(items), 0, 0)
    else:
      n_valid, n_test = math.floor(len(items)*spec.valid_frac + 1e-9), math.floor(len(items)*spec.test_frac + 1e-9)
      cuts = (len(items)-n_valid-n_test, n_valid, n_test)
    perm = items[rng.permutation(len(items))]
    for k,(lo,hi) in enumerate(zip(np.cumsum((0,)+cuts[:2]), np.cumsum(cuts))):
      parts[k].append(perm[lo:hi])
      users[k].append(np.full(hi-lo, u, dtype=np.int64))
  train, valid, test = (R.like(np.concatenate(us), np.concatenate(its)) for us,its in zip(users, parts))
  return train, valid, test

# *** on disk dataset ***

SPLITS = ("train", "valid", "test")

def _write_tsv(fn:pathlib.Path, R:InteractionMatrix):
  us, its = R.pairs()
  fn.write_text(''.join(f"{R.user_ids[u]}\t{R.item_ids[i]}\n" for u,i in zip(us, its)), encoding="utf-8")

def save_split(train:InteractionMatrix, valid:InteractionMatrix, test:InteractionMatrix, out_dir:Union[str, pathlib.Path], stem:str,
               spec:Optional[SplitSpec]=None) -> Dict:
  (out := pathlib.Path(out_dir)).mkdir(parents=True, exist_ok=True)
  hashes = {}
  for name,R in zip(SPLITS, (train, valid, test)):
    _write_tsv(fn := out / f"{stem}.{name}", R)
    hashes[name] = file_hash(fn)
  nnz = train.nnz + valid.nnz + test.nnz
  manifest = {"stem": stem, "num_users": train.num_users, "num_items": train.num_items, "interactions": nnz,
              "sparsity": round(100 * (1 - nnz / (train.num_users*train.num_items)), 2),
              "counts": {name:R.nnz for name,R in zip(SPLITS, (train, valid, test))},
              "split": asdict(spec) if spec is not None else None, "hashes": hashes,
              "hash": array_hash(np.frombuffer(''.join(hashes[s] for s in SPLITS).encode(), dtype=np.uint8)),
              "user_ids": list(train.user_ids), "item_ids": list(train.item_ids)}
  (out / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
  return manifest

def load_manifest(dataset_dir:Union[str, pathlib.Path]) -> Dict:
  fn = pathlib.Path(dataset_dir) / "manifest.json"
  try: return json.loads(fn.read_text(encoding="utf-8"))
  except (OSError, json.JSONDecodeError) as e: raise DataError(f"can't read dataset manifest {fn}: {e}") from e

def load_split(dataset_dir:Union[str, pathlib.Path]) -> Tuple[InteractionMatrix, InteractionMatrix, InteractionMatrix, Dict]:
  manifest = load_manifest(dataset_dir)
  user_ids, item_ids = tuple(manifest["user_ids"]), tuple(manifest["item_ids"])
  uidx, iidx = {u:k for k,u in enumerate(user_ids)}, {i:k for k,i in enumerate(item_ids)}
  ret = []
  for name in SPLITS:
    fn = pathlib.Path(dataset_dir) / f"{manifest['stem']}.{name}"
    if file_hash(fn) != manifest["hashes"][name]: raise DataError(f"{fn} does not match the dataset manifest hash")
    us, its = [], []
    for lineno, line in enumerate(fn.read_text(encoding="utf-8").splitlines(), start=1):
      u, i = line.split("\t")
      if u not in uidx or i not in iidx: raise DataError(f"{fn}:{lineno}: id not in the dataset manifest")
      us.append(uidx[u])
      its.append(iidx[i])
    ret.append(InteractionMatrix.from_pairs(np.array(us, dtype=np.int64), np.array(its, dtype=np.int64), len(user_ids), len(item_ids), user_ids, item_ids))
  return ret[0], ret[1], ret[2], manifest
