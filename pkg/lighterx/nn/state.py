from __future__ import annotations
import json, pathlib, struct, tempfile
from dataclasses import dataclass, field
from typing import Dict, Union, List, Optional, Any, Tuple
import numpy as np
from lighterx.helpers import DEBUG, DataError, crc32, prod

safe_dtypes = {"F32": np.dtype("<f4"), "F64": np.dtype("<f8"), "I32": np.dtype("<i4"), "I64": np.dtype("<i8"), "U8": np.dtype("u1"), "B": np.dtype("?")}
inverse_safe_dtypes = {v:k for k,v in safe_dtypes.items()}

def _le(a:np.ndarray) -> np.ndarray:
  a = np.ascontiguousarray(a)
  key = a.dtype.newbyteorder("<") if a.dtype.byteorder not in ("|",) else a.dtype
  if key not in inverse_safe_dtypes: raise ValueError(f"can't serialize dtype {a.dtype}")
  return a.astype(key, copy=False)

def _atomic_write(fn:Union[str, pathlib.Path], data:bytes):
  (path := pathlib.Path(fn)).parent.mkdir(parents=True, exist_ok=True)
  with tempfile.NamedTemporaryFile(dir=path.parent, delete=False) as f:
    f.write(data)
  pathlib.Path(f.name).replace(path)

def _read(fn:Union[str, pathlib.Path], magic:bytes, version:int) -> bytes:
  try: buf = pathlib.Path(fn).read_bytes()
  except OSError as e: raise DataError(f"can't read {fn}: {e}") from e
  if len(buf) < 12 or buf[:4] != magic: raise DataError(f"{fn} is not a {magic.decode()} file")
  if (v := struct.unpack_from("<I", buf, 4)[0]) != version: raise DataError(f"{fn} has {magic.decode()} version {v}, expected {version}")
  if crc32(buf[:-4]) != struct.unpack_from("<I", buf, len(buf)-4)[0]: raise DataError(f"{fn} failed its CRC32 check")
  return buf

# *** propagation cache: safetensors-like JSON header, CRC protected ***

CACHE_MAGIC, CACHE_VERSION = b"LXPC", 1

def cache_save(tensors:Dict[str, np.ndarray], fn:Union[str, pathlib.Path], metadata:Optional[Dict[str, Any]]=None):
  headers: Dict[str, Any] = {}
  if metadata: headers['__metadata__'] = metadata
  blobs, offset = [], 0
  for k,v in tensors.items():
    v = _le(v)
    headers[k] = {'dtype': inverse_safe_dtypes[v.dtype], 'shape': list(v.shape), 'data_offsets':[offset, offset+v.nbytes]}
    blobs.append(v.tobytes())
    offset += v.nbytes
  j = json.dumps(headers, separators=(',', ':'), sort_keys=True)
  j += "\x20"*((8-len(j)%8)%8)
  body = CACHE_MAGIC + struct.pack("<II", CACHE_VERSION, len(j)) + j.encode('utf-8') + b''.join(blobs)
  _atomic_write(fn, body + struct.pack("<I", crc32(body)))

def cache_load_metadata(fn:Union[str, pathlib.Path]) -> Tuple[bytes, int, Dict[str, Any]]:
  buf = _read(fn, CACHE_MAGIC, CACHE_VERSION)
  json_len = struct.unpack_from("<I", buf, 8)[0]
  return buf, json_len, json.loads(buf[12:12+json_len].decode('utf-8'))

def cache_load(fn:Union[str, pathlib.Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
  buf, json_len, headers = cache_load_metadata(fn)
  ret = {}
  for k,v in headers.items():
    if k == "__metadata__": continue
    st, en = (12+json_len+o for o in v['data_offsets'])
    ret[k] = np.frombuffer(buf[st:en], dtype=safe_dtypes[v['dtype']]).reshape(v['shape']).copy()
  return ret, headers.get("__metadata__", {})

# *** embedding checkpoint ***

CKPT_MAGIC, CKPT_VERSION = b"LXEM", 1
_state_dtypes = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}

@dataclass
class Checkpoint:
  n_users: int
  n_items: int
  h: int
  d: int
  layers: List[Tuple[np.ndarray, Optional[np.ndarray]]]   # (in x out weight, bias)
  embeddings: np.ndarray
  state: Dict[str, np.ndarray] = field(default_factory=dict)
  meta: Dict[str, Any] = field(default_factory=dict)

def save_checkpoint(ckpt:Checkpoint, fn:Union[str, pathlib.Path]):
  out = [CKPT_MAGIC, struct.pack("<IIIIII", CKPT_VERSION, ckpt.n_users, ckpt.n_items, ckpt.h, ckpt.d, len(ckpt.layers))]
  for w,b in ckpt.layers: out.append(struct.pack("<III", w.shape[0], w.shape[1], b is not None))
  for w,b in ckpt.layers:
    out.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
    if b is not None: out.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
  out.append(struct.pack("<II", *ckpt.embeddings.shape))
  out.append(np.ascontiguousarray(ckpt.embeddings, dtype="<f4").tobytes())
  out.append(struct.pack("<I", len(ckpt.state)))
  for name,t in ckpt.state.items():
    t = _le(t)
    code = {v:k for k,v in _state_dtypes.items()}[t.dtype]
    nb = name.encode('utf-8')
    out.append(struct.pack(f"<H{len(nb)}sBB{t.ndim}I", len(nb), nb, code, t.ndim, *t.shape))
    out.append(t.tobytes())
  mj = json.dumps(ckpt.meta, separators=(',', ':'), sort_keys=True).encode('utf-8')
  out.append(struct.pack("<I", len(mj)) + mj)
  body = b''.join(out)
  _atomic_write(fn, body + struct.pack("<I", crc32(body)))
  if DEBUG >= 2: print(f"saved checkpoint {fn}: {len(body)+4} bytes")

def load_checkpoint(fn:Union[str, pathlib.Path]) -> Checkpoint:
  buf = _read(fn, CKPT_MAGIC, CKPT_VERSION)
  ptr = 8
  def take(fmt:str) -> Tuple:
    nonlocal ptr
    ret = struct.unpack_from(fmt, buf, ptr)
    ptr += struct.calcsize(fmt)
    return ret
  def array(shape:Tuple[int, ...], dtype) -> np.ndarray:
    nonlocal ptr
    nb = prod(shape) * np.dtype(dtype).itemsize
    ret = np.frombuffer(buf, dtype=dtype, count=prod(shape), offset=ptr).reshape(shape).copy()
    ptr += nb
    return ret
  try:
    n_users, n_items, h, d, n_layers = take("<IIIII")
    shapes = [take("<III") for _ in range(n_layers)]
    layers = [(array((i, o), "<f4"), array((o,), "<f4") if has_bias else None) for i,o,has_bias in shapes]
    embeddings = array(take("<II"), "<f4")
    state = {}
    for _ in range(take("<I")[0]):
      nlen = take("<H")[0]
      name = take(f"<{nlen}s")[0].decode('utf-8')
      code, ndim = take("<BB")
      state[name] = array(take(f"<{ndim}I"), _state_dtypes[code])
    meta = json.loads(take(f"<{take('<I')[0]}s")[0].decode('utf-8'))
  except (struct.error, ValueError, KeyError) as e: raise DataError(f"{fn} is a truncated or corrupt checkpoint: {e}") from e
  if ptr != len(buf)-4: raise DataError(f"{fn} has {len(buf)-4-ptr} trailing bytes")
  return Checkpoint(n_users, n_items, h, d, layers, embeddings, state, meta)
