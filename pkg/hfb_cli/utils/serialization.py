"""
Binary state / trace files and the CSV / JSON report writers.

Layout shared by .hfbs and .hfbt files (little-endian):

    4s   magic (b"HFBS" or b"HFBT")
    u32  format version
    u32  d, u32 n, f64 L
    u32  number of arrays
    u32  metadata length, UTF-8 JSON metadata (sorted keys)
    per array: u32 name length, name, u32 ndim, u64 dims..., complex128 payload

The metadata holds the SHA-256 of everything after it.
"""
import csv
import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from hfb_cli.core.errors import SerializationError, ValidationError
from hfb_cli.core.physics.hfb_state import HFBState
from hfb_cli.core.physics.lattice import Field, Kernel, make_grid
from hfb_cli.core.physics.potentials import PotentialSpec
from hfb_cli.core.physics.trace import SpaceTimeTrace

FORMAT_VERSION = 1
STATE_MAGIC = b"HFBS"
TRACE_MAGIC = b"HFBT"
HEADER = struct.Struct("<4sIIIdI")
PathLike = Union[str, Path]


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (tuple, set)):
        return list(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, default=_jsonable, allow_nan=True) + "\n"


def _encode_arrays(arrays: Sequence[Tuple[str, np.ndarray]]) -> bytes:
    chunks: List[bytes] = []
    for name, array in arrays:
        data = np.ascontiguousarray(array, dtype="<c16")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)) + encoded)
        chunks.append(struct.pack("<I", data.ndim) + struct.pack(f"<{data.ndim}Q", *data.shape))
        chunks.append(data.tobytes(order="C"))
    return b"".join(chunks)


def encode(magic: bytes, d: int, n: int, L: float, metadata: Dict[str, Any], arrays: Sequence[Tuple[str, np.ndarray]]) -> bytes:
    payload = _encode_arrays(arrays)
    meta = dict(metadata)
    meta["sha256"] = hashlib.sha256(payload).hexdigest()
    meta_bytes = json.dumps(meta, sort_keys=True, default=_jsonable).encode("utf-8")
    header = HEADER.pack(magic, FORMAT_VERSION, d, n, float(L), len(arrays))
    return header + struct.pack("<I", len(meta_bytes)) + meta_bytes + payload


class _Reader:
    def __init__(self, blob: bytes, path: str) -> None:
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise SerializationError(
                f"{self.path} is truncated: needed {count} bytes at offset {self.pos}, file has {len(self.blob)}",
                path=self.path,
            )
        out = self.blob[self.pos : self.pos + count]
        self.pos += count
        return out

    def unpack(self, fmt: str) -> Tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode(blob: bytes, magic: bytes, path: str = "<bytes>") -> Tuple[Tuple[int, int, float], Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Parse a file image.

    Returns:
        ((d, n, L), metadata, arrays by name)

    Raises:
        SerializationError: on foreign magic, another version, truncation or checksum mismatch
    """
    reader = _Reader(blob, path)
    found, version, d, n, L, count = HEADER.unpack(reader.take(HEADER.size))
    if found != magic:
        raise SerializationError(f"{path} is not a {magic.decode()} file (magic {found!r})", path=path)
    if version != FORMAT_VERSION:
        raise SerializationError(f"{path} has format version {version}, this build reads {FORMAT_VERSION}", path=path)
    (meta_len,) = reader.unpack("<I")
    try:
        metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SerializationError(f"{path} has unreadable metadata: {exc}", path=path) from exc

    start = reader.pos
    arrays: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<I")
        shape = reader.unpack(f"<{ndim}Q") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        data = reader.take(16 * size)
        arrays[name] = np.frombuffer(data, dtype="<c16").reshape(shape).astype(complex)
    if reader.pos != len(blob):
        raise SerializationError(f"{path} has {len(blob) - reader.pos} trailing bytes", path=path)
    digest = hashlib.sha256(blob[start:]).hexdigest()
    if digest != metadata.get("sha256"):
        raise SerializationError(f"{path} failed its checksum", path=path)
    return (d, n, L), metadata, arrays


def _require(arrays: Mapping[str, np.ndarray], names: Iterable[str], shapes: Mapping[str, Tuple[int, ...]], path: str) -> None:
    for name in names:
        if name not in arrays:
            raise SerializationError(f"{path} lacks array {name!r}", path=path)
        if name in shapes and arrays[name].shape != shapes[name]:
            raise SerializationError(f"{path}: array {name!r} has shape {arrays[name].shape}, expected {shapes[name]}", path=path)


def state_bytes(state: HFBState) -> bytes:
    grid = state.grid
    metadata = {"kind": "state", "t": float(state.t), "spec": state.spec.model_dump(mode="json")}
    phi, lam, gamma = state.arrays()
    return encode(STATE_MAGIC, grid.d, grid.n, grid.L, metadata, [("phi", phi), ("lambda", lam), ("gamma", gamma)])


def save_state(state: HFBState, path: PathLike) -> Path:
    path = Path(path)
    path.write_bytes(state_bytes(state))
    return path


def load_state(path: PathLike) -> HFBState:
    path = Path(path)
    (d, n, L), metadata, arrays = decode(path.read_bytes(), STATE_MAGIC, str(path))
    grid = make_grid(d, n, L)
    size = grid.size
    _require(arrays, ("phi", "lambda", "gamma"), {"phi": (size,), "lambda": (size, size), "gamma": (size, size)}, str(path))
    return HFBState(
        t=float(metadata["t"]),
        phi=Field(grid, arrays["phi"]),
        lam=Kernel(grid, arrays["lambda"], "symmetric"),
        gamma=Kernel(grid, arrays["gamma"], "hermitian"),
        spec=PotentialSpec.model_validate(metadata["spec"]),
    )


def trace_bytes(trace: SpaceTimeTrace, spec: Optional[PotentialSpec] = None) -> bytes:
    grid = trace.grid
    metadata = {
        "kind": "trace",
        "times": [float(t) for t in trace.times],
        "offsets": [list(w) for w in trace.offsets],
        "kernel_stride": trace.kernel_stride,
        "run": trace.metadata,
        "spec": spec.model_dump(mode="json") if spec is not None else None,
    }
    arrays = [
        ("phi", trace.phi),
        ("lambda_diag", trace.lambda_diag),
        ("gamma_diag", trace.gamma_diag),
        ("lambda_snaps", trace.lambda_snaps),
        ("gamma_snaps", trace.gamma_snaps),
    ]
    return encode(TRACE_MAGIC, grid.d, grid.n, grid.L, metadata, arrays)


def save_trace(trace: SpaceTimeTrace, path: PathLike, spec: Optional[PotentialSpec] = None) -> Path:
    path = Path(path)
    path.write_bytes(trace_bytes(trace, spec))
    return path


def load_trace(path: PathLike) -> Tuple[SpaceTimeTrace, Optional[PotentialSpec]]:
    """Trace and, when it was stored, the potential it was produced with"""
    path = Path(path)
    (d, n, L), metadata, arrays = decode(path.read_bytes(), TRACE_MAGIC, str(path))
    grid = make_grid(d, n, L)
    names = ("phi", "lambda_diag", "gamma_diag", "lambda_snaps", "gamma_snaps")
    _require(arrays, names, {}, str(path))
    spec = PotentialSpec.model_validate(metadata["spec"]) if metadata.get("spec") else None
    try:
        trace = SpaceTimeTrace(
            grid=grid,
            times=np.asarray(metadata["times"], dtype=float),
            offsets=[tuple(w) for w in metadata["offsets"]],
            phi=arrays["phi"],
            lambda_diag=arrays["lambda_diag"],
            gamma_diag=arrays["gamma_diag"],
            kernel_stride=int(metadata["kernel_stride"]),
            lambda_snaps=arrays["lambda_snaps"],
            gamma_snaps=arrays["gamma_snaps"],
            metadata=dict(metadata.get("run") or {}),
        )
    except ValidationError as exc:
        raise SerializationError(f"{path}: {exc.message}", path=str(path)) from exc
    return trace, spec


def _format(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return value


def write_csv(path: PathLike, rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None) -> Path:
    """Rows with a stable column order: the given columns, else first appearance"""
    path = Path(path)
    if columns is None:
        ordered: List[str] = []
        for row in rows:
            ordered.extend(key for key in row if key not in ordered)
        columns = ordered
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _format(row.get(key)) for key in columns})
    return path


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    path.write_text(dumps_json(data))
    return path
