"""Channel samples, test-time perturbations and the binary dataset container.

Container layout (all integers little-endian)::

    b"NFCT" | version:u32 | header_length:u32 | header (UTF-8 JSON) | payloads

Each payload is the sample tensor as interleaved float32 ``(re, im)`` pairs in
row-major ``[rx][tx][k]`` order. Record offsets in the header are relative to
the first payload byte, so the header never depends on its own length.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math
import os
import struct

import numpy as np

from ._validation import check_channel_tensor, check_positive
from .exceptions import ContainerError, InvalidConfigError
from .targets import GroundTruth

MAGIC = b"NFCT"
FORMAT_VERSION = 1
SPLIT_NAMES = ("train", "val", "test")
CSV_COLUMNS = ("id", "class", "range_m", "azimuth_rad", "split")
_PREAMBLE = struct.Struct("<4sII")


@dataclass(eq=False)
class ChannelSample:
    """One simulated observation with its labels."""

    tensor: np.ndarray
    truth: GroundTruth
    mesh_id: str = ""
    seed: int = 0
    metadata: dict = field(default_factory=dict)
    sample_id: str = ""

    def __post_init__(self):
        arr = np.asarray(self.tensor)
        if arr.ndim != 3:
            raise InvalidConfigError(f"sample tensor must be (N_r, N_t, K_s), got {arr.shape}")
        if not (math.isfinite(self.truth.range) and math.isfinite(self.truth.azimuth)):
            raise InvalidConfigError("ground-truth range/azimuth must be finite")
        self.tensor = arr

    @property
    def shape(self):
        return self.tensor.shape

    def replace_tensor(self, tensor, **extra_metadata):
        meta = dict(self.metadata)
        meta.update(extra_metadata)
        return ChannelSample(tensor, self.truth, self.mesh_id, self.seed, meta, self.sample_id)


def _tensor_of(sample_or_tensor):
    if isinstance(sample_or_tensor, ChannelSample):
        return sample_or_tensor.tensor
    return np.asarray(sample_or_tensor)


def to_real_tensor(sample):
    """Stack real and imaginary parts: ``(2, N_r, N_t, K_s)``."""
    H = _tensor_of(sample)
    return np.stack([H.real, H.imag], axis=0)


def from_real_tensor(values):
    """Inverse of :func:`to_real_tensor`."""
    values = np.asarray(values)
    if values.shape[0] != 2:
        raise InvalidConfigError(f"real tensor must have a leading axis of size 2, got {values.shape}")
    out = np.empty(values.shape[1:], dtype=np.result_type(values.dtype, np.complex64))
    out.real = values[0]
    out.imag = values[1]
    return out


def rms(tensor):
    """Root-mean-square magnitude over all entries."""
    H = np.asarray(tensor)
    return float(np.sqrt(np.mean(np.abs(H) ** 2)))


def snr_equivalent_db(scale):
    """Equivalent input SNR ``-20 log10(scale)``; infinite for ``scale == 0``."""
    scale = check_positive(scale, "scale", allow_zero=True)
    return math.inf if scale == 0 else -20.0 * math.log10(scale)


def add_complex_noise(sample, scale, seed=0):
    """Add circular complex Gaussian noise of std ``scale * RMS(H)`` per entry.

    Returns ``(perturbed, sigma)``; works on a :class:`ChannelSample` or a bare
    array and returns the same kind. ``scale == 0`` returns the input
    unchanged.
    """
    scale = check_positive(scale, "scale", allow_zero=True)
    H = _tensor_of(sample)
    if scale == 0:
        return sample, 0.0
    sigma = scale * rms(H)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(H.shape + (2,)) * (sigma / math.sqrt(2.0))
    noisy = (H + (noise[..., 0] + 1j * noise[..., 1])).astype(H.dtype, copy=False)
    if isinstance(sample, ChannelSample):
        return sample.replace_tensor(noisy, noise_scale=scale, noise_sigma=sigma), sigma
    return noisy, sigma


def apply_phase_offset(sample, offset):
    """Multiply every entry by ``exp(j*offset)``."""
    H = _tensor_of(sample)
    rotated = (H * np.exp(1j * float(offset))).astype(H.dtype, copy=False)
    if isinstance(sample, ChannelSample):
        return sample.replace_tensor(rotated, phase_offset_rad=float(offset))
    return rotated


def apply_amplitude_scale(sample, max_deviation, seed=0):
    """Scale the whole tensor by one factor drawn from ``U[1-d, 1+d]``.

    Training-side augmentation; not applied anywhere by default.
    """
    d = float(max_deviation)
    if not 0.0 <= d < 1.0:
        raise InvalidConfigError("max_deviation must lie in [0, 1)")
    factor = float(np.random.default_rng(seed).uniform(1.0 - d, 1.0 + d))
    H = _tensor_of(sample)
    scaled = (H * factor).astype(H.dtype, copy=False)
    if isinstance(sample, ChannelSample):
        return sample.replace_tensor(scaled, amplitude_scale=factor)
    return scaled


def assign_splits(mesh_ids, fractions=(0.8, 0.1, 0.1), seed=0):
    """Assign every distinct mesh to exactly one split.

    Meshes are sorted, shuffled with ``seed`` and cut into consecutive blocks
    whose sizes follow ``fractions`` under largest-remainder rounding.

    Returns
    -------
    dict
        ``mesh_id -> split name``.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) != len(SPLIT_NAMES) or any(f < 0 or not math.isfinite(f) for f in fractions):
        raise InvalidConfigError(f"fractions must be {len(SPLIT_NAMES)} nonnegative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidConfigError(f"fractions must sum to 1, got {sum(fractions)}")
    unique = sorted(set(mesh_ids))
    n = len(unique)
    quotas = [f * n for f in fractions]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    perm = np.random.default_rng(seed).permutation(n)
    shuffled = [unique[i] for i in perm]
    out, start = {}, 0
    for name, count in zip(SPLIT_NAMES, counts):
        for mesh in shuffled[start:start + count]:
            out[mesh] = name
        start += count
    return out


@dataclass
class DatasetManifest:
    """Record table, split map and configuration echo of a container."""

    records: list = field(default_factory=list)
    splits: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def validate(self):
        seen = {}
        for rec in self.records:
            mesh = rec["mesh_id"]
            split = self.splits.get(mesh)
            if split is None:
                raise ContainerError(f"mesh {mesh!r} has no split assignment")
            if rec.get("split", split) != split:
                raise ContainerError(f"record {rec['id']} disagrees with split map for mesh {mesh!r}")
            seen.setdefault(mesh, split)
        spans = sorted((r["offset"], r["offset"] + r["length"]) for r in self.records)
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            if b0 < a1:
                raise ContainerError("record payloads overlap")
        return True


def _payload_bytes(tensor):
    H = np.ascontiguousarray(tensor, dtype=np.complex64)
    return H.astype("<c8", copy=False).tobytes(order="C")


def _record_for(sample, offset, length, split):
    return {
        "id": sample.sample_id,
        "class": int(sample.truth.class_id),
        "range_m": float(sample.truth.range),
        "azimuth_rad": float(sample.truth.azimuth),
        "center_projected_m": [float(v) for v in sample.truth.center_projected],
        "mesh_id": sample.mesh_id,
        "seed": int(sample.seed),
        "split": split,
        "shape": [int(s) for s in sample.tensor.shape],
        "offset": offset,
        "length": length,
        "metadata": sample.metadata,
    }


def build_manifest(samples, splits=None, config=None):
    """Manifest for ``samples`` with offsets laid out back to back."""
    if splits is None:
        splits = assign_splits([s.mesh_id for s in samples])
    records, offset = [], 0
    for s in samples:
        length = int(np.prod(s.tensor.shape)) * 8
        if s.mesh_id not in splits:
            raise ContainerError(f"mesh {s.mesh_id!r} missing from split map")
        records.append(_record_for(s, offset, length, splits[s.mesh_id]))
        offset += length
    used = {s.mesh_id for s in samples}
    return DatasetManifest(records, {m: splits[m] for m in sorted(used)}, dict(config or {}))


def _header_bytes(manifest):
    doc = {
        "format": "NFCT",
        "version": manifest.version,
        "payload": {"dtype": "float32", "layout": "interleaved re/im, row-major [rx][tx][k]",
                    "endianness": "little"},
        "config": manifest.config,
        "splits": manifest.splits,
        "records": manifest.records,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def write_container(samples, manifest, path):
    """Write ``samples`` described by ``manifest``; returns bytes written.

    ``manifest`` may be ``None`` to build one with default splits.
    """
    samples = list(samples)
    if manifest is None:
        manifest = build_manifest(samples)
    if len(manifest.records) != len(samples):
        raise ContainerError("manifest record count does not match samples")
    for rec, s in zip(manifest.records, samples):
        if list(rec["shape"]) != list(s.tensor.shape):
            raise ContainerError(f"record {rec['id']} shape {rec['shape']} != tensor {list(s.tensor.shape)}")
    manifest.validate()
    header = _header_bytes(manifest)
    buf = io.BytesIO()
    buf.write(_PREAMBLE.pack(MAGIC, manifest.version, len(header)))
    buf.write(header)
    base = buf.tell()
    for rec, s in zip(manifest.records, samples):
        if buf.tell() - base != rec["offset"]:
            raise ContainerError(f"record {rec['id']} offset is not contiguous")
        payload = _payload_bytes(s.tensor)
        if len(payload) != rec["length"]:
            raise ContainerError(f"record {rec['id']} length mismatch")
        buf.write(payload)
    data = buf.getvalue()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return len(data)


def read_container(path):
    """Read a container; returns ``(samples, manifest)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _PREAMBLE.size:
        raise ContainerError(f"{path}: truncated preamble ({len(data)} bytes)")
    magic, version, header_len = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported version {version}, expected {FORMAT_VERSION}")
    start = _PREAMBLE.size
    if len(data) < start + header_len:
        raise ContainerError(f"{path}: truncated header")
    try:
        doc = json.loads(data[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: malformed header: {exc}") from exc
    manifest = DatasetManifest(doc.get("records", []), doc.get("splits", {}), doc.get("config", {}),
                               doc.get("version", version))
    manifest.validate()
    base = start + header_len
    expected_end = base + sum(r["length"] for r in manifest.records)
    if len(data) < expected_end:
        raise ContainerError(f"{path}: truncated payload ({len(data)} < {expected_end} bytes)")
    if len(data) > expected_end:
        raise ContainerError(f"{path}: {len(data) - expected_end} trailing bytes after last record")
    samples = []
    for rec in manifest.records:
        shape = tuple(rec["shape"])
        if int(np.prod(shape)) * 8 != rec["length"]:
            raise ContainerError(f"record {rec['id']}: shape {shape} inconsistent with length {rec['length']}")
        lo = base + rec["offset"]
        arr = np.frombuffer(data, dtype="<c8", count=int(np.prod(shape)), offset=lo)
        tensor = arr.astype(np.complex64).reshape(shape)
        truth = GroundTruth(rec["class"], rec["range_m"], rec["azimuth_rad"],
                            tuple(rec.get("center_projected_m", (math.nan, math.nan))))
        samples.append(ChannelSample(tensor, truth, rec["mesh_id"], rec["seed"], rec.get("metadata", {}),
                                     rec["id"]))
    return samples, manifest


def write_labels_csv(manifest, path):
    """Sidecar CSV with columns ``id,class,range_m,azimuth_rad,split``."""
    rows = sorted(manifest.records, key=lambda r: r["id"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([r["id"], r["class"], repr(float(r["range_m"])), repr(float(r["azimuth_rad"])),
                             r["split"]])


def stack_tensors(samples):
    """Batch ``(n, N_r, N_t, K_s)`` from a list of samples (validated)."""
    if not samples:
        raise InvalidConfigError("no samples to stack")
    arr, _ = check_channel_tensor(np.stack([s.tensor for s in samples]))
    return arr
