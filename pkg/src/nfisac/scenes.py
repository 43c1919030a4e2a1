"""Randomized scene sampling: mesh catalogue, poses and material jitter."""

from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import check_count, check_positive
from .exceptions import InvalidConfigError
from .targets import MaterialJitterSpec, make_procedural_target, place, wrap_heading

CLASS_NAMES = ("motorbike", "car")

# (length, width, height) ranges in metres per class; the motorbike slab is
# one voxel thick regardless of the sampled width
DIMENSION_RANGES = {
    0: ((1.8, 2.2), (0.6, 0.8), (1.0, 1.3)),
    1: ((3.9, 4.8), (1.6, 1.9), (1.3, 1.6)),
}


@dataclass(frozen=True)
class SceneSampling:
    """Placement region, class mix and mesh catalogue size (angles in radians)."""

    range_min: float = 5.0
    range_max: float = 50.0
    azimuth_min: float = math.radians(-60.0)
    azimuth_max: float = math.radians(60.0)
    z_min: float = -0.25
    z_max: float = 0.25
    class_mix: tuple = (0.5, 0.5)
    meshes_per_class: int = 10
    pitch: float = 0.3
    jitter_delta: float = 0.1
    single_voxel: bool = False

    def __post_init__(self):
        check_positive(self.range_min, "range_min")
        if not self.range_max >= self.range_min:
            raise InvalidConfigError("range_max must be >= range_min")
        if not self.azimuth_max >= self.azimuth_min:
            raise InvalidConfigError("azimuth_max must be >= azimuth_min")
        if not (-math.pi <= self.azimuth_min and self.azimuth_max < math.pi):
            raise InvalidConfigError("azimuth bounds must lie in [-pi, pi)")
        if not self.z_max >= self.z_min:
            raise InvalidConfigError("z_max must be >= z_min")
        mix = tuple(float(v) for v in self.class_mix)
        if len(mix) != len(CLASS_NAMES) or any(v < 0 for v in mix) or sum(mix) <= 0:
            raise InvalidConfigError(f"class_mix needs {len(CLASS_NAMES)} nonnegative weights")
        object.__setattr__(self, "class_mix", mix)
        check_count(self.meshes_per_class, "meshes_per_class")
        check_positive(self.pitch, "pitch")
        MaterialJitterSpec(self.jitter_delta)

    def to_dict(self):
        return {
            "range_min_m": self.range_min, "range_max_m": self.range_max,
            "azimuth_min_deg": math.degrees(self.azimuth_min),
            "azimuth_max_deg": math.degrees(self.azimuth_max),
            "z_min_m": self.z_min, "z_max_m": self.z_max,
            "class_mix": list(self.class_mix), "meshes_per_class": self.meshes_per_class,
            "pitch_m": self.pitch, "jitter_delta": self.jitter_delta,
            "single_voxel": self.single_voxel,
        }


@dataclass(frozen=True)
class MeshEntry:
    mesh_id: str
    class_id: int
    dimensions: tuple = field(default=(0.0, 0.0, 0.0))


def mesh_catalogue(sampling, seed=0):
    """Deterministic list of procedural meshes, ``meshes_per_class`` per class."""
    rng = np.random.default_rng([seed, 0x6D657368])
    out = []
    for class_id, name in enumerate(CLASS_NAMES):
        for m in range(sampling.meshes_per_class):
            if sampling.single_voxel:
                dims = (sampling.pitch,) * 3
            else:
                dims = tuple(float(rng.uniform(lo, hi)) for lo, hi in DIMENSION_RANGES[class_id])
            out.append(MeshEntry(f"{name}-{m:03d}", class_id, dims))
    return out


def sample_scenes(sampling, count, seed=0):
    """Draw ``count`` placed scenes.

    Sample ``i`` uses its own child stream of ``SeedSequence(seed)``, so the
    scene list is a deterministic function of ``(sampling, count, seed)`` and
    any prefix is independent of ``count``.
    """
    count = check_count(count, "count", minimum=0)
    catalogue = mesh_catalogue(sampling, seed)
    by_class = {c: [m for m in catalogue if m.class_id == c] for c in range(len(CLASS_NAMES))}
    mix = np.asarray(sampling.class_mix) / sum(sampling.class_mix)
    jitter = MaterialJitterSpec(sampling.jitter_delta)
    children = np.random.SeedSequence([seed, 0x7363656E]).spawn(count)
    targets = {}
    scenes = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        class_id = int(rng.choice(len(CLASS_NAMES), p=mix))
        entry = by_class[class_id][int(rng.integers(len(by_class[class_id])))]
        r = rng.uniform(sampling.range_min, sampling.range_max)
        az = rng.uniform(sampling.azimuth_min, sampling.azimuth_max)
        z = rng.uniform(sampling.z_min, sampling.z_max)
        heading = wrap_heading(rng.uniform(-math.pi, math.pi))
        jitter_seed = int(rng.integers(2 ** 31))
        if entry.mesh_id not in targets:
            targets[entry.mesh_id] = make_procedural_target(
                entry.class_id, entry.dimensions, sampling.pitch, mesh_id=entry.mesh_id)
        center = (r * math.cos(az), r * math.sin(az), z)
        scenes.append(place(targets[entry.mesh_id], heading, center, jitter, jitter_seed))
    return scenes
