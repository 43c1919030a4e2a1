"""Voxelized dielectric targets, poses, material jitter and ground-truth labels."""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from ._validation import check_count, check_positive, check_vector3
from .constants import EPS0
from .exceptions import InvalidConfigError

CLASS_NAMES = ("motorbike", "car")
MOTORBIKE, CAR = 0, 1


@dataclass(frozen=True)
class Material:
    """Isotropic lossy dielectric."""

    relative_permittivity: float
    conductivity: float = 0.0

    def __post_init__(self):
        eps = float(self.relative_permittivity)
        sigma = float(self.conductivity)
        if not (math.isfinite(eps) and eps >= 1.0):
            raise InvalidConfigError(f"relative permittivity must be >= 1, got {eps}")
        if not (math.isfinite(sigma) and sigma >= 0.0):
            raise InvalidConfigError(f"conductivity must be >= 0, got {sigma}")
        object.__setattr__(self, "relative_permittivity", eps)
        object.__setattr__(self, "conductivity", sigma)

    def to_dict(self):
        return {"relative_permittivity": self.relative_permittivity, "conductivity": self.conductivity}


METAL = Material(3.0, 1.0e4)
TIRE = Material(4.0, 1.0)
FREE_SPACE = Material(1.0, 0.0)


def contrast(material, angular_frequency):
    """Complex contrast ``eps_r - 1 - j*sigma/(omega*eps0)``."""
    omega = check_positive(angular_frequency, "angular_frequency")
    return complex(material.relative_permittivity - 1.0, -material.conductivity / (omega * EPS0))


def contrast_array(eps_minus_one, conductivity, angular_frequency):
    """Vectorized contrast from per-voxel ``eps_r - 1`` and ``sigma`` arrays."""
    omega = check_positive(angular_frequency, "angular_frequency")
    return np.asarray(eps_minus_one, dtype=float) - 1j * np.asarray(conductivity, dtype=float) / (omega * EPS0)


@dataclass(frozen=True, eq=False)
class VoxelTarget:
    """A voxelized body in its own frame, offsets centred on the voxel mean."""

    class_id: int
    voxel_offsets: np.ndarray
    voxel_materials: tuple
    voxel_pitch: float
    mesh_id: str = "procedural"

    def __post_init__(self):
        offsets = np.array(self.voxel_offsets, dtype=float)
        if offsets.ndim != 2 or offsets.shape[1] != 3 or offsets.shape[0] < 1:
            raise InvalidConfigError(f"voxel_offsets must be (N>=1, 3), got {offsets.shape}")
        materials = tuple(self.voxel_materials)
        if len(materials) != offsets.shape[0]:
            raise InvalidConfigError("voxel_materials must align with voxel_offsets")
        pitch = check_positive(self.voxel_pitch, "voxel_pitch")
        if np.unique(np.round(offsets / pitch, 6), axis=0).shape[0] != offsets.shape[0]:
            raise InvalidConfigError("voxel offsets must be unique")
        if np.max(np.abs(offsets.mean(axis=0))) > 1e-9:
            raise InvalidConfigError("voxel offsets must be centred on the body-frame origin")
        offsets.setflags(write=False)
        object.__setattr__(self, "voxel_offsets", offsets)
        object.__setattr__(self, "voxel_materials", materials)
        object.__setattr__(self, "voxel_pitch", pitch)
        object.__setattr__(self, "class_id", int(self.class_id))

    @property
    def n_voxels(self):
        return self.voxel_offsets.shape[0]

    @property
    def voxel_volume(self):
        return self.voxel_pitch ** 3

    def material_arrays(self):
        """Per-voxel ``(eps_r - 1, sigma)`` as float arrays."""
        eps = np.array([m.relative_permittivity - 1.0 for m in self.voxel_materials])
        sig = np.array([m.conductivity for m in self.voxel_materials])
        return eps, sig


def _centred_offsets(indices, pitch):
    idx = np.asarray(indices, dtype=float)
    offsets = idx * pitch
    return offsets - offsets.mean(axis=0)


def _grid_counts(dimensions, pitch):
    dims = check_vector3(dimensions, "dimensions")
    if np.any(dims + 1e-12 < pitch):
        raise InvalidConfigError(f"every dimension must be >= pitch ({pitch}), got {dims.tolist()}")
    return tuple(int(np.floor(d / pitch + 1e-9)) for d in dims)


def _tire_size(*counts):
    return max(1, min(counts))


def shell_indices(nx, ny, nz):
    """Voxel indices on the surface of an ``nx*ny*nz`` box (vectorized)."""
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    on_surface = (i == 0) | (i == nx - 1) | (j == 0) | (j == ny - 1) | (k == 0) | (k == nz - 1)
    return np.stack([i[on_surface], j[on_surface], k[on_surface]], axis=1)


def make_procedural_target(class_id, dimensions, pitch, metal=METAL, tire=TIRE, mesh_id=None):
    """Deterministic stand-in vehicle built on a voxel grid.

    Class 0 (motorbike) is a one-voxel-thick slab in the x-z plane with tire
    clusters at its two bottom ends. Class 1 (car) is the hollow shell of a
    box with tire clusters at its four bottom corners. Tires are only placed
    when the grid is at least two voxels long and tall; otherwise every voxel
    is metal.
    """
    pitch = check_positive(pitch, "pitch")
    if class_id not in (MOTORBIKE, CAR):
        raise InvalidConfigError(f"class_id must be 0 (motorbike) or 1 (car), got {class_id}")
    nx, ny, nz = _grid_counts(dimensions, pitch)
    if class_id == MOTORBIKE:
        jc = (ny - 1) // 2
        i, k = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
        idx = np.stack([i.ravel(), np.full(i.size, jc), k.ravel()], axis=1)
        t = _tire_size(nx // 4, nz // 2)
        is_tire = (idx[:, 2] < t) & ((idx[:, 0] < t) | (idx[:, 0] >= nx - t))
    else:
        idx = shell_indices(nx, ny, nz)
        t = _tire_size(nx // 4, ny // 2, nz // 2)
        is_tire = (
            (idx[:, 2] < t)
            & ((idx[:, 0] < t) | (idx[:, 0] >= nx - t))
            & ((idx[:, 1] < t) | (idx[:, 1] >= ny - t))
        )
    if nx < 2 or nz < 2:
        is_tire[:] = False
    materials = tuple(tire if flag else metal for flag in is_tire)
    if mesh_id is None:
        mesh_id = f"{CLASS_NAMES[class_id]}-{nx}x{ny}x{nz}"
    return VoxelTarget(class_id, _centred_offsets(idx, pitch), materials, pitch, mesh_id)


def rotation_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def wrap_heading(angle):
    """Wrap to ``[-pi, pi)``."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class MaterialJitterSpec:
    """Uniform multiplicative jitter half-width ``delta`` for ``eps_r - 1`` and ``sigma``."""

    delta: float = 0.1

    def __post_init__(self):
        d = float(self.delta)
        if not (0.0 <= d < 1.0):
            raise InvalidConfigError(f"jitter delta must lie in [0, 1), got {d}")
        object.__setattr__(self, "delta", d)


@dataclass(frozen=True, eq=False)
class PlacedScene:
    """A target posed in the world frame, with sampled material perturbations.

    ``world_positions`` and ``jitter_factors`` (columns: eps, sigma) are
    derived from the pose and the seed at construction by :func:`place`.
    """

    target: VoxelTarget
    heading: float
    center: np.ndarray
    material_jitter_seed: int
    world_positions: np.ndarray = field(repr=False)
    jitter_factors: np.ndarray = field(repr=False)

    @property
    def n_voxels(self):
        return self.target.n_voxels

    @property
    def voxel_volume(self):
        return self.target.voxel_volume

    def contrasts(self, angular_frequency):
        """Per-voxel complex contrast at ``angular_frequency`` including jitter."""
        eps, sig = self.target.material_arrays()
        return contrast_array(eps * self.jitter_factors[:, 0], sig * self.jitter_factors[:, 1],
                              angular_frequency)

    def with_voxel_order(self, permutation):
        """Same scene with voxels listed in a different order."""
        perm = np.asarray(permutation)
        target = VoxelTarget(
            self.target.class_id,
            self.target.voxel_offsets[perm] - self.target.voxel_offsets[perm].mean(axis=0),
            tuple(self.target.voxel_materials[p] for p in perm),
            self.target.voxel_pitch,
            self.target.mesh_id,
        )
        return PlacedScene(target, self.heading, self.center, self.material_jitter_seed,
                           self.world_positions[perm], self.jitter_factors[perm])

    def metadata(self):
        return {
            "class_id": self.target.class_id,
            "mesh_id": self.target.mesh_id,
            "heading_rad": self.heading,
            "center_m": [float(c) for c in self.center],
            "n_voxels": self.n_voxels,
            "voxel_pitch_m": self.target.voxel_pitch,
            "material_jitter_seed": self.material_jitter_seed,
        }


def place(target, heading, center, jitter=MaterialJitterSpec(), seed=0):
    """Rotate ``target`` by ``heading`` about z, translate to ``center``, draw jitter."""
    heading = float(heading)
    if not math.isfinite(heading):
        raise InvalidConfigError("heading must be finite")
    center = check_vector3(center, "center")
    world = target.voxel_offsets @ rotation_z(heading).T + center
    if jitter.delta == 0.0:
        factors = np.ones((target.n_voxels, 2))
    else:
        rng = np.random.default_rng(seed)
        factors = rng.uniform(1.0 - jitter.delta, 1.0 + jitter.delta, size=(target.n_voxels, 2))
    world.setflags(write=False)
    factors.setflags(write=False)
    return PlacedScene(target, wrap_heading(heading), center, int(seed), world, factors)


def place_points(positions, materials, pitch, class_id=0, mesh_id="points"):
    """Build a scene directly from world-frame voxel centres (no jitter, no rotation).

    Convenient for synthetic fixtures such as single-voxel point targets.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if isinstance(materials, Material):
        materials = (materials,) * positions.shape[0]
    center = positions.mean(axis=0)
    target = VoxelTarget(class_id, positions - center, tuple(materials), pitch, mesh_id)
    return PlacedScene(target, 0.0, center, 0, positions.copy(), np.ones((positions.shape[0], 2)))


@dataclass(frozen=True)
class GroundTruth:
    class_id: int
    range: float
    azimuth: float
    center_projected: tuple

    def to_dict(self):
        return {
            "class_id": self.class_id,
            "range_m": self.range,
            "azimuth_rad": self.azimuth,
            "center_projected_m": list(self.center_projected),
        }


def ground_truth(scene):
    """Range and azimuth of the projected voxel centroid (z dropped)."""
    positions = np.asarray(scene.world_positions)
    if positions.size == 0:
        raise InvalidConfigError("scene has no voxels")
    centroid = positions.mean(axis=0)
    x_c, y_c = float(centroid[0]), float(centroid[1])
    return GroundTruth(scene.target.class_id, math.hypot(x_c, y_c), math.atan2(y_c, x_c), (x_c, y_c))


def load_voxel_file(path):
    """Read a voxel import file.

    The JSON document holds ``pitch``, ``class_id``, ``mesh_id``, an inline
    ``materials`` table (list of ``{"relative_permittivity", "conductivity"}``)
    and ``voxels``: a list of ``[i, j, k, material_index]`` integer rows.
    Offsets are centred on the voxel mean.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return voxel_target_from_dict(doc)


def voxel_target_from_dict(doc):
    required = {"pitch", "class_id", "mesh_id", "materials", "voxels"}
    missing = required - set(doc)
    if missing:
        raise InvalidConfigError(f"voxel file missing keys: {sorted(missing)}")
    unknown = set(doc) - required
    if unknown:
        raise InvalidConfigError(f"voxel file has unknown keys: {sorted(unknown)}")
    table = [Material(**m) for m in doc["materials"]]
    rows = np.asarray(doc["voxels"])
    if rows.ndim != 2 or rows.shape[1] != 4 or not np.issubdtype(rows.dtype, np.integer):
        raise InvalidConfigError("voxels must be a list of [i, j, k, material_index] integer rows")
    if rows[:, 3].min() < 0 or rows[:, 3].max() >= len(table):
        raise InvalidConfigError("material index out of range")
    pitch = check_positive(doc["pitch"], "pitch")
    check_count(doc["class_id"], "class_id", minimum=0)
    materials = tuple(table[m] for m in rows[:, 3])
    return VoxelTarget(doc["class_id"], _centred_offsets(rows[:, :3], pitch), materials, pitch,
                       str(doc["mesh_id"]))


def voxel_target_to_dict(target):
    """Inverse of :func:`voxel_target_from_dict` (materials deduplicated)."""
    table, rows = [], []
    lookup = {}
    base = target.voxel_offsets.min(axis=0)
    ijk = np.rint((target.voxel_offsets - base) / target.voxel_pitch).astype(int)
    for (i, j, k), mat in zip(ijk, target.voxel_materials):
        if mat not in lookup:
            lookup[mat] = len(table)
            table.append(mat.to_dict())
        rows.append([int(i), int(j), int(k), lookup[mat]])
    return {"pitch": target.voxel_pitch, "class_id": target.class_id, "mesh_id": target.mesh_id,
            "materials": table, "voxels": rows}
