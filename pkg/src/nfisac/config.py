"""Run configuration: one JSON document with named sections and two built-in profiles.

Unknown keys are rejected at every level, and every default is echoed back
by :meth:`RunConfig.to_dict` so outputs are self-describing.
"""

import copy
import json
import math

from .classical import ESTIMATORS, SearchGrid
from .em import METHODS
from .exceptions import InvalidConfigError
from .geometry import build_cross_array, build_frequency_grid
from .scenes import SceneSampling
from .tradeoff import QosTargets, RateConfig

PROFILES = ("desk", "paper")

_BASE = {
    "profile": "desk",
    "seed": 0,
    "array": {"n_tx": 8, "n_rx": 8, "carrier_hz": 4.9e9, "spacing_fraction": 0.5,
              "dipole_moment": [0.0, 0.0, 1.0], "rx_polarization": [0.0, 0.0, 1.0]},
    "grid": {"spacing_hz": 1e6, "k_total": 16, "k_selected": 2},
    "scene": {"count": 8, "range_min_m": 5.0, "range_max_m": 50.0,
              "azimuth_min_deg": -60.0, "azimuth_max_deg": 60.0,
              "z_min_m": -0.25, "z_max_m": 0.25, "class_mix": [0.5, 0.5],
              "meshes_per_class": 10, "pitch_m": 0.6, "jitter_delta": 0.1,
              "single_voxel": False, "split_fractions": [0.8, 0.1, 0.1]},
    "solver": {"method": "auto"},
    "estimator": {"name": "matched_filter", "zero_pad": 8, "scan_axis": "tx",
                  "range_min_m": 5.0, "range_max_m": 50.0,
                  "azimuth_min_deg": -60.0, "azimuth_max_deg": 60.0,
                  "range_step_m": 0.5, "azimuth_step_deg": 1.0, "levels": 3, "shrink": 5},
    "rate": {"k_total": 64, "snr_db": 15.0, "mc_draws": 1_000_000, "k_values": [1, 2, 4, 8, 16]},
    "qos": {"targets": {"QoS-I": [0.980, 1.50], "QoS-II": [0.985, 1.30]}},
    "output": {"container": "dataset.nfct", "labels": "labels.csv", "manifest": "manifest.json",
               "predictions": "predictions.csv", "metrics": "metrics.csv",
               "sensitivity": "sensitivity.csv", "rates": "rates.csv", "qos": "qos.csv"},
}

_PROFILE_OVERRIDES = {
    "desk": {},
    "paper": {"array": {"n_tx": 64, "n_rx": 64}, "grid": {"k_selected": 16},
              "scene": {"pitch_m": 0.3}},
}

# sections whose values are free-form maps rather than fixed schemas
_OPEN_MAPS = {("qos", "targets")}


def _merge(base, override, path=()):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = ".".join(path + (key,))
        if key not in base and path not in _OPEN_MAPS:
            raise InvalidConfigError(f"unknown config key {where!r}")
        if isinstance(base.get(key), dict) and path + (key,) not in _OPEN_MAPS:
            if not isinstance(value, dict):
                raise InvalidConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, path + (key,))
        else:
            out[key] = copy.deepcopy(value)
    return out


def profile_defaults(profile="desk"):
    if profile not in PROFILES:
        raise InvalidConfigError(f"profile must be one of {PROFILES}, got {profile!r}")
    doc = _merge(_BASE, _PROFILE_OVERRIDES[profile])
    doc["profile"] = profile
    return doc


class RunConfig:
    """Validated run configuration.

    Parameters
    ----------
    doc : dict, optional
        Partial configuration; missing keys take the values of the selected
        ``profile`` (``"desk"`` by default).

    Examples
    --------
    >>> cfg = RunConfig({"profile": "desk", "seed": 3})
    >>> cfg.array().n_tx, cfg.grid().k_selected
    (8, 2)
    """

    def __init__(self, doc=None):
        if doc is not None and not isinstance(doc, dict):
            raise InvalidConfigError("configuration must be a JSON object")
        doc = dict(doc or {})
        profile = doc.get("profile", "desk")
        self._doc = _merge(profile_defaults(profile), doc)
        self.validate()

    @classmethod
    def from_json(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise InvalidConfigError(f"{path}: top level must be an object")
        return cls(doc)

    def to_dict(self):
        return copy.deepcopy(self._doc)

    def __getitem__(self, section):
        return copy.deepcopy(self._doc[section])

    @property
    def seed(self):
        return int(self._doc["seed"])

    def with_overrides(self, **sections):
        return RunConfig(_merge(self._doc, sections))

    def validate(self):
        """Build every typed object once so bad values fail before any work."""
        seed = self._doc["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise InvalidConfigError(f"seed must be a nonnegative integer, got {seed!r}")
        self.array()
        self.grid()
        self.sampling()
        if self._doc["solver"]["method"] not in METHODS:
            raise InvalidConfigError(f"solver.method must be one of {METHODS}")
        name = self.estimator_name()
        if name not in ESTIMATORS:
            raise InvalidConfigError(f"estimator.name must be one of {ESTIMATORS}")
        est = self._doc["estimator"]
        if est["scan_axis"] not in ("tx", "rx") or int(est["zero_pad"]) < 1:
            raise InvalidConfigError("estimator.scan_axis must be tx|rx and zero_pad >= 1")
        self.search()
        rc = self.rate_config()
        for k in self.rate_k_values():
            if k >= rc.k_total:
                raise InvalidConfigError(f"rate.k_values entry {k} leaves no communication tones")
        self.qos_targets()
        fr = self._doc["scene"]["split_fractions"]
        if len(fr) != 3 or abs(sum(fr) - 1.0) > 1e-9 or min(fr) < 0:
            raise InvalidConfigError("scene.split_fractions must be three nonnegative values summing to 1")
        if int(self._doc["scene"]["count"]) < 0:
            raise InvalidConfigError("scene.count must be >= 0")
        return True

    # typed views -----------------------------------------------------------

    def array(self):
        a = self._doc["array"]
        return build_cross_array(a["n_tx"], a["n_rx"], a["carrier_hz"], a["spacing_fraction"],
                                 a["dipole_moment"], a["rx_polarization"])

    def grid(self):
        g = self._doc["grid"]
        return build_frequency_grid(self._doc["array"]["carrier_hz"], g["spacing_hz"],
                                    g["k_total"], g["k_selected"])

    def sampling(self):
        s = self._doc["scene"]
        return SceneSampling(
            range_min=float(s["range_min_m"]), range_max=float(s["range_max_m"]),
            azimuth_min=math.radians(s["azimuth_min_deg"]),
            azimuth_max=math.radians(s["azimuth_max_deg"]),
            z_min=float(s["z_min_m"]), z_max=float(s["z_max_m"]),
            class_mix=tuple(s["class_mix"]), meshes_per_class=int(s["meshes_per_class"]),
            pitch=float(s["pitch_m"]), jitter_delta=float(s["jitter_delta"]),
            single_voxel=bool(s["single_voxel"]))

    def sample_count(self):
        return int(self._doc["scene"]["count"])

    def split_fractions(self):
        return tuple(float(v) for v in self._doc["scene"]["split_fractions"])

    def solver_method(self):
        return self._doc["solver"]["method"]

    def estimator_name(self):
        return str(self._doc["estimator"]["name"]).replace("-", "_")

    def search(self):
        e = self._doc["estimator"]
        return SearchGrid(
            range_min=float(e["range_min_m"]), range_max=float(e["range_max_m"]),
            azimuth_min=math.radians(e["azimuth_min_deg"]),
            azimuth_max=math.radians(e["azimuth_max_deg"]),
            range_step=float(e["range_step_m"]), azimuth_step=math.radians(e["azimuth_step_deg"]),
            levels=int(e["levels"]), shrink=int(e["shrink"]))

    def estimator_options(self, name=None):
        name = (name or self.estimator_name()).replace("-", "_")
        e = self._doc["estimator"]
        if name == "periodogram":
            return {"zero_pad": int(e["zero_pad"]), "scan_axis": e["scan_axis"], "search": self.search()}
        return {"search": self.search()}

    def rate_config(self):
        r = self._doc["rate"]
        return RateConfig(int(r["k_total"]), float(r["snr_db"]), int(r["mc_draws"]), self.seed)

    def rate_k_values(self):
        return [int(k) for k in self._doc["rate"]["k_values"]]

    def qos_targets(self):
        out = {}
        for name, pair in self._doc["qos"]["targets"].items():
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise InvalidConfigError(f"qos target {name!r} must be [tau_cls, tau_loc_m]")
            out[name] = QosTargets(float(pair[0]), float(pair[1]))
        return out

    def output_name(self, key):
        return self._doc["output"][key]
