"""Cross-shaped MIMO array and OFDM subcarrier grid."""

from dataclasses import dataclass, field
import numpy as np

from ._validation import check_count, check_positive, check_vector3
from .constants import C0, TWO_PI
from .exceptions import InvalidConfigError

DEFAULT_SUBCARRIER_SPACING = 1.0e6
# Unit dipole along z: broadside to the tx (y) axis and radiating maximally in
# the z=0 sensing plane. See README "Conventions".
DEFAULT_DIPOLE = (0.0, 0.0, 1.0)
DEFAULT_POLARIZATION = (0.0, 0.0, 1.0)


def wavenumber(frequency):
    """Free-space wavenumber ``2*pi*f/c0`` in rad/m."""
    frequency = check_positive(frequency, "frequency")
    return TWO_PI * frequency / C0


def wavelength(frequency):
    return C0 / check_positive(frequency, "frequency")


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element positions and excitations of a transmit/receive array pair.

    Attributes
    ----------
    tx_positions, rx_positions : ndarray, shape (N, 3)
        Element positions in metres.
    tx_dipole_moments : ndarray, shape (N_t, 3), complex
        Effective dipole moment of each transmit element (unit scale).
    rx_polarizations : ndarray, shape (N_r, 3), complex
        Unit-norm receive polarization vectors.
    carrier_frequency : float
        Carrier in Hz.
    element_spacing : float
        Inter-element spacing in metres.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    tx_dipole_moments: np.ndarray
    rx_polarizations: np.ndarray
    carrier_frequency: float
    element_spacing: float

    def __post_init__(self):
        for name in ("tx_positions", "rx_positions"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
                raise InvalidConfigError(f"{name} must have shape (N>=1, 3), got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        moments = np.array(self.tx_dipole_moments, dtype=complex)
        pols = np.array(self.rx_polarizations, dtype=complex)
        if moments.shape != self.tx_positions.shape:
            raise InvalidConfigError("tx_dipole_moments must match tx_positions in shape")
        if pols.shape != self.rx_positions.shape:
            raise InvalidConfigError("rx_polarizations must match rx_positions in shape")
        norms = np.linalg.norm(pols, axis=1)
        if np.any(norms == 0):
            raise InvalidConfigError("rx polarization vectors must be nonzero")
        pols = pols / norms[:, None]
        moments.setflags(write=False)
        pols.setflags(write=False)
        object.__setattr__(self, "tx_dipole_moments", moments)
        object.__setattr__(self, "rx_polarizations", pols)
        object.__setattr__(self, "carrier_frequency", check_positive(self.carrier_frequency, "carrier"))
        object.__setattr__(self, "element_spacing", check_positive(self.element_spacing, "element_spacing"))

    @property
    def n_tx(self):
        return self.tx_positions.shape[0]

    @property
    def n_rx(self):
        return self.rx_positions.shape[0]

    @property
    def carrier_wavelength(self):
        return C0 / self.carrier_frequency

    def aperture(self, which="tx"):
        """Physical length ``(N-1)*d`` of the tx or rx line."""
        n = self.n_tx if which == "tx" else self.n_rx
        return (n - 1) * self.element_spacing

    def to_dict(self):
        return {
            "n_tx": self.n_tx,
            "n_rx": self.n_rx,
            "carrier_hz": self.carrier_frequency,
            "element_spacing_m": self.element_spacing,
            "tx_dipole_moment": _complex_list(self.tx_dipole_moments[0]),
            "rx_polarization": _complex_list(self.rx_polarizations[0]),
        }


def _complex_list(vec):
    return [[float(v.real), float(v.imag)] for v in np.asarray(vec, dtype=complex)]


def _centered_line(n, spacing, axis):
    pos = np.zeros((n, 3))
    pos[:, axis] = (np.arange(n) - (n - 1) / 2.0) * spacing
    return pos


def build_cross_array(n_tx, n_rx, carrier, spacing_fraction=0.5,
                      dipole_moment=DEFAULT_DIPOLE, rx_polarization=DEFAULT_POLARIZATION):
    """Build the cross-shaped array: tx ULA on the y-axis, rx ULA on the z-axis.

    Both lines are centred on the origin with spacing
    ``spacing_fraction * c0 / carrier``. Every tx element gets the same dipole
    moment and every rx element the same (normalized) polarization.
    """
    n_tx = check_count(n_tx, "n_tx")
    n_rx = check_count(n_rx, "n_rx")
    carrier = check_positive(carrier, "carrier")
    spacing_fraction = check_positive(spacing_fraction, "spacing_fraction")
    spacing = spacing_fraction * C0 / carrier
    moment = check_vector3(dipole_moment, "dipole_moment", dtype=complex)
    pol = check_vector3(rx_polarization, "rx_polarization", dtype=complex)
    return ArrayGeometry(
        tx_positions=_centered_line(n_tx, spacing, axis=1),
        rx_positions=_centered_line(n_rx, spacing, axis=2),
        tx_dipole_moments=np.tile(moment, (n_tx, 1)),
        rx_polarizations=np.tile(pol, (n_rx, 1)),
        carrier_frequency=carrier,
        element_spacing=spacing,
    )


def colocated_array(array):
    """Return a copy of ``array`` whose receivers duplicate the transmitters.

    Receive polarizations are set to the normalized conjugate of each tx
    dipole moment, so ``q^H`` applies the same real direction as ``p``. Used
    by the reciprocity check.
    """
    moments = np.asarray(array.tx_dipole_moments)
    pols = np.conj(moments) / np.linalg.norm(moments, axis=1)[:, None]
    return ArrayGeometry(
        tx_positions=array.tx_positions,
        rx_positions=array.tx_positions.copy(),
        tx_dipole_moments=moments,
        rx_polarizations=pols,
        carrier_frequency=array.carrier_frequency,
        element_spacing=array.element_spacing,
    )


def select_even(k_total, k_selected):
    """Indices of ``k_selected`` tones spread evenly over ``[0, k_total-1]``.

    Both endpoints are included when ``k_selected >= 2``; fractional
    positions round to nearest with ties going to the lower index. A single
    tone is taken at ``k_total // 2``.
    """
    k_total = check_count(k_total, "k_total")
    k_selected = check_count(k_selected, "k_selected")
    if k_selected > k_total:
        raise InvalidConfigError(f"k_selected={k_selected} exceeds k_total={k_total}")
    if k_selected == 1:
        return np.array([k_total // 2])
    step = (k_total - 1) / (k_selected - 1)
    ideal = np.arange(k_selected) * step
    # round half down
    idx = np.ceil(ideal - 0.5 - 1e-12).astype(int)
    return np.clip(idx, 0, k_total - 1)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """OFDM subcarriers and the subset selected for sensing."""

    subcarrier_frequencies: np.ndarray
    selected_indices: np.ndarray
    wavenumbers: np.ndarray = field(init=False)

    def __post_init__(self):
        freqs = np.array(self.subcarrier_frequencies, dtype=float)
        if freqs.ndim != 1 or freqs.size < 1 or np.any(freqs <= 0):
            raise InvalidConfigError("subcarrier frequencies must be a nonempty positive 1-D array")
        sel = np.array(self.selected_indices, dtype=int)
        if sel.ndim != 1 or sel.size < 1:
            raise InvalidConfigError("selected_indices must be a nonempty 1-D array")
        if np.any(np.diff(sel) <= 0) or sel[0] < 0 or sel[-1] >= freqs.size:
            raise InvalidConfigError("selected_indices must be strictly increasing within [0, K)")
        k0 = TWO_PI * freqs / C0
        for arr in (freqs, sel, k0):
            arr.setflags(write=False)
        object.__setattr__(self, "subcarrier_frequencies", freqs)
        object.__setattr__(self, "selected_indices", sel)
        object.__setattr__(self, "wavenumbers", k0)

    @property
    def k_total(self):
        return self.subcarrier_frequencies.size

    @property
    def k_selected(self):
        return self.selected_indices.size

    @property
    def selected_frequencies(self):
        return self.subcarrier_frequencies[self.selected_indices]

    @property
    def selected_wavenumbers(self):
        return self.wavenumbers[self.selected_indices]

    def to_dict(self):
        return {
            "subcarrier_frequencies_hz": [float(f) for f in self.subcarrier_frequencies],
            "selected_indices": [int(i) for i in self.selected_indices],
        }


def build_frequency_grid(carrier, spacing=DEFAULT_SUBCARRIER_SPACING, k_total=16, k_selected=None):
    """Centered subcarrier grid ``f_i = carrier + (i - (K-1)/2) * spacing``."""
    carrier = check_positive(carrier, "carrier")
    spacing = check_positive(spacing, "spacing")
    k_total = check_count(k_total, "k_total")
    if k_selected is None:
        k_selected = k_total
    sel = select_even(k_total, k_selected)
    freqs = carrier + (np.arange(k_total) - (k_total - 1) / 2.0) * spacing
    if freqs[0] <= 0:
        raise InvalidConfigError("subcarrier grid extends to nonpositive frequencies")
    return FrequencyGrid(subcarrier_frequencies=freqs, selected_indices=sel)


def angular_frequency(frequency):
    return TWO_PI * check_positive(frequency, "frequency")


def unambiguous_range(spacing):
    """Round-trip unambiguous range ``c0 / (2*spacing)``."""
    return C0 / (2.0 * check_positive(spacing, "spacing"))


__all__ = [
    "ArrayGeometry",
    "FrequencyGrid",
    "build_cross_array",
    "build_frequency_grid",
    "colocated_array",
    "select_even",
    "wavenumber",
    "wavelength",
    "angular_frequency",
    "unambiguous_range",
]
