"""Full-wave forward model.

Dipole excitation, the free-space dyadic Green's function, a point-collocation
volume integral equation solver and channel-matrix assembly. All phases use
the ``exp(-j k0 R)`` convention of the scalar kernel.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, aslinearoperator, bicgstab

from ._validation import check_points, check_positive, check_vector3
from .constants import C0, EPS0
from .exceptions import InvalidConfigError, SingularityError, SolverError

METHODS = ("auto", "dense_direct", "iterative", "born")
DENSE_UNKNOWN_LIMIT = 3000
ITERATIVE_RTOL = 1e-8
ITERATIVE_MAXITER = 500
_COINCIDENT_TOL = 1e-12


class PitchWarning(UserWarning):
    """Voxel pitch is coarse relative to the wavelength."""


def scalar_green(k0, distance):
    """``exp(-j k0 R) / (4 pi R)``; ``k0 = 0`` gives the static kernel."""
    k0 = check_positive(k0, "k0", allow_zero=True)
    R = np.asarray(distance, dtype=float)
    if np.any(R <= 0):
        raise SingularityError("scalar Green's function is singular at R <= 0")
    out = np.exp(-1j * k0 * R) / (4.0 * np.pi * R)
    return out.item() if out.ndim == 0 else out


def _separation(observation, source):
    diff = np.asarray(observation, dtype=float) - np.asarray(source, dtype=float)
    R = np.linalg.norm(diff, axis=-1)
    if np.any(R <= _COINCIDENT_TOL):
        raise SingularityError("observation and source points coincide")
    return diff / R[..., None], R


def _dyadic_from_geometry(k0, rhat, R):
    """Closed-form dyadic Green's function from unit separation and distance.

    ``rhat`` has shape ``(..., 3)`` and ``R`` shape ``(...)``; returns
    ``(..., 3, 3)``.
    """
    kR = k0 * R
    g = np.exp(-1j * kR) / (4.0 * np.pi * R)
    inv = 1.0 / kR
    inv2 = inv * inv
    a = g * (1.0 - 1j * inv - inv2)
    b = g * (-1.0 + 3j * inv + 3.0 * inv2)
    outer = rhat[..., :, None] * rhat[..., None, :]
    return a[..., None, None] * np.eye(3) + b[..., None, None] * outer


def dyadic_green(k0, observation, source):
    """Free-space dyadic Green's function ``(I + grad grad^T / k0^2) g(|r - r'|)``.

    Parameters
    ----------
    k0 : float
        Wavenumber in rad/m, must be positive.
    observation, source : array_like, shape (3,)
        Field and source points.

    Returns
    -------
    ndarray, shape (3, 3), complex
    """
    k0 = check_positive(k0, "k0")
    obs = check_vector3(observation, "observation")
    src = check_vector3(source, "source")
    rhat, R = _separation(obs, src)
    return _dyadic_from_geometry(k0, rhat, R)


def dyadic_green_block(k0, observations, sources):
    """Kernel for every (observation, source) pair: shape ``(M, N, 3, 3)``."""
    k0 = check_positive(k0, "k0")
    obs = check_points(observations, "observations")
    src = check_points(sources, "sources")
    rhat, R = _separation(obs[:, None, :], src[None, :, :])
    return _dyadic_from_geometry(k0, rhat, R)


def dipole_field(k0, observation, source, moment):
    """Electric field of a small electric dipole in free space.

    Evaluates the radiation, induction and quasi-static terms directly (not
    via :func:`dyadic_green`), so the two closed forms can be cross-checked:
    ``eps0 * dipole_field == k0**2 * dyadic_green @ moment``. The induction
    term carries ``+j k0 / R^2``, which is what differentiating the
    ``exp(-j k0 R)`` kernel yields.
    """
    k0 = check_positive(k0, "k0", allow_zero=True)
    obs = np.asarray(observation, dtype=float)
    src = np.asarray(source, dtype=float)
    p = np.asarray(moment, dtype=complex)
    rhat, R = _separation(obs, src)
    outer = rhat[..., :, None] * rhat[..., None, :]
    eye = np.eye(3)
    radiation = (k0 ** 2 / R)[..., None, None] * (eye - outer)
    near = (1.0 / R ** 3 + 1j * k0 / R ** 2)[..., None, None] * (3.0 * outer - eye)
    phase = np.exp(-1j * k0 * R) / (4.0 * np.pi * EPS0)
    kernel = phase[..., None, None] * (radiation + near)
    return np.einsum("...ij,...j->...i", kernel, p)


def incident_matrix(array, k0, position):
    """Incident-field transfer matrix at one point: column ``t`` is the field of tx element ``t``."""
    pos = check_vector3(position, "position")
    return incident_matrices(array, k0, pos[None, :])[0]


def incident_matrices(array, k0, positions):
    """Incident transfer matrices at many points, shape ``(N, 3, N_t)``."""
    k0 = check_positive(k0, "k0")
    pos = check_points(positions, "positions")
    fields = dipole_field(k0, pos[:, None, :], array.tx_positions[None, :, :],
                          array.tx_dipole_moments[None, :, :])
    return np.transpose(fields, (0, 2, 1))


def receive_matrix(array, k0, position):
    """Receiver transfer at one point: row ``r`` is ``q_r^H G(r_r, position)``."""
    pos = check_vector3(position, "position")
    return receive_matrices(array, k0, pos[None, :])[0]


def receive_matrices(array, k0, positions):
    """Receiver transfer matrices at many points, shape ``(N, N_r, 3)``."""
    G = dyadic_green_block(k0, array.rx_positions, positions)  # (N_r, N, 3, 3)
    return np.einsum("rc,rncd->nrd", np.conj(array.rx_polarizations), G)


def equivalent_radius(voxel_volume):
    return (3.0 * voxel_volume / (4.0 * math.pi)) ** (1.0 / 3.0)


def self_term(k0, voxel_volume):
    """Scalar self-interaction of one voxel (equal-volume sphere).

    Returns ``s`` such that the diagonal block of ``k0^2 * int G dV`` over the
    voxel equals ``s * I``: the regular part
    ``(2/3)[(1 + j k0 a) exp(-j k0 a) - 1]`` minus the depolarization ``1/3``.
    """
    a = equivalent_radius(voxel_volume)
    ka = k0 * a
    return (2.0 / 3.0) * ((1.0 + 1j * ka) * np.exp(-1j * ka) - 1.0) - 1.0 / 3.0


@dataclass(frozen=True, eq=False)
class TotalFieldSolution:
    """Per-voxel total-field transfer matrices for one subcarrier.

    ``transfer`` has shape ``(N_s, 3, N_t)``.
    """

    transfer: np.ndarray
    subcarrier_index: int = 0
    method: str = "born"
    residual: float = 0.0
    info: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    entries: np.ndarray
    subcarrier_index: int = 0


def _check_pitch(k0, pitch):
    lam = 2.0 * math.pi / k0
    if pitch > lam / 4.0:
        warnings.warn(
            f"voxel pitch {pitch:.4g} m exceeds lambda/4 = {lam / 4.0:.4g} m; "
            "point collocation is inaccurate at this resolution",
            PitchWarning,
            stacklevel=3,
        )


def _interaction_dense(positions, k0, voxel_volume, chi):
    """System matrix ``I - K diag(chi)`` as a dense ``(3N, 3N)`` array."""
    n = positions.shape[0]
    K = np.zeros((n, n, 3, 3), dtype=complex)
    if n > 1:
        iu = ~np.eye(n, dtype=bool)
        diff = positions[:, None, :] - positions[None, :, :]
        R = np.linalg.norm(diff, axis=-1)
        if np.any(R[iu] <= _COINCIDENT_TOL):
            raise SingularityError("two voxels share the same centre")
        R_safe = np.where(iu, R, 1.0)
        rhat = diff / R_safe[..., None]
        K = (k0 ** 2 * voxel_volume) * _dyadic_from_geometry(k0, rhat, R_safe)
        K[~iu] = 0.0
    s = self_term(k0, voxel_volume)
    K[np.arange(n), np.arange(n)] = s * np.eye(3)
    K = K * chi[None, :, None, None]
    Z = -K.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)
    Z[np.diag_indices(3 * n)] += 1.0
    return Z


class _MatrixFreeOperator(LinearOperator):
    """Applies ``I - K diag(chi)`` without storing the kernel.

    Rows are evaluated in chunks so memory stays ``O(chunk * N)``.
    """

    def __init__(self, positions, k0, voxel_volume, chi, chunk=256):
        n = positions.shape[0]
        super().__init__(dtype=complex, shape=(3 * n, 3 * n))
        self.positions = positions
        self.k0 = k0
        self.scale = k0 ** 2 * voxel_volume
        self.chi = chi
        self.self_coef = self_term(k0, voxel_volume)
        self.chunk = chunk

    def _matvec(self, x):
        n = self.positions.shape[0]
        v = x.reshape(n, 3) * self.chi[:, None]
        out = x.reshape(n, 3) - self.self_coef * v
        for start in range(0, n, self.chunk):
            stop = min(n, start + self.chunk)
            diff = self.positions[start:stop, None, :] - self.positions[None, :, :]
            R = np.linalg.norm(diff, axis=-1)
            mask = R > _COINCIDENT_TOL
            R_safe = np.where(mask, R, 1.0)
            G = _dyadic_from_geometry(self.k0, diff / R_safe[..., None], R_safe)
            G[~mask] = 0.0
            out[start:stop] -= self.scale * np.einsum("mncd,nd->mc", G, v)
        return out.ravel()


def _solve_dense(Z, rhs):
    try:
        lu, piv = scipy.linalg.lu_factor(Z, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"LU factorization failed: {exc}") from exc
    anorm = np.linalg.norm(Z, 1)
    rcond, info = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < np.finfo(float).eps:
        cond = math.inf if rcond == 0 else 1.0 / rcond
        raise SolverError(f"system matrix is numerically singular (condition ~ {cond:.3g})",
                          condition_estimate=cond)
    sol = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    return sol, {"condition_estimate": float(1.0 / rcond)}


def _solve_iterative(op, rhs, rtol, maxiter):
    sol = np.empty_like(rhs)
    for col in range(rhs.shape[1]):
        b = rhs[:, col]
        x, info = bicgstab(op, b, x0=b.copy(), rtol=rtol, atol=0.0, maxiter=maxiter)
        if info != 0:
            raise SolverError(f"BiCGSTAB did not converge for tx column {col} "
                              f"(info={info}, maxiter={maxiter})")
        sol[:, col] = x
    return sol, {}


def solve_total_fields(scene, array, k0, method="auto", subcarrier_index=0,
                       rtol=ITERATIVE_RTOL, maxiter=ITERATIVE_MAXITER):
    """Solve the discretized volume integral equation for all tx columns at once.

    Parameters
    ----------
    scene : PlacedScene
        Voxel world positions, volume and materials.
    array : ArrayGeometry
    k0 : float
        Wavenumber of the subcarrier.
    method : {"auto", "dense_direct", "iterative", "born"}
        ``auto`` picks dense LU up to 3000 unknowns and matrix-free BiCGSTAB
        above. ``born`` returns the incident field unchanged.

    Returns
    -------
    TotalFieldSolution
    """
    if method not in METHODS:
        raise InvalidConfigError(f"method must be one of {METHODS}, got {method!r}")
    k0 = check_positive(k0, "k0")
    positions = np.asarray(scene.world_positions, dtype=float)
    n = positions.shape[0]
    if n < 1:
        raise InvalidConfigError("scene has no voxels")
    dv = scene.voxel_volume
    _check_pitch(k0, scene.target.voxel_pitch)
    a_inc = incident_matrices(array, k0, positions)
    if method == "born":
        return TotalFieldSolution(a_inc, subcarrier_index, "born", 0.0)
    chi = np.asarray(scene.contrasts(k0 * C0), dtype=complex)
    if method == "auto":
        method = "dense_direct" if 3 * n <= DENSE_UNKNOWN_LIMIT else "iterative"
    rhs = a_inc.reshape(3 * n, -1)
    rhs_norm = np.linalg.norm(rhs)
    if method == "dense_direct":
        Z = _interaction_dense(positions, k0, dv, chi)
        sol, info = _solve_dense(Z, rhs)
        residual = np.linalg.norm(Z @ sol - rhs)
    else:
        if 3 * n <= DENSE_UNKNOWN_LIMIT:
            Z = _interaction_dense(positions, k0, dv, chi)
            op = aslinearoperator(Z)
        else:
            op = _MatrixFreeOperator(positions, k0, dv, chi)
        sol, info = _solve_iterative(op, rhs, rtol, maxiter)
        residual = np.linalg.norm(op.matmat(sol) - rhs)
    rel = float(residual / rhs_norm) if rhs_norm > 0 else 0.0
    if not np.all(np.isfinite(sol)):
        raise SolverError("solution contains non-finite values")
    info["relative_residual"] = rel
    return TotalFieldSolution(sol.reshape(n, 3, -1), subcarrier_index, method, rel, info)


def channel_matrix(solution, scene, array, k0):
    """Assemble ``H = k0^2 dV sum_n B(r_n) chi(r_n) A(r_n)``."""
    k0 = check_positive(k0, "k0")
    A = np.asarray(solution.transfer)
    positions = np.asarray(scene.world_positions, dtype=float)
    if A.shape[0] != positions.shape[0]:
        raise InvalidConfigError(
            f"solution has {A.shape[0]} voxels but scene has {positions.shape[0]}")
    chi = np.asarray(scene.contrasts(k0 * C0), dtype=complex)
    B = receive_matrices(array, k0, positions)
    H = (k0 ** 2 * scene.voxel_volume) * np.einsum("nrc,n,nct->rt", B, chi, A)
    return ChannelMatrix(H, solution.subcarrier_index)


def simulate_sample(scene, array, grid, method="auto"):
    """Channel matrices on every selected subcarrier of ``grid``."""
    out = []
    for idx in grid.selected_indices:
        k0 = float(grid.wavenumbers[idx])
        sol = solve_total_fields(scene, array, k0, method=method, subcarrier_index=int(idx))
        out.append(channel_matrix(sol, scene, array, k0))
    return out


def simulate_tensor(scene, array, grid, method="auto", return_info=False):
    """Stack :func:`simulate_sample` into a complex ``(N_r, N_t, K_s)`` tensor."""
    infos = []
    mats = []
    for idx in grid.selected_indices:
        k0 = float(grid.wavenumbers[idx])
        sol = solve_total_fields(scene, array, k0, method=method, subcarrier_index=int(idx))
        mats.append(channel_matrix(sol, scene, array, k0).entries)
        infos.append({"subcarrier_index": int(idx), "method": sol.method,
                      "relative_residual": sol.residual})
    tensor = np.stack(mats, axis=-1)
    return (tensor, infos) if return_info else tensor
