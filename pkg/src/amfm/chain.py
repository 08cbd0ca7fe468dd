"""Transverse normal modes of a linear ion chain.

The model couples N ions through the Coulomb interaction and gives each ion
its own harmonic confinement perpendicular to the chain axis. Diagonalising
the resulting coupling table yields the mode frequencies, the mode vectors
and, with the Raman wavevector, the Lamb-Dicke parameters.

Ion, mode and qubit labels are 1-based throughout, matching the usual
laboratory convention. Qubit ``q`` of a chain sits on ion
``first_qubit_index + q - 1``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares

from . import constants as const

__all__ = [
    "ChainConfig",
    "ModeData",
    "ChainError",
    "UnstableChainError",
    "coulomb_constant",
    "solve_transverse_modes",
    "fit_symmetric_chain",
    "preset",
    "PRESETS",
    "UMD7_TABLE_HZ",
]

# Measured transverse mode frequencies of the seven-ion chain (Hz).
UMD7_TABLE_HZ = (2.951e6, 2.973e6, 2.993e6, 3.010e6, 3.025e6, 3.038e6, 3.054e6)
TOP_MODE_HZ = 3.054e6

PRESETS = ("umd7", "chain15")


class ChainError(ValueError):
    """Invalid chain description or mode table."""


class UnstableChainError(ChainError):
    """A transverse mode has a non-positive squared frequency."""

    def __init__(self, mode_index, eigenvalue):
        self.mode_index = mode_index
        self.eigenvalue = eigenvalue
        super().__init__(
            f"unstable chain: mode {mode_index} has squared frequency "
            f"{eigenvalue:.6g} rad^2/s^2 <= 0"
        )


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ChainConfig:
    """Physical description of a linear ion chain (SI units)."""

    positions: np.ndarray
    transverse_confinement: np.ndarray
    ion_mass: float = const.YB171_MASS
    raman_delta_k: float = const.RAMAN_DELTA_K
    qubit_window: tuple[int, int] | None = None

    def __post_init__(self):
        pos = _frozen(self.positions)
        conf = _frozen(self.transverse_confinement)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "transverse_confinement", conf)
        n = pos.size
        if pos.ndim != 1 or n < 1:
            raise ChainError("positions must be a non-empty 1-D sequence")
        if conf.shape != pos.shape:
            raise ChainError("need one confinement frequency per ion")
        if n > 1 and np.any(np.diff(pos) <= 0):
            raise ChainError("positions must be strictly increasing")
        if np.any(conf <= 0) or not np.all(np.isfinite(conf)):
            raise ChainError("confinement frequencies must be positive")
        if not self.ion_mass > 0:
            raise ChainError("ion mass must be positive")
        if not self.raman_delta_k > 0:
            raise ChainError("raman_delta_k must be positive")
        window = self.qubit_window or (1, n)
        window = (int(window[0]), int(window[1]))
        first, count = window
        if first < 1 or count < 1 or first + count - 1 > n:
            raise ChainError(f"qubit window {window} does not fit in {n} ions")
        object.__setattr__(self, "qubit_window", window)

    @property
    def ion_count(self):
        return self.positions.size

    def to_dict(self):
        return {
            "ion_count": self.ion_count,
            "positions_m": self.positions.tolist(),
            "transverse_confinement_rad_s": self.transverse_confinement.tolist(),
            "ion_mass_kg": self.ion_mass,
            "raman_delta_k_per_m": self.raman_delta_k,
            "qubit_window": list(self.qubit_window),
        }

    @classmethod
    def from_dict(cls, d):
        cfg = cls(
            positions=d["positions_m"],
            transverse_confinement=d["transverse_confinement_rad_s"],
            ion_mass=d.get("ion_mass_kg", const.YB171_MASS),
            raman_delta_k=d.get("raman_delta_k_per_m", const.RAMAN_DELTA_K),
            qubit_window=tuple(d["qubit_window"]) if "qubit_window" in d else None,
        )
        if "ion_count" in d and int(d["ion_count"]) != cfg.ion_count:
            raise ChainError("ion_count does not match the number of positions")
        return cfg


@dataclass(frozen=True, eq=False)
class ModeData:
    """Mode frequencies (rad/s, ascending), Lamb-Dicke table and mode vectors.

    ``eta[p, i]`` and ``mode_vectors[p, i]`` are indexed mode-major:
    row ``p`` is a mode, column ``i`` an ion (both 0-based as arrays).
    """

    frequencies: np.ndarray
    eta: np.ndarray
    mode_vectors: np.ndarray | None = None
    qubit_window: tuple[int, int] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        freqs = _frozen(self.frequencies)
        eta = _frozen(self.eta)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "eta", eta)
        n = freqs.size
        if freqs.ndim != 1 or n < 1:
            raise ChainError("frequencies must be a non-empty 1-D sequence")
        if np.any(freqs <= 0) or not np.all(np.isfinite(freqs)):
            raise ChainError("mode frequencies must be positive and finite")
        if n > 1 and np.any(np.diff(freqs) < 0):
            raise ChainError("mode frequencies must be ascending")
        if eta.ndim != 2 or eta.shape[0] != n:
            raise ChainError(f"eta must have {n} rows (one per mode)")
        if not np.all(np.isfinite(eta)):
            raise ChainError("eta must be finite")
        if self.mode_vectors is not None:
            b = _frozen(self.mode_vectors)
            if b.shape != (n, n):
                raise ChainError("mode_vectors must be square, one row per mode")
            if np.max(np.abs(b @ b.T - np.eye(n))) > 1e-10:
                raise ChainError("mode vectors are not orthonormal to 1e-10")
            object.__setattr__(self, "mode_vectors", b)
        window = self.qubit_window or (1, eta.shape[1])
        window = (int(window[0]), int(window[1]))
        if window[0] < 1 or window[1] < 1 or sum(window) - 1 > eta.shape[1]:
            raise ChainError(f"qubit window {window} does not fit the eta table")
        object.__setattr__(self, "qubit_window", window)

    @property
    def mode_count(self):
        return self.frequencies.size

    @property
    def ion_count(self):
        return self.eta.shape[1]

    @property
    def qubit_count(self):
        return self.qubit_window[1]

    def ion_of_qubit(self, q):
        """0-based ion column of 1-based qubit label ``q``."""
        first, count = self.qubit_window
        if not 1 <= q <= count:
            raise ChainError(f"qubit {q} outside the window of {count} qubits")
        return first + q - 2

    def eta_of_qubit(self, q):
        """Lamb-Dicke parameters of qubit ``q`` for every mode."""
        return self.eta[:, self.ion_of_qubit(q)]

    def to_dict(self):
        d = {
            "frequencies_hz": (self.frequencies / const.TWO_PI).tolist(),
            "eta": self.eta.tolist(),
            "mode_vectors": None if self.mode_vectors is None else self.mode_vectors.tolist(),
            "qubit_window": list(self.qubit_window),
        }
        if self.metadata:
            d["metadata"] = self.metadata
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            freqs = np.asarray(d["frequencies_hz"], dtype=float) * const.TWO_PI
            eta = d["eta"]
        except KeyError as exc:
            raise ChainError(f"mode file is missing key {exc}") from None
        return cls(
            frequencies=freqs,
            eta=eta,
            mode_vectors=d.get("mode_vectors"),
            qubit_window=tuple(d["qubit_window"]) if d.get("qubit_window") else None,
            metadata=dict(d.get("metadata", {})),
        )

    def fingerprint(self):
        """Short stable hash of the physics content (metadata excluded)."""
        payload = {
            "frequencies_rad_s": [float.hex(float(x)) for x in self.frequencies],
            "eta": [float.hex(float(x)) for x in self.eta.ravel()],
            "shape": list(self.eta.shape),
            "qubit_window": list(self.qubit_window),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def coulomb_constant(mass):
    """e^2 / (4 pi eps0 m) in m^3/s^2."""
    return const.ELEMENTARY_CHARGE**2 / (4.0 * math.pi * const.EPSILON_0 * mass)


def _coupling_table(positions, confinement, mass):
    x = np.asarray(positions, dtype=float)
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, np.inf)
    off = coulomb_constant(mass) / dist**3
    return np.diag(np.asarray(confinement, dtype=float) ** 2 - off.sum(axis=1)) + off


def _fix_signs(vectors):
    # rows are modes; first clearly nonzero component made positive
    out = vectors.copy()
    for p, row in enumerate(out):
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            out[p] = -row
    return out


def solve_transverse_modes(config: ChainConfig) -> ModeData:
    """Diagonalise the transverse coupling table of ``config``.

    Raises
    ------
    UnstableChainError
        If any squared mode frequency is non-positive (1-based mode index).
    """
    table = _coupling_table(config.positions, config.transverse_confinement,
                            config.ion_mass)
    evals, evecs = np.linalg.eigh(table)
    order = np.argsort(evals, kind="stable")
    evals = evals[order]
    bad = np.flatnonzero(evals <= 0)
    if bad.size:
        raise UnstableChainError(int(bad[0]) + 1, float(evals[bad[0]]))
    freqs = np.sqrt(evals)
    vectors = _fix_signs(evecs[:, order].T)
    zpf = np.sqrt(const.HBAR / (2.0 * config.ion_mass * freqs))
    eta = vectors * (config.raman_delta_k * zpf)[:, None]
    return ModeData(
        frequencies=freqs,
        eta=eta,
        mode_vectors=vectors,
        qubit_window=config.qubit_window,
    )


def _uniform_spacing_for_spread(n, omega_top, spread, mass):
    """Bisect the uniform spacing whose mode band has the given width."""

    def width(d):
        table = _coupling_table(np.arange(n) * d, np.full(n, omega_top), mass)
        ev = np.linalg.eigvalsh(table)
        return np.sqrt(ev[-1]) - np.sqrt(max(ev[0], 0.0)) - spread

    # the band widens monotonically as the ions are squeezed together
    lo, hi = 1e-7, 1e-4
    while width(lo) < 0 or not np.isfinite(width(lo)):
        lo *= 1.5
    return brentq(width, lo, hi, xtol=1e-18, rtol=1e-15, maxiter=200)


def _symmetric_layout(params, n):
    ngap = n // 2
    half_gaps = params[:ngap]
    half_conf = params[ngap:]
    if n % 2:
        gaps = np.r_[half_gaps[::-1], half_gaps]
        conf = np.r_[half_conf, half_conf[-2::-1]]
    else:
        # half_gaps[-1] is the single central gap
        gaps = np.r_[half_gaps[:-1], half_gaps[-1], half_gaps[-2::-1]]
        conf = np.r_[half_conf, half_conf[::-1]]
    return np.r_[0.0, np.cumsum(gaps)], conf


def fit_symmetric_chain(target_frequencies, mass=const.YB171_MASS):
    """Find a mirror-symmetric chain whose modes hit ``target_frequencies``.

    The free parameters are the distinct inter-ion gaps and per-ion
    confinements of a chain symmetric about its centre: exactly N numbers
    for N target frequencies (rad/s, ascending). The uniform spacing that
    reproduces the band width at uniform confinement seeds the solve.

    Returns ``(positions, confinement, info)``; positions start at 0.
    """
    target = np.sort(np.asarray(target_frequencies, dtype=float))
    n = target.size
    if n < 2:
        raise ChainError("need at least two target frequencies")
    d0 = _uniform_spacing_for_spread(n, target[-1], target[-1] - target[0], mass)
    ngap = n // 2
    nconf = n - ngap
    # gaps in um, confinement in units of the top mode: both O(1)
    p0 = np.r_[np.full(ngap, d0 * 1e6), np.ones(nconf)]
    scale = target[-1]

    def residual(p):
        pos, conf = _symmetric_layout(np.r_[p[:ngap] * 1e-6, p[ngap:] * scale], n)
        ev = np.linalg.eigvalsh(_coupling_table(pos, conf, mass))
        return (np.sqrt(np.abs(ev)) - target) / scale

    sol = least_squares(residual, p0, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=5000)
    pos, conf = _symmetric_layout(np.r_[sol.x[:ngap] * 1e-6, sol.x[ngap:] * scale], n)
    info = {
        "uniform_spacing_seed_m": d0,
        "max_abs_error_hz": float(np.max(np.abs(sol.fun)) * scale / const.TWO_PI),
        "gaps_m": np.diff(pos).tolist(),
        "confinement_hz": (conf / const.TWO_PI).tolist(),
    }
    return pos, conf, info


# Output of fit_symmetric_chain(2 pi * UMD7_TABLE_HZ), frozen so the preset
# does not depend on optimiser details. Gaps in m, confinement in Hz.
_UMD7_GAPS = (
    5.916746340583432e-06, 5.164517588023295e-06, 4.8919512266853486e-06,
    4.8919512266853486e-06, 5.164517588023295e-06, 5.916746340583432e-06,
)
_UMD7_CONFINEMENT_HZ = (
    3043028.0398524096, 3052410.3820595737, 3057722.195019599,
    3060677.1312713046, 3057722.195019599, 3052410.3820595737,
    3043028.0398524096,
)


def _umd7():
    positions = np.r_[0.0, np.cumsum(_UMD7_GAPS)]
    positions -= positions.mean()
    cfg = ChainConfig(
        positions=positions,
        transverse_confinement=np.asarray(_UMD7_CONFINEMENT_HZ) * const.TWO_PI,
        qubit_window=(2, 5),
    )
    meta = {
        "preset": "umd7",
        "calibration": "mirror-symmetric gaps and per-ion confinement fitted "
                       "to the measured seven-mode table",
        "gaps_m": list(_UMD7_GAPS),
        "confinement_hz": list(_UMD7_CONFINEMENT_HZ),
        "target_frequencies_hz": list(UMD7_TABLE_HZ),
    }
    return cfg, meta


def _chain15():
    n = 15
    spacing = 5e-6
    positions = (np.arange(n) - (n - 1) / 2) * spacing
    cfg = ChainConfig(
        positions=positions,
        transverse_confinement=np.full(n, TOP_MODE_HZ * const.TWO_PI),
        qubit_window=(3, 11),
    )
    meta = {
        "preset": "chain15",
        "spacing_m": spacing,
        "assumption": "uniform confinement and ion species borrowed from the "
                      "seven-ion chain (top mode 3.054 MHz, 171Yb+)",
    }
    return cfg, meta


def preset(name):
    """Built-in chains: ``"umd7"`` (7 ions, 5 qubits), ``"chain15"`` (15 ions, 11 qubits).

    Returns ``(ChainConfig, ModeData)``.
    """
    builders = {"umd7": _umd7, "chain15": _chain15}
    if name not in builders:
        raise ChainError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cfg, meta = builders[name]()
    modes = solve_transverse_modes(cfg)
    modes = ModeData(
        frequencies=modes.frequencies,
        eta=modes.eta,
        mode_vectors=modes.mode_vectors,
        qubit_window=modes.qubit_window,
        metadata=meta,
    )
    return cfg, modes
