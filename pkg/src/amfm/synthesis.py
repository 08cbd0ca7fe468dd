"""Pulse-design protocols: exact null space, F-matrix subspace and extended null space.

All three reduce to the same last step: restrict the entangling kernel to
an orthonormal search subspace and take its eigenvector of largest
absolute eigenvalue, which reaches a gate angle of pi/8 with the least
mean-square power.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectral
from .chain import ModeData

__all__ = [
    "SynthesisError",
    "SynthesisRequest",
    "PulseSolution",
    "GammaSpace",
    "PowerResult",
    "NULL_CUTOFF",
    "gamma_eigenspace",
    "power_optimize",
    "exact_amfm",
    "fmatrix_amfm",
    "fmatrix_scan",
    "ens_amfm",
    "synthesize",
    "repeat_pulse",
    "infidelity_at",
    "closure_residuals",
    "suggest_basis_size",
]

PROTOCOLS = ("exact", "fmatrix", "ens")

# Normalised Gamma eigenvalue at or below which a direction counts as null.
# The constraint rows are nearly dependent (singular values fall by ~1e-2 per
# step), so 1e-12 still admits directions that break closure at the 1e-9
# level for K >= 4; 1e-20 keeps them out while staying above rounding noise.
NULL_CUTOFF = 1e-20

DEFAULT_BASIS = 300
# basis must reach past the highest mode: N_A >= headroom * f_top * tau
BASIS_HEADROOM = 1.2

CLOSURE_TOL = 1e-9
Z_RANGE = (1e-16, 1.0)
BISECTION_STEPS = 40


class SynthesisError(ValueError):
    """Invalid request or no admissible pulse."""


def suggest_basis_size(modes, tau, headroom=BASIS_HEADROOM, minimum=DEFAULT_BASIS):
    """Smallest sensible N_A: at least ``minimum`` and enough sine frequencies
    ``n / tau`` to extend ``headroom`` times past the highest mode."""
    f_top = float(np.max(modes.frequencies)) / (2.0 * math.pi)
    return max(int(minimum), int(math.ceil(headroom * f_top * tau)))


# ---------------------------------------------------------------------------
# request / solution records


@dataclass(frozen=True, eq=False)
class SynthesisRequest:
    """Gate specification. ``pair`` holds 1-based qubit labels.

    ``n_basis=None`` picks ``suggest_basis_size(modes, tau)``, which is 300
    for short gates and grows with ``tau`` so the basis covers every mode.
    """

    modes: ModeData
    pair: tuple[int, int]
    tau: float
    K: int = 0
    protocol: str = "exact"
    n_basis: int | None = None
    L_cut: int | None = None
    Z: float | None = None
    target_f: float | None = None
    null_cutoff: float = NULL_CUTOFF
    convergence_check: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pair", (int(self.pair[0]), int(self.pair[1])))
        if not self.tau > 0:
            raise SynthesisError("tau must be positive")
        if self.pair[0] == self.pair[1]:
            raise SynthesisError("the two qubits of a gate must differ")
        if self.K < 0:
            raise SynthesisError("stabilization order K must be >= 0")
        if self.n_basis is None:
            object.__setattr__(self, "n_basis", suggest_basis_size(self.modes, self.tau))
        object.__setattr__(self, "n_basis", int(self.n_basis))
        if self.n_basis < 1:
            raise SynthesisError("N_A must be positive")
        if self.protocol not in PROTOCOLS:
            raise SynthesisError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if self.protocol == "fmatrix":
            if self.L_cut is None or not 1 <= self.L_cut <= self.n_basis:
                raise SynthesisError(f"fmatrix needs 1 <= L_cut <= N_A={self.n_basis}")
        if self.protocol == "ens":
            if (self.Z is None) == (self.target_f is None):
                raise SynthesisError("ens needs exactly one of Z or target_f")
            if self.Z is not None and not self.Z >= 0:
                raise SynthesisError("Z must be >= 0")
            if self.target_f is not None and not 0 < self.target_f < 1:
                raise SynthesisError("target_f must lie in (0, 1)")

    def knobs(self):
        if self.protocol == "fmatrix":
            return {"L_cut": int(self.L_cut)}
        if self.protocol == "ens":
            return {"Z": self.Z} if self.Z is not None else {"target_f": self.target_f}
        return {}


@dataclass(frozen=True, eq=False)
class PulseSolution:
    """A synthesised pulse ``g(t) = sum_n A_n sin(2 pi n t / tau)``.

    ``amplitudes`` are in rad/s and already include ``omega0``. For a
    repeated pulse (``repeats > 1``) the amplitudes are those of one repeat
    and ``duration = repeats * tau``; ``gate_angle`` is the accumulated
    angle over all repeats.
    """

    amplitudes: np.ndarray
    omega0: float
    lambda_max: float
    gate_angle: float
    subspace_dim: int
    protocol: str
    pair: tuple[int, int]
    tau: float
    K: int
    knobs: dict = field(default_factory=dict)
    residuals: list = field(default_factory=list)
    residuals_normalized: list = field(default_factory=list)
    predicted_f: float = 0.0
    f_max: float | None = None
    repeats: int = 1
    fingerprint: str = ""
    flags: tuple = ()

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "pair", tuple(int(x) for x in self.pair))
        object.__setattr__(self, "flags", tuple(self.flags))

    @property
    def n_basis(self):
        return self.amplitudes.size

    @property
    def duration(self):
        return self.repeats * self.tau

    @property
    def gate_angle_per_repeat(self):
        return self.gate_angle / self.repeats

    @property
    def mean_square_power(self):
        """(1/T) int g^2 dt = sum A_n^2 / 2 (sine-basis Parseval)."""
        return 0.5 * float(self.amplitudes @ self.amplitudes)

    def to_dict(self):
        d = {
            "amplitudes_rad_s": [float(x) for x in self.amplitudes],
            "tau_s": float(self.tau),
            "protocol": self.protocol,
            "pair": list(self.pair),
            "K": int(self.K),
            "N_A": int(self.n_basis),
            "knobs": dict(self.knobs),
            "omega0": float(self.omega0),
            "lambda_max": float(self.lambda_max),
            "gate_angle": float(self.gate_angle),
            "residuals": [float(x) for x in self.residuals],
            "residuals_normalized": [float(x) for x in self.residuals_normalized],
            "predicted_f": float(self.predicted_f),
            "f_max": None if self.f_max is None else float(self.f_max),
            "subspace_dim": int(self.subspace_dim),
            "repeats": int(self.repeats),
            "duration_s": float(self.duration),
            "mean_square_power": self.mean_square_power,
            "chain_fingerprint": self.fingerprint,
            "flags": list(self.flags),
        }
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                amplitudes=d["amplitudes_rad_s"],
                omega0=d["omega0"],
                lambda_max=d["lambda_max"],
                gate_angle=d["gate_angle"],
                subspace_dim=d["subspace_dim"],
                protocol=d["protocol"],
                pair=tuple(d["pair"]),
                tau=d["tau_s"],
                K=d["K"],
                knobs=dict(d.get("knobs", {})),
                residuals=list(d.get("residuals", [])),
                residuals_normalized=list(d.get("residuals_normalized", [])),
                predicted_f=d.get("predicted_f", 0.0),
                f_max=d.get("f_max"),
                repeats=d.get("repeats", 1),
                fingerprint=d.get("chain_fingerprint", ""),
                flags=tuple(d.get("flags", ())),
            )
        except KeyError as exc:
            raise SynthesisError(f"pulse file is missing key {exc}") from None


# ---------------------------------------------------------------------------
# building blocks


@dataclass(frozen=True, eq=False)
class GammaSpace:
    """Eigenvectors of the normalised ``Gamma = M^T M`` (columns of ``basis``)."""

    basis: np.ndarray
    eigenvalues: np.ndarray
    scale: float
    threshold: float

    @property
    def dim(self):
        return self.basis.shape[1]


def _gamma_spectrum(M):
    """Full eigen-decomposition of the normalised Gamma of a constraint matrix.

    Eigenpairs come from the SVD of the balanced rows, which resolves
    eigenvalues far below the rounding level of an explicit ``M^T M``.
    Returns ``(eigenvalues ascending, vectors as columns, scale)``.
    """
    rows = M.balanced() if isinstance(M, spectral.ConstraintMatrix) else np.asarray(M, float)
    if not np.all(np.isfinite(rows)):
        raise SynthesisError("constraint matrix has non-finite entries")
    n_basis = rows.shape[1]
    _, s, vt = np.linalg.svd(rows, full_matrices=True)
    scale = float(s[0] ** 2) if s.size and s[0] > 0 else 1.0
    lam = np.zeros(n_basis)
    lam[: s.size] = s**2 / scale
    order = np.argsort(lam, kind="stable")
    return lam[order], vt[order].T, scale


def gamma_eigenspace(M, Z, null_cutoff=NULL_CUTOFF):
    """Eigenvectors of ``Gamma = M^T M`` with normalised eigenvalue <= ``Z``.

    Eigenvalues are divided by the largest one so ``Z`` is dimensionless.
    ``Z = 0`` selects the numerical null space (``<= null_cutoff``).
    Plain arrays are used as given; a ``ConstraintMatrix`` is balanced first.
    """
    if Z < 0:
        raise SynthesisError("Z must be >= 0")
    lam, vecs, scale = _gamma_spectrum(M)
    thr = null_cutoff if Z == 0 else Z
    keep = lam <= thr
    if not np.any(keep):
        raise SynthesisError(
            f"no admissible subspace at Z={Z:g}; increase N_A or Z"
        )
    return GammaSpace(basis=vecs[:, keep], eigenvalues=lam[keep], scale=scale, threshold=thr)


@dataclass(frozen=True, eq=False)
class PowerResult:
    coefficients: np.ndarray
    lambda_max: float
    omega0: float
    amplitudes: np.ndarray


def _basis_columns(basis):
    b = np.asarray(basis, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    return b


def _top_eigpair(S):
    S = 0.5 * (S + S.T)
    w, v = np.linalg.eigh(S)
    top = np.max(np.abs(w))
    if top == 0 or not np.isfinite(top):
        raise SynthesisError("degenerate kernel: no entanglement reachable in this subspace")
    cands = []
    for idx in np.flatnonzero(np.abs(w) >= top * (1 - 1e-12)):
        vec = v[:, idx]
        sig = np.flatnonzero(np.abs(vec) > 1e-12 * np.max(np.abs(vec)))
        if vec[sig[0]] < 0:
            vec = -vec
        cands.append((tuple(vec), idx, vec))
    _, idx, coeff = max(cands, key=lambda c: c[0])
    return float(w[idx]), coeff


def _power_result(B, lam, coeff):
    omega0 = math.sqrt(math.pi / (8.0 * abs(lam)))
    return PowerResult(coefficients=coeff, lambda_max=lam, omega0=omega0,
                       amplitudes=omega0 * (B @ coeff))


def power_optimize(basis, kernel, check=True):
    """Largest-|eigenvalue| direction of the kernel restricted to ``basis``.

    ``basis`` holds orthonormal columns (N_A x d); ``kernel`` is a
    ``KernelMatrix`` or a square array. Ties in |lambda| are broken by the
    lexicographically largest sign-normalised eigenvector.
    """
    B = _basis_columns(basis)
    if B.shape[1] == 0:
        raise SynthesisError("empty search subspace")
    if check and np.max(np.abs(B.T @ B - np.eye(B.shape[1]))) > 1e-10:
        raise SynthesisError("basis vectors are not orthonormal to 1e-10")
    K = kernel.symmetric if isinstance(kernel, spectral.KernelMatrix) else np.asarray(kernel, float)
    K = 0.5 * (K + K.T)
    lam, coeff = _top_eigpair(B.T @ K @ B)
    return _power_result(B, lam, coeff)


def closure_residuals(amplitudes, modes, pair, tau, K, upper=None):
    """Max over modes and both qubits of ``|d^k alpha_p^i / d omega^k|``, k = 0..K.

    Values carry units of s^k; ``upper`` (default ``tau``) is the evaluation time.
    """
    a = np.asarray(amplitudes, dtype=float)
    cols = [modes.ion_of_qubit(q) for q in pair]
    eta = np.max(np.abs(modes.eta[:, cols]), axis=1)
    raw = []
    for k in range(K + 1):
        c = spectral.overlap_table(modes.frequencies, tau, a.size, k, upper)
        raw.append(float(np.max(eta * np.abs(a @ c))))
    return raw


def infidelity_at(amplitudes, modes, pair, tau, upper=None, drift=0.0):
    """``(4/5) sum_p [(eta_p^i)^2 + (eta_p^j)^2] |alpha_p(T)|^2`` with modes shifted by ``drift``."""
    a = np.asarray(amplitudes, dtype=float)
    cols = [modes.ion_of_qubit(q) for q in pair]
    d = np.sum(modes.eta[:, cols] ** 2, axis=1)
    c = spectral.overlap_table(modes.frequencies + drift, tau, a.size, 0, upper)
    alpha = a @ c
    return 0.8 * float(np.sum(d * np.abs(alpha) ** 2))


def _finish(req, power, subspace_dim, *, f_value=None, f_max=None, knobs=None, flags=()):
    modes = req.modes
    amps = power.amplitudes
    kern = spectral.kernel_matrix(modes, *req.pair, req.tau, req.n_basis)
    chi = float(amps @ kern.symmetric @ amps)
    raw = closure_residuals(amps, modes, req.pair, req.tau, req.K)
    norm = [r / (power.omega0 * req.tau ** (k + 1)) for k, r in enumerate(raw)]
    if f_value is None:
        F = spectral.infidelity_matrix(modes, *req.pair, req.tau, req.n_basis)
        f_value = F.value(amps)
    flags = list(flags)
    if 2.0 * math.pi * req.n_basis / req.tau < float(np.max(modes.frequencies)):
        flags.append("basis_below_modes")
    if req.protocol == "exact" and max(norm) > CLOSURE_TOL:
        flags.append("closure_tolerance_exceeded")
    return PulseSolution(
        amplitudes=amps,
        omega0=power.omega0,
        lambda_max=power.lambda_max,
        gate_angle=chi,
        subspace_dim=int(subspace_dim),
        protocol=req.protocol,
        pair=req.pair,
        tau=req.tau,
        K=req.K,
        knobs=dict(req.knobs() if knobs is None else knobs),
        residuals=raw,
        residuals_normalized=norm,
        predicted_f=float(f_value),
        f_max=f_max,
        fingerprint=modes.fingerprint(),
        flags=tuple(flags),
    )


def _kernel(req):
    return spectral.kernel_matrix(req.modes, *req.pair, req.tau, req.n_basis)


def _constraints(req):
    return spectral.constraint_matrix(req.modes, req.tau, req.K, req.n_basis)


# ---------------------------------------------------------------------------
# protocols


def exact_amfm(req):
    """Power-optimal pulse inside the numerical null space of the stabilised constraints."""
    if req.protocol not in ("exact", "ens"):
        raise SynthesisError("exact_amfm needs protocol 'exact'")
    space = gamma_eigenspace(_constraints(req), 0.0, req.null_cutoff)
    power = power_optimize(space.basis, _kernel(req), check=False)
    return _finish(replace(req, protocol="exact"), power, space.dim)


def _f_spectrum(req):
    """Eigenpairs of F ascending (columns), from the SVD of its real factor."""
    g = spectral.infidelity_factor(req.modes, *req.pair, req.tau, req.n_basis)
    u, s, _ = np.linalg.svd(g, full_matrices=True)
    phi = np.zeros(req.n_basis)
    phi[: s.size] = s**2
    order = np.argsort(phi, kind="stable")
    return phi[order], u[:, order]


def fmatrix_amfm(req):
    """Power-optimal pulse within the ``L_cut`` lowest-infidelity F eigenvectors.

    The recorded ``predicted_f`` is ``(4/5) omega0^2 sum_l B_l^2 phi_l`` and
    ``f_max = (4/5) omega0^2 phi_{L_cut}`` bounds it.
    """
    if req.protocol != "fmatrix":
        raise SynthesisError("fmatrix_amfm needs protocol 'fmatrix'")
    return fmatrix_scan(req, [req.L_cut])[0]


def fmatrix_scan(req, l_cuts):
    """F-matrix solutions for several ``L_cut`` sharing one eigen-decomposition.

    The kernel is projected onto the full F eigenbasis once; each ``L_cut``
    then only needs the eigenpairs of a leading block.
    """
    phi, vecs = _f_spectrum(req)
    P = vecs.T @ _kernel(req).symmetric @ vecs
    out = []
    for L in l_cuts:
        L = int(L)
        if not 1 <= L <= req.n_basis:
            raise SynthesisError(f"L_cut must lie in [1, {req.n_basis}]")
        sub = replace(req, protocol="fmatrix", L_cut=L)
        lam, coeff = _top_eigpair(P[:L, :L])
        power = _power_result(vecs[:, :L], lam, coeff)
        w0sq = power.omega0**2
        f_pred = 0.8 * w0sq * float(np.sum(power.coefficients**2 * phi[:L]))
        f_max = 0.8 * w0sq * float(phi[L - 1])
        knobs = {"L_cut": L, "L_bar_cut": int(req.n_basis - L)}
        out.append(_finish(sub, power, L, f_value=f_pred, f_max=f_max, knobs=knobs))
    return out


def ens_amfm(req):
    """Power-optimal pulse in the extended null space ``{Gamma eigenvalue <= Z}``.

    With ``target_f`` the threshold is found by bisection on ``log Z`` over
    ``[1e-16, 1]``; the largest feasible threshold found is kept. If even the
    smallest threshold misses the target, the exact-protocol pulse is
    returned with the ``exact_fallback`` flag.
    """
    if req.protocol != "ens":
        raise SynthesisError("ens_amfm needs protocol 'ens'")
    lam, vecs, _ = _gamma_spectrum(_constraints(req))
    kern = _kernel(req)
    F = spectral.infidelity_matrix(req.modes, *req.pair, req.tau, req.n_basis)

    def solve(z):
        thr = req.null_cutoff if z == 0 else z
        keep = lam <= thr
        if not np.any(keep):
            return None
        power = power_optimize(vecs[:, keep], kern, check=False)
        return power, int(keep.sum()), F.value(power.amplitudes)

    if req.Z is not None:
        out = solve(req.Z)
        if out is None:
            raise SynthesisError(f"no admissible subspace at Z={req.Z:g}; increase N_A or Z")
        power, dim, f = out
        return _finish(req, power, dim, f_value=f, knobs={"Z": req.Z})

    target = req.target_f
    lo, hi = Z_RANGE
    best = None  # (z, power, dim, f) with f <= target
    out = solve(hi)
    if out is not None and out[2] <= target:
        best = (hi, *out)
    else:
        out_lo = solve(lo)
        if out_lo is not None and out_lo[2] <= target:
            best = (lo, *out_lo)
            llo, lhi = math.log(lo), math.log(hi)
            for _ in range(BISECTION_STEPS):
                if target / 10 <= best[3] <= target and best[0] > lo:
                    break
                mid = 0.5 * (llo + lhi)
                z = math.exp(mid)
                out = solve(z)
                if out is not None and out[2] <= target:
                    llo = mid
                    if z > best[0]:
                        best = (z, *out)
                else:
                    lhi = mid
    knobs = {"target_f": target}
    if best is None:
        exact = exact_amfm(replace(req, protocol="exact"))
        knobs["Z"] = 0.0
        flags = ["exact_fallback"]
        if exact.predicted_f > target:
            flags.append("target_unreachable")
        return replace(exact, protocol="ens", knobs=knobs, flags=exact.flags + tuple(flags))
    z, power, dim, f = best
    knobs["Z"] = z
    return _finish(req, power, dim, f_value=f, knobs=knobs)


_DISPATCH = {"exact": exact_amfm, "fmatrix": fmatrix_amfm, "ens": ens_amfm}


def synthesize(req):
    """Run the protocol named in ``req``; optionally re-check at 1.5 x N_A."""
    sol = _DISPATCH[req.protocol](req)
    if req.convergence_check:
        bigger = replace(req, n_basis=int(math.ceil(1.5 * req.n_basis)), convergence_check=False)
        ref = _DISPATCH[req.protocol](bigger)
        shift = abs(ref.omega0 - sol.omega0) / sol.omega0
        knobs = dict(sol.knobs, convergence_omega0_shift=shift)
        flags = sol.flags
        if shift > 0.005:
            warnings.warn(
                f"omega0 moved by {100 * shift:.2f}% at N_A={bigger.n_basis}; "
                "the basis may be too small",
                RuntimeWarning,
                stacklevel=2,
            )
            flags = flags + ("not_converged",)
        sol = replace(sol, knobs=knobs, flags=flags)
    return sol


def repeat_pulse(sol, R, modes=None):
    """Play the pulse ``R`` times at ``1/sqrt(R)`` amplitude.

    Each repeat closes phase space and adds ``chi / R``, so the accumulated
    angle is unchanged while the mean-square power drops by ``R``. With
    ``modes`` the closure residuals and infidelity are re-evaluated at the
    end of the whole sequence; otherwise they are marked stale.
    """
    R = int(R)
    if R < 1:
        raise SynthesisError("repeat count must be >= 1")
    if R == 1:
        return sol
    total = sol.repeats * R
    amps = sol.amplitudes * math.sqrt(sol.repeats / total)
    omega0 = sol.omega0 * math.sqrt(sol.repeats / total)
    changes = dict(amplitudes=amps, omega0=omega0, repeats=total,
                   knobs=dict(sol.knobs, repeats=total))
    if modes is None:
        changes["flags"] = tuple(f for f in sol.flags if f != "stale_residuals") + ("stale_residuals",)
    else:
        T = total * sol.tau
        raw = closure_residuals(amps, modes, sol.pair, sol.tau, sol.K, upper=T)
        changes["residuals"] = raw
        changes["residuals_normalized"] = [r / (omega0 * T ** (k + 1)) for k, r in enumerate(raw)]
        changes["predicted_f"] = infidelity_at(amps, modes, sol.pair, sol.tau, upper=T)
    return replace(sol, **changes)
