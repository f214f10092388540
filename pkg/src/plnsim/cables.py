"""Parametric cable models and the built-in cable library.

The stock model is a lossy power-line cable with a skin-effect style series
resistance R(f) = r0 sqrt(f / f_ref) and dielectric loss G(f) proportional
to 2 pi f C.  Conductor coupling enters as a uniform off-diagonal factor on
the L and C matrices.  All defaults are engineering choices, lossy enough to
keep resonances at finite Q.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .mtl import CableSpec

__all__ = [
    "powerline_cable",
    "constant_rlgc_cable",
    "scaled_cable",
    "builtin_cable_library",
    "cable_velocities",
]


def _coupled(diag_value: float, coupling: float, n: int) -> np.ndarray:
    m = np.full((n, n), coupling * diag_value)
    np.fill_diagonal(m, diag_value)
    return m


def powerline_cable(n_conductors: int = 1,
                    r0_ohm_per_m: float = 0.1,
                    l_h_per_m: float = 5e-7,
                    c_f_per_m: float = 1e-10,
                    g_factor: float = 5e-4,
                    coupling: float = 0.3,
                    f_ref_hz: float = 1e6,
                    label: str | None = None) -> CableSpec:
    """Default lossy cable: R(f) = r0 sqrt(f/f_ref) I, constant coupled L and
    C, G(f) = 2 pi f * g_factor * C."""
    if not 0.0 <= coupling < 1.0:
        raise ValidationError("coupling must be in [0, 1) to keep L and C positive definite")
    n = n_conductors
    l_mat = _coupled(l_h_per_m, coupling, n)
    c_mat = _coupled(c_f_per_m, coupling, n)
    eye = np.eye(n)

    def rlgc(f: np.ndarray):
        nf = f.size
        r = (r0_ohm_per_m * np.sqrt(f / f_ref_hz))[:, None, None] * eye
        l = np.broadcast_to(l_mat, (nf, n, n)).copy()
        g = (2.0 * np.pi * f * g_factor)[:, None, None] * c_mat
        c = np.broadcast_to(c_mat, (nf, n, n)).copy()
        return r, l, g, c

    params = {
        "n_conductors": n,
        "r0_ohm_per_m": r0_ohm_per_m,
        "l_h_per_m": l_h_per_m,
        "c_f_per_m": c_f_per_m,
        "g_factor": g_factor,
        "coupling": coupling,
        "f_ref_hz": f_ref_hz,
    }
    name = label or f"powerline-{n}c"
    return CableSpec(label=name, n_conductors=n, rlgc=rlgc,
                     meta={"model": "powerline", "params": params})


def constant_rlgc_cable(r, l, g, c, label: str = "constant-rlgc") -> CableSpec:
    """Cable with frequency-independent R, L, G, C.  Scalars describe a
    single-conductor line; full matrices are accepted as nested lists."""
    mats = []
    for m in (r, l, g, c):
        a = np.atleast_2d(np.asarray(m, dtype=float))
        mats.append(a)
    n = mats[1].shape[0]
    for a in mats:
        if a.shape != (n, n):
            raise ValidationError("constant R, L, G, C matrices must share one shape")

    def rlgc(f: np.ndarray):
        nf = f.size
        return tuple(np.broadcast_to(a, (nf, n, n)).copy() for a in mats)

    params = {"r": mats[0].tolist(), "l": mats[1].tolist(),
              "g": mats[2].tolist(), "c": mats[3].tolist()}
    return CableSpec(label=label, n_conductors=n, rlgc=rlgc,
                     meta={"model": "constant_rlgc", "params": params})


def scaled_cable(base: CableSpec, r_scale: float = 1.0, l_scale: float = 1.0,
                 g_scale: float = 1.0, c_scale: float = 1.0,
                 label: str | None = None) -> CableSpec:
    """Uniformly scaled copy of a cable, the usual way to model a degraded
    (aged, wet) section.  Scaling preserves symmetry and definiteness for
    positive factors."""
    for s in (r_scale, l_scale, g_scale, c_scale):
        if s < 0:
            raise ValidationError("cable scale factors must be >= 0")
    base_rlgc = base.rlgc

    def rlgc(f: np.ndarray):
        r, l, g, c = base_rlgc(f)
        return r * r_scale, l * l_scale, g * g_scale, c * c_scale

    name = label or f"{base.label}-degraded"
    meta = None
    if base.meta is not None and base.meta.get("model") == "powerline":
        p = dict(base.meta["params"])
        p["r0_ohm_per_m"] = p["r0_ohm_per_m"] * r_scale
        p["l_h_per_m"] = p["l_h_per_m"] * l_scale
        p["c_f_per_m"] = p["c_f_per_m"] * c_scale
        if c_scale > 0:
            p["g_factor"] = p["g_factor"] * g_scale / c_scale
        meta = {"model": "powerline", "params": p}
    elif base.meta is not None and base.meta.get("model") == "constant_rlgc":
        p = base.meta["params"]
        meta = {"model": "constant_rlgc", "params": {
            "r": (np.asarray(p["r"]) * r_scale).tolist(),
            "l": (np.asarray(p["l"]) * l_scale).tolist(),
            "g": (np.asarray(p["g"]) * g_scale).tolist(),
            "c": (np.asarray(p["c"]) * c_scale).tolist(),
        }}
    return CableSpec(label=name, n_conductors=base.n_conductors, rlgc=rlgc, meta=meta)


def builtin_cable_library() -> dict[str, CableSpec]:
    """Small stock library used by the experiments and as CLI default."""
    return {
        "pl-std": powerline_cable(label="pl-std"),
        "pl-lowloss": powerline_cable(r0_ohm_per_m=0.05, c_f_per_m=8e-11,
                                      label="pl-lowloss"),
        "pl-lossy": powerline_cable(r0_ohm_per_m=0.2, c_f_per_m=1.2e-10,
                                    label="pl-lossy"),
        "pl-2c": powerline_cable(n_conductors=2, label="pl-2c"),
        "fast": powerline_cable(l_h_per_m=2.5e-7, label="fast"),  # v = 2e8 m/s
    }


def cable_velocities(cable: CableSpec, f_hz: float) -> np.ndarray:
    """Per-mode phase velocities 1/sqrt(eig(L C)) from the inductance and
    capacitance matrices at one frequency (dispersion is ignored here; the
    time-domain layer treats velocity as constant per mode)."""
    f = np.asarray([f_hz], dtype=float)
    _, l, _, c = cable.rlgc(f)
    lam = np.linalg.eigvals(l[0] @ c[0]).real
    if np.any(lam <= 0):
        raise ValidationError(f"cable {cable.label!r}: L C has non-positive eigenvalues")
    return np.sort(1.0 / np.sqrt(lam))[::-1]
