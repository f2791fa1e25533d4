"""Contact volumes of ellipsoids and lens spaces, and leading eta coefficients.

The contact form is the restriction of ``a = sum_j (x_j dy_j - y_j dx_j)`` to
``E(a) = {sum_j a_j |z_j|^2 = 1}``.  Its Liouville field ``Y = z/2`` satisfies
``i_Y da = a``, so ``a ^ (da)^m = i_Y (da)^{m+1} / (m+1)``; on a tangent frame
this is ``m! 2^{m+1} det[Y, v_1, ..., v_{2m+1}]``, which is how the Monte
Carlo integrand is evaluated.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.integrate import tplquad

from .flows import LensFlow, LensSpaceParams

SAMPLE_FLOOR = 1000


class SampleFloorWarning(UserWarning):
    pass


@dataclass
class ContactVolumeResult:
    value: float
    method: str
    ci: tuple | None = None
    n_samples: int = 0
    q0: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def sphere_volume(dim: int) -> float:
    """Area of the unit sphere ``S^dim``."""
    k = (dim + 1) / 2.0
    return 2.0 * math.pi ** k / math.gamma(k)


def _tangent_frames(w: np.ndarray) -> np.ndarray:
    """Positively oriented orthonormal frames of ``T_w S`` (Householder), shape ``(N, d, d-1)``."""
    N, d = w.shape
    e0 = np.zeros(d)
    e0[0] = 1.0
    v = w - e0
    nv = np.einsum("ij,ij->i", v, v)
    H = np.broadcast_to(np.eye(d), (N, d, d)).copy()
    ok = nv > 1e-24
    H[ok] -= 2.0 * v[ok, :, None] * v[ok, None, :] / nv[ok, None, None]
    # H maps e0 to w; det H = -1 for a genuine reflection, so flip one column
    frames = H[:, :, 1:]
    frames[ok, :, 0] *= -1.0
    return frames


def contact_density(params: LensSpaceParams, w: np.ndarray) -> np.ndarray:
    """Density of ``a ^ (da)^m`` at ``z = w / sqrt(a)`` relative to the round measure in ``w``.

    ``w`` holds real coordinates ``(u_0, v_0, u_1, v_1, ...)`` of unit vectors.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    m = params.m
    inv = np.repeat(1.0 / np.sqrt(np.asarray(params.a)), 2)
    frames = _tangent_frames(w) * inv[None, :, None]
    Y = 0.5 * w * inv[None, :]
    M = np.concatenate([Y[:, :, None], frames], axis=2)
    return math.factorial(m) * 2.0 ** (m + 1) * np.linalg.det(M)


def _sample_sphere(params: LensSpaceParams, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = LensFlow(params).sample(rng, n)
    return z * np.repeat(np.sqrt(np.asarray(params.a)), 2)[None, :]


def contact_volume(params: LensSpaceParams, n_samples: int = 20000, seed: int = 0
                   ) -> ContactVolumeResult:
    """Monte Carlo ``int a ^ (da)^m`` over ``E(a) / Z_{q0}`` with a 95% interval.

    Points are uniform on the unit sphere in ``w = sqrt(a) z``; the integrand
    is the pointwise density from :func:`contact_density`.  The quotient
    value is the ellipsoid value divided by ``q0`` (the density is invariant
    under the free group action).
    """
    if n_samples < SAMPLE_FLOOR:
        warnings.warn(f"n_samples < {SAMPLE_FLOOR}: interval may be too wide", SampleFloorWarning)
    n_samples = max(int(n_samples), 2)
    w = _sample_sphere(params, n_samples, seed)
    dens = contact_density(params, w)
    S = sphere_volume(2 * params.m + 1)
    mean = math.fsum(dens.tolist()) / n_samples
    half = 1.96 * float(np.std(dens, ddof=1)) / math.sqrt(n_samples)
    q0 = params.q0
    val = S * mean / q0
    ci = (S * (mean - half) / q0, S * (mean + half) / q0)
    return ContactVolumeResult(val, "monte_carlo", ci, n_samples, q0)


def contact_volume_closed_form(params: LensSpaceParams) -> ContactVolumeResult:
    """``(2 pi)^{m+1} / (q0 prod a_j)``."""
    v = (2 * math.pi) ** (params.m + 1) / (params.q0 * float(np.prod(params.a)))
    return ContactVolumeResult(v, "analytic_oracle", None, 0, params.q0)


def _form_on_vectors(z: np.ndarray, u: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    """``(a ^ da)(u, v, w)`` by the alternating sum, real coordinates ``(x0, y0, x1, y1)``."""
    x, y = z[0::2], z[1::2]

    def a(t):
        return float(np.sum(x * t[1::2] - y * t[0::2]))

    def da(s, t):
        return 2.0 * float(np.sum(s[0::2] * t[1::2] - s[1::2] * t[0::2]))

    return a(u) * da(v, w) - a(v) * da(u, w) + a(w) * da(u, v)


def contact_volume_quadrature(params: LensSpaceParams, epsabs: float = 1e-10
                              ) -> ContactVolumeResult:
    """Iterated quadrature of ``a ^ da`` on ``E(a0, a1)`` in coordinates
    ``z_j = r_j(psi) e^{i theta_j}``, ``r_0 = cos psi / sqrt(a0)``, ``r_1 = sin psi / sqrt(a1)``.
    """
    if params.m != 1:
        raise NotImplementedError("quadrature oracle is implemented for m = 1")
    a0, a1 = params.a
    s0, s1 = 1 / math.sqrt(a0), 1 / math.sqrt(a1)

    def integrand(t1, t0, psi):
        c, s = math.cos(psi), math.sin(psi)
        r0, r1 = c * s0, s * s1
        z = np.array([r0 * math.cos(t0), r0 * math.sin(t0), r1 * math.cos(t1), r1 * math.sin(t1)])
        d_psi = np.array([-s * s0 * math.cos(t0), -s * s0 * math.sin(t0),
                          c * s1 * math.cos(t1), c * s1 * math.sin(t1)])
        d_t0 = np.array([-z[1], z[0], 0.0, 0.0])
        d_t1 = np.array([0.0, 0.0, -z[3], z[2]])
        return abs(_form_on_vectors(z, d_psi, d_t0, d_t1))

    val, _ = tplquad(integrand, 0.0, math.pi / 2, 0.0, 2 * math.pi, 0.0, 2 * math.pi,
                     epsabs=epsabs, epsrel=1e-10)
    return ContactVolumeResult(val / params.q0, "analytic_oracle", None, 0, params.q0)


def leading_term_metric_contact(m: int, vol_X: float) -> float:
    """``-(m/2) (2 pi)^{-(m+1)} vol(X)``."""
    return -(m / 2.0) * (2 * math.pi) ** (-(m + 1)) * vol_X


def leading_term_general(trace_field: Callable | float, params: LensSpaceParams,
                         n_samples: int = 20000, seed: int = 0) -> float:
    """``-1/2 (2 pi)^{-(m+1)} (1/m!) int field . a ^ (da)^m`` by Monte Carlo.

    ``trace_field`` is a constant or a function of real ambient points
    ``z`` of shape ``(N, 2m+2)``; it is the caller's pointwise trace field.
    """
    m = params.m
    w = _sample_sphere(params, max(int(n_samples), 2), seed)
    dens = contact_density(params, w)
    if callable(trace_field):
        z = w / np.repeat(np.sqrt(np.asarray(params.a)), 2)[None, :]
        f = np.asarray(trace_field(z), dtype=float)
    else:
        f = np.full(len(w), float(trace_field))
    integral = sphere_volume(2 * m + 1) * math.fsum((f * dens).tolist()) / len(w) / params.q0
    return -0.5 * (2 * math.pi) ** (-(m + 1)) / math.factorial(m) * integral


def metric_contact_field(m: int, vol_X: float, contact_vol: float) -> float:
    """Constant trace field for which :func:`leading_term_general` reproduces
    :func:`leading_term_metric_contact` given ``vol(X)`` and the contact volume."""
    return m * math.factorial(m) * vol_X / contact_vol
