"""Test systems: periodic reaction-diffusion-advection and damped-wave PDEs.

Both families are discretized in space with the Fourier pseudospectral
method on a uniform periodic grid, giving driven linear ODE systems
du/dt = A(t) u + g(t).  The registry labels are ``rda:a`` .. ``rda:h`` and
``wave:a`` .. ``wave:c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = [
    "SystemSpec",
    "spectral_diff_matrices",
    "build_rda_system",
    "build_wave_system",
    "get_system",
    "RDA_CASES",
    "WAVE_CASES",
]


def spectral_diff_matrices(n: int):
    """First and second spectral differentiation matrices on [0, 2*pi).

    Wavenumbers run over {-n/2 + 1, ..., n/2}.  The first-derivative matrix
    zeroes the Nyquist mode (the standard convention for odd derivatives on
    an even grid; it is what keeps D real and antisymmetric), while the
    second-derivative matrix keeps the full -k^2 symbol.

    Parameters
    ----------
    n : int
        Even grid size, n >= 4.

    Returns
    -------
    (D, D2) : two (n, n) real matrices.
    """
    if n % 2 != 0 or n < 4:
        raise InvalidArgumentError(f"grid size must be even and >= 4, got {n}")
    x = 2.0 * np.pi * np.arange(n) / n
    k = np.concatenate([np.arange(-n // 2 + 1, 0), np.arange(0, n // 2 + 1)])
    F = np.exp(-1j * np.outer(k, x)) / np.sqrt(n)
    lam1 = 1j * k.astype(float)
    lam1[k == n // 2] = 0.0
    lam2 = -(k.astype(float) ** 2)
    D = F.conj().T @ (lam1[:, None] * F)
    D2 = F.conj().T @ (lam2[:, None] * F)
    for name, M in (("D", D), ("D2", D2)):
        if np.max(np.abs(M.imag)) > 1e-12:
            raise RuntimeError(f"{name} has imaginary residue above 1e-12")
    return np.ascontiguousarray(D.real), np.ascontiguousarray(D2.real)


@dataclass(frozen=True)
class SystemSpec:
    """A driven linear system du/dt = A(t) u + g(t).

    ``a_of_t`` maps a time to the (N, N) operator.  Forcing comes in three
    flavors: none, a shared vector ``g_of_t(t)`` applied to every
    trajectory, or a parametric per-trajectory forcing whose rows are the
    initial conditions scaled by ``parametric_scale(t)``.
    """

    n_full: int
    a_of_t: Callable[[float], np.ndarray]
    time_invariant: bool
    label: str
    params: dict = field(default_factory=dict)
    g_of_t: Optional[Callable[[float], np.ndarray]] = None
    parametric_scale: Optional[Callable[[float], float]] = None

    @property
    def has_forcing(self) -> bool:
        return self.g_of_t is not None or self.parametric_scale is not None

    def forcing_rows(self, t: float, f0: np.ndarray) -> Optional[np.ndarray]:
        """Forcing matrix at time t for the trajectories with initial rows f0."""
        if self.parametric_scale is not None:
            return f0 * self.parametric_scale(t)
        if self.g_of_t is not None:
            g = np.asarray(self.g_of_t(t), dtype=float)
            return np.broadcast_to(g, (f0.shape[0], self.n_full)).copy()
        return None


# Case table for the reaction-diffusion-advection equation:
# label -> (mu(t), v(t), a(t), time_invariant, description)
RDA_CASES = {
    "a": (lambda t: 0.0, lambda t: 1.0, lambda t: 0.0, True, "advection only"),
    "b": (lambda t: 0.1, lambda t: 1.0, lambda t: 0.0, True, "advection dominated"),
    "c": (lambda t: 0.05, lambda t: 1.0, lambda t: 1.0, True, "reaction-diffusion-advection"),
    "d": (lambda t: 2.0, lambda t: 0.5, lambda t: 0.0, True, "diffusion dominated"),
    "e": (
        lambda t: 0.01 * np.cos(2.0 * t) ** 2,
        lambda t: 1.0 + np.sin(5.0 * t) ** 2,
        lambda t: -0.5 * np.cos(t),
        False,
        "time-dependent reaction-diffusion-advection",
    ),
    "f": (
        lambda t: 0.0,
        lambda t: 0.5 + np.sin(4.0 * t),
        lambda t: np.cos(5.0 * t) ** 2,
        False,
        "time-dependent reaction-advection",
    ),
    "g": (lambda t: 2.0, lambda t: 0.0, lambda t: 0.0, True, "constant diffusion with forcing"),
    "h": (
        lambda t: 2.0 + 0.25 * np.sin(t) + 0.1 * np.cos(10.0 * t),
        lambda t: 0.0,
        lambda t: 0.0,
        False,
        "time-dependent diffusion with parametric forcing",
    ),
}


def build_rda_system(case: str, n: int) -> SystemSpec:
    """Semi-discrete reaction-diffusion-advection system for one case label.

    The operator is A(t) = mu(t) D2 + v(t) D + a(t) I.  Cases a-f carry no
    forcing; case g a constant forcing of 0.001 on every grid point; case h
    the per-trajectory forcing u0 / (1 + t), which keeps the sampled forcing
    matrix at full column rank.
    """
    if case not in RDA_CASES:
        raise InvalidArgumentError(f"unknown rda case {case!r}")
    mu, v, a, time_invariant, desc = RDA_CASES[case]
    D, D2 = spectral_diff_matrices(n)
    eye = np.eye(n)

    def a_of_t(t, _mu=mu, _v=v, _a=a):
        return _mu(t) * D2 + _v(t) * D + _a(t) * eye

    g_of_t = None
    parametric = None
    if case == "g":
        const = np.full(n, 0.001)
        g_of_t = lambda t: const  # noqa: E731
    elif case == "h":
        parametric = lambda t: 1.0 / (1.0 + t)  # noqa: E731

    return SystemSpec(
        n_full=n,
        a_of_t=a_of_t,
        time_invariant=time_invariant,
        label=f"rda:{case}",
        params={"case": case, "mu": mu, "v": v, "a": a, "description": desc},
        g_of_t=g_of_t,
        parametric_scale=parametric,
    )


# Damped-wave damping coefficients: label -> (gamma1, dgamma1/dt, gamma2,
# Gamma(t) = int_0^t gamma2, time_invariant)
WAVE_CASES = {
    "a": (
        lambda t: 0.25,
        lambda t: 0.0,
        lambda t: 0.25,
        lambda t: 0.25 * t,
        True,
    ),
    "b": (
        lambda t: 0.5 * np.sin(t) ** 2,
        lambda t: np.sin(t) * np.cos(t),
        lambda t: 1.0,
        lambda t: t,
        False,
    ),
    "c": (
        lambda t: 0.5 * np.cos(t),
        lambda t: -0.5 * np.sin(t),
        lambda t: 1.0 + np.sin(t),
        lambda t: t - np.cos(t) + 1.0,
        False,
    ),
}


def build_wave_system(case: str, n: int, c: float = 1.0) -> SystemSpec:
    """First-order form of the damped wave equation with n spatial points.

    The state is (u, du/dt + gamma1 u), dimension 2n; the resolved variables
    are the first n components.  No forcing in any case.
    """
    if case not in WAVE_CASES:
        raise InvalidArgumentError(f"unknown wave case {case!r}")
    gamma1, dgamma1, gamma2, big_gamma, time_invariant = WAVE_CASES[case]
    _, D2 = spectral_diff_matrices(n)
    cc_d2 = (c * c) * D2
    eye = np.eye(n)

    def a_of_t(t, _g1=gamma1, _g2=gamma2):
        top = np.hstack([-_g1(t) * eye, eye])
        bot = np.hstack([cc_d2, -_g2(t) * eye])
        return np.vstack([top, bot])

    return SystemSpec(
        n_full=2 * n,
        a_of_t=a_of_t,
        time_invariant=time_invariant,
        label=f"wave:{case}",
        params={
            "case": case,
            "c": c,
            "gamma1": gamma1,
            "dgamma1": dgamma1,
            "gamma2": gamma2,
            "big_gamma": big_gamma,
            "n_space": n,
        },
    )


def get_system(label: str, n: int) -> SystemSpec:
    """Look up a registry label of the form ``rda:<case>`` or ``wave:<case>``.

    For wave labels ``n`` is the spatial grid size (the state dimension is
    2n); for rda labels it is the state dimension itself.
    """
    try:
        family, case = label.split(":")
    except ValueError:
        raise InvalidArgumentError(f"malformed system label {label!r}") from None
    if family == "rda":
        return build_rda_system(case, n)
    if family == "wave":
        return build_wave_system(case, n)
    raise InvalidArgumentError(f"unknown system family {family!r}")
