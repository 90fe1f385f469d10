"""Phase-space naming conventions and the extended (KvN) phase-space state."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_Q3 = ("x", "y", "z")


def coordinate_names(n: int) -> tuple:
    """``('q',)`` for one degree of freedom, ``('x', 'y', 'z')[:n]`` otherwise."""
    _check_n(n)
    return ("q",) if n == 1 else _Q3[:n]


def momentum_names(n: int) -> tuple:
    return tuple("p" if q == "q" else "p" + q for q in coordinate_names(n))


def phi_names(n: int) -> tuple:
    return coordinate_names(n) + momentum_names(n)


def lambda_names(n: int) -> tuple:
    """Conjugates of the phase-space coordinates, e.g. ``lam_x``, ``lam_px``."""
    return tuple("lam_" + s for s in phi_names(n))


def _check_n(n):
    if n not in (1, 2, 3):
        raise ValueError(f"number of degrees of freedom must be 1, 2 or 3, got {n}")


def symplectic_matrix(n: int) -> np.ndarray:
    """omega^{ab} with omega^{q_i p_i} = +1."""
    w = np.zeros((2 * n, 2 * n))
    w[:n, n:] = np.eye(n)
    w[n:, :n] = -np.eye(n)
    return w


@dataclass
class ExtendedState:
    """A point of the extended phase space.

    ``phi`` holds ``(q_1..q_n, p_1..p_n)`` and ``lam`` their conjugates
    ``(lam_q_1..lam_q_n, lam_p_1..lam_p_n)``.  The ghosts ``c`` and ``cbar``
    are optional lists of odd Grassmann elements.  During integration with
    ghosts ``lam`` may become a list of even Grassmann elements whose body is
    the ordinary conjugate momentum.
    """

    phi: np.ndarray
    lam: object
    c: list | None = None
    cbar: list | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if self.phi.ndim != 1 or self.phi.size % 2:
            raise ValueError("phi must be a flat vector of even length")
        _check_n(self.n)
        if not isinstance(self.lam, list):
            self.lam = np.asarray(self.lam, dtype=float)
        if len(self.lam) != self.phi.size:
            raise ValueError("lam must have the same length as phi")
        for g in (self.c, self.cbar):
            if g is not None and len(g) != self.phi.size:
                raise ValueError("ghost vectors must have length 2n")
        if (self.c is None) != (self.cbar is None):
            raise ValueError("c and cbar must be given together")

    @property
    def n(self) -> int:
        return self.phi.size // 2

    @property
    def has_ghosts(self) -> bool:
        return self.c is not None

    @property
    def q(self):
        return self.phi[: self.n]

    @property
    def p(self):
        return self.phi[self.n:]

    def lam_body(self) -> np.ndarray:
        """Ordinary (number) part of the conjugate momenta."""
        if isinstance(self.lam, list):
            return np.array([complex(getattr(v, "body", v)).real for v in self.lam])
        return np.asarray(self.lam, dtype=float)

    def env(self) -> dict:
        """Variable bindings ``name -> value`` for expression evaluation."""
        n = self.n
        out = dict(zip(phi_names(n), self.phi.tolist()))
        out.update(zip(lambda_names(n), self.lam_body().tolist()))
        return out

    @classmethod
    def from_arrays(cls, q: Sequence[float], p: Sequence[float],
                    lam_q: Sequence[float], lam_p: Sequence[float], **kw):
        return cls(np.concatenate([q, p]), np.concatenate([lam_q, lam_p]), **kw)
