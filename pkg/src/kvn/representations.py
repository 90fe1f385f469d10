"""Phase-space grids, KvN wavefunctions and the (q, p) <-> (q, lam_p) transform.

Axes are periodic: an axis ``(min, max, count)`` has points
``min + k * (max - min) / count`` for ``k = 0 .. count-1``.  For ``n``
degrees of freedom the first ``n`` axes are coordinates and the last ``n``
are momenta (tag ``QP``) or their conjugates ``lam_p`` (tag ``QLambdaP``).
"""
from __future__ import annotations

import csv
import io
import os
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .state import coordinate_names, lambda_names, momentum_names

QP = "QP"
QLAMBDAP = "QLambdaP"
_TAGS = (QP, QLAMBDAP)


def fft_workers() -> int:
    """Worker count for FFTs, from ``KVN_THREADS`` (default 1)."""
    raw = os.environ.get("KVN_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"KVN_THREADS must be an integer, got {raw!r}") from None
    return max(1, k)


@dataclass(frozen=True)
class Axis:
    min: float
    max: float
    count: int

    def __post_init__(self):
        if not self.max > self.min:
            raise ValueError("axis needs max > min")
        c = int(self.count)
        if c < 2 or c & (c - 1):
            raise ValueError(f"axis count must be a power of two, got {self.count}")

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / self.count

    @property
    def length(self) -> float:
        return self.max - self.min

    def points(self) -> np.ndarray:
        return self.min + self.spacing * np.arange(self.count)

    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * sfft.fftfreq(self.count, self.spacing)

    @classmethod
    def centered(cls, half_width: float, count: int) -> "Axis":
        return cls(-half_width, half_width, count)


@dataclass(frozen=True)
class PhaseGrid:
    axes: tuple
    tag: str = QP
    dual: tuple | None = None  # the momentum axes this grid was transformed from

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown representation tag {self.tag!r}")
        if len(self.axes) % 2 or not 2 <= len(self.axes) <= 6:
            raise ValueError("grid needs 2n axes with n in 1..3")
        object.__setattr__(self, "axes", tuple(self.axes))

    @property
    def n(self) -> int:
        return len(self.axes) // 2

    @property
    def shape(self) -> tuple:
        return tuple(a.count for a in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod([a.spacing for a in self.axes]))

    def names(self) -> tuple:
        n = self.n
        second = momentum_names(n) if self.tag == QP else lambda_names(n)[n:]
        return coordinate_names(n) + second

    def coords(self, sparse: bool = True) -> list:
        return np.meshgrid(*(a.points() for a in self.axes), indexing="ij", sparse=sparse)

    def env(self, sparse: bool = False) -> dict:
        return dict(zip(self.names(), self.coords(sparse=sparse)))

    def sample(self, f: Callable) -> "WaveFunction":
        """Evaluate ``f(*coords)`` on the grid (coordinates in axis order)."""
        vals = np.broadcast_to(f(*self.coords()), self.shape)
        return WaveFunction(self, np.array(vals, dtype=complex))

    @classmethod
    def square(cls, n: int, half_widths: Sequence[float], count: int, tag: str = QP):
        if len(half_widths) != 2 * n:
            raise ValueError("need one half-width per axis")
        return cls(tuple(Axis.centered(h, count) for h in half_widths), tag)


@dataclass
class WaveFunction:
    grid: PhaseGrid
    amplitudes: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != self.grid.shape:
            raise ValueError(f"amplitudes shape {self.amplitudes.shape} != grid shape {self.grid.shape}")

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell_volume))

    def inner(self, other: "WaveFunction") -> complex:
        _same_grid(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.cell_volume)

    def distance(self, other: "WaveFunction") -> float:
        _same_grid(self, other)
        d = self.amplitudes - other.amplitudes
        return float(np.sqrt(np.sum(np.abs(d) ** 2) * self.grid.cell_volume))

    def with_amplitudes(self, a) -> "WaveFunction":
        return WaveFunction(self.grid, a)

    def __add__(self, other):
        _same_grid(self, other)
        return self.with_amplitudes(self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        _same_grid(self, other)
        return self.with_amplitudes(self.amplitudes - other.amplitudes)

    def __mul__(self, c):
        return self.with_amplitudes(self.amplitudes * c)

    __rmul__ = __mul__

    # -- snapshot format ---------------------------------------------
    def to_bytes(self) -> bytes:
        """``KVNW`` magic, version, tag, axis count, ``(min, max, count)`` per axis,
        then the row-major complex64 payload (little endian)."""
        head = struct.pack("<4sBBB", b"KVNW", 1, _TAGS.index(self.grid.tag), len(self.grid.axes))
        for a in self.grid.axes:
            head += struct.pack("<ddI", a.min, a.max, a.count)
        return head + self.amplitudes.astype("<c8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "WaveFunction":
        magic, ver, tag, k = struct.unpack_from("<4sBBB", data, 0)
        if magic != b"KVNW" or ver != 1:
            raise ValueError("not a wavefunction snapshot")
        off = struct.calcsize("<4sBBB")
        axes = []
        for _ in range(k):
            lo, hi, cnt = struct.unpack_from("<ddI", data, off)
            off += struct.calcsize("<ddI")
            axes.append(Axis(lo, hi, cnt))
        grid = PhaseGrid(tuple(axes), _TAGS[tag])
        amp = np.frombuffer(data, dtype="<c8", offset=off).reshape(grid.shape)
        return cls(grid, amp.astype(complex))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "WaveFunction":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def density_csv(self) -> str:
        """One row per grid point: coordinates in axis order, then ``rho``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.grid.names(), "rho"])
        pts = [c.ravel() for c in self.grid.coords(sparse=False)]
        rho = density(self).ravel()
        for row in zip(*pts, rho):
            w.writerow([f"{v:.10g}" for v in row])
        return buf.getvalue()


def _same_grid(a, b):
    if a.grid.axes != b.grid.axes or a.grid.tag != b.grid.tag:
        raise ValueError("wavefunctions live on different grids")


def density(psi: WaveFunction) -> np.ndarray:
    return np.abs(psi.amplitudes) ** 2


def gaussian(grid: PhaseGrid, center: Sequence[float], width) -> WaveFunction:
    """Normalised Gaussian amplitude ``exp(-sum (x-x0)^2 / (4 w^2))``.

    ``width`` is the standard deviation of the density along each axis.
    """
    widths = np.broadcast_to(np.asarray(width, dtype=float), (len(grid.axes),))
    amp = np.ones(grid.shape, dtype=complex)
    for c, x0, w in zip(grid.coords(), center, widths):
        amp = amp * np.exp(-((c - x0) ** 2) / (4 * w * w))
    psi = WaveFunction(grid, amp)
    return psi * (1.0 / psi.norm())


def delta_surrogate(grid: PhaseGrid, center: Sequence[float]) -> WaveFunction:
    """Stand-in for a phase-space delta: density width of two grid cells."""
    return gaussian(grid, center, [2 * a.spacing for a in grid.axes])


# -- spectral derivatives --------------------------------------------------

def spectral_derivative(a: np.ndarray, axis_obj: Axis, axis: int, order: int = 1) -> np.ndarray:
    """Periodic spectral derivative along ``axis``; the Nyquist mode is dropped
    for odd orders so that real data stays real."""
    k = axis_obj.wavenumbers()
    factor = (1j * k) ** order
    if order % 2 and axis_obj.count % 2 == 0:
        factor[axis_obj.count // 2] = 0.0
    shape = [1] * a.ndim
    shape[axis] = -1
    w = fft_workers()
    f = sfft.fft(a, axis=axis, workers=w)
    return sfft.ifft(f * factor.reshape(shape), axis=axis, workers=w)


# -- partial Fourier transform ---------------------------------------------

def _lambda_axis(p: Axis) -> Axis:
    dl = 2 * np.pi / (p.count * p.spacing)
    return Axis(-dl * p.count / 2, dl * p.count / 2, p.count)


def _p_axis_for(lam: Axis) -> Axis:
    dp = 2 * np.pi / (lam.count * lam.spacing)
    return Axis(-dp * lam.count / 2, dp * lam.count / 2, lam.count)


def partial_fourier(psi: WaveFunction) -> WaveFunction:
    """``(1/sqrt(2 pi)) int psi(q, p) exp(-i lam_p p) dp`` along every momentum axis.

    Discretised with ``dp * dlam = 2 pi / count`` so the map is unitary.
    """
    g = psi.grid
    if g.tag != QP:
        raise ValueError("partial_fourier expects a (q, p) wavefunction")
    n = g.n
    a = psi.amplitudes
    new_axes = list(g.axes)
    w = fft_workers()
    for i in range(n, 2 * n):
        p = g.axes[i]
        lam = _lambda_axis(p)
        N = p.count
        shape = [1] * a.ndim
        shape[i] = N
        sign = ((-1.0) ** np.arange(N)).reshape(shape)
        lam_pts = lam.points().reshape(shape)
        a = sfft.fft(a * sign, axis=i, workers=w)
        a = a * (p.spacing / np.sqrt(2 * np.pi)) * np.exp(-1j * lam_pts * p.min)
        new_axes[i] = lam
    grid = PhaseGrid(tuple(new_axes), QLAMBDAP, dual=tuple(g.axes[n:]))
    return WaveFunction(grid, a)


def inverse_partial_fourier(psi: WaveFunction, p_axes: Sequence[Axis] | None = None) -> WaveFunction:
    g = psi.grid
    if g.tag != QLAMBDAP:
        raise ValueError("inverse_partial_fourier expects a (q, lam_p) wavefunction")
    n = g.n
    if p_axes is None:
        p_axes = g.dual if g.dual is not None else tuple(_p_axis_for(ax) for ax in g.axes[n:])
    a = psi.amplitudes
    new_axes = list(g.axes)
    w = fft_workers()
    for k, i in enumerate(range(n, 2 * n)):
        lam, p = g.axes[i], p_axes[k]
        N = lam.count
        if p.count != N or not np.isclose(p.spacing * lam.spacing * N, 2 * np.pi, rtol=1e-12):
            raise ValueError("momentum axis incompatible with the lam axis")
        shape = [1] * a.ndim
        shape[i] = N
        sign = ((-1.0) ** np.arange(N)).reshape(shape)
        lam_pts = lam.points().reshape(shape)
        a = sfft.ifft(a * np.exp(1j * lam_pts * p.min), axis=i, workers=w)
        a = a * sign * (N * lam.spacing / np.sqrt(2 * np.pi))
        new_axes[i] = p
    return WaveFunction(PhaseGrid(tuple(new_axes), QP), a)


# -- gauge action ----------------------------------------------------------

def _grad_alpha(alpha, grid: PhaseGrid, t: float = 0.0) -> list:
    env = dict(zip(coordinate_names(grid.n), grid.coords()[: grid.n]))
    return [np.asarray(g, dtype=float) for g in alpha.grad_on(env, t)]


def gauge_phase_mixed(psi: WaveFunction, alpha, e: float = 1.0, c_light: float = 1.0,
                      t: float = 0.0) -> WaveFunction:
    """Multiply by ``exp(-i (e/c) lam_p . grad alpha(q))``."""
    g = psi.grid
    if g.tag != QLAMBDAP:
        raise ValueError("gauge_phase_mixed expects a (q, lam_p) wavefunction")
    n = g.n
    co = g.coords()
    grads = _grad_alpha(alpha, g, t)
    phase = 0.0
    for i in range(n):
        phase = phase + co[n + i] * grads[i]
    return psi.with_amplitudes(psi.amplitudes * np.exp(-1j * (e / c_light) * phase))


def gauge_shift_qp(psi: WaveFunction, alpha, e: float = 1.0, c_light: float = 1.0,
                   t: float = 0.0) -> WaveFunction:
    """``psi'(q, p) = psi(q, p - (e/c) grad alpha(q))`` by Fourier shifts along p."""
    g = psi.grid
    if g.tag != QP:
        raise ValueError("gauge_shift_qp expects a (q, p) wavefunction")
    n = g.n
    shifts = [(e / c_light) * s for s in _grad_alpha(alpha, g, t)]
    a = psi.amplitudes
    w = fft_workers()
    for i in range(n):
        ax = g.axes[n + i]
        s = np.broadcast_to(shifts[i], a.shape)
        if np.max(np.abs(s)) > ax.length / 2:
            raise ValueError(f"momentum shift exceeds half the p range along axis {n + i}")
        shape = [1] * a.ndim
        shape[n + i] = -1
        k = ax.wavenumbers().reshape(shape)
        f = sfft.fft(a, axis=n + i, workers=w)
        a = sfft.ifft(f * np.exp(-1j * k * s), axis=n + i, workers=w)
    return psi.with_amplitudes(a)
