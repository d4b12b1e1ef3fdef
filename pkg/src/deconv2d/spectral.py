"""FFT evaluation of the autoconvolution via zero padding to ``2n x 2n``.

With ``Z`` the zero padding and ``R`` the restriction to the leading
``n x n`` block::

    F(x)        = h^2 R IFFT(FFT(Z x)^2)
    F'(x) u     = h^2 R IFFT(2 FFT(Z x) FFT(Z u))
    F'(x)^T v   = h^2 R IFFT(2 conj(FFT(Z x)) FFT(Z v))

The restriction is applied to the outputs of ``F`` and ``F'`` only in the
limited data case.  Because the padded length ``2n`` exceeds the support
``2n - 1`` of the linear convolution, there is no wrap-around and output bin
``(k, l)`` is exactly the midpoint double sum for node ``((k+1) h, (l+1) h)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DataCase, data_shape

__all__ = ["SpectralOperator", "ImaginaryResidueError"]

_IMAG_RTOL = 1e-10


class ImaginaryResidueError(ArithmeticError):
    """Inverse FFT left a non-negligible imaginary part."""


@dataclass(frozen=True)
class SpectralOperator:
    """FFT backend for the autoconvolution on an ``n x n`` grid.

    Parameters
    ----------
    n : int
        Cells per axis.
    case : DataCase or str
        Observation window.
    pad : int, optional
        Padded size per axis; at least ``2n`` (the default).
    """

    n: int
    case: DataCase = DataCase.LIMITED
    pad: int | None = None

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError("n must be positive")
        pad = 2 * n if self.pad is None else int(self.pad)
        if pad < 2 * n:
            raise ValueError(f"pad={pad} is below 2n={2 * n}; convolution would wrap around")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "pad", pad)
        object.__setattr__(self, "case", DataCase.parse(self.case))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def data_shape(self) -> tuple[int, int]:
        return data_shape(self.n, self.case)

    def _grid(self, x, name="x") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n, self.n):
            raise ValueError(f"{name} has shape {x.shape}, expected {(self.n, self.n)}")
        return x

    def _fft_padded(self, a: np.ndarray) -> np.ndarray:
        return np.fft.fft2(a, s=(self.pad, self.pad))

    def _real(self, spectrum: np.ndarray) -> np.ndarray:
        z = np.fft.ifft2(spectrum)
        re = z.real
        imag = np.linalg.norm(z.imag)
        scale = np.linalg.norm(re)
        if imag > _IMAG_RTOL * scale and imag > 1e-300:
            raise ImaginaryResidueError(
                f"imaginary residue {imag:.3e} exceeds {_IMAG_RTOL:g} x output norm {scale:.3e}"
            )
        return re

    def _to_data(self, full: np.ndarray) -> np.ndarray:
        m = self.data_shape[0]
        out = full[:m, :m].copy()
        if self.case is DataCase.FULL:
            out[2 * self.n - 1, :] = 0.0
            out[:, 2 * self.n - 1] = 0.0
        return out

    def forward(self, x) -> np.ndarray:
        """``h^2 R(IFFT(FFT(Z x)^2))``."""
        fx = self._fft_padded(self._grid(x))
        return self.h ** 2 * self._to_data(self._real(fx * fx))

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)

    def derivative(self, x, u) -> np.ndarray:
        """``h^2 R(IFFT(2 FFT(Z x) FFT(Z u)))``."""
        fx = self._fft_padded(self._grid(x))
        fu = self._fft_padded(self._grid(u, "u"))
        return self.h ** 2 * self._to_data(self._real(2.0 * fx * fu))

    def adjoint(self, x, v) -> np.ndarray:
        """``h^2 R(IFFT(2 conj(FFT(Z x)) FFT(Z v)))``, the Euclidean adjoint of :meth:`derivative`."""
        v = np.asarray(v, dtype=float)
        if v.shape != self.data_shape:
            raise ValueError(f"v has shape {v.shape}, expected {self.data_shape}")
        fx = self._fft_padded(self._grid(x))
        fv = self._fft_padded(v)
        out = self._real(2.0 * np.conj(fx) * fv)
        return self.h ** 2 * out[: self.n, : self.n]

    def normal(self, x, u) -> np.ndarray:
        """``F'(x)^T F'(x) u``."""
        return self.adjoint(x, self.derivative(x, u))
