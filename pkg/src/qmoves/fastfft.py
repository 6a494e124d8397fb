"""Thin FFT wrappers for the propagation hot loops.

The scipy.fft public entry points spend more time in dispatch than in the
transform itself at our array sizes (complex128, length 256), so when the
bundled pocketfft kernel is importable we call it directly; otherwise we
fall back to the public API.  Callers must pass complex128 ndarrays and
transform along the last axis.
"""

import numpy as np

try:
    from scipy.fft._pocketfft.pypocketfft import c2c as _c2c

    def fft(x: np.ndarray) -> np.ndarray:
        return _c2c(x, axes=(x.ndim - 1,), forward=True)

    def ifft(x: np.ndarray) -> np.ndarray:
        return _c2c(x, axes=(x.ndim - 1,), forward=False, inorm=2)

    def fft_into(x: np.ndarray, out: np.ndarray) -> np.ndarray:
        return _c2c(x, axes=(x.ndim - 1,), forward=True, out=out)

    def ifft_into(x: np.ndarray, out: np.ndarray) -> np.ndarray:
        return _c2c(x, axes=(x.ndim - 1,), forward=False, inorm=2, out=out)

    _ = ifft(fft(np.ones(8, dtype=np.complex128)))  # smoke-check the kernel
except Exception:  # pragma: no cover - depends on the scipy build
    from scipy.fft import fft as _fft_pub, ifft as _ifft_pub

    def fft(x: np.ndarray) -> np.ndarray:
        return _fft_pub(x, axis=-1)

    def ifft(x: np.ndarray) -> np.ndarray:
        return _ifft_pub(x, axis=-1)

    def fft_into(x: np.ndarray, out: np.ndarray) -> np.ndarray:
        out[...] = _fft_pub(x, axis=-1)
        return out

    def ifft_into(x: np.ndarray, out: np.ndarray) -> np.ndarray:
        out[...] = _ifft_pub(x, axis=-1)
        return out
