import hashlib
import json
import logging
import os

import numpy as np


def get_logger(name):
    '''
    Module loggers are children of the "loopfloer" logger, which the sacred experiment also uses
    '''
    return logging.getLogger("loopfloer." + name)


def is_power_of_two(value):
    return value >= 1 and (value & (value - 1)) == 0


def wavenumbers(N):
    '''
    Integer time frequencies of the real FFT of an N-periodic sample array
    :param N: Number of samples per unit time
    :return: Array [0, 1, ..., N//2]
    '''
    return np.arange(N // 2 + 1)


def spectral_derivative(samples, order=1):
    '''
    Derivative of periodic samples along axis 0 (time), computed in Fourier space.
    The mean is removed first, so constant arrays have an exactly vanishing derivative.
    For odd orders the Nyquist coefficient is dropped, for even orders it is kept so that
    the discrete second derivative has no spurious zero mode.
    :param samples: Array of shape [N, ...] of samples at t_j = j/N
    :param order: Derivative order (>= 1)
    :return: Array of the same shape
    '''
    N = samples.shape[0]
    centred = samples - samples.mean(axis=0, keepdims=True)
    coeffs = np.fft.rfft(centred, axis=0)
    k = wavenumbers(N)
    mult = (2j * np.pi * k) ** order
    if order % 2 == 1 and N % 2 == 0:
        mult[-1] = 0.0
    mult = mult.reshape((-1,) + (1,) * (samples.ndim - 1))
    return np.fft.irfft(coeffs * mult, n=N, axis=0)


def derivative_matrix(N, order=1):
    '''
    Dense matrix of spectral differentiation on N periodic samples (column j is the derivative of e_j)
    '''
    return spectral_derivative(np.eye(N), order=order)


def grid_mean(values, axis=0):
    '''
    Rectangle-rule quadrature over one period on the uniform grid (spectrally accurate for periodic integrands)
    '''
    return np.mean(values, axis=axis)


def resample_periodic(samples, N_new):
    '''
    Spectral interpolation (or truncation) of periodic samples along axis 0 to a grid of N_new points
    :param samples: Array [N, ...]
    :param N_new: New number of samples
    :return: Array [N_new, ...]
    '''
    N = samples.shape[0]
    if N_new == N:
        return samples.copy()
    coeffs = np.fft.rfft(samples, axis=0)
    new_coeffs = np.zeros((N_new // 2 + 1,) + samples.shape[1:], dtype=complex)
    m = min(N, N_new) // 2 + 1
    new_coeffs[:m] = coeffs[:m]
    if N_new > N and N % 2 == 0:
        new_coeffs[N // 2] *= 0.5 # Old Nyquist cosine splits into a +-k pair on the finer grid
    elif N_new < N and N_new % 2 == 0:
        new_coeffs[N_new // 2] = 2.0 * new_coeffs[N_new // 2].real
    return np.fft.irfft(new_coeffs * (float(N_new) / N), n=N_new, axis=0)


def etdrk4_coefficients(linear, ds, n_roots=32):
    '''
    Coefficients of the fourth-order exponential time differencing Runge-Kutta scheme for
    du/ds = L u + N(u) with diagonal L, evaluated by contour averages in the complex plane.
    :param linear: Diagonal of L (real array)
    :param ds: Step size
    :param n_roots: Number of contour points
    :return: Dictionary with exp_full, exp_half, f0, f1, f2, f3 (all broadcastable against L)
    '''
    roots = np.exp(1j * np.pi * (np.arange(n_roots) + 0.5) / n_roots)
    lr = ds * linear[:, None] + roots[None, :]
    exp_lr = np.exp(lr)
    return {
        "exp_full": np.exp(ds * linear),
        "exp_half": np.exp(0.5 * ds * linear),
        "f0": ds * np.real(np.mean((np.exp(lr / 2.0) - 1.0) / lr, axis=1)),
        "f1": ds * np.real(np.mean((-4.0 - lr + exp_lr * (4.0 - 3.0 * lr + lr ** 2)) / lr ** 3, axis=1)),
        "f2": ds * np.real(np.mean((2.0 + lr + exp_lr * (lr - 2.0)) / lr ** 3, axis=1)),
        "f3": ds * np.real(np.mean((-4.0 - 3.0 * lr - lr ** 2 + exp_lr * (4.0 - lr)) / lr ** 3, axis=1)),
    }


def get_num_workers():
    '''
    Number of worker processes, capped by the LOOPFLOER_THREADS environment variable (default: serial)
    '''
    try:
        workers = int(os.environ.get("LOOPFLOER_THREADS", "1"))
    except ValueError:
        workers = 1
    return max(1, workers)


def to_jsonable(obj):
    '''
    Converts numpy scalars/arrays and tuples recursively into plain JSON types
    '''
    if isinstance(obj, dict):
        return {str(key): to_jsonable(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return to_jsonable(float(obj))
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def config_hash(config):
    '''
    SHA-256 of the canonical JSON form of a configuration dictionary
    '''
    canonical = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
