"""Mel spectrograms and segmented MFCC matrices.

Pipeline: frame + window -> real FFT power spectrum -> triangular mel
projection -> dB (referenced to the per-spectrogram max, floored at -80 dB)
-> orthonormal DCT-II for cepstral coefficients.

Conventions (recorded in feature-cache metadata so caches are
self-describing): periodic Hann window, centered framing with reflect
padding, Slaney mel scale with Slaney area normalization by default, MFCCs
computed from the dB-scaled mel grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .audio_io import CANONICAL_SAMPLE_RATE, AudioClip
from .errors import InvalidParams, ShapeMismatch

DB_FLOOR = -80.0
TRACK_SECONDS = 30.0


@dataclass(frozen=True)
class StftParams:
    n_fft: int = 2048
    hop_length: int = 512
    window: str = "hann"  # periodic Hann is the only supported window
    centered: bool = True

    def __post_init__(self):
        if self.n_fft < 2 or (self.n_fft & (self.n_fft - 1)) != 0:
            raise InvalidParams(f"n_fft must be a power of two >= 2, got {self.n_fft}")
        if not 0 < self.hop_length <= self.n_fft:
            raise InvalidParams(
                f"hop_length must be in (0, n_fft], got {self.hop_length}"
            )
        if self.window != "hann":
            raise InvalidParams(f"unsupported window {self.window!r}")


@dataclass(frozen=True)
class MelParams:
    n_mels: int = 128
    f_min: float = 0.0
    f_max: float | None = None  # None means sample_rate / 2
    scale: str = "slaney"  # or "htk"
    norm: str | None = "slaney"  # triangle area normalization, or None

    def __post_init__(self):
        if self.n_mels < 1:
            raise InvalidParams(f"n_mels must be >= 1, got {self.n_mels}")
        if self.f_min < 0:
            raise InvalidParams(f"f_min must be >= 0, got {self.f_min}")
        if self.f_max is not None and self.f_max <= self.f_min:
            raise InvalidParams("f_max must exceed f_min")
        if self.scale not in ("slaney", "htk"):
            raise InvalidParams(f"unknown mel scale {self.scale!r}")
        if self.norm not in ("slaney", None):
            raise InvalidParams(f"unknown filter norm {self.norm!r}")


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-power grid, time frames along axis 0, mel bands along axis 1."""

    grid: np.ndarray  # (n_frames, n_mels) dB, cells in [DB_FLOOR, 0]
    stft_params: StftParams
    mel_params: MelParams
    sample_rate: int


@dataclass(frozen=True)
class MfccSegment:
    """One 3-second span of a track as a frames x coefficients matrix."""

    matrix: np.ndarray  # (130, 13) at canonical parameters
    genre: str | None
    track_id: str
    segment_index: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ShapeMismatch(f"non-finite MFCC values in {self.track_id}")


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window w[k] = 0.5 * (1 - cos(2*pi*k/n))."""
    if n < 1:
        raise InvalidParams(f"window length must be >= 1, got {n}")
    k = np.arange(n, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def stft(samples: np.ndarray, params: StftParams = StftParams()) -> np.ndarray:
    """Short-time Fourier transform, frames x (n_fft/2 + 1) complex.

    Centered framing pads n_fft/2 samples of reflection on both sides, so the
    frame count is 1 + len(samples) // hop_length.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise InvalidParams("stft expects a non-empty 1-D signal")
    n_fft, hop = params.n_fft, params.hop_length
    if params.centered:
        padded = np.pad(samples, n_fft // 2, mode="reflect")
        n_frames = 1 + samples.size // hop
    else:
        if samples.size < n_fft:
            raise InvalidParams("signal shorter than one window in uncentered mode")
        padded = samples
        n_frames = 1 + (samples.size - n_fft) // hop
    starts = np.arange(n_frames) * hop
    frames = padded[starts[:, None] + np.arange(n_fft)[None, :]]
    return np.fft.rfft(frames * hann_window(n_fft)[None, :], axis=1)


def hz_to_mel(freq, scale: str = "slaney"):
    freq = np.asarray(freq, dtype=np.float64)
    if scale == "htk":
        return 2595.0 * np.log10(1.0 + freq / 700.0)
    # Slaney: linear below 1 kHz, logarithmic above.
    mel = freq / (200.0 / 3.0)
    log_step = np.log(6.4) / 27.0
    return np.where(freq >= 1000.0, 15.0 + np.log(np.maximum(freq, 1e-12) / 1000.0) / log_step, mel)


def mel_to_hz(mel, scale: str = "slaney"):
    mel = np.asarray(mel, dtype=np.float64)
    if scale == "htk":
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)
    log_step = np.log(6.4) / 27.0
    return np.where(mel >= 15.0, 1000.0 * np.exp(log_step * (mel - 15.0)), mel * (200.0 / 3.0))


def mel_filterbank(sr: int, params: MelParams = MelParams(), n_fft: int = 2048) -> np.ndarray:
    """Triangular filterbank, (n_mels, n_fft/2 + 1), all weights >= 0.

    Filter centers are equally spaced on the mel axis between f_min and f_max.
    Raises InvalidParams when any triangle collapses to all-zero weights
    (n_mels too large for the FFT resolution).
    """
    f_max = params.f_max if params.f_max is not None else sr / 2.0
    if f_max > sr / 2.0 + 1e-9:
        raise InvalidParams(f"f_max {f_max} exceeds Nyquist {sr / 2.0}")
    mel_lo = hz_to_mel(params.f_min, params.scale)
    mel_hi = hz_to_mel(f_max, params.scale)
    band_edges = mel_to_hz(np.linspace(mel_lo, mel_hi, params.n_mels + 2), params.scale)
    bin_freqs = np.arange(n_fft // 2 + 1, dtype=np.float64) * (sr / n_fft)

    lower = band_edges[:-2, None]
    center = band_edges[1:-1, None]
    upper = band_edges[2:, None]
    rising = (bin_freqs[None, :] - lower) / np.maximum(center - lower, 1e-12)
    falling = (upper - bin_freqs[None, :]) / np.maximum(upper - center, 1e-12)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    if params.norm == "slaney":
        weights *= (2.0 / (band_edges[2:] - band_edges[:-2]))[:, None]
    if np.any(weights.sum(axis=1) == 0.0):
        raise InvalidParams(
            f"{params.n_mels} mel filters collapse at n_fft={n_fft}, sr={sr}"
        )
    return weights


def power_to_db(power: np.ndarray) -> np.ndarray:
    """Log-power relative to the grid max: 10*log10(S / max), floored at -80 dB.

    An all-zero grid (digital silence) maps to the floor everywhere. Exactly
    invariant to rescaling of the input power.
    """
    ref = float(np.max(power))
    if ref <= 0.0:
        return np.full(power.shape, DB_FLOOR)
    ratio_floor = 10.0 ** (DB_FLOOR / 10.0)
    return 10.0 * np.log10(np.maximum(power / ref, ratio_floor))


def mel_spectrogram(
    clip: AudioClip,
    stft_params: StftParams = StftParams(),
    mel_params: MelParams = MelParams(),
) -> MelSpectrogram:
    """Power spectrum |STFT|^2 projected through the mel bank, in dB."""
    spectrum = stft(clip.samples, stft_params)
    power = np.abs(spectrum) ** 2
    bank = mel_filterbank(clip.sample_rate, mel_params, stft_params.n_fft)
    grid = power_to_db(power @ bank.T)
    return MelSpectrogram(
        grid=grid,
        stft_params=stft_params,
        mel_params=mel_params,
        sample_rate=clip.sample_rate,
    )


@lru_cache(maxsize=8)
def _dct_basis(n: int, n_keep: int) -> np.ndarray:
    k = np.arange(n, dtype=np.float64)[:, None]
    m = np.arange(n_keep, dtype=np.float64)[None, :]
    basis = np.cos(np.pi * (k + 0.5) * m / n)
    scale = np.full(n_keep, np.sqrt(2.0 / n))
    scale[0] = np.sqrt(1.0 / n)
    return basis * scale[None, :]


def dct_ii_ortho(rows: np.ndarray, n_keep: int | None = None) -> np.ndarray:
    """Orthonormal DCT-II along each row, first n_keep coefficients kept."""
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[-1]
    if n_keep is None:
        n_keep = n
    if n_keep > n:
        raise InvalidParams(f"n_keep {n_keep} exceeds row length {n}")
    return rows @ _dct_basis(n, n_keep)


def idct_ii_ortho(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of the full-length orthonormal DCT-II (basis transpose)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    n = coeffs.shape[-1]
    return coeffs @ _dct_basis(n, n).T


def expected_frames_per_segment(
    sample_rate: int, hop: int = 512, n_segments: int = 10, track_seconds: float = TRACK_SECONDS
) -> tuple[int, int]:
    """Return (samples per segment span, frame count of a full span)."""
    span = int(round(sample_rate * track_seconds / n_segments))
    return span, 1 + span // hop


def extract_mfcc_segments(
    clip: AudioClip,
    n_mfcc: int = 13,
    n_fft: int = 2048,
    hop: int = 512,
    n_segments: int = 10,
    n_mels: int = 128,
    mel_params: MelParams | None = None,
) -> list[MfccSegment]:
    """Cut a track into n_segments fixed 3-second spans and extract one
    frames x n_mfcc MFCC matrix per span.

    Span boundaries assume the nominal 30 s track: span i covers samples
    [i*L, (i+1)*L) with L = round(sr * 30 / n_segments). Spans yielding fewer
    frames than a full span (short final spans of sub-30 s tracks) are
    dropped, so a track contributes at most n_segments segments.
    """
    stft_params = StftParams(n_fft=n_fft, hop_length=hop)
    if mel_params is None:
        mel_params = MelParams(n_mels=n_mels)
    span, full_frames = expected_frames_per_segment(
        clip.sample_rate, hop=hop, n_segments=n_segments
    )
    track_id = clip.source_path
    segments = []
    for index in range(n_segments):
        chunk = clip.samples[index * span : (index + 1) * span]
        if chunk.size == 0:
            continue
        piece = AudioClip(
            samples=chunk,
            sample_rate=clip.sample_rate,
            source_path=clip.source_path,
            genre=clip.genre,
        )
        grid = mel_spectrogram(piece, stft_params, mel_params).grid
        if grid.shape[0] < full_frames:
            continue
        matrix = dct_ii_ortho(grid, n_mfcc)
        segments.append(
            MfccSegment(
                matrix=matrix,
                genre=clip.genre,
                track_id=track_id,
                segment_index=index,
            )
        )
    return segments


def bilinear_resize(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resize a 2-D array with bilinear sampling at output pixel centers.

    The identity size is an exact identity.
    """
    in_h, in_w = image.shape
    ys = np.clip((np.arange(height) + 0.5) * (in_h / height) - 0.5, 0.0, in_h - 1.0)
    xs = np.clip((np.arange(width) + 0.5) * (in_w / width) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = image[y0][:, x0] * (1.0 - wx) + image[y0][:, x1] * wx
    bottom = image[y1][:, x0] * (1.0 - wx) + image[y1][:, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def render_melspec_tensor(
    spec: MelSpectrogram, height: int = 288, width: int = 432
) -> np.ndarray:
    """Render a mel spectrogram as an (height, width, 3) array in [0, 1].

    The dB grid is min-max normalized, oriented like a spectrogram plot
    (high bands at the top, time left to right), bilinearly resized, and
    replicated across three channels. A constant grid (degenerate range)
    renders as all zeros.
    """
    if spec.grid.size == 0:
        raise InvalidParams("empty spectrogram")
    lo = float(spec.grid.min())
    hi = float(spec.grid.max())
    if hi == lo:
        return np.zeros((height, width, 3))
    image = (spec.grid.T[::-1, :] - lo) / (hi - lo)
    resized = bilinear_resize(image, height, width)
    return np.repeat(resized[:, :, None], 3, axis=2)
