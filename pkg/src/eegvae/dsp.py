"""IIR filtering and windowed statistical features.

Filters are designed from scratch (Butterworth prototypes and an RBJ-style
notch, realized as cascaded second-order sections via the bilinear transform)
and applied causally in direct-form II transposed with zero initial state.
Feature extraction partitions each channel into non-overlapping windows of
``fs/100`` samples and computes five statistics per window, concatenated
channel-major at a 100 Hz frame rate.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import CheckpointError, ParameterError

STATS_PER_CHANNEL = 5
FRAME_RATE_HZ = 100.0

_FEAT_MAGIC = b"FEAT"
_FEAT_VERSION = 1


# ---------------------------------------------------------------------------
# Filter design
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IirFilter:
    """Causal IIR filter as a cascade of short (at most biquad) sections.

    ``sections`` is a tuple of (b, a) coefficient pairs with a[0] = 1; the
    equivalent single-polynomial form is available through the ``b``/``a``
    properties.  Stability (every pole strictly inside the unit circle) is
    checked per section at construction, where the roots are well
    conditioned.
    """

    sections: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]
    fs_hz: float

    def __post_init__(self):
        if not self.sections:
            raise ParameterError("filter needs at least one section")
        for b, a in self.sections:
            if len(b) == 0 or len(a) == 0 or a[0] != 1.0:
                raise ParameterError("sections need non-empty b, a with a[0] = 1")
            if len(a) > 1:
                poles = np.roots(a)
                if poles.size and np.max(np.abs(poles)) >= 1.0 - 1e-9:
                    raise ParameterError("unstable filter: pole on or outside unit circle")

    @classmethod
    def from_ba(cls, b, a, fs_hz: float = 0.0) -> "IirFilter":
        b = tuple(float(v) for v in np.atleast_1d(b))
        a = tuple(float(v) for v in np.atleast_1d(a))
        if not a or a[0] == 0.0:
            raise ParameterError("a[0] must be nonzero")
        if a[0] != 1.0:
            b = tuple(v / a[0] for v in b)
            a = tuple(v / a[0] for v in a)
        return cls(sections=((b, a),), fs_hz=fs_hz)

    @property
    def b(self) -> np.ndarray:
        """Numerator of the cascade, convolved into one polynomial."""
        out = np.array([1.0])
        for bs, _ in self.sections:
            out = np.convolve(out, bs)
        return out

    @property
    def a(self) -> np.ndarray:
        """Denominator of the cascade, convolved into one polynomial."""
        out = np.array([1.0])
        for _, as_ in self.sections:
            out = np.convolve(out, as_)
        return out

    def response(self, f_hz: np.ndarray | float, fs_hz: float | None = None) -> np.ndarray:
        """Complex frequency response at the given frequencies."""
        fs = self.fs_hz if fs_hz is None else fs_hz
        if fs <= 0:
            raise ParameterError("sample rate required for response evaluation")
        w = 2.0 * np.pi * np.atleast_1d(np.asarray(f_hz, dtype=np.float64)) / fs
        zinv = np.exp(-1j * w)
        h = np.ones_like(zinv)
        for b, a in self.sections:
            num = np.zeros_like(zinv)
            den = np.zeros_like(zinv)
            for k, v in enumerate(b):
                num += v * zinv**k
            for k, v in enumerate(a):
                den += v * zinv**k
            h *= num / den
        return h


def _butter_thetas(order: int) -> list[float]:
    """Prototype pole angles for conjugate pairs of an even-order Butterworth."""
    return [math.pi * (2 * k - 1) / (2 * order) for k in range(1, order // 2 + 1)]


def _butter_sections(order: int, fc_hz: float, fs_hz: float, highpass: bool):
    """Bilinear-transform biquads (plus one first-order section for odd order)."""
    K = math.tan(math.pi * fc_hz / fs_hz)
    sections = []
    for theta in _butter_thetas(order):
        q = 1.0 / (2.0 * math.sin(theta))
        norm = 1.0 / (1.0 + K / q + K * K)
        if highpass:
            b = (norm, -2.0 * norm, norm)
        else:
            b = (K * K * norm, 2.0 * K * K * norm, K * K * norm)
        a = (1.0, 2.0 * (K * K - 1.0) * norm, (1.0 - K / q + K * K) * norm)
        sections.append((b, a))
    if order % 2 == 1:
        norm = 1.0 / (K + 1.0)
        if highpass:
            b = (norm, -norm)
        else:
            b = (K * norm, K * norm)
        a = (1.0, (K - 1.0) * norm)
        sections.append((b, a))
    return sections


def design_bandpass(low_hz: float, high_hz: float, order: int, fs_hz: float) -> IirFilter:
    """Butterworth band-pass as a high-pass/low-pass cascade of half order each.

    The widely separated corners (e.g. 0.1 Hz and 70 Hz at 1 kHz) make the
    cascade numerically robust where a single 2*order polynomial would be
    ill conditioned.
    """
    if fs_hz <= 0:
        raise ParameterError(f"sample rate must be positive, got {fs_hz}")
    if not (0.0 < low_hz < high_hz < fs_hz / 2.0):
        raise ParameterError(
            f"need 0 < low < high < Nyquist, got low={low_hz}, high={high_hz}, fs={fs_hz}"
        )
    if order < 2 or order % 2 != 0:
        raise ParameterError(f"order must be even and >= 2, got {order}")
    half = order // 2
    sections = _butter_sections(half, low_hz, fs_hz, highpass=True)
    sections += _butter_sections(half, high_hz, fs_hz, highpass=False)
    return IirFilter(sections=tuple(sections), fs_hz=fs_hz)


def design_notch(f0_hz: float, q: float, fs_hz: float) -> IirFilter:
    """Second-order notch (cookbook biquad): zero pair on the unit circle at f0."""
    if fs_hz <= 0:
        raise ParameterError(f"sample rate must be positive, got {fs_hz}")
    if not (0.0 < f0_hz < fs_hz / 2.0):
        raise ParameterError(f"notch frequency {f0_hz} outside (0, Nyquist={fs_hz / 2})")
    if q <= 0:
        raise ParameterError(f"q must be positive, got {q}")
    w0 = 2.0 * math.pi * f0_hz / fs_hz
    alpha = math.sin(w0) / (2.0 * q)
    c = math.cos(w0)
    a0 = 1.0 + alpha
    b = (1.0 / a0, -2.0 * c / a0, 1.0 / a0)
    a = (1.0, -2.0 * c / a0, (1.0 - alpha) / a0)
    return IirFilter(sections=((b, a),), fs_hz=fs_hz)


def apply_filter(filt: IirFilter, signal: np.ndarray) -> np.ndarray:
    """Causal filtering (direct-form II transposed, zero initial state).

    Accepts a 1-D signal or a (channels, samples) array filtered along the
    last axis; output shape equals input shape.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    for b, a in filt.sections:
        x = lfilter(b, a, x, axis=-1)
    return x


# ---------------------------------------------------------------------------
# Windowed features
# ---------------------------------------------------------------------------


@dataclass
class FeatureSequence:
    """T x D feature frames at a fixed frame rate."""

    frames: np.ndarray
    frame_rate_hz: float = FRAME_RATE_HZ
    labels: dict = field(default_factory=dict)

    @property
    def feature_dim(self) -> int:
        return int(self.frames.shape[1])

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])


def window_stats(window: np.ndarray) -> tuple[float, float, float, float, float]:
    """(rms, zcr, mean, excess kurtosis, spectral entropy) of one window.

    zcr counts strict sign changes over W-1 adjacent pairs; kurtosis uses the
    biased-sample Fisher definition and degenerates to 0 when the window
    variance is below 1e-12; spectral entropy is the Shannon entropy of the
    normalized magnitude-squared DFT over DC..Nyquist bins, divided by
    log(#bins).
    """
    x = np.asarray(window, dtype=np.float64).ravel()
    if x.size < 2:
        raise ParameterError(f"window needs at least 2 samples, got {x.size}")
    stats = _stats_blocks(x.reshape(1, 1, x.size))
    return tuple(float(v) for v in stats[0, 0])


def _stats_blocks(blocks: np.ndarray) -> np.ndarray:
    """Vectorized five statistics for windows shaped (..., W) -> (..., 5)."""
    W = blocks.shape[-1]
    rms = np.sqrt(np.mean(blocks * blocks, axis=-1))
    mean = np.mean(blocks, axis=-1)
    zcr = np.sum(blocks[..., :-1] * blocks[..., 1:] < 0.0, axis=-1) / (W - 1)

    centered = blocks - mean[..., None]
    m2 = np.mean(centered * centered, axis=-1)
    m4 = np.mean(centered**4, axis=-1)
    safe_m2 = np.where(m2 < 1e-12, 1.0, m2)
    kurt = np.where(m2 < 1e-12, 0.0, m4 / (safe_m2 * safe_m2) - 3.0)

    spec = np.abs(np.fft.rfft(blocks, axis=-1)) ** 2
    total = spec.sum(axis=-1)
    safe_total = np.where(total < 1e-300, 1.0, total)
    p = spec / safe_total[..., None]
    plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    n_bins = spec.shape[-1]
    entropy = np.where(total < 1e-300, 0.0, -plogp.sum(axis=-1) / math.log(n_bins))

    return np.stack([rms, zcr, mean, kurt, entropy], axis=-1)


def extract_features(recording) -> FeatureSequence:
    """Windowed statistics of a (channels, samples) recording at 100 Hz.

    The signal is split into non-overlapping windows of ``fs/100`` samples;
    each frame concatenates the five per-channel statistics channel-major
    (channel 0's five, then channel 1's, ...), so D = channels * 5.
    """
    data = np.asarray(recording.data, dtype=np.float64)
    fs = float(recording.fs_hz)
    if data.ndim != 2:
        raise ParameterError(f"recording data must be (channels, samples), got {data.shape}")
    if fs <= 0 or fs % FRAME_RATE_HZ != 0:
        raise ParameterError(f"sample rate {fs} not divisible by {FRAME_RATE_HZ:.0f}")
    C, N = data.shape
    W = int(fs // FRAME_RATE_HZ)
    T = N // W
    if T == 0:
        return FeatureSequence(frames=np.zeros((0, C * STATS_PER_CHANNEL)))
    blocks = data[:, : T * W].reshape(C, T, W)
    stats = _stats_blocks(blocks)  # (C, T, 5)
    frames = np.ascontiguousarray(stats.transpose(1, 0, 2).reshape(T, C * STATS_PER_CHANNEL))
    return FeatureSequence(frames=frames)


def save_features(seq: FeatureSequence, path: str | Path) -> None:
    """Binary layout: magic, version, T, D (u32 LE), frame rate (f64 LE), then
    row-major little-endian float64 frames."""
    frames = np.ascontiguousarray(seq.frames, dtype="<f8")
    if frames.ndim != 2:
        raise ParameterError(f"frames must be 2-D, got shape {frames.shape}")
    header = _FEAT_MAGIC + struct.pack(
        "<IIId", _FEAT_VERSION, frames.shape[0], frames.shape[1], float(seq.frame_rate_hz)
    )
    Path(path).write_bytes(header + frames.tobytes())


def load_features(path: str | Path) -> FeatureSequence:
    raw = Path(path).read_bytes()
    head_len = 4 + struct.calcsize("<IIId")
    if len(raw) < head_len or raw[:4] != _FEAT_MAGIC:
        raise CheckpointError(f"{path}: not a feature file (bad magic)")
    version, n_frames, dim, rate = struct.unpack("<IIId", raw[4:head_len])
    if version != _FEAT_VERSION:
        raise CheckpointError(f"{path}: unsupported feature version {version}")
    expected = head_len + n_frames * dim * 8
    if len(raw) != expected:
        raise CheckpointError(f"{path}: truncated feature file ({len(raw)} of {expected} bytes)")
    frames = np.frombuffer(raw[head_len:], dtype="<f8").reshape(n_frames, dim).copy()
    return FeatureSequence(frames=frames, frame_rate_hz=rate)
