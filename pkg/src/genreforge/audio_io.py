"""WAV decoding, mono normalization, linear resampling, and GTZAN directory
indexing.

Only RIFF/WAVE containers with little-endian PCM payloads are supported:
8/16/24/32-bit integer and 32-bit IEEE float. Compressed codecs raise
CorruptedFile, which is also what truncated or size-inconsistent files raise
(the condition known to affect one jazz track in GTZAN distributions).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptedFile, EmptyDataset, InvalidParams, IoError

#: Canonical processing rate. A 3 s span at this rate is 66150 samples, which
#: is exactly 130 hop-512 frames under centered framing.
CANONICAL_SAMPLE_RATE = 22050

#: The ten GTZAN genre directory names, in label-id order.
GENRES = (
    "blues",
    "classical",
    "country",
    "disco",
    "hiphop",
    "jazz",
    "metal",
    "pop",
    "reggae",
    "rock",
)

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    """Mono float audio with provenance.

    samples are float64 in [-1, 1]; sample_rate is in Hz.
    """

    samples: np.ndarray
    sample_rate: int
    source_path: str = ""
    genre: str | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise InvalidParams(f"AudioClip samples must be 1-D, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise InvalidParams(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise CorruptedFile(f"non-finite samples in {self.source_path!r}")
        if samples.size and np.max(np.abs(samples)) > 1.0 + 1e-6:
            raise CorruptedFile(f"samples exceed full scale in {self.source_path!r}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class DatasetIndex:
    """Sorted index of decodable tracks under a GTZAN-style root."""

    entries: tuple  # of (path, genre, track_id)
    genres: frozenset
    excluded: tuple = field(default=())  # of (path, reason)

    def __len__(self) -> int:
        return len(self.entries)


def _read_exact(stream, n: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise CorruptedFile(f"truncated {what}: wanted {n} bytes, got {len(data)}")
    return data


def _parse_wav(path) -> tuple[int, int, int, int, bytes | None, bool]:
    """Parse a RIFF/WAVE file and return
    (sample_rate, n_channels, bits, format_tag, data_bytes, is_float).

    Validates chunk sizes against the actual file length so truncated files
    fail loudly instead of decoding garbage.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    if len(raw) < 12:
        raise CorruptedFile(f"{path}: truncated RIFF header")
    if raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise CorruptedFile(f"{path}: not a RIFF/WAVE file")
    riff_size = struct.unpack_from("<I", raw, 4)[0]
    if riff_size + 8 > len(raw):
        raise CorruptedFile(
            f"{path}: RIFF size {riff_size} exceeds file length {len(raw)}"
        )

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        chunk_size = struct.unpack_from("<I", raw, pos + 4)[0]
        body_start = pos + 8
        if body_start + chunk_size > len(raw):
            raise CorruptedFile(
                f"{path}: chunk {chunk_id!r} claims {chunk_size} bytes past end of file"
            )
        body = raw[body_start : body_start + chunk_size]
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise CorruptedFile(f"{path}: fmt chunk too short ({chunk_size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos = body_start + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None:
        raise CorruptedFile(f"{path}: missing fmt chunk")
    if data is None:
        raise CorruptedFile(f"{path}: missing data chunk")

    format_tag, n_channels, sample_rate, _, block_align, bits = fmt
    if format_tag == _WAVE_FORMAT_EXTENSIBLE:
        # SubFormat GUID starts with the effective format tag.
        raise CorruptedFile(f"{path}: WAVE_FORMAT_EXTENSIBLE is not supported")
    if format_tag not in (_WAVE_FORMAT_PCM, _WAVE_FORMAT_IEEE_FLOAT):
        raise CorruptedFile(f"{path}: unsupported codec (format tag 0x{format_tag:04X})")
    is_float = format_tag == _WAVE_FORMAT_IEEE_FLOAT
    if is_float and bits != 32:
        raise CorruptedFile(f"{path}: float WAV must be 32-bit, got {bits}")
    if not is_float and bits not in (8, 16, 24, 32):
        raise CorruptedFile(f"{path}: unsupported PCM depth {bits}")
    if n_channels < 1 or sample_rate < 1:
        raise CorruptedFile(f"{path}: bad fmt fields (channels={n_channels}, sr={sample_rate})")
    frame_size = n_channels * (bits // 8)
    if block_align not in (0, frame_size):
        raise CorruptedFile(
            f"{path}: block align {block_align} disagrees with {frame_size}-byte frames"
        )
    if len(data) % frame_size != 0:
        raise CorruptedFile(f"{path}: data size {len(data)} is not a whole number of frames")
    return sample_rate, n_channels, bits, format_tag, data, is_float


def probe_wav(path) -> None:
    """Validate a WAV container without materializing samples.

    Raises exactly when load_wav would raise.
    """
    _parse_wav(path)


def _decode_pcm(data: bytes, bits: int, n_channels: int, is_float: bool) -> np.ndarray:
    """Decode interleaved PCM bytes to a (frames, channels) float64 array."""
    if is_float:
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
        x = np.clip(x, -1.0, 1.0)
    elif bits == 8:
        x = (np.frombuffer(data, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif bits == 24:
        b = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3)
        x = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        x = np.where(x >= 1 << 23, x - (1 << 24), x).astype(np.float64) / float(1 << 23)
    else:  # 32-bit int
        x = np.frombuffer(data, dtype="<i4").astype(np.float64) / float(1 << 31)
    return x.reshape(-1, n_channels)


def load_wav(path, genre: str | None = None) -> AudioClip:
    """Decode a WAV file to a mono AudioClip.

    Integer PCM is scaled to [-1, 1]; multi-channel audio is mixed down by
    arithmetic channel mean. Pure function of the file bytes.
    """
    sample_rate, n_channels, bits, _, data, is_float = _parse_wav(path)
    frames = _decode_pcm(data, bits, n_channels, is_float)
    mono = frames.mean(axis=1) if n_channels > 1 else frames[:, 0]
    return AudioClip(
        samples=mono, sample_rate=sample_rate, source_path=str(path), genre=genre
    )


def resample_linear(clip: AudioClip, target_sr: int) -> AudioClip:
    """Resample by linear interpolation between neighboring samples.

    The identity rate returns the input unchanged. Output length is
    round(n * target/source), which preserves duration to within one sample.
    """
    if target_sr <= 0:
        raise InvalidParams(f"target_sr must be positive, got {target_sr}")
    if target_sr == clip.sample_rate:
        return clip
    n_in = clip.samples.size
    n_out = max(1, int(round(n_in * target_sr / clip.sample_rate)))
    positions = np.arange(n_out, dtype=np.float64) * (clip.sample_rate / target_sr)
    resampled = np.interp(positions, np.arange(n_in, dtype=np.float64), clip.samples)
    return AudioClip(
        samples=resampled,
        sample_rate=target_sr,
        source_path=clip.source_path,
        genre=clip.genre,
    )


def scan_gtzan(root) -> DatasetIndex:
    """Index every decodable .wav under <root>/<genre>/ for the ten genres.

    Files that fail to parse are excluded and reported in DatasetIndex.excluded.
    The entry list is sorted by path, independent of filesystem enumeration
    order. Raises EmptyDataset when nothing decodable is found.
    """
    root = Path(root)
    if not root.is_dir():
        raise IoError(f"dataset root {root} is not a directory")
    entries = []
    excluded = []
    for genre in GENRES:
        genre_dir = root / genre
        if not genre_dir.is_dir():
            continue
        for wav_path in sorted(genre_dir.glob("*.wav")):
            try:
                probe_wav(wav_path)
            except (CorruptedFile, IoError) as exc:
                excluded.append((str(wav_path), str(exc)))
                continue
            track_id = f"{genre}/{wav_path.stem}"
            entries.append((str(wav_path), genre, track_id))
    if not entries:
        raise EmptyDataset(f"no decodable .wav files under {root}")
    entries.sort(key=lambda e: e[0])
    track_ids = [e[2] for e in entries]
    if len(set(track_ids)) != len(track_ids):
        raise CorruptedFile("duplicate track ids in dataset scan")
    return DatasetIndex(
        entries=tuple(entries),
        genres=frozenset(e[1] for e in entries),
        excluded=tuple(sorted(excluded)),
    )
