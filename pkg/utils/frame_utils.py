"""
Utility functions for reading, resampling and persisting luma frames
"""
import logging
import os
import struct
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import ceil, floor
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, List, Tuple, Union

import numpy as np
from scipy import sparse

from config.config import SUPERBLOCK_SIZE
from models.neighborhood import DepthMap
from utils.errors import (
    FrameFormatError,
    InvalidArgumentError,
    TruncatedFrameError,
    UnsupportedFormatError,
)

logger = logging.getLogger(__name__)

Y4M_SIGNATURE = b"YUV4MPEG2"
FRAME_MARKER = b"FRAME"
LUMA_DUMP_MAGIC = b"QLDM"
DEPTHMAP_MAGIC = b"QLDP"
MAX_HEADER_BYTES = 4096

# Chroma tags accepted by the reader, mapped to the subsampling we handle
SUPPORTED_CHROMA = {
    "420": "420",
    "420jpeg": "420",
    "420mpeg2": "420",
    "420paldv": "420",
    "mono": "mono",
}

Dims = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class FrameBuffer:
    """Single 8-bit luma plane, stored row-major as a (height, width) array"""

    width: int
    height: int
    samples: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError(f"Invalid frame size {self.width}x{self.height}")
        samples = np.array(self.samples, dtype=np.uint8, copy=True)
        if samples.size != self.width * self.height:
            raise InvalidArgumentError(
                f"Expected {self.width * self.height} samples, got {samples.size}"
            )
        samples = samples.reshape(self.height, self.width)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def dims(self) -> Dims:
        return self.width, self.height

    @cached_property
    def integrals(self) -> Tuple[np.ndarray, np.ndarray]:
        """Summed-area tables of samples and squared samples, zero-padded on top/left"""
        values = self.samples.astype(np.int64)
        s1 = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
        s2 = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
        s1[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
        s2[1:, 1:] = (values * values).cumsum(axis=0).cumsum(axis=1)
        return s1, s2


@dataclass(frozen=True)
class SequenceHeader:
    width: int
    height: int
    frame_count: int
    frame_rate: float = 0.0
    chroma: str = "420"

    @property
    def frame_bytes(self) -> int:
        """Payload size of one frame including chroma planes"""
        luma = self.width * self.height
        if self.chroma == "mono":
            return luma
        return luma + 2 * ((self.width + 1) // 2) * ((self.height + 1) // 2)


@dataclass(frozen=True)
class LadderFrames:
    """One source frame prepared for both rungs of the ladder"""

    hi: FrameBuffer
    lo: FrameBuffer
    hi_dims: Dims
    lo_dims: Dims


def _read_line(handle: BinaryIO, offset: int) -> bytes:
    """Read a newline-terminated header line starting at offset"""
    handle.seek(offset)
    line = handle.readline(MAX_HEADER_BYTES)
    if not line:
        raise FrameFormatError("Unexpected end of file", offset=offset)
    if not line.endswith(b"\n"):
        raise FrameFormatError("Header line is not newline-terminated", offset=offset)
    return line


def _parse_frame_rate(token: str, offset: int) -> float:
    try:
        num, den = token.split(":")
        return int(num) / int(den) if int(den) else 0.0
    except ValueError:
        raise FrameFormatError(f"Malformed frame rate tag 'F{token}'", offset=offset)


def parse_y4m_header(line: bytes) -> Tuple[int, int, float, str]:
    """
    Parse the stream header line of a Y4M file

    Args:
        line: First line of the file, including the trailing newline

    Returns:
        Tuple of (width, height, frame_rate, chroma)
    """
    if not line.startswith(Y4M_SIGNATURE):
        raise FrameFormatError("Missing YUV4MPEG2 signature", offset=0)

    width = height = None
    frame_rate = 0.0
    chroma = "420"
    position = len(Y4M_SIGNATURE)
    for token in line[len(Y4M_SIGNATURE):].decode("ascii", errors="replace").split():
        position = line.find(token.encode("ascii", errors="replace"), position)
        tag, value = token[0], token[1:]
        try:
            if tag == "W":
                width = int(value)
            elif tag == "H":
                height = int(value)
        except ValueError:
            raise FrameFormatError(f"Malformed size tag '{token}'", offset=position)
        if tag == "F":
            frame_rate = _parse_frame_rate(value, position)
        elif tag == "C":
            if value not in SUPPORTED_CHROMA:
                raise UnsupportedFormatError(
                    f"Unsupported chroma format 'C{value}'; only 8-bit 4:2:0 and 4:0:0 are handled"
                )
            chroma = SUPPORTED_CHROMA[value]

    if not width or not height or width <= 0 or height <= 0:
        raise FrameFormatError("Header is missing a valid W or H tag", offset=0)
    return width, height, frame_rate, chroma


def _scan_frames(handle: BinaryIO, start: int, frame_bytes: int, file_size: int) -> List[int]:
    """Return the payload offset of every FRAME marker in the stream"""
    offsets = []
    position = start
    while position < file_size:
        line = _read_line(handle, position)
        if not line.startswith(FRAME_MARKER):
            raise FrameFormatError("Expected FRAME marker", offset=position)
        payload = position + len(line)
        offsets.append(payload)
        position = payload + frame_bytes
    return offsets


def read_y4m(path: str) -> Tuple[SequenceHeader, Iterator[FrameBuffer]]:
    """
    Read a Y4M sequence and stream its luma planes

    Args:
        path: Path to a YUV4MPEG2 file (8-bit 4:2:0 or 4:0:0)

    Returns:
        Tuple of (header, iterator of luma FrameBuffers in display order)
    """
    file_size = os.path.getsize(path)
    with open(path, "rb") as handle:
        if file_size == 0:
            raise FrameFormatError("Empty file", offset=0)
        header_line = _read_line(handle, 0)
        width, height, frame_rate, chroma = parse_y4m_header(header_line)
        first_frame = SequenceHeader(width, height, 1, frame_rate, chroma)
        offsets = _scan_frames(handle, len(header_line), first_frame.frame_bytes, file_size)

    if not offsets:
        raise FrameFormatError("Sequence contains no frames", offset=len(header_line))

    header = SequenceHeader(width, height, len(offsets), frame_rate, chroma)
    logger.debug("Opened %s: %dx%d, %d frames, chroma %s", path, width, height, len(offsets), chroma)
    return header, _iter_luma(path, header, offsets)


def _iter_luma(path: str, header: SequenceHeader, offsets: List[int]) -> Iterator[FrameBuffer]:
    luma_bytes = header.width * header.height
    with open(path, "rb") as handle:
        for index, offset in enumerate(offsets):
            handle.seek(offset)
            payload = handle.read(header.frame_bytes)
            if len(payload) < header.frame_bytes:
                raise TruncatedFrameError(index, header.frame_bytes, len(payload))
            luma = np.frombuffer(payload[:luma_bytes], dtype=np.uint8)
            yield FrameBuffer(header.width, header.height, luma)


def write_y4m(path: str, frames: Iterable[FrameBuffer], frame_rate: str = "30:1", chroma: str = "mono") -> int:
    """
    Write luma frames to a Y4M file

    Args:
        path: Output file path
        frames: Frames of identical size
        frame_rate: Y4M frame rate tag value
        chroma: 'mono' (4:0:0) or '420' (neutral chroma planes)

    Returns:
        Number of frames written
    """
    if chroma not in ("mono", "420"):
        raise UnsupportedFormatError(f"Cannot write chroma format '{chroma}'")

    count = 0
    with open(path, "wb") as handle:
        for frame in frames:
            if count == 0:
                width, height = frame.dims
                handle.write(f"YUV4MPEG2 W{width} H{height} F{frame_rate} Ip A1:1 C{chroma}\n".encode("ascii"))
                chroma_bytes = 0 if chroma == "mono" else 2 * ((width + 1) // 2) * ((height + 1) // 2)
            elif frame.dims != (width, height):
                raise InvalidArgumentError("All frames in a sequence must share one size")
            handle.write(FRAME_MARKER + b"\n")
            handle.write(frame.samples.tobytes())
            handle.write(bytes([128]) * chroma_bytes)
            count += 1
    return count


def _area_weights(source: int, target: int) -> sparse.csr_matrix:
    """Row i holds the fractional coverage of each source pixel by target pixel i"""
    scale = Fraction(source, target)
    rows, cols, values = [], [], []
    for i in range(target):
        start, end = i * scale, (i + 1) * scale
        for j in range(floor(start), ceil(end)):
            overlap = min(end, j + 1) - max(start, j)
            if overlap > 0:
                rows.append(i)
                cols.append(j)
                values.append(float(overlap / scale))
    return sparse.csr_matrix((values, (rows, cols)), shape=(target, source))


def downscale(frame: FrameBuffer, target_w: int, target_h: int) -> FrameBuffer:
    """
    Area-average (box filter) downscale of a luma frame

    Args:
        frame: Source frame
        target_w: Output width, 0 < target_w <= frame.width
        target_h: Output height, 0 < target_h <= frame.height

    Returns:
        Downscaled frame, samples rounded half-up
    """
    if not (0 < target_w <= frame.width and 0 < target_h <= frame.height):
        raise InvalidArgumentError(
            f"Cannot resample {frame.width}x{frame.height} to {target_w}x{target_h}: only downscaling is supported"
        )
    if (target_w, target_h) == frame.dims:
        return frame

    rows = _area_weights(frame.height, target_h)
    cols = _area_weights(frame.width, target_w)
    values = rows @ frame.samples.astype(np.float64)
    values = (cols @ values.T).T
    # Half-up rounding; the epsilon absorbs float error on exact .5 values
    rounded = np.floor(values + 0.5 + 1e-9)
    return FrameBuffer(target_w, target_h, np.clip(rounded, 0, 255).astype(np.uint8))


def pad_to_superblocks(frame: FrameBuffer, block: int = SUPERBLOCK_SIZE) -> FrameBuffer:
    """Round both dimensions up to a multiple of block by edge replication"""
    pad_w = -frame.width % block
    pad_h = -frame.height % block
    if pad_w == 0 and pad_h == 0:
        return frame
    padded = np.pad(frame.samples, ((0, pad_h), (0, pad_w)), mode="edge")
    return FrameBuffer(frame.width + pad_w, frame.height + pad_h, padded)


def prepare_ladder_frames(frame: FrameBuffer, hi_dims: Dims, lo_dims: Dims) -> LadderFrames:
    """Resample a source frame to both rungs and pad each to the superblock grid"""
    hi = downscale(frame, *hi_dims)
    lo = downscale(frame, *lo_dims)
    return LadderFrames(pad_to_superblocks(hi), pad_to_superblocks(lo), tuple(hi_dims), tuple(lo_dims))


def write_luma_dump(path: str, frames: Iterable[FrameBuffer]) -> int:
    """Write frames in the QLDM raw luma format; returns the frame count"""
    count = 0
    with open(path, "wb") as handle:
        for frame in frames:
            if count == 0:
                dims = frame.dims
                handle.write(struct.pack("<4sII", LUMA_DUMP_MAGIC, *dims))
            elif frame.dims != dims:
                raise InvalidArgumentError("All frames in a dump must share one size")
            handle.write(frame.samples.tobytes())
            count += 1
    return count


def read_luma_dump(path: str) -> List[FrameBuffer]:
    """Read every frame of a QLDM raw luma dump"""
    with open(path, "rb") as handle:
        data = handle.read()
    header_size = struct.calcsize("<4sII")
    if len(data) < header_size:
        raise FrameFormatError("Luma dump header is incomplete", offset=0)
    magic, width, height = struct.unpack_from("<4sII", data)
    if magic != LUMA_DUMP_MAGIC:
        raise FrameFormatError("Bad luma dump magic", offset=0)

    frame_bytes = width * height
    frames = []
    position = header_size
    while position < len(data):
        payload = data[position:position + frame_bytes]
        if len(payload) < frame_bytes:
            raise TruncatedFrameError(len(frames), frame_bytes, len(payload))
        frames.append(FrameBuffer(width, height, np.frombuffer(payload, dtype=np.uint8)))
        position += frame_bytes
    return frames


def write_depthmap(target: Union[str, BinaryIO], depth_map: DepthMap, frame_index: int) -> None:
    """
    Write one depth map record in the QLDP format

    Args:
        target: File path (overwritten) or an open binary stream (appended)
        depth_map: Depth map to persist
        frame_index: Index of the frame the map belongs to
    """
    record = struct.pack("<4sIII", DEPTHMAP_MAGIC, depth_map.width, depth_map.height, frame_index)
    record += depth_map.depths.astype(np.uint8).tobytes()
    if isinstance(target, (str, os.PathLike)):
        with open(target, "wb") as handle:
            handle.write(record)
    else:
        target.write(record)


def read_depthmaps(path: str) -> List[Tuple[int, DepthMap]]:
    """Read a single or concatenated QLDP stream as (frame_index, DepthMap) pairs"""
    with open(path, "rb") as handle:
        data = handle.read()

    header_size = struct.calcsize("<4sIII")
    records = []
    position = 0
    while position < len(data):
        if len(data) - position < header_size:
            raise FrameFormatError("Depth map header is incomplete", offset=position)
        magic, width, height, frame_index = struct.unpack_from("<4sIII", data, position)
        if magic != DEPTHMAP_MAGIC:
            raise FrameFormatError("Bad depth map magic", offset=position)
        position += header_size
        payload = data[position:position + width * height]
        if len(payload) < width * height:
            raise TruncatedFrameError(frame_index, width * height, len(payload))
        depths = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
        records.append((frame_index, DepthMap(width, height, depths)))
        position += width * height
    return records


def save_uploaded_file(uploaded_file) -> str:
    """Save an uploaded sequence to a temporary location and return the path"""
    suffix = Path(uploaded_file.name).suffix or ".y4m"
    with tempfile.NamedTemporaryFile(delete=False, suffix=suffix) as tmp:
        tmp.write(uploaded_file.getvalue())
        return tmp.name
