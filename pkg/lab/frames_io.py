"""
Frame and mask files: 8-bit binary PGM through OpenCV, and a flat float32
frame stack with a 16-byte header (b"STMF", then uint32 T, H, W little-endian).
"""
import logging
from pathlib import Path
from typing import Union

import cv2
import numpy as np

logger = logging.getLogger(__name__)

FRAME_MAGIC = b"STMF"
HEADER_DTYPE = np.dtype("<u4")
DATA_DTYPE = np.dtype("<f4")

PathLike = Union[str, Path]


def write_pgm(path: PathLike, image: np.ndarray) -> Path:
    """Write a 2-D image as P5; floats in [0, 1] and booleans are scaled to 0..255."""
    path = Path(path)
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM images are 2-D, got shape {image.shape}")
    if image.dtype == bool:
        pixels = image.astype(np.uint8) * 255
    elif np.issubdtype(image.dtype, np.floating):
        pixels = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    else:
        pixels = image.astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), pixels, [cv2.IMWRITE_PXM_BINARY, 1]):
        raise OSError(f"could not write {path}")
    return path


def read_pgm(path: PathLike) -> np.ndarray:
    """Grayscale image as floats in [0, 1]."""
    pixels = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if pixels is None:
        raise FileNotFoundError(f"could not read image {path}")
    return pixels.astype(float) / 255.0


def write_frame_file(path: PathLike, frames: np.ndarray) -> Path:
    path = Path(path)
    frames = np.asarray(frames)
    if frames.ndim != 3:
        raise ValueError(f"frame stacks are (T, H, W), got shape {frames.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    header = FRAME_MAGIC + np.array(frames.shape, dtype=HEADER_DTYPE).tobytes()
    path.write_bytes(header + frames.astype(DATA_DTYPE).tobytes())
    logger.debug(f"wrote {frames.shape[0]} frames to {path}")
    return path


def read_frame_file(path: PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != FRAME_MAGIC:
        raise ValueError(f"{path} is not a frame file (bad magic)")
    t, h, w = (int(n) for n in np.frombuffer(raw, dtype=HEADER_DTYPE, count=3, offset=4))
    expected = 16 + t * h * w * DATA_DTYPE.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path} holds {len(raw)} bytes, header promises {expected}")
    return np.frombuffer(raw, dtype=DATA_DTYPE, offset=16).reshape(t, h, w).astype(float)
