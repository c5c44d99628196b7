"""Binary PGM (P5) reader/writer for 8-bit images and 16-bit depth maps."""
from __future__ import annotations

import numpy as np


class PGMError(ValueError):
    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code  # BAD_MAGIC | BAD_HEADER | TRUNCATED


_WS = b" \t\n\r\v\f"


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last one.
    """
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i] in _WS:
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in b"\r\n":
                i += 1
            continue
        if i >= n:
            raise PGMError("TRUNCATED", "header ends early")
        j = i
        while j < n and data[j] not in _WS and data[j] != ord("#"):
            j += 1
        tokens.append(data[i:j])
        i = j
    if i >= n:
        raise PGMError("TRUNCATED", "no whitespace after maxval")
    if data[i] not in _WS:
        raise PGMError("BAD_HEADER", "maxval must be followed by one whitespace byte")
    return tokens, i


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a P5 image to a (height, width) array: uint8, or uint16 when maxval > 255."""
    if len(data) < 2:
        raise PGMError("TRUNCATED", "empty input")
    if data[:2] != b"P5":
        raise PGMError("BAD_MAGIC", repr(data[:2]))
    tokens, end = _header_tokens(data[2:], 3)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PGMError("BAD_HEADER", f"non-integer field in {tokens}") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise PGMError("BAD_HEADER", f"width={w} height={h} maxval={maxval}")
    start = 2 + end + 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dtype.itemsize
    body = data[start:start + need]
    if len(body) < need:
        raise PGMError("TRUNCATED", f"expected {need} pixel bytes, got {len(body)}")
    img = np.frombuffer(body, dtype).reshape(h, w)
    return img.astype(np.uint16 if maxval > 255 else np.uint8)


def write_pgm(img: np.ndarray, maxval: int | None = None) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expected a non-empty 2D image")
    if maxval is None:
        maxval = 65535 if img.dtype == np.uint16 or img.max(initial=0) > 255 else 255
    if img.min(initial=0) < 0 or img.max(initial=0) > maxval:
        raise ValueError(f"pixel values outside [0, {maxval}]")
    h, w = img.shape
    dtype = ">u2" if maxval > 255 else "u1"
    return f"P5\n{w} {h}\n{maxval}\n".encode() + img.astype(dtype).tobytes()
