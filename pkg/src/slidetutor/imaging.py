"""Minimal PNG helpers: enough to emit test renders and read dimensions.

Real deployments rasterize slides with an external tool; this module only
needs to produce deterministic placeholder images and to read the header of
whatever the renderer wrote.
"""

from __future__ import annotations

import struct
import zlib

from .errors import RendererFailed

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def encode_png(width: int, height: int, rgb: tuple[int, int, int]) -> bytes:
    """Encode a solid-color RGB PNG. Deterministic for fixed inputs."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    row = b"\x00" + bytes(rgb) * width  # filter byte 0 per scanline
    raw = row * height
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    idat = zlib.compress(raw, 6)
    return PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def png_dimensions(data: bytes) -> tuple[int, int]:
    """Read (width, height) from a PNG header."""
    if len(data) < 24 or not data.startswith(PNG_SIGNATURE) or data[12:16] != b"IHDR":
        raise RendererFailed("renderer output is not a PNG file")
    width, height = struct.unpack(">II", data[16:24])
    if width <= 0 or height <= 0:
        raise RendererFailed("renderer produced an empty image")
    return width, height
