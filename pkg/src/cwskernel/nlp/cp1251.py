"""UTF-8 text to WIN-1251 bytes through an embedded 256-entry code chart."""

from __future__ import annotations

from ..errors import Unmappable

# 0x80-0xBF of the chart. 0x98 is unassigned in the vendor table; it is
# mapped to U+0098 (as the WHATWG index does) so every byte has a code point.
_HIGH_HALF_UPPER = [
    0x0402, 0x0403, 0x201A, 0x0453, 0x201E, 0x2026, 0x2020, 0x2021,
    0x20AC, 0x2030, 0x0409, 0x2039, 0x040A, 0x040C, 0x040B, 0x040F,
    0x0452, 0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
    0x0098, 0x2122, 0x0459, 0x203A, 0x045A, 0x045C, 0x045B, 0x045F,
    0x00A0, 0x040E, 0x045E, 0x0408, 0x00A4, 0x0490, 0x00A6, 0x00A7,
    0x0401, 0x00A9, 0x0404, 0x00AB, 0x00AC, 0x00AD, 0x00AE, 0x0407,
    0x00B0, 0x00B1, 0x0406, 0x0456, 0x0491, 0x00B5, 0x00B6, 0x00B7,
    0x0451, 0x2116, 0x0454, 0x00BB, 0x0458, 0x0405, 0x0455, 0x0457,
]

# byte -> code point. ASCII is the identity, 0xC0-0xFF is А..я (U+0410-U+044F).
DECODING_TABLE: tuple[int, ...] = tuple(range(0x80)) + tuple(_HIGH_HALF_UPPER) + tuple(range(0x0410, 0x0450))
ENCODING_TABLE: dict[int, int] = {cp: byte for byte, cp in enumerate(DECODING_TABLE)}

assert len(DECODING_TABLE) == 256 and len(ENCODING_TABLE) == 256

REPLACEMENT = 0x3F


def to_win1251(text: str, strict: bool = True) -> bytes:
    out = bytearray()
    for offset, ch in enumerate(text):
        byte = ENCODING_TABLE.get(ord(ch))
        if byte is None:
            if strict:
                raise Unmappable(ord(ch), offset)
            byte = REPLACEMENT
        out.append(byte)
    return bytes(out)


def from_win1251(data: bytes) -> str:
    return "".join(chr(DECODING_TABLE[b]) for b in data)
