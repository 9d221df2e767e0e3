"""Pure-Python fallback for the concatenated-JSON boundary scanner.

Mirrors rbskit._scanner exactly; the compiled module is preferred when built.
The regex jumps between structurally interesting bytes so the Python-level
loop only touches quotes, braces, brackets and backslashes instead of every
byte.
"""

from __future__ import annotations

import re

_INTERESTING = re.compile(rb'[\\"{}\[\]]')

_QUOTE = 0x22
_BACKSLASH = 0x5C
_LBRACKET = 0x5B
_RBRACKET = 0x5D
_LBRACE = 0x7B
_RBRACE = 0x7D


def scan_json_boundaries(data: bytes) -> list[tuple[int, int]]:
    """Spans (start, end) of top-level balanced {...} / [...] groups.

    String literals are honoured (braces inside strings do not count) and
    backslash escapes consume the following byte. Bytes outside any group are
    ignored; an unterminated trailing group is not emitted. Works on UTF-8
    bytes: multi-byte sequences never collide with the ASCII structural set.
    """
    if not data:
        return []
    out: list[tuple[int, int]] = []
    depth = 0
    in_string = False
    start = -1
    skip_until = -1
    for match in _INTERESTING.finditer(data):
        i = match.start()
        if i < skip_until:
            continue
        b = data[i]
        if in_string:
            if b == _BACKSLASH:
                skip_until = i + 2
            elif b == _QUOTE:
                in_string = False
        elif depth == 0:
            if b == _LBRACE or b == _LBRACKET:
                start = i
                depth = 1
        else:
            if b == _QUOTE:
                in_string = True
            elif b == _LBRACE or b == _LBRACKET:
                depth += 1
            elif b == _RBRACE or b == _RBRACKET:
                depth -= 1
                if depth == 0:
                    out.append((start, i + 1))
                    start = -1
    return out
