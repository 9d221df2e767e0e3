# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled concatenated-JSON boundary scanner.

Single-pass byte loop with string/escape awareness. Semantics are identical
to rbskit._scanner_py.scan_json_boundaries; keep the two in lockstep.
"""


def scan_json_boundaries(data):
    """Spans (start, end) of top-level balanced {...} / [...] groups."""
    if not data:
        return []
    cdef const unsigned char[:] buf = data
    cdef Py_ssize_t n = buf.shape[0]
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t start = -1
    cdef int depth = 0
    cdef bint in_string = False
    cdef unsigned char b
    out = []
    while i < n:
        b = buf[i]
        if in_string:
            if b == 0x5C:  # backslash: escape consumes the next byte
                i += 2
                continue
            if b == 0x22:  # quote
                in_string = False
        elif depth == 0:
            if b == 0x7B or b == 0x5B:  # { or [
                start = i
                depth = 1
        else:
            if b == 0x22:
                in_string = True
            elif b == 0x7B or b == 0x5B:
                depth += 1
            elif b == 0x7D or b == 0x5D:  # } or ]
                depth -= 1
                if depth == 0:
                    out.append((start, i + 1))
                    start = -1
        i += 1
    return out
