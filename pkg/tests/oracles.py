"""Independent reference computations used to freeze expected values.

Nothing here imports the code under test.
"""

import hashlib


def pseudo_code_lot(outcomes, x, a, k):
    """Line-by-line reading of the verifier loop.

    ``outcomes`` is a list of "match" / "mismatch" / "none".  Returns the list
    of (lot, timer, status) after each processed slot, starting with the
    initial values.  Stops at the first STOP.
    """
    CL = a
    LoTA = x
    TA = 0
    out = [(LoTA, TA, "running")]
    for o in outcomes:
        if o == "match":
            LoTA = LoTA + 1
            TA = 0
        elif o == "mismatch":
            LoTA = LoTA - 1
            TA = TA + 1
        else:
            TA = TA + 1
        if LoTA <= CL:
            out.append((LoTA, TA, "stopped_critical"))
            break
        if TA > k:
            out.append((LoTA, TA, "stopped_timeout"))
            break
        if a > 1 and LoTA == a * x:
            LoTA = x
        out.append((LoTA, TA, "running"))
    return out


def straight_token(payload, nonce, ts=None, password=None, ident=None, vf_codes=None,
                   algo="sha256", digest_bytes=32):
    def H(b):
        return hashlib.new(algo, b).digest()[:digest_bytes]

    opts = b""
    if ts is not None:
        opts += b"\x01" + (8).to_bytes(2, "big") + ts.to_bytes(8, "big")
    if password is not None:
        opts += b"\x02" + len(password).to_bytes(2, "big") + password
    if ident is not None:
        opts += b"\x03" + len(ident).to_bytes(2, "big") + ident
    r = nonce.to_bytes(4, "big")
    vf = b""
    if vf_codes is not None:
        codes = list(vf_codes) + ([0] if len(vf_codes) % 2 else [])
        vf = bytes(codes[i] * 16 + codes[i + 1] for i in range(0, len(codes), 2))
    return H(H(payload) + opts + r + vf) + r


def crc8_bitwise(data, poly=0x07):
    crc = 0
    for byte in data:
        for i in range(7, -1, -1):
            bit = (byte >> i) & 1
            top = (crc >> 7) & 1
            crc = (crc << 1) & 0xFF
            if top ^ bit:
                crc ^= poly
    return crc
