"""Identifier keys and the orders used to compare them.

Bit strings are plain ``str`` values over ``"0"``/``"1"``; the empty string
is the empty word.  A key is the self-delimiting encoding

    K(x) = 1^(k+1) 0^(2^k - |x|) 1 x,   k = ceil(log2 |x|) + 1,  K("") = "101"

which is prefix-free and maps shortlex order on identifiers onto the
partial lexicographic (PL) order on keys.
"""

from __future__ import annotations

import enum
from typing import Iterable

from keyflood.errors import InvariantViolation, KeyFormatError

MAX_ID_LENGTH = 1 << 16

EMPTY = ""


class Order(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    EQUAL = "equal"
    LEFT_IS_PREFIX = "left_is_prefix"
    RIGHT_IS_PREFIX = "right_is_prefix"


class KeyStatus(enum.Enum):
    COMPLETE = "complete"
    PREFIX = "proper_prefix"
    INVALID = "not_a_key_prefix"


def is_bitstring(s) -> bool:
    return isinstance(s, str) and s.strip("01") == ""


def _ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


def key_order(id_length: int) -> int:
    """Header parameter k of the key for an identifier of this length."""
    if id_length == 0:
        return 0
    return _ceil_log2(id_length) + 1


def key_length(id_length: int) -> int:
    k = key_order(id_length)
    return (1 << k) + k + 2


def encode_key(identifier: str) -> str:
    if not is_bitstring(identifier):
        raise KeyFormatError(f"identifier is not a bit string: {identifier!r}")
    if len(identifier) > MAX_ID_LENGTH:
        raise KeyFormatError(f"identifier longer than {MAX_ID_LENGTH} bits")
    k = key_order(len(identifier))
    return "1" * (k + 1) + "0" * ((1 << k) - len(identifier)) + "1" + identifier


def _header_k(s: str) -> int | None:
    """k read off the leading run of ones, or None if the run is unterminated."""
    run = len(s) - len(s.lstrip("1"))
    if run == len(s):
        return None
    return run - 1


def decode_key(key: str) -> str:
    if not is_bitstring(key):
        raise KeyFormatError(f"not a bit string: {key!r}")
    k = _header_k(key)
    if k is None or k < 0:
        raise KeyFormatError(f"missing key header in {key!r}")
    total = (1 << k) + k + 2
    if len(key) != total:
        raise KeyFormatError(
            f"key {key!r} has length {len(key)}, header k={k} requires {total}")
    body = key[k + 1:]
    stop = body.find("1")
    if stop < 1:
        raise KeyFormatError(f"no padding/terminator after header in {key!r}")
    identifier = body[stop + 1:]
    if encode_key(identifier) != key:
        raise KeyFormatError(f"padding length does not match k in {key!r}")
    return identifier


def _zero_run_bounds(k: int) -> tuple[int, int]:
    """Admissible number of padding zeros for header parameter k."""
    if k <= 1:
        return 1, 1
    # |x| ranges over (2^(k-2), 2^(k-1)]
    return (1 << k) - (1 << (k - 1)), (1 << k) - (1 << (k - 2)) - 1


def is_complete_key(s: str) -> KeyStatus:
    """Classify ``s`` as a complete key, a proper key prefix, or neither."""
    k = _header_k(s)
    if k is None:
        return KeyStatus.PREFIX
    if k < 0:
        return KeyStatus.INVALID
    lo, hi = _zero_run_bounds(k)
    body = s[k + 1:]
    stop = body.find("1")
    if stop == -1:
        return KeyStatus.PREFIX if len(body) <= hi else KeyStatus.INVALID
    if not lo <= stop <= hi:
        return KeyStatus.INVALID
    total = (1 << k) + k + 2
    if len(s) < total:
        return KeyStatus.PREFIX
    if len(s) == total:
        return KeyStatus.COMPLETE
    return KeyStatus.INVALID


def is_key(s: str) -> bool:
    return is_complete_key(s) is KeyStatus.COMPLETE


def lcp_length(a: str, b: str) -> int:
    if a.startswith(b):
        return len(b)
    if b.startswith(a):
        return len(a)
    # binary search over slice equality keeps the comparison in C
    lo, hi = 0, min(len(a), len(b))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if a[:mid] == b[:mid]:
            lo = mid
        else:
            hi = mid - 1
    return lo


def lcp(a: str, b: str) -> str:
    return a[:lcp_length(a, b)]


def pl_less(a: str, b: str) -> bool:
    """True iff a branches to 0 where b branches to 1."""
    # for strings that are not prefix-related, str order agrees with PL order
    return a < b and not b.startswith(a)


def pl_compare(a: str, b: str) -> Order:
    if a == b:
        return Order.EQUAL
    if b.startswith(a):
        return Order.LEFT_IS_PREFIX
    if a.startswith(b):
        return Order.RIGHT_IS_PREFIX
    return Order.LESS if a < b else Order.GREATER


def shortlex_compare(a: str, b: str) -> Order:
    if len(a) != len(b):
        return Order.LESS if len(a) < len(b) else Order.GREATER
    if a == b:
        return Order.EQUAL
    return Order.LESS if a < b else Order.GREATER


def shortlex_min(strings: Iterable[str]) -> str:
    return min(strings, key=lambda s: (len(s), s))


def longest_pl_minimum(strings: Iterable[str]) -> str:
    """Longest element among the PL-minimal elements of a non-empty collection.

    The minimal elements of any set of strings are pairwise prefix-related,
    so a single left fold finds the answer; the second pass confirms that
    every element is either PL-greater than the result or a prefix of it.
    """
    items = list(strings)
    if not items:
        raise ValueError("longest_pl_minimum of an empty collection")
    best = items[0]
    for s in items[1:]:
        if (s < best and not best.startswith(s)) or (
                len(s) > len(best) and s.startswith(best)):
            best = s
    for s in items:
        if not (best.startswith(s) or pl_less(best, s)):
            raise InvariantViolation(
                f"PL-minimal elements are not a prefix chain: {s!r} vs {best!r}")
    return best


def bin_encode(n: int) -> str:
    if n < 0:
        raise ValueError(f"bin_encode of negative integer {n}")
    return format(n, "b")


def bin_decode(s: str) -> int:
    if not s or not is_bitstring(s):
        raise KeyFormatError(f"not a binary integer: {s!r}")
    if len(s) > 1 and s[0] == "0":
        raise KeyFormatError(f"leading zero in binary integer {s!r}")
    return int(s, 2)
