"""
Binary cache for PrimeTable.

Layout, little-endian:
    magic  b"DPS1"          4 bytes
    X, lambda_cut            f8 each
    count                    u8
    primes                   count x u8
    logp                     count x f8
    p^c                      count x (hi, lo) f8
    p^d                      count x (hi, lo) f8

The exponents are not stored; they are part of the file name and are
checked on load by recomputing the powers of the first and last prime.
"""
import logging
import os
import struct
from typing import Optional

import numpy as np

from errors import DomainViolationError
from primes import PrimeTable, sieve, split_powers

logger = logging.getLogger(__name__)

MAGIC = b"DPS1"
_HEADER = struct.Struct("<4sddQ")
CACHE_ENV = "FIVEPRIME_CACHE_DIR"


def _interleave(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    out = np.empty(2 * hi.size, dtype="<f8")
    out[0::2] = hi
    out[1::2] = lo
    return out


def write_table(table: PrimeTable, path: str) -> None:
    n = len(table)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, table.X, table.lambda_cut, n))
        f.write(np.ascontiguousarray(table.primes, dtype="<u8").tobytes())
        f.write(np.ascontiguousarray(table.logp, dtype="<f8").tobytes())
        f.write(_interleave(table.pc_hi, table.pc_lo).tobytes())
        f.write(_interleave(table.pd_hi, table.pd_lo).tobytes())


def read_table(path: str, c: float, d: float) -> PrimeTable:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise DomainViolationError(f"{path}: truncated header")
    magic, X, lambda_cut, n = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DomainViolationError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * n * 6
    if len(blob) != expected:
        raise DomainViolationError(f"{path}: {len(blob)} bytes, expected {expected}")

    offset = _HEADER.size
    primes = np.frombuffer(blob, dtype="<u8", count=n, offset=offset).astype(np.int64)
    offset += 8 * n
    logp = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).astype(np.float64)
    offset += 8 * n
    pc = np.frombuffer(blob, dtype="<f8", count=2 * n, offset=offset)
    offset += 16 * n
    pd = np.frombuffer(blob, dtype="<f8", count=2 * n, offset=offset)

    table = PrimeTable(
        X=X,
        lambda_cut=lambda_cut,
        c=float(c),
        d=float(d),
        primes=primes,
        logp=logp,
        pc_hi=pc[0::2].astype(np.float64),
        pc_lo=pc[1::2].astype(np.float64),
        pd_hi=pd[0::2].astype(np.float64),
        pd_lo=pd[1::2].astype(np.float64),
    )
    _check_exponents(table, path)
    for array in (table.primes, table.logp, table.pc_hi, table.pc_lo, table.pd_hi, table.pd_lo):
        array.setflags(write=False)
    return table


def _check_exponents(table: PrimeTable, path: str) -> None:
    if len(table) == 0:
        return
    ends = [0, len(table) - 1]
    values = table.primes[ends].tolist()
    for exponent, hi, lo in ((table.c, table.pc_hi, table.pc_lo), (table.d, table.pd_hi, table.pd_lo)):
        want_hi, want_lo = split_powers(values, exponent)
        if not (np.array_equal(want_hi, hi[ends]) and np.array_equal(want_lo, lo[ends])):
            raise DomainViolationError(f"{path}: powers do not match exponent {exponent!r}")


class TableStore:
    """Prime tables cached by (X, lambda_cut, c, d) under one directory."""

    def __init__(self, cache_dir: Optional[str] = None):
        self.cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)

    @property
    def enabled(self) -> bool:
        return bool(self.cache_dir)

    def path_for(self, X: float, lambda_cut: float, c: float, d: float) -> str:
        name = f"primes_X{float(X)!r}_lam{float(lambda_cut)!r}_c{float(c)!r}_d{float(d)!r}.dps1"
        return os.path.join(self.cache_dir or ".", name)

    def store(self, table: PrimeTable) -> str:
        path = self.path_for(table.X, table.lambda_cut, table.c, table.d)
        try:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            tmp = path + ".tmp"
            write_table(table, tmp)
            os.replace(tmp, path)
            logger.info(f"Stored prime table with {len(table)} primes at {path}")
            return path
        except OSError as e:
            logger.error(f"Failed to store prime table at {path}: {e}")
            raise

    def load(self, X: float, lambda_cut: float, c: float, d: float) -> Optional[PrimeTable]:
        path = self.path_for(X, lambda_cut, c, d)
        if not os.path.exists(path):
            return None
        try:
            table = read_table(path, c, d)
            logger.info(f"Loaded prime table with {len(table)} primes from {path}")
            return table
        except DomainViolationError as e:
            logger.warning(f"Ignoring unusable cache file: {e}")
            return None

    def load_or_sieve(self, X: float, lambda_cut: float, c: float, d: float, threads: int = 1) -> PrimeTable:
        if not self.enabled:
            return sieve(X, lambda_cut, c, d, threads=threads)
        table = self.load(X, lambda_cut, c, d)
        if table is None:
            table = sieve(X, lambda_cut, c, d, threads=threads)
            self.store(table)
        return table
