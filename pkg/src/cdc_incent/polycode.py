"""Polynomial-coded matrix multiplication C = A^T B over a prime field.

A (s x r) is split column-wise into m blocks and B (s x t) into n blocks.
Head i receives evaluations at x_i of

    A~(x) = sum_j A_j x^j          B~(x) = sum_k B_k x^(k m)

so that A~^T B~ is a degree mn-1 polynomial whose coefficient j + k m is
block (j, k) of C. Any mn distinct evaluations determine it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .model import MERSENNE_31, _is_prime


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class PrimeField:
    p: int = MERSENNE_31

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        if self.p > MERSENNE_31:
            raise ValueError("modulus must be at most 2**31 - 1")

    def reduce(self, a) -> np.ndarray:
        return np.mod(np.asarray(a, dtype=np.int64), self.p)

    def add(self, a, b):
        return (self.reduce(a) + self.reduce(b)) % self.p

    def sub(self, a, b):
        return (self.reduce(a) - self.reduce(b)) % self.p

    def mul(self, a, b):
        return self.reduce(a) * self.reduce(b) % self.p

    def inv(self, a: int) -> int:
        a = int(a) % self.p
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(a, self.p - 2, self.p)

    def matmul(self, A, B) -> np.ndarray:
        return kernels.modmatmul(self.reduce(A), self.reduce(B), self.p)

    def random_matrix(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.integers(0, self.p, size=shape, dtype=np.int64)


@dataclass(frozen=True)
class Share:
    head_id: str
    x: int
    A: np.ndarray  # s x r/m
    B: np.ndarray  # s x t/n


@dataclass(frozen=True)
class CodedResult:
    head_id: str
    x: int
    C: np.ndarray  # r/m x t/n


@dataclass(frozen=True)
class CodedTask:
    A: np.ndarray
    B: np.ndarray
    m: int
    n: int
    eval_points: tuple[int, ...]
    shares: tuple[Share, ...]
    field: PrimeField


def recovery_threshold(m: int, n: int) -> int:
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    return m * n


def _check_points(points: Sequence[int], field: PrimeField) -> list[int]:
    pts = [int(x) % field.p for x in points]
    if len(set(pts)) != len(pts):
        raise ValueError("evaluation points must be distinct")
    return pts


def encode(
    A,
    B,
    m: int,
    n: int,
    eval_points: Sequence[int] | None = None,
    field: PrimeField = PrimeField(),
    head_ids: Sequence[str] | None = None,
    n_heads: int | None = None,
) -> CodedTask:
    A = field.reduce(A)
    B = field.reduce(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[0] != B.shape[0]:
        raise ValueError("A must be s x r and B must be s x t")
    s, r = A.shape
    t = B.shape[1]
    if r % m or t % n:
        raise ValueError(f"m={m} must divide r={r} and n={n} must divide t={t}")
    if eval_points is None:
        count = n_heads if n_heads is not None else (len(head_ids) if head_ids is not None else m * n)
        eval_points = range(1, count + 1)
    pts = _check_points(eval_points, field)
    if head_ids is None:
        head_ids = [str(i + 1) for i in range(len(pts))]
    if len(head_ids) != len(pts):
        raise ValueError("one head id per evaluation point is required")
    p = field.p
    a_blocks = np.split(A, m, axis=1)
    b_blocks = np.split(B, n, axis=1)
    shares = []
    for hid, x in zip(head_ids, pts):
        at = np.zeros_like(a_blocks[0])
        xp = 1
        for blk in a_blocks:
            at = (at + blk * xp) % p
            xp = xp * x % p
        bt = np.zeros_like(b_blocks[0])
        xm = pow(x, m, p)
        xp = 1
        for blk in b_blocks:
            bt = (bt + blk * xp) % p
            xp = xp * xm % p
        shares.append(Share(str(hid), x, at, bt))
    return CodedTask(A, B, m, n, tuple(pts), tuple(shares), field)


def local_compute(share: Share, field: PrimeField = PrimeField()) -> CodedResult:
    return CodedResult(share.head_id, share.x, field.matmul(share.A.T, share.B))


def _lagrange_coefficients(points: Sequence[int], p: int) -> np.ndarray:
    """Inverse Vandermonde: row q gives coefficient q from the values at `points`."""
    k = len(points)
    out = np.zeros((k, k), dtype=np.int64)
    for i, xi in enumerate(points):
        # basis polynomial prod_{j != i} (x - x_j) / (x_i - x_j), built coefficient-wise
        poly = [1]
        denom = 1
        for j, xj in enumerate(points):
            if j == i:
                continue
            nxt = [0] * (len(poly) + 1)
            for d, c in enumerate(poly):
                nxt[d] = (nxt[d] - c * xj) % p
                nxt[d + 1] = (nxt[d + 1] + c) % p
            poly = nxt
            denom = denom * (xi - xj) % p
        scale = pow(denom, p - 2, p)
        for q, c in enumerate(poly):
            out[q, i] = c * scale % p
    return out


def decode(results: Sequence[CodedResult], m: int, n: int, field: PrimeField = PrimeField()) -> np.ndarray:
    """Reconstruct C = A^T B from the first m*n results supplied."""
    need = recovery_threshold(m, n)
    if len(results) < need:
        raise DecodeError(f"insufficient results: {len(results)} < recovery threshold {need}")
    used = list(results[:need])
    pts = [int(r.x) % field.p for r in used]
    if len(set(pts)) != len(pts):
        raise DecodeError("repeated evaluation points make interpolation singular")
    bh, bw = used[0].C.shape
    Y = np.stack([field.reduce(r.C).ravel() for r in used])
    coeffs = field.matmul(_lagrange_coefficients(pts, field.p), Y)
    C = np.empty((m * bh, n * bw), dtype=np.int64)
    for k in range(n):
        for j in range(m):
            C[j * bh:(j + 1) * bh, k * bw:(k + 1) * bw] = coeffs[j + k * m].reshape(bh, bw)
    return C


def plain_product(A, B, field: PrimeField = PrimeField()) -> np.ndarray:
    """Uncoded A^T B in the field (oracle)."""
    return field.matmul(field.reduce(A).T, field.reduce(B))


# ----------------------------------------------------------------- files


def write_matrix_csv(path, *matrices) -> None:
    """Integer matrices, each preceded by a `rows,cols` header row."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        for M in matrices:
            M = np.asarray(M, dtype=np.int64)
            out.writerow(M.shape)
            out.writerows(M.tolist())


def read_matrix_csv(path) -> list[np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    mats = []
    i = 0
    while i < len(rows):
        nr, nc = (int(x) for x in rows[i])
        body = rows[i + 1:i + 1 + nr]
        if len(body) != nr or any(len(r) != nc for r in body):
            raise ValueError(f"{path}: matrix block at row {i + 1} does not match its {nr}x{nc} header")
        mats.append(np.array(body, dtype=np.int64).reshape(nr, nc))
        i += nr + 1
    return mats


def write_shares(directory, task: CodedTask) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for sh in task.shares:
        path = directory / f"share_{sh.head_id}.csv"
        write_matrix_csv(path, sh.A, sh.B)
        paths.append(path)
    return paths


def read_share(path, head_id: str, x: int) -> Share:
    A, B = read_matrix_csv(path)
    return Share(head_id, x, A, B)
