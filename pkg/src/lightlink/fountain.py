"""LT fountain code over equal-size bit blocks.

The outer loss-recovery layer: the message is cut into n blocks, encoded
packets are XORs of randomly chosen blocks (degree drawn from a soliton
distribution), and a peeling decoder releases blocks from whatever packet
subset survives the channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FountainConfigError(ValueError):
    """Invalid degree-distribution or block parameters."""


class FountainCorruptionError(ValueError):
    """Two packets release the same block with different payloads."""


@dataclass(frozen=True)
class SourceBlockSet:
    """Message split into n equal bit blocks (last one zero padded)."""

    blocks: tuple[bytes, ...]
    block_bits: int
    pad_bits: int = 0

    @property
    def n(self) -> int:
        return len(self.blocks)

    @classmethod
    def from_bits(cls, bits, block_bits: int) -> "SourceBlockSet":
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if block_bits < 1:
            raise FountainConfigError("block size must be >= 1 bit")
        if bits.size == 0:
            raise FountainConfigError("empty message")
        n = -(-bits.size // block_bits)
        pad = n * block_bits - bits.size
        padded = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
        blocks = tuple(padded[k * block_bits:(k + 1) * block_bits].tobytes()
                       for k in range(n))
        return cls(blocks, block_bits, pad)

    def message_bits(self) -> np.ndarray:
        bits = np.concatenate([np.frombuffer(b, dtype=np.uint8) for b in self.blocks])
        return bits[:bits.size - self.pad_bits] if self.pad_bits else bits


@dataclass(frozen=True)
class EncodedPacket:
    """XOR of ``degree`` distinct source blocks plus its header."""

    n: int
    indices: tuple[int, ...]
    payload: bytes
    seq: int = 0  # position in the encoder stream; keys out-of-band headers

    @property
    def degree(self) -> int:
        return len(self.indices)

    def __post_init__(self):
        if not 1 <= self.degree <= self.n:
            raise FountainConfigError("degree out of range")
        if len(set(self.indices)) != self.degree:
            raise FountainConfigError("indices must be distinct")


def ideal_soliton(n: int) -> np.ndarray:
    """Textbook ideal soliton mass function over degrees 1..n."""
    if n < 1:
        raise FountainConfigError("n must be >= 1")
    masses = np.zeros(n)
    masses[0] = 1.0 / n
    for d in range(2, n + 1):
        masses[d - 1] = 1.0 / (d * (d - 1))
    return masses


def robust_soliton(n: int, c: float = 0.1, delta: float = 0.5) -> np.ndarray:
    """Robust soliton mass function over degrees 1..n, normalized to sum 1.

    As c -> 0 the spike leaves the support and the extra mass vanishes,
    recovering the ideal soliton.
    """
    if n < 1:
        raise FountainConfigError("n must be >= 1")
    if c <= 0:
        raise FountainConfigError("c must be positive")
    if not 0 < delta < 1:
        raise FountainConfigError("delta must be in (0,1)")
    rho = ideal_soliton(n)
    if n == 1:
        return np.array([1.0])
    R = c * np.log(n / delta) * np.sqrt(n)
    tau = np.zeros(n)
    spike = int(np.floor(n / R)) if R > 0 else n + 1
    for d in range(1, n + 1):
        if d < spike:
            tau[d - 1] = R / (d * n)
        elif d == spike and spike <= n:
            tau[d - 1] = R * np.log(R / delta) / n
    masses = rho + tau
    return masses / masses.sum()


def lt_encode_stream(source: SourceBlockSet, seed: int, count: int,
                     distribution: np.ndarray | None = None,
                     start_seq: int = 0) -> list[EncodedPacket]:
    """Draw ``count`` encoded packets; deterministic for a given seed."""
    if count < 0:
        raise FountainConfigError("count must be >= 0")
    dist = robust_soliton(source.n) if distribution is None else np.asarray(distribution)
    rng = np.random.default_rng(seed)
    block_arrays = [np.frombuffer(b, dtype=np.uint8) for b in source.blocks]
    packets = []
    for k in range(count):
        degree = int(rng.choice(np.arange(1, source.n + 1), p=dist))
        indices = tuple(sorted(int(j) for j in
                               rng.choice(source.n, size=degree, replace=False)))
        payload = block_arrays[indices[0]].copy()
        for j in indices[1:]:
            payload ^= block_arrays[j]
        packets.append(EncodedPacket(source.n, indices, payload.tobytes(),
                                     seq=start_seq + k))
    return packets


@dataclass
class DecoderState:
    """Peeling decoder state: released blocks plus still-buffered packets."""

    n: int
    released: dict[int, bytes] = field(default_factory=dict)
    buffered: list[tuple[set[int], np.ndarray]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return len(self.released) == self.n

    def blocks(self) -> list[bytes]:
        if not self.complete:
            raise ValueError("decode incomplete")
        return [self.released[k] for k in range(self.n)]


def lt_decode(packets: list[EncodedPacket], n: int,
              state: DecoderState | None = None) -> DecoderState:
    """Peel: degree-1 packets release blocks, released blocks reduce the rest.

    Arrival order does not matter; the fixpoint depends only on the packet
    set.  Conflicting releases of one block raise FountainCorruptionError.
    """
    state = state or DecoderState(n)
    candidates = list(state.buffered)
    state.buffered = []
    for p in packets:
        if p.n != n:
            raise FountainConfigError(f"packet block count {p.n} != {n}")
        candidates.append((set(p.indices), np.frombuffer(p.payload, dtype=np.uint8).copy()))

    # iterate to fixpoint; each pass reduces by everything released so far
    progress = True
    while progress:
        progress = False
        remaining = []
        for indices, payload in candidates:
            for j in indices & state.released.keys():
                payload ^= np.frombuffer(state.released[j], dtype=np.uint8)
            indices -= state.released.keys()
            if len(indices) == 0:
                if payload.any():
                    raise FountainCorruptionError("fully reduced packet is nonzero")
                continue
            if len(indices) == 1:
                j = next(iter(indices))
                data = payload.tobytes()
                if j in state.released:
                    if state.released[j] != data:
                        raise FountainCorruptionError(f"conflicting release of block {j}")
                else:
                    state.released[j] = data
                    progress = True
                continue
            remaining.append((indices, payload))
        candidates = remaining
    state.buffered = candidates
    return state
