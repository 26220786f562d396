"""
NK fitness landscapes.

A landscape assigns each of the 2^N binary configurations a fitness V(d),
the arithmetic mean of N contributions C_i. Contribution i is looked up in
a table indexed by the local pattern of attribute i: its own bit (most
significant) followed by the bits of its interaction partners in set order.
Table entries are i.i.d. Uniform[0, 1] draws from the stream
``landscape/tables`` of the spec seed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from src.utils.rng import check_seed, substream

Configuration = tuple[int, ...]

PATTERNS = ("adjacent-cyclic", "random", "block-diagonal")
ENUMERATION_CAP = 24
MEMO_MAX_BITS = 16
CHUNK_SIZE = 1 << 16
DUMP_HEADER = "# nk-landscape v1"


class EnumerationCapError(ValueError):
    """Raised when an exhaustive scan would exceed the enumeration cap."""


def contiguous_blocks(sizes: Iterable[int]) -> tuple[tuple[int, ...], ...]:
    """Blocks of consecutive attribute indices with the given sizes."""
    blocks = []
    start = 0
    for size in sizes:
        size = int(size)
        if size < 1:
            raise ValueError(f"Block sizes must be positive, got {size}")
        blocks.append(tuple(range(start, start + size)))
        start += size
    if not blocks:
        raise ValueError("At least one block is required")
    return tuple(blocks)


@dataclass(frozen=True)
class LandscapeSpec:
    """Parameters fully determining a generated landscape.

    For the block-diagonal pattern every attribute interacts with all other
    members of its block, so ``k_interactions`` must equal the largest block
    size minus one (use :meth:`block_diagonal`).
    """

    n_attributes: int
    k_interactions: int
    pattern: str = "random"
    blocks: tuple[tuple[int, ...], ...] | None = None
    seed: int = 0

    def __post_init__(self):
        n, k = self.n_attributes, self.k_interactions
        if n < 1:
            raise ValueError(f"N must be a positive integer, got N={n}")
        if not 0 <= k <= n - 1:
            raise ValueError(f"K must lie in [0, N-1] = [0, {n - 1}], got K={k}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"Unknown interaction pattern '{self.pattern}', expected one of {PATTERNS}")
        check_seed(self.seed)

        if self.pattern != "block-diagonal":
            if self.blocks is not None:
                raise ValueError(f"Blocks are only meaningful for the block-diagonal pattern, not '{self.pattern}'")
            return

        if not self.blocks:
            raise ValueError("The block-diagonal pattern requires a non-empty list of blocks")
        blocks = tuple(tuple(sorted(int(i) for i in block)) for block in self.blocks)
        if any(len(block) == 0 for block in blocks):
            raise ValueError("Blocks must not be empty")
        members = [i for block in blocks for i in block]
        if sorted(members) != list(range(n)):
            raise ValueError(f"Blocks {blocks} do not partition the attributes 0..{n - 1}")
        widest = max(len(block) for block in blocks)
        if k != widest - 1:
            raise ValueError(
                f"For block-diagonal landscapes K equals the largest block size minus one ({widest - 1}), got K={k}"
            )
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def block_diagonal(cls, blocks: Sequence[Sequence[int]], seed: int = 0) -> "LandscapeSpec":
        blocks = tuple(tuple(b) for b in blocks)
        n = sum(len(b) for b in blocks)
        k = max((len(b) for b in blocks), default=1) - 1
        return cls(n_attributes=n, k_interactions=k, pattern="block-diagonal", blocks=blocks, seed=seed)


@dataclass(frozen=True)
class Census:
    count: int
    optima: list[Configuration]


@dataclass(frozen=True, eq=False)
class Landscape:
    """An immutable NK task environment.

    ``spec`` is None for landscapes assembled from explicit tables (hand-built
    landscapes and landscapes extended by firm growth); those cannot be
    regenerated from a seed and are reproduced from their table dump instead.
    """

    interaction_sets: tuple[tuple[int, ...], ...]
    tables: tuple[np.ndarray, ...]
    spec: LandscapeSpec | None = None
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        sets = tuple(tuple(int(j) for j in s) for s in self.interaction_sets)
        if not sets:
            raise ValueError("A landscape needs at least one attribute")
        if len(self.tables) != len(sets):
            raise ValueError(f"Got {len(self.tables)} tables for {len(sets)} attributes")
        n = len(sets)
        tables = []
        for i, (partners, table) in enumerate(zip(sets, self.tables)):
            if i in partners or any(not 0 <= j < n for j in partners) or len(set(partners)) != len(partners):
                raise ValueError(f"Interaction set of attribute {i} is invalid: {partners}")
            table = np.array(table, dtype=np.float64)
            if table.shape != (1 << (len(partners) + 1),):
                raise ValueError(
                    f"Table of attribute {i} needs {1 << (len(partners) + 1)} entries, got {table.size}"
                )
            if np.any(table < 0.0) or np.any(table > 1.0):
                raise ValueError(f"Contributions of attribute {i} must lie in [0, 1]")
            table.setflags(write=False)
            tables.append(table)
        object.__setattr__(self, "interaction_sets", sets)
        object.__setattr__(self, "tables", tuple(tables))

    @classmethod
    def from_tables(
        cls,
        tables: Sequence[Sequence[float]],
        interaction_sets: Sequence[Sequence[int]] | None = None,
    ) -> "Landscape":
        """Builds a landscape from explicit tables (K=0 when no sets are given)."""
        if interaction_sets is None:
            interaction_sets = [()] * len(tables)
        return cls(interaction_sets=tuple(tuple(s) for s in interaction_sets), tables=tuple(tables))

    @property
    def n(self) -> int:
        return len(self.interaction_sets)

    def _check(self, config: Sequence[int]) -> None:
        if len(config) != self.n:
            raise ValueError(f"Configuration has {len(config)} bits, landscape has N={self.n}")

    def _pattern_index(self, i: int, config: Sequence[int]) -> int:
        index = config[i]
        for j in self.interaction_sets[i]:
            index = (index << 1) | config[j]
        return index

    def contributions(self, config: Sequence[int]) -> tuple[float, ...]:
        """The N contributions C_i of ``config``."""
        self._check(config)
        key = tuple(config)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        values = tuple(float(self.tables[i][self._pattern_index(i, key)]) for i in range(self.n))
        if self.n <= MEMO_MAX_BITS:
            self._memo[key] = values
        return values

    def fitness(self, config: Sequence[int]) -> float:
        """V(d): the mean contribution, summed in attribute order."""
        total = 0.0
        for value in self.contributions(config):
            total += value
        return total / self.n

    def values(self, cap: int = ENUMERATION_CAP) -> np.ndarray:
        """V for all 2^N configurations, indexed by :func:`config_to_index`."""
        n = self.n
        if n > cap:
            raise EnumerationCapError(
                f"Exhaustive scan of N={n} needs 2^{n} evaluations, above the enumeration cap of {cap}. "
                f"Pass cap={n} (or set enumeration_cap in the config) to run it anyway."
            )
        size = 1 << n
        out = np.empty(size, dtype=np.float64)
        shifts = (n - 1 - np.arange(n)).astype(np.int64)
        for start in range(0, size, CHUNK_SIZE):
            index = np.arange(start, min(start + CHUNK_SIZE, size), dtype=np.int64)
            bits = (index[:, None] >> shifts) & 1
            total = np.zeros(index.size, dtype=np.float64)
            for i in range(n):
                pattern = bits[:, i].copy()
                for j in self.interaction_sets[i]:
                    pattern = (pattern << 1) | bits[:, j]
                total += self.tables[i][pattern]
            out[start:start + index.size] = total / n
        return out

    def global_optimum(self, cap: int = ENUMERATION_CAP) -> tuple[Configuration, float]:
        """Exhaustive maximiser; ties go to the lexicographically smallest vector."""
        values = self.values(cap)
        best = int(np.argmax(values))
        return index_to_config(best, self.n), float(values[best])

    def local_optima_census(self, cap: int = ENUMERATION_CAP) -> Census:
        """All configurations strictly fitter than each of their N one-flip neighbours."""
        values = self.values(cap)
        index = np.arange(values.size, dtype=np.int64)
        strict = np.ones(values.size, dtype=bool)
        for j in range(self.n):
            strict &= values > values[index ^ (1 << (self.n - 1 - j))]
        optima = [index_to_config(int(i), self.n) for i in np.flatnonzero(strict)]
        return Census(count=len(optima), optima=optima)

    def dumps(self) -> str:
        """Versioned text dump: one ``C <attribute> <pattern> <value>`` line per table entry."""
        spec = self.spec
        lines = [DUMP_HEADER, f"n {self.n}"]
        if spec is None:
            lines.append("pattern assembled")
        else:
            lines += [f"pattern {spec.pattern}", f"k {spec.k_interactions}", f"seed {spec.seed}"]
            if spec.blocks is not None:
                lines.append("blocks " + "|".join(",".join(map(str, b)) for b in spec.blocks))
        for i, partners in enumerate(self.interaction_sets):
            lines.append(" ".join(["interactions", str(i), *map(str, partners)]))
        for i, table in enumerate(self.tables):
            width = len(self.interaction_sets[i]) + 1
            for pattern, value in enumerate(table):
                lines.append(f"C {i} {pattern:0{width}b} {float(value):.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Landscape":
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines or lines[0] != DUMP_HEADER:
            raise ValueError(f"Not a landscape dump (expected header '{DUMP_HEADER}')")
        header: dict[str, str] = {}
        sets: dict[int, tuple[int, ...]] = {}
        entries: dict[int, dict[int, float]] = {}
        for line in lines[1:]:
            key, _, rest = line.partition(" ")
            if key == "interactions":
                parts = rest.split()
                sets[int(parts[0])] = tuple(int(j) for j in parts[1:])
            elif key == "C":
                attribute, pattern, value = rest.split()
                entries.setdefault(int(attribute), {})[int(pattern, 2)] = float(value)
            else:
                header[key] = rest
        n = int(header["n"])
        interaction_sets = tuple(sets[i] for i in range(n))
        tables = tuple(
            np.array([entries[i][p] for p in range(1 << (len(interaction_sets[i]) + 1))]) for i in range(n)
        )
        spec = None
        if header.get("pattern", "assembled") != "assembled":
            blocks = None
            if "blocks" in header:
                blocks = tuple(tuple(int(j) for j in b.split(",")) for b in header["blocks"].split("|"))
            spec = LandscapeSpec(
                n_attributes=n,
                k_interactions=int(header["k"]),
                pattern=header["pattern"],
                blocks=blocks,
                seed=int(header["seed"]),
            )
        return cls(interaction_sets=interaction_sets, tables=tables, spec=spec)


def _interaction_sets(spec: LandscapeSpec) -> tuple[tuple[int, ...], ...]:
    n, k = spec.n_attributes, spec.k_interactions
    if spec.pattern == "adjacent-cyclic":
        return tuple(tuple((i + j) % n for j in range(1, k + 1)) for i in range(n))
    if spec.pattern == "block-diagonal":
        owner = {i: block for block in spec.blocks for i in block}
        return tuple(tuple(j for j in owner[i] if j != i) for i in range(n))
    rng = substream(spec.seed, "landscape", "interactions")
    sets = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        chosen = rng.choice(others, size=k, replace=False) if k > 0 else []
        sets.append(tuple(sorted(int(j) for j in chosen)))
    return tuple(sets)


def generate(spec: LandscapeSpec) -> Landscape:
    """Draws the landscape described by ``spec``; same spec, same tables."""
    sets = _interaction_sets(spec)
    rng = substream(spec.seed, "landscape", "tables")
    tables = tuple(rng.random(1 << (len(partners) + 1)) for partners in sets)
    return Landscape(interaction_sets=sets, tables=tables, spec=spec)


def hamming_neighbors(config: Sequence[int], radius: int) -> list[Configuration]:
    """All configurations at Hamming distance exactly ``radius``, in flip-index order."""
    n = len(config)
    if not 1 <= radius <= n:
        raise ValueError(f"Radius must lie in [1, {n}], got {radius}")
    base = tuple(config)
    return [flip(base, flips) for flips in itertools.combinations(range(n), radius)]


def flip(config: Sequence[int], positions: Iterable[int]) -> Configuration:
    bits = list(config)
    for i in positions:
        bits[i] = 1 - bits[i]
    return tuple(bits)


def index_to_config(index: int, n: int) -> Configuration:
    return tuple((index >> (n - 1 - j)) & 1 for j in range(n))


def config_to_index(config: Sequence[int]) -> int:
    index = 0
    for bit in config:
        index = (index << 1) | int(bit)
    return index


def random_configuration(n: int, rng: np.random.Generator) -> Configuration:
    return tuple(int(b) for b in rng.integers(0, 2, size=n))


def bits_to_str(config: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in config)


def str_to_bits(text: str) -> Configuration:
    if any(c not in "01" for c in text):
        raise ValueError(f"Not a bit string: '{text}'")
    return tuple(int(c) for c in text)
