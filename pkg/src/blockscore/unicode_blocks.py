"""Unicode block table: parsing Blocks.txt and codepoint -> block lookup.

A block table is built from the Unicode Character Database ``Blocks.txt``
file (data lines look like ``0000..007F; Basic Latin``).  A snapshot of the
Unicode 12.0 file ships with the package, so builds are hermetic.  Every
codepoint resolves to exactly one index: codepoints not covered by any named
block map to an appended ``No_Block`` pseudo-block, which keeps the lookup
total and lets downstream scoring treat such characters as unseen-block
evidence.
"""

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import BlocksParseError

MAX_CODEPOINT = 0x10FFFF
NO_BLOCK_NAME = "No_Block"

_RANGE_RE = re.compile(r"^([0-9A-Fa-f]{4,6})\.\.([0-9A-Fa-f]{4,6})\s*;\s*(\S.*?)\s*$")
_VERSION_RE = re.compile(r"#\s*Blocks-([0-9][0-9.]*)\.txt")


@dataclass(frozen=True)
class BlockRange:
    """One named block: an inclusive codepoint range."""

    start: int
    end: int
    name: str

    def __post_init__(self):
        if not 0 <= self.start <= self.end <= MAX_CODEPOINT:
            raise BlocksParseError(
                f"invalid range {self.start:04X}..{self.end:04X} for block {self.name!r}"
            )


@dataclass(frozen=True)
class BlockTable:
    """Sorted, disjoint block ranges plus the No_Block pseudo-block.

    ``block_count`` is the number of *named* blocks; the pseudo-block sits at
    index ``block_count``, so valid block indices are ``0..block_count``
    inclusive and count vectors have ``block_count + 1`` slots.

    Immutable after construction; safe to share across threads.
    """

    ranges: tuple[BlockRange, ...]
    version: str | None = None
    _starts: list = field(init=False, repr=False, compare=False)
    _ends: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.ranges:
            raise BlocksParseError("block table contains zero blocks")
        ordered = tuple(sorted(self.ranges, key=lambda r: r.start))
        prev = None
        for r in ordered:
            if prev is not None and r.start <= prev.end:
                raise BlocksParseError(
                    f"overlapping ranges: {prev.name!r} ({prev.start:04X}..{prev.end:04X}) "
                    f"and {r.name!r} ({r.start:04X}..{r.end:04X})"
                )
            prev = r
        object.__setattr__(self, "ranges", ordered)
        object.__setattr__(self, "_starts", [r.start for r in ordered])
        object.__setattr__(self, "_ends", [r.end for r in ordered])

    @property
    def block_count(self) -> int:
        return len(self.ranges)

    @property
    def no_block_index(self) -> int:
        return len(self.ranges)

    @property
    def vector_length(self) -> int:
        """Length of per-sentence count vectors (named blocks + No_Block)."""
        return len(self.ranges) + 1

    def block_of(self, cp: int) -> int:
        """Index of the block containing codepoint ``cp``.

        Total over 0..0x10FFFF: codepoints in no named block get
        ``no_block_index``.  Raises ValueError outside the Unicode range.
        """
        if not 0 <= cp <= MAX_CODEPOINT:
            raise ValueError(f"codepoint {cp:#x} outside Unicode range")
        i = bisect_right(self._starts, cp) - 1
        if i >= 0 and cp <= self._ends[i]:
            return i
        return self.no_block_index

    def name_of(self, index: int) -> str:
        if index == self.no_block_index:
            return NO_BLOCK_NAME
        return self.ranges[index].name

    def index_of(self, name: str) -> int:
        """Index for an exact block name; KeyError if unknown."""
        return self._name_index()[name]

    def _name_index(self) -> dict:
        cached = getattr(self, "_name_index_cache", None)
        if cached is None:
            cached = {r.name: i for i, r in enumerate(self.ranges)}
            cached[NO_BLOCK_NAME] = self.no_block_index
            object.__setattr__(self, "_name_index_cache", cached)
        return cached

    def dense_index(self) -> np.ndarray:
        """Codepoint -> block index as one uint16 array over all of Unicode.

        Built lazily (2.2 MB); used by the featurizer for bulk counting.
        Agrees with :meth:`block_of` everywhere.
        """
        cached = getattr(self, "_dense_cache", None)
        if cached is None:
            cached = np.full(MAX_CODEPOINT + 1, self.no_block_index, dtype=np.uint16)
            for i, r in enumerate(self.ranges):
                cached[r.start : r.end + 1] = i
            cached.setflags(write=False)
            object.__setattr__(self, "_dense_cache", cached)
        return cached


def parse_blocks_file(text: str) -> BlockTable:
    """Parse the UCD ``Blocks.txt`` format into a :class:`BlockTable`.

    Comment lines (``#``) and blank lines are skipped; anything else must be
    a ``XXXX..YYYY; Block Name`` data line.
    """
    version = None
    ranges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if version is None:
                m = _VERSION_RE.search(line)
                if m:
                    version = m.group(1)
            continue
        m = _RANGE_RE.match(line)
        if not m:
            raise BlocksParseError(f"malformed block line: {raw!r}", line_number=lineno)
        start, end = int(m.group(1), 16), int(m.group(2), 16)
        try:
            ranges.append(BlockRange(start, end, m.group(3)))
        except BlocksParseError as exc:
            raise BlocksParseError(str(exc), line_number=lineno) from None
    return BlockTable(tuple(ranges), version=version)


def load_blocks_file(path) -> BlockTable:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_blocks_file(fh.read())


def load_default_table() -> BlockTable:
    """The bundled Unicode 12.0 block table (300 named blocks)."""
    text = resources.files("blockscore").joinpath("data/Blocks.txt").read_text("utf-8")
    return parse_blocks_file(text)
