"""Synthesis work orders: transcripts in, manifest files out.

The manifest is the hand-off boundary to an external TTS system: one row
per utterance to synthesize, pointing at a synthetic identity's vector in
the emitted bank, a transcript, and a unique output path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bank import write_bank, _read_text, _write_text
from .core import Gender, SyntheticIdentity
from .errors import EmptyPool, InputError, PoolTooSmall, UnknownIdentity

DEFAULT_MIN_WORDS = 100
DEFAULT_MAX_WORDS = 250
DEFAULT_UTTERANCES_PER_IDENTITY = 25

MANIFEST_HEADER = "identity_id\tvector_index\ttext_id\toutput_path\ttext"

BANK_FILENAME = "synthetic.bank"
MANIFEST_FILENAME = "manifest.tsv"
SUMMARY_FILENAME = "summary.txt"


@dataclass(frozen=True, slots=True)
class TranscriptEntry:
    text_id: str
    word_count: int
    text: str


@dataclass(frozen=True, slots=True)
class ManifestRow:
    identity_id: str
    vector_index: int
    text_id: str
    text: str
    output_path: str


@dataclass
class SynthesisManifest:
    rows: list[ManifestRow]
    per_identity_counts: dict[str, int]

    @property
    def total_rows(self) -> int:
        return len(self.rows)


def ingest_transcripts(
    source: str | Path | Iterable[str],
    min_words: int = DEFAULT_MIN_WORDS,
    max_words: int = DEFAULT_MAX_WORDS,
) -> list[TranscriptEntry]:
    """Read one transcript per line, keep those within the word bounds.

    Words are whitespace tokens; sanitization collapses all internal
    whitespace (including tabs) to single spaces. text_ids are sequential
    over the retained entries, so identical input bytes give identical
    pools.
    """
    if min_words < 1 or max_words < min_words:
        raise ValueError(f"bad word bounds [{min_words}, {max_words}]")
    if isinstance(source, (str, Path)):
        lines = _read_text(source).splitlines()
    else:
        lines = list(source)
    entries: list[TranscriptEntry] = []
    for line in lines:
        tokens = line.split()
        if not tokens:
            continue
        count = len(tokens)
        if min_words <= count <= max_words:
            entries.append(
                TranscriptEntry(
                    text_id=f"t{len(entries):06d}",
                    word_count=count,
                    text=" ".join(tokens),
                )
            )
    if not entries:
        raise EmptyPool(
            f"no transcripts with {min_words}..{max_words} words survived filtering"
        )
    return entries


def assign_texts(
    identities: Sequence[SyntheticIdentity],
    pool: Sequence[TranscriptEntry],
    utterances_per_identity: int | Mapping[str, int] = DEFAULT_UTTERANCES_PER_IDENTITY,
    seed: int = 0,
) -> SynthesisManifest:
    """Sample transcripts per identity, without replacement within each.

    Texts may repeat across identities (a million-row manifest forces
    that); within one identity they never do. ``utterances_per_identity``
    is either one fixed count or a per-identity count table for mirroring
    an existing corpus distribution.
    """
    pool_size = len(pool)
    counts = _resolve_counts(identities, utterances_per_identity)
    too_big = max(counts.values(), default=0)
    if too_big > pool_size:
        raise PoolTooSmall(
            f"pool of {pool_size} transcripts cannot supply {too_big} distinct texts per identity"
        )
    rng = np.random.default_rng(seed)
    rows: list[ManifestRow] = []
    for index, identity in enumerate(identities):
        count = counts[identity.id]
        picks = rng.choice(pool_size, size=count, replace=False)
        for utterance, pick in enumerate(picks):
            entry = pool[int(pick)]
            rows.append(
                ManifestRow(
                    identity_id=identity.id,
                    vector_index=index,
                    text_id=entry.text_id,
                    text=entry.text,
                    output_path=f"{identity.id}/{utterance}.wav",
                )
            )
    return SynthesisManifest(rows=rows, per_identity_counts=counts)


def _resolve_counts(
    identities: Sequence[SyntheticIdentity],
    utterances_per_identity: int | Mapping[str, int],
) -> dict[str, int]:
    if isinstance(utterances_per_identity, Mapping):
        missing = [i.id for i in identities if i.id not in utterances_per_identity]
        if missing:
            raise UnknownIdentity(
                f"count table misses {len(missing)} identities (first: {missing[0]!r})"
            )
        counts = {i.id: int(utterances_per_identity[i.id]) for i in identities}
    else:
        counts = {i.id: int(utterances_per_identity) for i in identities}
    for identity_id, count in counts.items():
        if count < 1:
            raise ValueError(f"utterance count for {identity_id!r} must be positive")
    return counts


def format_manifest(manifest: SynthesisManifest) -> str:
    lines = [MANIFEST_HEADER]
    for row in manifest.rows:
        lines.append(
            f"{row.identity_id}\t{row.vector_index}\t{row.text_id}\t{row.output_path}\t{row.text}"
        )
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> SynthesisManifest:
    lines = text.splitlines()
    if not lines or lines[0] != MANIFEST_HEADER:
        raise InputError("not a manifest table: bad or missing header")
    rows: list[ManifestRow] = []
    counts: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise InputError(f"manifest line {lineno}: expected 5 tab-separated fields")
        identity_id, vector_index, text_id, output_path, text = parts
        try:
            index = int(vector_index)
        except ValueError as exc:
            raise InputError(f"manifest line {lineno}: bad vector_index") from exc
        rows.append(ManifestRow(identity_id, index, text_id, text, output_path))
        counts[identity_id] = counts.get(identity_id, 0) + 1
    return SynthesisManifest(rows=rows, per_identity_counts=counts)


def format_summary(identities: Sequence[SyntheticIdentity], manifest: SynthesisManifest) -> str:
    counts = [manifest.per_identity_counts.get(i.id, 0) for i in identities]
    per_gender = {g: 0 for g in Gender}
    for identity in identities:
        per_gender[identity.gender] += 1
    lines = [
        f"total_identities = {len(identities)}",
        f"male_identities = {per_gender[Gender.MALE]}",
        f"female_identities = {per_gender[Gender.FEMALE]}",
        f"total_rows = {manifest.total_rows}",
        f"utterances_min = {min(counts) if counts else 0}",
        f"utterances_mean = {sum(counts) / len(counts) if counts else 0.0:.6f}",
        f"utterances_max = {max(counts) if counts else 0}",
    ]
    return "\n".join(lines) + "\n"


def emit(
    manifest: SynthesisManifest,
    identities: Sequence[SyntheticIdentity],
    output_dir: str | Path,
    dimension: int | None = None,
) -> dict[str, Path]:
    """Write the embedding bank, manifest table, and summary report.

    Re-running with identical inputs reproduces byte-identical files;
    nothing time- or environment-dependent lands in the output.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if dimension is None:
        if not identities:
            raise ValueError("cannot infer bank dimension from an empty identity list")
        dimension = identities[0].vector.shape[0]
    paths = {
        "bank": out / BANK_FILENAME,
        "manifest": out / MANIFEST_FILENAME,
        "summary": out / SUMMARY_FILENAME,
    }
    write_bank(paths["bank"], identities, dimension)
    _write_text(paths["manifest"], format_manifest(manifest))
    _write_text(paths["summary"], format_summary(identities, manifest))
    return paths
