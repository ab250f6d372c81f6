"""FASTA, manifests, datasets and negative-window cutting."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import contacts
from .contacts import ContactMap, ContactMapError
from .grammar import Alphabet


class DataError(ValueError):
    pass


def parse_fasta(text, alphabet=None, source="<string>"):
    records = []
    # protein-style alphabets are case-insensitive; lowercase toy alphabets keep case
    fold = alphabet is None or all(c == c.upper() for c in alphabet.symbols)
    ident = None
    chunks = []
    start_line = 0

    def flush():
        if ident is None:
            return
        seq = "".join(chunks)
        seq = seq.upper() if fold else seq
        if not seq:
            raise DataError(f"{source}:{start_line}: record {ident!r} has no sequence")
        if alphabet is not None:
            for pos, c in enumerate(seq, start=1):
                if c not in alphabet:
                    raise DataError(
                        f"{source}: record {ident!r}: symbol {c!r} at position {pos} not in alphabet"
                    )
        records.append((ident, seq))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        if line.startswith(">"):
            flush()
            ident = line[1:].split()[0] if line[1:].strip() else ""
            if not ident:
                raise DataError(f"{source}:{lineno}: empty record id")
            chunks = []
            start_line = lineno
        else:
            if ident is None:
                raise DataError(f"{source}:{lineno}: sequence data before first '>' header")
            chunks.append("".join(line.split()))
    flush()
    return records


def read_fasta(path, alphabet=None):
    """``[(id, SEQUENCE), ...]`` from a FASTA file, checked against ``alphabet``."""
    path = Path(path)
    return parse_fasta(path.read_text(), alphabet, source=str(path))


def format_fasta(records, width=60):
    lines = []
    for ident, seq in records:
        lines.append(f">{ident}")
        for k in range(0, len(seq), width):
            lines.append(seq[k:k + width])
    return "\n".join(lines) + ("\n" if lines else "")


def write_fasta(records, path, width=60):
    Path(path).write_text(format_fasta(records, width))


def cut_negatives(sequences, window, stride=None):
    """Consecutive windows of exactly ``window`` symbols; short remainders dropped."""
    if window < 2:
        raise DataError("window must be at least 2")
    stride = window if stride is None else stride
    if stride < 1:
        raise DataError("stride must be positive")
    out = []
    for seq in sequences:
        for start in range(0, len(seq) - window + 1, stride):
            out.append(seq[start:start + window])
    return out


def cut_negative_records(records, window, stride=None):
    """Like :func:`cut_negatives` but keeps ids as ``id/start-end`` (1-based)."""
    stride = window if stride is None else stride
    out = []
    for ident, seq in records:
        for k, piece in enumerate(cut_negatives([seq], window, stride)):
            start = k * stride + 1
            out.append((f"{ident}/{start}-{start + window - 1}", piece))
    return out


# -- per-item contact maps ---------------------------------------------------

def format_item_maps(maps):
    blocks = []
    for ident in sorted(maps):
        blocks.append(f">{ident}\n" + contacts.dumps(maps[ident]))
    return "".join(blocks)


def parse_item_maps(text):
    maps = {}
    ident = None
    lines = []
    for raw in text.splitlines() + [">"]:
        if raw.startswith(">"):
            if ident is not None:
                maps[ident] = contacts.loads("\n".join(lines))
            ident = raw[1:].strip() or None
            lines = []
        else:
            lines.append(raw)
    return maps


# -- datasets ----------------------------------------------------------------

@dataclass
class Dataset:
    alphabet: Alphabet
    positives: list
    negatives: list = field(default_factory=list)
    shared_map: ContactMap = None
    per_item_maps: dict = field(default_factory=dict)
    full_map: ContactMap = None
    notes: str = ""

    def __post_init__(self):
        self.validate()

    @property
    def motif_length(self):
        lengths = {len(s) for _, s in self.positives}
        return lengths.pop() if len(lengths) == 1 else None

    def map_for(self, ident):
        if ident in self.per_item_maps:
            return self.per_item_maps[ident]
        return self.shared_map

    def validate(self):
        for label, records in (("positive", self.positives), ("negative", self.negatives)):
            for ident, seq in records:
                for pos, c in enumerate(seq, start=1):
                    if c not in self.alphabet:
                        raise DataError(
                            f"{label} {ident!r}: symbol {c!r} at position {pos} not in alphabet"
                        )
        if self.shared_map is not None:
            if self.motif_length is None and self.positives:
                raise DataError("a shared contact map needs equal-length positives")
            n = self.shared_map.length
            if self.positives and self.motif_length != n:
                raise DataError(f"contact map length {n} != sequence length {self.motif_length}")
            self.shared_map.require_valid()
        lengths = dict(self.positives)
        for ident, cmap in self.per_item_maps.items():
            if ident not in lengths:
                raise DataError(f"contact map for unknown positive {ident!r}")
            if cmap.length != len(lengths[ident]):
                raise DataError(f"contact map length mismatch for {ident!r}")
            cmap.require_valid()
        if self.full_map is not None:
            n = self.full_map.length
            bad = [p for p in self.full_map.pairs if not (1 <= p[0] < p[1] <= n)]
            if bad:
                raise DataError(f"full contact map pairs out of range: {sorted(bad)}")


@dataclass(frozen=True)
class Manifest:
    positives: Path
    negatives: Path = None
    contacts: Path = None
    item_contacts: Path = None
    full_contacts: Path = None
    alphabet: str = "protein"
    length: int = None
    notes: str = ""


MANIFEST_KEYS = ("positives", "negatives", "contacts", "item_contacts",
                 "full_contacts", "alphabet", "length", "notes")


def parse_manifest(text, base=Path(".")):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in MANIFEST_KEYS:
            raise DataError(f"manifest line {lineno}: expected one of {', '.join(MANIFEST_KEYS)} as key=value")
        values[key] = value
    if "positives" not in values:
        raise DataError("manifest needs 'positives='")
    kwargs = {}
    for key in ("positives", "negatives", "contacts", "item_contacts", "full_contacts"):
        if values.get(key):
            kwargs[key] = (base / values[key])
    if "alphabet" in values:
        kwargs["alphabet"] = values["alphabet"]
    if values.get("length"):
        kwargs["length"] = int(values["length"])
    if "notes" in values:
        kwargs["notes"] = values["notes"]
    return Manifest(**kwargs)


def read_manifest(path):
    path = Path(path)
    return parse_manifest(path.read_text(), base=path.parent)


def load_dataset(manifest):
    """Read every file a manifest names and return a validated ``Dataset``."""
    if not isinstance(manifest, Manifest):
        manifest = read_manifest(manifest)
    alphabet = Alphabet.from_string(manifest.alphabet)
    for key in ("positives", "negatives", "contacts", "item_contacts", "full_contacts"):
        path = getattr(manifest, key)
        if path is not None and not Path(path).exists():
            raise DataError(f"{key} file not found: {path}")
    positives = read_fasta(manifest.positives, alphabet)
    negatives = read_fasta(manifest.negatives, alphabet) if manifest.negatives else []
    try:
        shared = contacts.load(manifest.contacts, validate_map=False) if manifest.contacts else None
        per_item = parse_item_maps(Path(manifest.item_contacts).read_text()) if manifest.item_contacts else {}
        full = contacts.load(manifest.full_contacts, validate_map=False) if manifest.full_contacts else None
    except ContactMapError as exc:
        raise DataError(str(exc)) from None
    if manifest.length is not None:
        wrong = [i for i, s in positives if len(s) != manifest.length]
        if wrong:
            raise DataError(f"{len(wrong)} positives differ from declared length {manifest.length}")
        for label, cmap in (("contact", shared), ("full contact", full)):
            if cmap is not None and cmap.length != manifest.length:
                raise DataError(f"{label} map length {cmap.length} != declared length {manifest.length}")
    try:
        return Dataset(alphabet, positives, negatives, shared, per_item, full, manifest.notes)
    except ContactMapError as exc:
        raise DataError(str(exc)) from None


def save_dataset(dataset, directory, alphabet_name=None):
    """Write the dataset's files plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["positives=positives.fasta"]
    write_fasta(dataset.positives, directory / "positives.fasta")
    if dataset.negatives:
        write_fasta(dataset.negatives, directory / "negatives.fasta")
        lines.append("negatives=negatives.fasta")
    if dataset.shared_map is not None:
        contacts.save(dataset.shared_map, directory / "contacts.txt")
        lines.append("contacts=contacts.txt")
    if dataset.per_item_maps:
        (directory / "item_contacts.txt").write_text(format_item_maps(dataset.per_item_maps))
        lines.append("item_contacts=item_contacts.txt")
    if dataset.full_map is not None:
        contacts.save(dataset.full_map, directory / "full_contacts.txt")
        lines.append("full_contacts=full_contacts.txt")
    if alphabet_name is None:
        alphabet_name = ("protein" if dataset.alphabet == Alphabet.protein()
                         else "".join(dataset.alphabet.symbols))
    lines.append(f"alphabet={alphabet_name}")
    if dataset.motif_length is not None:
        lines.append(f"length={dataset.motif_length}")
    if dataset.notes:
        lines.append(f"notes={dataset.notes}")
    path = directory / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path
