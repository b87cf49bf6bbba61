"""Layered mechanism constructs and their Revelation-Principle reduction.

A construct is a directed graph of layers.  Myerson layers behave like direct
mechanisms and a linear run of them collapses to one layer; Non-Myerson
layers carry at least one reduction blocker and are never collapsed.  Edges
leaving a Non-Myerson layer are privacy walls.

Only linear segments are collapsed.  A Myerson layer with several
predecessors or successors is left in place.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence


class ConstructError(ValueError):
    """A construct violates its structural invariants."""


class ConstructParseError(ConstructError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class LayerKind(enum.Enum):
    MYERSON = "myerson"
    NON_MYERSON = "nonmyerson"


class Blocker(enum.Enum):
    ROUTING_STRATEGY = "routing_strategy"
    TIMED_LOTTERY = "timed_lottery"
    SELECTIVE_DISCLOSURE = "selective_disclosure"
    ASYMMETRIC_DISCLOSURE = "asymmetric_disclosure"


_BLOCKER_ORDER = {b: i for i, b in enumerate(Blocker)}


@dataclass(frozen=True)
class Layer:
    id: str
    kind: LayerKind
    blockers: frozenset[Blocker] = frozenset()

    def __post_init__(self):
        if not self.id or any(ch.isspace() for ch in self.id):
            raise ConstructError(f"invalid layer id {self.id!r}")
        object.__setattr__(self, "blockers", frozenset(self.blockers))
        if self.kind is LayerKind.MYERSON and self.blockers:
            raise ConstructError(f"Myerson layer {self.id!r} cannot carry reduction blockers")
        if self.kind is LayerKind.NON_MYERSON and not self.blockers:
            raise ConstructError(f"Non-Myerson layer {self.id!r} must name at least one blocker")

    @property
    def is_myerson(self) -> bool:
        return self.kind is LayerKind.MYERSON


def myerson(layer_id: str) -> Layer:
    return Layer(layer_id, LayerKind.MYERSON)


def non_myerson(layer_id: str, *blockers: Blocker) -> Layer:
    return Layer(layer_id, LayerKind.NON_MYERSON, frozenset(blockers))


def _has_cycle(ids: Sequence[str], edges: Iterable[tuple[str, str]]) -> bool:
    succ: dict[str, list[str]] = {i: [] for i in ids}
    indeg = {i: 0 for i in ids}
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    queue = [i for i in ids if indeg[i] == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for nxt in succ[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    return seen < len(ids)


@dataclass(frozen=True)
class Construct:
    layers: tuple[Layer, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()
    circular: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        ids = [layer.id for layer in self.layers]
        if len(set(ids)) != len(ids):
            raise ConstructError("duplicate layer ids")
        known = set(ids)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ConstructError(f"edge ({a}, {b}) names an unknown layer")
        if len(set(self.edges)) != len(self.edges):
            raise ConstructError("duplicate edges")
        # never trusted from input
        object.__setattr__(self, "circular", _has_cycle(ids, self.edges))

    def layer(self, layer_id: str) -> Layer:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise KeyError(layer_id)


def collapse_myerson_chains(c: Construct) -> Construct:
    """Replace every linear run of Myerson layers by a single Myerson layer.

    An edge ``a -> b`` is contracted when both ends are Myerson layers,
    ``a`` has no other successor and ``b`` has no other predecessor.  Merged
    layers are named by joining member ids with ``+`` in path order; a run
    that closes on itself keeps a self-loop so the result stays circular.
    """
    by_id = {layer.id: layer for layer in c.layers}
    out_deg = {i: 0 for i in by_id}
    in_deg = {i: 0 for i in by_id}
    for a, b in c.edges:
        out_deg[a] += 1
        in_deg[b] += 1

    nxt: dict[str, str] = {}
    prv: dict[str, str] = {}
    for a, b in c.edges:
        if (
            a != b
            and by_id[a].is_myerson
            and by_id[b].is_myerson
            and out_deg[a] == 1
            and in_deg[b] == 1
        ):
            nxt[a] = b
            prv[b] = a
    if not nxt:
        return c

    order = {layer.id: i for i, layer in enumerate(c.layers)}
    group_of: dict[str, str] = {}
    new_layers: list[Layer] = []
    closed_runs: list[str] = []
    for layer in c.layers:
        if layer.id in group_of:
            continue
        head = layer.id
        # walk back to the head of the run; a pure cycle starts at its earliest member
        cursor = head
        is_cycle = False
        while cursor in prv:
            cursor = prv[cursor]
            if cursor == head:
                is_cycle = True
                break
        if is_cycle:
            members = [head]
            cursor = nxt[head]
            while cursor != head:
                members.append(cursor)
                cursor = nxt[cursor]
            start = min(range(len(members)), key=lambda k: order[members[k]])
            members = members[start:] + members[:start]
        else:
            members = [cursor]
            while members[-1] in nxt:
                members.append(nxt[members[-1]])
        if len(members) == 1:
            merged = layer
        else:
            merged = myerson("+".join(members))
        for m in members:
            group_of[m] = merged.id
        if is_cycle:
            closed_runs.append(merged.id)
        new_layers.append(merged)

    new_edges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for a, b in c.edges:
        if nxt.get(a) == b:
            continue
        edge = (group_of[a], group_of[b])
        if edge not in seen:
            seen.add(edge)
            new_edges.append(edge)
    for gid in closed_runs:
        if (gid, gid) not in seen:
            seen.add((gid, gid))
            new_edges.append((gid, gid))
    return Construct(tuple(new_layers), tuple(new_edges))


def is_reducible(c: Construct) -> bool:
    return all(layer.is_myerson for layer in c.layers)


def privacy_walls(c: Construct) -> list[tuple[str, str]]:
    """Edges whose source is a Non-Myerson layer, in declaration order."""
    kinds = {layer.id: layer.kind for layer in c.layers}
    return [(a, b) for a, b in c.edges if kinds[a] is LayerKind.NON_MYERSON]


# --- taxonomy ---------------------------------------------------------------


class MechType(enum.Enum):
    DIRECT = "Direct"
    INDIRECT = "Indirect"
    BOTH = "Both"


class Reducibility(enum.Enum):
    REDUCIBLE = "Reducible"
    IRREDUCIBLE = "Irreducible"
    MOSTLY = "Mostly"

    @property
    def blocks_reduction(self) -> bool:
        return self is not Reducibility.REDUCIBLE


class Unactionability(enum.Enum):
    EXOGENOUS = "Exogenous"
    ENDOGENOUS = "Endogenous"
    MIXED = "Mixed"


@dataclass(frozen=True)
class TaxonomyEntry:
    name: str
    mech_type: MechType
    reducible: Reducibility
    unactionability: Unactionability
    note: str = ""


def classify(c: Construct) -> TaxonomyEntry:
    """Structural verdict in the shape of a taxonomy row.

    Reducible constructs are exogenously unactionable.  Irreducible ones are
    endogenous when circular and built only from Non-Myerson layers, and
    mixed otherwise.  The mechanism type is inferred as Direct for reducible
    constructs; the table itself lists reducible indirect mechanisms too, so
    this column is a structural guess, not a lookup.
    """
    collapsed = collapse_myerson_chains(c)
    if is_reducible(collapsed):
        return TaxonomyEntry(
            "construct", MechType.DIRECT, Reducibility.REDUCIBLE, Unactionability.EXOGENOUS
        )
    if collapsed.circular and not any(layer.is_myerson for layer in collapsed.layers):
        verdict = Unactionability.ENDOGENOUS
    else:
        verdict = Unactionability.MIXED
    return TaxonomyEntry("construct", MechType.INDIRECT, Reducibility.IRREDUCIBLE, verdict)


def agrees(entry: TaxonomyEntry, verdict: TaxonomyEntry) -> bool:
    """Same reducibility (``Mostly`` counts as irreducible) and unactionability."""
    return (
        entry.reducible.blocks_reduction == verdict.reducible.blocks_reduction
        and entry.unactionability is verdict.unactionability
    )


class TaxonomyError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class TaxonomyFileNotFound(TaxonomyError, FileNotFoundError):
    pass


class MalformedRowError(TaxonomyError):
    pass


class UnknownEnumError(TaxonomyError):
    pass


TAXONOMY_HEADER = ["name", "type", "reducible", "unactionability", "note"]


def _enum_value(enum_cls, raw: str, column: str, line: int):
    try:
        return enum_cls(raw.strip())
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise UnknownEnumError(f"unknown {column} {raw!r} (expected one of {allowed})", line) from None


def parse_taxonomy(text: str) -> list[TaxonomyEntry]:
    reader = csv.reader(io.StringIO(text))
    entries = []
    header_seen = False
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if not header_seen:
            if [h.strip() for h in row] != TAXONOMY_HEADER:
                raise MalformedRowError(f"expected header {','.join(TAXONOMY_HEADER)}", line)
            header_seen = True
            continue
        if len(row) != len(TAXONOMY_HEADER):
            raise MalformedRowError(f"expected {len(TAXONOMY_HEADER)} fields, got {len(row)}", line)
        name, mtype, red, unact, note = row
        if not name.strip():
            raise MalformedRowError("empty mechanism name", line)
        entries.append(
            TaxonomyEntry(
                name=name.strip(),
                mech_type=_enum_value(MechType, mtype, "type", line),
                reducible=_enum_value(Reducibility, red, "reducible", line),
                unactionability=_enum_value(Unactionability, unact, "unactionability", line),
                note=note.strip(),
            )
        )
    if not header_seen:
        raise MalformedRowError("missing header", 1)
    return entries


def load_taxonomy(path: str | Path | None = None) -> list[TaxonomyEntry]:
    """Read a taxonomy file; ``None`` loads the bundled table."""
    if path is None:
        text = resources.files("circmech").joinpath("data/taxonomy.csv").read_text(encoding="utf-8")
        return parse_taxonomy(text)
    path = Path(path)
    if not path.is_file():
        raise TaxonomyFileNotFound(f"taxonomy file not found: {path}")
    return parse_taxonomy(path.read_text(encoding="utf-8"))


# --- construct file format -------------------------------------------------


def parse_construct(text: str) -> Construct:
    """Parse ``layer <id> myerson|nonmyerson [b1,b2]`` / ``edge <a> <b>`` lines."""
    layers: list[Layer] = []
    edges: list[tuple[str, str]] = []
    ids: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        directive = parts[0]
        if directive == "layer":
            if len(parts) not in (3, 4):
                raise ConstructParseError("expected 'layer <id> myerson|nonmyerson [blockers]'", lineno)
            _, layer_id, kind_raw, *rest = parts
            try:
                kind = LayerKind(kind_raw)
            except ValueError:
                raise ConstructParseError(f"unknown layer kind {kind_raw!r}", lineno) from None
            blockers = set()
            if rest:
                for name in rest[0].split(","):
                    try:
                        blockers.add(Blocker(name))
                    except ValueError:
                        raise ConstructParseError(f"unknown blocker {name!r}", lineno) from None
            if layer_id in ids:
                raise ConstructParseError(f"duplicate layer {layer_id!r}", lineno)
            try:
                layers.append(Layer(layer_id, kind, frozenset(blockers)))
            except ConstructError as exc:
                raise ConstructParseError(str(exc), lineno) from None
            ids.add(layer_id)
        elif directive == "edge":
            if len(parts) != 3:
                raise ConstructParseError("expected 'edge <from> <to>'", lineno)
            a, b = parts[1], parts[2]
            for end in (a, b):
                if end not in ids:
                    raise ConstructParseError(f"edge names undeclared layer {end!r}", lineno)
            if (a, b) in edges:
                raise ConstructParseError(f"duplicate edge {a} -> {b}", lineno)
            edges.append((a, b))
        else:
            raise ConstructParseError(f"unknown directive {directive!r}", lineno)
    return Construct(tuple(layers), tuple(edges))


def serialize_construct(c: Construct) -> str:
    lines = []
    for layer in c.layers:
        parts = ["layer", layer.id, layer.kind.value]
        if layer.blockers:
            parts.append(",".join(b.value for b in sorted(layer.blockers, key=_BLOCKER_ORDER.get)))
        lines.append(" ".join(parts))
    lines.extend(f"edge {a} {b}" for a, b in c.edges)
    return "\n".join(lines) + "\n"


def load_construct(path: str | Path) -> Construct:
    path = Path(path)
    if not path.is_file():
        raise ConstructParseError(f"construct file not found: {path}")
    return parse_construct(path.read_text(encoding="utf-8"))


def bundled_construct(name: str) -> Construct:
    """Hand-built exemplar construct for a taxonomy row (see ``data/constructs``)."""
    text = resources.files("circmech").joinpath(f"data/constructs/{name}.txt").read_text(encoding="utf-8")
    return parse_construct(text)


EXEMPLARS = {
    "VCG, Myerson auctions": "vcg",
    "One-shot voting games": "one_shot_voting",
    "Repeated direct games (Bayesian updating)": "repeated_direct",
    "Public randomization / correlating": "public_randomization",
    "Posted-price mechanisms": "posted_price",
    "Continuous double auctions": "double_auction",
    "Reputation systems": "reputation",
    "Contract renegotiation mechanisms": "contract_renegotiation",
    "Prediction markets (endogenous liquidity)": "prediction_market",
    "Proof-of-Work consensus": "proof_of_work",
    "Proof-of-Stake slashing": "proof_of_stake",
    "Saito Consensus": "saito",
}


def saito_construct() -> Construct:
    return bundled_construct("saito")
