"""Temporal relation reasoning: normalization, closure, consistency, scoring.

Events are ordered by BEFORE/AFTER/OVERLAP assertions.  Chaining two
relations through a shared event entails a third relation per the
composition table below; closure computes every entailed pair, and a
relation set is consistent exactly when no chain forces an event before
itself.

OVERLAP is treated as symmetric and transitive here, so overlapping events
form equivalence components.  That is stricter than interval algebras where
overlap does not compose transitively; it is the simplification this
engine's dependency rules are built on.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .model import (
    AFTER,
    BEFORE,
    OVERLAP,
    ModelError,
    RelationAssertion,
    RelationType,
)


class Undetermined(Enum):
    """Composition result carrying no information (no inference possible)."""

    TOKEN = 0


UNDETERMINED = Undetermined.TOKEN

# How two temporal relations compose through a shared middle event:
# table[(r1, r2)] is the relation entailed between A and C given r1(A, B)
# and r2(B, C).  Chaining BEFORE with AFTER gives no ordering of the outer
# events, hence Undetermined.
COMPOSITION_TABLE: dict[tuple[RelationType, RelationType], RelationType | Undetermined] = {
    (BEFORE, BEFORE): BEFORE,
    (BEFORE, OVERLAP): BEFORE,
    (OVERLAP, BEFORE): BEFORE,
    (OVERLAP, OVERLAP): OVERLAP,
    (AFTER, AFTER): AFTER,
    (AFTER, OVERLAP): AFTER,
    (OVERLAP, AFTER): AFTER,
    (BEFORE, AFTER): UNDETERMINED,
    (AFTER, BEFORE): UNDETERMINED,
}


def compose(r1: RelationType, r2: RelationType) -> RelationType | Undetermined:
    return COMPOSITION_TABLE[(r1, r2)]


class InconsistentGraphError(ModelError):
    """Raised when an operation requires a consistent graph but got witnesses."""

    kind = "inconsistent"

    def __init__(self, report: ConsistencyReport):
        self.report = report
        super().__init__("temporal graph is inconsistent")


class NonTemporalRelationError(ModelError):
    def __init__(self, relation_id: str, relation_type: RelationType):
        self.relation_id = relation_id
        super().__init__(
            f"relation {relation_id!r} has non-temporal type {relation_type.value}"
        )


@dataclass(frozen=True)
class TemporalGraph:
    """Normalized temporal structure: AFTER is rewritten as flipped BEFORE,
    OVERLAP pairs are stored unordered with endpoints in lexicographic order."""

    nodes: frozenset[str]
    before: frozenset[tuple[str, str]]
    overlap: frozenset[tuple[str, str]]

    def has_before(self, a: str, b: str) -> bool:
        return (a, b) in self.before

    def has_overlap(self, a: str, b: str) -> bool:
        return (min(a, b), max(a, b)) in self.overlap

    def is_empty(self) -> bool:
        return not self.before and not self.overlap

    def __le__(self, other: TemporalGraph) -> bool:
        return self.before <= other.before and self.overlap <= other.overlap


def _overlap_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def normalize(
    relations: list[RelationAssertion],
    nodes: set[str] | None = None,
) -> TemporalGraph:
    """Rewrite assertions into the canonical form.

    AFTER(a, b) is stored as BEFORE(b, a); OVERLAP is stored unordered;
    duplicates collapse.  Extra nodes may be seeded so that isolated events
    still appear in timelines.
    """
    before: set[tuple[str, str]] = set()
    overlap: set[tuple[str, str]] = set()
    all_nodes: set[str] = set(nodes or ())
    for r in relations:
        if not r.relation_type.is_temporal():
            raise NonTemporalRelationError(r.id, r.relation_type)
        all_nodes.add(r.source)
        all_nodes.add(r.target)
        if r.relation_type is BEFORE:
            before.add((r.source, r.target))
        elif r.relation_type is AFTER:
            before.add((r.target, r.source))
        else:
            overlap.add(_overlap_pair(r.source, r.target))
    return TemporalGraph(
        nodes=frozenset(all_nodes),
        before=frozenset(before),
        overlap=frozenset(overlap),
    )


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _components(g: TemporalGraph) -> tuple[dict[str, str], dict[str, list[str]]]:
    """Overlap components: node -> representative, representative -> members."""
    uf = _UnionFind(g.nodes)
    for a, b in g.overlap:
        uf.union(a, b)
    comp_of: dict[str, str] = {}
    members: dict[str, list[str]] = {}
    for n in g.nodes:
        root = uf.find(n)
        comp_of[n] = root
        members.setdefault(root, []).append(n)
    return comp_of, members


def _component_dag(
    g: TemporalGraph, comp_of: dict[str, str]
) -> dict[str, set[str]]:
    succ: dict[str, set[str]] = {c: set() for c in set(comp_of.values())}
    for a, b in g.before:
        succ[comp_of[a]].add(comp_of[b])
    return succ


def _reachable_from(succ: dict[str, set[str]]) -> dict[str, set[str]]:
    """Components reachable via at least one edge (so a node on a cycle
    reaches itself)."""
    reach: dict[str, set[str]] = {}
    for start in succ:
        seen: set[str] = set()
        queue = deque(succ[start])
        while queue:
            c = queue.popleft()
            if c in seen:
                continue
            seen.add(c)
            queue.extend(succ[c] - seen)
        reach[start] = seen
    return reach


def transitive_closure(g: TemporalGraph) -> TemporalGraph:
    """Least fixpoint of composition-rule application over the graph.

    Overlap components are collapsed with union-find, then BEFORE pairs are
    exactly the node pairs whose components are connected by a path of one
    or more collapsed BEFORE edges.  Inconsistent graphs (cyclic component
    order) still close; the cycle shows up as reflexive BEFORE pairs.
    """
    comp_of, members = _components(g)
    succ = _component_dag(g, comp_of)
    reach = _reachable_from(succ)

    overlap: set[tuple[str, str]] = set()
    for group in members.values():
        if len(group) > 1:
            group = sorted(group)
            for i, a in enumerate(group):
                for b in group[i + 1 :]:
                    overlap.add((a, b))

    before: set[tuple[str, str]] = set()
    for comp, reached in reach.items():
        if not reached:
            continue
        sources = members[comp]
        for target_comp in reached:
            for x in sources:
                for y in members[target_comp]:
                    before.add((x, y))

    return TemporalGraph(
        nodes=g.nodes, before=frozenset(before), overlap=frozenset(overlap)
    )


@dataclass(frozen=True)
class WitnessStep:
    """One asserted relation in a contradiction chain."""

    relation: RelationType
    source: str
    target: str

    def as_triple(self) -> list[str]:
        return [self.relation.value, self.source, self.target]


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    witnesses: tuple[tuple[WitnessStep, ...], ...] = ()

    @property
    def status(self) -> str:
        return "consistent" if self.consistent else "inconsistent"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "witnesses": [
                [step.as_triple() for step in chain] for chain in self.witnesses
            ],
        }


MAX_WITNESSES_PER_CYCLE_GROUP = 10


def replay_witness(chain: tuple[WitnessStep, ...]) -> tuple[RelationType, str, str]:
    """Re-derive a witness chain through the composition table.

    Returns the composed relation over (first source, last target); for a
    genuine witness that is BEFORE(x, x), the irreflexivity contradiction.
    """
    if not chain:
        raise ValueError("empty witness chain")
    current = chain[0].relation
    at = chain[0].target
    for step in chain[1:]:
        if step.source != at:
            raise ValueError(f"chain breaks at {step}: expected source {at!r}")
        composed = compose(current, step.relation)
        if composed is UNDETERMINED:
            raise ValueError("chain composes to Undetermined")
        current = composed
        at = step.target
    return current, chain[0].source, at


def _overlap_adjacency(g: TemporalGraph) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for a, b in g.overlap:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj


def _overlap_path(
    adj: dict[str, set[str]], start: str, goal: str
) -> list[tuple[str, str]]:
    """Shortest path through asserted OVERLAP pairs, as (from, to) steps."""
    if start == goal:
        return []
    prev: dict[str, str] = {start: start}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        for m in adj.get(n, ()):
            if m not in prev:
                prev[m] = n
                if m == goal:
                    queue.clear()
                    break
                queue.append(m)
    if goal not in prev:
        raise ValueError(f"no overlap path {start!r} -> {goal!r}")
    path = []
    node = goal
    while node != start:
        path.append((prev[node], node))
        node = prev[node]
    path.reverse()
    return path


def _chain_for_cycle(
    g: TemporalGraph,
    cycle_edges: list[tuple[str, str]],
    adj: dict[str, set[str]],
) -> tuple[WitnessStep, ...]:
    """Interleave the asserted BEFORE edges of a component cycle with the
    asserted OVERLAP steps that bridge them; the whole chain composes to
    BEFORE(x, x)."""
    steps: list[WitnessStep] = []
    first_node = cycle_edges[0][0]
    at = first_node
    for a, b in cycle_edges:
        for u, v in _overlap_path(adj, at, a):
            steps.append(WitnessStep(OVERLAP, u, v))
        steps.append(WitnessStep(BEFORE, a, b))
        at = b
    for u, v in _overlap_path(adj, at, first_node):
        steps.append(WitnessStep(OVERLAP, u, v))
    return tuple(steps)


def _component_cycles(
    before_edges: frozenset[tuple[str, str]],
    comp_of: dict[str, str],
) -> list[list[tuple[str, str]]]:
    """Up to the N shortest asserted-edge cycles in the component digraph.

    Each cycle is returned as the list of asserted BEFORE pairs tracing it.
    """
    comp_edges: dict[tuple[str, str], list[tuple[str, str]]] = {}
    succ: dict[str, set[str]] = {}
    for a, b in sorted(before_edges):
        ca, cb = comp_of[a], comp_of[b]
        comp_edges.setdefault((ca, cb), []).append((a, b))
        succ.setdefault(ca, set()).add(cb)

    def shortest_comp_path(start: str, goal: str) -> list[tuple[str, str]] | None:
        # BFS over component edges; path may be empty when start == goal.
        if start == goal:
            return []
        prev: dict[str, str] = {start: start}
        queue = deque([start])
        while queue:
            c = queue.popleft()
            for d in sorted(succ.get(c, ())):
                if d not in prev:
                    prev[d] = c
                    if d == goal:
                        queue.clear()
                        break
                    queue.append(d)
        if goal not in prev:
            return None
        path = []
        node = goal
        while node != start:
            path.append((prev[node], node))
            node = prev[node]
        path.reverse()
        return path

    cycles = []
    seen_signatures = set()
    for (ca, cb), asserted in sorted(comp_edges.items()):
        back = shortest_comp_path(cb, ca)
        if back is None:
            continue
        comp_cycle = [(ca, cb)] + back
        signature = frozenset(comp_cycle)
        if signature in seen_signatures:
            continue
        seen_signatures.add(signature)
        cycle = [asserted[0]]
        for step in back:
            cycle.append(comp_edges[step][0])
        cycles.append(cycle)
    cycles.sort(key=len)
    return cycles[:MAX_WITNESSES_PER_CYCLE_GROUP]


def check_consistency(g: TemporalGraph) -> ConsistencyReport:
    """Consistent iff the BEFORE order on collapsed overlap components is a
    strict partial order, i.e. the component digraph is acyclic with no
    self-loop.  Each witness is a chain of asserted relations that composes
    to BEFORE(x, x)."""
    comp_of, _ = _components(g)
    for a, b in g.before:
        if a == b:
            # Degenerate direct self-order; witness is the single step.
            chain = (WitnessStep(BEFORE, a, a),)
            return ConsistencyReport(consistent=False, witnesses=(chain,))

    cycles = _component_cycles(g.before, comp_of)
    if not cycles:
        return ConsistencyReport(consistent=True)

    adj = _overlap_adjacency(g)
    witnesses = tuple(_chain_for_cycle(g, cycle, adj) for cycle in cycles)
    return ConsistencyReport(consistent=False, witnesses=witnesses)


@dataclass(frozen=True)
class SatisfactionScore:
    score: float
    applicable: int
    satisfied: int

    def to_json(self) -> dict:
        return {
            "score": self.score,
            "applicable": self.applicable,
            "satisfied": self.satisfied,
        }


def _oriented(r: RelationAssertion, source: str, target: str) -> RelationType:
    """Relation read in the direction source -> target."""
    if (r.source, r.target) == (source, target):
        return r.relation_type
    if r.relation_type is OVERLAP:
        return OVERLAP
    return BEFORE if r.relation_type is AFTER else AFTER


def satisfaction_score(
    asserted: list[RelationAssertion],
    count_missing_third: bool = False,
) -> SatisfactionScore:
    """Fraction of dependency instances the asserted set satisfies.

    An instance is a chain r1(A, B), r2(B, C) of asserted relations whose
    composition is determined by the table, where some relation between A
    and C is also asserted; it is satisfied when every asserted (A, C)
    relation, read in that direction, equals the composition.  Vacuously
    1.0 when nothing is applicable.  With count_missing_third, chains with
    no asserted third relation count as violations instead of being skipped.
    """
    for r in asserted:
        if not r.relation_type.is_temporal():
            raise NonTemporalRelationError(r.id, r.relation_type)

    unique = list({(r.relation_type, r.source, r.target): r for r in asserted}.values())
    by_pair: dict[frozenset[str], list[RelationAssertion]] = {}
    for r in unique:
        by_pair.setdefault(frozenset((r.source, r.target)), []).append(r)

    applicable = satisfied = 0
    for r1 in unique:
        for r2 in unique:
            if r1.target != r2.source:
                continue
            a, c = r1.source, r2.target
            if a == c:
                continue
            expected = compose(r1.relation_type, r2.relation_type)
            if expected is UNDETERMINED:
                continue
            thirds = by_pair.get(frozenset((a, c)), [])
            if not thirds:
                if count_missing_third:
                    applicable += 1
                continue
            applicable += 1
            if all(_oriented(r3, a, c) is expected for r3 in thirds):
                satisfied += 1

    score = 1.0 if applicable == 0 else satisfied / applicable
    return SatisfactionScore(score=score, applicable=applicable, satisfied=satisfied)


def topological_timeline(g: TemporalGraph) -> list[list[frozenset[str]]]:
    """Layer overlap components chronologically.

    A component's layer is the length of the longest BEFORE-path reaching it
    from any source, so every BEFORE edge points to a strictly later layer.
    Raises InconsistentGraphError (carrying the report) on inconsistent input.
    """
    report = check_consistency(g)
    if not report.consistent:
        raise InconsistentGraphError(report)

    comp_of, members = _components(g)
    succ = _component_dag(g, comp_of)
    indegree = {c: 0 for c in succ}
    for c, targets in succ.items():
        for t in targets:
            indegree[t] += 1

    layer = {c: 0 for c, d in indegree.items() if d == 0}
    queue = deque(layer)
    pending = dict(indegree)
    while queue:
        c = queue.popleft()
        for t in succ[c]:
            layer[t] = max(layer.get(t, 0), layer[c] + 1)
            pending[t] -= 1
            if pending[t] == 0:
                queue.append(t)

    layers: list[list[frozenset[str]]] = []
    for comp, depth in layer.items():
        while len(layers) <= depth:
            layers.append([])
        layers[depth].append(frozenset(members[comp]))
    for group in layers:
        group.sort(key=lambda c: sorted(c))
    return layers


def closure_triples(g: TemporalGraph) -> list[list[str]]:
    """Closure as sorted ['BEFORE'|'OVERLAP', a, b] triples for JSON/CLI output."""
    triples = [["BEFORE", a, b] for a, b in g.before]
    triples += [["OVERLAP", a, b] for a, b in g.overlap]
    triples.sort()
    return triples


@dataclass(frozen=True)
class ReasoningResult:
    """Bundle produced by the reason entry points (CLI and API)."""

    closure: TemporalGraph
    consistency: ConsistencyReport
    score: SatisfactionScore
    timeline: list[list[frozenset[str]]] | None = None

    def to_json(self, include_score: bool = True, include_timeline: bool = True) -> dict:
        out: dict = {
            "closure": closure_triples(self.closure),
            "consistency": self.consistency.to_json(),
        }
        if include_score:
            out["satisfactionScore"] = self.score.to_json()
        if include_timeline:
            out["timeline"] = (
                None
                if self.timeline is None
                else [[sorted(c) for c in layer] for layer in self.timeline]
            )
        return out


def reason(relations: list[RelationAssertion]) -> ReasoningResult:
    """Normalize, close, check, score, and (when consistent) layer."""
    g = normalize(relations)
    closed = transitive_closure(g)
    report = check_consistency(g)
    score = satisfaction_score(relations)
    timeline = topological_timeline(g) if report.consistent else None
    return ReasoningResult(
        closure=closed, consistency=report, score=score, timeline=timeline
    )
