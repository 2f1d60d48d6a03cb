"""Call-graph construction by class-hierarchy analysis.

Static and special calls resolve up the superclass chain to the defining
method; virtual and interface calls additionally fan out to every override
in the app's subtype hierarchy. Calls into tracked API namespaces are not
edges at all (they are counted as instructions by feature extraction), and
invokedynamic has no static target. Anything else that fails to resolve is
recorded as a dangling reference, never dropped.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .model import AppModel, MethodModel
from .vocabulary import InstructionVocabulary

ENTRY_POLICIES = ("all", "public-only")


class MethodRef(NamedTuple):
    owner: str
    name: str
    descriptor: str

    def __str__(self) -> str:
        return f"{self.owner}.{self.name}{self.descriptor}"


@dataclass
class CallGraph:
    nodes: set[MethodRef] = field(default_factory=set)
    edges: dict[MethodRef, set[MethodRef]] = field(default_factory=dict)
    entry_points: set[MethodRef] = field(default_factory=set)
    dangling: set[MethodRef] = field(default_factory=set)

    def edge_set(self) -> set[tuple[MethodRef, MethodRef]]:
        return {(src, dst) for src, dsts in self.edges.items() for dst in dsts}

    def reachable(self) -> set[MethodRef]:
        """Every node with a path from an entry point (entries included)."""
        seen = set(self.entry_points)
        queue = deque(seen)
        while queue:
            node = queue.popleft()
            for nxt in self.edges.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen


class _Hierarchy:
    def __init__(self, app: AppModel):
        self.by_name = {cls.class_name: cls for cls in app.classes}
        self.methods: dict[MethodRef, MethodModel] = {}
        for cls, m in app.methods():
            self.methods[MethodRef(cls.class_name, m.name, m.descriptor)] = m
        # direct subtypes within the app (via extends and implements)
        self.subtypes: dict[str, list[str]] = {}
        for cls in app.classes:
            parents = list(cls.interfaces)
            if cls.super_name:
                parents.append(cls.super_name)
            for parent in parents:
                self.subtypes.setdefault(parent, []).append(cls.class_name)

    def resolve_up(self, owner: str, name: str, descriptor: str) -> MethodRef | None:
        """JVM-style lookup: the owner, then its superclass chain, then interfaces."""
        seen: set[str] = set()
        queue = deque([owner])
        while queue:
            cname = queue.popleft()
            if cname in seen:
                continue
            seen.add(cname)
            ref = MethodRef(cname, name, descriptor)
            if ref in self.methods:
                return ref
            cls = self.by_name.get(cname)
            if cls is None:
                continue
            if cls.super_name:
                queue.append(cls.super_name)
            queue.extend(cls.interfaces)
        return None

    def all_subtypes(self, owner: str) -> Iterable[str]:
        seen: set[str] = set()
        queue = deque([owner])
        while queue:
            cname = queue.popleft()
            for sub in self.subtypes.get(cname, ()):
                if sub not in seen:
                    seen.add(sub)
                    queue.append(sub)
        return seen


def build_call_graph(
    app: AppModel,
    vocab: InstructionVocabulary,
    entry_policy: str = "all",
) -> CallGraph:
    if entry_policy not in ENTRY_POLICIES:
        raise ValueError(f"unknown entry policy {entry_policy!r}")
    hier = _Hierarchy(app)
    graph = CallGraph()
    graph.nodes = set(hier.methods)
    for node in graph.nodes:
        graph.edges[node] = set()

    for cls, m in app.methods():
        src = MethodRef(cls.class_name, m.name, m.descriptor)
        for site in m.call_sites:
            if site.kind == "dynamic":
                continue
            if vocab.slot_of_owner(site.owner) is not None:
                continue  # API call: an instruction, not an edge
            targets: set[MethodRef] = set()
            base = hier.resolve_up(site.owner, site.name, site.descriptor)
            if base is not None:
                targets.add(base)
            if site.kind in ("virtual", "interface"):
                for sub in hier.all_subtypes(site.owner):
                    override = MethodRef(sub, site.name, site.descriptor)
                    if override in hier.methods:
                        targets.add(override)
            if targets:
                graph.edges[src] |= targets
            else:
                graph.dangling.add(MethodRef(site.owner, site.name, site.descriptor))

    if entry_policy == "all":
        graph.entry_points = set(graph.nodes)
    else:
        graph.entry_points = {
            ref for ref, m in hier.methods.items() if m.is_public
        }
    return graph
