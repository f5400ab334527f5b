"""Causal structures: exogeneity classes, a transient class and class-level edges."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ContractError


def _group(members) -> tuple[str, ...]:
    return tuple(str(x) for x in members)


@dataclass(frozen=True)
class CausalStructure:
    """Partition of variables into exogeneity classes and a transient class.

    Attributes
    ----------
    classes
        Disjoint groups of mutually influencing variables, each exogenous to
        everything outside it.
    transient
        Variables whose influence dies out (possibly empty).
    edges
        Directed class-level relations ``(source, target)``. A source is
        always one of ``classes``; a target is another class or the whole
        transient set.
    sub
        Optional structure discovered inside ``transient`` when the analysis
        is repeated with the effective classes as exogenous regressors.
    """

    classes: tuple[tuple[str, ...], ...]
    transient: tuple[str, ...] = ()
    edges: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...] = ()
    sub: "CausalStructure | None" = None
    names: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        classes = tuple(_group(c) for c in self.classes)
        transient = _group(self.transient)
        edges = tuple((_group(s), _group(t)) for s, t in self.edges)
        if any(len(c) == 0 for c in classes):
            raise ContractError("exogeneity classes must be non-empty")
        seen: list[str] = [x for c in classes for x in c] + list(transient)
        if len(seen) != len(set(seen)):
            raise ContractError("classes and transient set must be disjoint")
        names = tuple(self.names) or tuple(seen)
        if set(names) != set(seen) or len(names) != len(seen):
            raise ContractError("classes and transient set must partition the variables")
        class_sets = {frozenset(c) for c in classes}
        for s, t in edges:
            if frozenset(s) not in class_sets:
                raise ContractError(f"edge source {list(s)} is not an exogeneity class")
            if frozenset(t) not in class_sets and set(t) != set(transient):
                raise ContractError(f"edge target {list(t)} is neither a class nor the transient set")
            if set(s) == set(t):
                raise ContractError("self edges are not allowed")
        if self.sub is not None and set(self.sub.names) != set(transient):
            raise ContractError("a sub-structure must partition the transient set")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "transient", transient)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "names", names)

    @property
    def k(self) -> int:
        return len(self.classes)

    def class_of(self, name: str) -> int | None:
        for s, c in enumerate(self.classes):
            if name in c:
                return s
        if name in self.transient:
            return None
        raise ContractError(f"unknown variable {name!r}")

    def class_index(self, source) -> int:
        """Resolve a class given by position, a member name, or its member list."""
        if isinstance(source, int):
            if not 0 <= source < self.k:
                raise ContractError(f"class index {source} out of range")
            return source
        if isinstance(source, str):
            s = self.class_of(source)
            if s is None:
                raise ContractError(f"{source!r} is transient, not in a class")
            return s
        want = set(source)
        for s, c in enumerate(self.classes):
            if set(c) == want:
                return s
        raise ContractError(f"{sorted(want)} is not a class of this structure")

    def relations(self) -> frozenset:
        """Class memberships and directed edges as hashable items, recursively.

        Sub-structures contribute only when they split the transient set.
        """
        out = set()
        self._collect(out, ())
        return frozenset(out)

    def _collect(self, out: set, depth: tuple) -> None:
        for c in self.classes:
            out.add(("class", depth, frozenset(c)))
        if self.transient:
            out.add(("transient", depth, frozenset(self.transient)))
        for s, t in self.edges:
            out.add(("edge", depth, frozenset(s), frozenset(t)))
        if self.sub is not None and not self.sub.is_trivial():
            self.sub._collect(out, depth + (frozenset(self.transient),))

    def is_trivial(self) -> bool:
        """True when the structure is a single class with no transient part."""
        return self.k <= 1 and not self.transient

    def to_dict(self) -> dict:
        return {
            "classes": [list(c) for c in self.classes],
            "transient": list(self.transient),
            "edges": [{"from": list(s), "to": list(t)} for s, t in self.edges],
            "sub": None if self.sub is None else self.sub.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CausalStructure":
        try:
            sub = data.get("sub")
            return cls(
                classes=tuple(tuple(c) for c in data["classes"]),
                transient=tuple(data.get("transient", ())),
                edges=tuple((tuple(e["from"]), tuple(e["to"])) for e in data.get("edges", ())),
                sub=None if sub is None else cls.from_dict(sub),
            )
        except (KeyError, TypeError) as exc:
            raise ContractError(f"malformed structure document: {exc}") from None
