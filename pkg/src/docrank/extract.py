"""Static extraction of inter-module dependences from Java sources.

Parsing is delegated to :mod:`javalang`; this module turns its syntax tree
into a compact :class:`SourceUnit` (declared types, their attributes,
method signatures and call sites) and then counts the four dependence kinds
per ordered module pair:

* CI -- each resolved ``extends``/``implements`` supertype, 1 per pair.
* CA -- each attribute whose declared type is a project module.
* CM -- each method or constructor having the module as a parameter or
  return type (one per method and target module).
* MM -- each call expression whose receiver's declared type is the module.

Only top-level types become modules.  Nested, local and anonymous classes
contribute their members to the enclosing top-level type.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import javalang
from javalang import tree as jt

from .graph import DependenceGraph

__all__ = [
    "Attribute",
    "CallSite",
    "JavaParseError",
    "MethodDecl",
    "ResolutionTable",
    "SourceUnit",
    "TypeDecl",
    "count_ca",
    "count_ci",
    "count_cm",
    "count_mm",
    "extract_project",
    "graph_from_units",
    "parse_file",
    "parse_project",
    "parse_unit",
]

log = logging.getLogger(__name__)

THIS = "<this>"
SUPER = "<super>"


class JavaParseError(Exception):
    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        location = path or "<source>"
        if line is not None:
            location += f":{line}"
            if column is not None:
                location += f":{column}"
        super().__init__(f"{location}: {message}")


@dataclass(frozen=True)
class CallSite:
    """One call expression.

    ``receiver`` is the access path to the object the method is invoked on.
    Its first element is the declared type name of the base expression
    (``<this>``/``<super>`` for the current object, ``None`` when the base
    has no known declared type).  The remaining elements are member steps,
    ``("field", name)`` or ``("call", name)``, applied before the call.
    When ``static_candidate`` is set the base is a dotted name that did not
    match any variable in scope and may denote a type.
    """

    method: str
    receiver: tuple = (None,)
    static_candidate: bool = False
    line: int | None = None


@dataclass
class Attribute:
    name: str
    type: str
    nested: bool = False


@dataclass
class MethodDecl:
    name: str
    params: list[str]
    return_type: str | None
    constructor: bool = False
    nested: bool = False
    calls: list[CallSite] = field(default_factory=list)


@dataclass
class TypeDecl:
    name: str
    kind: str
    supertypes: list[str] = field(default_factory=list)
    attributes: list[Attribute] = field(default_factory=list)
    methods: list[MethodDecl] = field(default_factory=list)
    # calls in field initializers and initializer blocks
    init_calls: list[CallSite] = field(default_factory=list)
    nested_types: list[str] = field(default_factory=list)
    line: int | None = None


@dataclass
class SourceUnit:
    path: str | None = None
    package: str = ""
    imports: list[str] = field(default_factory=list)
    star_imports: list[str] = field(default_factory=list)
    modules: list[TypeDecl] = field(default_factory=list)

    def qualified(self, simple: str) -> str:
        return f"{self.package}.{simple}" if self.package else simple


# parsing


def type_name(node) -> str | None:
    """Dotted name of a type node with type arguments and array dims dropped.

    Array element types count, so ``D[]`` yields ``D``; ``List<D>`` yields
    ``List``.
    """
    if node is None:
        return None
    if isinstance(node, jt.BasicType):
        return node.name
    parts = []
    while node is not None:
        parts.append(node.name)
        node = getattr(node, "sub_type", None)
    return ".".join(parts)


def _line(node) -> int | None:
    pos = getattr(node, "position", None)
    return pos.line if pos else None


class _Scope:
    def __init__(self, parent: _Scope | None = None):
        self.parent = parent
        self.names: dict[str, str | None] = {}

    def lookup(self, name: str):
        scope = self
        while scope is not None:
            if name in scope.names:
                return True, scope.names[name]
            scope = scope.parent
        return False, None


_BLOCK_NODES = (
    jt.BlockStatement, jt.ForStatement, jt.WhileStatement, jt.DoStatement,
    jt.IfStatement, jt.TryStatement, jt.CatchClause, jt.SwitchStatementCase,
    jt.LambdaExpression, jt.SynchronizedStatement,
)


class _BodyWalker:
    """Walk statements in source order, tracking declared variable types."""

    def __init__(self, decl: TypeDecl, scope: _Scope, sink: list[CallSite], unit_walker: _UnitWalker):
        self.decl = decl
        self.sink = sink
        self.scope = scope
        self.unit_walker = unit_walker

    def declare(self, name: str, type_: str | None) -> None:
        self.scope.names[name] = type_

    def push(self) -> None:
        self.scope = _Scope(self.scope)

    def pop(self) -> None:
        self.scope = self.scope.parent

    def walk(self, node) -> None:
        if node is None:
            return
        if isinstance(node, (list, tuple)):
            for item in node:
                self.walk(item)
            return
        if not isinstance(node, jt.Node):
            return

        if isinstance(node, (jt.ClassDeclaration, jt.InterfaceDeclaration, jt.EnumDeclaration)):
            # local class: members belong to the enclosing module
            self.unit_walker.collect_members(self.decl, node, self.scope, nested=True)
            return

        if isinstance(node, _BLOCK_NODES):
            self.push()
            try:
                self._walk_node(node)
            finally:
                self.pop()
            return
        self._walk_node(node)

    def _walk_node(self, node) -> None:
        if isinstance(node, (jt.LocalVariableDeclaration, jt.VariableDeclaration)):
            t = type_name(node.type)
            for declarator in node.declarators:
                self.walk(declarator.initializer)
                self.declare(declarator.name, t)
            return
        if isinstance(node, jt.FormalParameter) or isinstance(node, jt.CatchClauseParameter):
            if isinstance(node, jt.CatchClauseParameter):
                types = node.types or []
                self.declare(node.name, types[0] if len(types) == 1 else None)
            else:
                self.declare(node.name, type_name(node.type))
            return
        if isinstance(node, jt.InferredFormalParameter):
            self.declare(node.name, None)
            return
        if isinstance(node, jt.TryResource):
            self.walk(node.value)
            self.declare(node.name, type_name(node.type))
            return
        if isinstance(node, jt.LambdaExpression):
            for param in node.parameters or []:
                if isinstance(param, jt.FormalParameter):
                    self.declare(param.name, type_name(param.type))
                elif isinstance(param, (jt.InferredFormalParameter, jt.MemberReference)):
                    self.declare(getattr(param, "name", None) or param.member, None)
            self.walk(node.body)
            return
        if isinstance(node, jt.EnhancedForControl):
            self.walk(node.iterable)
            var = node.var
            t = type_name(var.type)
            for declarator in var.declarators:
                self.declare(declarator.name, t)
            return

        if isinstance(node, (jt.MethodInvocation, jt.SuperMethodInvocation, jt.This,
                             jt.ClassCreator, jt.MemberReference, jt.SuperMemberReference)):
            self._primary(node)
            return
        if isinstance(node, jt.Primary) and node.selectors:
            # literal, cast, parenthesized ... followed by selectors
            self._chain(None, False, node.selectors, node)
            self._walk_children(node, skip=("selectors",))
            return
        self._walk_children(node)

    def _walk_children(self, node, skip=()) -> None:
        for attr in node.attrs:
            if attr in skip:
                continue
            self.walk(getattr(node, attr))

    # call-site recording

    def _base_of_qualifier(self, qualifier: str | None):
        """Return (receiver path, static_candidate) for a dotted qualifier."""
        if not qualifier:
            return [THIS], False
        parts = qualifier.split(".")
        found, t = self.scope.lookup(parts[0])
        if found:
            return [t] + [("field", p) for p in parts[1:]], False
        return [qualifier], True

    def _primary(self, node) -> None:
        line = _line(node)
        if isinstance(node, jt.MethodInvocation):
            base, static = self._base_of_qualifier(node.qualifier)
            self._emit(base, static, node.member, line)
            path = base + [("call", node.member)]
            self.walk(node.arguments)
        elif isinstance(node, jt.SuperMethodInvocation):
            base, static = [SUPER], False
            self._emit(base, static, node.member, line)
            path = base + [("call", node.member)]
            self.walk(node.arguments)
        elif isinstance(node, jt.This):
            path, static = [THIS], False
        elif isinstance(node, jt.SuperMemberReference):
            path, static = [SUPER, ("field", node.member)], False
        elif isinstance(node, jt.ClassCreator):
            path, static = [type_name(node.type)], False
            self.walk(node.arguments)
            if node.body:
                self.unit_walker.collect_body(self.decl, node.body, self.scope, nested=True)
        else:  # MemberReference
            if node.qualifier:
                base, static = self._base_of_qualifier(node.qualifier)
                path = base + [("field", node.member)]
            else:
                found, t = self.scope.lookup(node.member)
                path, static = ([t] if found else [None]), False
        self._chain(path, static, node.selectors or [], node)

    def _chain(self, path, static, selectors, node) -> None:
        for sel in selectors:
            if isinstance(sel, jt.MethodInvocation):
                if path is not None:
                    self._emit(path, static, sel.member, _line(sel) or _line(node))
                    path = path + [("call", sel.member)]
                self.walk(sel.arguments)
            elif isinstance(sel, jt.MemberReference):
                if path is not None:
                    path = path + [("field", sel.member)]
            elif isinstance(sel, jt.ArraySelector):
                self.walk(sel.index)
                path = None
            else:
                self.walk(sel)
                path = None

    def _emit(self, path, static, method, line) -> None:
        self.sink.append(CallSite(method=method, receiver=tuple(path),
                                  static_candidate=static, line=line))


class _UnitWalker:
    def __init__(self, unit: SourceUnit):
        self.unit = unit

    def module(self, node) -> TypeDecl:
        kind = "interface" if isinstance(node, (jt.InterfaceDeclaration, jt.AnnotationDeclaration)) else "class"
        decl = TypeDecl(name=node.name, kind=kind, line=_line(node))
        supers = []
        extends = getattr(node, "extends", None)
        if isinstance(extends, list):
            supers.extend(extends)
        elif extends is not None:
            supers.append(extends)
        supers.extend(getattr(node, "implements", None) or [])
        decl.supertypes = [type_name(s) for s in supers]
        self.collect_members(decl, node, _Scope(), nested=False)
        return decl

    def collect_members(self, decl: TypeDecl, node, outer: _Scope, nested: bool) -> None:
        if nested:
            decl.nested_types.append(node.name)
        body = node.body
        if isinstance(node, jt.EnumDeclaration) and body is not None:
            for constant in body.constants or []:
                if constant.body:
                    self.collect_body(decl, constant.body, outer, nested=True)
            body = body.declarations
        self.collect_body(decl, body or [], outer, nested)

    def collect_body(self, decl: TypeDecl, body, outer: _Scope, nested: bool) -> None:
        scope = _Scope(outer)
        for member in body:
            if isinstance(member, (jt.FieldDeclaration, jt.ConstantDeclaration)):
                t = type_name(member.type)
                for declarator in member.declarators:
                    scope.names[declarator.name] = t
        for member in body:
            if isinstance(member, (jt.FieldDeclaration, jt.ConstantDeclaration)):
                t = type_name(member.type)
                walker = _BodyWalker(decl, scope, decl.init_calls, self)
                for declarator in member.declarators:
                    decl.attributes.append(Attribute(declarator.name, t, nested))
                    walker.walk(declarator.initializer)
            elif isinstance(member, (jt.MethodDeclaration, jt.ConstructorDeclaration)):
                ctor = isinstance(member, jt.ConstructorDeclaration)
                method = MethodDecl(
                    name=member.name,
                    params=[type_name(p.type) for p in member.parameters],
                    return_type=None if ctor else type_name(member.return_type),
                    constructor=ctor,
                    nested=nested,
                )
                walker = _BodyWalker(decl, _Scope(scope), method.calls, self)
                for p in member.parameters:
                    walker.declare(p.name, type_name(p.type))
                walker.walk(member.body)
                decl.methods.append(method)
            elif isinstance(member, (jt.ClassDeclaration, jt.InterfaceDeclaration,
                                     jt.EnumDeclaration, jt.AnnotationDeclaration)):
                self.collect_members(decl, member, scope, nested=True)
            elif isinstance(member, jt.Node):
                # initializer blocks and annotation methods
                _BodyWalker(decl, _Scope(scope), decl.init_calls, self).walk(member)


def parse_unit(text: str, path: str | None = None) -> SourceUnit:
    """Parse one Java compilation unit into a :class:`SourceUnit`."""
    try:
        cu = javalang.parse.parse(text)
    except javalang.tokenizer.LexerError as exc:
        raise JavaParseError(f"lexical error: {exc}", path) from None
    except javalang.parser.JavaSyntaxError as exc:
        at = getattr(exc, "at", None)
        pos = getattr(at, "position", None)
        desc = exc.description or "syntax error"
        if at is not None and not isinstance(at, str):
            desc += f" at {at.value!r}"
        raise JavaParseError(desc, path, pos.line if pos else None,
                             pos.column if pos else None) from None
    except (IndexError, StopIteration, TypeError, AttributeError) as exc:
        raise JavaParseError(f"unsupported syntax ({type(exc).__name__})", path) from None

    unit = SourceUnit(path=path, package=cu.package.name if cu.package else "")
    for imp in cu.imports:
        if imp.static:
            continue
        if imp.wildcard:
            unit.star_imports.append(imp.path)
        else:
            unit.imports.append(imp.path)
    walker = _UnitWalker(unit)
    seen = set()
    for node in cu.types:
        if node.name in seen:
            raise JavaParseError(f"duplicate type {node.name!r}", path, _line(node))
        seen.add(node.name)
        unit.modules.append(walker.module(node))
    return unit


def parse_file(path: str | Path) -> SourceUnit:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise JavaParseError(f"not UTF-8: {exc}", str(path)) from None
    return parse_unit(text, str(path))


# resolution


class ResolutionTable:
    """Maps type names used inside a unit to project module names."""

    def __init__(self, units: Iterable[SourceUnit]):
        self.modules: dict[str, tuple[SourceUnit, TypeDecl]] = {}
        self.by_simple: dict[str, list[str]] = {}
        for unit in units:
            for decl in unit.modules:
                qname = unit.qualified(decl.name)
                if qname in self.modules:
                    log.warning("module %s declared twice; keeping %s", qname,
                                self.modules[qname][0].path)
                    continue
                self.modules[qname] = (unit, decl)
                self.by_simple.setdefault(decl.name, []).append(qname)
        self._return_types: dict[tuple[str, str], str | None] = {}

    def __contains__(self, name: object) -> bool:
        return name in self.modules

    def kind(self, module: str) -> str:
        return self.modules[module][1].kind

    def resolve(self, name: str | None, unit: SourceUnit) -> str | None:
        if not name or name in (THIS, SUPER):
            return None
        if "." in name:
            parts = name.split(".")
            for i in range(len(parts), 0, -1):
                prefix = ".".join(parts[:i])
                if prefix in self.modules:
                    return prefix
            # Outer.Inner where Outer is a simple name in scope
            return self.resolve(parts[0], unit)
        return self._resolve_simple(name, unit)

    def _resolve_simple(self, name: str, unit: SourceUnit) -> str | None:
        for decl in unit.modules:
            if decl.name == name or name in decl.nested_types:
                return unit.qualified(decl.name)
        for imp in unit.imports:
            if imp == name or imp.endswith("." + name):
                # an explicit import decides, even when it points outside the project
                parts = imp.split(".")
                for i in range(len(parts), 0, -1):
                    prefix = ".".join(parts[:i])
                    if prefix in self.modules:
                        return prefix
                return None
        same_package = unit.qualified(name)
        if same_package in self.modules:
            return same_package
        hits = [f"{pkg}.{name}" for pkg in unit.star_imports if f"{pkg}.{name}" in self.modules]
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            return None
        candidates = self.by_simple.get(name, [])
        if len(candidates) == 1:
            return candidates[0]
        return None

    def field_type(self, module: str, name: str) -> str | None:
        unit, decl = self.modules[module]
        types = {a.type for a in decl.attributes if a.name == name and not a.nested}
        if len(types) != 1:
            return None
        return self.resolve(types.pop(), unit)

    def return_type(self, module: str, method: str) -> str | None:
        """Project module returned by ``method`` of ``module``; overloads must agree."""
        key = (module, method)
        if key not in self._return_types:
            unit, decl = self.modules[module]
            types = {m.return_type for m in decl.methods
                     if m.name == method and not m.nested and not m.constructor}
            resolved = None
            if len(types) == 1:
                resolved = self.resolve(types.pop(), unit)
            self._return_types[key] = resolved
        return self._return_types[key]

    def superclass(self, module: str) -> str | None:
        unit, decl = self.modules[module]
        if decl.kind != "class" or not decl.supertypes:
            return None
        # the first supertype of a class is its ``extends`` clause when resolvable as a class
        first = self.resolve(decl.supertypes[0], unit)
        if first is not None and self.kind(first) == "class":
            return first
        return None

    def resolve_receiver(self, site: CallSite, module: str, unit: SourceUnit) -> str | None:
        """Project module whose method ``site`` calls, or ``None``.

        At most one method call may precede the call (one level of
        return-type tracking); field steps follow declared field types.
        """
        base, *steps = site.receiver
        if base == THIS:
            current = module
        elif base == SUPER:
            current = self.superclass(module)
        elif site.static_candidate:
            current, steps = self._static_base(base, unit)
            if current is None:
                return None
        else:
            current = self.resolve(base, unit)
        calls = 0
        for kind, name in steps:
            if current is None:
                return None
            if kind == "field":
                decl = self.modules[current][1]
                if name in decl.nested_types and not any(a.name == name for a in decl.attributes):
                    continue  # Outer.Inner.method(): nested types belong to Outer
                current = self.field_type(current, name)
            else:
                calls += 1
                if calls > 1:
                    return None
                current = self.return_type(current, name)
        return current

    def _static_base(self, dotted: str, unit: SourceUnit):
        parts = dotted.split(".")
        for i in range(len(parts), 0, -1):
            if i == 1:
                resolved = self._resolve_simple(parts[0], unit)
            else:
                prefix = ".".join(parts[:i])
                resolved = prefix if prefix in self.modules else None
            if resolved is not None:
                return resolved, [("field", p) for p in parts[i:]]
        return None, []


# counting


def _owners(unit: SourceUnit):
    for decl in unit.modules:
        yield unit.qualified(decl.name), decl


def count_ci(unit: SourceUnit, table: ResolutionTable) -> list[tuple[str, str]]:
    pairs = []
    for u, decl in _owners(unit):
        seen = set()
        for sup in decl.supertypes:
            v = table.resolve(sup, unit)
            if v is not None and v != u and v not in seen:
                seen.add(v)
                pairs.append((u, v))
    return pairs


def count_ca(unit: SourceUnit, table: ResolutionTable) -> Counter:
    counts = Counter()
    for u, decl in _owners(unit):
        for attr in decl.attributes:
            v = table.resolve(attr.type, unit)
            if v is not None:
                counts[(u, v)] += 1
    return counts


def count_cm(unit: SourceUnit, table: ResolutionTable) -> Counter:
    counts = Counter()
    for u, decl in _owners(unit):
        for method in decl.methods:
            targets = {table.resolve(t, unit) for t in method.params}
            targets.add(table.resolve(method.return_type, unit))
            targets.discard(None)
            for v in targets:
                counts[(u, v)] += 1
    return counts


def count_mm(unit: SourceUnit, table: ResolutionTable) -> Counter:
    counts = Counter()
    for u, decl in _owners(unit):
        sites = list(decl.init_calls)
        for method in decl.methods:
            sites.extend(method.calls)
        for site in sites:
            v = table.resolve_receiver(site, u, unit)
            if v is not None:
                counts[(u, v)] += 1
    return counts


def graph_from_units(units: Iterable[SourceUnit]) -> DependenceGraph:
    units = list(units)
    table = ResolutionTable(units)
    graph = DependenceGraph()
    for name in sorted(table.modules):
        graph.add_node(name, table.kind(name))
    totals: Counter = Counter()
    for unit in units:
        for pair in count_ci(unit, table):
            totals[("ci",) + pair] = 1
        for kind, counter in (("ca", count_ca), ("cm", count_cm), ("mm", count_mm)):
            for pair, n in counter(unit, table).items():
                totals[(kind,) + pair] += n
    for (kind, u, v), n in sorted(totals.items()):
        if u == v or u not in graph or v not in graph:
            continue
        graph.add_dependence(u, v, kind, n)
    return graph


def parse_project(root: str | Path, strict: bool = False):
    """Parse every ``.java`` file under ``root``.

    Returns ``(units, errors)``.  With ``strict`` the first parse error is
    raised instead of collected.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"{root} is not a directory")
    units, errors = [], []
    for path in sorted(root.rglob("*.java")):
        if not path.is_file():
            continue
        try:
            units.append(parse_file(path))
        except JavaParseError as exc:
            if strict:
                raise
            log.warning("skipping %s", exc)
            errors.append(exc)
    return units, errors


def extract_project(root: str | Path, strict: bool = False) -> DependenceGraph:
    units, _ = parse_project(root, strict=strict)
    return graph_from_units(units)
