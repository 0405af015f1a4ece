"""Deferred acceptance, reduced candidate lists, rotations, and their digraph.

This module implements the structure theory of stable matchings.  Running
deferred acceptance in both directions with full deletions leaves every
agent with a reduced candidate list (the classic GS-lists) spanning exactly
the range of partners the agent can have across stable matchings.  Starting
from the men-optimal matching, a *rotation* is a cyclic sequence of matched
pairs in which each man's second list entry is the next man's partner;
eliminating it moves every man in the cycle one step down and every woman
one step up.  Repeated elimination walks the whole lattice of stable
matchings and discovers every rotation exactly once.

``build_rotation_digraph`` adds the sparse precedence edges between
rotations.  Closed subsets of that digraph (sets containing all their
predecessors) are in bijection with stable matchings, which is what the
optimizers in :mod:`robustmatch.stable_opt` exploit.

Deletions are symmetric throughout: a woman is on a man's list iff he is on
hers.  Both reduction directions are needed; one-sided deferred acceptance
leaves stray pairs behind (for example pairs involving agents that stay
single in every stable matching), and those would mask rotations.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import InternalError, ValidationError
from .model import Instance, Matching

MEN = "men"
WOMEN = "women"


@dataclass(frozen=True)
class Rotation:
    """A cyclic sequence of (man, woman) pairs, at least two pairs long.

    The cycle is stored rotated so that the lexicographically smallest man
    comes first; two rotations are equal iff they contain the same pairs.
    `index` is the position in enumeration order and is ignored by equality.
    """

    pairs: tuple[tuple[str, str], ...]
    index: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.pairs) < 2:
            raise ValidationError("a rotation needs at least two pairs")
        men = [m for m, _ in self.pairs]
        women = [w for _, w in self.pairs]
        if len(set(men)) != len(men) or len(set(women)) != len(women):
            raise ValidationError("rotation pairs must have distinct men and women")
        if self.pairs[0][0] != min(men):
            raise ValidationError("rotation not in canonical order (smallest man first)")

    @classmethod
    def from_cycle(
        cls, pairs: Iterable[tuple[str, str]], index: int | None = None
    ) -> "Rotation":
        seq = list(pairs)
        k = min(range(len(seq)), key=lambda i: seq[i][0])
        return cls(tuple(seq[k:] + seq[:k]), index)

    @property
    def men(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.pairs)

    @property
    def women(self) -> tuple[str, ...]:
        return tuple(w for _, w in self.pairs)

    def moves(self) -> tuple[tuple[str, str, str], ...]:
        """(agent, old partner, new partner) for every member of the cycle."""
        r = len(self.pairs)
        out = []
        for k, (m, w) in enumerate(self.pairs):
            out.append((m, w, self.pairs[(k + 1) % r][1]))
            out.append((w, m, self.pairs[(k - 1) % r][0]))
        return tuple(out)

    def __str__(self) -> str:
        inner = ", ".join(f"({m}, {w})" for m, w in self.pairs)
        return f"rho[{inner}]"


@dataclass(frozen=True)
class Shortlists:
    """A snapshot of the reduced candidate lists plus the matching they carry.

    Men's lists start at their current partner; women's lists end at theirs.
    Agents that are single in every stable matching have empty lists.
    """

    instance: Instance
    lists: Mapping[str, tuple[str, ...]]
    matching: Matching


class _State:
    """Mutable index-level elimination state.

    Men's lists are static arrays with tombstones and a path-compressed
    "next alive" skip array (their heads only ever advance).  Women's lists
    only ever shrink from the tail, so a tail pointer suffices; everything
    before it is alive.
    """

    __slots__ = (
        "inst", "men", "women", "marr", "mpos", "warr", "wpos",
        "mdead", "mskip", "wtail", "mpart", "wpart",
    )

    def __init__(self, inst, men, women, marr, mpos, warr, wpos,
                 mdead, mskip, wtail, mpart, wpart):
        self.inst = inst
        self.men = men
        self.women = women
        self.marr = marr
        self.mpos = mpos
        self.warr = warr
        self.wpos = wpos
        self.mdead = mdead
        self.mskip = mskip
        self.wtail = wtail
        self.mpart = mpart
        self.wpart = wpart

    @classmethod
    def fresh(cls, inst, men, women, marr, warr, mpart, wpart) -> "_State":
        mpos = [{j: k for k, j in enumerate(row)} for row in marr]
        wpos = [{i: k for k, i in enumerate(row)} for row in warr]
        mdead = [bytearray(len(row)) for row in marr]
        mskip = [list(range(1, len(row) + 1)) for row in marr]
        wtail = [len(row) - 1 for row in warr]
        return cls(inst, men, women, marr, mpos, warr, wpos,
                   mdead, mskip, wtail, list(mpart), list(wpart))

    def copy(self) -> "_State":
        return _State(
            self.inst, self.men, self.women, self.marr, self.mpos,
            self.warr, self.wpos,
            [bytearray(d) for d in self.mdead],
            [list(s) for s in self.mskip],
            list(self.wtail), list(self.mpart), list(self.wpart),
        )

    def _next_alive(self, i: int, pos: int) -> int:
        """Smallest alive position >= pos in man i's array (len(row) if none)."""
        dead = self.mdead[i]
        skip = self.mskip[i]
        n = len(dead)
        chain = []
        while pos < n and dead[pos]:
            chain.append(pos)
            pos = skip[pos]
        for c in chain:
            skip[c] = pos
        return pos

    def _succ(self, i: int) -> int | None:
        """The man holding man i's second list entry, or None."""
        row = self.marr[i]
        first = self._next_alive(i, 0)
        if first >= len(row) or row[first] != self.mpart[i]:
            return None
        second = self._next_alive(i, first + 1)
        if second >= len(row):
            return None
        nxt = self.wpart[row[second]]
        if nxt < 0:
            raise InternalError("second list entry of a matched man is single")
        return nxt

    def exposed_cycles(self) -> list[list[tuple[int, int]]]:
        """All exposed rotations as index-level (man, woman) cycles.

        Cycles are rotated to start at their smallest man and reported in
        order of that man.
        """
        color = bytearray(len(self.men))
        cycles = []
        for start in range(len(self.men)):
            if color[start]:
                continue
            path: list[int] = []
            cur: int | None = start
            while cur is not None and color[cur] != 2:
                if color[cur] == 1:
                    k = path.index(cur)
                    cycles.append(path[k:])
                    break
                color[cur] = 1
                path.append(cur)
                cur = self._succ(cur)
            for node in path:
                color[node] = 2
        out = []
        for cyc in sorted(cycles, key=min):
            k = cyc.index(min(cyc))
            cyc = cyc[k:] + cyc[:k]
            out.append([(i, self.mpart[i]) for i in cyc])
        return out

    def is_exposed(self, cycle: list[tuple[int, int]]) -> bool:
        r = len(cycle)
        for k, (i, j) in enumerate(cycle):
            row = self.marr[i]
            first = self._next_alive(i, 0)
            if first >= len(row) or row[first] != j or self.mpart[i] != j:
                return False
            second = self._next_alive(i, first + 1)
            if second >= len(row) or row[second] != cycle[(k + 1) % r][1]:
                return False
        return True

    def eliminate(self, cycle: list[tuple[int, int]]) -> list[tuple[int, int]]:
        """Eliminate an exposed rotation in place; returns the deleted pairs.

        Each man moves to his second entry, each woman to the previous man in
        the cycle; every woman then drops everyone she ranks strictly below
        her new partner (and the dropped men lose her symmetrically), which
        covers the rotation's own old pairs.
        """
        if not self.is_exposed(cycle):
            raise ValidationError("rotation is not exposed in these shortlists")
        r = len(cycle)
        for k, (i, _) in enumerate(cycle):
            j_new = cycle[(k + 1) % r][1]
            self.mpart[i] = j_new
            self.wpart[j_new] = i
        deleted: list[tuple[int, int]] = []
        for k in range(r):
            j = cycle[(k + 1) % r][1]
            keep = self.wpos[j][cycle[k][0]]
            while self.wtail[j] > keep:
                q = self.warr[j][self.wtail[j]]
                self.wtail[j] -= 1
                self.mdead[q][self.mpos[q][j]] = 1
                deleted.append((q, j))
        for i, _ in cycle:
            first = self._next_alive(i, 0)
            if first >= len(self.marr[i]) or self.marr[i][first] != self.mpart[i]:
                raise InternalError("man's list head disagrees with his new partner")
        return deleted

    def matching(self) -> Matching:
        part = {a: a for a in self.inst.agent_ids}
        for i, j in enumerate(self.mpart):
            if j >= 0:
                part[self.men[i]] = self.women[j]
                part[self.women[j]] = self.men[i]
        return Matching(part)

    def shortlists(self) -> Shortlists:
        lists: dict[str, tuple[str, ...]] = {}
        for i, m in enumerate(self.men):
            dead = self.mdead[i]
            lists[m] = tuple(
                self.women[j] for k, j in enumerate(self.marr[i]) if not dead[k]
            )
        for j, w in enumerate(self.women):
            lists[w] = tuple(self.men[i] for i in self.warr[j][: self.wtail[j] + 1])
        return Shortlists(self.inst, lists, self.matching())


def _extended_da(ppref, rpref, rpos):
    """One proposing side of deferred acceptance with full deletions.

    On accepting a proposal a receiver deletes every strictly worse entry of
    her list, symmetrically.  Because of that, any proposal that survives the
    proposer's skip over deleted entries is automatically acceptable.
    Returns (proposer partners, receiver partners, removed pair set).
    """
    removed: set[tuple[int, int]] = set()
    nxt = [0] * len(ppref)
    hold = [-1] * len(rpref)
    tail = [len(row) - 1 for row in rpref]
    stack = list(range(len(ppref) - 1, -1, -1))
    while stack:
        p = stack.pop()
        row = ppref[p]
        while nxt[p] < len(row) and (p, row[nxt[p]]) in removed:
            nxt[p] += 1
        if nxt[p] >= len(row):
            continue
        r = row[nxt[p]]
        pos = rpos[r][p]
        if hold[r] != -1 and pos > rpos[r][hold[r]]:
            raise InternalError("proposal to a receiver already holding someone better")
        old = hold[r]
        hold[r] = p
        while tail[r] > pos:
            q = rpref[r][tail[r]]
            removed.add((q, r))
            tail[r] -= 1
        if old != -1:
            stack.append(old)
    ppart = [-1] * len(ppref)
    for r, p in enumerate(hold):
        if p != -1:
            ppart[p] = r
    return ppart, list(hold), removed


class _Analysis:
    """Per-instance index machinery: mutual lists, GS-lists, start state."""

    __slots__ = ("inst", "men", "women", "mpref", "wpref", "mposf", "wposf",
                 "start", "mu_men", "mu_women")

    def __init__(self, inst: Instance):
        self.inst = inst
        self.men = inst.men
        self.women = inst.women
        mindex = {m: i for i, m in enumerate(self.men)}
        windex = {w: j for j, w in enumerate(self.women)}

        macc = []
        for m in self.men:
            row = []
            for cand in inst.pref[m]:
                if cand == m:
                    break
                row.append(windex[cand])
            macc.append(row)
        wacc = []
        for w in self.women:
            row = []
            for cand in inst.pref[w]:
                if cand == w:
                    break
                row.append(mindex[cand])
            wacc.append(row)
        msets = [set(row) for row in macc]
        wsets = [set(row) for row in wacc]
        self.mpref = [
            [j for j in row if i in wsets[j]] for i, row in enumerate(macc)
        ]
        self.wpref = [
            [i for i in row if j in msets[i]] for j, row in enumerate(wacc)
        ]
        self.mposf = [{j: k for k, j in enumerate(row)} for row in self.mpref]
        self.wposf = [{i: k for k, i in enumerate(row)} for row in self.wpref]

        mpart_m, wpart_m, removed_m = _extended_da(self.mpref, self.wpref, self.wposf)
        wpart_f, mpart_f, removed_f = _extended_da(self.wpref, self.mpref, self.mposf)
        removed = removed_m | {(m, w) for (w, m) in removed_f}

        glists_m = [
            tuple(j for j in row if (i, j) not in removed)
            for i, row in enumerate(self.mpref)
        ]
        glists_w = [
            tuple(i for i in row if (i, j) not in removed)
            for j, row in enumerate(self.wpref)
        ]
        for i, row in enumerate(glists_m):
            if (mpart_m[i] == -1) != (len(row) == 0) or (row and row[0] != mpart_m[i]):
                raise InternalError("reduced list of a man out of step with deferred acceptance")
            if (mpart_m[i] == -1) != (mpart_f[i] == -1):
                raise InternalError("sets of matched agents differ between the two optima")
        for j, row in enumerate(glists_w):
            if (wpart_m[j] == -1) != (len(row) == 0) or (row and row[-1] != wpart_m[j]):
                raise InternalError("reduced list of a woman out of step with deferred acceptance")

        self.start = _State.fresh(
            inst, self.men, self.women, glists_m, glists_w, mpart_m, wpart_m
        )
        self.mu_men = self.start.matching()
        part = {a: a for a in inst.agent_ids}
        for i, j in enumerate(mpart_f):
            if j >= 0:
                part[self.men[i]] = self.women[j]
                part[self.women[j]] = self.men[i]
        self.mu_women = Matching(part)


def propose_da(instance: Instance, side: str = MEN) -> tuple[Matching, Shortlists]:
    """Run deferred acceptance; returns the side-optimal matching and shortlists.

    The candidate lists are the fully reduced ones (both directions of
    deletions applied), so they are the same for either side; the shortlists
    returned for ``side="men"`` are the start state of the rotation
    machinery.  A proposer who runs out of candidates above self stays single.
    """
    if side not in (MEN, WOMEN):
        raise ValidationError(f"side must be {MEN!r} or {WOMEN!r}")
    analysis = _Analysis(instance)
    if side == MEN:
        return analysis.mu_men, analysis.start.shortlists()
    sl = analysis.start.shortlists()
    return analysis.mu_women, Shortlists(instance, sl.lists, analysis.mu_women)


def _state_from_shortlists(sl: Shortlists) -> _State:
    inst = sl.instance
    men, women = inst.men, inst.women
    mindex = {m: i for i, m in enumerate(men)}
    windex = {w: j for j, w in enumerate(women)}
    for agent in inst.agent_ids:
        if agent not in sl.lists:
            raise ValidationError(f"shortlists missing agent {agent!r}")
    for m in men:
        for w in sl.lists[m]:
            if m not in sl.lists[w]:
                raise ValidationError(f"shortlists not symmetric at ({m!r}, {w!r})")
    for w in women:
        for m in sl.lists[w]:
            if w not in sl.lists[m]:
                raise ValidationError(f"shortlists not symmetric at ({m!r}, {w!r})")
    marr = [[windex[w] for w in sl.lists[m]] for m in men]
    warr = [[mindex[m] for m in sl.lists[w]] for w in women]
    mpart = [-1] * len(men)
    wpart = [-1] * len(women)
    for i, m in enumerate(men):
        mate = sl.matching.partner(m)
        if mate != m:
            mpart[i] = windex[mate]
            wpart[windex[mate]] = i
    return _State.fresh(inst, men, women, marr, warr, mpart, wpart)


def _rotation_from_cycle(state: _State, cycle, index=None) -> Rotation:
    return Rotation.from_cycle(
        [(state.men[i], state.women[j]) for i, j in cycle], index
    )


def exposed_rotations(shortlists: Shortlists) -> tuple[Rotation, ...]:
    """All rotations currently exposed, sorted by their smallest man."""
    state = _state_from_shortlists(shortlists)
    return tuple(_rotation_from_cycle(state, cyc) for cyc in state.exposed_cycles())


def eliminate_rotation(shortlists: Shortlists, rotation: Rotation) -> Shortlists:
    """Eliminate an exposed rotation, returning the next state."""
    state = _state_from_shortlists(shortlists)
    windex = {w: j for j, w in enumerate(state.women)}
    mindex = {m: i for i, m in enumerate(state.men)}
    cycle = [(mindex[m], windex[w]) for m, w in rotation.pairs]
    state.eliminate(cycle)
    return state.shortlists()


@dataclass(frozen=True)
class RotationEnumeration:
    """Every rotation of an instance, with per-pair bookkeeping.

    - ``move_to[(m, w)]``: the rotation whose elimination pairs m with w
    - ``move_from[(m, w)]``: the rotation containing the pair (m, w)
    - ``removed_by[(m, w)]``: the rotation whose elimination deleted the pair
      from the candidate lists (a superset of ``move_from``'s keys)
    """

    rotations: tuple[Rotation, ...]
    move_to: Mapping[tuple[str, str], Rotation]
    move_from: Mapping[tuple[str, str], Rotation]
    removed_by: Mapping[tuple[str, str], Rotation]


def _enumerate(analysis: _Analysis):
    """Walk one maximal elimination chain, which meets every rotation once."""
    state = analysis.start.copy()
    rotations: list[Rotation] = []
    cycles: list[list[tuple[int, int]]] = []
    move_to: dict[tuple[str, str], Rotation] = {}
    move_from: dict[tuple[str, str], Rotation] = {}
    removed_by: dict[tuple[str, str], Rotation] = {}
    while True:
        batch = state.exposed_cycles()
        if not batch:
            break
        for cyc in batch:
            rot = _rotation_from_cycle(state, cyc, index=len(rotations))
            for m, w_old, w_new in zip(rot.men, rot.women, rot.women[1:] + rot.women[:1]):
                move_from[(m, w_old)] = rot
                move_to[(m, w_new)] = rot
            for q, j in state.eliminate(cyc):
                key = (state.men[q], state.women[j])
                if key in removed_by:
                    raise InternalError(f"pair {key} deleted twice")
                removed_by[key] = rot
            rotations.append(rot)
            cycles.append(cyc)
    if state.matching() != analysis.mu_women:
        raise InternalError("elimination chain did not end at the women-optimal matching")
    return tuple(rotations), cycles, move_to, move_from, removed_by


def enumerate_rotations(instance: Instance) -> RotationEnumeration:
    """Discover every rotation of the instance exactly once."""
    rotations, _, move_to, move_from, removed_by = _enumerate(_Analysis(instance))
    return RotationEnumeration(rotations, move_to, move_from, removed_by)


class RotationDigraph:
    """Sparse precedence digraph over the rotations of one instance.

    An edge ``a -> b`` means rotation ``a`` must be eliminated before ``b``
    can be exposed; the transitive closure of these edges is the full
    precedence order.  Closed subsets (all predecessors present) correspond
    one-to-one with stable matchings via :meth:`matching_of`.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        analysis = _Analysis(instance)
        rotations, cycles, move_to, move_from, removed_by = _enumerate(analysis)
        self.rotations = rotations
        self.enumeration = RotationEnumeration(rotations, move_to, move_from, removed_by)
        self._analysis = analysis
        self._cycles = cycles

        edges: set[tuple[int, int]] = set()
        for key, giver in move_to.items():
            taker = move_from.get(key)
            if taker is not None:
                edges.add((giver.index, taker.index))
        mindex = {m: i for i, m in enumerate(analysis.men)}
        windex = {w: j for j, w in enumerate(analysis.women)}
        for rot in rotations:
            for m, w_old, w_new in zip(rot.men, rot.women, rot.women[1:] + rot.women[:1]):
                i = mindex[m]
                row = analysis.mpref[i]
                for pos in range(analysis.mposf[i][windex[w_old]] + 1,
                                 analysis.mposf[i][windex[w_new]]):
                    key = (m, analysis.women[row[pos]])
                    blocker = removed_by.get(key)
                    if blocker is not None:
                        edges.add((blocker.index, rot.index))
        for a, b in edges:
            if a >= b:
                raise InternalError("precedence edge against discovery order")
        self.edges: frozenset[tuple[int, int]] = frozenset(edges)
        n = len(rotations)
        self.predecessors: list[tuple[int, ...]] = [()] * n
        self.successors: list[tuple[int, ...]] = [()] * n
        preds: list[list[int]] = [[] for _ in range(n)]
        succs: list[list[int]] = [[] for _ in range(n)]
        for a, b in sorted(edges):
            preds[b].append(a)
            succs[a].append(b)
        self.predecessors = [tuple(p) for p in preds]
        self.successors = [tuple(s) for s in succs]

    @property
    def men_optimal(self) -> Matching:
        return self._analysis.mu_men

    @property
    def women_optimal(self) -> Matching:
        return self._analysis.mu_women

    def topological_order(self) -> tuple[int, ...]:
        """Discovery order is a linear extension of the precedence order."""
        return tuple(range(len(self.rotations)))

    def transitive_closure(self) -> frozenset[tuple[int, int]]:
        n = len(self.rotations)
        reach: list[set[int]] = [set() for _ in range(n)]
        for a in range(n - 1, -1, -1):
            for b in self.successors[a]:
                reach[a].add(b)
                reach[a] |= reach[b]
        return frozenset((a, b) for a in range(n) for b in reach[a])

    def _indices(self, subset: Iterable[Rotation | int]) -> set[int]:
        lookup = {rot: rot.index for rot in self.rotations}
        out = set()
        for item in subset:
            if isinstance(item, Rotation):
                if item not in lookup:
                    raise ValidationError(f"{item} is not a rotation of this instance")
                out.add(lookup[item])
            else:
                if not 0 <= item < len(self.rotations):
                    raise ValidationError(f"rotation index {item} out of range")
                out.add(item)
        return out

    def is_closed(self, subset: Iterable[Rotation | int]) -> bool:
        chosen = self._indices(subset)
        return all(set(self.predecessors[i]) <= chosen for i in chosen)

    def closed_subsets(self) -> Iterator[frozenset[int]]:
        """All closed subsets, breadth-first from the empty set."""
        n = len(self.rotations)
        seen = {frozenset()}
        queue = deque([frozenset()])
        while queue:
            current = queue.popleft()
            yield current
            for i in range(n):
                if i not in current and set(self.predecessors[i]) <= current:
                    grown = current | {i}
                    if grown not in seen:
                        seen.add(grown)
                        queue.append(grown)

    def matching_of(self, subset: Iterable[Rotation | int]) -> Matching:
        """The stable matching reached by eliminating a closed subset."""
        chosen = self._indices(subset)
        for i in chosen:
            if not set(self.predecessors[i]) <= chosen:
                raise ValidationError("subset is not closed under predecessors")
        state = self._analysis.start.copy()
        for i in sorted(chosen):
            try:
                state.eliminate(self._cycles[i])
            except ValidationError as exc:
                raise InternalError(
                    f"closed subset replay failed at rotation {i}: {exc}"
                ) from exc
        return state.matching()


def build_rotation_digraph(instance: Instance) -> RotationDigraph:
    return RotationDigraph(instance)


def matching_of_closed_subset(
    instance: Instance, subset: Iterable[Rotation | int]
) -> Matching:
    """Eliminate a predecessor-closed rotation set from the men-optimal state."""
    return RotationDigraph(instance).matching_of(subset)
