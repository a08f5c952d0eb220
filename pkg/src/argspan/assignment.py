"""Slot-to-gold bipartite matching and the matching loss.

During training each role's decoded slot spans are paired with that
role's gold spans under an L1 span distance, using an optimal assignment.
Missing golds are padded with the no-answer span (0,0) so every slot
always receives a target; surplus golds simply lose (only the best-matched
ones supervise).  The matched targets then feed a per-slot cross-entropy.

Inference never touches this module.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Tensor
from .inference import greedy_span

SpanPair = tuple[int, int]
NO_ANSWER: SpanPair = (0, 0)


class MatchingError(ValueError):
    pass


# -- optimal assignment ---------------------------------------------------


def _solve_value(cost: list[list[float]]) -> float:
    """Minimum total cost of an injective matching covering the smaller side.

    Potentials-based shortest-augmenting-path method, O(n^2 m) with
    n = min side.  Used both for the headline solve and for the many small
    subproblem solves inside the deterministic tie-break.
    """
    if not cost or not cost[0]:
        return 0.0
    n, m = len(cost), len(cost[0])
    if n > m:
        cost = [[cost[i][j] for i in range(n)] for j in range(m)]
        n, m = m, n
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j] = row matched to column j (1-based), 0 = free
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = -1
            row = cost[i0 - 1]
            ui = u[i0]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return sum(cost[p[j] - 1][j - 1] for j in range(1, m + 1) if p[j])


def hungarian(cost) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost injective matching covering the smaller side of ``cost``.

    Returns (pairs, total) where pairs is a (row, col) list sorted by row.
    Among all optimal matchings the one whose row-sorted pair sequence is
    lexicographically smallest is returned, which makes results fully
    deterministic even under ties.
    """
    rows = [list(map(float, r)) for r in cost]
    if not rows or not rows[0]:
        raise MatchingError("cost matrix must be non-empty")
    n, m = len(rows), len(rows[0])
    if any(len(r) != m for r in rows):
        raise MatchingError("cost matrix rows have unequal lengths")
    flat = [x for r in rows for x in r]
    if not all(x == x and abs(x) != float("inf") for x in flat):
        raise MatchingError("cost matrix entries must be finite")

    total = _solve_value(rows)
    tol = 1e-9 * max(1.0, max(abs(x) for x in flat))
    n_pairs = min(n, m)

    pairs: list[tuple[int, int]] = []
    free_cols = list(range(m))
    row_floor = 0
    acc = 0.0
    for t in range(n_pairs):
        chosen = None
        # Leave enough rows below the candidate for the remaining pairs.
        for r in range(row_floor, n - (n_pairs - t - 1)):
            for c in free_cols:
                rest_cols = [x for x in free_cols if x != c]
                rest = [[rows[i][j] for j in rest_cols] for i in range(r + 1, n)]
                rest_val = _solve_value(rest) if rest_cols else 0.0
                if acc + rows[r][c] + rest_val <= total + tol:
                    chosen = (r, c)
                    break
            if chosen:
                break
        if chosen is None:  # unreachable for a correct solver; guards float drift
            raise MatchingError("tie-break refinement failed to extend the matching")
        pairs.append(chosen)
        acc += rows[chosen[0]][chosen[1]]
        row_floor = chosen[0] + 1
        free_cols.remove(chosen[1])
    return pairs, total


# -- role-level matching --------------------------------------------------


@dataclass(frozen=True)
class SpanAssignment:
    """One role's slot/gold pairing.

    ``pairs[k] = (k, gold_index or None)`` in slot order; None marks a
    padding target.  ``targets[k]`` is the span slot k must predict —
    either a gold span or the no-answer pad (0,0).
    """

    role: str
    pairs: tuple[tuple[int, int | None], ...]
    targets: tuple[SpanPair, ...]
    total_cost: float


def pad_gold(gold: list[SpanPair], m: int) -> list[SpanPair]:
    """Pad short gold lists with no-answer spans up to the slot count.

    Over-length lists are returned unchanged: the matcher keeps only the
    best-matched golds in that case.
    """
    if m < 1:
        raise MatchingError(f"slot count must be >= 1, got {m}")
    if len(gold) >= m:
        return list(gold)
    return list(gold) + [NO_ANSWER] * (m - len(gold))


def span_l1(a: SpanPair, b: SpanPair) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def match_role(preds: list[SpanPair], gold: list[SpanPair], role: str = "") -> SpanAssignment:
    """Optimally pair decoded slot spans with (padded) gold spans under L1 cost."""
    if not preds:
        raise MatchingError(f"role {role!r} has no slots")
    padded = pad_gold(gold, len(preds))
    cost = [[span_l1(g, p) for p in preds] for g in padded]
    pairs, total = hungarian(cost)
    by_slot: dict[int, int] = {col: row for row, col in pairs}
    out_pairs = []
    targets = []
    for k in range(len(preds)):
        row = by_slot.get(k)
        if row is None:
            # Only possible when gold overflows the slots; unmatched slots
            # cannot happen because padding makes the matrix square.
            raise MatchingError(f"slot {k} of role {role!r} left unmatched")
        gold_index = row if row < len(gold) else None
        out_pairs.append((k, gold_index))
        targets.append(padded[row])
    return SpanAssignment(role=role, pairs=tuple(out_pairs), targets=tuple(targets), total_cost=total)


def fixed_order_assignment(preds: list[SpanPair], gold: list[SpanPair], role: str = "") -> SpanAssignment:
    """Ablation pairing: gold spans meet slots in annotation order.

    Gold is padded with (0,0) or truncated to the slot count; no matching
    is performed.
    """
    if not preds:
        raise MatchingError(f"role {role!r} has no slots")
    m = len(preds)
    targets = (gold + [NO_ANSWER] * m)[:m]
    pairs = tuple((k, k if k < len(gold) else None) for k in range(m))
    total = float(sum(span_l1(t, p) for t, p in zip(targets, preds)))
    return SpanAssignment(role=role, pairs=pairs, targets=tuple(targets), total_cost=total)


# -- losses ---------------------------------------------------------------


def slot_loss(start_logits, end_logits, target: SpanPair) -> Tensor:
    """Cross-entropy of one slot against its assigned span, averaged over ends.

    loss = (-log softmax(start)[s] - log softmax(end)[e]) / 2
    """
    start_t = start_logits if isinstance(start_logits, Tensor) else Tensor(start_logits)
    end_t = end_logits if isinstance(end_logits, Tensor) else Tensor(end_logits)
    s, e = target
    if not (0 <= s < start_t.data.shape[0] and 0 <= e < end_t.data.shape[0]):
        raise MatchingError(f"target span {target} out of range for logits of length {start_t.data.shape[0]}")
    return ad.scale(ad.add(ad.nll_of_index(start_t, s), ad.nll_of_index(end_t, e)), 0.5)


def _event_slot_losses(
    outputs,
    layout,
    gold_by_role: dict[str, list[SpanPair]],
    mode: str = "bipartite",
    max_span_len: int = 10,
    blocked: tuple[int, ...] = (0,),
    frozen: dict[str, SpanAssignment] | None = None,
) -> tuple[list[Tensor], dict[str, SpanAssignment]]:
    slot_indices: dict[str, list[int]] = {}
    for idx, slot in enumerate(layout.slots):
        slot_indices.setdefault(slot.role, []).append(idx)
    losses: list[Tensor] = []
    assignments: dict[str, SpanAssignment] = {}
    for role, indices in slot_indices.items():
        gold = list(gold_by_role.get(role, []))
        if frozen is not None:
            assn = frozen[role]
        elif mode == "bipartite":
            preds = [
                greedy_span(outputs.start_logits[i].data, outputs.end_logits[i].data, max_span_len, blocked)
                for i in indices
            ]
            assn = match_role(preds, gold, role=role)
        elif mode == "fixed_order":
            preds = [
                greedy_span(outputs.start_logits[i].data, outputs.end_logits[i].data, max_span_len, blocked)
                for i in indices
            ]
            assn = fixed_order_assignment(preds, gold, role=role)
        else:
            raise MatchingError(f"unknown loss mode {mode!r}")
        assignments[role] = assn
        for k, idx in enumerate(indices):
            losses.append(slot_loss(outputs.start_logits[idx], outputs.end_logits[idx], assn.targets[k]))
    return losses, assignments


def event_loss(outputs, layout, gold_by_role, **kwargs) -> tuple[Tensor, dict[str, SpanAssignment]]:
    """Matching loss of a single event: sum of slot losses over all roles."""
    losses, assignments = _event_slot_losses(outputs, layout, gold_by_role, **kwargs)
    return ad.add_n(losses), assignments


def total_loss(
    events: list[tuple],
    mode: str = "bipartite",
    max_span_len: int = 10,
    frozen: list[dict[str, SpanAssignment]] | None = None,
) -> tuple[Tensor, list[dict[str, SpanAssignment]]]:
    """Sum of event losses over a batch, reduced in the given event order.

    ``events`` holds (outputs, layout, gold_by_role, blocked) tuples;
    ``frozen`` optionally fixes each event's assignments (used when
    checking gradients of the loss with the matching held constant).
    """
    if not events:
        raise MatchingError("empty batch")
    all_losses: list[Tensor] = []
    all_assignments: list[dict[str, SpanAssignment]] = []
    for i, (outputs, layout, gold_by_role, blocked) in enumerate(events):
        losses, assn = _event_slot_losses(
            outputs,
            layout,
            gold_by_role,
            mode=mode,
            max_span_len=max_span_len,
            blocked=blocked,
            frozen=frozen[i] if frozen is not None else None,
        )
        all_losses.extend(losses)
        all_assignments.append(assn)
    return ad.add_n(all_losses), all_assignments
