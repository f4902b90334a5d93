"""Hierarchically closed linear-model spaces over a small set of factors.

A candidate model is a set of regression terms: main effects ``x1..xk`` and
interactions such as ``x1x2``. Every model contains ``x1``, and any
interaction term implies all of its lower-order sub-terms (hierarchical
closure). Terms are encoded as factor-index bitmasks: bit ``j-1`` set means
factor ``j`` participates in the term.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

from .errors import ConfigurationError

MAX_FACTORS = 5

_TERM_RE = re.compile(r"x(\d+)")


def term_factors(mask: int) -> tuple[int, ...]:
    """Factor indices (1-based, ascending) participating in a term."""
    return tuple(j + 1 for j in range(mask.bit_length()) if mask >> j & 1)


def term_order(mask: int) -> int:
    """1 for a main effect, v for a v-way interaction."""
    return mask.bit_count()


def term_label(mask: int) -> str:
    return "".join(f"x{j}" for j in term_factors(mask))


def _sub_terms(mask):
    """All nonempty proper sub-terms of an interaction term."""
    sub = (mask - 1) & mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


class Complexity(Enum):
    """Outcome of a pairwise model-complexity comparison."""

    MORE_COMPLEX = "more-complex"
    LESS_COMPLEX = "less-complex"
    INDISTINGUISHABLE = "indistinguishable"


@dataclass(frozen=True)
class ModelSpec:
    """A hierarchically closed term set containing the main effect x1.

    ``terms`` holds factor bitmasks. Construction validates the two
    structural invariants; use :func:`hierarchical_closure` to build a model
    from an arbitrary term set.
    """

    terms: frozenset[int]

    def __post_init__(self):
        if not self.terms:
            raise ConfigurationError("a model needs at least one term")
        if 1 not in self.terms:
            raise ConfigurationError("every model must contain the main effect x1")
        for t in self.terms:
            if t <= 0:
                raise ConfigurationError(f"invalid term bitmask {t}")
            for sub in _sub_terms(t):
                if sub not in self.terms:
                    raise ConfigurationError(
                        f"term {term_label(t)} requires {term_label(sub)}: "
                        "model is not hierarchically closed"
                    )

    @property
    def p(self) -> int:
        """Number of regression parameters (terms)."""
        return len(self.terms)

    @cached_property
    def sorted_terms(self) -> tuple[int, ...]:
        """Terms sorted by (interaction order, bitmask)."""
        return tuple(sorted(self.terms, key=lambda t: (term_order(t), t)))

    @cached_property
    def max_order(self) -> int:
        """Order of the highest interaction (1 if main effects only)."""
        return max(term_order(t) for t in self.terms)

    @cached_property
    def top_order_count(self) -> int:
        """How many terms have the highest interaction order."""
        return sum(1 for t in self.terms if term_order(t) == self.max_order)

    @property
    def sort_key(self):
        return (self.p, self.max_order, self.top_order_count, self.sorted_terms)

    def main_effects(self) -> tuple[int, ...]:
        """Factor indices with a main-effect term present."""
        return tuple(term_factors(t)[0] for t in self.sorted_terms if term_order(t) == 1)

    def __str__(self) -> str:
        return format_model(self)

    def __contains__(self, mask: int) -> bool:
        return mask in self.terms


def _check_k(k: int) -> None:
    if not isinstance(k, int) or not 1 <= k <= MAX_FACTORS:
        raise ConfigurationError(
            f"factor count k={k!r} unsupported; expected an integer in 1..{MAX_FACTORS}"
        )


def hierarchical_closure(terms, k: int) -> ModelSpec:
    """Smallest valid model containing ``terms`` (bitmasks) and x1.

    Adds the x1 main effect and every sub-term implied by an interaction.
    Raises if a term references a factor beyond ``k``.
    """
    _check_k(k)
    terms = set(terms)
    if not terms:
        raise ConfigurationError("closure of an empty term set is undefined")
    limit = 1 << k
    for t in terms:
        if not 0 < t < limit:
            raise ConfigurationError(
                f"term {term_label(t) if t > 0 else t} references a factor beyond k={k}"
            )
    closed = {1}
    for t in terms:
        closed.add(t)
        closed.update(_sub_terms(t))
    return ModelSpec(frozenset(closed))


@dataclass(frozen=True)
class ModelSpace:
    """All valid models for ``k`` factors, in canonical simple-to-complex order.

    The order sorts by (parameter count, highest interaction order, count of
    highest-order interactions, term encoding), a total order extending the
    complexity partial order, so model indices are stable across runs and
    usable as matrix coordinates.
    """

    k: int
    models: tuple[ModelSpec, ...]

    @cached_property
    def _index(self) -> dict[frozenset[int], int]:
        return {m.terms: i for i, m in enumerate(self.models)}

    @property
    def L(self) -> int:
        return len(self.models)

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, i: int) -> ModelSpec:
        return self.models[i]

    def index_of(self, model: ModelSpec) -> int:
        try:
            return self._index[model.terms]
        except KeyError:
            raise ConfigurationError(f"model {model} is not in the k={self.k} space") from None

    def find(self, text: str) -> int:
        """Index of the model written as a ``+``-joined term string."""
        return self.index_of(parse_model(text, self.k))

    def labels(self) -> tuple[str, ...]:
        return tuple(str(m) for m in self.models)


def enumerate_models(k: int) -> ModelSpace:
    """Enumerate every hierarchically closed model containing x1.

    Breadth-first closure generation from the minimal model {x1}: adding any
    absent term and closing reaches exactly the closed sets, without visiting
    the (exponentially many) non-closed term subsets.
    """
    _check_k(k)
    minimal = frozenset({1})
    seen = {minimal}
    frontier = [minimal]
    all_terms = range(1, 1 << k)
    while frontier:
        nxt = []
        for current in frontier:
            for t in all_terms:
                if t in current:
                    continue
                grown = set(current)
                grown.add(t)
                for sub in _sub_terms(t):
                    grown.add(sub)
                grown = frozenset(grown)
                if grown not in seen:
                    seen.add(grown)
                    nxt.append(grown)
        frontier = nxt
    models = sorted((ModelSpec(terms) for terms in seen), key=lambda m: m.sort_key)
    return ModelSpace(k=k, models=tuple(models))


def compare_complexity(mi: ModelSpec, mj: ModelSpec) -> Complexity:
    """Compare two models under the three-rule complexity partial order.

    Rules, in order: parameter count; highest interaction order; number of
    highest-order interactions. Models no rule separates are indistinguishable
    (including a model against itself).
    """
    for a, b in (
        (mi.p, mj.p),
        (mi.max_order, mj.max_order),
        (mi.top_order_count, mj.top_order_count),
    ):
        if a > b:
            return Complexity.MORE_COMPLEX
        if a < b:
            return Complexity.LESS_COMPLEX
    return Complexity.INDISTINGUISHABLE


def tess_neighbors(mg: ModelSpec, space: ModelSpace) -> set[ModelSpec]:
    """Models one main effect away from ``mg``.

    Either add an absent main effect, or drop a present one (never x1)
    together with every interaction containing it. Both moves preserve
    closure, so the result is always inside the space.
    """
    space.index_of(mg)
    out = set()
    for j in range(1, space.k + 1):
        fmask = 1 << (j - 1)
        if fmask not in mg.terms:
            out.add(ModelSpec(mg.terms | {fmask}))
        elif j != 1:
            out.add(ModelSpec(frozenset(t for t in mg.terms if not t & fmask)))
    return out


def bo_moves(mg: ModelSpec, space: ModelSpace) -> set[ModelSpec]:
    """Models one interaction larger than ``mg``.

    Each absent interaction term is added along with the lower-order terms
    its hierarchy requires. Empty for the most complex model.
    """
    space.index_of(mg)
    out = set()
    for t in range(1, 1 << space.k):
        if term_order(t) >= 2 and t not in mg.terms:
            out.add(hierarchical_closure(mg.terms | {t}, space.k))
    out.discard(mg)
    return out


def parse_model(text: str, k: int) -> ModelSpec:
    """Parse a ``+``-joined term string such as ``x1 + x2 + x1x2``.

    Whitespace-insensitive. The string must denote a valid model (contains
    x1, hierarchically closed) with factors in 1..k.
    """
    _check_k(k)
    compact = re.sub(r"\s+", "", text)
    if not compact:
        raise ConfigurationError("empty model string")
    terms = set()
    for token in compact.split("+"):
        if not re.fullmatch(r"(?:x\d+)+", token):
            raise ConfigurationError(f"malformed term {token!r} in model string {text!r}")
        mask = 0
        for digits in _TERM_RE.findall(token):
            j = int(digits)
            if not 1 <= j <= k:
                raise ConfigurationError(f"factor x{j} out of range for k={k} in {text!r}")
            fmask = 1 << (j - 1)
            if mask & fmask:
                raise ConfigurationError(f"factor x{j} repeated inside term {token!r}")
            mask |= fmask
        if mask in terms:
            raise ConfigurationError(f"duplicate term {token!r} in model string {text!r}")
        terms.add(mask)
    return ModelSpec(frozenset(terms))


def format_model(model: ModelSpec) -> str:
    """Canonical model string: terms joined by `` + ``, simple terms first."""
    return " + ".join(term_label(t) for t in model.sorted_terms)
