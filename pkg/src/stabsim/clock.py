"""Bounded "cherry" clocks: a linear tail of initial values feeding a ring of size K.

Values are plain signed integers in ``{-alpha, ..., 0, ..., K-1}``; a
:class:`ClockDomain` validates membership and carries the clock algebra.
"""

from dataclasses import dataclass
from typing import NamedTuple


class ClockError(ValueError):
    """A value lies outside its clock domain, or the domain itself is malformed."""


class Membership(NamedTuple):
    init: bool
    init_strict: bool
    stab: bool
    stab_strict: bool


@dataclass(frozen=True)
class ClockDomain:
    alpha: int
    k: int

    def __post_init__(self):
        if self.alpha < 1:
            raise ClockError(f"alpha must be >= 1, got {self.alpha}")
        if self.k < 2:
            raise ClockError(f"K must be >= 2, got {self.k}")

    @property
    def values(self):
        return range(-self.alpha, self.k)

    def __len__(self):
        return self.alpha + self.k

    def __contains__(self, c):
        return -self.alpha <= c < self.k

    def check(self, c):
        if c not in self:
            raise ClockError(f"{c} is not in cherry({self.alpha}, {self.k})")
        return c

    def reduce(self, c):
        """The representative of ``c`` modulo K in ``[0, K)``."""
        return c % self.k

    def increment(self, c):
        self.check(c)
        if c < 0:
            return c + 1
        return (c + 1) % self.k

    def distance(self, c, c2):
        return min((c - c2) % self.k, (c2 - c) % self.k)

    def locally_comparable(self, c, c2):
        return self.distance(c, c2) <= 1

    def local_leq(self, c, c2):
        return (c2 - c) % self.k <= 1

    def init_leq(self, c, c2):
        # natural integer order, meaningful on the initial values only
        return c <= c2

    def reset_value(self):
        return -self.alpha

    def is_init(self, c):
        return -self.alpha <= c <= 0

    def is_init_strict(self, c):
        return -self.alpha <= c < 0

    def is_stab(self, c):
        return 0 <= c < self.k

    def is_stab_strict(self, c):
        return 0 < c < self.k

    def classify(self, c):
        self.check(c)
        return Membership(
            init=self.is_init(c),
            init_strict=self.is_init_strict(c),
            stab=self.is_stab(c),
            stab_strict=self.is_stab_strict(c),
        )
