"""Exact arithmetic in prime fields Z/pZ, plus prime selection for setup."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FieldMismatchError

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

# Witness set making Miller-Rabin deterministic for all n < 3.3e24 (> 2^64).
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic primality test for moduli up to 64 bits."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True, slots=True)
class Prime:
    """A primality-certified modulus; construction fails on composites."""

    value: int

    def __post_init__(self):
        if self.value < 2 or not is_prime(self.value):
            raise ValueError(f"{self.value} is not prime")

    def __int__(self) -> int:
        return self.value

    def __str__(self) -> str:
        return str(self.value)


def smallest_prime_above(bound: int) -> Prime:
    """Least prime strictly greater than ``bound`` (bound >= 1)."""
    if bound < 1:
        raise ValueError("bound must be >= 1")
    candidate = bound + 1
    while not is_prime(candidate):
        candidate += 1
    return Prime(candidate)


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Extended Euclid: returns (g, x, y) with a*x + b*y = g = gcd(a, b)."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    return old_r, old_s, old_t


@dataclass(frozen=True, slots=True)
class FieldElement:
    """A residue in [0, p). Two elements interoperate only under the same p."""

    residue: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 2:
            raise ValueError(f"modulus {self.modulus} is not a field size")
        if not 0 <= self.residue < self.modulus:
            raise ValueError(
                f"residue {self.residue} outside [0, {self.modulus})"
            )

    @classmethod
    def reduce(cls, value: int, modulus: int) -> "FieldElement":
        return cls(value % modulus, modulus)

    def _check(self, other: "FieldElement") -> None:
        if self.modulus != other.modulus:
            raise FieldMismatchError(
                f"mixed moduli {self.modulus} and {other.modulus}"
            )

    def __add__(self, other):
        if not isinstance(other, FieldElement):
            return NotImplemented
        self._check(other)
        return FieldElement((self.residue + other.residue) % self.modulus, self.modulus)

    def __sub__(self, other):
        if not isinstance(other, FieldElement):
            return NotImplemented
        self._check(other)
        return FieldElement((self.residue - other.residue) % self.modulus, self.modulus)

    def __mul__(self, other):
        if not isinstance(other, FieldElement):
            return NotImplemented
        self._check(other)
        return FieldElement(self.residue * other.residue % self.modulus, self.modulus)

    def __neg__(self):
        return FieldElement(-self.residue % self.modulus, self.modulus)

    def inv(self) -> "FieldElement":
        """Multiplicative inverse via extended Euclid."""
        if self.residue == 0:
            raise ZeroDivisionError(
                "inverse of zero; usually means two equal evaluation points"
            )
        _, x, _ = _xgcd(self.residue, self.modulus)
        return FieldElement(x % self.modulus, self.modulus)

    def __repr__(self) -> str:
        return f"FieldElement({self.residue} mod {self.modulus})"
