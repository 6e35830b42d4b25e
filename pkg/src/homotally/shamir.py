"""Threshold (t, c) secret sharing over a prime field.

Random polynomials with the secret as constant term, one share per center
at that center's secret evaluation point, Lagrange reconstruction at zero,
and the additive accumulation that makes per-center share sums themselves
shares of the summed secrets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .errors import DuplicatePointError, InsufficientSharesError
from .field import FieldElement


class CoefficientSource(Protocol):
    """Anything with randrange(upper), e.g. random.Random or SystemRandom."""

    def randrange(self, upper: int) -> int: ...


class FixedCoefficients:
    """Coefficient source replaying a scripted sequence.

    Lets tests and fixtures pin the exact polynomials a run constructs.
    """

    def __init__(self, values: Sequence[int]):
        self._values = list(values)

    def randrange(self, upper: int) -> int:
        if not self._values:
            raise RuntimeError("scripted coefficients exhausted")
        value = self._values.pop(0)
        if not 0 <= value < upper:
            raise ValueError(f"scripted value {value} outside [0, {upper})")
        return value


@dataclass(frozen=True, slots=True)
class SharingPolicy:
    """Threshold t with one distinct nonzero evaluation point per center.

    Point i (1-based) belongs to center i. The points are the officer's
    secret; they never travel to centers.
    """

    threshold: int
    eval_points: tuple[FieldElement, ...]

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")
        if len(self.eval_points) < self.threshold:
            raise ValueError(
                f"{len(self.eval_points)} centers cannot meet threshold {self.threshold}"
            )
        moduli = {point.modulus for point in self.eval_points}
        if len(moduli) != 1:
            raise ValueError("evaluation points must share one field")
        if any(point.residue == 0 for point in self.eval_points):
            raise ValueError("evaluation points must be nonzero")
        if len({point.residue for point in self.eval_points}) != len(self.eval_points):
            raise ValueError("evaluation points must be distinct")

    @property
    def center_count(self) -> int:
        return len(self.eval_points)

    @property
    def modulus(self) -> int:
        return self.eval_points[0].modulus

    def point_for(self, center_id: int) -> FieldElement:
        if not 1 <= center_id <= self.center_count:
            raise ValueError(f"no center {center_id} in 1..{self.center_count}")
        return self.eval_points[center_id - 1]


@dataclass(frozen=True, slots=True)
class Polynomial:
    """Coefficients low to high; the constant term is the secret."""

    coefficients: tuple[FieldElement, ...]

    def __post_init__(self):
        if not self.coefficients:
            raise ValueError("polynomial needs at least a constant term")
        if len({c.modulus for c in self.coefficients}) != 1:
            raise ValueError("coefficients must share one field")

    @property
    def secret(self) -> FieldElement:
        return self.coefficients[0]

    def evaluate(self, x: FieldElement) -> FieldElement:
        """Horner evaluation."""
        acc = FieldElement(0, x.modulus)
        for coeff in reversed(self.coefficients):
            acc = acc * x + coeff
        return acc


@dataclass(frozen=True, slots=True)
class Share:
    """One polynomial evaluation, addressed by the owning center's index."""

    point_index: int
    value: FieldElement


# One ballot's c shares, point_index 1..c, one per center.
ShareBatch = tuple[Share, ...]


def make_polynomial(
    secret: FieldElement, threshold: int, rng: CoefficientSource
) -> Polynomial:
    """Random degree-<=(threshold-1) polynomial with the given constant term.

    The threshold-1 upper coefficients are uniform over the whole field,
    zero included: the uniform degree-<=(t-1) family is what makes a single
    share carry no information about the secret.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    p = secret.modulus
    coeffs = [secret]
    coeffs.extend(FieldElement(rng.randrange(p), p) for _ in range(threshold - 1))
    return Polynomial(tuple(coeffs))


def split(
    secret: FieldElement, policy: SharingPolicy, rng: CoefficientSource
) -> ShareBatch:
    """Share a secret: evaluate a fresh random polynomial at every center's point."""
    poly = make_polynomial(secret, policy.threshold, rng)
    return tuple(
        Share(index, poly.evaluate(point))
        for index, point in enumerate(policy.eval_points, start=1)
    )


def interpolate_at_zero(
    points: Sequence[tuple[FieldElement, FieldElement]], threshold: int
) -> FieldElement:
    """Constant term of the unique degree-<=(t-1) polynomial through t points.

    K = sum_i y_i * prod_{j != i} x_j / (x_j - x_i)

    Exactly ``threshold`` points are required; callers pick the subset, which
    keeps cross-checking different subsets an explicit tally-level feature.
    """
    if len(points) < threshold:
        raise InsufficientSharesError(
            f"need {threshold} shares, got {len(points)}"
        )
    if len(points) > threshold:
        raise ValueError(
            f"expected exactly {threshold} points, got {len(points)}; pick a subset"
        )
    xs = [x.residue for x, _ in points]
    if len(set(xs)) != len(xs):
        raise DuplicatePointError("evaluation points must be distinct")
    p = points[0][0].modulus
    total = FieldElement(0, p)
    for i, (x_i, y_i) in enumerate(points):
        num = FieldElement(1, p)
        den = FieldElement(1, p)
        for j, (x_j, _) in enumerate(points):
            if j == i:
                continue
            num = num * x_j
            den = den * (x_j - x_i)
        total = total + y_i * num * den.inv()
    return total


def accumulate(total: FieldElement, incoming: Share) -> FieldElement:
    """Fold one share value into a center's running sum."""
    return total + incoming.value
