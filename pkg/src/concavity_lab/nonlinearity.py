"""Closed-form source terms f(t) and the admissibility thresholds of the two theorems.

Catalog (c > 0 always):

    constant     f(t) = c
    affine       f(t) = c + a t               (a >= 0)
    log-shift    f(t) = c + a log(1 + t)
    sqrt-shift   f(t) = c + a (sqrt(1 + t) - 1)
    saturating   f(t) = c + a t / (1 + t)

Derivatives are analytic, so the sup of f' and the monotonicity, concavity and
positivity flags are decided exactly rather than by sampling.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError

KINDS = ("constant", "affine", "log-shift", "sqrt-shift", "saturating")


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    c: float
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError("nonlinearity", "make", f"unknown kind {self.kind!r}; expected one of {KINDS}")
        for name in ("c", "a"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError("nonlinearity", "make", f"{name} must be a finite number, got {v!r}")
        if self.c <= 0:
            raise ValidationError("nonlinearity", "make", f"c must be > 0 (f(0) > 0), got {self.c}")
        if self.kind == "affine" and self.a < 0:
            raise ValidationError("nonlinearity", "make", f"affine slope must be >= 0, got {self.a}")
        if self.kind == "constant" and self.a != 0:
            raise ValidationError("nonlinearity", "make", "constant nonlinearity takes no slope 'a'")

    # derived attributes
    @property
    def f0(self):
        return self.c

    @property
    def d1_at_0(self):
        return {"constant": 0.0, "affine": self.a, "log-shift": self.a,
                "sqrt-shift": self.a / 2, "saturating": self.a}[self.kind]

    @property
    def sup_d1(self):
        """sup over t >= 0 of f'(t).

        Every catalog f' is monotone in t, so the sup sits at t = 0 when a >= 0
        and is the limit 0 at infinity when a < 0.
        """
        if self.kind == "constant":
            return 0.0
        return max(self.d1_at_0, 0.0)

    @property
    def is_positive(self):
        if self.a >= 0 or self.kind == "constant":
            return True
        # a < 0: log and sqrt shifts are unbounded below; saturating tends to c + a
        return self.kind == "saturating" and self.c + self.a >= 0

    @property
    def is_monotone(self):
        return self.kind == "constant" or self.a >= 0

    @property
    def is_concave(self):
        return self.kind in ("constant", "affine") or self.a >= 0

    def __call__(self, t):
        return eval_f(self, t, 0)

    def to_dict(self):
        out = {"kind": self.kind, "c": self.c}
        if self.kind != "constant":
            out["a"] = self.a
        return out

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d:
            raise ValidationError("nonlinearity", "make", f"nonlinearity spec must be an object with 'kind', got {d!r}")
        unknown = set(d) - {"kind", "c", "a"}
        if unknown:
            raise ValidationError("nonlinearity", "make", f"unknown nonlinearity keys {sorted(unknown)}")
        if "c" not in d:
            raise ValidationError("nonlinearity", "make", "nonlinearity spec is missing 'c'")
        return cls(d["kind"], float(d["c"]), float(d.get("a", 0.0)))


def constant(c=1.0):
    return Nonlinearity("constant", c)


def affine(c, a):
    return Nonlinearity("affine", c, a)


def eval_f(f, t, order=0):
    """f(t), f'(t) or f''(t) for t >= 0 (scalar or array)."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValidationError("nonlinearity", "eval", "argument must be >= 0")
    if order not in (0, 1, 2):
        raise ValidationError("nonlinearity", "eval", f"order must be 0, 1 or 2, got {order!r}")
    c, a, k = f.c, f.a, f.kind
    if k == "constant":
        out = (c + 0 * arr) if order == 0 else 0 * arr
    elif k == "affine":
        out = [c + a * arr, a + 0 * arr, 0 * arr][order]
    elif k == "log-shift":
        out = [c + a * np.log1p(arr), a / (1 + arr), -a / (1 + arr) ** 2][order]
    elif k == "sqrt-shift":
        root = np.sqrt(1 + arr)
        out = [c + a * (root - 1), a / (2 * root), -a / (4 * root**3)][order]
    else:
        out = [c + a * arr / (1 + arr), a / (1 + arr) ** 2, -2 * a / (1 + arr) ** 3][order]
    return float(out) if np.ndim(out) == 0 else out


def unit_ball_volume(n):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValidationError("nonlinearity", "unit_ball_volume", f"dimension must be an integer >= 1, got {n!r}")
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def threshold(area, n=2):
    """2 n omega_n^(2/n) / |Omega|^(2/n)."""
    return 2 * n * unit_ball_volume(n) ** (2 / n) / area ** (2 / n)


@dataclass(frozen=True)
class ConditionReport:
    theorem: str
    threshold: float
    tested_value: float
    margin: float
    passes: bool
    violated: tuple = ()

    def to_dict(self):
        return {"theorem": self.theorem, "threshold": self.threshold, "tested_value": self.tested_value,
                "margin": self.margin, "passes": self.passes, "violated": list(self.violated)}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["violated"] = tuple(d.get("violated", ()))
        return cls(**d)


def check_condition(f, stats, n=2, theorem="T1"):
    """Check the hypotheses of theorem T1 (concavity) or T2 (rearrangement).

    T1 needs f > 0, f' >= 0, f'' <= 0 and f'(0) <= threshold; T2 needs f > 0,
    f' >= 0 and sup f' < threshold (strict).
    """
    if theorem not in ("T1", "T2"):
        raise ValidationError("nonlinearity", "check_condition", f"theorem must be 'T1' or 'T2', got {theorem!r}")
    area = stats.area
    if not area > 0:
        raise ValidationError("nonlinearity", "check_condition", "domain area must be positive")
    thr = threshold(area, n)
    violated = []
    if not f.is_positive:
        violated.append("is_positive")
    if not f.is_monotone:
        violated.append("is_monotone")
    if theorem == "T1":
        if not f.is_concave:
            violated.append("is_concave")
        tested = f.d1_at_0
        ok = tested <= thr
    else:
        tested = f.sup_d1
        ok = tested < thr
    if not ok:
        violated.append("lipschitz_threshold")
    return ConditionReport(theorem, thr, tested, thr - tested, not violated, tuple(violated))


# instances used by the catalog-wide checks
CATALOG = (
    constant(1.0),
    affine(1.0, 0.3),
    affine(1.0, 1.0),
    Nonlinearity("log-shift", 1.0, 0.5),
    Nonlinearity("sqrt-shift", 1.0, 1.0),
    Nonlinearity("saturating", 1.0, 0.5),
)
