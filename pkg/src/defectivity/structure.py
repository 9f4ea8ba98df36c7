"""Admissible perturbation classes."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Kind(Enum):
    COMPLEX_FULL = "complex"
    REAL_FULL = "real"
    COMPLEX_PATTERN = "pattern-complex"
    REAL_PATTERN = "pattern-real"


@dataclass(frozen=True)
class StructureMode:
    """Which perturbations ``E`` are admissible.

    Parameters
    ----------
    kind : Kind
    mask : (n, n) bool ndarray, optional
        Sparsity pattern; required for the pattern kinds.
    """

    kind: Kind
    mask: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.is_pattern:
            if self.mask is None:
                raise ValueError("pattern modes need a mask")
            m = np.asarray(self.mask, dtype=bool)
            if not m.any():
                raise ValueError("pattern mask is empty")
            object.__setattr__(self, "mask", m)

    @classmethod
    def complex_full(cls):
        return cls(Kind.COMPLEX_FULL)

    @classmethod
    def real_full(cls):
        return cls(Kind.REAL_FULL)

    @classmethod
    def complex_pattern(cls, mask):
        return cls(Kind.COMPLEX_PATTERN, mask)

    @classmethod
    def real_pattern(cls, mask):
        return cls(Kind.REAL_PATTERN, mask)

    @classmethod
    def from_name(cls, name, mask=None):
        """Build from ``complex``, ``real``, ``pattern-complex`` or ``pattern-real``."""
        kind = Kind(name)
        return cls(kind, mask if kind in (Kind.COMPLEX_PATTERN, Kind.REAL_PATTERN) else None)

    @property
    def name(self):
        return self.kind.value

    @property
    def is_real(self):
        return self.kind in (Kind.REAL_FULL, Kind.REAL_PATTERN)

    @property
    def is_pattern(self):
        return self.kind in (Kind.COMPLEX_PATTERN, Kind.REAL_PATTERN)

    def project(self, S):
        """Orthogonal projection onto the admissible class (entrywise)."""
        if self.is_real:
            S = S.real
        if self.is_pattern:
            S = np.where(self.mask, S, 0)
        return S

    def validate(self, A):
        """Check that ``A`` is compatible with this mode."""
        A = np.asarray(A)
        if self.is_real and np.iscomplexobj(A) and np.any(A.imag):
            raise ValueError(f"mode {self.name} requires a real matrix")
        if self.is_pattern and self.mask.shape != A.shape:
            raise ValueError("mask shape does not match the matrix")

    def __hash__(self):
        return hash(self.kind)
