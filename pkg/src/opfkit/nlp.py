"""Generic smooth NLP container.

    min  f(x)
    s.t. c_eq(x) = 0
         gl <= c_ineq(x) <= gu
         xl <= x <= xu

constraints(x) returns the stacked vector [c_eq; c_ineq] and
jacobian(x) the matching (m_eq + m_ineq) x n sparse matrix.
lagrangian_hessian(x, obj_factor, mult) returns the sparse symmetric
matrix obj_factor * H(f) + sum_k mult[k] * H(c_k) with mult running
over the same stacked constraint order.  Infinite bounds use +-inf.
Callbacks must keep their sparsity pattern fixed across evaluation
points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp


@dataclass
class NlpProblem:
    n: int
    m_eq: int
    m_ineq: int
    xl: np.ndarray
    xu: np.ndarray
    gl: np.ndarray
    gu: np.ndarray
    x0: np.ndarray
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    constraints: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], sp.csr_matrix]
    lagrangian_hessian: Callable[[np.ndarray, float, np.ndarray], sp.csr_matrix]
    name: str = "nlp"

    def __post_init__(self) -> None:
        for attr in ("xl", "xu", "x0"):
            if getattr(self, attr).shape != (self.n,):
                raise ValueError(f"{attr} must have shape ({self.n},)")
        for attr in ("gl", "gu"):
            if getattr(self, attr).shape != (self.m_ineq,):
                raise ValueError(f"{attr} must have shape ({self.m_ineq},)")
