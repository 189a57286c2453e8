"""Integral augmentation and MIMO pole assignment by parametric eigenstructure.

For each target eigenvalue ``lam`` the pair (v, w) is drawn from the null space
of ``[A - lam*I | B]``; with ``V = [v_1 .. v_n]`` and ``W = [w_1 .. w_n]`` the gain
``K = -W V^-1`` gives ``(A - B K) v_i = lam_i v_i``. The free parameter vector
per eigenvalue (``f_i``, length m) selects which member of that null space is used.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    IllConditionedError,
    InvalidInputError,
    MultiplicityError,
    SynthesisError,
    UncontrollableModeError,
)

log = logging.getLogger(__name__)

DESIGN_POLES = (-0.252, -0.184, -0.017, -0.057, -0.073)
DEFAULT_COMPLETION_POLE = -0.1
COND_THRESHOLD = 1e8
POLICIES = ("cyclic", "min_cond")
DEFAULT_POLICY = "min_cond"

__all__ = [
    "AugmentedModel",
    "PoleSet",
    "EigenReport",
    "Assignment",
    "PoleAssignmentController",
    "augment",
    "controllability_rank",
    "assign_poles",
    "assign_eigenstructure",
    "eigenvalues",
    "verify_closed_loop",
]


@dataclass(frozen=True)
class AugmentedModel:
    """Plant with the error integral appended: state is [x; integral of (r - y)]."""

    A_aug: np.ndarray
    B_aug: np.ndarray
    n_plant: int


@dataclass(frozen=True)
class PoleSet:
    poles: tuple

    def __post_init__(self):
        poles = tuple(complex(p) for p in self.poles)
        if not poles:
            raise InvalidInputError("PoleSet: empty pole list")
        for p in poles:
            if not np.isfinite(p):
                raise InvalidInputError(f"PoleSet: non-finite pole {p}")
            if p.real >= 0:
                raise InvalidInputError(f"PoleSet: pole {p} does not have a strictly negative real part")
        if not _is_self_conjugate(poles):
            raise InvalidInputError("PoleSet: pole list is not closed under conjugation")
        object.__setattr__(self, "poles", poles)

    @classmethod
    def completed(cls, poles=DESIGN_POLES, completion=DEFAULT_COMPLETION_POLE, size=6):
        """Pad ``poles`` with copies of ``completion`` up to ``size`` entries."""
        poles = list(poles)
        if len(poles) < size:
            log.info(
                "pole list has %d entries for a %d-state design; appending %s",
                len(poles), size, completion,
            )
            poles += [completion] * (size - len(poles))
        return cls(tuple(poles))

    def __len__(self):
        return len(self.poles)

    def as_array(self):
        return np.array(self.poles, dtype=complex)


@dataclass(frozen=True)
class EigenReport:
    achieved_poles: np.ndarray
    requested_poles: np.ndarray
    max_abs_deviation: float


@dataclass(frozen=True)
class Assignment:
    K: np.ndarray
    V: np.ndarray
    W: np.ndarray
    poles: np.ndarray
    cond: float


def _is_self_conjugate(poles, tol=1e-12):
    remaining = [p for p in poles if abs(p.imag) > tol * max(1.0, abs(p))]
    while remaining:
        p = remaining.pop()
        match = [i for i, q in enumerate(remaining) if abs(q - p.conjugate()) <= tol * max(1.0, abs(p))]
        if not match:
            return False
        remaining.pop(match[0])
    return True


def augment(model):
    A = np.asarray(model.A, dtype=float)
    B = np.asarray(model.B, dtype=float)
    C = np.asarray(model.C, dtype=float)
    n, m, p = A.shape[0], B.shape[1], C.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
        raise InvalidInputError(f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
    # + 0.0 turns the -0.0 entries of -C into +0.0
    A_aug = np.block([[A, np.zeros((n, p))], [-C, np.zeros((p, p))]]) + 0.0
    B_aug = np.vstack([B, np.zeros((p, m))])
    return AugmentedModel(A_aug, B_aug, n)


def controllability_matrix(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def controllability_rank(A, B):
    """Numerical rank of [B, AB, ..., A^(n-1) B].

    Singular values below ``max(shape) * eps * s_max`` count as zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    M = controllability_matrix(A, B)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = max(M.shape) * np.finfo(float).eps * s[0]
    return int(np.sum(s > tol))


def eigenvalues(M):
    """Eigenvalues of a dense real or complex matrix, sorted by (real, imag).

    Uses LAPACK's Hessenberg QR (``geev``), which is backward stable: the
    result is the exact spectrum of ``M + E`` with ``||E|| ~ n * eps * ||M||``.
    """
    M = np.atleast_2d(np.asarray(M))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"eigenvalues needs a square matrix, got shape {M.shape}")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise SynthesisError(f"eigenvalue iteration did not converge: {exc}") from exc
    ev = ev.astype(complex)
    return ev[np.lexsort((ev.imag, ev.real))]


def _match_deviation(achieved, requested):
    cost = np.abs(achieved[:, None] - requested[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if rows.size else 0.0


def verify_closed_loop(A, B, K, poles):
    """Compare the spectrum of ``A - B K`` with the requested poles.

    Achieved and requested eigenvalues are paired by a minimum-total-distance
    assignment; the report holds the largest paired distance.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    K = np.asarray(K, dtype=float)
    requested = poles.as_array() if isinstance(poles, PoleSet) else np.asarray(poles, dtype=complex)
    if K.shape != (B.shape[1], A.shape[0]):
        raise InvalidInputError(f"gain shape {K.shape} does not fit A{A.shape}, B{B.shape}")
    achieved = eigenvalues(A - B @ K)
    return EigenReport(achieved, requested, _match_deviation(achieved, requested))


def _ordered_slots(poles):
    """Group poles into real singletons (in input order) followed by conjugate pairs."""
    real, upper = [], []
    for p in poles:
        if abs(p.imag) <= 1e-12 * max(1.0, abs(p)):
            real.append(complex(p.real, 0.0))
        elif p.imag > 0:
            upper.append(p)
    return real, upper


def _null_pair(A, B, lam):
    """Basis (top n rows, bottom m rows) of the null space of [A - lam I | B]."""
    n, m = B.shape
    M = np.hstack([A - lam * np.eye(n), B])
    _, s, vh = np.linalg.svd(M)
    scale = max(s[0], 1.0)
    if s[n - 1] <= 1e-10 * scale:
        raise UncontrollableModeError(lam)
    N = vh[n:].conj().T
    top, bottom = N[:n], N[n:]
    # normalize so the input block is the identity when possible; this makes the
    # basis independent of the SVD's arbitrary rotation
    if np.linalg.cond(bottom) < 1e10:
        N = N @ np.linalg.inv(bottom)
        top, bottom = N[:n], N[n:]
    return top, bottom


def _cyclic_parameters(n_slots, m, repeats):
    params = []
    for i in range(n_slots):
        j = (i + repeats[i]) % m
        f = np.zeros(m)
        f[j] = 1.0
        params.append(f)
    return params


def _candidate_directions(m):
    if m == 2:
        return [np.array([np.cos(t), np.sin(t)]) for t in np.arange(8) * np.pi / 8]
    eye = np.eye(m)
    cands = [eye[j] for j in range(m)]
    for j, k in itertools.combinations(range(m), 2):
        cands.append((eye[j] + eye[k]) / np.sqrt(2))
        cands.append((eye[j] - eye[k]) / np.sqrt(2))
    return cands


def _build(bases, params, n):
    cols_v, cols_w = [], []
    for (top, bottom, pair), f in zip(bases, params):
        v, w = top @ f, bottom @ f
        cols_v.append(v)
        cols_w.append(w)
        if pair:
            cols_v.append(v.conj())
            cols_w.append(w.conj())
    return np.column_stack(cols_v), np.column_stack(cols_w)


def assign_eigenstructure(A, B, poles, policy=DEFAULT_POLICY, cond_threshold=COND_THRESHOLD):
    """Full result of a pole assignment: gain plus the eigenvector matrices used.

    ``policy`` selects the parameter vectors: ``"cyclic"`` walks the standard
    basis of the input space across eigenvalues; ``"min_cond"`` starts from the
    cyclic choice and runs coordinate descent over a fixed grid of directions to
    reduce cond(V).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n, m = B.shape
    if A.shape != (n, n):
        raise InvalidInputError(f"inconsistent shapes A{A.shape} B{B.shape}")
    if not isinstance(poles, PoleSet):
        poles = PoleSet(tuple(poles))
    if len(poles) != n:
        raise InvalidInputError(f"PoleSet: {len(poles)} poles for a {n}-state system")
    if policy not in POLICIES:
        raise InvalidInputError(f"unknown parameter policy {policy!r}; choose from {POLICIES}")

    real, upper = _ordered_slots(poles.poles)
    slots = [(p, False) for p in real] + [(p, True) for p in upper]
    seen = {}
    repeats = []
    bases = []
    for lam, pair in slots:
        key = (round(lam.real, 12), round(lam.imag, 12))
        count = seen.get(key, 0)
        seen[key] = count + 1
        # real poles stay in real arithmetic
        top, bottom = _null_pair(A, B, lam if pair else lam.real)
        capacity = np.linalg.matrix_rank(top)
        if count + 1 > capacity:
            raise MultiplicityError(
                f"pole {lam} repeated {count + 1} times but at most {capacity} independent eigenvectors exist"
            )
        repeats.append(count)
        bases.append((top, bottom, pair))

    params = _cyclic_parameters(len(slots), m, repeats)
    V, W = _build(bases, params, n)
    cond = np.linalg.cond(V)

    if policy == "min_cond":
        candidates = _candidate_directions(m)
        for _ in range(3):
            improved = False
            for i in range(len(slots)):
                for f in candidates:
                    trial = list(params)
                    trial[i] = f
                    Vt, Wt = _build(bases, trial, n)
                    c = np.linalg.cond(Vt)
                    if c < cond * (1 - 1e-9):
                        params, V, W, cond = trial, Vt, Wt, c
                        improved = True
            if not improved:
                break

    if not np.isfinite(cond) or cond > cond_threshold:
        raise IllConditionedError(cond, cond_threshold)

    K = -np.linalg.solve(V.T, W.T).T
    if np.iscomplexobj(K):
        residue = np.max(np.abs(K.imag))
        if residue > 1e-10 * max(1.0, np.max(np.abs(K.real))):
            raise SynthesisError(f"gain has imaginary residue {residue:.3g}")
        K = K.real.copy()
    ordered = np.array([p for p, pair in slots for p in ((p, p.conjugate()) if pair else (p,))])
    return Assignment(K, V, W, ordered, float(cond))


def assign_poles(A, B, poles, policy=DEFAULT_POLICY, cond_threshold=COND_THRESHOLD):
    """State-feedback gain K placing the eigenvalues of ``A - B K`` at ``poles``."""
    return assign_eigenstructure(A, B, poles, policy, cond_threshold).K


class PoleAssignmentController(BaseEstimator):
    """State-feedback law ``u = -K x`` fitted to a linear model by pole assignment.

    ``fit(A, B)`` synthesizes ``gain_``; ``predict(X)`` maps state rows to
    command rows. Works with sklearn's ``clone``/``get_params`` machinery.
    """

    def __init__(self, poles=None, policy=DEFAULT_POLICY, cond_threshold=COND_THRESHOLD):
        self.poles = poles
        self.policy = policy
        self.cond_threshold = cond_threshold

    def fit(self, A, B):
        A = check_array(A, dtype=float)
        B = check_array(B, dtype=float)
        poles = self.poles
        if poles is None:
            poles = PoleSet.completed(size=A.shape[0])
        elif not isinstance(poles, PoleSet):
            poles = PoleSet(tuple(poles))
        result = assign_eigenstructure(A, B, poles, self.policy, self.cond_threshold)
        self.gain_ = result.K
        self.eigenvectors_ = result.V
        self.condition_number_ = result.cond
        self.report_ = verify_closed_loop(A, B, result.K, poles)
        self.n_features_in_ = A.shape[0]
        return self

    def predict(self, X):
        check_is_fitted(self, "gain_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} state columns, got {X.shape[1]}")
        return -X @ self.gain_.T
