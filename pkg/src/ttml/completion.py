"""Tensor completion on the fixed-rank TT manifold by conjugate gradient.

The observed entries live on an index set Omega; duplicate multi-indices
(several samples falling in one grid cell) are aggregated at
construction, keeping per-cell multiplicities and target sums so both
losses and gradients match their per-sample definitions exactly.

The least-squares gradient is kept in residual form (the factor 2 of
differentiating the square is dropped); the line search absorbs the
scaling, and all directional-derivative tests work through the
retraction-composed loss, which is scale-consistent by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import flops
from .errors import NumericalError, ShapeMismatchError
from .manifold import (
    TangentVector,
    project_sparse,
    retract,
    tangent_axpy,
    tangent_inner,
    tangent_norm,
    tangent_scale,
    transport,
)
from .tt import TensorTrain, batch_entries


class SparseTensor:
    """Multi-index/value pairs over an observation set Omega.

    Duplicate multi-indices are summed at construction.  `theta(a)`
    returns, per slice i of mode a, the positions of the observations
    with index i in that mode.
    """

    def __init__(self, indices, values, dims):
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if indices.ndim != 2 or indices.shape[0] != values.shape[0]:
            raise ShapeMismatchError("need one value per multi-index")
        self.dims = tuple(int(n) for n in dims)
        if indices.shape[0] and indices.shape[1] != len(self.dims):
            raise ShapeMismatchError(
                f"multi-indices of length {indices.shape[1]} for {len(self.dims)} modes"
            )
        for a, n in enumerate(self.dims):
            if indices.shape[0] and (indices[:, a].min() < 0 or indices[:, a].max() >= n):
                raise IndexError(f"index out of range for mode {a} of size {n}")
        if indices.shape[0]:
            uniq, inv = np.unique(indices, axis=0, return_inverse=True)
            summed = np.zeros(uniq.shape[0])
            np.add.at(summed, inv, values)
            self.indices, self.values = uniq, summed
        else:
            self.indices = indices.reshape(0, len(self.dims))
            self.values = values
        self._theta: dict[int, list[np.ndarray]] = {}

    @property
    def nnz(self) -> int:
        return self.indices.shape[0]

    def theta(self, mode: int) -> list[np.ndarray]:
        """Positions of observations per slice of `mode` (cached)."""
        if mode not in self._theta:
            col = self.indices[:, mode]
            order = np.argsort(col, kind="stable")
            bounds = np.searchsorted(col[order], np.arange(self.dims[mode] + 1))
            self._theta[mode] = [
                order[bounds[i] : bounds[i + 1]] for i in range(self.dims[mode])
            ]
        return self._theta[mode]

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dims)
        out[tuple(self.indices.T)] = self.values
        return out


@dataclass
class CompletionProblem:
    """Aggregated observations plus the loss they are scored with."""

    indices: np.ndarray  # (m, d) unique multi-indices
    target_sum: np.ndarray  # sum of targets per index
    multiplicity: np.ndarray  # number of samples per index
    target_sq_sum: np.ndarray  # sum of squared targets (least-squares only)
    loss: str  # "ls" | "ce"
    dims: tuple[int, ...]

    @classmethod
    def from_samples(cls, indices, y, dims, loss="ls") -> "CompletionProblem":
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        y = np.asarray(y, dtype=np.float64)
        if loss not in ("ls", "ce"):
            raise ValueError(f"unknown loss {loss!r}")
        if loss == "ce" and (np.any(y < 0) or np.any(y > 1)):
            raise ValueError("cross-entropy targets must lie in [0, 1]")
        uniq, inv = np.unique(indices, axis=0, return_inverse=True)
        ts = np.zeros(uniq.shape[0])
        mult = np.zeros(uniq.shape[0])
        ts2 = np.zeros(uniq.shape[0])
        np.add.at(ts, inv, y)
        np.add.at(mult, inv, 1.0)
        np.add.at(ts2, inv, y**2)
        return cls(uniq, ts, mult, ts2, loss, tuple(int(n) for n in dims))

    @property
    def n_samples(self) -> int:
        return int(self.multiplicity.sum())


def _softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + exp(z)) without overflow."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _loss_from_entries(z: np.ndarray, p: CompletionProblem) -> float:
    if p.loss == "ls":
        val = float(np.sum(p.multiplicity * z**2 - 2 * z * p.target_sum + p.target_sq_sum))
    else:
        val = float(
            np.sum(p.target_sum * _softplus(-z) + (p.multiplicity - p.target_sum) * _softplus(z))
        )
    if not np.isfinite(val):
        raise NumericalError("completion loss is not finite")
    return val


def _gradient_from_entries(z: np.ndarray, p: CompletionProblem) -> np.ndarray:
    if p.loss == "ls":
        return p.multiplicity * z - p.target_sum
    return p.multiplicity * _sigmoid(z) - p.target_sum


def loss_value(t: TensorTrain, p: CompletionProblem) -> float:
    """Sum of squared residuals, or cross-entropy of the sigmoid of the
    entries, over all samples (duplicates counted per sample)."""
    if t.dims != p.dims:
        raise ShapeMismatchError(f"dimension mismatch {t.dims} vs {p.dims}")
    return _loss_from_entries(batch_entries(t, p.indices), p)


def euclidean_gradient(t: TensorTrain, p: CompletionProblem) -> SparseTensor:
    """Sparse loss gradient supported exactly on Omega (residual form for
    least squares, sigmoid residuals for cross-entropy)."""
    if t.dims != p.dims:
        raise ShapeMismatchError(f"dimension mismatch {t.dims} vs {p.dims}")
    z = batch_entries(t, p.indices)
    return SparseTensor(p.indices, _gradient_from_entries(z, p), p.dims)


@dataclass
class SolverConfig:
    max_iters: int = 1000
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    max_backtracks: int = 30
    initial_step: str = "bb1"  # "bb1" | "lin"
    beta_rule: str = "fr"  # "fr" | "steepest"
    patience: int = 10  # validation evaluations without improvement
    check_every: int = 5  # iterations between validation evaluations
    grad_tol: float = 1e-10
    cg_restart_every: int | None = None  # default 10*d, set when solving


@dataclass
class LineSearchResult:
    step: float | None
    value: float
    backtracks: int


def armijo_search(phi: Callable[[float], float], slope0: float, t_init: float,
                  cfg: SolverConfig | None = None, phi0: float | None = None) -> LineSearchResult:
    """Backtracking line search: the largest t = t_init * shrink^m with
    phi(t) <= phi(0) + c * t * slope0.  Returns step None on failure."""
    cfg = cfg or SolverConfig()
    if slope0 >= 0:
        raise ValueError(f"slope {slope0} is not a descent direction")
    if phi0 is None:
        phi0 = phi(0.0)
    t = t_init
    for m in range(cfg.max_backtracks + 1):
        val = phi(t)
        if np.isfinite(val) and val <= phi0 + cfg.armijo_c * t * slope0:
            return LineSearchResult(t, val, m)
        t *= cfg.armijo_shrink
    return LineSearchResult(None, phi0, cfg.max_backtracks + 1)


def initial_step_lin(xi: TangentVector, eta: TangentVector) -> float:
    """Exact minimizer of the linearized objective along eta (positive
    for descent directions)."""
    denom = tangent_inner(eta, eta)
    if denom == 0:
        return 1.0
    return -tangent_inner(xi, eta) / denom


def initial_step_bb1(s: TangentVector, y: TangentVector) -> float | None:
    """Type-I Barzilai-Borwein step <s,s>/|<s,y>|; None when the pairing
    degenerates and the caller should fall back to the linearized rule."""
    ss = tangent_inner(s, s)
    sy = abs(tangent_inner(s, y))
    if sy < 1e-16 * ss or ss == 0:
        return None
    return ss / sy


def fr_beta(xi_k: TangentVector, xi_prev: TangentVector) -> float:
    """Fletcher-Reeves ratio of squared gradient norms."""
    prev = tangent_inner(xi_prev, xi_prev)
    if prev == 0:
        return 0.0
    return tangent_inner(xi_k, xi_k) / prev


def history_lines(history: list[dict]) -> list[str]:
    """Render history records as line-delimited key=value text."""
    lines = []
    for rec in history:
        parts = []
        for key in ("iter", "train_loss", "val_loss", "step", "grad_norm", "backtracks"):
            val = rec.get(key)
            if val is None:
                parts.append(f"{key}=nan")
            elif isinstance(val, float):
                parts.append(f"{key}={val:.17g}")
            else:
                parts.append(f"{key}={val}")
        lines.append(" ".join(parts))
    return lines


def rcgd_solve(t0: TensorTrain, train: CompletionProblem,
               val: CompletionProblem | None = None,
               cfg: SolverConfig | None = None) -> tuple[TensorTrain, list[dict]]:
    """Riemannian conjugate gradient descent for TT completion.

    Iterates project the sparse loss gradient onto the tangent space,
    combine it with the transported previous direction, Armijo-search
    along the direction, and retract.  With a validation problem the
    best-validated iterate is returned; otherwise the final one.
    Training loss is non-increasing over accepted steps.
    """
    cfg = cfg or SolverConfig()
    if t0.dims != train.dims:
        raise ShapeMismatchError(f"dimension mismatch {t0.dims} vs {train.dims}")
    restart_every = cfg.cg_restart_every or 10 * t0.d

    t_cur = t0
    train_loss = loss_value(t_cur, train)
    val_loss = loss_value(t_cur, val) if val is not None else None
    best_val, best_t = (val_loss, t_cur) if val is not None else (None, t_cur)
    stale_evals = 0

    history: list[dict] = []
    eta_prev: TangentVector | None = None
    xi_prev: TangentVector | None = None
    step_prev = 0.0
    force_steepest = False

    for it in range(cfg.max_iters):
        flops_start = flops.total()
        grad = euclidean_gradient(t_cur, train)
        xi = project_sparse(t_cur, grad)
        gnorm = tangent_norm(xi)
        rec = {
            "iter": it,
            "train_loss": train_loss,
            "val_loss": val_loss,
            "step": None,
            "grad_norm": gnorm,
            "backtracks": 0,
        }
        if not np.isfinite(gnorm):
            raise NumericalError(f"gradient norm is not finite at iteration {it}")
        if gnorm <= cfg.grad_tol:
            rec["flops"] = flops.total() - flops_start
            history.append(rec)
            break

        # search direction
        neg_xi = tangent_scale(-1.0, xi)
        use_cg = (
            cfg.beta_rule == "fr"
            and eta_prev is not None
            and not force_steepest
            and it % restart_every != 0
        )
        if use_cg:
            eta_t = transport(t_cur, eta_prev)
            beta = fr_beta(xi, xi_prev)
            eta = tangent_axpy(beta, eta_t, neg_xi)
        else:
            eta = neg_xi
        slope0 = tangent_inner(xi, eta)
        if slope0 >= 0:  # not a descent direction: fall back to steepest
            eta = neg_xi
            slope0 = -gnorm * gnorm

        # initial trial step
        t_init = None
        if cfg.initial_step == "bb1" and xi_prev is not None and step_prev > 0:
            xi_prev_t = transport(t_cur, xi_prev)
            s = tangent_scale(step_prev, xi_prev_t)
            y = tangent_axpy(-1.0, xi_prev_t, xi)
            t_init = initial_step_bb1(s, y)
        if t_init is None or not np.isfinite(t_init) or t_init <= 0:
            t_init = initial_step_lin(xi, eta)
        if not np.isfinite(t_init) or t_init <= 0:
            t_init = 1.0

        trials: dict[float, TensorTrain] = {}

        def make_phi(direction):
            def phi(t):
                point = retract(t_cur, direction, t)
                trials[t] = point
                return loss_value(point, train)

            return phi

        ls = armijo_search(make_phi(eta), slope0, t_init, cfg, phi0=train_loss)
        if ls.step is None and eta is not neg_xi:
            # CG direction failed the line search: restart with steepest descent
            eta = neg_xi
            slope0 = -gnorm * gnorm
            trials.clear()
            ls = armijo_search(
                make_phi(eta), slope0, initial_step_lin(xi, eta), cfg, phi0=train_loss
            )
            force_steepest = True
        if ls.step is None:
            rec["backtracks"] = ls.backtracks
            rec["flops"] = flops.total() - flops_start
            history.append(rec)
            warnings.warn(f"line search failed at iteration {it}; stopping")
            break

        t_next = trials[ls.step]
        if t_next.ranks != t_cur.ranks:
            warnings.warn(
                f"rank collapsed from {t_cur.ranks} to {t_next.ranks} during retraction; "
                "restarting with steepest descent"
            )
            force_steepest = True
            eta_prev = xi_prev = None
        else:
            eta_prev, xi_prev = eta, xi
            force_steepest = False
        step_prev = ls.step
        rec["step"] = ls.step
        rec["backtracks"] = ls.backtracks
        rec["flops"] = flops.total() - flops_start
        history.append(rec)

        t_cur = t_next
        train_loss = ls.value

        if val is not None and ((it + 1) % cfg.check_every == 0 or it + 1 == cfg.max_iters):
            val_loss = loss_value(t_cur, val)
            if val_loss < best_val:
                best_val, best_t = val_loss, t_cur
                stale_evals = 0
            else:
                stale_evals += 1
                if stale_evals >= cfg.patience:
                    history.append(
                        {
                            "iter": it + 1,
                            "train_loss": train_loss,
                            "val_loss": val_loss,
                            "step": None,
                            "grad_norm": None,
                            "backtracks": 0,
                        }
                    )
                    break
        else:
            val_loss = None
    if val is not None:
        return best_t, history
    return t_cur, history
