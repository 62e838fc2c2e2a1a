"""scikit-learn style facade over the solvers.

``fit`` takes the geometric input (a :class:`Polytope` or raw vertex/facet
data, plus weight forms) and stores the solved quantities in trailing
underscore attributes; ``predict``/``transform`` evaluate them at points.
Hyperparameters live in ``__init__`` so ``get_params``/``set_params`` and
``sklearn.base.clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .basedata import WeightFormSet, fano_check, load_base_preset, make_forms
from .errors import DimensionMismatch, NotFano
from .metric1d import boundary_slope_check, ma_residual_1d, solve_profile
from .polytope import Polytope, validate_polytope
from .soliton import solve_soliton_vector


def _as_polytope(polytope) -> Polytope:
    if isinstance(polytope, Polytope):
        return polytope
    if isinstance(polytope, dict):
        return validate_polytope(polytope["vertices"], polytope["facets"])
    vertices, facets = polytope
    return validate_polytope(vertices, facets)


def _as_forms(forms, dim: int) -> WeightFormSet:
    if forms is None:
        return make_forms([], [], dim)
    if isinstance(forms, WeightFormSet):
        return forms
    if isinstance(forms, str):
        return load_base_preset(forms, dim)
    a, b = forms
    return make_forms(a, b, dim)


def _points(X, dim: int) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.shape[1] != dim:
        raise DimensionMismatch(f"points have {X.shape[1]} coordinates, expected {dim}")
    return X


class SolitonEstimator(BaseEstimator):
    """Soliton vector and normalization constant of a (polytope, forms) pair.

    ``forms`` may be a :class:`WeightFormSet`, a preset name, raw ``(a, b)``
    root data, or ``None`` for the point base. ``predict(X)`` returns the
    soliton potential ``theta(x) = lam . x + C``.
    """

    def __init__(self, tol: float = 1e-10, degree_cap: int = 25):
        self.tol = tol
        self.degree_cap = degree_cap

    def fit(self, polytope, forms=None):
        P = _as_polytope(polytope)
        W = _as_forms(forms, P.dim)
        report = fano_check(P, W)
        if not report.is_fano:
            raise NotFano(f"weight forms are not positive on the polytope (margin {report.margin:.6g})")
        res = solve_soliton_vector(P, W, tol=self.tol, degree_cap=self.degree_cap)
        self.polytope_ = P
        self.forms_ = W
        self.fano_report_ = report
        self.lam_ = res.lam
        self.c_lambda_ = res.c_lambda
        self.futaki_ = res.futaki
        self.n_iter_ = res.iterations
        self.residual_norm_ = res.residual_norm
        self.n_features_in_ = P.dim
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "lam_")
        X = _points(X, self.n_features_in_)
        return X @ self.lam_ + self.c_lambda_

    def weight(self, X) -> np.ndarray:
        """Soliton-weighted density ``exp(lam . x) P(x)`` at points."""
        check_is_fitted(self, "lam_")
        X = _points(X, self.n_features_in_)
        return np.exp(X @ self.lam_) * self.forms_.evaluate(X)


class ProfileEstimator(TransformerMixin, BaseEstimator):
    """One-dimensional metric profile.

    ``fit`` solves for the soliton vector (unless ``lam``/``c_lambda`` are
    given) and then for the profile; ``transform(x)`` returns the columns
    ``(phi, u)`` at moment coordinates ``x``.
    """

    def __init__(self, n_grid: int = 2048, tol: float = 1e-10, lam=None, c_lambda=None):
        self.n_grid = n_grid
        self.tol = tol
        self.lam = lam
        self.c_lambda = c_lambda

    def fit(self, interval, forms=None):
        if isinstance(interval, Polytope) or isinstance(interval, dict):
            P = _as_polytope(interval)
        else:
            lo, hi = (float(v) for v in np.ravel(interval))
            P = validate_polytope([[lo], [hi]], [([1.0], -lo), ([-1.0], hi)])
        if P.dim != 1:
            raise DimensionMismatch(f"profiles need a one-dimensional polytope, got dimension {P.dim}")
        W = _as_forms(forms, 1)
        if self.lam is None:
            res = solve_soliton_vector(P, W, tol=self.tol)
            lam, c = float(res.lam[0]), res.c_lambda
        else:
            lam = float(self.lam)
            c = 0.0 if self.c_lambda is None else float(self.c_lambda)
        lo, hi = float(P.vertices.min()), float(P.vertices.max())
        self.profile_ = solve_profile((lo, hi), W, lam, c, self.n_grid)
        self.forms_ = W
        self.lam_, self.c_lambda_ = lam, c
        self.n_features_in_ = 1
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "profile_")
        x = _points(X, 1)[:, 0]
        p = self.profile_
        if np.any((x <= p.x_min) | (x >= p.x_max)):
            raise ValueError("profile is evaluated on the open interval only")
        return np.column_stack([p.phi_at(x), p.u_at(x)])

    def score(self, X=None, y=None) -> float:
        """Negative sup-norm of the log-form residual (higher is better)."""
        check_is_fitted(self, "profile_")
        return -ma_residual_1d(self.profile_, self.forms_).sup_norm

    def boundary_slopes(self) -> dict:
        check_is_fitted(self, "profile_")
        return boundary_slope_check(self.profile_)
