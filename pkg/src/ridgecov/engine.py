"""Exact low-cost sampler for the estimators' finite-sample law.

Rotational invariance collapses the model to a two-column frame: with
alpha0 = u e1 and beta0 in span(e1, e2), every statistic the estimators
consume is a function of quadratic forms V^T f(W) V, where V stacks the two
signal columns of X with the noise vector(s) and W is the Wishart matrix of
the remaining p-2 columns.  W only enters through its spectrum, so it is
replaced by the bidiagonal-square tridiagonal model with matching eigenvalue
law; each draw then costs O(n) tridiagonal solves instead of O(n p^2)
regression.  The evaluation split is reduced the same way: conditional on the
fits, (a, y, x.alpha_hat, x.beta_hat) is a 4-dim Gaussian whose sample
cross-products form a Wishart matrix, sampled by Bartlett factorization.

Used where direct simulation is infeasible (bootstrap calibration sweeps);
equivalence with direct simulation is part of the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import tridiag_solve_batch
from .debias import EvalMoments, GConstants, PROOF_VERSION, check_split
from .errors import ConfigError

_EQUAL_LAMBDA_TOL = 1e-9


def _bidiag_dofs(n: int, q: int) -> tuple[int, np.ndarray, np.ndarray, int]:
    """Chi-square degrees of freedom for the tridiagonal Wishart model of
    X_r X_r^T with X_r an n x q standard Gaussian block.

    Returns (m, diag_dofs, sub_dofs, atom_dof): the bulk is an m x m
    bidiagonal square; atom_dof counts the exact 1/lam eigenvalues
    (zero eigenvalues of the rank-deficient case q < n)."""
    if q >= n:
        m = n
        diag = np.arange(q, q - n, -1, dtype=np.float64)
        atom = 0
    else:
        m = q
        diag = np.arange(n, n - q, -1, dtype=np.float64)
        atom = n - q
    sub = np.arange(m - 1, 0, -1, dtype=np.float64)
    return m, diag, sub, atom


def _sample_tridiag(rng, batch: int, n: int, diag_df, sub_df):
    """Tridiagonal T = B B^T / n with B the chi bidiagonal model."""
    d2 = rng.chisquare(diag_df, (batch, diag_df.shape[0]))
    if sub_df.shape[0] > 0:
        s2 = rng.chisquare(sub_df, (batch, sub_df.shape[0]))
    else:
        s2 = np.zeros((batch, 0))
    t_diag = d2.copy()
    t_diag[:, 1:] += s2
    t_off = np.sqrt(d2[:, :-1] * s2)
    return t_diag / n, t_off / n


def _wishart(rng, batch: int, dof: int, k: int, chol_c=None):
    """Batch of k x k Wishart(dof, C) matrices (C = I when chol_c is None)."""
    if dof <= 0:
        return np.zeros((batch, k, k))
    if dof >= k:
        a = np.zeros((batch, k, k))
        idx = np.tril_indices(k, -1)
        a[:, idx[0], idx[1]] = rng.standard_normal((batch, idx[0].size))
        for j in range(k):
            a[:, j, j] = np.sqrt(rng.chisquare(dof - j, batch))
        if chol_c is not None:
            a = chol_c @ a
        return a @ np.swapaxes(a, 1, 2)
    # singular case: explicit Gaussian rows
    z = rng.standard_normal((batch, dof, k))
    if chol_c is not None:
        z = z @ chol_c.T
    return np.einsum("bri,brj->bij", z, z)


def _robust_cholesky(cov: np.ndarray) -> np.ndarray:
    """Batched Cholesky that survives tiny negative eigenvalues from
    floating-point cancellation."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, vecs = np.linalg.eigh(cov)
        w = np.clip(w, 0.0, None) + 1e-14
        fixed = vecs @ (w[..., None] * np.swapaxes(vecs, -1, -2))
        return np.linalg.cholesky(fixed)


@dataclass(frozen=True)
class _Primitives:
    """Resolvent blocks of one dataset at one lambda, all batched.

    With Phi = X12^T F X12 / n and M = (I2 + Phi)^(-1), the top 2x2 block of
    the resolvent is M / lam, and every estimator statistic reduces to these
    fields."""

    lam: float
    a_block: np.ndarray  # (B,2,2) X12^T X12 / n
    minv: np.ndarray  # (B,2,2)
    mphi2m: np.ndarray  # (B,2,2) M Phi2 M
    xw: dict  # noise key -> (B,2) X12^T w / n
    rv: dict  # noise key -> (B,2) block of R X^T w / n
    r2v: dict  # noise key -> (B,2) block of R^2 X^T w / n
    s_r: dict  # (w,w') -> (B,) w^T X R X^T w' / n^2
    s_r2: dict  # (w,w') -> (B,) w^T X R^2 X^T w' / n^2


def _inv2(mat: np.ndarray) -> np.ndarray:
    det = mat[:, 0, 0] * mat[:, 1, 1] - mat[:, 0, 1] * mat[:, 1, 0]
    out = np.empty_like(mat)
    out[:, 0, 0] = mat[:, 1, 1]
    out[:, 1, 1] = mat[:, 0, 0]
    out[:, 0, 1] = -mat[:, 0, 1]
    out[:, 1, 0] = -mat[:, 1, 0]
    return out / det[:, None, None]


def _mv(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.einsum("bij,bj->bi", mat, vec)


def _dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.einsum("bi,bi->b", x, y)


def _primitives(n: int, lam: float, gram, q1, q2, noise_cols: dict) -> _Primitives:
    phi = q1[:, :2, :2] / n
    phi2 = q2[:, :2, :2] / n
    m_mat = phi.copy()
    m_mat[:, 0, 0] += 1.0
    m_mat[:, 1, 1] += 1.0
    minv = _inv2(m_mat)
    mphi2m = minv @ phi2 @ minv
    xw, rv, r2v = {}, {}, {}
    psi, psi2 = {}, {}
    for key, col in noise_cols.items():
        xw[key] = gram[:, :2, col] / n
        psi[key] = q1[:, :2, col] / n
        psi2[key] = q2[:, :2, col] / n
        rv[key] = _mv(minv, psi[key])
        r2v[key] = _mv(minv, psi2[key] - _mv(phi2, rv[key]))
    s_r, s_r2 = {}, {}
    keys = list(noise_cols)
    for i, w in enumerate(keys):
        for wp in keys[i:]:
            cw, cwp = noise_cols[w], noise_cols[wp]
            g_ww = gram[:, cw, cwp] / n
            f1 = q1[:, cw, cwp] / n
            f2 = q2[:, cw, cwp] / n
            pmp = _dot(psi[w], rv[wp])
            s_r[(w, wp)] = g_ww - lam * f1 + lam * pmp
            s_r2[(w, wp)] = (
                f1 - lam * f2 - pmp
                + lam * (_dot(psi2[w], rv[wp]) + _dot(psi[w], _mv(minv, psi2[wp]))
                         - _dot(psi[w], _mv(mphi2m, psi[wp])))
            )
            s_r[(wp, w)] = s_r[(w, wp)]
            s_r2[(wp, w)] = s_r2[(w, wp)]
    return _Primitives(
        lam=lam, a_block=gram[:, :2, :2] / n, minv=minv, mphi2m=mphi2m,
        xw=xw, rv=rv, r2v=r2v, s_r=s_r, s_r2=s_r2,
    )


def _coef_block(prim: _Primitives, r_vec: np.ndarray, w: str) -> np.ndarray:
    """First two coordinates of the fitted coefficient R (S r + X^T w / n):
    (I - M) r + M psi_w, batched."""
    base = r_vec[None, :] - _mv(prim.minv, np.broadcast_to(r_vec, prim.rv[w].shape))
    return base + prim.rv[w]


def _norm_sq(prim: _Primitives, r_vec: np.ndarray, w: str) -> np.ndarray:
    """|coef|^2 = v^T R^2 v for v = S r + X^T w / n."""
    lam = prim.lam
    r = np.broadcast_to(r_vec, prim.rv[w].shape)
    block = r - _mv(prim.minv, r) - lam * _mv(prim.mphi2m, r)
    quad = _dot(r, block)
    cross = 2.0 * _dot(r, prim.rv[w] - lam * prim.r2v[w])
    return quad + cross + prim.s_r2[(w, w)]


def _cross_equal_lambda(prim: _Primitives, r_a, r_b, w_a: str, w_b: str) -> np.ndarray:
    """v^T R^2 t for v = S r_a + X^T w_a / n, t = S r_b + X^T w_b / n at one
    shared lambda."""
    lam = prim.lam
    ra = np.broadcast_to(r_a, prim.rv[w_a].shape)
    rb = np.broadcast_to(r_b, prim.rv[w_b].shape)
    blk = rb - _mv(prim.minv, rb) - lam * _mv(prim.mphi2m, rb)
    out = _dot(ra, blk)
    out += _dot(ra, prim.rv[w_b] - lam * prim.r2v[w_b])
    out += _dot(rb, prim.rv[w_a] - lam * prim.r2v[w_a])
    out += prim.s_r2[(w_a, w_b)]
    return out


def _resolvent_bilinear(prim: _Primitives, r_a, r_b, w_a: str, w_b: str) -> np.ndarray:
    """v^T R(lam) t at this primitive's lambda (used through the resolvent
    identity when the two penalties differ)."""
    lam = prim.lam
    ra = np.broadcast_to(r_a, prim.rv[w_a].shape)
    rb = np.broadcast_to(r_b, prim.rv[w_b].shape)
    blk = _mv(prim.a_block, rb) - lam * rb + lam * _mv(prim.minv, rb)
    out = _dot(ra, blk)
    out += _dot(ra, prim.xw[w_b] - lam * prim.rv[w_b])
    out += _dot(rb, prim.xw[w_a] - lam * prim.rv[w_a])
    out += prim.s_r[(w_a, w_b)]
    return out


@dataclass
class EngineDraws:
    """Per-draw scalars: fit-split inner products plus evaluation means."""

    mean_ay: np.ndarray
    mean_nr: np.ndarray
    mean_dr: np.ndarray
    ab: np.ndarray  # alpha_hat^T beta_hat
    a0_ah: np.ndarray
    a0_bh: np.ndarray
    b0_ah: np.ndarray
    b0_bh: np.ndarray
    norm2_ah: np.ndarray
    norm2_bh: np.ndarray

    def moments(self) -> EvalMoments:
        return EvalMoments(
            mean_ay=self.mean_ay, mean_nr=self.mean_nr,
            mean_dr=self.mean_dr, ab=self.ab,
        )


class ExactSampler:
    """Samples the estimators' exact finite-(n, p) law at O(n) per draw."""

    def __init__(
        self,
        n: int,
        p: int,
        split: int,
        lambda1: float,
        lambda2: float,
        u: float,
        v: float,
        varrho: float,
        rho: float,
    ) -> None:
        check_split(split)
        if p < 3:
            raise ConfigError("the two-column frame needs p >= 3")
        if n < 1:
            raise ConfigError("n must be positive")
        if not (lambda1 > 0 and lambda2 > 0):
            raise ConfigError("lambdas must be positive")
        if not abs(rho) < 1:
            raise ConfigError("|rho| must be < 1")
        if u < 0 or v < 0:
            raise ConfigError("u, v are norms")
        if abs(varrho) > u * v + 1e-9:
            raise ConfigError("|varrho| cannot exceed u*v")
        self.n, self.p, self.split = n, p, split
        self.lambda1, self.lambda2 = float(lambda1), float(lambda2)
        self.u, self.v, self.varrho, self.rho = u, v, varrho, rho
        self.q = p - 2
        self.m, self._diag_df, self._sub_df, self.atom_dof = _bidiag_dofs(n, self.q)
        if u > 0:
            e1 = varrho / u
            self.r_alpha = np.array([u, 0.0])
            self.r_beta = np.array([e1, np.sqrt(max(v * v - e1 * e1, 0.0))])
        else:
            # no signal direction for A; place beta0 on the first axis
            self.r_alpha = np.array([0.0, 0.0])
            self.r_beta = np.array([v, 0.0])
        if split == 2:
            c4 = np.eye(4)
            c4[2, 3] = c4[3, 2] = rho
            self._chol_noise = np.linalg.cholesky(c4)

    def _quadratics(self, rng, batch: int, k: int, chol_c, lambdas):
        """One dataset: Gram, and (Q1, Q2) per requested lambda."""
        t_diag, t_off = _sample_tridiag(rng, batch, self.n, self._diag_df, self._sub_df)
        vmat = rng.standard_normal((batch, self.m, k))
        if chol_c is not None:
            vmat = vmat @ chol_c.T
        g0 = _wishart(rng, batch, self.atom_dof, k, chol_c)
        gram = np.einsum("bmi,bmj->bij", vmat, vmat) + g0
        per_lambda = {}
        for lam in lambdas:
            y = tridiag_solve_batch(t_diag + lam, t_off, vmat)
            q1 = np.einsum("bmi,bmj->bij", vmat, y) + g0 / lam
            q2 = np.einsum("bmi,bmj->bij", y, y) + g0 / lam**2
            per_lambda[lam] = (q1, q2)
        return gram, per_lambda

    def _fit_scalars(self, rng, batch: int):
        """The seven fit-split scalars, per split layout."""
        l1, l2 = self.lambda1, self.lambda2
        equal = abs(l1 - l2) <= _EQUAL_LAMBDA_TOL
        ra, rb = self.r_alpha, self.r_beta
        if self.split == 2:
            lambdas = [l1] if equal else [l1, l2]
            gram, ql = self._quadratics(rng, batch, 4, self._chol_noise, lambdas)
            cols = {"eps": 2, "mu": 3}
            p1 = _primitives(self.n, l1, gram, *ql[l1], noise_cols=cols)
            p2 = p1 if equal else _primitives(self.n, l2, gram, *ql[l2], noise_cols=cols)
            ah = _coef_block(p1, ra, "eps")
            bh = _coef_block(p2, rb, "mu")
            norm2_ah = _norm_sq(p1, ra, "eps")
            norm2_bh = _norm_sq(p2, rb, "mu")
            if equal:
                ab = _cross_equal_lambda(p1, ra, rb, "eps", "mu")
            else:
                ab = (_resolvent_bilinear(p1, ra, rb, "eps", "mu")
                      - _resolvent_bilinear(p2, ra, rb, "eps", "mu")) / (l2 - l1)
        else:
            cols = {"w": 2}
            gram1, ql1 = self._quadratics(rng, batch, 3, None, [l1])
            prim_a = _primitives(self.n, l1, gram1, *ql1[l1], noise_cols=cols)
            gram2, ql2 = self._quadratics(rng, batch, 3, None, [l2])
            prim_b = _primitives(self.n, l2, gram2, *ql2[l2], noise_cols=cols)
            ah = _coef_block(prim_a, ra, "w")
            bh = _coef_block(prim_b, rb, "w")
            norm2_ah = _norm_sq(prim_a, ra, "w")
            norm2_bh = _norm_sq(prim_b, rb, "w")
            perp_a = np.sqrt(np.clip(norm2_ah - _dot(ah, ah), 0.0, None))
            perp_b = np.sqrt(np.clip(norm2_bh - _dot(bh, bh), 0.0, None))
            z = rng.standard_normal(batch)
            if self.q - 1 > 0:
                chi = rng.chisquare(self.q - 1, batch)
            else:
                chi = np.zeros(batch)
            xi = z / np.sqrt(z * z + chi)
            ab = _dot(ah, bh) + perp_a * perp_b * xi
        return {
            "a0_ah": ra[0] * ah[:, 0] + ra[1] * ah[:, 1],
            "b0_ah": rb[0] * ah[:, 0] + rb[1] * ah[:, 1],
            "a0_bh": ra[0] * bh[:, 0] + ra[1] * bh[:, 1],
            "b0_bh": rb[0] * bh[:, 0] + rb[1] * bh[:, 1],
            "ab": ab,
            "norm2_ah": norm2_ah,
            "norm2_bh": norm2_bh,
        }

    def _eval_means(self, rng, batch: int, s: dict):
        """Evaluation-split cross-moment means given the fit scalars, via a
        4-dim Wishart draw with n rows."""
        n = self.n
        cov = np.empty((batch, 4, 4))
        cov[:, 0, 0] = 1.0 + self.u**2
        cov[:, 1, 1] = 1.0 + self.v**2
        cov[:, 0, 1] = cov[:, 1, 0] = self.varrho + self.rho
        cov[:, 0, 2] = cov[:, 2, 0] = s["a0_ah"]
        cov[:, 0, 3] = cov[:, 3, 0] = s["a0_bh"]
        cov[:, 1, 2] = cov[:, 2, 1] = s["b0_ah"]
        cov[:, 1, 3] = cov[:, 3, 1] = s["b0_bh"]
        cov[:, 2, 2] = s["norm2_ah"]
        cov[:, 3, 3] = s["norm2_bh"]
        cov[:, 2, 3] = cov[:, 3, 2] = s["ab"]
        lmat = _robust_cholesky(cov)
        if n >= 4:
            a = np.zeros((batch, 4, 4))
            idx = np.tril_indices(4, -1)
            a[:, idx[0], idx[1]] = rng.standard_normal((batch, idx[0].size))
            for j in range(4):
                a[:, j, j] = np.sqrt(rng.chisquare(n - j, batch))
            fac = lmat @ a
            w = fac @ np.swapaxes(fac, 1, 2) / n
        else:
            zrows = np.einsum("bik,brk->bri", lmat, rng.standard_normal((batch, n, 4)))
            w = np.einsum("bri,brj->bij", zrows, zrows) / n
        mean_ay = w[:, 0, 1]
        mean_nr = mean_ay - w[:, 1, 2]
        mean_dr = mean_nr - w[:, 0, 3] + w[:, 2, 3]
        return mean_ay, mean_nr, mean_dr

    def sample(self, batch: int, rng) -> EngineDraws:
        s = self._fit_scalars(rng, batch)
        mean_ay, mean_nr, mean_dr = self._eval_means(rng, batch, s)
        return EngineDraws(
            mean_ay=mean_ay, mean_nr=mean_nr, mean_dr=mean_dr, ab=s["ab"],
            a0_ah=s["a0_ah"], a0_bh=s["a0_bh"],
            b0_ah=s["b0_ah"], b0_bh=s["b0_bh"],
            norm2_ah=s["norm2_ah"], norm2_bh=s["norm2_bh"],
        )


def estimator_draws(
    draws: EngineDraws,
    kind,
    split: int,
    g: GConstants,
    nr2sp_variant: str = PROOF_VERSION,
):
    """(raw, debiased) arrays for one estimator; vectorizes the same formulas
    the dataset path uses."""
    from .debias import as_kind, debiased_from_moments, raw_from_moments

    moments = draws.moments()
    kind = as_kind(kind)
    raw = raw_from_moments(kind, moments)
    debiased = debiased_from_moments(kind, split, moments, g, nr2sp_variant)
    return raw, debiased
