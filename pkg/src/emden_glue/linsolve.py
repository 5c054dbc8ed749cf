"""Discretization and weighted right inverse of the linearization.

The linearized operator about the glued approximate solution is
``L = Delta + p ubar^(p-1)``.  Two discretizations are provided:

* ``radial1d`` -- a log-spaced grid on ``[r_min, r_out]`` for a single
  centered singularity in a ball, assembled in conservative form so the
  matrix is exactly self-adjoint under the ``r^(N-1) dr`` quadrature;
* ``box3d`` -- a uniform Cartesian grid (dimension 3 only) with the
   7-point Laplacian, singular points snapped to grid nodes and excluded
  from the unknown set.

``L`` is strongly indefinite (the potential behaves like ``A_p/rho^2``
with ``A_p`` above the Hardy constant), so the right inverse is built
from the positive-definite normal system: with the diagonal weight
``D = rho^(-2 delta_nu) * quadrature`` solve ``(L D L^T) z = f`` and set
``w = D L^T z``.  Then ``L w = f`` and ``w`` lies in the range of the
weighted adjoint, which pins down the kernel ambiguity of the continuum
problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BarrierFailure, IncompatibleDomain, SingularSystem, SolverStagnation
from .gluing import BoxDomain, SingularSpec, approx_solution
from .norms import WeightFunction
from .params import DerivedConstants, WeightSelection
from .radial import RadialProfile

__all__ = [
    "RadialGrid",
    "Box3dGrid",
    "make_discretization",
    "LinearOperator",
    "assemble",
    "RightInverse",
    "right_inverse",
    "max_principle_margin",
    "barrier_check",
    "weighted_min_singular_vector",
]


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid in ``s = log r`` on ``[r_min, r_out]``, Dirichlet ends."""

    r: np.ndarray
    s: np.ndarray
    h: float

    @property
    def mode(self) -> str:
        return "radial1d"

    @property
    def interior(self) -> slice:
        return slice(1, self.r.size - 1)


@dataclass(frozen=True)
class Box3dGrid:
    """Uniform Cartesian grid on a box, dimension 3, Dirichlet boundary."""

    axes: tuple          # three 1-d node arrays (including boundary)
    h: float
    snapped_points: np.ndarray   # (K, 3) singular points moved onto nodes
    singular_flat: np.ndarray    # flat indices (interior numbering) removed

    @property
    def mode(self) -> str:
        return "box3d"

    def interior_points(self) -> np.ndarray:
        xs, ys, zs = (ax[1:-1] for ax in self.axes)
        X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])


def make_discretization(spec: SingularSpec, mode: str,
                        r_min_factor: float = 1e-3, grid_h: float = 0.01,
                        r_out: float | None = None, box_n: int = 65):
    """Build a discretization compatible with the singular spec."""
    if mode == "radial1d":
        if spec.K != 1:
            raise IncompatibleDomain("radial1d needs exactly one singular point")
        if r_out is None:
            dom = spec.domain
            if not hasattr(dom, "radius"):
                raise IncompatibleDomain("radial1d needs a ball domain or explicit r_out")
            r_out = float(dom.radius)
        eps = float(spec.epsilons[0])
        r_min = r_min_factor * eps
        n = int(math.ceil((math.log(r_out) - math.log(r_min)) / grid_h)) + 1
        s = np.linspace(math.log(r_min), math.log(r_out), n)
        return RadialGrid(r=np.exp(s), s=s, h=float(s[1] - s[0]))
    if mode == "box3d":
        if spec.points.shape[1] != 3:
            raise IncompatibleDomain("box3d is restricted to dimension 3")
        dom = spec.domain
        if not isinstance(dom, BoxDomain):
            raise IncompatibleDomain("box3d needs a box domain")
        axes = tuple(np.linspace(dom.lo[k], dom.hi[k], box_n) for k in range(3))
        h = float(axes[0][1] - axes[0][0])
        for ax in axes[1:]:
            if not math.isclose(ax[1] - ax[0], h, rel_tol=1e-12):
                raise IncompatibleDomain("box3d needs a uniform cubic grid")
        m = box_n - 2
        snapped = spec.points.copy()
        flat = []
        for k, x in enumerate(spec.points):
            idx = [int(np.argmin(np.abs(axes[d] - x[d]))) for d in range(3)]
            if any(i == 0 or i == box_n - 1 for i in idx):
                raise IncompatibleDomain("singular point snapped onto the boundary")
            snapped[k] = [axes[d][idx[d]] for d in range(3)]
            flat.append((idx[0] - 1) * m * m + (idx[1] - 1) * m + (idx[2] - 1))
        return Box3dGrid(axes=axes, h=h, snapped_points=snapped,
                         singular_flat=np.asarray(sorted(set(flat)), dtype=int))
    raise IncompatibleDomain(f"unknown discretization mode {mode!r}")


@dataclass
class LinearOperator:
    """Assembled matrix with its quadrature and adjoint weights.

    ``matrix`` acts on interior unknowns; ``quad`` are the quadrature
    weights realizing the Euclidean pairing (self-adjointness holds as
    ``diag(quad) @ matrix`` symmetric); ``D = rho^(-2 delta_nu) * quad``.
    """

    matrix: sp.csr_matrix
    quad: np.ndarray
    D: np.ndarray
    rho: np.ndarray
    nodes: np.ndarray        # (M, d) coordinates of the unknowns
    potential: np.ndarray
    disc: object
    spec: SingularSpec | None
    constants: DerivedConstants | None
    # weighted-space scalings rho^(2-nu), rho^nu: in these variables the
    # operator is uniformly well conditioned, which is what makes the
    # direct solve (and the whole construction) behave as eps shrinks
    row_scale: np.ndarray = None
    col_scale: np.ndarray = None

    def pairing(self, w, v) -> float:
        """Quadrature inner product ``<w, v>``."""
        return float(np.sum(self.quad * w * v))

    def to_coo_text(self, path) -> None:
        """Dump the matrix as ``row col value`` lines for external checks."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v!r}\n")


def _radial_matrix(grid: RadialGrid, N: int, potential: np.ndarray):
    s, h = grid.s, grid.h
    n = s.size
    kappa = np.exp((N - 2.0) * (s[:-1] + 0.5 * h))  # at half nodes
    wN = np.exp(-N * s)
    lower = wN[1:-1] * kappa[:-1] / h**2
    upper = wN[1:-1] * kappa[1:] / h**2
    diag = -(lower + upper) + potential
    m = n - 2
    return sp.diags([lower[1:], diag, upper[:-1]], offsets=[-1, 0, 1],
                    shape=(m, m), format="csr")


def _box_matrix(grid: Box3dGrid, potential: np.ndarray):
    m = grid.axes[0].size - 2
    h2 = grid.h ** 2
    T = sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)],
                 offsets=[-1, 0, 1]) / h2
    eye = sp.identity(m)
    lap = (sp.kron(sp.kron(T, eye), eye) + sp.kron(sp.kron(eye, T), eye)
           + sp.kron(sp.kron(eye, eye), T))
    A = (lap + sp.diags(potential)).tocsr()
    return A


def assemble(disc, spec: SingularSpec | None, profile: RadialProfile | None,
             weights: WeightSelection | None, N: int | None = None,
             sigma: float | None = None) -> LinearOperator:
    """Assemble ``Delta + p ubar^(p-1)`` with Dirichlet rows eliminated.

    ``spec = None`` (or ``profile = None``) assembles the pure Laplacian,
    in which case the dimension ``N`` must be given for the radial mode.
    ``weights = None`` uses ``delta_nu = 0`` so ``D`` is the quadrature.
    """
    constants = profile.constants if profile is not None else None
    if N is None:
        if constants is None:
            raise ValueError("need N when assembling without a profile")
        N = constants.N
    delta_nu = weights.delta_nu if weights is not None else 0.0

    if isinstance(disc, RadialGrid):
        if spec is not None and disc.r[0] > spec.epsilons[0] * 1e-3 * (1 + 1e-12):
            raise IncompatibleDomain("radial grid must reach r_min <= eps/1000")
        r_int = disc.r[disc.interior]
        nodes = r_int[:, None]
        quad = np.exp(N * disc.s[disc.interior]) * disc.h  # r^(N-1) dr = r^N ds
        if spec is not None and profile is not None:
            ubar = approx_solution(spec, profile)
            pot = constants.p * ubar.radial_term(0, r_int) ** (constants.p - 1.0)
        else:
            pot = np.zeros(r_int.size)
        A = _radial_matrix(disc, N, pot)
        if spec is not None:
            wf = WeightFunction(spec.points, sigma if sigma is not None else spec.R)
            rho = wf(nodes)
        else:
            rho = r_int.copy()
    elif isinstance(disc, Box3dGrid):
        if N != 3:
            raise IncompatibleDomain("box3d is restricted to N = 3")
        nodes_all = disc.interior_points()
        keep = np.ones(nodes_all.shape[0], dtype=bool)
        keep[disc.singular_flat] = False
        if spec is not None and profile is not None:
            spec_eff = SingularSpec(points=disc.snapped_points,
                                    epsilons=spec.epsilons, R=spec.R,
                                    domain=spec.domain, cone_a=spec.cone_a)
            ubar = approx_solution(spec_eff, profile)
            pot_all = constants.p * ubar(nodes_all) ** (constants.p - 1.0)
            pot_all[~keep] = 0.0
        else:
            spec_eff = spec
            pot_all = np.zeros(nodes_all.shape[0])
        A_full = _box_matrix(disc, pot_all)
        A = A_full[keep][:, keep].tocsr()
        nodes = nodes_all[keep]
        quad = np.full(nodes.shape[0], disc.h**3)
        if spec_eff is not None:
            wf = WeightFunction(spec_eff.points,
                                sigma if sigma is not None else spec_eff.R)
            rho = wf(nodes)
        else:
            rho = np.linalg.norm(nodes, axis=1)
        pot = pot_all[keep]
        spec = spec_eff
    else:
        raise IncompatibleDomain(f"unsupported discretization {type(disc).__name__}")

    D = rho ** (-2.0 * delta_nu) * quad
    nu = weights.nu if weights is not None else (2.0 - N) / 2.0
    return LinearOperator(matrix=A, quad=quad, D=D, rho=rho, nodes=nodes,
                          potential=pot, disc=disc, spec=spec, constants=constants,
                          row_scale=rho ** (2.0 - nu), col_scale=rho**nu)


class RightInverse:
    """Right inverse ``G`` with range in the weighted adjoint's range.

    Box grids solve the symmetric positive normal system
    ``(L D L^T) z = f`` by conjugate gradients (preconditioned with an
    incomplete LU of ``L``, applied as ``L~^{-T} D^{-1} L~^{-1}``, which
    cancels the squared conditioning) and return ``w = D L^T z``.

    On radial grids the discrete operator is square and invertible, so
    ``D L^T (L D L^T)^{-1}`` collapses algebraically to ``L^{-1}`` and the
    adjoint-range element is obtained by factoring ``L`` itself; factoring
    the normal matrix would square an already steep condition number past
    what double precision can represent.  Either way a residual polish
    loop repeats the solve on ``f - L w`` until the requested relative
    residual is met.
    """

    def __init__(self, op: LinearOperator, cg_tol: float = 1e-8,
                 cg_maxiter: int = 20000, ilu_drop: float = 1e-4,
                 ilu_fill: float = 12.0):
        self.op = op
        L = op.matrix
        self._LT = L.T.tocsr()
        if isinstance(op.disc, RadialGrid):
            self._mode = "direct"
            Ls = sp.diags(op.row_scale) @ L @ sp.diags(op.col_scale)
            try:
                self._lu = spla.splu(Ls.tocsc())
            except RuntimeError as exc:
                raise SingularSystem(f"factorization failed: {exc}")
        else:
            self._mode = "cg"
            self._A = (L @ sp.diags(op.D) @ self._LT).tocsc()
            self.cg_tol = cg_tol
            self.cg_maxiter = cg_maxiter
            try:
                self._ilu = spla.spilu(L.tocsc(), drop_tol=ilu_drop,
                                       fill_factor=ilu_fill)
            except RuntimeError as exc:
                raise SingularSystem(f"ILU preconditioner failed: {exc}")
            Dinv = 1.0 / op.D

            def precond(x):
                y = self._ilu.solve(x, trans="N")
                return self._ilu.solve(Dinv * y, trans="T")

            self._M = spla.LinearOperator(self._A.shape, matvec=precond)

    def _correction(self, res: np.ndarray) -> np.ndarray:
        if self._mode == "direct":
            return self.op.col_scale * self._lu.solve(self.op.row_scale * res)
        z, info = spla.cg(self._A, res, rtol=self.cg_tol, atol=0.0,
                          maxiter=self.cg_maxiter, M=self._M)
        if info != 0:
            raise SolverStagnation(f"conjugate gradient stagnated (info={info})")
        return self.op.D * (self._LT @ z)

    def residual(self, w: np.ndarray, f: np.ndarray) -> float:
        """Relative residual ``||L w - f|| / ||f||`` in the weighted norm.

        Norms are taken as ``||rho^(2-nu) g||_2``, the discrete realization
        of the space the right-hand sides live in.  (The unweighted l2
        residual is not even measurable in double precision here: operator
        rows near the singular point carry ~rho^-2 factors that amplify
        round-off far above interesting residual levels.)
        """
        s = self.op.row_scale
        return float(np.linalg.norm(s * (self.op.matrix @ w - f))
                     / np.linalg.norm(s * f))

    def apply(self, f: np.ndarray, target: float | None = None,
              max_rounds: int = 25) -> np.ndarray:
        """Return ``w = G f`` with weighted relative residual below ``target``."""
        f = np.asarray(f, dtype=float)
        if not np.all(np.isfinite(f)):
            raise ValueError("right-hand side must be finite")
        s = self.op.row_scale
        norm_f = float(np.linalg.norm(s * f))
        if norm_f == 0.0:
            return np.zeros_like(f)
        if target is None:
            target = 1e-11 if self._mode == "direct" else 1e-8
        L = self.op.matrix
        w = np.zeros_like(f)
        res = f.copy()
        best = math.inf
        rel = math.inf
        for _ in range(max_rounds):
            w = w + self._correction(res)
            res = f - L @ w
            rel = float(np.linalg.norm(s * res)) / norm_f
            if rel <= target:
                return w
            if rel >= best * 0.5:
                break  # stalled
            best = min(best, rel)
        raise SolverStagnation(
            f"weighted residual polish stalled at {rel:.3e} (target {target:g})")

    def norm_estimate(self, nu: float, n_probes: int = 20, seed: int = 0) -> float:
        """Weighted operator norm proxy: max over random probes of
        ``||G f||_nu / ||f||_(nu-2)`` in the weighted sup pairing."""
        rng = np.random.default_rng(seed)
        rho = self.op.rho
        best = 0.0
        for _ in range(n_probes):
            f = rng.standard_normal(rho.size)
            w = self.apply(f)
            num = float(np.max(rho ** (-nu) * np.abs(w)))
            den = float(np.max(rho ** (-(nu - 2.0)) * np.abs(f)))
            best = max(best, num / den)
        return best


def right_inverse(op: LinearOperator, **kwargs) -> RightInverse:
    return RightInverse(op, **kwargs)


def max_principle_margin(alpha: float, K: int, constants: DerivedConstants) -> float:
    """Margin ``(N-2)^2 - 4 p alpha^(p-1) K`` of the maximum-principle
    condition for the alpha-normalized profile; positive certifies it."""
    N, p = constants.N, constants.p
    return (N - 2.0) ** 2 - 4.0 * p * alpha ** (p - 1.0) * K


def barrier_check(disc, spec: SingularSpec, profile: RadialProfile,
                  gamma: float):
    """Supersolution certificate: ``L rho^gamma <= -c rho^(gamma-2)``.

    Evaluates the closed form ``gamma (N-2+gamma) rho^(gamma-2)
    + p ubar^(p-1) rho^gamma`` on the nodes of the annuli
    ``eps_i <= rho <= 2R`` and returns the certified constant
    ``c = min -L(rho^gamma)/rho^(gamma-2)``; raises ``BarrierFailure``
    (naming the worst node) if the sign condition fails anywhere.
    """
    c = profile.constants
    N = c.N
    if not (2.0 - N < gamma < 0.0):
        raise ValueError(f"gamma must lie strictly in ({2 - N}, 0), got {gamma}")
    if isinstance(disc, RadialGrid):
        nodes = disc.r[disc.interior][:, None]
    else:
        keep = np.ones(disc.interior_points().shape[0], dtype=bool)
        keep[disc.singular_flat] = False
        nodes = disc.interior_points()[keep]
    dist = spec.min_distance(nodes)
    mask = np.zeros(dist.size, dtype=bool)
    for i in range(spec.K):
        di = np.linalg.norm(nodes - spec.points[i], axis=1)
        mask |= (di >= spec.epsilons[i]) & (di <= 2.0 * spec.R)
    if not np.any(mask):
        raise ValueError("no nodes inside the annuli; refine the grid")
    ubar = approx_solution(spec, profile)
    pot = c.p * ubar(nodes[mask]) ** (c.p - 1.0)
    rho = dist[mask]
    lhs = gamma * (N - 2.0 + gamma) * rho ** (gamma - 2.0) + pot * rho**gamma
    ratio = -lhs / rho ** (gamma - 2.0)
    cmin = float(ratio.min())
    if cmin <= 0.0:
        worst = nodes[mask][int(np.argmin(ratio))]
        raise BarrierFailure(
            f"barrier fails at node {worst} (margin {cmin:.3e}); "
            "normalize the profile with a smaller alpha")
    return cmin


def weighted_min_singular_vector(op: LinearOperator, nu: float):
    """Smallest singular pair of ``L`` in the ``nu``-weighted pairing.

    Returns ``(sigma_min, w)`` where ``w`` (physical scaling) minimizes
    ``||L w||_(nu-2) / ||w||_nu`` in the weighted L2 sense.  Dense; meant
    for radial grids.
    """
    rho = op.rho
    M = sp.diags(rho ** (2.0 - nu)) @ op.matrix @ sp.diags(rho**nu)
    Md = M.toarray()
    _, svals, Vt = np.linalg.svd(Md)
    w_hat = Vt[-1]
    return float(svals[-1]), rho**nu * w_hat

