"""Robust spatiotemporal fusion as a constrained convex program.

Estimates the noiseless high-resolution image on a target date from one
HR/LR pair on a reference date plus the target-date LR image. The total
variation of both HR estimates is minimized subject to hard constraints:
edge similarity between the dates, per-band brightness slabs, l2 fidelity
balls around each observation, and l1 budgets for sparse-noise estimates.
The program is assembled onto the generic primal-dual solver with five
primal slots (the two HR estimates and three sparse-noise fields) and six
dual slots (the coupling expressions).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import ppds
from .linops import DiffOperator, IdentityOperator, NegatedOperator, downsample_blur
from .prox import (
    Ball,
    l12_norm,
    project_hyperslab,
    project_l2_ball,
    prox_l12,
)
from .raster import MultiBandImage, band_means, upsample_nearest
from .simulate import CaseConfig

PRIMAL_NAMES = ("h_r", "h_t", "s_hr", "s_lr", "s_lt")


@dataclass(frozen=True)
class RostfParams:
    """All scalars of the fusion program.

    lam balances the two smoothness terms; p selects the norm of the
    edge-similarity ball; beta/c are per-band brightness slab radii and
    centers; eps_* are the l2 fidelity radii; eta_* the sparse l1 budgets;
    k the HR/LR resolution factor.
    """

    lam: float
    p: int
    alpha: float
    beta: np.ndarray
    c: np.ndarray
    eps_h: float
    eps_l: float
    eta_h: float
    eta_l: float
    k: int

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p}")
        beta = np.asarray(self.beta, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        if beta.shape != c.shape or beta.ndim != 1:
            raise ValueError("beta and c must be 1-D vectors of equal length")
        for name in ("alpha", "eps_h", "eps_l", "eta_h", "eta_l"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if np.any(beta < 0):
            raise ValueError("beta entries must be non-negative")
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "c", c)

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "p": self.p,
            "alpha": self.alpha,
            "beta": self.beta.tolist(),
            "c": self.c.tolist(),
            "eps_h": self.eps_h,
            "eps_l": self.eps_l,
            "eta_h": self.eta_h,
            "eta_l": self.eta_l,
            "k": self.k,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "RostfParams":
        return cls(
            lam=float(d["lam"]),
            p=int(d["p"]),
            alpha=float(d["alpha"]),
            beta=np.asarray(d["beta"], dtype=np.float64),
            c=np.asarray(d["c"], dtype=np.float64),
            eps_h=float(d["eps_h"]),
            eps_l=float(d["eps_l"]),
            eta_h=float(d["eta_h"]),
            eta_l=float(d["eta_l"]),
            k=int(d["k"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "RostfParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FusionInput:
    """The three observed images: HR reference, LR reference, LR target."""

    h_r: MultiBandImage
    l_r: MultiBandImage
    l_t: MultiBandImage

    def __post_init__(self):
        if self.l_r.shape != self.l_t.shape:
            raise ValueError(
                f"LR geometries differ: {self.l_r.shape} vs {self.l_t.shape}"
            )
        if self.h_r.bands != self.l_r.bands:
            raise ValueError("band counts differ between HR and LR inputs")
        kh, rh = divmod(self.h_r.height, self.l_r.height)
        kw, rw = divmod(self.h_r.width, self.l_r.width)
        if rh or rw or kh != kw or kh < 1:
            raise ValueError(
                f"HR geometry {self.h_r.height}x{self.h_r.width} is not an integer "
                f"multiple of LR geometry {self.l_r.height}x{self.l_r.width}"
            )

    @property
    def k(self) -> int:
        return self.h_r.height // self.l_r.height


@dataclass
class FusionOutput:
    """Primal estimates at exit plus solver diagnostics."""

    h_t_hat: MultiBandImage
    h_r_denoised: MultiBandImage
    s_hr: MultiBandImage
    s_lr: MultiBandImage
    s_lt: MultiBandImage
    converged: bool
    iterations: int
    rel_change: float
    residuals: np.ndarray
    trace: ppds.Trace = field(repr=False)


def default_params(inp: FusionInput, noise: CaseConfig, p: int = 2) -> RostfParams:
    """Parameter defaults derived from the inputs and known noise levels.

    The slab radius is floored at 1e-6 so perfectly matched band means do
    not collapse the slab to a hyperplane. The sparse budgets are the
    expected l1 mass of salt-and-pepper corruption on [0, 1] data (each
    corrupted sample deviates by 0.5 on average); both are overridable.
    """
    nhb = inp.h_r.pixels * inp.h_r.bands
    nlb = inp.l_r.pixels * inp.l_r.bands
    mean_lt = band_means(inp.l_t)
    sb = downsample_blur(inp.h_r.height, inp.h_r.width, inp.h_r.bands, inp.k)
    return RostfParams(
        lam=1.0,
        p=p,
        alpha=(2e-3 if p == 1 else 1e-6) * nhb,
        beta=np.maximum(np.abs(band_means(inp.l_r) - band_means(inp.h_r)), 1e-6),
        c=mean_lt - noise.r_l * (0.5 - mean_lt),
        eps_h=0.98 * noise.sigma_h * np.sqrt(nhb * (1.0 - noise.r_h)),
        eps_l=float(np.linalg.norm(inp.l_r.data - sb.forward(inp.h_r.data))),
        eta_h=0.5 * noise.r_h * nhb,
        eta_l=0.5 * noise.r_l * nlb,
        k=inp.k,
    )


def _band_slab_prox(params: RostfParams, pixels: int):
    """Prox of the summed per-band brightness slabs (indicator; gamma-free)."""
    centers = params.c * pixels
    radii = params.beta * pixels

    def prox(v, _gamma):
        m = v.reshape(params.beta.size, pixels)
        out = np.empty_like(m)
        for b in range(m.shape[0]):
            out[b] = project_hyperslab(m[b], centers[b], radii[b])
        return out.ravel()

    return prox


def build_problem(inp: FusionInput, params: RostfParams) -> ppds.ProblemGraph:
    """Assemble the split program onto the generic solver graph.

    Ten nonzero coupling blocks tie the five primal slots to the six dual
    expressions: the two difference images, their mismatch, and the three
    fidelity sums.
    """
    h, w, b = inp.h_r.shape
    nh = inp.h_r.pixels * b
    nl = inp.l_r.pixels * b
    diff = DiffOperator(h, w, b, "stacked")
    sb = downsample_blur(h, w, b, inp.k)
    eye_h = IdentityOperator(nh)
    eye_l = IdentityOperator(nl)

    edge_ball = Ball(p=params.p, radius=params.alpha)
    eta_h_ball = Ball(p=1, radius=params.eta_h)
    eta_l_ball = Ball(p=1, radius=params.eta_l)

    primal = [
        ppds.PrimalSlot(nh, None, name="h_r"),
        ppds.PrimalSlot(nh, _band_slab_prox(params, inp.h_r.pixels), name="h_t"),
        ppds.PrimalSlot(nh, lambda v, _g: eta_h_ball.project(v), name="s_hr"),
        ppds.PrimalSlot(nl, lambda v, _g: eta_l_ball.project(v), name="s_lr"),
        ppds.PrimalSlot(nl, lambda v, _g: eta_l_ball.project(v), name="s_lt"),
    ]
    dual = [
        ppds.DualSlot(2 * nh, lambda v, g: prox_l12(v, g, b), name="smooth_r"),
        ppds.DualSlot(2 * nh, lambda v, g: prox_l12(v, params.lam * g, b),
                      name="smooth_t"),
        ppds.DualSlot(2 * nh, lambda v, _g: edge_ball.project(v), name="edge_sim"),
        ppds.DualSlot(nh, lambda v, _g: project_l2_ball(v, inp.h_r.data, params.eps_h),
                      name="fit_hr"),
        ppds.DualSlot(nl, lambda v, _g: project_l2_ball(v, inp.l_r.data, params.eps_l),
                      name="fit_lr"),
        ppds.DualSlot(nl, lambda v, _g: project_l2_ball(v, inp.l_t.data, params.eps_l),
                      name="fit_lt"),
    ]
    edges = [
        ppds.Edge(0, 0, diff),
        ppds.Edge(1, 1, diff),
        ppds.Edge(2, 0, diff),
        ppds.Edge(2, 1, NegatedOperator(diff)),
        ppds.Edge(3, 0, eye_h),
        ppds.Edge(3, 2, eye_h),
        ppds.Edge(4, 0, sb),
        ppds.Edge(4, 3, eye_l),
        ppds.Edge(5, 1, sb),
        ppds.Edge(5, 4, eye_l),
    ]
    return ppds.ProblemGraph(primal, dual, edges)


def initial_state(inp: FusionInput) -> list[np.ndarray]:
    """Warm start: the observed HR, upsampled target LR, zero sparse fields."""
    nh = inp.h_r.pixels * inp.h_r.bands
    nl = inp.l_r.pixels * inp.l_r.bands
    return [
        inp.h_r.data.copy(),
        upsample_nearest(inp.l_t, inp.k).data.copy(),
        np.zeros(nh),
        np.zeros(nl),
        np.zeros(nl),
    ]


def _residuals_fn(inp: FusionInput, params: RostfParams):
    h, w, b = inp.h_r.shape
    diff = DiffOperator(h, w, b, "stacked")
    sb = downsample_blur(h, w, b, inp.k)
    pixels = inp.h_r.pixels

    def residuals(ys) -> np.ndarray:
        h_r, h_t, s_hr, s_lr, s_lt = ys
        edge_gap = diff.forward(h_r) - diff.forward(h_t)
        if params.p == 1:
            edge_norm = float(np.abs(edge_gap).sum())
        else:
            edge_norm = float(np.linalg.norm(edge_gap))
        means = h_t.reshape(b, pixels).mean(axis=1)
        return np.array([
            edge_norm - params.alpha,
            float(np.max(np.abs(params.c - means) - params.beta)),
            float(np.linalg.norm(inp.h_r.data - (h_r + s_hr))) - params.eps_h,
            float(np.linalg.norm(inp.l_r.data - (sb.forward(h_r) + s_lr))) - params.eps_l,
            float(np.linalg.norm(inp.l_t.data - (sb.forward(h_t) + s_lt))) - params.eps_l,
            float(np.abs(s_hr).sum()) - params.eta_h,
            float(np.abs(s_lr).sum()) - params.eta_l,
            float(np.abs(s_lt).sum()) - params.eta_l,
        ])

    return residuals


def constraint_residuals(output: FusionOutput, inp: FusionInput,
                         params: RostfParams) -> np.ndarray:
    """Signed violation of each of the eight constraints (<= 0 means satisfied).

    Order: edge similarity, worst per-band brightness slab, the three l2
    fidelity balls, the three sparse l1 budgets.
    """
    ys = [
        output.h_r_denoised.data,
        output.h_t_hat.data,
        output.s_hr.data,
        output.s_lr.data,
        output.s_lt.data,
    ]
    return _residuals_fn(inp, params)(ys)


def objective_value(inp: FusionInput, params: RostfParams, h_r: np.ndarray,
                    h_t: np.ndarray) -> float:
    """Smoothness objective: group-sparse norm of both difference images."""
    h, w, b = inp.h_r.shape
    diff = DiffOperator(h, w, b, "stacked")
    return l12_norm(diff.forward(h_r), b) + params.lam * l12_norm(diff.forward(h_t), b)


def fuse(inp: FusionInput, params: RostfParams,
         stop: ppds.StoppingRule | None = None,
         trace_every: int = 1) -> FusionOutput:
    """Run the solver and package estimates plus diagnostics."""
    graph = build_problem(inp, params)
    h, w, b = inp.h_r.shape
    diff = DiffOperator(h, w, b, "stacked")

    def objective(ys) -> float:
        return (l12_norm(diff.forward(ys[0]), b)
                + params.lam * l12_norm(diff.forward(ys[1]), b))

    residuals = _residuals_fn(inp, params)
    state = ppds.run(
        graph,
        initial_state(inp),
        stop=stop,
        objective=objective,
        residuals=residuals,
        trace_every=trace_every,
    )
    lh, lw = inp.l_r.height, inp.l_r.width
    return FusionOutput(
        h_t_hat=MultiBandImage(h, w, b, state.ys[1]),
        h_r_denoised=MultiBandImage(h, w, b, state.ys[0]),
        s_hr=MultiBandImage(h, w, b, state.ys[2]),
        s_lr=MultiBandImage(lh, lw, b, state.ys[3]),
        s_lt=MultiBandImage(lh, lw, b, state.ys[4]),
        converged=state.converged,
        iterations=state.n,
        rel_change=state.rel_change,
        residuals=residuals(state.ys),
        trace=state.trace,
    )
