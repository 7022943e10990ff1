"""Numerical checks for the identities and estimates behind the scheme.

Each check runs a quantified sweep (fixed seed, stated instance counts) and
returns a LemmaReport with the worst observed ratio.  Inequalities pass at
max_ratio <= 1 + 1e-10; identities are measured as relative deviations and
pass at 1e-12 unless stated otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .discretization import (
    DoDScheme,
    SchemeConfig,
    bilinear_a_dod,
    bilinear_J,
    face_side_means,
)
from .field import RampTestProblem
from .norms import (
    beta_seminorm,
    h1_norm,
    projection_error_norms,
    triple_star_norm,
)

INEQ_TOL = 1e-10  # slack on ratio <= 1
IDENT_TOL = 1e-12  # relative deviation for identities


@dataclass
class LemmaReport:
    lemma_id: str
    kind: str  # "inequality" | "identity"
    instances: int
    max_ratio: float
    passed: bool
    tol: float
    seed: int | None = None
    details: dict = dc_field(default_factory=dict)

    @classmethod
    def inequality(cls, lemma_id, ratios, seed=None, tol=INEQ_TOL, **details):
        ratios = np.atleast_1d(np.asarray(ratios, dtype=float))
        mx = float(ratios.max()) if ratios.size else 0.0
        return cls(lemma_id, "inequality", int(ratios.size), mx, mx <= 1.0 + tol, tol, seed, details)

    @classmethod
    def identity(cls, lemma_id, deviations, seed=None, tol=IDENT_TOL, **details):
        dev = np.atleast_1d(np.asarray(deviations, dtype=float))
        mx = float(np.abs(dev).max()) if dev.size else 0.0
        # stored ratio is 1 + worst relative deviation
        return cls(lemma_id, "identity", int(dev.size), 1.0 + mx, mx <= tol, tol, seed, details)

    def csv_row(self) -> str:
        return f"{self.lemma_id},{self.instances},{self.max_ratio:.16e},{self.passed}"


def _random_fields(scheme, samples, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(samples, scheme.mesh.n_cells)), rng


def cell_flux_sums(scheme: DoDScheme):
    """Per-cell (sum_in |flux|, sum_out |flux|, signed closure) over faces."""
    mesh, table = scheme.mesh, scheme.table
    nc = mesh.n_cells
    sin = np.zeros(nc)
    sout = np.zeros(nc)
    closure = np.zeros(nc)
    for side, cells, sign in ((0, mesh.f_left, 1.0), (1, mesh.f_right, -1.0)):
        valid = cells >= 0
        ids = cells[valid]
        signed = sign * table.flux_in[valid]
        np.add.at(closure, ids, signed)
        np.add.at(sin, ids, np.where(signed < 0.0, -signed, 0.0))
        np.add.at(sout, ids, np.where(signed > 0.0, signed, 0.0))
    return sin, sout, closure


def check_incompressibility(scheme: DoDScheme) -> LemmaReport:
    """Per-cell flux closure: inflow and outflow |beta.n| masses agree."""
    sin, sout, closure = cell_flux_sums(scheme)
    perimeter = np.bincount(scheme.mesh.f_left, weights=scheme.mesh.f_length,
                            minlength=scheme.mesh.n_cells)
    has_r = scheme.mesh.f_right >= 0
    perimeter += np.bincount(scheme.mesh.f_right[has_r],
                             weights=scheme.mesh.f_length[has_r],
                             minlength=scheme.mesh.n_cells)
    scale = perimeter * scheme.velocity.inf_norm
    dev = np.maximum(np.abs(closure), np.abs(sin - sout)) / scale
    return LemmaReport.identity("flux-closure", dev, n_cells=scheme.mesh.n_cells)


def check_inverse_trace(scheme: DoDScheme) -> LemmaReport:
    """Inflow |beta.n| mass per cell against (4|beta|_inf/h)|E|, capacity-
    weighted against |E|/(tau h) on stabilized cells."""
    closure = check_incompressibility(scheme)
    sin, sout, _ = cell_flux_sums(scheme)
    mesh = scheme.mesh
    binf = scheme.velocity.inf_norm
    tau = scheme.config.tau
    bound = (4.0 * binf / mesh.h) * mesh.areas
    ratios = np.divide(sin, bound, out=np.zeros_like(sin), where=bound > 0)
    st = scheme.stab
    if len(st.cells):
        stab_bound = mesh.areas[st.cells] / (tau * mesh.h)
        ratios = ratios.copy()
        ratios[st.cells] = st.alpha * sin[st.cells] / stab_bound
    rep = LemmaReport.inequality(
        "inverse-trace", ratios, stabilized=int(len(st.cells))
    )
    rep.passed = rep.passed and closure.passed
    rep.details["flux_closure_dev"] = closure.max_ratio - 1.0
    return rep


def check_dissipation(scheme: DoDScheme, samples: int = 100, seed: int = 0) -> LemmaReport:
    """a_dod(v, v) = 1/2 |v|_beta^2 for random discrete fields."""
    fields, _ = _random_fields(scheme, samples, seed)
    dev = []
    for v in fields:
        lhs = bilinear_a_dod(scheme.mesh, scheme.table, scheme.stab, v, v)
        rhs = 0.5 * beta_seminorm(scheme, v) ** 2
        dev.append(abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return LemmaReport.identity("discrete-dissipation", dev, seed=seed)


def check_identities(scheme: DoDScheme, samples: int = 100, seed: int = 0) -> list[LemmaReport]:
    """Face-sum identities: weighted average-jump sum and product-jump sum."""
    mesh, table = scheme.mesh, scheme.table
    fields, rng = _random_fields(scheme, samples, seed)
    w_fields = rng.uniform(-1.0, 1.0, size=fields.shape)
    interior = mesh.f_right >= 0
    omega = np.where(interior, 1.0, 0.5)
    dev1, dev2 = [], []
    for v, w in zip(fields, w_fields):
        mv = face_side_means(mesh, table, v)
        mw = face_side_means(mesh, table, w)
        jump_v = np.where(interior, mv[:, 0] - mv[:, 1], mv[:, 0])
        avg_v = np.where(interior, 0.5 * (mv[:, 0] + mv[:, 1]), mv[:, 0])
        terms1 = omega * avg_v * table.flux_in * jump_v
        dev1.append(abs(terms1.sum()) / max(np.abs(terms1).sum(), 1e-300))
        prod_jump = np.where(
            interior, mv[:, 0] * mw[:, 0] - mv[:, 1] * mw[:, 1], mv[:, 0] * mw[:, 0]
        )
        terms2 = table.flux_in * prod_jump
        dev2.append(abs(terms2.sum()) / max(np.abs(terms2).sum(), 1e-300))
    return [
        LemmaReport.identity("average-jump-sum", dev1, seed=seed),
        LemmaReport.identity("product-jump-sum", dev2, seed=seed),
    ]


def check_algebraic_identity(samples: int = 100_000, seed: int = 0) -> LemmaReport:
    """1/2 A^2 + a B^2 + a A B = 1/2 ((1-a) A^2 + a B^2 + a (A+B)^2)."""
    rng = np.random.default_rng(seed)
    A = rng.uniform(-10.0, 10.0, samples)
    B = rng.uniform(-10.0, 10.0, samples)
    a = rng.uniform(0.0, 1.0, samples)
    lhs = 0.5 * A * A + a * B * B + a * A * B
    rhs = 0.5 * ((1.0 - a) * A * A + a * B * B + a * np.square(A + B))
    scale = 0.5 * A * A + a * B * B + np.abs(a * A * B) + 1e-300
    return LemmaReport.identity(
        "capacity-split-algebra", np.abs(lhs - rhs) / scale, seed=seed, tol=1e-14
    )


def check_inverse_estimate(scheme: DoDScheme, samples: int = 100, seed: int = 0) -> LemmaReport:
    """|w|_beta <= 2 sqrt(C_tr/h) ||w||_L2 for random discrete fields."""
    fields, _ = _random_fields(scheme, samples, seed)
    c = 2.0 * math.sqrt(scheme.c_tr / scheme.h)
    ratios = [
        beta_seminorm(scheme, w) / (c * scheme.l2_norm(w)) for w in fields
    ]
    return LemmaReport.inequality("inverse-estimate", ratios, seed=seed)


def _mixed_samples(scheme, samples, seed):
    """Random elements of smooth + discrete: exact snapshots plus noise."""
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, scheme.problem.t_final, 4)
    out = []
    for k in range(samples):
        disc = rng.uniform(-1.0, 1.0, scheme.mesh.n_cells)
        if k % 2 == 0:
            t = float(times[(k // 2) % len(times)])
            smooth = lambda p, t=t: scheme.problem.exact(t, p)
            out.append((smooth, disc))
        else:
            out.append((None, disc))
    return out


def check_boundedness(scheme: DoDScheme, samples: int = 100, seed: int = 0) -> list[LemmaReport]:
    """|a_dod(v, w)| <= |||v|||_* |w|_beta and ||A v|| <= sqrt(C_tr/h)|v|_beta."""
    rng = np.random.default_rng(seed + 1)
    ratios1 = []
    for smooth, disc in _mixed_samples(scheme, samples, seed):
        v = (smooth, disc) if smooth is not None else disc
        w = rng.uniform(-1.0, 1.0, scheme.mesh.n_cells)
        a = bilinear_a_dod(scheme.mesh, scheme.table, scheme.stab, v, w)
        bound = triple_star_norm(scheme, v) * beta_seminorm(scheme, w)
        ratios1.append(abs(a) / max(bound, 1e-300))
    fields, _ = _random_fields(scheme, samples, seed + 2)
    c = math.sqrt(scheme.c_tr / scheme.h)
    ratios2 = [
        scheme.l2_norm(scheme.apply(v)) / max(c * beta_seminorm(scheme, v), 1e-300)
        for v in fields
    ]
    return [
        LemmaReport.inequality("boundedness-star", ratios1, seed=seed),
        LemmaReport.inequality("boundedness-operator", ratios2, seed=seed),
    ]


def check_consistency(
    scheme: DoDScheme,
    times: tuple[float, ...] = (0.0, 0.25, 0.5),
    samples: int = 100,
    seed: int = 0,
) -> LemmaReport:
    """|J(u(t), w)| <= sqrt(tau h) |beta|_W1inf ||u(t)||_H1 |w|_beta."""
    rng = np.random.default_rng(seed)
    tau = scheme.config.tau
    factor = math.sqrt(tau * scheme.h) * scheme.velocity.w1inf_norm
    ratios = []
    for t in times:
        u_t = lambda p, t=t: scheme.problem.exact(t, p)
        grad_t = lambda p, t=t: scheme.problem.exact_gradient(t, p)
        bound_t = factor * h1_norm(scheme, u_t, grad=grad_t)
        for _ in range(samples):
            w = rng.uniform(-1.0, 1.0, scheme.mesh.n_cells)
            j = bilinear_J(scheme.mesh, scheme.table, scheme.stab, u_t, w)
            ratios.append(abs(j) / max(bound_t * beta_seminorm(scheme, w), 1e-300))
    return LemmaReport.inequality(
        "stabilization-consistency", ratios, seed=seed, times=list(times)
    )


def check_projection(
    problem: RampTestProblem,
    config: SchemeConfig,
    n_values: tuple[int, ...] = (16, 32, 64, 128),
    schemes: dict | None = None,
) -> LemmaReport:
    """||u - Pi u|| <= (sqrt2/pi) h ||grad u|| plus the sqrt(h) starred slope."""
    l2_ratios = []
    stars = []
    hs = []
    cb = math.inf
    for n in n_values:
        scheme = (schemes or {}).get(n) or DoDScheme(problem, config, n)
        eb = projection_error_norms(scheme, t=0.0)
        grad_norm = math.sqrt(
            scheme.cellquad.integrate_total(
                lambda p: (np.asarray(problem.u0_gradient(p)) ** 2).sum(axis=-1)
            )
        )
        l2_ratios.append(eb.l2 / ((math.sqrt(2.0) / math.pi) * scheme.h * grad_norm))
        stars.append(eb.triple_star)
        hs.append(scheme.h)
        cb = min(cb, scheme.c_b)
    slope = float(np.polyfit(np.log(hs), np.log(stars), 1)[0])
    rep = LemmaReport.inequality(
        "projection-error", l2_ratios, star_slope=slope, c_b=cb
    )
    rep.passed = rep.passed and 0.4 <= slope <= 0.6
    return rep


def check_energy_decay(
    problem: RampTestProblem,
    config: SchemeConfig,
    n: int,
    steps: int = 200,
) -> LemmaReport:
    """Per-step L2 non-increase with zero inflow under the stability CFL."""
    scheme = DoDScheme(problem.with_zero_inflow(), config, n)
    dt = scheme.cfl_dt()
    u = scheme.project_initial()
    norms = [scheme.l2_norm(u)]
    worst = 0.0
    t = 0.0
    for _ in range(steps):
        u = scheme.step(u, t, dt)
        t += dt
        norms.append(scheme.l2_norm(u))
        worst = max(worst, norms[-1] - norms[-2])
    min_alpha = float(scheme.stab.alpha.min()) if len(scheme.stab.cells) else 1.0
    min_frac = float(scheme.mesh.areas.min()) / scheme.h**2
    # ratio: worst per-step norm increase against the 1e-13 roundoff budget
    rep = LemmaReport.inequality(
        "energy-decay",
        [max(worst, 0.0) / 1e-13],
        tol=0.0,
        steps=steps, min_alpha=min_alpha, min_volume_fraction=min_frac,
    )
    rep.instances = steps
    return rep


def run_all(
    problem: RampTestProblem,
    config: SchemeConfig,
    n_values: tuple[int, ...] = (16, 32),
    samples: int = 100,
    seed: int = 0,
) -> list[LemmaReport]:
    """The full verification sweep used by the CLI `verify` subcommand."""
    reports: list[LemmaReport] = [check_algebraic_identity(seed=seed)]
    schemes = {n: DoDScheme(problem, config, n) for n in n_values}
    for n, scheme in schemes.items():
        tag = f"@n={n}"
        reps = [
            check_incompressibility(scheme),
            check_inverse_trace(scheme),
            check_dissipation(scheme, samples, seed),
            *check_identities(scheme, samples, seed),
            check_inverse_estimate(scheme, samples, seed),
            *check_boundedness(scheme, samples, seed),
            check_consistency(scheme, samples=samples, seed=seed),
        ]
        for r in reps:
            r.lemma_id += tag
        reports.extend(reps)
    # the projection slope needs a refinement ladder of at least three meshes
    ladder = sorted(set(n_values))
    while len(ladder) < 3:
        ladder.append(ladder[-1] * 2)
    reports.append(check_projection(problem, config, tuple(ladder), schemes=schemes))
    reports.append(check_energy_decay(problem, config, max(n_values), steps=100))
    return reports
