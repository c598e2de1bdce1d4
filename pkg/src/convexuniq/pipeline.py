"""Report-producing commands and the end-to-end uniqueness pipeline.

Each ``cmd_*`` takes a :class:`RunConfig`, returns ``(report, exit_code)``
and, when ``config.out`` is set, writes its report (and CSV data) there.
Exit codes: 0 success, 2 curvature condition violated, 1 error.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass

import numpy as np

from . import io
from .bodies import check_convexity, gradient_map, spherical_hessian
from .cap import CapProblem, solve_cap_dirichlet
from .elliptic import ThresholdPolicy, assemble_global, kernel_analysis, mollify_coefficients
from .errors import DomainError, HypothesisViolated
from .functionals import (check_condition, coefficient_field_secant, coefficient_preset, evaluate_functional,
                          get_functional, principal_radii)
from .integrals import integral_report, pointwise_margins, w22_certificate
from .maxprin import max_set, phi_field, rho_field, rho_max, translation_witness
from .sphere import MAX_L, MIN_L, build_grid

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED = 0, 1, 2
VERDICTS = ("identical", "equal_up_to_translation", "hypothesis_violated", "inconclusive")


@dataclass
class RunConfig:
    grid_L: int = 24
    functional: str = "mean"
    body1: str = "ball:1"
    body2: str | None = None
    tol_condition: float = 1e-9
    tol_witness: float = 1e-6
    threshold_kind: str = "h2"
    threshold_C: float | None = None
    coefficients: str = "identity"
    cap_center: tuple = (0.0, 0.0, 1.0)
    cap_radius: float = 0.8
    mollify: float | None = None
    out: str | None = None
    seed: int = 0
    format_version: str = io.SCHEMA_VERSION

    def __post_init__(self):
        if not isinstance(self.grid_L, int) or not MIN_L <= self.grid_L <= MAX_L:
            raise DomainError(f"grid_L must be an integer in [{MIN_L}, {MAX_L}], got {self.grid_L!r}")
        if not (self.tol_condition > 0 and self.tol_witness > 0):
            raise DomainError("tolerances must be positive")
        get_functional(self.functional)

    @property
    def grid(self):
        return build_grid(self.grid_L)

    def policy(self):
        if self.threshold_C is None:
            return ThresholdPolicy(self.threshold_kind)
        return ThresholdPolicy(self.threshold_kind, self.threshold_C)

    def as_dict(self):
        return asdict(self)


def _save(config, name, obj):
    if config.out:
        io.write_json(os.path.join(config.out, name), obj)


def _save_csv(config, name, header, rows):
    if config.out:
        io.write_csv(os.path.join(config.out, name), header, rows)


def _envelope(config, command, payload):
    # tangential tensor components in reports are in the chart frame; vectors are ambient Cartesian
    return {"schema": io.SCHEMA_VERSION, "command": command, "config": config.as_dict(), "frame": "thetaphi",
            **payload}


def _bodies(config, need_two=False):
    grid = config.grid
    b1 = io.parse_body_spec(config.body1, grid)
    if config.body2 is None:
        if need_two:
            raise DomainError("this command needs --body2")
        return b1, None
    return b1, io.parse_body_spec(config.body2, grid)


# --------------------------------------------------------------- commands
def cmd_body(config):
    b1, _ = _bodies(config)
    X = gradient_map(b1).points
    conv = check_convexity(b1)
    rep = _envelope(config, "body", {
        "body": io.body_to_dict(b1),
        "convexity": conv,
        "truncation": b1.truncation,
        "boundary_radius_range": [float(np.min(np.linalg.norm(X, axis=1))), float(np.max(np.linalg.norm(X, axis=1)))],
    })
    _save(config, "body.json", rep)
    _save_csv(config, "boundary.csv", ["nx", "ny", "nz", "X", "Y", "Z"], np.column_stack([b1.grid.nodes, X]))
    return rep, EXIT_OK


def cmd_curvature(config):
    b1, _ = _bodies(config)
    f = get_functional(config.functional)
    W = spherical_hessian(b1)
    r1, r2 = principal_radii(W)
    vals = evaluate_functional(f, W)
    rep = _envelope(config, "curvature", {
        "radii_min": [float(np.min(r1)), float(np.min(r2))],
        "radii_max": [float(np.max(r1)), float(np.max(r2))],
        "functional": f.name,
        "functional_range": [float(np.min(vals)), float(np.max(vals))],
    })
    _save(config, "curvature.json", rep)
    _save_csv(config, "curvature.csv", ["x", "y", "z", "lambda1", "lambda2", "f"],
              np.column_stack([b1.grid.nodes, r1, r2, vals]))
    return rep, EXIT_OK


def cmd_condition(config):
    b1, b2 = _bodies(config, need_two=True)
    cond = check_condition(config.functional, b1, b2)
    ok = cond.max_abs <= config.tol_condition
    rep = _envelope(config, "condition", {"residual_max": cond.max_abs, "functional": cond.functional,
                                          "holds": bool(ok)})
    _save(config, "condition.json", rep)
    _save_csv(config, "condition.csv", ["x", "y", "z", "value"], io.field_csv_rows(cond.residual))
    return rep, EXIT_OK if ok else EXIT_VIOLATED


def _coefficients(config):
    grid = config.grid
    if config.body2 is not None:
        b1, b2 = _bodies(config, need_two=True)
        F = coefficient_field_secant(get_functional(config.functional), spherical_hessian(b1), spherical_hessian(b2))
    else:
        F = coefficient_preset(config.coefficients, grid)
    if config.mollify:
        F = mollify_coefficients(F, config.mollify)
    return F


def cmd_kernel(config):
    F = _coefficients(config)
    kr = kernel_analysis(assemble_global(F), config.policy())
    rep = _envelope(config, "kernel", {"kernel": kr.as_dict(), "coefficients": F.provenance,
                                       "ellipticity": F.ellipticity._asdict()})
    _save(config, "kernel.json", rep)
    for k, b in enumerate(kr.basis):
        _save(config, f"kernel_basis_{k}.json", io.field_to_dict(b))
    return rep, EXIT_OK


def cmd_cap(config):
    F = _coefficients(config)
    b1, _ = _bodies(config)
    sol = solve_cap_dirichlet(CapProblem(np.asarray(config.cap_center, float), config.cap_radius, b1.u, F))
    mask, vals = sol.on_grid(config.grid)
    rep = _envelope(config, "cap", {"report": sol.report, "nodes_in_cap": int(mask.sum()),
                                    "difference_from_boundary_body_max": float(np.max(np.abs(vals - b1.u.values[mask])))
                                    if mask.any() else None})
    _save(config, "cap.json", rep)
    _save_csv(config, "cap.csv", ["x", "y", "z", "value"], np.column_stack([config.grid.nodes[mask], vals]))
    return rep, EXIT_OK


def cmd_maxprin(config):
    b1, b2 = _bodies(config)
    u = b1.u if b2 is None else b1.u - b2.u
    rho = rho_field(u)
    rmax, p, node = rho_max(u)
    ms = max_set(rho)
    payload = {"rho_max": rmax, "rho_argmax": p, "M_components": ms.n_components, "max_set": ms.as_dict()}
    if b2 is not None:
        try:
            w = translation_witness(b1, b2, config.functional, config.tol_condition, config.tol_witness)
        except HypothesisViolated as exc:
            payload["witness"] = {"error": str(exc), "condition_residual": exc.residual}
            rep = _envelope(config, "maxprin", payload)
            _save(config, "maxprin.json", rep)
            return rep, EXIT_VIOLATED
        payload["witness"] = w.as_dict()
        if w.E is not None:
            _save_csv(config, "phi_E.csv", ["x", "y", "z", "value"], io.field_csv_rows(phi_field(u, w.E)))
    rep = _envelope(config, "maxprin", payload)
    _save(config, "maxprin.json", rep)
    _save_csv(config, "rho.csv", ["x", "y", "z", "value"], io.field_csv_rows(rho))
    return rep, EXIT_OK


def cmd_integrals(config):
    b1, b2 = _bodies(config)
    rep_i = integral_report(b1, b2)
    payload = {"integrals": rep_i.as_dict()}
    code = EXIT_OK
    if b2 is not None:
        try:
            cert = w22_certificate(b1, b2, config.functional, config.tol_condition)
            payload["certificate"] = cert.as_dict()
            m = pointwise_margins(b1, b2, config.functional)
            _save_csv(config, "margins.csv", ["x", "y", "z", "margin1", "margin2", "margin2_literal"],
                      np.column_stack([b1.grid.nodes, m["margin1"], m["margin2"], m["margin2_literal"]]))
        except HypothesisViolated as exc:
            payload["certificate"] = {"error": str(exc), "condition_residual": exc.residual}
            code = EXIT_VIOLATED
    rep = _envelope(config, "integrals", payload)
    _save(config, "integrals.json", rep)
    return rep, code


# ------------------------------------------------------------- uniqueness
@dataclass
class UniquenessVerdict:
    verdict: str
    translation: list
    condition_residual: float
    kernel: dict | None = None
    witness: dict | None = None
    certificate: dict | None = None
    ellipticity: dict | None = None
    message: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    def as_dict(self):
        return asdict(self)


def uniqueness(b1, b2, f, tol_condition=1e-9, tol_witness=1e-6, policy=None):
    """Run the full chain on two bodies and return a :class:`UniquenessVerdict` plus stage artifacts."""
    f = get_functional(f)
    cond = check_condition(f, b1, b2)
    stages = {"condition": {"residual_max": cond.max_abs}}
    if cond.max_abs > tol_condition:
        return UniquenessVerdict("hypothesis_violated", [0.0, 0.0, 0.0], cond.max_abs,
                                 message=f"condition residual {cond.max_abs:.3e} > {tol_condition:.1e}"), stages
    W1, W2 = spherical_hessian(b1), spherical_hessian(b2)
    F = coefficient_field_secant(f, W1, W2)
    ell = F.ellipticity
    stages["coefficients"] = {"provenance": F.provenance, "ellipticity": ell._asdict()}
    cert = w22_certificate(b1, b2, f, tol_condition)
    stages["certificate"] = cert.as_dict()
    kr = kernel_analysis(assemble_global(F), policy)
    stages["kernel"] = kr.as_dict()
    w = translation_witness(b1, b2, f, tol_condition, tol_witness)
    stages["witness"] = w.as_dict()
    if w.verdict == "identical":
        verdict = "identical"
    elif w.verdict == "equal_up_to_translation" and kr.kernel_dim == 3:
        verdict = "equal_up_to_translation"
    else:
        verdict = "inconclusive"
    out = UniquenessVerdict(verdict, w.translation.tolist(), cond.max_abs, kernel=kr.as_dict(),
                            witness=w.as_dict(), certificate=cert.as_dict(), ellipticity=ell._asdict(),
                            message="" if verdict != "inconclusive" else
                            f"witness verdict {w.verdict!r}, kernel dimension {kr.kernel_dim}")
    return out, stages


def cmd_uniqueness(config):
    b1, b2 = _bodies(config, need_two=True)
    verdict, stages = uniqueness(b1, b2, config.functional, config.tol_condition, config.tol_witness,
                                 config.policy())
    for name, payload in stages.items():
        _save(config, f"{name}.json", _envelope(config, name, payload))
    rep = _envelope(config, "uniqueness", {"verdict": verdict.as_dict()})
    _save(config, "verdict.json", rep)
    code = EXIT_VIOLATED if verdict.verdict == "hypothesis_violated" else EXIT_OK
    return verdict, code


COMMANDS = {
    "body": cmd_body, "curvature": cmd_curvature, "condition": cmd_condition, "kernel": cmd_kernel,
    "cap": cmd_cap, "maxprin": cmd_maxprin, "integrals": cmd_integrals, "uniqueness": cmd_uniqueness,
}
