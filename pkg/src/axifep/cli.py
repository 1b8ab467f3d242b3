"""Command-line front end: run, cavity, matpoint, verify.

Exit codes: 0 success, 2 configuration/input error, 3 solver failure,
4 verification failure.

AXIFEP_THREADS caps the BLAS thread pools used by the assembly's dense
kernels; it must take effect before numpy initialises, which is why the
environment block below precedes every numpy-importing statement.  It has
no effect if numpy was already imported by the embedding process.
"""

from __future__ import annotations

import argparse
import os
import sys

_threads = os.environ.get("AXIFEP_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import numpy as np  # noqa: E402

from . import config as config_mod  # noqa: E402
from . import fem_axisym as fem  # noqa: E402
from . import kinematics, material_mcc, oracles, outputs  # noqa: E402
from .fem_axisym import ConfigError  # noqa: E402

_I3 = np.eye(3)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _bc_factory(cfg, mesh):
    inner = mesh.bsets["inner"]
    top = mesh.bsets["top"]
    bottom = mesh.bsets["bottom"]
    axis = mesh.bsets.get("axis", np.zeros(0, dtype=int))
    Z_in = mesh.nodes[inner, 1]
    profile = cfg.u_bar * (Z_in - cfg.H / 2.0) * (2.0 / cfg.H)

    def bc_of_t(t):
        bcs = [
            fem.DirichletBC(2 * inner, profile * t),
            fem.DirichletBC(2 * inner + 1, np.zeros(inner.size)),
            fem.DirichletBC(2 * top + 1, np.zeros(top.size)),
            fem.DirichletBC(2 * bottom + 1, np.zeros(bottom.size)),
        ]
        if axis.size:
            # nodes on the symmetry axis cannot move radially
            bcs.append(fem.DirichletBC(2 * axis, np.zeros(axis.size)))
        return fem.merge_bcs(*bcs)

    return bc_of_t


def _nearest_gps(states, track):
    """Map each tracked (label, R, Z) to the index of the closest GP."""
    chosen = {}
    meta = {}
    for label, R, Z in track:
        best, dist = 0, np.inf
        for i, rec in enumerate(states):
            d = (rec.R - R) ** 2 + (rec.Z - Z) ** 2
            if d < dist:
                best, dist = i, d
        rec = states[best]
        chosen[label] = best
        meta[label] = (f"requested (R={R:g}, Z={Z:g}) -> element {rec.elem} "
                       f"gp {rec.gp} at (R={rec.R:.10g}, Z={rec.Z:.10g})")
    return chosen, meta


def _track_rows(step, n_steps, states, chosen):
    rows = []
    for label in sorted(chosen):
        rec = states[chosen[label]]
        st = rec.state
        p_sig = float(np.trace(st.zeta)) / (3.0 * st.J_e)
        s = st.zeta / st.J_e - p_sig * _I3
        rho_sig = float(np.sqrt(np.tensordot(s, s)))
        rows.append({
            "step": step.t * n_steps, "t": step.t, "label": label,
            "radial_disp": rec.r_prev - rec.R, "p_sigma": p_sig,
            "rho_sigma": rho_sig, "J": rec.J_prev, "J_e": st.J_e,
            "J_p": rec.J_prev / st.J_e, "yielded": st.yielded,
        })
    return rows


def cmd_run(args):
    try:
        cfg = config_mod.load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        mesh = fem.gen_cylinder_mesh(cfg.R_int, cfg.R_ext, cfg.H,
                                     cfg.n_R, cfg.n_Z)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(cfg.out_dir, exist_ok=True)
    states0 = fem.init_states(mesh, cfg.material)
    chosen, meta = _nearest_gps(states0, cfg.track)
    bc_of_t = _bc_factory(cfg, mesh)

    track_rows = []
    vtk_count = [0]

    def observer(step, states):
        track_rows.extend(_track_rows(step, cfg.T, states, chosen))
        vtk_count[0] += 1
        minus_p, jac = outputs.cell_averages(mesh, states)
        outputs.write_vtk(
            os.path.join(cfg.out_dir, f"field_{vtk_count[0]:04d}.vtk"),
            mesh, step.u, minus_p, jac,
            comment=f"axifep step {step.t * cfg.T:.10g}")

    failure = None
    result_steps = []

    def collect(step, states):
        result_steps.append(step)
        observer(step, states)

    try:
        fem.solve_ramp(cfg.formulation, mesh, cfg.material, bc_of_t,
                       cfg.T, tol=cfg.tol, k_max=cfg.k_max,
                       max_bisect=cfg.max_bisect, states=states0,
                       observer=collect)
    except (fem.SolverError, material_mcc.ConstitutiveError,
            kinematics.InvertedElementError) as exc:
        failure = exc

    outputs.write_convergence_csv(
        os.path.join(cfg.out_dir, "convergence.csv"), result_steps, cfg.T)
    outputs.write_track_csv(
        os.path.join(cfg.out_dir, "track.csv"), track_rows, meta)
    outputs.write_summary_csv(
        os.path.join(cfg.out_dir, "summary.csv"), cfg.formulation,
        result_steps)

    if failure is not None:
        print(f"solver failure: {failure}", file=sys.stderr)
        print(f"partial outputs retained in {cfg.out_dir}", file=sys.stderr)
        return 3
    iters = [s.report.iterations for s in result_steps]
    print(f"completed {len(result_steps)} steps "
          f"({cfg.formulation}); iterations min {min(iters)} "
          f"max {max(iters)} avg {sum(iters) / len(iters):.3f}")
    print(f"outputs in {cfg.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# cavity
# ---------------------------------------------------------------------------

def _print_matrix(name, M):
    print(f"{name}:")
    for row in M:
        print("  [" + "  ".join(f"{x: .12e}" for x in row) + "]")


def cmd_cavity(args):
    if args.alpha <= 0.0:
        print(f"config error: alpha must be positive, got {args.alpha}",
              file=sys.stderr)
        return 2
    R, Theta = args.radius, args.theta
    F_cart, F_cyl, J_exact = oracles.cavity_fixture(args.alpha, R, Theta)
    _print_matrix("F (Cartesian components)", F_cart)
    _print_matrix("F (cylindrical mixed components)", F_cyl)
    J_cart = float(np.linalg.det(F_cart))
    F = kinematics.DefGrad(comp=F_cyl, R_ref=R, r_cur=args.alpha * R)
    J_cyl = F.jacobian()
    ok = abs(J_cart - J_cyl) <= 1e-12 * abs(J_exact)
    print(f"J via Cartesian determinant : {J_cart:.15e}")
    print(f"J via mixed-component route : {J_cyl:.15e}")
    print(f"exact alpha^2               : {J_exact:.15e}")
    print(f"agreement (1e-12 relative)  : {'ok' if ok else 'MISMATCH'}")
    return 0 if ok else 4


# ---------------------------------------------------------------------------
# matpoint
# ---------------------------------------------------------------------------

def _sym_expm(eps):
    lam, vec = np.linalg.eigh(eps)
    return (vec * np.exp(lam)) @ vec.T


def cmd_matpoint(args):
    try:
        with open(args.path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    header = None
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            print(f"config error: line {lineno}: non-numeric entry in "
                  f"{line!r}", file=sys.stderr)
            return 2
        if header is None:
            if len(nums) != 7:
                print(f"config error: line {lineno}: header needs 7 values "
                      f"(E nu H kappa alpha m p_c0), got {len(nums)}",
                      file=sys.stderr)
                return 2
            header = nums
            continue
        if len(nums) != 4:
            print(f"config error: line {lineno}: strain rows need 4 values "
                  f"(eps_rr eps_tt eps_zz eps_rz), got {len(nums)}",
                  file=sys.stderr)
            return 2
        rows.append(nums)
    if header is None:
        print("config error: empty input", file=sys.stderr)
        return 2

    E, nu, Hmod, kappa, alpha, m, p_c0_mag = header
    if p_c0_mag <= 0.0:
        print(f"config error: p_c0 is a magnitude and must be positive, "
              f"got {p_c0_mag}", file=sys.stderr)
        return 2
    try:
        params = material_mcc.make_params(E=E, nu=nu, H=Hmod, kappa=kappa,
                                          alpha_h=alpha, m=m,
                                          p_c0=-p_c0_mag)
    except material_mcc.ConstitutiveError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    b_e = _I3.copy()
    z = 0.0
    eps_prev = np.zeros((3, 3))
    out_rows = []
    for i, (err, ett, ezz, erz) in enumerate(rows, start=1):
        eps = np.array([[err, 0.0, erz],
                        [0.0, ett, 0.0],
                        [erz, 0.0, ezz]])
        F_inc = _sym_expm(eps - eps_prev)
        b_tr = F_inc @ b_e @ F_inc
        try:
            state, _ = material_mcc.return_map(b_tr, z, params)
        except material_mcc.ConstitutiveError as exc:
            print(f"solver failure at row {i}: {exc}", file=sys.stderr)
            return 3
        p_z = float(np.trace(state.zeta)) / 3.0
        s = state.zeta - p_z * _I3
        rho_z = float(np.sqrt(np.tensordot(s, s)))
        out_rows.append({
            "row": i, "p_zeta": p_z, "q_zeta": np.sqrt(1.5) * rho_z,
            "rho_zeta": rho_z, "z": state.z, "dgam": state.dgam,
            "phi_trial": state.phi_trial, "yielded": state.yielded,
        })
        b_e, z, eps_prev = state.b_e, state.z, eps

    outputs.write_matpoint_csv(args.out, out_rows)
    print(f"wrote {len(out_rows)} rows to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_tangent():
    """FD check of the material and global tangents on a plastic state."""
    params = material_mcc.make_params(E=1.375e9, nu=0.375, H=765e6, kappa=0.0,
                                      alpha_h=1.0, m=1.0, p_c0=-2.4e8)
    mesh = fem.gen_cylinder_mesh(10.0, 15.0, 10.0, 3, 6)
    inner = mesh.bsets["inner"]
    top = mesh.bsets["top"]
    bottom = mesh.bsets["bottom"]
    Z_in = mesh.nodes[inner, 1]
    profile = (Z_in - 5.0) * 0.2

    def bc_of_t(t):
        return fem.merge_bcs(
            fem.DirichletBC(2 * inner, profile * t),
            fem.DirichletBC(2 * inner + 1, np.zeros(inner.size)),
            fem.DirichletBC(2 * top + 1, np.zeros(top.size)),
            fem.DirichletBC(2 * bottom + 1, np.zeros(bottom.size)))

    trail = []

    def keep_last_two(step, states):
        trail.append((step.u.copy(), states))
        del trail[:-2]

    res = fem.solve_ramp("UL", mesh, params, bc_of_t, 8, tol=1e-8,
                         observer=keep_last_two)
    plastic = sum(1 for r in res.states if r.state.yielded)
    rng = np.random.default_rng(2024)
    dofs = rng.choice(mesh.ndof, size=24, replace=False)
    # probe the last step's converged iterate on the previous commit's
    # history; committed plastic states sit on the yield surface where the
    # residual has a corner
    (u_prev, states_prev), (u_last, _) = trail
    rep = oracles.fd_global_stiffness(mesh, states_prev, u_last, params,
                                      h=1e-6, dofs=dofs, u_from=u_prev)
    # material-level check at a plastic trial state
    rec = next(r for r in res.states if r.state.yielded)
    lam, vec = np.linalg.eigh(0.5 * _sym_logm(rec.state.b_e))
    eps_push = (vec * (lam + 2e-4)) @ vec.T
    b_tr = _sym_expm(2.0 * eps_push)
    mat_err = material_mcc.tangent_fd_check(b_tr, rec.state.z, params, 1e-6)
    return {
        "global_fd_max_rel_err": rep.max_rel_err,
        "global_fd_h": rep.h,
        "material_fd_max_rel_err": float(mat_err),
        "plastic_gauss_points": int(plastic),
        "pass": bool(rep.max_rel_err <= 1e-5 and mat_err <= 1e-5),
    }


def _sym_logm(M):
    lam, vec = np.linalg.eigh(M)
    return (vec * np.log(lam)) @ vec.T


def _verify_quadrature():
    params = material_mcc.make_params(E=1.375e9, nu=0.375, H=765e6, kappa=0.0,
                                      alpha_h=1.0, m=1.0, p_c0=-2.4e8)
    mesh = fem.gen_cylinder_mesh(1.0, 2.0, 1.0, 1, 1)
    vol = oracles.quadrature_oracle(mesh, 0, np.zeros(mesh.ndof), params,
                                    "volume", n=64)
    vol_exact = 0.5 * (2.0 ** 2 - 1.0 ** 2) * 1.0
    vol_err = abs(vol - vol_exact) / vol_exact

    def max_fint_err(u):
        r, _, stn = fem.assemble_ul(mesh, fem.init_states(mesh, params),
                                    u, u, params)
        scale = np.abs(r).max()
        worst = 0.0
        for node in (0, 2, 5):
            for d in (0, 1):
                q = oracles.quadrature_oracle(mesh, 0, u, params,
                                              "f_int_component", (node, d),
                                              n=64)
                dof = 2 * mesh.elems[0][node] + d
                worst = max(worst, abs(q - r[dof]) / scale)
        return worst, stn

    u_el = np.zeros(mesh.ndof)
    u_el.reshape(-1, 2)[:, 0] = -1e-3 * mesh.nodes[:, 0]
    el_err, stn = max_fint_err(u_el)
    el_plastic = any(s.state.yielded for s in stn)

    u_pl = np.zeros(mesh.ndof)
    u_pl.reshape(-1, 2)[:, 0] = 1e-3 * mesh.nodes[:, 0]
    pl_err, stn = max_fint_err(u_pl)
    pl_all_plastic = all(s.state.yielded for s in stn)

    return {
        "volume_rel_err": vol_err,
        "f_int_elastic_rel_err": el_err,
        "f_int_plastic_rel_err": pl_err,
        "elastic_state_is_elastic": bool(not el_plastic),
        "plastic_state_fully_plastic": bool(pl_all_plastic),
        "pass": bool(vol_err <= 1e-12 and el_err <= 1e-10
                     and pl_err <= 1e-6 and not el_plastic and pl_all_plastic),
    }


def _verify_ul_vs_tl():
    params = material_mcc.make_params(E=1.375e9, nu=0.375, H=765e6, kappa=0.0,
                                      alpha_h=1.0, m=1.0, p_c0=-2.4e8)
    mesh = fem.gen_cylinder_mesh(10.0, 15.0, 10.0, 3, 6)
    inner = mesh.bsets["inner"]
    top = mesh.bsets["top"]
    bottom = mesh.bsets["bottom"]
    Z_in = mesh.nodes[inner, 1]
    profile = (Z_in - 5.0) * 0.2

    def bc_of_t(t):
        return fem.merge_bcs(
            fem.DirichletBC(2 * inner, profile * t),
            fem.DirichletBC(2 * inner + 1, np.zeros(inner.size)),
            fem.DirichletBC(2 * top + 1, np.zeros(top.size)),
            fem.DirichletBC(2 * bottom + 1, np.zeros(bottom.size)))

    res_ul = fem.solve_ramp("UL", mesh, params, bc_of_t, 6, tol=1e-10)
    res_tl = fem.solve_ramp("TL", mesh, params, bc_of_t, 6, tol=1e-10)
    worst = 0.0
    for s_ul, s_tl in zip(res_ul.steps, res_tl.steps):
        scale = max(np.abs(s_ul.u).max(), 1e-30)
        worst = max(worst, float(np.abs(s_ul.u - s_tl.u).max() / scale))
    return {
        "n_steps": len(res_ul.steps),
        "max_rel_displacement_delta": worst,
        "pass": bool(worst <= 1e-8 and len(res_ul.steps) == len(res_tl.steps)),
    }


def cmd_verify(args):
    suites = {
        "tangent": _verify_tangent,
        "quadrature": _verify_quadrature,
        "ul-vs-tl": _verify_ul_vs_tl,
    }
    names = list(suites) if args.which == "all" else [args.which]
    report = {}
    ok = True
    for name in names:
        print(f"verify {name} ...", flush=True)
        report[name.replace("-", "_")] = result = suites[name]()
        ok = ok and result["pass"]
        print(f"  {'pass' if result['pass'] else 'FAIL'}: "
              + ", ".join(f"{k}={v:.3e}" for k, v in result.items()
                          if isinstance(v, float)))
    report["pass"] = ok
    outputs.write_verify_json(args.out, report)
    print(f"report written to {args.out}")
    return 0 if ok else 4


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="axifep",
        description="Axisymmetric finite-strain elasto-plasticity on Q8 "
                    "meshes (per-radian quantities).")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run a configured ramp simulation")
    p_run.add_argument("config", help="path to a key = value config file")
    p_run.set_defaults(fn=cmd_run)

    p_cav = sub.add_parser("cavity", help="closed-form cylinder inflation check")
    p_cav.add_argument("--alpha", type=float, required=True,
                       help="radial scale factor (> 0)")
    p_cav.add_argument("--radius", type=float, default=1.0)
    p_cav.add_argument("--theta", type=float, default=0.7)
    p_cav.set_defaults(fn=cmd_cavity)

    p_mat = sub.add_parser("matpoint",
                           help="drive the return map along a strain path")
    p_mat.add_argument("path", help="header (E nu H kappa alpha m p_c0) "
                                    "then rows eps_rr eps_tt eps_zz eps_rz")
    p_mat.add_argument("--out", default="matpoint.csv")
    p_mat.set_defaults(fn=cmd_matpoint)

    p_ver = sub.add_parser("verify", help="run the oracle suites")
    p_ver.add_argument("which",
                       choices=["tangent", "quadrature", "ul-vs-tl", "all"])
    p_ver.add_argument("--out", default="verify.json")
    p_ver.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (fem.SolverError, material_mcc.ConstitutiveError,
            kinematics.InvertedElementError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
