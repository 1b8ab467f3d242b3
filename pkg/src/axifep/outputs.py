"""CSV and legacy-ASCII-VTK writers.

Column layouts are part of the tool's contract:

* convergence.csv: ``step,iteration,err``, one row per Newton assembly;
  ``step`` is the pseudo-time in units of the nominal step (integral for
  unbisected steps, fractional for committed sub-steps), ``iteration``
  counts assemblies from 1, ``err`` is ||r^(k)|| / ||r^(1)||.
* track.csv: ``step,t,label,radial_disp,p_sigma,rho_sigma,J,J_e,J_p,yielded``,
  one row per committed (sub)step per tracked Gauss point; a ``#``
  comment header echoes each label's chosen Gauss point.
* summary.csv: ``formulation,n_steps,min_iterations,max_iterations,avg_iterations``.
* field_####.vtk: quadratic-quad unstructured grid over the reference
  nodes, nodal displacement vectors, cell-averaged -p^sigma and J.

Floats are written with %.16e so repeated runs are byte-identical.
"""

from __future__ import annotations

import json

import numpy as np


def _fmt(x):
    return f"{x:.16e}"


def write_convergence_csv(path, steps, n_steps_nominal):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,iteration,err\n")
        for st in steps:
            step_id = st.t * n_steps_nominal
            sid = f"{step_id:.10g}"
            for k, err in enumerate(st.report.err_hist, start=1):
                fh.write(f"{sid},{k},{_fmt(err)}\n")


def write_track_csv(path, rows, gp_meta):
    """``rows``: dicts with the column values; ``gp_meta``: label -> text."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for label in sorted(gp_meta):
            fh.write(f"# {label}: {gp_meta[label]}\n")
        fh.write("step,t,label,radial_disp,p_sigma,rho_sigma,J,J_e,J_p,yielded\n")
        for r in rows:
            fh.write(
                f"{r['step']:.10g},{_fmt(r['t'])},{r['label']},"
                f"{_fmt(r['radial_disp'])},{_fmt(r['p_sigma'])},"
                f"{_fmt(r['rho_sigma'])},{_fmt(r['J'])},{_fmt(r['J_e'])},"
                f"{_fmt(r['J_p'])},{int(r['yielded'])}\n")


def write_summary_csv(path, formulation, steps):
    iters = [st.report.iterations for st in steps]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("formulation,n_steps,min_iterations,max_iterations,avg_iterations\n")
        if iters:
            fh.write(f"{formulation},{len(iters)},{min(iters)},{max(iters)},"
                     f"{_fmt(sum(iters) / len(iters))}\n")
        else:
            fh.write(f"{formulation},0,0,0,{_fmt(0.0)}\n")


def write_vtk(path, mesh, u, cell_minus_p, cell_J, comment="axifep field output"):
    """Legacy ASCII unstructured grid with VTK_QUADRATIC_QUAD (type 23) cells.

    Points are the reference coordinates (R, Z, 0); the displacement field
    carries the motion so viewers can warp by vector.  The local node order
    of the mesh (corners counter-clockwise, then bottom/right/top/left
    midsides) is already the VTK quadratic-quad order.
    """
    n, m = mesh.n_nodes, mesh.n_els
    u2 = np.asarray(u, dtype=float).reshape(-1, 2)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(comment + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for i in range(n):
            fh.write(f"{_fmt(mesh.nodes[i, 0])} {_fmt(mesh.nodes[i, 1])} "
                     f"{_fmt(0.0)}\n")
        fh.write(f"CELLS {m} {9 * m}\n")
        for e in range(m):
            fh.write("8 " + " ".join(str(i) for i in mesh.elems[e]) + "\n")
        fh.write(f"CELL_TYPES {m}\n")
        for _ in range(m):
            fh.write("23\n")
        fh.write(f"POINT_DATA {n}\n")
        fh.write("VECTORS displacement double\n")
        for i in range(n):
            fh.write(f"{_fmt(u2[i, 0])} {_fmt(u2[i, 1])} {_fmt(0.0)}\n")
        fh.write(f"CELL_DATA {m}\n")
        fh.write("SCALARS minus_p_sigma double 1\nLOOKUP_TABLE default\n")
        for e in range(m):
            fh.write(_fmt(cell_minus_p[e]) + "\n")
        fh.write("SCALARS jacobian double 1\nLOOKUP_TABLE default\n")
        for e in range(m):
            fh.write(_fmt(cell_J[e]) + "\n")


def cell_averages(mesh, states):
    """Cell-averaged -p^sigma and J from the committed Gauss records."""
    minus_p = np.zeros(mesh.n_els)
    jac = np.zeros(mesh.n_els)
    for e in range(mesh.n_els):
        recs = states[e * 9:(e + 1) * 9]
        ps = [np.trace(r.state.zeta) / (3.0 * r.state.J_e) for r in recs]
        minus_p[e] = -float(np.mean(ps))
        jac[e] = float(np.mean([r.J_prev for r in recs]))
    return minus_p, jac


def write_matpoint_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("row,p_zeta,q_zeta,rho_zeta,z,dgam,phi_trial,yielded\n")
        for r in rows:
            fh.write(f"{r['row']},{_fmt(r['p_zeta'])},{_fmt(r['q_zeta'])},"
                     f"{_fmt(r['rho_zeta'])},{_fmt(r['z'])},{_fmt(r['dgam'])},"
                     f"{_fmt(r['phi_trial'])},{int(r['yielded'])}\n")


def write_verify_json(path, report):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
