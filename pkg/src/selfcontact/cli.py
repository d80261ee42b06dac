"""Command-line entry point: mesh / solve / oracle / validate.

Exit codes: 0 success, 1 I/O failure, 2 configuration error,
3 solver non-convergence, 4 validation findings.  Heavy imports happen
inside the command functions so --threads can pin BLAS pools first.
"""

import argparse
import json
import os
import sys

CSV_HEADER = "level,nodes,np_nodes,total,elastic,penalty,body,iterations,seconds"


def _load_run_config(args):
    from .config import RunConfig, load_config

    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    if getattr(args, "level", None) is not None:
        cfg.level = args.level
    if getattr(args, "mode", None) is not None:
        cfg.initial_mode = args.mode
        from .config import RunConfig as _RC
        _RC.__post_init__(cfg)
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    return cfg


def _out_dir(cfg):
    out = cfg.out_dir or os.environ.get("SELFCONTACT_OUT", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _build_problem(cfg):
    import numpy as np

    from .fem import BodyForce, Material
    from .mesh import generate_pincer_mesh, tag_node_sets

    mesh = generate_pincer_mesh(cfg.level)
    sets = tag_node_sets(mesh, cfg.resolved_dirichlet_region(), cfg.resolved_np_region())
    material = Material(cfg.youngs_modulus, cfg.poisson_ratio)
    body = BodyForce(cfg.g_load, cfg.load_profile)
    return mesh, sets, material, body


def cmd_mesh(args) -> int:
    from .errors import SelfContactError
    from .vtkio import write_vtk

    try:
        cfg = _load_run_config(args)
        mesh, sets, _, _ = _build_problem(cfg)
    except SelfContactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(cfg)
    path = os.path.join(out, f"pincer_level{cfg.level}.vtk")
    try:
        write_vtk(path, mesh.nodes, mesh.tets, title=f"pincer mesh level {cfg.level}")
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=sys.stderr)
        return 1
    print(f"level {cfg.level}: nodes={mesh.num_nodes} tets={len(mesh.tets)} "
          f"boundary_tris={len(mesh.boundary_tris)} h={mesh.h}")
    print(f"node sets: dirichlet={len(sets.dirichlet)} nonpenetration={len(sets.nonpenetration)}")
    print(f"wrote {path}")
    return 0


def _append_csv(path, row):
    new = not os.path.exists(path)
    with open(path, "a") as f:
        if new:
            f.write(CSV_HEADER + "\n")
        f.write(row + "\n")


def cmd_solve(args) -> int:
    import numpy as np

    from .errors import SelfContactError
    from .fem import elastic_energy_density
    from .optimize import (OptimizerOptions, initial_asymmetric, initial_symmetric,
                           minimize_total, solve_linear_elastic)
    from .penalty import (PenaltyConfig, build_surface_quadrature,
                          surface_penalty_density)
    from .reduction import DofPartition, schur_reduce
    from .validate import check_orientation

    try:
        cfg = _load_run_config(args)
        mesh, sets, material, body = _build_problem(cfg)
        pen_cfg = PenaltyConfig.from_grid(mesh.h, beta=cfg.beta, a=cfg.kernel_width,
                                          weight=cfg.penalty_weight,
                                          s_factor=cfg.s_factor, r_factor=cfg.r_factor)
    except SelfContactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(cfg)

    try:
        u_elast, elast_report = solve_linear_elastic(mesh, material, body, sets)
        if cfg.initial_mode == "elastic":
            u, report = u_elast, elast_report
        else:
            if cfg.initial_mode == "symmetric":
                u_init = initial_symmetric(u_elast)
            elif cfg.initial_mode == "asymmetric":
                u_init = initial_asymmetric(mesh, sets)
            else:
                u_init = _read_initial(cfg.initial_file, mesh.num_nodes)
            from .fem import assemble_load, assemble_stiffness

            part = DofPartition.from_node_sets(sets)
            k = assemble_stiffness(mesh, material)
            b = assemble_load(mesh, body)
            sys_ = schur_reduce(k, b, part)
            quad = build_surface_quadrature(mesh, sets)
            opts = OptimizerOptions(gtol=cfg.gtol, max_iter=cfg.max_iter,
                                    wolfe_c1=cfg.wolfe_c1, wolfe_c2=cfg.wolfe_c2,
                                    barrier_floor=cfg.barrier_floor or None, log=True)
            u, report = minimize_total(sys_, quad, pen_cfg, u_init, opts)
    except SelfContactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    bd = report.breakdown
    row = (f"{cfg.level},{mesh.num_nodes},{len(sets.nonpenetration)},"
           f"{bd.total:.6e},{bd.elastic:.6e},{bd.penalty:.6e},{bd.body:.6e},"
           f"{report.iterations},{report.wall_time:.3f}")
    print(CSV_HEADER)
    print(row)

    try:
        quad = build_surface_quadrature(mesh, sets)
        dens = np.zeros(mesh.num_nodes)
        if len(quad.np_nodes):
            y_np = quad.ref_positions + u[quad.np_nodes]
            dens[quad.np_nodes] = surface_penalty_density(quad, y_np, pen_cfg)
        dets, _ = check_orientation(mesh, u)
        vtk_path = os.path.join(out, f"solution_level{cfg.level}_{cfg.initial_mode}.vtk")
        from .vtkio import write_vtk

        write_vtk(vtk_path, mesh.nodes + u, mesh.tets,
                  point_data={"displacement": u, "penalty_density": dens},
                  cell_data={"elastic_energy_density": elastic_energy_density(mesh, material, u),
                             "det_F": dets},
                  title=f"pincer solve level {cfg.level} mode {cfg.initial_mode}")
        np.savez(os.path.join(out, f"state_level{cfg.level}_{cfg.initial_mode}.npz"),
                 nodes=mesh.nodes, tets=mesh.tets, boundary_tris=mesh.boundary_tris,
                 level=mesh.level, h=mesh.h, u=u,
                 dirichlet=sets.dirichlet, nonpenetration=sets.nonpenetration)
        _append_csv(os.path.join(out, "results.csv"), row)
    except OSError as exc:
        print(f"error writing artifacts: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {vtk_path}")
    return 0 if report.converged else 3


def _read_initial(path, num_nodes):
    import numpy as np

    from .errors import ConfigError

    u = np.load(path) if path.endswith(".npy") else np.loadtxt(path)
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    if len(u) != num_nodes:
        raise ConfigError(f"initial displacement in {path} has {len(u)} nodes, mesh has {num_nodes}")
    return u


def cmd_oracle(args) -> int:
    from .errors import SelfContactError
    from .penalty import analytic_segment_penalty, discrete_segment_penalty

    if not 0.0 < args.eps < 1.0:
        print("error: eps must lie in (0, 1)", file=sys.stderr)
        return 2
    try:
        exact = analytic_segment_penalty(args.a, args.b, args.eps)
        print("n,discrete,analytic,rel_error")
        for n in args.n:
            disc = discrete_segment_penalty(n, args.a, args.b, args.eps)
            rel = abs(disc - exact) / abs(exact) if exact else abs(disc)
            print(f"{n},{disc:.12e},{exact:.12e},{rel:.3e}")
    except SelfContactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_validate(args) -> int:
    import numpy as np

    from .mesh import TetMesh
    from .validate import validate_state

    path = args.path
    if os.path.isdir(path):
        candidates = sorted(f for f in os.listdir(path) if f.endswith(".npz"))
        if not candidates:
            print(f"error: no state .npz found in {path}", file=sys.stderr)
            return 1
        path = os.path.join(path, candidates[-1])
    if not os.path.exists(path):
        print(f"error: {path} does not exist", file=sys.stderr)
        return 1

    if path.endswith(".npz"):
        data = np.load(path)
        mesh = TetMesh(nodes=data["nodes"], tets=data["tets"],
                       boundary_tris=data["boundary_tris"],
                       level=int(data["level"]), h=float(data["h"]))
        u = data["u"]
    else:
        from .vtkio import read_vtk

        deformed, tets, point_data, _ = read_vtk(path)
        if "displacement" not in point_data:
            print("error: VTK file has no displacement vectors", file=sys.stderr)
            return 1
        u = point_data["displacement"]
        nodes = deformed - u
        from .mesh import extract_boundary

        mesh = TetMesh(nodes=nodes, tets=tets, boundary_tris=np.empty((0, 3), np.int64),
                       level=1, h=float(np.diff(np.unique(nodes[:, 0])).min()))
        mesh = TetMesh(nodes=nodes, tets=tets, boundary_tris=extract_boundary(mesh),
                       level=1, h=mesh.h)

    report = validate_state(mesh, u, rho=args.rho,
                            sigma_lower=args.sigma_lower, sigma_upper=args.sigma_upper,
                            gap_threshold=args.gap_threshold or None)
    for line in report.lines():
        print(line)
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 4


def build_parser():
    parser = argparse.ArgumentParser(prog="selfcontact",
                                     description="Pincer self-contact benchmark solver")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/OpenMP thread pools")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a key = value config file")
    common.add_argument("--level", type=int, help="mesh refinement level")
    common.add_argument("--out", help="output directory (default $SELFCONTACT_OUT or ./out)")
    common.add_argument("--threads", type=int, help="cap BLAS/OpenMP thread pools")

    p_mesh = sub.add_parser("mesh", parents=[common], help="generate the pincer mesh")
    p_mesh.set_defaults(func=cmd_mesh)

    p_solve = sub.add_parser("solve", parents=[common], help="run a solve")
    p_solve.add_argument("--mode", choices=["elastic", "symmetric", "asymmetric", "file"],
                         help="initial deformation / solve mode")
    p_solve.set_defaults(func=cmd_solve)

    p_oracle = sub.add_parser("oracle", help="two-segment penalty quadrature check")
    p_oracle.add_argument("--a", type=float, default=0.0, help="horizontal shift")
    p_oracle.add_argument("--b", type=float, default=0.0, help="deformed gap")
    p_oracle.add_argument("--eps", type=float, default=0.5, help="penalty range (0, 1)")
    p_oracle.add_argument("--n", type=int, nargs="+", default=[32, 64, 128, 256, 512],
                          help="nodes per segment")
    p_oracle.set_defaults(func=cmd_oracle)

    p_val = sub.add_parser("validate", help="a-posteriori checks on a stored solve")
    p_val.add_argument("path", help="run directory, state .npz, or solution .vtk")
    p_val.add_argument("--rho", type=float, default=1.0)
    p_val.add_argument("--sigma-lower", type=float, default=0.5)
    p_val.add_argument("--sigma-upper", type=float, default=2.0)
    p_val.add_argument("--gap-threshold", type=float, default=0.0,
                       help="interpenetration flag distance (default h/2)")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = getattr(args, "threads", None)
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
