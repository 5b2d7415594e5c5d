"""Command-line interface: pipeline stages and experiment studies."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import studies
from .factorization import PivotBreakdown, ldlt_exact, ldlt_incomplete, ldlt_incomplete_tol
from .localization import SpectralSet
from .ordering import (
    Permutation,
    natural_order,
    nested_dissection_cartesian,
    nested_dissection_general,
    permute,
    read_permutation,
    write_permutation,
)
from .pexsi import PoleExpansion, pexsi_evaluate
from .selinv import closedness_audit, selinv_exact, selinv_incomplete
from .sparse import (
    MeshSpec,
    SparseSymmetric,
    random_complex_symmetric,
    read_matrix_market,
    shift,
    toy_hamiltonian,
    write_matrix_market,
)
from .symbolic import symbolic_levels


def parse_complex(text: str) -> complex:
    """``"0.98"``, ``"0.98,0.1"`` (real, imaginary) or ``"0.98+0.1j"``."""
    text = text.strip()
    if "," in text:
        re, im = text.split(",")
        return complex(float(re), float(im))
    return complex(text.replace(" ", ""))


def parse_int_list(text: str) -> list[int]:
    """``"1,2,5"`` or an inclusive range ``"6:20"``."""
    out: list[int] = []
    for part in text.split(","):
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def parse_fit_range(text: str) -> tuple[int, int]:
    parts = text.replace(":", ",").split(",")
    if len(parts) != 2:
        raise ValueError(f"fit range must be LO,HI, got {text!r}")
    lo, hi = (int(x) for x in parts)
    if lo > hi:
        raise ValueError(f"fit range is reversed: {text!r}")
    return lo, hi


def _add_matrix_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="inp", help="Matrix Market input (default: toy Hamiltonian)")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--open", action="store_true", help="open instead of periodic boundaries")
    p.add_argument("--order", "--method", dest="order", default="auto", choices=["auto", "nd", "general", "natural"],
                   help="vertex order; auto = nested dissection on meshes in 2D/3D")
    p.add_argument("--perm", help="permutation file overriding --order")


def _load_h(args) -> tuple[SparseSymmetric, MeshSpec | None]:
    if args.inp:
        return read_matrix_market(args.inp), None
    spec = MeshSpec(args.dim, args.m, periodic=not args.open)
    return toy_hamiltonian(spec), spec


def _order_for(args, h: SparseSymmetric, spec: MeshSpec | None) -> Permutation:
    if getattr(args, "perm", None):
        return read_permutation(args.perm)
    kind = args.order
    if kind == "auto":
        kind = "nd" if spec is not None and spec.dim > 1 else "natural"
    if kind == "nd":
        if spec is None:
            return nested_dissection_general(h)
        return nested_dissection_cartesian(spec)
    if kind == "general":
        return nested_dissection_general(h)
    return natural_order(h.n)


def _shifted(args):
    h, spec = _load_h(args)
    p = _order_for(args, h, spec)
    return h, p, shift(permute(h, p), parse_complex(args.z))


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_gen_matrix(args) -> int:
    if args.random:
        rng = np.random.default_rng(args.seed)
        a = random_complex_symmetric(args.random, args.density, rng)
    else:
        a, _ = _load_h(args)
    if args.z is not None:
        a = shift(a, parse_complex(args.z))
    write_matrix_market(args.out, a)
    print(f"wrote {a.n} x {a.n} matrix with {a.nnz} stored entries to {args.out}")
    return 0


def cmd_order(args) -> int:
    h, spec = _load_h(args)
    p = _order_for(args, h, spec)
    write_permutation(args.out, p)
    print(f"wrote permutation of length {p.n} to {args.out}")
    return 0


def cmd_symbolic(args) -> int:
    h, spec = _load_h(args)
    a = permute(h, _order_for(args, h, spec))
    pat = symbolic_levels(a, args.cutoff)
    if args.out:
        pat.to_csv(args.out)
    _emit({"n": pat.n, "nnz_strict_lower": pat.nnz, "cutoff": args.cutoff,
           "max_level": pat.max_level(), "factorization_flops": pat.factorization_flops(),
           "selinv_flops": pat.selinv_flops()}, None)
    return 0


def _factor(args, a):
    if args.tol is not None:
        return ldlt_incomplete_tol(a, args.tol, track_dropped=args.track_dropped)
    if args.cutoff is None:
        return ldlt_exact(a), None
    return ldlt_incomplete(a, args.cutoff, track_dropped=args.track_dropped)


def cmd_factorize(args) -> int:
    _, _, a = _shifted(args)
    fac, e = _factor(args, a)
    info = {"n": fac.n, "nnz_L_strict": fac.pattern.nnz, "flops": fac.flops,
            "incomplete": fac.incomplete, "min_abs_pivot": float(np.abs(fac.d).min())}
    if e is not None:
        info["dropped_nnz"] = e.nnz
        info["dropped_max_abs"] = e.max_abs()
    if args.out:
        scipy.io.mmwrite(args.out + ".L.mtx", sp.coo_matrix(fac.l_matrix()))
        scipy.io.mmwrite(args.out + ".D.mtx", fac.d.reshape(-1, 1))
        if e is not None:
            write_matrix_market(args.out + ".E.mtx", e)
    _emit(info, None)
    return 0


def cmd_selinv(args) -> int:
    _, p, a = _shifted(args)
    args.tol = None
    fac, _ = _factor(args, a)
    if fac.incomplete:
        b, f = selinv_incomplete(fac, track_dropped=args.track_dropped)
    else:
        b, f = selinv_exact(fac), None
    info = {"n": b.n, "nnz_strict_lower": b.pattern.nnz, "flops": b.flops,
            "exact": b.exact, "absent_reads": b.absent_reads}
    if args.audit:
        rep = closedness_audit(fac)
        info["audit"] = {"reads": rep.reads, "absent_reads": rep.absent_reads,
                         "columns_with_absent": len(rep.columns_with_absent)}
    if f is not None:
        info["dropped_nnz"] = f.nnz
        info["dropped_max_abs"] = f.max_abs()
    if args.out:
        # back to the caller's numbering
        write_matrix_market(args.out, permute(b.to_symmetric(), p.inverted()))
        if f is not None:
            write_matrix_market(args.out + ".F.mtx", permute(f, p.inverted()))
    _emit(info, None)
    return 0


def cmd_green(args) -> int:
    e = SpectralSet.parse(args.intervals)
    z = parse_complex(args.z)
    print(repr(e.green(z)))
    return 0


def cmd_pexsi(args) -> int:
    h, spec = _load_h(args)
    order = _order_for(args, h, spec)
    poles = PoleExpansion.from_csv(args.poles)
    energy = PoleExpansion.from_csv(args.energy_poles) if args.energy_poles else None
    rep = pexsi_evaluate(h, poles, args.cutoff, order, energy_poles=energy,
                         track_dropped=args.track_dropped)
    wanted = {q.strip() for q in args.quantities.split(",") if q.strip()}
    unknown = wanted - {"rho", "n", "etot"}
    if unknown:
        raise ValueError(f"unknown quantities: {', '.join(sorted(unknown))}")
    full = rep.as_dict()
    out = {"poles": full["poles"], "cutoff": args.cutoff}
    if "rho" in wanted:
        out["rho_real"] = full["rho_real"]
        out["rho_imag_max"] = full["rho_imag_max"]
    if "n" in wanted:
        out["n_electrons"] = full["n_electrons"]
    if "etot" in wanted:
        out["e_total"] = full["e_total"]
    _emit(out, args.out)
    return 0


def cmd_study(args) -> int:
    cfg = studies.StudyConfig(
        kind=args.kind, dim=args.dim, m=args.m, z=parse_complex(args.z),
        cutoffs=parse_int_list(args.cutoff) if args.cutoff else [],
        reps=args.reps, out=args.out, seed=args.seed,
        sizes=parse_int_list(args.sizes) if args.sizes else [],
        timing=not args.no_timing,
        fit_range=parse_fit_range(args.fit_range) if args.fit_range else None,
        poles=args.poles, beta=args.beta, center=args.center, radius=args.radius,
    )
    table = studies.run_study(cfg)
    if args.out:
        table.write()
        print(json.dumps(table.summary, sort_keys=True))
    else:
        sys.stdout.write(table.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iselinv", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen-matrix", help="write the toy Hamiltonian or a random matrix")
    _add_matrix_args(p)
    p.add_argument("--random", type=int, metavar="N", help="random complex-symmetric matrix of size N")
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--z", help="subtract z*I before writing")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_matrix)

    p = sub.add_parser("order", help="compute a fill-reducing permutation")
    _add_matrix_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("symbolic", help="level-of-fill pattern as CSV (i, j, level)")
    _add_matrix_args(p)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_symbolic)

    for verb, fn, help_ in (("factorize", cmd_factorize, "exact or incomplete LDL^T"),
                            ("selinv", cmd_selinv, "exact or incomplete selected inversion")):
        p = sub.add_parser(verb, help=help_)
        _add_matrix_args(p)
        p.add_argument("--z", default="0", help="shift: RE or RE,IM")
        p.add_argument("--cutoff", type=int, help="level-of-fill cutoff (default: exact)")
        if verb == "factorize":
            p.add_argument("--tol", type=float, help="drop tolerance instead of a cutoff")
        else:
            p.add_argument("--audit", action="store_true", help="report reads of absent entries")
        p.add_argument("--track-dropped", action="store_true")
        p.add_argument("--out", help="output prefix / Matrix Market path")
        p.set_defaults(func=fn)

    p = sub.add_parser("green", help="Green's function of one or two intervals")
    p.add_argument("--intervals", required=True, help="a,b or a,b,c,d")
    p.add_argument("--z", required=True, help="RE or RE,IM")
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("pexsi", help="assemble r(H) from a pole file")
    _add_matrix_args(p)
    p.add_argument("--poles", required=True, help="CSV with columns re_w,im_w,re_z,im_z")
    p.add_argument("--energy-poles", help="pole file for the energy, if separate")
    p.add_argument("--cutoff", type=int)
    p.add_argument("--quantities", default="rho,n,etot")
    p.add_argument("--track-dropped", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pexsi)

    p = sub.add_parser("study", help="run an experiment and write CSV")
    p.add_argument("kind", choices=studies.STUDY_KINDS)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--z", default="0.98")
    p.add_argument("--cutoff", help="cutoffs, e.g. 1,2,3 or 6:20")
    p.add_argument("--sizes", help="mesh sizes for nscaling, e.g. 16,22,32")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--no-timing", action="store_true", help="flop counts only")
    p.add_argument("--fit-range", help="lo,hi distance window for rate fits")
    p.add_argument("--poles", type=int, default=8)
    p.add_argument("--beta", type=float, default=5.0)
    p.add_argument("--center", type=float, default=-1.2)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_study)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, PivotBreakdown, OSError, NotImplementedError) as exc:
        print(f"iselinv: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
