"""Command-line front end: voxelize, extract, roundtrip, sample, evaluate, chiral.

Every command is deterministic given (config, seed, inputs); the effective
configuration is echoed into each command's metadata output. FMG_THREADS
caps parallelism for batch extraction sweeps.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import RunConfig, load_run_config
from .diffusion import Condition, sample
from .extract import extract_molecule
from .grid import load_fmgf, save_fmgf
from .metrics import (
    chirality_distribution,
    evaluate_sets,
    write_chirality_csvs,
    write_report_csv,
    write_report_json,
)
from .molecule import Molecule
from .oracle import OracleDenoiser
from .roundtrip import run_roundtrip
from .sdf import parse_sdf, write_sdf
from .toydenoiser import load_fmgd
from .voxelize import CoverageError, voxelize


def _read_text(path: str) -> str:
    with open(path) as fh:
        return fh.read()


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--grid", default=None, help="grid dims as HxWxD")
    parser.add_argument("--res", type=float, default=None, help="voxel edge in Angstroms")
    parser.add_argument("--beta", type=float, default=None, help="guidance scale")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: dict = {}
    for key in ("seed", "res", "beta"):
        overrides[key] = getattr(args, key, None)
    grid = getattr(args, "grid", None)
    if grid is not None:
        overrides["grid"] = tuple(int(p) for p in grid.replace("x", " ").split())
    return load_run_config(getattr(args, "config", None), overrides)


def _voxelize_all(
    mols: list[Molecule], config: RunConfig
) -> tuple[list, list[int], list[str]]:
    spec = config.grid_spec()
    params = config.rbf_params()
    channels = config.atom_channels()
    fields, kept, messages = [], [], []
    for k, mol in enumerate(mols):
        try:
            fields.append(voxelize(mol, spec, params, atom_channels=channels, orient=True))
            kept.append(k)
        except (CoverageError, ValueError) as exc:
            messages.append(f"skipped molecule {k}: {exc}")
    return fields, kept, messages


def cmd_voxelize(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    mols = parse_sdf(_read_text(args.input))
    fields, kept, messages = _voxelize_all(mols, config)
    for msg in messages:
        print(msg, file=sys.stderr)
    save_fmgf(args.output, fields)
    print(f"wrote {len(fields)}/{len(mols)} field records to {args.output}")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    fields = load_fmgf(args.input)
    extraction = config.extraction_config()
    params = config.rbf_params()
    results = [extract_molecule(f, extraction, params) for f in fields]
    with open(args.output, "w") as fh:
        fh.write(write_sdf([r.molecule for r in results]))
    if args.diagnostics:
        payload = {
            "config": config.as_dict(),
            "records": [r.diagnostics_dict() for r in results],
        }
        with open(args.diagnostics, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"extracted {len(results)} molecules to {args.output}")
    return 0


def cmd_roundtrip(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    mols = parse_sdf(_read_text(args.input))
    lambdas = tuple(float(x) for x in args.noise.split(","))
    rows = run_roundtrip(
        mols,
        config.grid_spec(),
        config.rbf_params(),
        config.extraction_config(optimize_gammas=not args.no_gamma_opt),
        config.atom_channels(),
        lambdas,
        config.seed,
    )
    with open(args.out, "w") as fh:
        fh.write("# config " + json.dumps(config.as_dict(), sort_keys=True) + "\n")
        fh.write("noise,n,graph_accuracy,mean_rmsd\n")
        for row in rows:
            rmsd = "" if row.mean_rmsd is None else repr(row.mean_rmsd)
            fh.write(f"{row.noise},{row.n_molecules},{row.graph_accuracy!r},{rmsd}\n")
    for row in rows:
        print(f"noise={row.noise:g} accuracy={row.graph_accuracy:.3f} rmsd={row.mean_rmsd}")
    return 0


def _build_denoiser(args: argparse.Namespace, config: RunConfig):
    if args.oracle:
        if args.oracle.endswith(".sdf"):
            mols = parse_sdf(_read_text(args.oracle))
            fields, kept, messages = _voxelize_all(mols, config)
            for msg in messages:
                print(msg, file=sys.stderr)
            if not fields:
                raise ValueError("no oracle dataset molecules survived voxelization")
            counts = [mols[k].n_atoms for k in kept]
            return OracleDenoiser(fields, config.schedule(), counts)
        fields = load_fmgf(args.oracle)
        if args.atoms is not None:
            raise ValueError(
                "atom-count conditioning needs an SDF oracle dataset (counts unknown in FMGF)"
            )
        return OracleDenoiser(fields, config.schedule())
    return load_fmgd(args.toy_params)


def cmd_sample(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    denoiser = _build_denoiser(args, config)
    schedule = config.schedule()
    cond = Condition(atom_count=args.atoms) if args.atoms is not None else None
    beta = config.beta if cond is not None else 0.0
    extraction = config.extraction_config()
    params = config.rbf_params()

    fields, molecules, meta_rows = [], [], []
    snapshot_fields = []
    for index in range(args.count):
        rng = np.random.default_rng([config.seed, index])
        if args.snapshots:
            field, snaps = sample(
                denoiser, schedule, cond, beta, rng, snapshot_stride=args.snapshots
            )
            snapshot_fields.extend(f for _, f in snaps)
        else:
            field = sample(denoiser, schedule, cond, beta, rng)
        result = extract_molecule(field, extraction, params)
        fields.append(field)
        molecules.append(result.molecule)
        meta_rows.append(
            {
                "index": index,
                "condition_atoms": args.atoms,
                "extracted_atoms": result.molecule.n_atoms,
            }
        )
    save_fmgf(args.out_prefix + ".fmgf", fields)
    with open(args.out_prefix + ".sdf", "w") as fh:
        fh.write(write_sdf(molecules))
    if snapshot_fields:
        save_fmgf(args.out_prefix + ".snapshots.fmgf", snapshot_fields)
    meta = {"config": config.as_dict(), "beta": beta, "samples": meta_rows}
    with open(args.out_prefix + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"sampled {args.count} fields -> {args.out_prefix}.sdf")
    return 0


def _count_records(meta_path: str) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    with open(meta_path) as fh:
        meta = json.load(fh)
    rows = [r for r in meta["samples"] if r.get("condition_atoms") is not None]
    if not rows:
        raise ValueError("sample metadata carries no atom-count conditioning")
    values = [r["condition_atoms"] for r in rows] + [r["extracted_atoms"] for r in rows]
    lo, hi = min(values), max(values)
    bins = [(n, n) for n in range(lo, hi + 1)]
    records = [(r["extracted_atoms"], r["condition_atoms"] - lo) for r in rows]
    return records, bins


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    generated = parse_sdf(_read_text(args.generated))
    reference = parse_sdf(_read_text(args.reference))
    train = parse_sdf(_read_text(args.train))
    records, bins = (None, None)
    if args.sample_meta:
        records, bins = _count_records(args.sample_meta)
    report, chirality = evaluate_sets(generated, reference, train, records, bins)
    write_report_json(args.out_prefix + ".metrics.json", report, config.as_dict())
    write_report_csv(args.out_prefix + ".metrics.csv", report)
    write_chirality_csvs(args.out_prefix, chirality)
    for key, value in report.as_dict().items():
        print(f"{key}: {value}")
    return 0


def cmd_chiral(args: argparse.Namespace) -> int:
    mols = parse_sdf(_read_text(args.input))
    stats = chirality_distribution(mols)
    write_chirality_csvs(args.out_prefix, stats)
    print(
        f"{stats.determinants.size} tetrahedral centers, "
        f"sign fraction {stats.sign_fraction:.4f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molfields",
        description="Voxel RBF molecule fields: build, diffuse, extract, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("voxelize", help="SDF -> FMGF field records")
    p.add_argument("input")
    p.add_argument("output")
    _common_flags(p)
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("extract", help="FMGF -> SDF via graph extraction")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--diagnostics", help="write gamma tables and component sizes as JSON")
    _common_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("roundtrip", help="voxelize + noise sweep + extract report")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--noise", default="0", help="comma-separated uniform-noise levels")
    p.add_argument("--no-gamma-opt", action="store_true", help="skip amplitude optimization")
    _common_flags(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("sample", help="reverse-diffusion sampling")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--oracle", help="oracle dataset path (.sdf or .fmgf)")
    src.add_argument("--toy-params", help="trained toy denoiser parameters (.fmgd)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--atoms", type=int, default=None, help="atom-count condition")
    p.add_argument("--snapshots", type=int, default=None, help="snapshot stride in steps")
    p.add_argument("--out-prefix", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="metric suite for generated vs reference/train")
    p.add_argument("generated")
    p.add_argument("reference")
    p.add_argument("train")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--sample-meta", help="sample metadata JSON for count fidelity")
    _common_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("chiral", help="chirality determinant distribution")
    p.add_argument("input")
    p.add_argument("--out-prefix", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_chiral)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
