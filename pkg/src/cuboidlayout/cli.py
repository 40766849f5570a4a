"""Command-line front end; every subcommand is a thin adapter over the library API."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from .abstraction import MergeConfig, abstract_shape
from .curation import CurationConfig, curate_dataset
from .errors import AcceptanceShortfall, CuboidLayoutError
from .mesh_io import normalize, parse_obj
from .metrics import DEFAULT_NIRATE_THRESHOLD, metrics_report
from .render import RenderSpec, render_png, render_topdown
from .retrieval import ShapeCatalog, entry_from_mesh, retrieve_scene
from .sampling import BaselineSamplerModel, RejectionConfig, fit_baseline, rejection_loop
from .scene import FloorPlan, cuboids_to_json, dumps_scene, load_scene, save_scene
from .voxels import DEFAULT_RESOLUTION, VoxelGrid, _check_resolution, voxelize

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


def load_config(path) -> dict:
    """Read a TOML or JSON config file (chosen by extension, TOML otherwise)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text())
    with open(path, "rb") as fh:
        return tomllib.load(fh)


class _Options:
    """Resolve a setting as CLI flag > config file > built-in default.

    Config keys may sit at the top level or inside a table named after the
    subcommand; the subcommand table wins.
    """

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        section = config.get(args.command, {})
        self.config = {k: v for k, v in config.items() if not isinstance(v, dict)}
        if isinstance(section, dict):
            self.config.update(section)

    def __call__(self, name: str, default: Any = None) -> Any:
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        # Dashed spellings of flag names are accepted in config files too.
        return self.config.get(name, self.config.get(name.replace("_", "-"), default))


def _scene_files(directory) -> list[Path]:
    directory = Path(directory)
    if directory.is_file():
        return [directory]
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    return sorted(directory.glob("*.json"))


def _write_json(path, data) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def _load_grid(path, n: int) -> VoxelGrid:
    path = Path(path)
    if path.suffix.lower() == ".cvox":
        return VoxelGrid.load(path)
    normalized, _ = normalize(parse_obj(path))
    return voxelize(normalized, n)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_voxelize(args, opt) -> int:
    n = int(opt("n", DEFAULT_RESOLUTION))
    _check_resolution(n)
    normalized, _ = normalize(parse_obj(args.input))
    grid = voxelize(normalized, n)
    grid.save(args.out)
    print(f"{args.out}: n={n}, {int(grid.occupancy.sum())} occupied voxels")
    return 0


def merge_config_from(opt) -> MergeConfig:
    return MergeConfig(
        tau_min=float(opt("tau_min", 1.0)),
        tau_max=float(opt("tau_max", 1.5)),
        scale_s=opt("scale_s"),
        use_dynamic=not bool(opt("static", False)),
        tau_static=float(opt("tau_static", 1.2)),
        max_segments_k=int(opt("k", 8)),
    )


def cmd_abstract(args, opt) -> int:
    n = int(opt("n", DEFAULT_RESOLUTION))
    _check_resolution(n)
    grid = _load_grid(args.input, n)
    cuboids = abstract_shape(grid, merge_config_from(opt))
    _write_json(args.out, cuboids_to_json(cuboids))
    print(f"{args.out}: {len(cuboids)} cuboids")
    return 0


def cmd_curate(args, opt) -> int:
    config = CurationConfig(
        eta=float(opt("eta", 0.05)),
        clip_norm=float(opt("clip", 1.0)),
        max_iters=int(opt("max_iters", 500)),
        epsilon_stop=float(opt("epsilon", 1e-6)),
        fd_step=float(opt("fd_step", 0.01)),
    )
    files = _scene_files(args.input)
    curated, summary = curate_dataset(files, config, names=[f.name for f in files], workers=int(opt("workers", 1)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = [r["name"] for r in summary["scenes"] if r["error"] is None]
    for name, scene in zip(ok, curated):
        save_scene(scene, out / name)
    _write_json(args.summary or out.with_name(out.name + ".summary.json"), summary)
    print(
        f"curated {summary['n_curated']}/{summary['n_scenes']} scenes; "
        f"NIRate {summary['nirate_before']} -> {summary['nirate_after']}"
    )
    return 0 if summary["n_errors"] == 0 else 1


def cmd_metrics(args, opt) -> int:
    scenes = [load_scene(f) for f in _scene_files(args.scenes)]
    reference = [load_scene(f) for f in _scene_files(args.reference)] if args.reference else None
    report = metrics_report(scenes, float(opt("threshold", DEFAULT_NIRATE_THRESHOLD)), reference)
    if args.report:
        _write_json(args.report, report)
    print(json.dumps(report))
    return 0


def cmd_retrieve(args, opt) -> int:
    scene = load_scene(args.scene)
    catalog = ShapeCatalog.load(args.catalog)
    result = retrieve_scene(scene, catalog, opt("mode", "cuboid"))
    save_scene(result, args.out or args.scene)
    for obj in result.objects:
        print(f"{obj.id or obj.label}: {obj.model_id}")
    return 0


def cmd_catalog(args, opt) -> int:
    """Build a catalog from ``<meshes>/<class>/<model_id>.obj``."""
    n = int(opt("n", DEFAULT_RESOLUTION))
    _check_resolution(n)
    root = Path(args.meshes)
    config = merge_config_from(opt)
    entries = [
        entry_from_mesh(path.stem, path.parent.name, parse_obj(path), n, config)
        for path in sorted(root.glob("*/*.obj"))
    ]
    catalog = ShapeCatalog(entries)
    catalog.save(args.out)
    print(f"{args.out}: {len(catalog)} entries at n={n}")
    return 0


def cmd_fit(args, opt) -> int:
    model = fit_baseline([load_scene(f) for f in _scene_files(args.scenes)])
    model.save(args.out)
    print(f"{args.out}: {len(model.classes)} classes")
    return 0


def _load_floor(path) -> FloorPlan:
    data = json.loads(Path(path).read_text())
    if "floor" in data:
        data = data["floor"]
    return FloorPlan(tuple(tuple(v) for v in data["vertices"]))


def cmd_sample(args, opt) -> int:
    model = BaselineSamplerModel.load(args.model)
    floors = [_load_floor(f) for f in _scene_files(args.floors)]
    dataset = [load_scene(f) for f in _scene_files(args.dataset)] if args.dataset else []
    room_type = opt("room_type") or next(iter(model.count_probs))
    min_accepted = opt("min_accepted")
    config = RejectionConfig(
        k_candidates=int(opt("k", 500)),
        t_threshold=float(opt("threshold", 0.001)),
        rounds=int(opt("rounds", 3)),
        min_accepted=None if min_accepted is None else int(min_accepted),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(opt("seed", 0))
    status = 0
    try:
        model, reports, distilled = rejection_loop(
            model, floors, config, seed, dataset, room_type, workers=int(opt("workers", 1))
        )
    except AcceptanceShortfall as exc:
        print(f"error: {exc}", file=sys.stderr)
        model, reports, distilled, status = exc.model, exc.reports, [], 1
    lines = [json.dumps(r) for r in reports]
    (out / "rounds.jsonl").write_text("".join(line + "\n" for line in lines))
    for line in lines:
        print(line)
    model.save(out / "model.json")
    new = distilled[: len(distilled) - len(dataset)]
    for k, scene in enumerate(new):
        (out / f"scene_{k:05d}.json").write_text(dumps_scene(scene))
    return status


def cmd_render(args, opt) -> int:
    scene = load_scene(args.scene)
    spec = RenderSpec(width=int(opt("width", 256)), height=int(opt("height", 256)))
    Path(args.out).write_text(render_topdown(scene, spec))
    if args.png:
        render_png(scene, args.png, spec)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cuboidlayout", description="Cuboid assemblies for indoor scene layouts.")
    parser.add_argument("--config", help="TOML or JSON file with default settings")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", dest="sub_config", help=argparse.SUPPRESS)
        p.set_defaults(func=func)
        return p

    def merge_flags(p):
        p.add_argument("--tau-min", dest="tau_min", type=float)
        p.add_argument("--tau-max", dest="tau_max", type=float)
        p.add_argument("--scale-s", dest="scale_s", type=float)
        p.add_argument("--static", action="store_const", const=True, help="use the static merge threshold")
        p.add_argument("--tau-static", dest="tau_static", type=float)
        p.add_argument("--k", type=int, help="maximum number of floor segments")

    p = add("voxelize", cmd_voxelize, "OBJ mesh -> CVOX occupancy grid")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--out", required=True)

    p = add("abstract", cmd_abstract, "OBJ mesh or CVOX grid -> cuboid JSON")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--out", required=True)
    merge_flags(p)

    p = add("curate", cmd_curate, "remove object intersections from a directory of scenes")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eta", type=float)
    p.add_argument("--clip", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--fd-step", dest="fd_step", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--summary", help="summary JSON path (default OUT.summary.json next to OUT)")

    p = add("metrics", cmd_metrics, "CIoU / NIRate / CKL report for a directory of scenes")
    p.add_argument("--scenes", required=True)
    p.add_argument("--reference", help="reference scenes for CKL")
    p.add_argument("--threshold", type=float)
    p.add_argument("--report")

    p = add("retrieve", cmd_retrieve, "fill model_id fields of a scene from a catalog")
    p.add_argument("--scene", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--mode", choices=["cuboid", "bbox"])
    p.add_argument("--out", help="write here instead of rewriting the scene file")

    p = add("catalog", cmd_catalog, "build a retrieval catalog from MESHES/<class>/<model_id>.obj")
    p.add_argument("--meshes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    merge_flags(p)

    p = add("fit", cmd_fit, "fit the baseline sampler on a directory of scenes")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)

    p = add("sample", cmd_sample, "rejection-sampling refinement rounds")
    p.add_argument("--model", required=True)
    p.add_argument("--floors", required=True, help="directory of floor or scene JSON files")
    p.add_argument("--dataset", help="scenes seeding the distilled set")
    p.add_argument("--room-type", dest="room_type")
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--rounds", type=int)
    p.add_argument("--min-accepted", dest="min_accepted", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)

    p = add("render", cmd_render, "top-down SVG of a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--png", help="also write a PNG raster (needs Pillow)")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    config_path = args.sub_config or args.config
    try:
        config = load_config(config_path) if config_path else {}
        return args.func(args, _Options(args, config))
    except (CuboidLayoutError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
