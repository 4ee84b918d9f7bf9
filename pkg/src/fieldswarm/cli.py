"""Headless entry points: single runs, strategy benches, and the gateway.

    fieldswarm run   --scenario city.json --strategy coordfield --seed 7 \
                     --steps 1000 --out results/ [--snapshot-stride 10] [--phi-dump]
    fieldswarm bench --scenario bench.json --strategies coordfield,gwo \
                     --seeds 50 --out bench_out/
    fieldswarm serve --scenario city.json --port 8000

Exit codes: 0 success, 2 configuration error, 3 runtime invariant breach.
FIELDSWARM_WORKERS sets the bench worker-process count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import STRATEGY_NAMES
from .engine import Engine, EngineError, SimConfig
from .field import FieldParams
from .metrics import CSV_HEADER, csv_row
from .scenario import ScenarioError, load_scenario


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _field_params(args) -> FieldParams:
    return FieldParams(
        k=args.field_k,
        nu=args.field_nu,
        dt_field=args.field_dt,
        v_max=args.field_vmax,
        r0=args.field_r0,
    )


def _add_field_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--field-k", type=float, default=1.0, help="attraction gain")
    p.add_argument("--field-nu", type=float, default=0.5, help="viscosity")
    p.add_argument("--field-dt", type=float, default=0.2, help="field substep")
    p.add_argument("--field-vmax", type=float, default=3.0, help="speed clamp")
    p.add_argument("--field-r0", type=float, default=15.0, help="vortex radius")


def _write_run_artifacts(out: Path, run_id: str, cfg: SimConfig, engine, trace, report, phi_dump: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "run_id": run_id,
        "strategy": trace.strategy,
        "seed": trace.seed,
        "steps": trace.steps,
        "metrics": report.to_dict(),
    }
    _atomic_write(out / "metrics.json", json.dumps(meta, sort_keys=True, indent=2) + "\n")
    _atomic_write(
        out / "metrics.csv",
        CSV_HEADER + "\n" + csv_row(run_id, trace.strategy, trace.seed, report) + "\n",
    )
    lines = ["uav_id,step,x,y"]
    for step, recs in trace.records:
        for r in recs:
            lines.append(f"{r.id},{step},{r.x!r},{r.y!r}")
    _atomic_write(out / "trajectories.csv", "\n".join(lines) + "\n")
    if phi_dump:
        rows = ["task_type,ix,iy,phi,speed"]
        snap = engine.snapshot()
        for ttype, phi in snap.field.phi.items():
            vx, vy = snap.field.vel[ttype]
            speed = np.hypot(vx, vy)
            for ix in range(phi.shape[0]):
                for iy in range(phi.shape[1]):
                    rows.append(f"{ttype},{ix},{iy},{phi[ix, iy]!r},{speed[ix, iy]!r}")
        _atomic_write(out / "phi.csv", "\n".join(rows) + "\n")


def cmd_run(args) -> int:
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        print(f"error: scenario file not found: {scenario_path}", file=sys.stderr)
        return 2
    try:
        cfg = SimConfig(
            scenario=str(scenario_path),
            strategy=args.strategy,
            t_max=args.steps,
            snapshot_stride=args.snapshot_stride,
            seed=args.seed,
            field_params=_field_params(args),
        )
        engine = Engine(cfg)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        trace, report = engine.run()
    except EngineError as exc:
        print(f"runtime invariant breach: {exc}", file=sys.stderr)
        return 3
    run_id = f"{trace.strategy}-{trace.seed}"
    _write_run_artifacts(Path(args.out), run_id, cfg, engine, trace, report, args.phi_dump)
    print(
        f"{run_id}: steps={trace.steps} cr={report.cr:.3f} ce={report.ce:.3f} "
        f"tlb={report.tlb:.3f} uur={report.uur:.3f}"
    )
    return 0


def _bench_one(payload):
    """Worker: one (strategy, seed) run; returns the metrics row pieces."""
    scenario, strategy, seed, field_kwargs, steps = payload
    cfg = SimConfig(
        scenario=scenario,
        strategy=strategy,
        t_max=steps,
        seed=seed,
        field_params=FieldParams(**field_kwargs),
    )
    trace, report = Engine(cfg).run()
    return {
        "strategy": strategy,
        "seed": seed,
        "steps": trace.steps,
        "cr": report.cr,
        "ce": report.ce,
        "tlb": report.tlb,
        "uur": report.uur,
    }


def cmd_bench(args) -> int:
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        print(f"error: scenario file not found: {scenario_path}", file=sys.stderr)
        return 2
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    bad = [s for s in strategies if s not in STRATEGY_NAMES]
    if bad:
        print(f"error: unknown strategies {bad}; choose from {STRATEGY_NAMES}", file=sys.stderr)
        return 2
    try:
        doc = json.loads(scenario_path.read_text(encoding="utf-8"))
        load_scenario(doc)  # validate once up front
    except (ScenarioError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    field_kwargs = {
        "k": args.field_k,
        "nu": args.field_nu,
        "dt_field": args.field_dt,
        "v_max": args.field_vmax,
        "r0": args.field_r0,
    }
    jobs = [
        (doc, strategy, seed, field_kwargs, args.steps)
        for strategy in strategies
        for seed in range(args.seeds)
    ]
    workers = int(os.environ.get("FIELDSWARM_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    rows.sort(key=lambda r: (r["strategy"], r["seed"]))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["strategy,seed,steps,cr,ce,tlb,uur"]
    for r in rows:
        lines.append(
            f"{r['strategy']},{r['seed']},{r['steps']},{r['cr']!r},{r['ce']!r},"
            f"{r['tlb']!r},{r['uur']!r}"
        )
    _atomic_write(out / "runs.csv", "\n".join(lines) + "\n")

    # Aggregate medians per strategy, Table-2 column order: CR, CE, TLB, UUR.
    agg_lines = ["strategy,cr,ce,tlb,uur"]
    aggregates = {}
    for strategy in strategies:
        sub = [r for r in rows if r["strategy"] == strategy]
        med = {
            key: float(np.median([r[key] for r in sub])) for key in ("cr", "ce", "tlb", "uur")
        }
        aggregates[strategy] = med
        agg_lines.append(
            f"{strategy},{med['cr']!r},{med['ce']!r},{med['tlb']!r},{med['uur']!r}"
        )
    _atomic_write(out / "aggregate.csv", "\n".join(agg_lines) + "\n")
    _atomic_write(
        out / "aggregate.json", json.dumps(aggregates, sort_keys=True, indent=2) + "\n"
    )
    for strategy in strategies:
        med = aggregates[strategy]
        print(
            f"{strategy}: cr={med['cr']:.3f} ce={med['ce']:.3f} "
            f"tlb={med['tlb']:.3f} uur={med['uur']:.3f}"
        )
    return 0


def cmd_serve(args) -> int:
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        print(f"error: scenario file not found: {scenario_path}", file=sys.stderr)
        return 2
    from .gateway import serve

    try:
        serve(
            scenario=str(scenario_path),
            strategy=args.strategy,
            seed=args.seed,
            steps=args.steps,
            host=args.host,
            port=args.port,
            pace=args.pace,
            snapshot_stride=args.snapshot_stride,
            field_params=_field_params(args),
        )
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldswarm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario headless and write artifacts")
    run.add_argument("--scenario", required=True)
    run.add_argument("--strategy", default="coordfield", choices=STRATEGY_NAMES)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--steps", type=int, default=2000)
    run.add_argument("--out", required=True)
    run.add_argument("--snapshot-stride", type=int, default=1)
    run.add_argument("--phi-dump", action="store_true")
    _add_field_flags(run)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="sweep strategies x seeds, aggregate medians")
    bench.add_argument("--scenario", required=True)
    bench.add_argument("--strategies", default=",".join(STRATEGY_NAMES))
    bench.add_argument("--seeds", type=int, default=50)
    bench.add_argument("--steps", type=int, default=1000)
    bench.add_argument("--out", required=True)
    _add_field_flags(bench)
    bench.set_defaults(func=cmd_bench)

    serve_p = sub.add_parser("serve", help="run the live gateway for the console")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--strategy", default="coordfield", choices=STRATEGY_NAMES)
    serve_p.add_argument("--seed", type=int, default=0)
    serve_p.add_argument("--steps", type=int, default=100000)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.add_argument("--pace", type=float, default=10.0, help="snapshots per second")
    serve_p.add_argument("--snapshot-stride", type=int, default=1)
    _add_field_flags(serve_p)
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
