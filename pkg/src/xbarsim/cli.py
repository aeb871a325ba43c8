"""Command-line interface.

Exit status: 0 on success, 2 for configuration errors (bad or missing
files, malformed configs, shape mismatches), 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import characterize as ch
from . import converters as cv
from . import fcm, store
from .dnn import data as ds
from .dnn import mapping as mp
from .dnn import network as nw
from .dnn import train as tr
from .dnn import zoo
from .energy import EnergyLedger, PriceTable
from .params import ConfigError, CrossbarParams, dataclass_from_kv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# --- helpers -----------------------------------------------------------------

def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=store._json_default) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def load_params_arg(args) -> CrossbarParams:
    if args.params:
        params = dataclass_from_kv(CrossbarParams, store.read_text(args.params, "params file"))
    else:
        params = CrossbarParams()
    if getattr(args, "tile_size", None):
        params = params.replace(rows=args.tile_size, cols=args.tile_size)
    return params


def load_variation_arg(args) -> cv.VariationConfig | None:
    return store.load_variation(args.variation) if getattr(args, "variation", None) else None


def load_dataset(spec: str, split: str) -> ds.Dataset:
    """``digits``, ``shapes10``, ``mnist:<dir>`` or ``cifar10:<dir>``."""
    name, _, path = spec.partition(":")
    if name == "digits":
        return ds.digits(split)
    if name == "shapes10":
        return ds.shapes10(8000 if split == "train" else 4000, seed=1 if split == "train" else 2)
    if name == "mnist" and path:
        return ds.load_mnist(path, split)
    if name == "cifar10" and path:
        return ds.load_cifar10(path, split)
    raise ConfigError(f"unknown dataset {spec!r}; use digits, shapes10, mnist:<dir> or cifar10:<dir>")


def load_network_arg(spec: str) -> nw.Network:
    if spec in zoo.NETWORKS:
        return zoo.get(spec)
    return nw.load_network(spec)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, command: str) -> store.RunManifest:
    argv = getattr(args, "_argv", None) or []
    return store.RunManifest(command=command, argv=list(argv), seeds={"seed": args.seed})


def _add_common(p, tile=True):
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--params", help="key=value crossbar parameter file")
    if tile:
        p.add_argument("--tile-size", type=int, choices=(16, 32, 64),
                       help="override the tile rows/cols")
    p.add_argument("--out", default="out", help="output directory")


# --- subcommands -----------------------------------------------------------

def cmd_characterize(args) -> int:
    out = _out(args)
    params = load_params_arg(args)
    setup = ch.Setup(params=params)
    size = params.rows
    m = _manifest(args, "characterize")
    m.config = {"params": params.to_dict(), "kind": args.kind}
    t0 = time.perf_counter()
    if args.kind == "dimension":
        rows = ch.sweep_dimension(setup, sizes=tuple(args.sizes), masks=tuple(args.masks))
        write_csv(out / "dimension.csv", ["size", "state", "mask", "error_last"],
                  [[r["size"], r["state"], r["mask"], r["error_last"]] for r in rows])
        write_json(out / "dimension.json", rows)
    else:
        if args.kind == "states":
            res = ch.sweep_states(setup, size, args.n, seed=args.seed)
        elif args.kind == "inputs":
            res = ch.sweep_inputs(setup, size, args.n, seed=args.seed)
        else:
            var = load_variation_arg(args) or cv.VariationConfig(sigma_over_mu=args.sigma,
                                                                  seed=args.seed)
            m.seeds["variation"] = var.seed
            res = ch.monte_carlo_variation(setup, size, args.n, var, seed=args.seed)
        write_csv(out / f"{args.kind}.csv", ["column", "max", "min", "avg"],
                  [[j, res["max"][j], res["min"][j], res["avg"][j]] for j in range(size)])
        summary = {"mean_spread": float(np.mean(res["max"] - res["min"])),
                   "samples": args.n, "size": size}
        write_json(out / f"{args.kind}.json", summary)
    m.timings["total_s"] = time.perf_counter() - t0
    m.save(out / "manifest.json")
    print(f"characterize {args.kind}: results in {out}")
    return EXIT_OK


def cmd_fidelity(args) -> int:
    out = _out(args)
    params = load_params_arg(args)
    t0 = time.perf_counter()
    res = ch.fidelity_compare(ch.Setup(params=params), params.rows, args.trials, args.seed)
    write_json(out / "fidelity.json", res)
    write_csv(out / "fidelity.csv", list(res), [list(res.values())])
    m = _manifest(args, "fidelity")
    m.config = {"params": params.to_dict(), "trials": args.trials}
    m.results = res
    m.timings["total_s"] = time.perf_counter() - t0
    m.save(out / "manifest.json")
    print(f"FCM max deviation {res['fcm_max_dev']:.4f}%, constant baseline "
          f"{res['baseline_max_dev']:.4f}%")
    return EXIT_OK


def _engine(args, params) -> mp.EngineConfig:
    if args.engine:
        return store.engine_from_kv(store.read_text(args.engine, "engine config"), params)
    return mp.EngineConfig(params=params)


def cmd_build(args) -> int:
    out = _out(args)
    params = load_params_arg(args)
    cfg = _engine(args, params)
    net = load_network_arg(args.network)
    if args.weights:
        net = nw.load_weights(args.weights, net)
    else:
        raise ConfigError("build needs trained --weights (see 'xbarsim train')")
    train = load_dataset(args.data, "train")
    variation = load_variation_arg(args)
    t0 = time.perf_counter()
    mapped = mp.map_network(net, cfg, train.x[: args.calib], variation)
    t_map = time.perf_counter() - t0
    store.save_mapped(mapped, out)
    m = _manifest(args, "build")
    m.config = {"params": params.to_dict(), "engine": store.engine_to_kv(cfg),
                "network": nw.format_network(net), "data": args.data, "calib": args.calib}
    if variation is not None:
        m.seeds["variation"] = variation.seed
        m.config["variation"] = store.variation_to_kv(variation)
    m.add_input(args.weights)
    m.results = {"tiles": mapped.n_tiles}
    m.timings["map_s"] = t_map
    m.save(out / "manifest.json")
    print(f"mapped {len(mapped.layers)} layers onto {mapped.n_tiles} tiles in {t_map:.2f} s")
    return EXIT_OK


def cmd_eval(args) -> int:
    out = _out(args)
    mapped = store.load_mapped(args.mapped)
    test = load_dataset(args.data, "test")
    if args.limit:
        test = test.subset(slice(0, args.limit))
    ledger = EnergyLedger()
    t0 = time.perf_counter()
    acc = mp.evaluate(mapped, test, args.mode, ledger=ledger if args.mode != "fp32" else None)
    dt = time.perf_counter() - t0
    ledger.save(out / "ledger.json")
    res = {"accuracy": acc, "mode": args.mode, "samples": len(test)}
    write_json(out / "eval.json", res)
    write_csv(out / "eval.csv", list(res), [list(res.values())])
    m = _manifest(args, "eval")
    m.config = {"mapped": str(args.mapped), "data": args.data, "mode": args.mode, "limit": args.limit}
    m.add_input(args.mapped)
    m.results = res
    m.timings["eval_s"] = dt
    m.save(out / "manifest.json")
    print(f"top-1 accuracy ({args.mode}): {acc:.4f} on {len(test)} samples")
    return EXIT_OK


def cmd_train(args) -> int:
    out = _out(args)
    train = load_dataset(args.data, "train")
    test = load_dataset(args.data, "test")
    if args.lr is None:
        args.lr = 0.002 if args.mapped else 0.02
    m = _manifest(args, "train")
    m.config = {"data": args.data, "epochs": args.epochs, "lr": args.lr, "batch": args.batch}
    history = []
    t0 = time.perf_counter()
    if args.mapped:
        mapped = store.load_mapped(args.mapped)
        m.add_input(args.mapped)
        m.config["refresh_interval"] = args.refresh_interval

        def checkpoint(epoch, mm, loss):
            history.append({"epoch": epoch, "loss": loss,
                            "accuracy": mp.evaluate(mm, test, "nonideal")})
            nw.save_weights(mm.net, out / f"weights_epoch{epoch:03d}.bin")

        mapped, _ = tr.retrain(mapped, train, epochs=args.epochs, batch=args.batch, lr=args.lr,
                               refresh_interval=args.refresh_interval, seed=args.seed,
                               callback=checkpoint)
        store.save_mapped(mapped, out / "mapped")
        net = mapped.net
    else:
        net = load_network_arg(args.network)
        m.config["network"] = nw.format_network(net)
        if args.weights:
            net = nw.load_weights(args.weights, net)
            m.add_input(args.weights)
        else:
            net.init_weights(args.seed)
        for epoch, loss in enumerate(tr.train_fp(net, train, epochs=args.epochs, batch=args.batch,
                                                 lr=args.lr, seed=args.seed)):
            history.append({"epoch": epoch, "loss": loss})
        history[-1]["accuracy"] = nw.accuracy(net, test.x, test.y)
        (out / "network.txt").write_text(nw.format_network(net))
    nw.save_weights(net, out / "weights.bin")
    write_csv(out / "history.csv", ["epoch", "loss", "accuracy"],
              [[h["epoch"], h["loss"], h.get("accuracy", "")] for h in history])
    m.results = {"history": history}
    m.timings["train_s"] = time.perf_counter() - t0
    m.save(out / "manifest.json")
    print(f"trained {args.epochs} epochs; final loss {history[-1]['loss']:.4f}")
    return EXIT_OK


def cmd_energy(args) -> int:
    out = _out(args)
    prices = PriceTable.load(args.prices) if args.prices else PriceTable()
    if args.ledger:
        ledger = EnergyLedger.load(args.ledger)
    elif args.network:
        net = load_network_arg(args.network)
        ledger = mp.inference_ledger(net, load_params_arg(args))
    elif args.layer:
        ledger = mp.layer_ledger(*args.layer, load_params_arg(args))
    else:
        raise ConfigError("energy needs --ledger, --network or --layer ROWS COLS")
    parts = ledger.breakdown(prices)
    total = ledger.total(prices)
    groups = ledger.groups(prices)
    res = {"total_J": float(total), "total_exact": str(total),
           "components_J": {k: float(v) for k, v in parts.items()},
           "groups_J": {k: float(v) for k, v in groups.items()},
           "ledger": ledger.to_dict()}
    write_json(out / "energy.json", res)
    write_csv(out / "energy.csv", ["component", "joules"], [[k, float(v)] for k, v in parts.items()]
              + [["total", float(total)]])
    print(f"total energy {float(total):.6e} J")
    return EXIT_OK


# --- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xbarsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("characterize", help="error sweeps of a single tile")
    _add_common(p)
    p.add_argument("--kind", choices=("dimension", "states", "inputs", "variation"),
                   default="dimension")
    p.add_argument("--n", type=int, default=1000, help="states, inputs or Monte-Carlo samples")
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 64])
    p.add_argument("--masks", nargs="+", default=list(ch.MASKS), choices=list(ch.MASKS))
    p.add_argument("--sigma", type=float, default=0.10, help="sigma/mu without --variation")
    p.add_argument("--variation", help="key=value variation config")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("fidelity", help="FCM and constant-error model against the oracle")
    _add_common(p)
    p.add_argument("--trials", type=int, default=40)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("build", help="map a trained network onto tiles")
    _add_common(p)
    p.add_argument("--network", required=True, help="network file or one of " + ", ".join(zoo.NETWORKS))
    p.add_argument("--weights", help="weights container")
    p.add_argument("--data", required=True, help="dataset used for calibration")
    p.add_argument("--calib", type=int, default=1000, help="calibration samples")
    p.add_argument("--engine", help="key=value engine config (converter bits, DAC model)")
    p.add_argument("--variation", help="key=value variation config")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="accuracy and event ledger of a mapped network")
    _add_common(p, tile=False)
    p.add_argument("--mapped", required=True, help="directory written by 'build'")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=("nonideal", "ideal", "fp32"), default="nonideal")
    p.add_argument("--limit", type=int, default=0, help="evaluate only the first N samples")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train", help="floating-point training, or retraining with --mapped")
    _add_common(p, tile=False)
    p.add_argument("--network", default="lenet")
    p.add_argument("--weights", help="initial weights")
    p.add_argument("--mapped", help="retrain through this mapped network")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, help="learning rate (default 0.02, or 0.002 with --mapped)")
    p.add_argument("--refresh-interval", type=int, default=10)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("energy", help="price an event ledger")
    _add_common(p)
    p.add_argument("--ledger", help="ledger.json written by 'eval'")
    p.add_argument("--network", help="per-inference ledger of a network")
    p.add_argument("--layer", type=int, nargs=2, metavar=("ROWS", "COLS"),
                   help="one vector through a ROWS x COLS weight matrix")
    p.add_argument("--prices", help="key=value price table (joules per event)")
    p.set_defaults(func=cmd_energy)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args._argv = argv
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"xbarsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError, fcm.EliminationError) as exc:
        print(f"xbarsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def replay(manifest_path) -> int:
    """Re-run the command recorded in a manifest after checking its inputs."""
    m = store.RunManifest.load(manifest_path)
    changed = m.changed_inputs()
    if changed:
        raise ConfigError(f"inputs changed since the run: {changed}")
    return main(m.argv)


if __name__ == "__main__":
    sys.exit(main())
