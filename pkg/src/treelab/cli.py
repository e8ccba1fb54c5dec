"""Command line: fit/predict, experiments, verification suites and probes.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import checks
from .core import Cell, Dataset, Node, RandomStream, depth_for, predicate_from_dict
from .grower import Forest, GrowConfig, Tree, fit_forest, mse_eval
from .gridcheck import Grid, count_cart_separations, count_oblique_separations, make_grid
from .oracle import NoiseSpec, PopulationModel, build_regression, sample_dataset
from .sid_lab import estimate_sid_rsrf, min_width_W
from .splitters import splitter_from_dict, splitter_to_dict

CSV_COLUMNS = ["seed", "n", "splitter", "k", "n_trees", "train_mse", "test_mse", "wall_time_ms"]
FORMAT = "treelab-forest"
FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ serialization

def _node_to_dict(node: Node, parent: Node | None) -> dict:
    rec = {"value": node.value, "n": node.n_samples, "depth": node.depth}
    if parent is not None:
        rec["predicates"] = [p.to_dict() for p in parent.extra_predicates(node)]
    if node.children:
        rec["children"] = [_node_to_dict(ch, node) for ch in node.children]
    return rec


def _node_from_dict(rec: dict, cell: Cell, key: tuple) -> Node:
    node = Node(cell=cell, key=key, depth=int(rec["depth"]), n_samples=int(rec["n"]),
                value=float(rec["value"]))
    for k, ch in enumerate(rec.get("children", [])):
        preds = [predicate_from_dict(p) for p in ch["predicates"]]
        node.children.append(_node_from_dict(ch, cell.child(*preds), key + (k,)))
    return node


def forest_to_dict(forest: Forest) -> dict:
    cfg = forest.trees[0].config
    return {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "d": forest.trees[0].d,
        "depth": cfg.depth,
        "min_samples": cfg.min_samples,
        "splitter": splitter_to_dict(cfg.splitter),
        "trees": [{"tree_id": t.tree_id, "seed": t.seed, "root": _node_to_dict(t.root, None)}
                  for t in forest.trees],
    }


def forest_from_dict(rec: dict) -> Forest:
    if rec.get("format") != FORMAT:
        raise ConfigError("not a serialized forest")
    if rec.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model version {rec.get('version')}")
    cfg = GrowConfig(int(rec["depth"]), splitter_from_dict(rec["splitter"]), int(rec["min_samples"]))
    d = int(rec["d"])
    return Forest([Tree(_node_from_dict(t["root"], Cell(d), ()), cfg, t["tree_id"], t["seed"])
                   for t in rec["trees"]])


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------------ config

def _line_of(text: str, section: str, key: str | None) -> int:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if cur == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s, re.I):
            return i
    return 0


@dataclass
class SplitterSpec:
    label: str
    config: object
    n_trees: int


@dataclass
class ExperimentConfig:
    model: PopulationModel
    splitters: list
    n_schedule: list
    n_trees: int = 20
    depth_c: float = 0.2
    depth: int | None = None
    even_depth: bool = False
    test_size: int = 10000
    seeds: list = field(default_factory=lambda: [0])
    min_samples: int = 1
    record_time: bool = True
    out: str | None = None

    def depth_for(self, n: int, spec: SplitterSpec) -> int:
        even = self.even_depth or spec.config.name == "rsrf"
        if self.depth is not None:
            return self.depth
        return depth_for(n, self.depth_c, even)


def _int_list(raw: str) -> list[int]:
    out = []
    for part in re.split(r"[,\s]+", raw.strip()):
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


class _Reader:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            self.cp.read_string(text, source)
        except configparser.Error as e:
            raise ConfigError(f"{source}: {e}") from None

    def fail(self, section, key, msg):
        line = _line_of(self.text, section, key)
        where = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{where}: [{section}] {key or ''}: {msg}")

    def get(self, section, key, conv, default=None, required=False):
        if not self.cp.has_option(section, key):
            if required:
                self.fail(section, None, f"missing required key '{key}'")
            return default
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as e:
            self.fail(section, key, f"bad value {raw!r} ({e})")


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def parse_model(r: _Reader, section: str = "model") -> PopulationModel:
    if not r.cp.has_section(section):
        r.fail(section, None, "section missing")
    name = r.get(section, "regression", str, "example")
    comps = r.get(section, "components", lambda s: [c.strip() for c in s.split(",") if c.strip()])
    value = r.get(section, "value", float, 0.0)
    try:
        reg = build_regression(name, components=comps or ("linear",), value=value)
    except ValueError as e:
        r.fail(section, "regression", str(e))
    d = r.get(section, "d", int, max(reg.d_min, 1))
    kind = r.get(section, "noise", str, "gaussian")
    sigma = r.get(section, "sigma", float, 0.0)
    try:
        return PopulationModel(reg, d, NoiseSpec(kind, sigma))
    except ValueError as e:
        r.fail(section, None, str(e))


def _parse_splitter(r: _Reader, section: str, default_trees: int) -> SplitterSpec:
    name = r.get(section, "name", str, required=True)
    rec = {"name": name}
    for key in ("nsplit", "npairs", "ncandidates", "W"):
        v = r.get(section, key, int)
        if v is not None:
            rec[key] = v
    try:
        cfg = splitter_from_dict(rec)
    except ValueError as e:
        r.fail(section, "name", str(e))
    label = section.split(":", 1)[1].strip() if ":" in section else name
    return SplitterSpec(label, cfg, r.get(section, "n_trees", int, default_trees))


def parse_experiment(text: str, source: str = "<config>") -> ExperimentConfig:
    r = _Reader(text, source)
    model = parse_model(r)
    sec = "experiment"
    if not r.cp.has_section(sec):
        r.fail(sec, None, "section missing")
    n_trees = r.get(sec, "n_trees", int, 20)
    specs = [_parse_splitter(r, s, n_trees) for s in r.cp.sections()
             if s == "splitter" or s.startswith("splitter:")]
    if not specs:
        r.fail("splitter", None, "at least one [splitter] section is required")
    cfg = ExperimentConfig(
        model=model,
        splitters=specs,
        n_schedule=r.get(sec, "n", _int_list, required=True),
        n_trees=n_trees,
        depth_c=r.get(sec, "depth_c", float, 0.2),
        depth=r.get(sec, "depth", int),
        even_depth=r.get(sec, "even_depth", _bool, False),
        test_size=r.get(sec, "test_size", int, 10000),
        seeds=r.get(sec, "seeds", _int_list, [0]),
        min_samples=r.get(sec, "min_samples", int, 1),
        record_time=r.get(sec, "record_time", _bool, True),
        out=r.get(sec, "out", str),
    )
    if not cfg.n_schedule or min(cfg.n_schedule) < 1:
        r.fail(sec, "n", "schedule must be a non-empty list of positive sizes")
    if not cfg.seeds:
        r.fail(sec, "seeds", "need at least one seed")
    if not 0 < cfg.depth_c <= 0.25:
        r.fail(sec, "depth_c", "must lie in (0, 0.25]")
    if cfg.test_size < 1:
        r.fail(sec, "test_size", "must be positive")
    for spec in specs:
        if spec.n_trees < 1:
            r.fail(f"splitter:{spec.label}", "n_trees", "must be positive")
        for n in cfg.n_schedule:
            k = cfg.depth_for(n, spec)
            try:
                GrowConfig(k, spec.config, cfg.min_samples)
            except ValueError as e:
                r.fail(sec, "depth", str(e))
    return cfg


# ------------------------------------------------------------- experiments

def _sub_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0] >> 1)


def _run_one(args):
    cfg, seed, n, spec_i = args
    spec = cfg.splitters[spec_i]
    stream = RandomStream(seed)
    data = sample_dataset(cfg.model, n, stream.generator(1, n))
    Xt = stream.generator(2).random((cfg.test_size, cfg.model.d))
    k = cfg.depth_for(n, spec)
    grow = GrowConfig(k, spec.config, cfg.min_samples)
    t0 = time.perf_counter()
    forest = fit_forest(data, grow, spec.n_trees, _sub_seed(seed, 3, n, spec_i))
    elapsed = (time.perf_counter() - t0) * 1000.0
    train = mse_eval(forest, data.features, data.responses)
    test = mse_eval(forest, Xt, cfg.model.m(Xt))
    wall = int(round(elapsed)) if cfg.record_time else 0
    return [seed, n, spec.label, k, spec.n_trees, repr(train), repr(test), wall]


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list[list]:
    tasks = [(cfg, seed, n, i) for seed in cfg.seeds for n in cfg.n_schedule
             for i in range(len(cfg.splitters))]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_run_one, tasks))
    else:
        rows = [_run_one(t) for t in tasks]
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def _write(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_config(path: str | None) -> tuple[str, str]:
    if not path:
        raise ConfigError("--config is required")
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read(), path
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None


def _load_csv(path: str, need_y: bool):
    try:
        arr = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read data {path}: {e}") from None
    names = arr.dtype.names
    arr = np.atleast_1d(arr)
    xs = [c for c in names if c != "y"]
    X = np.column_stack([arr[c] for c in xs])
    if need_y:
        if "y" not in names:
            raise ConfigError(f"{path}: training data needs a 'y' column")
        return X, arr["y"]
    return X, None


def cmd_fit(args) -> int:
    if args.data:
        X, y = _load_csv(args.data, True)
        data = Dataset(X, y)
    else:
        text, src = _read_config(args.config)
        r = _Reader(text, src)
        model = parse_model(r)
        n = r.get("experiment", "n", lambda s: _int_list(s)[0], 1000) if r.cp.has_section("experiment") else 1000
        data = sample_dataset(model, n, RandomStream(args.seed).generator(1, n))
    splitter = splitter_from_dict({"name": args.splitter, "nsplit": args.param, "npairs": args.param,
                                   "ncandidates": args.param, "W": args.param})
    k = args.depth or depth_for(data.n, 0.2, args.splitter == "rsrf")
    try:
        cfg = GrowConfig(k, splitter, args.min_samples)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    forest = fit_forest(data, cfg, args.trees, args.seed)
    _write(dumps(forest_to_dict(forest)), args.out)
    return 0


def cmd_predict(args) -> int:
    try:
        with open(args.model, encoding="utf-8") as fh:
            forest = forest_from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise ConfigError(f"cannot load model: {e}") from None
    X, _ = _load_csv(args.data, False)
    pred = forest.predict(X)
    _write("prediction\n" + "".join(f"{p!r}\n" for p in pred.tolist()), args.out)
    return 0


def cmd_experiment(args) -> int:
    text, src = _read_config(args.config)
    cfg = parse_experiment(text, src)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.no_timing:
        cfg.record_time = False
    rows = run_experiment(cfg, args.jobs)
    _write(rows_to_csv(rows), args.out or cfg.out)
    return 0


def cmd_verify(args) -> int:
    results = checks.run_suite(args.suite)
    ok = all(c.passed for c in results)
    report = {"suite": args.suite, "passed": ok, "checks": [c.to_dict() for c in results]}
    if args.no_timing:
        for c in report["checks"]:
            c["seconds"] = 0
    _write(dumps(report), args.out)
    return 0 if ok else 1


def sid_probe(model: PopulationModel, alpha1: float, n_cells: int, grid_res: int, seed: int) -> dict:
    est = estimate_sid_rsrf(model, alpha1, None, n_cells, grid_res, RandomStream(seed).generator(7))
    low = est.delta_hat - est.half_width
    if low >= 1.0:
        W = 1
    elif low <= 0.0:
        W = None
    else:
        W = min_width_W(low)
    rec = est.to_dict()
    rec.update(W_required=W, delta_lower=low, grid_res=grid_res, seed=seed)
    return rec


def cmd_sid_probe(args) -> int:
    if args.config:
        text, src = _read_config(args.config)
        model = parse_model(_Reader(text, src))
    else:
        model = PopulationModel(build_regression(args.regression), 3)
    rec = sid_probe(model, args.alpha1, args.cells, args.grid_res, args.seed)
    _write(dumps(rec), args.out)
    return 0


def cmd_grid_count(args) -> int:
    grid = make_grid(args.n, args.epsilon, args.d) if args.n else Grid(args.g, args.d)
    cart = count_cart_separations(grid)
    rec = {"g": grid.g, "d": grid.d, "boxes": grid.n_boxes,
           "cart": {"count": cart.count, "bound": cart.bound, "holds": cart.holds}}
    ok = cart.holds
    if grid.d == 2 and grid.g <= 8:
        ob = count_oblique_separations(grid)
        rec["oblique"] = {"count": ob.count, "bound": ob.bound, "holds": ob.holds}
        ok = ok and ob.holds
    _write(dumps(rec), args.out)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (non-negative, default 0; "
                        "for experiment it replaces the config's seed list)")
    common.add_argument("--config", help="INI-style config file")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--no-timing", action="store_true",
                        help="write 0 for wall-clock fields so repeated runs are byte-identical")

    p = argparse.ArgumentParser(prog="treelab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="fit a forest and write it as JSON")
    f.add_argument("--data", help="CSV with feature columns and a 'y' column")
    f.add_argument("--splitter", default="cart",
                   choices=["cart", "extratrees", "interaction", "oblique", "rsrf"])
    f.add_argument("--param", type=int, default=1, help="nsplit / npairs / ncandidates / W")
    f.add_argument("--depth", type=int, help="tree depth (default floor(0.2 log2 n))")
    f.add_argument("--trees", type=int, default=1)
    f.add_argument("--min-samples", type=int, default=1)
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", parents=[common], help="predict with a saved forest")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True, help="CSV with feature columns")
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("experiment", parents=[common], help="run an MSE experiment from a config")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=sorted(checks.SUITES))
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sid-probe", parents=[common], help="estimate the success rate of random first cuts")
    s.add_argument("--alpha1", type=float, default=50.0)
    s.add_argument("--cells", type=int, default=500)
    s.add_argument("--grid-res", type=int, default=50)
    s.add_argument("--regression", default="example", choices=["example", "constant"])
    s.set_defaults(func=cmd_sid_probe)

    g = sub.add_parser("grid-count", parents=[common], help="count grid separations")
    g.add_argument("--g", type=int, default=4)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--n", type=int, help="derive g = ceil(n^(1+epsilon)) instead")
    g.add_argument("--epsilon", type=float, default=0.2)
    g.set_defaults(func=cmd_grid_count)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and 2
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return 2
    if args.seed is None and args.command != "experiment":
        args.seed = 0
    try:
        return args.func(args)
    except (ConfigError, ValueError, OverflowError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
