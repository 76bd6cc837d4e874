import argparse, json, math, os, sys
import numba as nb

# Parse the kernel mode before the chart kernels are compiled
pre_parser = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
pre_parser.add_argument(
    "--kernel", type=str, choices=["python", "numba"], default="python"
)
pre_args, _ = pre_parser.parse_known_args()

# Set mode
mode = pre_args.kernel
if mode == "python":
    nb.config.DISABLE_JIT = True
elif mode == "numba":
    nb.config.DISABLE_JIT = False

import h5py
import numpy as np

from mpi4py import MPI

import lpmink.input_ as input_

from lpmink.constant import *
from lpmink.loop import LOOPS
from lpmink.print_ import (
    NumericalError,
    master,
    print_banner,
    print_error,
    print_msg,
    print_runtime,
    print_warning,
)

# Get input_deck
import lpmink.global_ as lpmink_

input_deck = lpmink_.input_deck

# Setting entries that do not change any result
NEUTRAL_SETTINGS = [
    "output_dir",
    "output_name",
    "workers",
    "kernel",
    "save_hdf5",
    "progress_bar",
]


# =============================================================================
# Command line
# =============================================================================


def make_parser():
    parser = argparse.ArgumentParser(
        prog="lpmink",
        description="lpmink: numerical lab for the L_p-Minkowski problem at exponents p <= -n",
        allow_abbrev=False,
    )
    parser.add_argument("subcommand", nargs="?", choices=list(SUBCOMMANDS))
    parser.add_argument("--config", type=str, help="JSON configuration file")
    parser.add_argument("--n", type=int, help="Sphere dimension")
    parser.add_argument("--p", type=float, help="Exponent p")
    parser.add_argument("--resolution", type=int, help="Grid resolution")
    parser.add_argument("--L", type=int, help="Harmonic degree of the minimizer basis")
    parser.add_argument("--mode", type=str, help="Symmetry mode")
    parser.add_argument("--mu-max", type=int, help="Largest invariant degree searched")
    parser.add_argument("--seed-amplitude", type=float, help="Amplitude of the optimizer seed")
    parser.add_argument("--tol", type=float, help="Optimizer tolerance")
    parser.add_argument("--max-iter", type=int, help="Optimizer iteration cap")
    parser.add_argument("--eps-c", type=float, help="Convexity margin")
    parser.add_argument("--kind", type=str, help="Counterexample kind")
    parser.add_argument("--solution", type=str, help="Identity test solution")
    parser.add_argument("--p-low", type=float, help="Lower bifurcation bracket")
    parser.add_argument("--p-high", type=float, help="Upper bifurcation bracket")
    parser.add_argument("--scan", type=float, nargs=2, help="Exponent range of a period-map scan")
    parser.add_argument("--seed", type=int, help="Random seed")
    parser.add_argument("--out", type=str, help="Output directory")
    parser.add_argument("--output", type=str, help="Output file base name")
    parser.add_argument("--workers", type=int, help="Number of work chunks")
    parser.add_argument("--kernel", type=str, choices=["python", "numba"], help="Chart kernel mode")
    parser.add_argument("--progress_bar", default=None, action="store_true")
    parser.add_argument("--no-progress_bar", dest="progress_bar", action="store_false")
    parser.add_argument("--no-hdf5", dest="save_hdf5", default=None, action="store_false")
    return parser


def apply_arguments(args):
    """Flags override the configuration file."""
    if args.config is not None:
        input_.load_config(args.config)

    input_.setting(
        subcommand=args.subcommand,
        output_dir=args.out,
        output_name=args.output,
        workers=args.workers,
        seed=args.seed,
        kernel=args.kernel,
        save_hdf5=args.save_hdf5,
        progress_bar=args.progress_bar,
    )
    if args.L is not None and input_deck.setting["subcommand"] != "minimize":
        print_error("--L sets the minimizer basis and applies to minimize only")
    input_.grid(n=args.n, resolution=args.resolution)
    input_.problem(p=args.p)
    input_.group(mode=args.mode, mu_max=args.mu_max)
    input_.identity(solution=args.solution)
    input_.weight(kind=args.kind)
    input_.optimizer(
        L=args.L,
        seed_amplitude=args.seed_amplitude,
        tol=args.tol,
        max_iter=args.max_iter,
        eps_c=args.eps_c,
    )
    input_.oracle(scan=args.scan, p_low=args.p_low, p_high=args.p_high)


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None and args.config is None:
        parser.print_usage()
        return EXIT_VALIDATION

    input_deck.reset()
    apply_arguments(args)
    if input_deck.setting["subcommand"] is None:
        parser.print_usage()
        return EXIT_VALIDATION

    try:
        return run()
    except NumericalError as error:
        print("ERROR: %s\n" % error)
        sys.stdout.flush()
        return EXIT_NUMERICAL
    except ValueError as error:
        print("ERROR: %s\n" % error)
        sys.stdout.flush()
        return EXIT_VALIDATION


# =============================================================================
# Run
# =============================================================================


def run():
    # Start timer
    total_start = MPI.Wtime()
    runtime = {}

    # Preparation
    preparation_start = MPI.Wtime()
    deck = prepare()
    runtime["preparation"] = MPI.Wtime() - preparation_start

    # Print banner
    print_banner(deck.setting)

    # Run subcommand
    computation_start = MPI.Wtime()
    result = LOOPS[deck.setting["subcommand"]](deck)
    runtime["computation"] = MPI.Wtime() - computation_start

    # Output: JSON summary, CSV tables and HDF5 arrays
    output_start = MPI.Wtime()
    generate_json(deck, result)
    generate_csv(deck, result)
    generate_hdf5(deck, result)
    runtime["output"] = MPI.Wtime() - output_start

    # Stop timer
    MPI.COMM_WORLD.Barrier()
    runtime["total"] = MPI.Wtime() - total_start

    # Closout
    closeout(deck, runtime)
    return result.status


def prepare():
    """
    Prepare the run:
      (1) Fill the derived settings
      (2) Validate the input deck across cards
      (3) Create the output directory
    """
    setting = input_deck.setting
    if input_deck.grid["resolution"] is None:
        input_deck.grid["resolution"] = RESOLUTION_DEFAULT[input_deck.grid["n"]]
    input_.validate()

    if setting["output_name"] is None:
        setting["output_name"] = setting["subcommand"]
    if setting["kernel"] != mode:
        print_warning(
            "Kernel mode %s is active; --kernel must be given on the command line to change it"
            % mode
        )
        setting["kernel"] = mode
    if master:
        os.makedirs(setting["output_dir"], exist_ok=True)
    MPI.COMM_WORLD.Barrier()
    return input_deck


# =============================================================================
# Output
# =============================================================================


def output_path(deck, suffix):
    setting = deck.setting
    return os.path.join(setting["output_dir"], setting["output_name"] + suffix)


def result_config(deck):
    config = deck.to_dict()
    for key in NEUTRAL_SETTINGS:
        config["setting"].pop(key, None)
    return config


def _plain(value):
    """Builtin containers and scalars; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps(data, indent=2):
    """Sorted-key JSON; floats keep their shortest round-trip repr."""
    return json.dumps(_plain(data), indent=indent, sort_keys=True, allow_nan=False, default=str) + "\n"


def generate_json(deck, result):
    if master:
        data = dict(result.summary)
        data["config"] = result_config(deck)
        data["schema_version"] = SCHEMA_VERSION
        data["status"] = result.status
        with open(output_path(deck, ".json"), "w") as f:
            f.write(dumps(data))


def write_csv(path, rows):
    names = rows.dtype.names
    fmt = []
    for name in names:
        kind = rows.dtype[name].kind
        fmt.append("%d" if kind in "biu" else "%%.%ig" % FLOAT_DIGITS)
    table = np.column_stack([rows[name].astype(np.float64) for name in names])
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=",".join(names), comments="")


def generate_csv(deck, result):
    if master:
        for name, rows in result.tables.items():
            write_csv(output_path(deck, "_%s.csv" % name), rows)


def dict_to_h5group(dict_, group):
    for k, v in dict_.items():
        if type(v) == dict:
            dict_to_h5group(dict_[k], group.create_group(k))
        elif v is None:
            continue
        else:
            group[k] = v


def generate_hdf5(deck, result):
    if master and deck.setting["save_hdf5"]:
        if deck.setting["progress_bar"]:
            print_msg("")
        print_msg(" Generating output HDF5 files...")

        with h5py.File(output_path(deck, ".h5"), "w") as f:
            # Input deck
            input_group = f.create_group("input_deck")
            for card in deck.cards():
                card = dict(card)
                tag = card.pop("tag")
                dict_to_h5group(card, input_group.create_group(tag.lower()))

            # Nodal arrays
            for name, data in result.arrays.items():
                f.create_dataset(name, data=np.asarray(data))

            # Tables
            for name, rows in result.tables.items():
                f.create_dataset("tables/" + name, data=rows)


def closeout(deck, runtime):
    # Runtime
    if master and deck.setting["save_hdf5"]:
        with h5py.File(output_path(deck, ".h5"), "a") as f:
            for name in ["total", "preparation", "computation", "output"]:
                f.create_dataset("runtime/" + name, data=np.array([runtime[name]]))

    print_runtime(runtime)
    input_deck.reset()
