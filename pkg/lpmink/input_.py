"""
This module contains functions for setting the lpmink input deck.
The input deck class is defined in `card.py` and instantiated in `global_.py`.
"""

import json, math, os

from lpmink.constant import (
    L_MAX_VARIATIONAL,
    MODE_FULL,
    MODE_SPECIAL,
    MODE_TRIVIAL,
    MU_MAX_LIMIT,
    RESOLUTION_MIN,
    SUBCOMMANDS,
)
from lpmink.print_ import print_error

# Get and rename lpmink global variables
import lpmink.global_ as lpmink


def setting(**kw):
    """
    Set run settings.

    Parameters
    ----------
    subcommand : str, optional
        One of the command-line subcommands.
    output_dir : str, optional
        Directory receiving JSON, CSV and HDF5 outputs.
    output_name : str, optional
        Base name of the output files.
    workers : int, optional
        Number of work chunks distributed over MPI ranks.
    seed : int, optional
        Seed of every random draw in the run.
    kernel : {"python", "numba"}, optional
        Chart kernel execution mode.
    save_hdf5 : bool, optional
        Write the nodal arrays to `<output_name>.h5`.
    progress_bar : bool, optional
        Print per-iteration progress tables.
    """
    for key in kw.keys():
        check_support(
            "setting parameter",
            key,
            [
                "subcommand",
                "output_dir",
                "output_name",
                "workers",
                "seed",
                "kernel",
                "save_hdf5",
                "progress_bar",
            ],
            False,
        )

    card = lpmink.input_deck.setting

    if kw.get("subcommand") is not None:
        card["subcommand"] = check_support(
            "subcommand", kw["subcommand"], list(SUBCOMMANDS)
        )
    if kw.get("output_dir") is not None:
        card["output_dir"] = str(kw["output_dir"])
    if kw.get("output_name") is not None:
        card["output_name"] = str(kw["output_name"])
    if kw.get("workers") is not None:
        card["workers"] = check_integer("workers", kw["workers"], 1)
    if kw.get("seed") is not None:
        card["seed"] = check_integer("seed", kw["seed"], 0)
    if kw.get("kernel") is not None:
        card["kernel"] = check_support("kernel", kw["kernel"], ["python", "numba"])
    if kw.get("save_hdf5") is not None:
        card["save_hdf5"] = bool(kw["save_hdf5"])
    if kw.get("progress_bar") is not None:
        card["progress_bar"] = bool(kw["progress_bar"])

    return card


def grid(n=None, resolution=None):
    """
    Set the sphere grid.

    Parameters
    ----------
    n : int
        Sphere dimension, 1 or 2.
    resolution : int
        Node count (n = 1) or Gauss-Legendre order (n = 2); even and at least 8.
        Defaults to 192 for n = 1 and 32 for n = 2.
    """
    card = lpmink.input_deck.grid

    if n is not None:
        if n not in [1, 2]:
            print_error("Unsupported dimension n: %s\n{1, 2}" % str(n))
        card["n"] = int(n)
    if resolution is not None:
        resolution = check_integer("resolution", resolution, RESOLUTION_MIN)
        if resolution % 2 != 0:
            print_error("Grid resolution must be even, got %i" % resolution)
        card["resolution"] = resolution
    return card


def problem(p=None):
    """
    Set the exponent p of det(grad^2 h + h I) = f h^(p-1).
    """
    card = lpmink.input_deck.problem
    if p is not None:
        card["p"] = check_real("p", p)
    return card


def group(mode=None, mu_max=None):
    """
    Set the simplex symmetry group.

    Parameters
    ----------
    mode : {"special", "full", "trivial"}
        Rotations only, all orthogonal maps permuting the simplex vertices, or
        the identity alone.
    mu_max : int
        Largest harmonic degree searched for invariants (4 to 8).
    """
    card = lpmink.input_deck.symmetry
    if mode is not None:
        card["mode"] = check_support(
            "symmetry mode", mode, [MODE_SPECIAL, MODE_FULL, MODE_TRIVIAL]
        )
    if mu_max is not None:
        mu_max = check_integer("mu_max", mu_max, 4)
        if mu_max > MU_MAX_LIMIT:
            print_error("mu_max must not exceed %i, got %i" % (MU_MAX_LIMIT, mu_max))
        card["mu_max"] = mu_max
    return card


def identity(solution=None, ellipse_a=None, N_field=None, field_seed=None):
    """
    Set the data of the identity check.

    Parameters
    ----------
    solution : {"ellipsoid", "constant"}
        Solution pair fed to the identity: h = |Lambda X| with
        f = h^-(n+1+p), or h = f = 1.
    ellipse_a : float
        First semi-axis of Lambda (the others keep det Lambda = 1).
    N_field : int
        Number of random projective fields.
    field_seed : int
        Seed of the projective-field draws.
    """
    card = lpmink.input_deck.pohozaev
    if solution is not None:
        card["solution"] = check_support(
            "identity solution", solution, ["ellipsoid", "constant"]
        )
    if ellipse_a is not None:
        card["ellipse_a"] = check_positive("ellipse_a", ellipse_a)
    if N_field is not None:
        card["N_field"] = check_integer("N_field", N_field, 1)
    if field_seed is not None:
        card["field_seed"] = check_integer("field_seed", field_seed, 0)
    return card


def weight(kind=None, phi_k=None, phi_inf=None, beta0=None, D=None, C=None):
    """
    Set the insolvability weight.

    Parameters
    ----------
    kind : {"radial", "critical"}
        Resolved radial weight (p < -n-1) or the critical weight (p = -n-1).
    phi_k : float, optional
        Decay power of phi(r) = phi_inf r^k / (1 + r^k).
    phi_inf : float
        Limit of phi at infinity.
    beta0 : float, optional
        Integration constant; defaults to twice its lower bound.
    D, C : float
        Parameters of the critical weight |X_{n+1}|^D + C.
    """
    card = lpmink.input_deck.counterexample
    if kind is not None:
        card["kind"] = check_support("counterexample kind", kind, ["radial", "critical"])
    if phi_k is not None:
        card["phi_k"] = check_positive("phi_k", phi_k)
    if phi_inf is not None:
        card["phi_inf"] = check_positive("phi_inf", phi_inf)
    if beta0 is not None:
        card["beta0"] = check_positive("beta0", beta0)
    if D is not None:
        card["D"] = check_positive("D", D)
    if C is not None:
        card["C"] = check_positive("C", C)
    return card


def optimizer(**kw):
    """
    Set the constrained minimizer.

    Parameters
    ----------
    L : int
        Largest harmonic degree of the invariant basis.
    seed_amplitude : float
        Amplitude of the first invariant eigenfunction in the seed.
    tol : float
        Projected-gradient tolerance.
    max_iter : int
        Iteration cap.
    eps_c : float
        Convexity margin in (0, 0.5].
    step : float
        Initial step of the backtracking search.
    momentum : float
        Heavy-ball momentum in [0, 1).
    """
    for key in kw.keys():
        check_support(
            "optimizer parameter",
            key,
            ["L", "seed_amplitude", "tol", "max_iter", "eps_c", "step", "momentum"],
            False,
        )

    card = lpmink.input_deck.optimizer

    if kw.get("L") is not None:
        L = check_integer("L", kw["L"], 0)
        if L > L_MAX_VARIATIONAL:
            print_error(
                "Variational degree L must not exceed %i, got %i"
                % (L_MAX_VARIATIONAL, L)
            )
        card["L"] = L
    if kw.get("seed_amplitude") is not None:
        card["seed_amplitude"] = check_real("seed_amplitude", kw["seed_amplitude"])
    if kw.get("tol") is not None:
        card["tol"] = check_positive("tol", kw["tol"])
    if kw.get("max_iter") is not None:
        card["max_iter"] = check_integer("max_iter", kw["max_iter"], 1)
    if kw.get("eps_c") is not None:
        eps_c = check_positive("eps_c", kw["eps_c"])
        if eps_c > 0.5:
            print_error("Convexity margin eps_c must be in (0, 0.5], got %g" % eps_c)
        card["eps_c"] = eps_c
    if kw.get("step") is not None:
        card["step"] = check_positive("step", kw["step"])
    if kw.get("momentum") is not None:
        momentum = check_real("momentum", kw["momentum"])
        if not 0.0 <= momentum < 1.0:
            print_error("Momentum must be in [0, 1), got %g" % momentum)
        card["momentum"] = momentum

    return card


def oracle(scan=None, N_scan=None, h_max=None, p_low=None, p_high=None, p_tol=None):
    """
    Set the planar shooting oracle.

    Parameters
    ----------
    scan : (float, float), optional
        Exponent range whose period maps are tabulated.
    N_scan : int
        Number of initial heights per period-map scan.
    h_max : float
        Upper end of the initial-height bracket.
    p_low, p_high : float
        Bisection bracket of the bifurcation exponent.
    p_tol : float
        Bisection tolerance.
    """
    card = lpmink.input_deck.oracle
    if scan is not None:
        if len(scan) != 2 or not scan[0] < scan[1]:
            print_error("Oracle scan needs p_min < p_max, got %s" % str(scan))
        card["scan"] = [check_real("scan p_min", scan[0]), check_real("scan p_max", scan[1])]
    if N_scan is not None:
        card["N_scan"] = check_integer("N_scan", N_scan, 4)
    if h_max is not None:
        h_max = check_positive("h_max", h_max)
        if h_max <= 1.0:
            print_error("h_max must exceed 1, got %g" % h_max)
        card["h_max"] = h_max
    if p_low is not None:
        card["p_low"] = check_real("p_low", p_low)
    if p_high is not None:
        card["p_high"] = check_real("p_high", p_high)
    if p_tol is not None:
        card["p_tol"] = check_positive("p_tol", p_tol)
    return card


# ==============================================================================
# Configuration file
# ==============================================================================


def load_config(path):
    """
    Ingest a JSON configuration file into the input deck.

    The file holds one object per card, keyed by the lower-case card tag
    (``{"grid": {"n": 2}, "problem": {"p": -10}}``); a top-level
    ``"subcommand"`` is accepted as a shorthand for the setting card entry.
    """
    if not os.path.exists(path):
        print_error("Configuration file not found: %s" % path)
    with open(path) as f:
        try:
            config = json.load(f)
        except json.JSONDecodeError as err:
            print_error("Configuration file %s is not valid JSON: %s" % (path, err))

    setters = {
        "setting": lambda kw: setting(**kw),
        "grid": lambda kw: grid(**kw),
        "problem": lambda kw: problem(**kw),
        "symmetry": lambda kw: group(**kw),
        "pohozaev": lambda kw: identity(**kw),
        "counterexample": lambda kw: weight(**kw),
        "optimizer": lambda kw: optimizer(**kw),
        "oracle": lambda kw: oracle(**kw),
    }
    for key, value in config.items():
        if key == "subcommand":
            setting(subcommand=value)
            continue
        check_support("configuration section", key, list(setters.keys()), False)
        if not isinstance(value, dict):
            print_error("Configuration section %s must be an object" % key)
        value = dict(value)
        value.pop("tag", None)
        try:
            setters[key](value)
        except TypeError as err:
            print_error("Configuration section %s: %s" % (key, err))


def validate():
    """Cross-card checks run before any computation starts."""
    deck = lpmink.input_deck
    n = deck.grid["n"]
    resolution = deck.grid["resolution"]
    p = deck.problem["p"]
    subcommand = deck.setting["subcommand"]

    if subcommand is None:
        print_error("No subcommand given")

    if subcommand in ["minimize", "second-variation"] and p > -n:
        print_error("The variational scheme needs p <= -n, got p = %g" % p)
    if subcommand == "minimize":
        # Group actions on nodal data must map nodes to nodes
        if n == 1 and resolution % 6 != 0:
            print_error(
                "Symmetric n = 1 grids need a resolution divisible by 6, got %i"
                % resolution
            )
    if subcommand == "build-counterexample":
        kind = deck.counterexample["kind"]
        if kind == "radial" and not p < -n - 1:
            print_error("The radial weight needs p < -n-1, got p = %g" % p)
        if kind == "critical" and p != -n - 1:
            print_error("The critical weight needs p = -n-1, got p = %g" % p)
    if subcommand == "oracle":
        if n != 1:
            print_error("The shooting oracle is planar (n = 1), got n = %i" % n)
        if p >= -2.0 and deck.oracle["scan"] is None:
            print_error("The shooting oracle needs p < -2, got p = %g" % p)
        if deck.oracle["scan"] is not None and deck.oracle["scan"][1] >= -2.0:
            print_error("The oracle scan range must lie below -2")
    if subcommand == "bifurcation":
        if not deck.oracle["p_low"] < deck.oracle["p_high"] < -2.0:
            print_error("Bifurcation bracket needs p_low < p_high < -2")


# ==============================================================================
# Utilities
# ==============================================================================


def print_card(card):
    for key in card:
        if key == "tag":
            print("  " + card[key] + " card")
        else:
            print("    %s : %s" % (key, card[key]))
    print("\n")


def check_support(label, value, supported, replace=True):
    if replace:
        value = value.replace("_", "-").replace(" ", "-").lower()
    supported_str = "{"
    for str_ in supported:
        supported_str += str_ + ", "
    supported_str = supported_str[:-2] + "}"
    if value not in supported:
        print_error("Unsupported " + label + ": " + value + "\n" + supported_str)
    return value


def check_real(label, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        print_error("%s must be a real number, got %s" % (label, str(value)))
    if not math.isfinite(value):
        print_error("%s must be finite, got %s" % (label, str(value)))
    return value


def check_positive(label, value):
    value = check_real(label, value)
    if value <= 0.0:
        print_error("%s must be positive, got %g" % (label, value))
    return value


def check_integer(label, value, minimum):
    try:
        integral = not isinstance(value, bool) and int(value) == value
    except (TypeError, ValueError):
        integral = False
    if not integral:
        print_error("%s must be an integer, got %s" % (label, str(value)))
    value = int(value)
    if value < minimum:
        print_error("%s must be at least %i, got %i" % (label, minimum, value))
    return value


# ==============================================================================
# Reset
# ==============================================================================


def reset_cards():
    lpmink.input_deck.reset()
