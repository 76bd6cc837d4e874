import numba as nb
import sys
from mpi4py import MPI

from lpmink.constant import EXIT_VALIDATION


master = MPI.COMM_WORLD.Get_rank() == 0


class NumericalError(RuntimeError):
    """A computation failed numerically; the message carries the diagnostic."""


def print_msg(msg):
    if master:
        print(msg)
        sys.stdout.flush()


def print_error(msg, code=EXIT_VALIDATION):
    print("ERROR: %s\n" % msg)
    sys.stdout.flush()
    sys.exit(code)


def print_warning(msg):
    if master:
        print("Warning: %s\n" % msg)
        sys.stdout.flush()


def print_banner(setting):
    size = MPI.COMM_WORLD.Get_size()
    if master:
        banner = (
            "\n"
            + r"  _            __  __ _       _    "
            + "\n"
            + r" | |_ __  _ __|  \/  (_)_ __ | | __"
            + "\n"
            + r" | | '_ \| '_ \ |\/| | | '_ \| |/ /"
            + "\n"
            + r" | | |_) | |_) | |  | | | | | |   < "
            + "\n"
            + r" |_| .__/| .__/|_|  |_|_|_| |_|_|\_\ "
            + "\n"
            + r"   |_|   |_|                        "
            + "\n"
            + "\n"
        )
        if nb.config.DISABLE_JIT:
            banner += "         Kernel | Python\n"
        else:
            banner += "         Kernel | Numba\n"
        banner += "     Subcommand | %s\n" % setting["subcommand"]
        banner += "  MPI Processes | %i\n" % size
        banner += "        Workers | %s" % (setting["workers"] or "auto")
        print(banner)
        sys.stdout.flush()


# =============================================================================
# Optimizer progress
# =============================================================================


def print_header_minimize():
    if master:
        print("\n #      I(u)                  |grad|     step      barrier   min u    max u    min eig")
        print(" =====  ====================  =========  ========  ========  =======  =======  =========")


def print_progress_minimize(it, value, grad_norm, step, barrier, u_min, u_max, eig_min):
    if master:
        print(
            " %-5i  %.15f  %.3e  %.2e  %.2e  %.5f  %.5f  %.3e"
            % (it, value, grad_norm, step, barrier, u_min, u_max, eig_min)
        )
        sys.stdout.flush()


def print_minimize_exit(converged, it, grad_norm):
    if master:
        print("\n================================")
        if converged:
            print(" Successful convergence (%i iterations, |grad| %.3e)." % (it, grad_norm))
        else:
            print(
                " Convergence to tolerance not achieved: Maximum number of iterations."
            )
        print("")
        sys.stdout.flush()


# =============================================================================
# Period map scan
# =============================================================================


def print_header_scan(p):
    if master:
        print("\n Period map, p = %.6f" % p)
        print("\n h0          period")
        print(" ==========  ==================")


def print_progress_scan(h0, period):
    if master:
        print(" %.8f  %.15f" % (h0, period))
        sys.stdout.flush()


# =============================================================================
# Runtime
# =============================================================================


def print_runtime(runtime):
    total = max(runtime["total"], 1e-12)
    preparation = runtime["preparation"]
    computation = runtime["computation"]
    output = runtime["output"]
    if master:
        print("\n Runtime report:")
        print_time("Total      ", total, 100)
        print_time("Preparation", preparation, preparation / total * 100)
        print_time("Computation", computation, computation / total * 100)
        print_time("Output     ", output, output / total * 100)
        print("\n")
        sys.stdout.flush()


def print_time(tag, t, percent):
    if t >= 24 * 60 * 60:
        print("   %s | %.2f days (%.1f%%)" % (tag, t / 24 / 60 / 60, percent))
    elif t >= 60 * 60:
        print("   %s | %.2f hours (%.1f%%)" % (tag, t / 60 / 60, percent))
    elif t >= 60:
        print("   %s | %.2f minutes (%.1f%%)" % (tag, t / 60, percent))
    else:
        print("   %s | %.2f seconds (%.1f%%)" % (tag, t, percent))
