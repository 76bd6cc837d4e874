import numpy as np

# Basic types
float64 = np.float64
int64 = np.int64
bool_ = np.bool_

# Row types of the CSV outputs, defined on demand
support_row = None
radial_row = None
certificate_row = None
scan_row = None
bifurcation_row = None
refinement_row = None
history_row = None
orbit_row = None


# ==============================================================================
# Nodal records
# ==============================================================================


def _node_fields(n):
    return [("X%i" % (i + 1), float64) for i in range(n + 1)]


# Support function on the grid
def make_type_support_row(n):
    global support_row

    struct = _node_fields(n) + [
        ("h", float64),
        ("det_W", float64),
        ("eig_min", float64),
    ]
    support_row = np.dtype(struct)
    return support_row


# K_f = grad_xi f + beta f at grid nodes, next to its closed form
def make_type_certificate_row(n):
    global certificate_row

    struct = _node_fields(n) + [
        ("f", float64),
        ("K", float64),
        ("K_expected", float64),
        ("counted", bool_),
    ]
    certificate_row = np.dtype(struct)
    return certificate_row


# ==============================================================================
# Profiles and scans
# ==============================================================================


def make_type_radial_row():
    global radial_row

    struct = [
        ("r", float64),
        ("phi", float64),
        ("f", float64),
        ("residual", float64),
    ]
    radial_row = np.dtype(struct)
    return radial_row


def make_type_scan_row():
    global scan_row

    struct = [
        ("p", float64),
        ("h0", float64),
        ("period", float64),
        ("energy_drift", float64),
    ]
    scan_row = np.dtype(struct)
    return scan_row


def make_type_bifurcation_row():
    global bifurcation_row

    struct = [
        ("p", float64),
        ("period_small", float64),
        ("period_max", float64),
        ("onset", bool_),
    ]
    bifurcation_row = np.dtype(struct)
    return bifurcation_row


def make_type_refinement_row():
    global refinement_row

    struct = [
        ("resolution", int64),
        ("integral", float64),
        ("ma_residual", float64),
    ]
    refinement_row = np.dtype(struct)
    return refinement_row


# ==============================================================================
# Optimizer and oracle traces
# ==============================================================================


def make_type_history_row():
    global history_row

    struct = [
        ("iteration", int64),
        ("I", float64),
        ("grad_norm", float64),
        ("step", float64),
        ("barrier", float64),
        ("u_min", float64),
        ("u_max", float64),
        ("eig_min", float64),
    ]
    history_row = np.dtype(struct)
    return history_row


def make_type_orbit_row():
    global orbit_row

    struct = [
        ("theta", float64),
        ("h", float64),
        ("dh", float64),
    ]
    orbit_row = np.dtype(struct)
    return orbit_row
