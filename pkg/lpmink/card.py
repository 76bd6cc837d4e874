from lpmink.constant import (
    EPS_CONVEX_DEFAULT,
    H0_MAX,
    MODE_SPECIAL,
    MU_MAX_DEFAULT,
    N_SCAN,
)


class InputDeck:
    def __init__(self):
        self.reset()

    def reset(self):
        # Default cards are set by functions make_card_*
        self.setting = make_card_setting()
        self.grid = make_card_grid()
        self.problem = make_card_problem()
        self.symmetry = make_card_symmetry()
        self.pohozaev = make_card_pohozaev()
        self.counterexample = make_card_counterexample()
        self.optimizer = make_card_optimizer()
        self.oracle = make_card_oracle()

    def cards(self):
        return [
            self.setting,
            self.grid,
            self.problem,
            self.symmetry,
            self.pohozaev,
            self.counterexample,
            self.optimizer,
            self.oracle,
        ]

    def to_dict(self):
        """All cards keyed by lower-case tag, as embedded in output JSON."""
        return {card["tag"].lower(): dict(card) for card in self.cards()}


def make_card_setting():
    return {
        "tag": "Setting",
        "subcommand": None,
        "output_dir": "output",
        # Defaults to the subcommand name
        "output_name": None,
        # None means one chunk per available core
        "workers": None,
        "seed": 90053,
        "kernel": "python",
        "save_hdf5": True,
        "progress_bar": True,
    }


def make_card_grid():
    return {
        "tag": "Grid",
        "n": 1,
        # None means RESOLUTION_DEFAULT[n]
        "resolution": None,
    }


def make_card_problem():
    return {
        "tag": "Problem",
        "p": -8.0,
    }


def make_card_symmetry():
    return {
        "tag": "Symmetry",
        "mode": MODE_SPECIAL,
        "mu_max": MU_MAX_DEFAULT,
    }


def make_card_pohozaev():
    return {
        "tag": "Pohozaev",
        # "ellipsoid": h = |Lambda X| with its exact weight; "constant": h = f = 1
        "solution": "ellipsoid",
        "ellipse_a": 1.3,
        "N_field": 10,
        "field_seed": 90053,
    }


def make_card_counterexample():
    return {
        "tag": "Counterexample",
        # "radial": resolved weight for p < -n-1; "critical": p = -n-1
        "kind": "radial",
        "phi_k": None,
        "phi_inf": 1.0,
        "beta0": None,
        "D": 4.0,
        "C": 1.0,
    }


def make_card_optimizer():
    return {
        "tag": "Optimizer",
        "L": None,
        "seed_amplitude": 0.05,
        "tol": 1e-8,
        "max_iter": 2000,
        "eps_c": EPS_CONVEX_DEFAULT,
        "step": 1.0,
        "momentum": 0.0,
    }


def make_card_oracle():
    return {
        "tag": "Oracle",
        "scan": None,
        "N_scan": N_SCAN,
        "h_max": H0_MAX,
        "p_low": -9.0,
        "p_high": -6.0,
        "p_tol": 1e-4,
    }
