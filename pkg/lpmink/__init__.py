# User interface
from lpmink.input_ import (
    setting,
    grid,
    problem,
    group,
    identity,
    weight,
    optimizer,
    oracle,
    load_config,
    print_card,
    reset_cards,
)
from lpmink.main import run, prepare
