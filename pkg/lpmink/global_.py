"""This module contains global variables."""

from lpmink.card import InputDeck


input_deck = InputDeck()
