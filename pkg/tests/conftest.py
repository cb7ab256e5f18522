import random

import pytest

from fedst.runtime import make_group, run_parties
from fedst.sharing import Dealer


def run_protocol(fn, n=3, seed=0, transport="mem", args_for=None, dealer=None,
                 capture_p0=False):
    """Run fn(ctx, *args) across n parties; returns (results, sessions, dealer)."""
    sessions, dealer = make_group(n, seed=seed, transport=transport, dealer=dealer)
    if capture_p0:
        sessions[0].capture_received = True
    results = run_parties(sessions, dealer.pools_for, fn, args_for=args_for,
                          seed=seed)
    if transport == "tcp":
        for s in sessions:
            s.close()
    return results, sessions, dealer


@pytest.fixture
def rng():
    return random.Random(0xFED5)
