from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def atom_lists(draw, max_atoms=3, max_frags=4, conservative=None):
    """Lists of ``(weight, fragments)`` satisfying the standing assumptions.

    Fragments are at least 0.05 and the largest is at most 0.95 so that the
    finite-difference and root-finding oracles stay well conditioned.
    """
    n_atoms = draw(st.integers(1, max_atoms))
    atoms = []
    for _ in range(n_atoms):
        w = draw(st.floats(0.1, 10.0))
        k = draw(st.integers(2, max_frags))
        raw = draw(st.lists(st.floats(0.2, 1.0), min_size=k, max_size=k))
        keep = conservative if conservative is not None else draw(st.booleans())
        mass = 1.0 if keep else draw(st.floats(0.5, 0.99))
        frags = sorted((mass * r / sum(raw) for r in raw), reverse=True)
        if frags[-1] < 0.05 or frags[0] > 0.95:
            frags = [mass / k] * k
        atoms.append((w, tuple(frags)))
    return atoms
