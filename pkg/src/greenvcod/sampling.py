import numpy as np


def frame_rng(seed, *key):
    """Generator keyed by (seed, *key) so draws do not depend on processing order."""
    return np.random.default_rng([int(seed), *(int(k) for k in key)])


def sample_pixels(labels, cap, neg_pos_ratio, rng):
    """Sorted flat indices of a class-balanced pixel subset.

    Keeps at most ``cap // 2`` positives and at most
    ``max(neg_pos_ratio * n_pos, cap // 4)`` negatives, ``cap`` pixels overall.
    """
    labels = np.asarray(labels).ravel()
    pos = np.flatnonzero(labels)
    neg = np.flatnonzero(labels == 0)
    n_pos = min(len(pos), cap // 2)
    n_neg = min(len(neg), cap - n_pos, max(int(neg_pos_ratio * n_pos), cap // 4))
    chosen = np.concatenate(
        [
            rng.choice(pos, n_pos, replace=False) if n_pos < len(pos) else pos,
            rng.choice(neg, n_neg, replace=False) if n_neg < len(neg) else neg,
        ]
    )
    return np.sort(chosen)
