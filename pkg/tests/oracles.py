"""Independent brute-force oracles shared by the test suite."""
import numpy as np
from numba import njit

from freegeom.free_group import inverse


def _marking_table(G):
    """Paths for letters 0..2r-1 (x_i at 2i, x_i^-1 at 2i+1), padded with zeros."""
    r = G.rank
    paths = []
    for p in G.marking:
        paths.append(p)
        paths.append(inverse(p))
    width = max(len(p) for p in paths)
    T = np.zeros((2 * r, width), dtype=np.int64)
    n = np.zeros(2 * r, dtype=np.int64)
    for i, p in enumerate(paths):
        T[i, : len(p)] = p
        n[i] = len(p)
    return T, n


@njit(cache=True)
def _sup_ratio(r, max_len, TG, nG, LG, TH, nH, LH):
    cap_g = max_len * TG.shape[1] + 1
    cap_h = max_len * TH.shape[1] + 1
    Sg = np.zeros(cap_g, np.int64)
    Wg = np.zeros(cap_g + 1)
    Sh = np.zeros(cap_h, np.int64)
    Wh = np.zeros(cap_h + 1)
    # undo information per depth
    popped_g = np.zeros((max_len, TG.shape[1]), np.int64)
    npop_g = np.zeros(max_len, np.int64)
    npush_g = np.zeros(max_len, np.int64)
    popped_h = np.zeros((max_len, TH.shape[1]), np.int64)
    npop_h = np.zeros(max_len, np.int64)
    npush_h = np.zeros(max_len, np.int64)
    word = np.zeros(max_len, np.int64)
    choice = np.full(max_len, -1, np.int64)
    top_g = 0
    top_h = 0
    best = -1.0
    depth = 0
    n_letters = 2 * r
    while depth >= 0:
        # undo the previous choice at this depth
        if choice[depth] >= 0:
            top_g -= npush_g[depth]
            for j in range(npop_g[depth] - 1, -1, -1):
                Sg[top_g] = popped_g[depth, j]
                Wg[top_g + 1] = Wg[top_g] + LG[abs(Sg[top_g]) - 1]
                top_g += 1
            top_h -= npush_h[depth]
            for j in range(npop_h[depth] - 1, -1, -1):
                Sh[top_h] = popped_h[depth, j]
                Wh[top_h + 1] = Wh[top_h] + LH[abs(Sh[top_h]) - 1]
                top_h += 1
        c = choice[depth] + 1
        if depth > 0:
            prev = word[depth - 1]
            if c == (prev ^ 1):
                c += 1
        if c >= n_letters:
            choice[depth] = -1
            depth -= 1
            continue
        choice[depth] = c
        word[depth] = c
        # push letter c in G
        k = 0
        pushed = 0
        for j in range(nG[c]):
            x = TG[c, j]
            if pushed == 0 and top_g > 0 and Sg[top_g - 1] == -x:
                top_g -= 1
                popped_g[depth, k] = Sg[top_g]
                k += 1
            else:
                Sg[top_g] = x
                Wg[top_g + 1] = Wg[top_g] + LG[abs(x) - 1]
                top_g += 1
                pushed += 1
        npop_g[depth] = k
        npush_g[depth] = pushed
        k = 0
        pushed = 0
        for j in range(nH[c]):
            x = TH[c, j]
            if pushed == 0 and top_h > 0 and Sh[top_h - 1] == -x:
                top_h -= 1
                popped_h[depth, k] = Sh[top_h]
                k += 1
            else:
                Sh[top_h] = x
                Wh[top_h + 1] = Wh[top_h] + LH[abs(x) - 1]
                top_h += 1
                pushed += 1
        npop_h[depth] = k
        npush_h[depth] = pushed
        # evaluate cyclically reduced words
        if word[0] != (c ^ 1) or depth == 0:
            kg = 0
            while 2 * kg < top_g and Sg[kg] == -Sg[top_g - 1 - kg]:
                kg += 1
            kh = 0
            while 2 * kh < top_h and Sh[kh] == -Sh[top_h - 1 - kh]:
                kh += 1
            lg = Wg[top_g - kg] - Wg[kg]
            lh = Wh[top_h - kh] - Wh[kh]
            if lg > 0:
                ratio = lh / lg
                if ratio > best:
                    best = ratio
        if depth + 1 < max_len:
            depth += 1
            choice[depth] = -1
    return best


def brute_force_sup_ratio(G, H, max_length=10):
    """max over all cyclically reduced words of length <= max_length of len_H / len_G."""
    TG, nG = _marking_table(G)
    TH, nH = _marking_table(H)
    return _sup_ratio(G.rank, max_length, TG, nG, G.float_lengths(), TH, nH, H.float_lengths())


def _image_table(images):
    paths = []
    for p in images:
        paths.append(tuple(p))
        paths.append(inverse(p))
    width = max(len(p) for p in paths)
    T = np.zeros((len(paths), width), dtype=np.int64)
    n = np.zeros(len(paths), dtype=np.int64)
    for i, p in enumerate(paths):
        T[i, : len(p)] = p
        n[i] = len(p)
    return T, n


@njit(cache=True)
def _image_length_extremes(r, max_len, T, n):
    cap = max_len * T.shape[1] + 1
    S = np.zeros(cap, np.int64)
    popped = np.zeros((max_len, T.shape[1]), np.int64)
    npop = np.zeros(max_len, np.int64)
    npush = np.zeros(max_len, np.int64)
    word = np.zeros(max_len, np.int64)
    choice = np.full(max_len, -1, np.int64)
    top = 0
    hi = 0.0
    lo = 1e300
    count = 0
    depth = 0
    while depth >= 0:
        if choice[depth] >= 0:
            top -= npush[depth]
            for j in range(npop[depth] - 1, -1, -1):
                S[top] = popped[depth, j]
                top += 1
        c = choice[depth] + 1
        if depth > 0 and c == (word[depth - 1] ^ 1):
            c += 1
        if c >= 2 * r:
            choice[depth] = -1
            depth -= 1
            continue
        choice[depth] = c
        word[depth] = c
        k = 0
        pushed = 0
        for j in range(n[c]):
            x = T[c, j]
            if pushed == 0 and top > 0 and S[top - 1] == -x:
                top -= 1
                popped[depth, k] = S[top]
                k += 1
            else:
                S[top] = x
                top += 1
                pushed += 1
        npop[depth] = k
        npush[depth] = pushed
        ratio = top / (depth + 1)
        hi = max(hi, ratio)
        lo = min(lo, ratio)
        count += 1
        if depth + 1 < max_len:
            depth += 1
            choice[depth] = -1
    return hi, lo, count


def image_length_extremes(images, max_length):
    """(max, min) of |psi(w)| / |w| over all reduced words 1 <= |w| <= max_length, and the word count.

    images lists psi(x_1), ..., psi(x_r) as letter tuples.
    """
    T, n = _image_table(images)
    return _image_length_extremes(len(images), max_length, T, n)
