"""Independent brute-force oracles used by the test suite.

These work on plain letter strings in a free group and share no code with the
package beyond the word parser used to build inputs."""

from itertools import product

import networkx as nx


def letters(word):
    """'a^2 b^-1' style -> list of signed letters like ['a', 'a', 'B']."""
    out = []
    for tok in str(word).split():
        base, _, e = tok.partition("^")
        e = int(e) if e else 1
        ch = base if e > 0 else base.upper()
        out.extend([ch] * abs(e))
    return out


def inv(x):
    return x.swapcase()


def free_reduce(ws):
    out = []
    for x in ws:
        if out and out[-1] == inv(x):
            out.pop()
        else:
            out.append(x)
    return out


def cyclic_reduce(ws):
    ws = free_reduce(ws)
    while len(ws) > 1 and ws[0] == inv(ws[-1]):
        ws = ws[1:-1]
    return ws


def primitive_root(ws):
    n = len(ws)
    for d in range(1, n + 1):
        if n % d == 0 and ws == ws[:d] * (n // d):
            return ws[:d]
    return ws


def annular_count(g, h, alphabet, window=None):
    """Components of the line pattern of g relative to the axis of h in the Cayley
    tree, unrolled over a finite window.  None when infinite."""
    u = primitive_root(cyclic_reduce(letters(g)))
    w = primitive_root(cyclic_reduce(letters(h)))
    n, m = len(w), len(u)
    dirs = alphabet + [x.upper() for x in alphabet]
    M = window or 6 * (n + m) + 6
    lo, hi = -M * n, M * n

    def fwd(i):
        return w[i % n]

    def axis_dirs(i):
        return {fwd(i), inv(fwd(i - 1))}

    G = nx.Graph()
    for i in range(lo, hi + 1):
        for d in dirs:
            if d not in axis_dirs(i):
                G.add_node((i, d))
    cap = 2 * (n + m) + 2
    for k in range(m):
        enter = u[k - 1]  # letter arriving at the vertex
        for i in range(lo, hi + 1):
            back = inv(enter)
            if back in axis_dirs(i):
                continue
            for step in (1, -1):
                j, t = i, 0
                while t <= cap:
                    out = u[(k + t) % m]
                    along = fwd(j) if step == 1 else inv(fwd(j - 1))
                    if out == along:
                        j += step
                        t += 1
                        if not lo <= j <= hi:
                            break
                        continue
                    if out not in axis_dirs(j):
                        G.add_edge((i, back), (j, out))
                    break
                if t > cap:
                    return "axis"
    # a component with period d meets any d consecutive fundamental domains,
    # so every component of the infinite graph shows up in the middle half
    half = (hi - lo) // 4
    comps = []
    for C in nx.connected_components(G):
        idx = [x[0] for x in C]
        if any(-half <= i <= half for i in idx):
            comps.append((min(idx), max(idx)))
    for a, b in comps:
        if a > lo + 2 * n or b < hi - 2 * n:
            return None
    return len(comps)


# -- classical Whitehead descent --------------------------------------------------


def whitehead_automorphisms(alphabet):
    """All Whitehead automorphisms (A, x) as letter -> word maps."""
    dirs = alphabet + [x.upper() for x in alphabet]
    out = []
    for x in dirs:
        others = [y for y in dirs if y not in (x, inv(x))]
        for bits in product((0, 1), repeat=len(others)):
            A = {x} | {y for y, b in zip(others, bits) if b}
            if A == {x}:
                continue
            phi = {}
            for y in alphabet:
                if y in (x, inv(x)):
                    phi[y] = [y]
                    continue
                w = [y]
                if y in A:
                    w = w + [x]
                if inv(y) in A:
                    w = [inv(x)] + w
                phi[y] = w
            out.append(phi)
    return out


def apply(phi, ws):
    out = []
    for y in ws:
        img = phi[y.lower()]
        out.extend(img if y.islower() else [inv(z) for z in reversed(img)])
    return cyclic_reduce(out)


def classical_graph_connected(ws, alphabet):
    G = nx.MultiGraph()
    G.add_nodes_from(alphabet + [x.upper() for x in alphabet])
    n = len(ws)
    for i in range(n):
        G.add_edge(inv(ws[i - 1]), ws[i])
    return nx.is_connected(G)


def is_simple_classical(word, alphabet):
    """Whitehead descent to minimal cyclic length; simple iff the minimal
    word's classical Whitehead graph is disconnected."""
    ws = cyclic_reduce(letters(word) if isinstance(word, str) else list(word))
    autos = whitehead_automorphisms(alphabet)
    improved = True
    while improved:
        improved = False
        for phi in autos:
            w2 = apply(phi, ws)
            if len(w2) < len(ws):
                ws, improved = w2, True
                break
    return not classical_graph_connected(ws, alphabet)


def cyclic_words(alphabet, n):
    """Cyclically reduced words of length exactly n."""
    dirs = alphabet + [x.upper() for x in alphabet]
    for ws in product(dirs, repeat=n):
        ws = list(ws)
        if n == 1 or all(ws[i] != inv(ws[i - 1]) for i in range(n)):
            yield ws


def to_text(ws):
    return " ".join(x if x.islower() else f"{x.lower()}^-1" for x in ws)


# -- windowed unrolling of derived graphs -----------------------------------------


def ball(gens, mul, radius):
    """Word-length ball {element: length} around the identity (None)."""
    dist = {None: 0}
    frontier = [None]
    for r in range(1, radius + 1):
        nxt = []
        for s in frontier:
            for x in gens:
                y = mul(s, x)
                if y not in dist:
                    dist[y] = r
                    nxt.append(y)
        frontier = nxt
    return dist


def window_components(vertices, edges, removed, gens, mul, inv_, radius):
    """Unroll a voltage graph over a ball of the label group.

    edges: (u, v, label).  Returns (components, dist) where each component is
    (frozenset of nodes, touches_boundary, sides) and sides is the set of signs
    of boundary elements it reaches (meaningful for cyclic groups)."""
    dist = ball(gens, mul, radius)
    maxlab = max([0] + [dist.get(lab, radius) for _, _, lab in edges if lab is not None])
    G = nx.Graph()
    for h in vertices:
        for s in dist:
            if (h, s) not in removed:
                G.add_node((h, s))
    for u, v, lab in edges:
        for s in dist:
            t = mul(s, lab)
            a, b = (u, s), (v, t)
            if a in G and b in G:
                G.add_edge(a, b)
    band = radius - maxlab
    out = []
    for C in nx.connected_components(G):
        touches = any(dist[s] > band for _, s in C)
        out.append((frozenset(C), touches))
    return out, dist
