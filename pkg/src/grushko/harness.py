"""Seeded random instances and survey runs."""

from __future__ import annotations

import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import GrushkoError, NoValidMove
from .tree import (
    collapse,
    comb_length,
    normalize_degree2,
    split_vertex,
    standard_rose,
    unfold,
    validate_tree,
)
from .words import FactorElement, NormalWord, parse_word


def default_seed() -> int:
    return int(os.environ.get("GW_SEED", "0"))


def _random_twists(rng, T, v, U):
    spec = T.spec(v)
    if spec is None:
        return None
    out = {}
    for h in U:
        if rng.random() < 0.5:
            j = rng.randrange(spec.rank)
            out[h] = FactorElement.gen(T.labels[v], spec, j, rng.choice((-2, -1, 1, 2)))
    return out


UNFOLD_RATE = 0.3


def _collapsible(T, skip=None):
    return [e for e in sorted(T.edges) if e != skip and T.o(e) != T.t(e)
            and not (T.labels[T.o(e)] is not None and T.labels[T.t(e)] is not None)]


def _try_move(rng, T):
    r = rng.random()
    if r < 0.2:
        cands = _collapsible(T)
        if not cands or len(T.edges) < 2:
            return None
        return normalize_degree2(collapse(T, {rng.choice(cands)})[0])[0]
    v = rng.choice(T.vertices)
    halves = T.half_edges(v)
    if len(halves) < 2:
        return None
    k = rng.randint(2, len(halves))
    U = rng.sample(halves, k)
    if T.labels[v] is None and len(halves) - k < 2:
        return None
    tw = _random_twists(rng, T, v, U)
    if r < 0.2 + UNFOLD_RATE:
        hY = rng.choice(U)
        if abs(hY) in {abs(h) for h in U if h != hY}:
            return None
        T1, _, _, _ = unfold(T, v, hY, U, tw)
        return normalize_degree2(T1)[0]
    T1, _, f, _ = split_vertex(T, v, U, tw)
    if rng.random() < 0.5:
        return normalize_degree2(T1)[0]
    cands = _collapsible(T1, f)
    if not cands:
        return None
    T2, _ = collapse(T1, {rng.choice(cands)})
    return normalize_degree2(T2)[0]


def random_tree_in_OL(p, g: NormalWord, L: int, seed: int, steps: int, retries: int = 2000):
    """Random walk of ``steps`` moves from the rose, staying inside |g|_T <= L."""
    T = standard_rose(p)
    if comb_length(T, g) > L:
        raise ValueError("L is smaller than the length of g in the rose")
    rng = random.Random(seed)
    for _ in range(steps):
        for _ in range(retries):
            try:
                T2 = _try_move(rng, T)
            except GrushkoError:
                continue
            if T2 is None:
                continue
            try:
                validate_tree(T2)
            except GrushkoError:
                continue
            if comb_length(T2, g) <= L:
                T = T2
                break
        else:
            raise NoValidMove(f"no admissible move after {retries} tries")
    return T


def random_word(p, rng, n: int) -> NormalWord:
    gens = [w for w in p.generators()]
    out = NormalWord(p, ())
    for _ in range(rng.randint(1, n)):
        x = rng.choice(gens)
        out = out * (x if rng.random() < 0.5 else x.inverse())
    return out


# -- surveys ----------------------------------------------------------------------


@dataclass
class SurveyConfig:
    presentation: object
    words: list = field(default_factory=list)
    random_words: int = 0
    max_length: int = 6
    L: int = 0
    R: int = 3
    budget: int = 100000
    seed: int = 0
    steps: int = 3
    workers: int = 1

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")


def survey_one(p, g: NormalWord, cfg: SurveyConfig) -> dict:
    from .classify import certify_projection, check_certificate, find_short_cut_pair, is_quadratic
    from .classify import is_simple

    t0 = time.perf_counter()
    row = {"element": str(g)}
    try:
        if is_simple(p, g).is_simple:
            row["classification"] = "simple"
            L = max(cfg.L, comb_length(standard_rose(p), g))
            seed = cfg.seed + sum(map(ord, str(g)))
            T0 = random_tree_in_OL(p, g, L, seed, cfg.steps)
            T1 = random_tree_in_OL(p, g, L, seed + 1, cfg.steps)
            cert = certify_projection(p, g, T0, T1)
            row["certificate"] = cert.to_json()
            row["length"] = cert.length
            row["bound"] = cert.bound
            row["pass"] = check_certificate(cert) and cert.length <= cert.bound
        elif is_quadratic(p, g).is_quadratic:
            row["classification"] = "quadratic"
        else:
            cands = find_short_cut_pair(p, g, cfg.R, budget=cfg.budget)
            if cands:
                row["classification"] = "cut-pair-found"
                row["cut_pairs"] = [{"a": str(c.a), "components": c.components}
                                    for c in cands[:5]]
            else:
                row["classification"] = "unresolved"
    except GrushkoError as ex:
        row["classification"] = "error"
        row["error"] = {"code": ex.code, "message": str(ex)}
    row["seconds"] = round(time.perf_counter() - t0, 3)
    return row


def _job(args):
    p, text, cfg = args
    return survey_one(p, parse_word(text, p), cfg)


def run_survey(cfg: SurveyConfig, timings: bool = True) -> dict:
    from .words import is_peripheral

    p = cfg.presentation
    words = [parse_word(w, p) if isinstance(w, str) else w for w in cfg.words]
    rng = random.Random(cfg.seed)
    while len(words) < len(cfg.words) + cfg.random_words:
        w = random_word(p, rng, cfg.max_length)
        if not w.is_identity() and is_peripheral(w) is None:
            words.append(w)
    uniq = {}
    for w in words:
        uniq.setdefault(str(w), w)
    jobs = [(p, s, cfg) for s in sorted(uniq)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            rows = list(ex.map(_job, jobs))
    else:
        rows = [_job(j) for j in jobs]
    rows.sort(key=lambda r: r["element"])
    if not timings:
        for r in rows:
            r.pop("seconds", None)
    return {"seed": cfg.seed, "R": cfg.R, "rows": rows}
