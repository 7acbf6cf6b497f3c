"""Seeded synthetic check-in worlds for tests, demos and trend checks.

Users have a home, a favourite theme of venue categories and a roaming
radius; they are linked by a scale-free friendship graph. History check-ins
fill the days before ``day``; on ``day`` itself ``n_tasks`` distinct venues
are visited inside a one-hour window, each by a user choosing with the same
habits as in its history.
"""
from __future__ import annotations

import datetime as dt
import math

import numpy as np

from .ingest import CheckinRecord, SocialGraph, day_start

THEMES = {
    "food": ["restaurant", "cafe", "bakery", "noodles"],
    "night": ["bar", "club", "music", "pub"],
    "shop": ["mall", "market", "boutique", "books"],
    "outdoor": ["park", "trail", "beach", "stadium"],
    "work": ["office", "cowork", "bank", "station"],
}
CENTER = (30.66, 104.06)
KM_PER_DEG_LAT = 111.195


def _offset(center, dx_km, dy_km):
    lat = center[0] + dy_km / KM_PER_DEG_LAT
    lon = center[1] + dx_km / (KM_PER_DEG_LAT * math.cos(math.radians(center[0])))
    return (round(lat, 6), round(lon, 6))


def scale_free_edges(n, m, rng):
    """Barabasi-Albert preferential attachment, returned as undirected pairs."""
    m = max(1, min(m, n - 1))
    targets = list(range(m))
    repeated = []
    edges = []
    for v in range(m, n):
        for t in set(targets):
            edges.append((t, v))
        repeated.extend(targets)
        repeated.extend([v] * m)
        targets = []
        while len(set(targets)) < m:
            targets.append(int(repeated[rng.integers(len(repeated))]))
    return sorted({(min(a, b), max(a, b)) for a, b in edges})


def synthetic_world(seed=0, n_workers=50, n_tasks=60, n_venues=200, history_days=20,
                    checkins_per_day=(0, 3), area_km=200.0, attach=2, day=dt.date(2010, 6, 15)):
    """Return ``(checkins, graph, day)``."""
    rng = np.random.default_rng(seed)
    themes = sorted(THEMES)
    venues = []
    for v in range(n_venues):
        theme = themes[rng.integers(len(themes))]
        cats = THEMES[theme]
        k = 1 + int(rng.random() < 0.4)
        chosen = sorted({cats[i] for i in rng.choice(len(cats), size=k, replace=False)})
        loc = _offset(CENTER, rng.uniform(-area_km / 2, area_km / 2), rng.uniform(-area_km / 2, area_km / 2))
        venues.append((f"v{v:04d}", loc, theme, frozenset(chosen)))
    vloc = np.array([[v[1][0], v[1][1]] for v in venues])
    km = np.array([KM_PER_DEG_LAT, KM_PER_DEG_LAT * math.cos(math.radians(CENTER[0]))])

    users = [f"u{i:03d}" for i in range(n_workers)]
    profile = {}
    for u in users:
        home = vloc[rng.integers(n_venues)]
        fav = themes[rng.integers(len(themes))]
        roam = float(rng.choice([1.5, 4.0, 10.0]))
        profile[u] = (home, fav, roam)

    def pick_venue(u):
        home, fav, roam = profile[u]
        d = np.hypot(*((vloc - home) * km).T)
        w = np.exp(-d / roam) * np.array([3.0 if v[2] == fav else 0.3 for v in venues])
        return int(rng.choice(n_venues, p=w / w.sum()))

    start = day_start(day)
    checkins = []
    for back in range(history_days, 0, -1):
        base = start - back * 86400
        for u in users:
            for _ in range(int(rng.integers(checkins_per_day[0], checkins_per_day[1] + 1))):
                v = venues[pick_venue(u)]
                ts = base + int(rng.integers(8 * 3600, 22 * 3600))
                checkins.append(CheckinRecord(u, ts, v[1], v[0], v[3]))

    # today's tasks are venues the users pick by the same habits as before
    owners = [int(i) for i in rng.permutation(n_workers)]
    while len(owners) < n_tasks:
        owners.append(int(rng.integers(n_workers)))
    used = set()
    window = start + 10 * 3600
    for ui in owners[:min(n_tasks, n_venues)]:
        vi = pick_venue(users[ui])
        while vi in used:
            vi = pick_venue(users[ui]) if rng.random() < 0.9 else int(rng.integers(n_venues))
        used.add(vi)
        v = venues[vi]
        ts = window + int(rng.integers(0, 3600))
        checkins.append(CheckinRecord(users[ui], ts, v[1], v[0], v[3]))
    checkins.sort(key=lambda c: (c.timestamp, c.user_id, c.venue_id))

    pairs = scale_free_edges(n_workers, attach, rng)
    edges = [(users[a], users[b]) for a, b in pairs] + [(users[b], users[a]) for a, b in pairs]
    graph = SocialGraph(users, edges)
    return checkins, graph, day


def write_world(checkins, graph, checkin_path, edge_path):
    """Write check-ins and undirected friendships in the loader formats."""
    with open(checkin_path, "w", encoding="utf-8") as fh:
        fh.write("user_id\tunix_seconds\tlat\tlon\tvenue_id\tcategories\n")
        for c in checkins:
            fh.write(f"{c.user_id}\t{c.timestamp}\t{c.location[0]!r}\t{c.location[1]!r}\t{c.venue_id}\t"
                     f"{'|'.join(sorted(c.categories))}\n")
    seen = set()
    with open(edge_path, "w", encoding="utf-8") as fh:
        for a, b, _ in graph.edges():
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen.add(key)
                fh.write(f"{key[0]}\t{key[1]}\n")
