#!/usr/bin/env python3
"""Generate the synthetic EPRI21-like and UIUC150-like coupled ac/dc cases.

The generated cases reproduce the entity counts of the original benchmark
networks (buses, generators, gmd buses, branches, gmd branches, blocker
locations). Topology, coordinates and electrical parameters are synthetic.

    python3 tools/make_cases.py --out data
"""

import argparse
import json
import math
import random

KM_PER_DEG_LAT = 111.2


def disp_km(a, b):
    lat = 0.5 * (a[0] + b[0])
    north = (b[0] - a[0]) * KM_PER_DEG_LAT
    east = (b[1] - a[1]) * KM_PER_DEG_LAT * math.cos(math.radians(lat))
    return east, north


def dist_km(a, b):
    e, n = disp_km(a, b)
    return math.hypot(e, n)


def place_substations(rng, count, lat_range, lon_range, min_km):
    pts = []
    while len(pts) < count:
        p = (round(rng.uniform(*lat_range), 4), round(rng.uniform(*lon_range), 4))
        if all(dist_km(p, q) >= min_km for q in pts):
            pts.append(p)
    return pts


def mst(nodes, pos):
    """Prim's tree over nodes; returns sorted pairs."""
    if len(nodes) < 2:
        return []
    inside = {nodes[0]}
    edges = []
    while len(inside) < len(nodes):
        best = None
        for u in sorted(inside):
            for v in nodes:
                if v in inside:
                    continue
                d = dist_km(pos[u], pos[v])
                if best is None or d < best[0]:
                    best = (d, u, v)
        inside.add(best[2])
        edges.append((best[1], best[2]))
    return edges


LINE_PARAMS = {
    # kV: r, x, b per km (p.u. on 100 MVA), thermal rating MVA
    500.0: (0.000011, 0.00021, 0.0030, 2600.0),
    345.0: (0.000028, 0.00034, 0.0012, 1300.0),
    138.0: (0.00022, 0.00085, 0.0002, 260.0),
}


def build_case(name, seed, spec):
    rng = random.Random(seed)
    n_sub = spec["substations"]
    subs = place_substations(rng, n_sub, spec["lat"], spec["lon"], spec["min_km"])

    buses = []  # dicts
    bus_sub = {}

    def add_bus(sub, kv, kind):
        bid = len(buses) + 1
        buses.append({"id": bid, "sub": sub, "kv": kv, "kind": kind})
        bus_sub[bid] = sub
        return bid

    main = [add_bus(s + 1, 345.0, "main") for s in range(n_sub)]

    sub_order = list(range(1, n_sub + 1))
    rng.shuffle(sub_order)
    cursor = 0

    def next_sub():
        nonlocal cursor
        s = sub_order[cursor % n_sub]
        cursor += 1
        return s

    autos = []
    for _ in range(spec["autos"]):
        s = next_sub()
        autos.append((add_bus(s, 500.0, "ehv"), main[s - 1]))

    gen_buses = []
    for _ in range(spec["gen_buses"]):
        s = next_sub()
        gen_buses.append(add_bus(s, 20.0, "gen"))

    load_buses = []
    for _ in range(spec["load_buses"]):
        s = next_sub()
        load_buses.append(add_bus(s, 138.0, "load"))

    assert len(buses) == spec["buses"], (name, len(buses))
    pos = {b["id"]: subs[b["sub"] - 1] for b in buses}

    # Generators spread over the generator buses, first buses take extra units.
    gens_per_bus = [spec["gens"] // len(gen_buses)] * len(gen_buses)
    for k in range(spec["gens"] - sum(gens_per_bus)):
        gens_per_bus[k] += 1

    # Transformers: (hi bus, lo bus, config).
    transformers = []
    for hv, lv in autos:
        transformers.append((hv, lv, "auto"))
    gsu_left = spec["gsu"]
    for k, gb in enumerate(gen_buses):
        units = min(gens_per_bus[k], gsu_left - (len(gen_buses) - k - 1))
        units = max(units, 1)
        for _ in range(units):
            transformers.append((main[bus_sub[gb] - 1], gb, "gwye_delta"))
        gsu_left -= units
    assert gsu_left == 0, (name, gsu_left)
    stepdown = ["gwye_gwye"] * spec["stepdown_gwye"] + ["gwye_delta"] * spec["stepdown_delta"]
    for k, cfg in enumerate(stepdown):
        lb = load_buses[k % len(load_buses)]
        transformers.append((main[bus_sub[lb] - 1], lb, cfg))

    # Lines: spanning trees per voltage level, then shortest extra links.
    lines = []
    for kv in (345.0, 500.0, 138.0):
        nodes = [b["id"] for b in buses if b["kv"] == kv]
        lines += mst(nodes, pos)
    existing = {tuple(sorted(e)) for e in lines}
    extra = []
    for kv in spec["extra_line_kv"]:
        nodes = [b["id"] for b in buses if b["kv"] == kv]
        for i, u in enumerate(nodes):
            for v in nodes[i + 1:]:
                if (u, v) in existing or bus_sub[u] == bus_sub[v]:
                    continue
                extra.append((dist_km(pos[u], pos[v]), u, v))
    extra.sort()
    need = spec["lines"] - len(lines)
    assert need >= 0, (name, len(lines))
    lines += [(u, v) for _, u, v in extra[:need]]
    assert len(lines) == spec["lines"]

    # Loads and dispatch.
    loads = []
    load_sites = load_buses + [main[s - 1] for s in sorted(rng.sample(range(1, n_sub + 1), spec["main_loads"]))]
    for bid in load_sites:
        kv = next(b["kv"] for b in buses if b["id"] == bid)
        base = spec["load_mw_138"] if kv == 138.0 else spec["load_mw_345"]
        pd = round(base * rng.uniform(0.6, 1.4), 1)
        pf_ratio = rng.uniform(0.2, 0.35)
        loads.append({"id": len(loads) + 1, "bus": bid, "pd": pd, "qd": round(pd * pf_ratio, 1),
                      "shed_cost": float(rng.choice([1, 2, 5, 10]))})
    total_load = sum(l["pd"] for l in loads)

    gens = []
    capacity = total_load * spec["reserve"]
    unit_cap = capacity / spec["gens"]
    gid = 0
    for k, gb in enumerate(gen_buses):
        for _ in range(gens_per_bus[k]):
            gid += 1
            pmax = round(unit_cap * rng.uniform(0.8, 1.2), 1)
            gens.append({"id": gid, "bus": gb, "pmax": pmax})
    share = total_load / sum(g["pmax"] for g in gens)
    # The slack plant carries the balancing reserve.
    slack_bus = gens[0]["bus"]
    for g in gens:
        g["pg_share"] = round(g["pmax"] * share, 1)
        if g["bus"] == slack_bus:
            g["pmax"] = round(g["pmax"] * spec["slack_margin"], 1)
    for g in gens:
        pmax = g["pmax"]
        g.update({
            "pg": g.pop("pg_share"), "qg": 0.0, "pmin": 0.0,
            "qmin": round(-0.25 * pmax, 1), "qmax": round(spec["q_ratio"] * pmax, 1),
            "vg": round(rng.uniform(1.02, 1.04), 3), "mbase": round(pmax * 1.1, 1), "status": 1,
            "cost": [round(rng.uniform(0.001, 0.01), 4), round(rng.uniform(10, 40), 2), 0.0],
            "startup": round(rng.uniform(0, 5000), 1), "shutdown": 0.0,
            "ramp_agc": round(pmax / 60, 2), "ramp_10": round(pmax / 6, 2), "ramp_30": round(pmax / 2, 2),
            "ramp_q": round(pmax / 2, 2), "apf": 0.0,
        })

    bus_json = []
    gen_bus_set = {g["bus"] for g in gens}
    for b in buses:
        lat, lon = pos[b["id"]]
        btype = "slack" if b["id"] == slack_bus else ("pv" if b["id"] in gen_bus_set else "pq")
        bs = spec["shunt_138"] if b["kind"] == "load" else 0.0
        bus_json.append({"id": b["id"], "type": btype, "vm": 1.0, "va": 0.0, "vmin": 0.9, "vmax": 1.1,
                         "base_kv": b["kv"], "gs": 0.0, "bs": bs, "lat": lat, "lon": lon,
                         "substation": b["sub"]})

    # dc network: bus nodes share ids with ac buses, substation grounds follow.
    gmd_bus = []
    for b in buses:
        lat, lon = pos[b["id"]]
        gmd_bus.append({"id": b["id"], "kind": "bus_node", "g_gnd": 0.0, "parent_ac_bus": b["id"],
                        "lat": lat, "lon": lon, "substation": b["sub"]})
    ground = {}
    for s in range(1, n_sub + 1):
        gid = len(buses) + s
        ground[s] = gid
        lat, lon = subs[s - 1]
        gmd_bus.append({"id": gid, "kind": "substation_ground", "g_gnd": round(1.0 / rng.uniform(0.1, 0.5), 3),
                        "lat": lat, "lon": lon, "substation": s})

    branch = []
    gmd_branch = []
    branch_gmd = []

    def add_gmd(frm, to, a, kind, east=0.0, north=0.0, length=0.0):
        gmd_branch.append({"id": len(gmd_branch) + 1, "from_node": frm, "to_node": to, "a": round(a, 6),
                           "len_km": round(length, 3), "disp_east_km": round(east, 3),
                           "disp_north_km": round(north, 3), "kind": kind})
        return len(gmd_branch)

    kv_of = {b["id"]: b["kv"] for b in buses}
    for u, v in lines:
        kv = kv_of[u]
        r, x, b, rate = LINE_PARAMS[kv]
        length = dist_km(pos[u], pos[v]) * 1.1
        bid = len(branch) + 1
        branch.append({"id": bid, "from_bus": u, "to_bus": v, "r": round(r * length, 6), "x": round(x * length, 6),
                       "b_sh": round(b * length, 6), "rate": rate, "tap": 1.0, "shift": 0.0,
                       "angmin": -math.pi / 3, "angmax": math.pi / 3, "status": 1})
        zbase = kv * kv / 100.0
        r_dc = r * length * zbase / 3.0
        east, north = disp_km(pos[u], pos[v])
        add_gmd(u, v, 1.0 / r_dc, "line", east, north, length)
        branch_gmd.append({"ac_branch": bid, "config": "line"})

    gen_pmax = {}
    for g in gens:
        gen_pmax[g["bus"]] = gen_pmax.get(g["bus"], 0.0) + g["pmax"]
    gsu_count = {}
    for hi, lo, cfg in transformers:
        if lo in gen_pmax:
            gsu_count[lo] = gsu_count.get(lo, 0) + 1

    for hi, lo, cfg in transformers:
        s = bus_sub[hi]
        rating = spec["xf_mva"][cfg]
        if lo in gen_pmax:
            rating = max(rating, round(1.2 * gen_pmax[lo] / gsu_count[lo], -1))
        bid = len(branch) + 1
        branch.append({"id": bid, "from_bus": hi, "to_bus": lo, "r": round(0.002 * 100 / rating, 6),
                       "x": round(0.12 * 100 / rating, 6), "b_sh": 0.0, "rate": rating * 1.3, "tap": 1.0,
                       "shift": 0.0, "angmin": -math.pi / 3, "angmax": math.pi / 3, "status": 1})
        rec = {"ac_branch": bid, "config": cfg, "alpha": round(kv_of[hi] / kv_of[lo], 6), "beta": 1.0,
               "K": round(spec["K"] * rng.uniform(0.8, 1.2), 4), "S_base": rating,
               "V_base_hi": kv_of[hi], "V_base_lo": kv_of[lo], "neutral_gmd_bus": ground[s],
               "is_blocker_candidate": True}
        r_hi = rng.uniform(0.15, 0.4)
        if cfg == "gwye_delta":
            rec["hi_node"] = add_gmd(hi, ground[s], 3.0 / r_hi, "winding")
        elif cfg == "gwye_gwye":
            rec["hi_node"] = add_gmd(hi, ground[s], 3.0 / r_hi, "winding")
            rec["lo_node"] = add_gmd(lo, ground[s], 3.0 / (r_hi * 0.3), "winding")
        else:
            rec["series_node"] = add_gmd(hi, lo, 3.0 / (r_hi * 0.5), "winding")
            rec["common_node"] = add_gmd(lo, ground[s], 3.0 / (r_hi * 0.6), "winding")
        branch_gmd.append(rec)

    # Keep branch_gmd aligned with branch order.
    branch_gmd.sort(key=lambda c: c["ac_branch"])
    candidates = sorted(ground.values())
    case = {
        "schema_version": 1,
        "name": name,
        "baseMVA": 100.0,
        "bus": bus_json,
        "load": loads,
        "gen": gens,
        "branch": branch,
        "gmd_bus": gmd_bus,
        "gmd_branch": gmd_branch,
        "branch_gmd": branch_gmd,
        "blocker": {"budget": float(math.ceil(len(candidates) / 2)),
                    "costs": [{"candidate": c, "cost": 1.0} for c in candidates]},
    }
    counts = {"bus": len(bus_json), "gen": len(gens), "gmd_bus": len(gmd_bus), "branch": len(branch),
              "branch_gmd": len(branch_gmd), "gmd_branch": len(gmd_branch), "candidates": len(candidates)}
    for key, want in spec["expect"].items():
        assert counts[key] == want, (name, key, counts[key], want)
    return case


EPRI21 = {
    "substations": 8, "buses": 19, "gens": 7, "autos": 3, "gen_buses": 4, "load_buses": 4,
    "gsu": 7, "stepdown_gwye": 3, "stepdown_delta": 3, "lines": 15, "extra_line_kv": [345.0, 138.0],
    "main_loads": 4, "load_mw_138": 180.0, "load_mw_345": 300.0, "reserve": 1.6, "q_ratio": 0.5,
    "shunt_138": 0.4, "slack_margin": 2.5, "lat": (32.5, 35.5), "lon": (-88.0, -83.0), "min_km": 90.0, "K": 0.2,
    "xf_mva": {"gwye_delta": 600.0, "gwye_gwye": 400.0, "auto": 900.0},
    "expect": {"bus": 19, "gen": 7, "gmd_bus": 27, "branch": 31, "branch_gmd": 31, "gmd_branch": 37,
               "candidates": 8},
}

UIUC150 = {
    "substations": 98, "buses": 150, "gens": 27, "autos": 12, "gen_buses": 20, "load_buses": 20,
    "gsu": 26, "stepdown_gwye": 20, "stepdown_delta": 0, "lines": 160, "extra_line_kv": [345.0],
    "main_loads": 40, "load_mw_138": 90.0, "load_mw_345": 120.0, "reserve": 1.6, "q_ratio": 0.5,
    "shunt_138": 0.2, "slack_margin": 3.2, "lat": (37.0, 42.0), "lon": (-91.0, -87.5), "min_km": 15.0, "K": 0.12,
    "xf_mva": {"gwye_delta": 500.0, "gwye_gwye": 300.0, "auto": 800.0},
    "expect": {"bus": 150, "gen": 27, "gmd_bus": 248, "branch": 218, "branch_gmd": 218, "gmd_branch": 250,
               "candidates": 98},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=21)
    args = ap.parse_args()
    for name, spec, seed in (("epri21", EPRI21, args.seed), ("uiuc150", UIUC150, args.seed + 129)):
        case = build_case(name, seed, spec)
        with open(f"{args.out}/{name}.json", "w") as fh:
            json.dump(case, fh, indent=1)
            fh.write("\n")


if __name__ == "__main__":
    main()
