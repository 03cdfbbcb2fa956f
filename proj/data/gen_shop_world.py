#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the scripted shop world, its task streams and the world-policy script.

Usage: python3 data/gen_shop_world.py   (writes into data/ next to this file)
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent

CATALOG = [
    ("t01", "Canvas Tote Bag", "bags"),
    ("t02", "Leather Wallet", "bags"),
    ("t03", "Wool Scarf", "apparel"),
    ("t04", "Denim Jacket", "apparel"),
    ("t05", "Running Shoes", "footwear"),
    ("t06", "Hiking Boots", "footwear"),
    ("t07", "Ceramic Mug", "kitchen"),
    ("t08", "Chef Knife", "kitchen"),
    ("t09", "Desk Lamp", "home"),
    ("t10", "Throw Pillow", "home"),
]

OUTDOOR = [
    ("e01", "Trail Tent"),
    ("e02", "Camp Stove"),
    ("e03", "Sleeping Bag"),
    ("e04", "Water Filter"),
    ("e05", "Head Lamp"),
    ("e06", "Trekking Poles"),
    ("e07", "Dry Bag"),
    ("e08", "Camp Chair"),
    ("e09", "Rain Shell"),
    ("e10", "Cooler Box"),
]

MEMBER_HINT = "member-filter"
SEARCH_HINT = "search"


def list_price(i):
    return f"${10 + 7 * i}.00"


def member_price(i):
    return f"${8 + 5 * i}.50"


def outdoor_price(i):
    return f"${40 + 11 * i}.00"


def build():
    pages = [
        {"id": "home", "text": "Shop home. Links: catalog, deals. A search box finds products by name."},
        {"id": "deals", "text": "Weekly deals. Nothing matches most searches here. Link: catalog."},
        {"id": "catalog", "text": "Catalog. Sections: general items by product id, outdoor section."},
        {"id": "outdoor", "text": "Outdoor section. Products: " + ", ".join(f"{pid} ({name})" for pid, name in OUTDOOR) + "."},
    ]
    edges = [
        {"from": "*", "action": "goto(home)", "to": "home"},
        {"from": "home", "action": "goto(catalog)", "to": "catalog"},
        {"from": "home", "action": "goto(deals)", "to": "deals"},
        {"from": "deals", "action": "goto(catalog)", "to": "catalog"},
        {"from": "catalog", "action": "goto(outdoor)", "to": "outdoor"},
    ]
    tasks = []

    for i, (pid, name, _cat) in enumerate(CATALOG, start=1):
        page = f"prod_{pid}"
        mpage = f"prod_{pid}_member"
        pages.append({
            "id": page,
            "text": (f"Product {pid}: {name}. List price: {list_price(i)}. "
                     f"Tip: HINT[{MEMBER_HINT}] member prices appear after filter(membership,on)."),
        })
        pages.append({"id": mpage, "text": f"Product {pid}: {name}. Member price: {member_price(i)}."})
        edges.append({"from": "catalog", "action": f"click({pid})", "to": page})
        edges.append({"from": page, "action": "filter(membership,on)", "to": mpage})

    for i, (pid, name) in enumerate(OUTDOOR, start=1):
        page = f"prod_{pid}"
        pages.append({
            "id": page,
            "text": (f"Product {pid}: {name}. Price: {outdoor_price(i)}. "
                     f"Tip: HINT[{SEARCH_HINT}] the home search box opens a product page directly."),
        })
        edges.append({"from": "outdoor", "action": f"click({pid})", "to": page})
        edges.append({"from": "home", "action": f"search({name})", "to": page})

    plans = {}
    # Transfer tasks: T01..T10 ask for list prices, T11..T20 ask for member
    # prices, which need the filter hinted on T01..T10 product pages.
    for i, (pid, name, _cat) in enumerate(CATALOG, start=1):
        tid = f"T{i:02d}"
        tasks.append({
            "task_id": tid,
            "query": f"What is the list price of the {name}?",
            "start": "home",
            "goal": {"page": f"prod_{pid}", "answer": list_price(i)},
            "solution": ["goto(catalog)", f"click({pid})", f"answer({list_price(i)})"],
        })
        plans[tid] = {"uninformed": ["goto(catalog)", f"click({pid})", f"answer({list_price(i)})"]}
    for i, (pid, name, _cat) in enumerate(CATALOG, start=1):
        tid = f"T{i + 10:02d}"
        tasks.append({
            "task_id": tid,
            "query": f"What is the member price of the {name}?",
            "start": "home",
            "goal": {"page": f"prod_{pid}_member", "answer": member_price(i)},
            "solution": ["goto(catalog)", f"click({pid})", "filter(membership,on)", f"answer({member_price(i)})"],
        })
        plans[tid] = {
            "uninformed": ["goto(catalog)", f"click({pid})", f"answer({list_price(i)})"],
            "hint": MEMBER_HINT,
        }
    # Efficiency tasks: solvable either way, shorter with the search hint.
    for i, (pid, name) in enumerate(OUTDOOR, start=1):
        tid = f"E{i:02d}"
        tasks.append({
            "task_id": tid,
            "query": f"Find the price of the {name} in the outdoor section.",
            "start": "home",
            "goal": {"page": f"prod_{pid}", "answer": outdoor_price(i)},
            "solution": [f"search({name})", f"answer({outdoor_price(i)})"],
        })
        plans[tid] = {
            "uninformed": ["goto(deals)", "goto(catalog)", "goto(outdoor)", f"click({pid})",
                           f"answer({outdoor_price(i)})"],
            "hint": SEARCH_HINT,
        }

    world = {"version": 1, "world_id": "shop", "pages": pages, "edges": edges, "tasks": tasks}
    return world, plans


def write_stream(path, ids, world):
    by_id = {t["task_id"]: t for t in world["tasks"]}
    with open(path, "w") as f:
        for tid in ids:
            rec = {"task_id": tid, "query": by_id[tid]["query"], "world_ref": "../worlds/shop.json"}
            f.write(json.dumps(rec) + "\n")


def main():
    world, plans = build()
    (ROOT / "worlds").mkdir(exist_ok=True)
    (ROOT / "streams").mkdir(exist_ok=True)
    (ROOT / "scripts").mkdir(exist_ok=True)
    with open(ROOT / "worlds" / "shop.json", "w") as f:
        json.dump(world, f, indent=2)
        f.write("\n")
    write_stream(ROOT / "streams" / "transfer20.jsonl", [f"T{i:02d}" for i in range(1, 21)], world)
    write_stream(ROOT / "streams" / "efficiency10.jsonl", [f"E{i:02d}" for i in range(1, 11)], world)
    write_stream(ROOT / "streams" / "learn10.jsonl", [f"T{i:02d}" for i in range(1, 11)], world)
    script = {
        "version": 1,
        "seed": 7,
        "rules": [],
        "world_policy": {
            "worlds": ["../worlds/shop.json"],
            "plans": plans,
            "judge": "oracle",
            "selector": "oracle",
            "noise": 0.0,
        },
    }
    with open(ROOT / "scripts" / "shop_policy.json", "w") as f:
        json.dump(script, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
