"""Walk one region through formation, joins and each kind of leave.

Prints who holds which role and which keys changed after every event.

    python3 demos/region_lifecycle.py
"""

import random

from regionkey.region import NodeProfile, RegionConfig, form_subgroups


def show(region, title):
    print(f"\n== {title}")
    for sg in region.subgroups.values():
        roles = ", ".join(f"{m}({region.role(m)})" for m in sg.members)
        print(f"  s{sg.sid} epoch {sg.state.epoch} KR={sg.state.regional_key}: {roles}")
    if region.outer is not None:
        print(f"  outer epoch {region.outer.epoch} KG root={region.outer.root_point} "
              f"gateways={region.outer.join_order}")
    region.check_agreement()


def main():
    rng = random.Random(2024)
    profiles = [NodeProfile(f"n{i}", rng.randrange(5), rng.randrange(5), rng.randrange(5)) for i in range(9)]
    region = form_subgroups(profiles, RegionConfig(max_subgroup_size=4), rng)
    show(region, "formed 9 members into subgroups of at most 4")

    rec = region.join(NodeProfile("newcomer", 1, 1, 1))
    show(region, f"join: {rec.log_line()}")

    for role in ("member", "controller", "gateway", "outer-controller"):
        mid = next(m for m in region.members if region.role(m) == role)
        rec = region.leave(mid)
        show(region, f"{role} {mid} leaves: {rec.log_line()}")


if __name__ == "__main__":
    main()
