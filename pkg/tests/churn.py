"""Randomized membership churn with per-event checks, shared by several tests."""

import random

from regionkey import tgecdh
from regionkey.ec import TOY_31, scalar_mult
from regionkey.region import NodeProfile, RegionConfig, form_subgroups


def random_profile(rng, mid):
    return NodeProfile(mid, rng.randrange(5), rng.randrange(5), rng.randrange(5))


def leaver_can_derive(region, rec, old_kr_scalar, old_tree_scalar):
    """True if anything the leaver holds, combined with the rekey broadcasts, yields a new key."""
    new_keys = {sg.state.regional_key for sg in region.subgroups.values()}
    root = region.outer.root_key if region.outer else None
    for scope, sid, bc in rec.broadcasts:
        if scope == "kr":
            if rec.member in bc.partials:
                return True
            for P in bc.partials.values():
                if scalar_mult(old_kr_scalar, P, bc.curve) in new_keys:
                    return True
        elif old_tree_scalar is not None:
            if rec.member in tgecdh.leaf_paths(bc.tree):
                return True
            for _, node in tgecdh.walk(bc.tree):
                if node.blinded is None or node.blinded.is_infinity:
                    continue
                try:
                    if tgecdh.node_key(old_tree_scalar, node.blinded, bc.curve) == root:
                        return True
                except Exception:
                    pass
    return False


def run_sequence(seed, events=8, curve=TOY_31):
    """One random sequence; returns a list of problems (empty when all checks hold)."""
    rng = random.Random(seed)
    k, s = rng.randint(2, 4), rng.randint(2, 12)
    n = rng.randint((k - 1) * s + 1, k * s)
    cfg = RegionConfig(
        max_subgroup_size=s, subgroup_curve=curve, outer_curve=curve,
        tree_insert=rng.choice(["root", "shallowest"]), refresh_on_join=rng.random() < 0.5,
        eager_gateway=rng.random() < 0.3,
    )
    region = form_subgroups([random_profile(rng, f"m{i}") for i in range(n)], cfg, rng)
    problems = []
    if len(region.subgroups) != k:
        problems.append(f"formed {len(region.subgroups)} subgroups, wanted {k}")
    region.check_agreement()
    kr_epoch = {sid: sg.state.epoch for sid, sg in region.subgroups.items()}
    kg_epoch = region.outer.epoch
    for e in range(events):
        if rng.random() < 0.5 and len(region.members) > 2:
            mid = rng.choice(region.members)
            old_kr = region.scalars[mid]
            old_tree = region.tree_scalars.get(mid)
            old_keys = {sg.state.regional_key for sg in region.subgroups.values()}
            rec = region.leave(mid)
            if leaver_can_derive(region, rec, old_kr, old_tree):
                problems.append(f"seed {seed}: leaver {mid} derives a new key")
            sg_keys = {sid: region.subgroups[sid].state.regional_key for sid in rec.kr_epochs if sid in region.subgroups}
            if any(key in old_keys for key in sg_keys.values()):
                problems.append(f"seed {seed}: regional key unchanged after {mid} left")
        else:
            rec = region.join(random_profile(rng, f"j{e}"))
        try:
            region.check_agreement()
        except Exception as exc:
            problems.append(f"seed {seed}: {exc}")
        for sid, ep in rec.kr_epochs.items():
            if sid in kr_epoch and ep <= kr_epoch[sid]:
                problems.append(f"seed {seed}: subgroup {sid} epoch {ep} did not increase")
            kr_epoch[sid] = ep
        if rec.kg_epoch is not None and region.outer is not None:
            if rec.kg_epoch <= kg_epoch and len(region.outer) > 1:
                problems.append(f"seed {seed}: outer epoch {rec.kg_epoch} did not increase")
            kg_epoch = rec.kg_epoch
    return problems
