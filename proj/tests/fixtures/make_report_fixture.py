"""Writes report_fixture.jsonl and the expected report (report_fixture.golden.csv).

Checksums are FNV-1a 64 over the compact JSON of each record without its
"checksum" and "ts" fields, written as 16 lowercase hex digits.
"""
import json


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def line(rec, ts=None):
    body = json.dumps(rec, separators=(",", ":"))
    out = dict(rec)
    if ts:
        out["ts"] = ts
    out["checksum"] = "%016x" % fnv1a64(body.encode())
    return json.dumps(out, separators=(",", ":")) + "\n"


trials = [  # trial_id, generation, proposer, mu
    (0, 0, "prior", 0.6), (1, 0, "prior", 0.8), (2, 1, "carryover", 0.8), (3, 1, "density-model", 0.4)]
pulls = [  # trial_id, generation, round, budget_index, reward (None = failed)
    (0, 0, 1, 1, 0.3), (1, 0, 1, 1, 0.2), (1, 0, 2, 2, 0.5), (1, 0, 3, 3, 0.7),
    (2, 1, 1, 1, 0.4), (3, 1, 1, 1, None), (2, 1, 2, 2, 0.75), (2, 1, 3, 3, 0.8)]

with open("report_fixture.jsonl", "w") as f:
    f.write(line({"schema": "aabo-log/1", "config_hash": "0000000000000000", "engine": {},
                  "objective": "surrogate:fixture", "space": {}}))
    order = [("trial", trials[0]), ("trial", trials[1])] + [("pull", p) for p in pulls[:4]] + \
            [("trial", trials[2]), ("trial", trials[3])] + [("pull", p) for p in pulls[4:]]
    for kind, rec in order:
        if kind == "trial":
            tid, gen, prop, mu = rec
            r = {"type": "trial", "trial_id": tid, "generation": gen, "slot": tid % 2, "proposer": prop,
                 "seed": 100 + tid, "config": {"schema": "aabo-config/1", "levels": []}, "mu": mu}
            if prop == "carryover":
                r["carried_from"] = 1
        else:
            tid, gen, rnd, b, rew = rec
            r = {"type": "pull", "trial_id": tid, "generation": gen, "round": rnd, "config_ref": tid,
                 "budget_index": b, "reward": rew, "seed": 100 + tid, "arm": tid % 2, "n_k": b, "leader": None}
        f.write(line(r, ts="2026-01-01T00:00:00.000Z"))


def fmt(v):
    return "" if v is None else "%.12g" % v


mu = {t[0]: t[3] for t in trials}
best_mu = {}
for t in trials:
    best_mu[t[1]] = max(best_mu.get(t[1], float("-inf")), t[3])
rows, best, best_t, regret = [], None, None, 0.0
gens, arms = {}, {t[0]: [t[1], t[0], t[2], 0, None] for t in trials}
for i, (tid, gen, rnd, b, rew) in enumerate(pulls):
    g = gens.setdefault(gen, [gen, 0, None, None, None])
    g[1] += 1
    arms[tid][3] += 1
    if rew is not None:
        arms[tid][4] = rew if arms[tid][4] is None else max(arms[tid][4], rew)
        g[2] = rew if g[2] is None else max(g[2], rew)
        if best is None or rew > best:
            best, best_t = rew, tid
    g[3], g[4] = best, best_t
    regret += best_mu[gen] - mu[tid]
    rows.append(f"{i + 1},{gen},{tid},{fmt(rew)},{fmt(best)},{fmt(regret)}")
out = ["# budget_curve", "budget,generation,trial_id,reward,best_so_far,cumulative_regret"] + rows
out += ["# generations", "generation,pulls,generation_best,incumbent,incumbent_trial_id"]
out += [f"{g[0]},{g[1]},{fmt(g[2])},{fmt(g[3])},{'' if g[4] is None else g[4]}" for g in gens.values()]
out += ["# arms", "generation,trial_id,proposer,budgets,best_reward"]
out += [f"{a[0]},{a[1]},{a[2]},{a[3]},{fmt(a[4])}" for a in arms.values()]
with open("report_fixture.golden.csv", "w") as f:
    f.write("\n".join(out) + "\n")
