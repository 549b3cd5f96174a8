"""Per-rank enumeration of the medal table; writes the number of ranks
that qualify for each medal at every team count under test."""
import json
import sys
from fractions import Fraction

def qualifies(rank, teams):
    pct = lambda p: rank <= Fraction(p, 100) * teams
    extra_gold = lambda: rank <= 10 + Fraction(2, 1000) * teams // 1
    if teams < 100:
        gold, silver, bronze = pct(10), pct(20), pct(40)
    elif teams < 250:
        gold, silver, bronze = rank <= 10, pct(20), pct(40)
    elif teams < 1000:
        gold, silver, bronze = extra_gold(), rank <= 50, rank <= 100
    else:
        gold, silver, bronze = extra_gold(), pct(5), pct(10)
    if gold:
        return "gold"
    if silver:
        return "silver"
    if bronze:
        return "bronze"
    return "none"

def main(out):
    counts = list(range(1, 1201)) + [4999, 5000, 5001]
    table = {}
    for teams in counts:
        medals = [qualifies(r, teams) for r in range(1, teams + 1)]
        table[str(teams)] = {m: medals.count(m) for m in ("gold", "silver", "bronze", "none")}
    with open(out, "w") as f:
        json.dump(table, f, sort_keys=True, indent=0)

if __name__ == "__main__":
    main(sys.argv[1])
