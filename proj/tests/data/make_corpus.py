#!/usr/bin/env python3
"""Generate the chemistry fixture corpus.

Molecules are assembled from scaffold templates and substituents whose
aromatic-ring counts and halogen-moiety flags are known by construction,
so the labels do not depend on any cheminformatics implementation.

halogen label: true iff the molecule contains F, Cl or I bonded to a heavy
atom, or a nitrile group (C#N). Br alone does not count.
"""

import itertools
import json
from pathlib import Path

# (template, aromatic ring count); {a}/{b} are substitution sites
TEMPLATES_1 = [
    ("c1ccc({a})cc1", 1),
    ("c1cc({a})ccc1C", 1),
    ("c1cc({a})cnc1", 1),
    ("c1cc({a})oc1", 1),
    ("c1cc({a})sc1", 1),
    ("c1cc({a})c[nH]1", 1),
    ("C1CCC({a})CC1", 0),
    ("C1CC({a})CC1", 0),
    ("CCC({a})CC", 0),
    ("CC(C)C({a})C", 0),
    ("c1ccc2cc({a})ccc2c1", 2),
    ("c1ccc(-c2ccc({a})cc2)cc1", 2),
    ("c1ccc2c(c1)cc([nH]2){a}", 2),
    ("c1ccc2cc3cc({a})ccc3cc2c1", 3),
]
TEMPLATES_2 = [
    ("c1cc({a})ccc1{b}", 1),
    ("c1cc({a})cc({b})c1", 1),
    ("C1CC({a})CC({b})C1", 0),
    ("CC({a})CC({b})C", 0),
    ("c1cc2cc({a})ccc2cc1{b}", 2),
]

# (smiles fragment, contributes a halogen moiety)
SUBS = [
    ("F", True),
    ("Cl", True),
    ("Br", False),
    ("I", True),
    ("C#N", True),
    ("C", False),
    ("CC", False),
    ("CCC", False),
    ("C(C)C", False),
    ("O", False),
    ("OC", False),
    ("OCC", False),
    ("N", False),
    ("NC", False),
    ("S", False),
    ("SC", False),
    ("C=C", False),
    ("C(F)(F)F", True),
    ("CCl", True),
    ("CBr", False),
    ("CC#N", True),
    ("C(=O)O", False),
    ("C(=O)OC", False),
    ("C(=O)N", False),
]

TARGET = 500


def main() -> None:
    rows = []
    seen = set()

    def add(smiles: str, halogen: bool, rings: int) -> None:
        if smiles in seen or len(rows) >= TARGET:
            return
        seen.add(smiles)
        rows.append(
            {
                "id": f"m{len(rows):04d}",
                "smiles": smiles,
                "halogen": halogen,
                "aromatic_rings": rings,
            }
        )

    # bare scaffolds first
    for tpl, rings in TEMPLATES_1:
        bare = tpl.replace("({a})", "").replace("{a}", "")
        add(bare, False, rings)
    # single substitution
    for (tpl, rings), (sub, hal) in itertools.product(TEMPLATES_1, SUBS):
        add(tpl.format(a=sub), hal, rings)
    # double substitution, round-robin over templates to keep variety
    pairs = list(itertools.product(SUBS, SUBS))
    for i, ((sa, ha), (sb, hb)) in enumerate(pairs):
        tpl, rings = TEMPLATES_2[i % len(TEMPLATES_2)]
        add(tpl.format(a=sa, b=sb), ha or hb, rings)

    assert len(rows) == TARGET, len(rows)
    out = Path(__file__).parent / "chem_corpus.jsonl"
    with out.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    print(f"wrote {len(rows)} molecules to {out}")


if __name__ == "__main__":
    main()
