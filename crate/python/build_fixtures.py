"""Regenerate crates/core/fixtures/curves.jsonl with PARI/GP (needs cypari2).

Each record starts from a-invariants and derives the remaining facts:
conductor, torsion, the isogeny class (degrees and neighbours), torsion of
the quadratic twist by 5, CM discriminant and analytic rank.
"""

import json
import sys

import cypari2

pari = cypari2.Pari()
pari.allocatemem(2 * 10**9)

CM = {0: -3, 1728: -4, -3375: -7, 16581375: -28, 8000: -8, -32768: -11, 54000: -12,
      287496: -16, -884736: -19, -12288000: -27, -884736000: -43,
      -147197952000: -67, -262537412640768000: -163}

# (label, a-invariants, known points, note)
SEEDS = [
    ("11a1", [0, -1, 1, -10, -20], [], None),
    ("11a2", [0, -1, 1, -7820, -263580], [], None),
    ("11a3", [0, -1, 1, 0, 0], [], None),
    ("37a1", [0, 0, 1, -1, 0], [[0, 0]], None),
    ("49a1", [1, -1, 0, -2, -1], [], None),
    ("49a2", [1, -1, 0, -37, -78], [], None),
    ("49a3", [1, -1, 0, -107, 552], [], None),
    ("49a4", [1, -1, 0, -1822, 30393], [], None),
    ("121b1", [0, -1, 1, -7, 10], [], None),
    ("121b2", [0, -1, 1, -887, -10143], [], None),
    ("121c1", [1, 1, 0, -2, -7], [], None),
    ("121c2", [1, 1, 0, -3632, 82757], [], None),
    ("243a2", [0, 0, 1, 0, 20], [[-2, 3]], None),
    ("722a1", [1, 0, 1, 714, -16080], [["27444/169", "4423160/2197"]], None),
    ("972d2", [0, 0, 0, 0, -972], [[13, 35]], None),
    ("9747f1", [0, 0, 1, 0, 90], [[6, 17]], None),
]

# derived curves: (label, base label, twist discriminant, note)
TWISTS = [
    ("11a1-tw5", "11a1", 5, "quadratic twist of 11a1 by 5"),
    ("11a3-tw5", "11a3", 5, "quadratic twist of 11a3 by 5"),
    ("49a1-tw-4", "49a1", -4, "quadratic twist of 49a1 by -1"),
    ("49a2-tw5", "49a2", 5, "quadratic twist of 49a2 by 5"),
    ("121c2-tw-4", "121c2", -4, "quadratic twist of 121c2 by -1"),
]

J17 = ["-297756989/2", "-882216989/131072"]


def disc(d):
    return d if d % 4 in (0, 1) else 4 * d


def minimal(e):
    return pari.ellinit(pari.ellminimalmodel(e))


def ainvs(e):
    return [str(x) for x in e[:5]]


def torsion(e):
    return [int(x) for x in pari.elltors(e)[1]]


def conductor(e):
    return int(pari.ellglobalred(e)[0])


def twist(e, d):
    return minimal(pari.ellinit(pari.elltwist(e, disc(d))))


def record(label, e, points, note, known):
    iso, mat = pari.ellisomat(e)
    degs = [int(x) for x in mat[0]]
    neighbours = []
    for curve, deg in zip(iso[1:], degs[1:]):
        f = minimal(pari.ellinit(curve[0]))
        name = next((lab for lab, a in known.items() if a == ainvs(f)), None)
        neighbours.append({
            "degree": deg,
            "label": name,
            "torsion_structure": torsion(f),
            "twist5_torsion": torsion(twist(f, 5)),
        })
    j = e[12]
    jint = int(j) if pari.denominator(j) == 1 else None
    rank = pari.ellanalyticrank(e)[0]
    pts = []
    for x, y in points:
        pt = [pari(str(x)), pari(str(y))]
        assert pari.ellisoncurve(e, pt), (label, pt)
        pts.append({"x": str(pt[0]), "y": str(pt[1])})
    rec = {
        "schema": 1,
        "label": label,
        "a_invariants": ainvs(e),
        "conductor": conductor(e),
        "torsion_structure": torsion(e),
        "isogeny_degrees": sorted(degs[1:]),
        "isogeny_neighbor_torsion": neighbours,
        "twist5_torsion": torsion(twist(e, 5)),
        "cm_discriminant": CM.get(jint) if jint is not None else None,
        "rank": int(rank) if rank <= 1 else None,
        "generators": pts,
    }
    if note:
        rec["notes"] = note
    return rec


def main(out):
    curves = {}
    for label, a, pts, note in SEEDS:
        e = pari.ellinit(a)
        n = conductor(e)
        assert str(n) == "".join(c for c in label.split("-")[0] if c.isdigit())[: len(str(n))], (label, n)
        curves[label] = (e, pts, note)
    for label, base, d, note in TWISTS:
        curves[label] = (twist(curves[base][0], d), [], note)
    k = 0
    for j in J17:
        e0 = pari.ellinit(pari.ellfromj(pari(j)))
        em = twist(e0, pari.ellminimaltwist(e0))
        for d in [1, 5, 17, 85]:
            e = twist(em, d) if d != 1 else em
            assert conductor(e) == 14450
            k += 1
            curves[f"14450-17isog-{k}"] = (
                e, [], f"conductor 14450, j = {j}, twist by {d} of the minimal twist")
    known = {lab: ainvs(e) for lab, (e, _, _) in curves.items()}
    with open(out, "w") as fh:
        for label, (e, pts, note) in curves.items():
            fh.write(json.dumps(record(label, e, pts, note, known)) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/fixtures/curves.jsonl")
