"""Smoke test for the Python bindings: python3 python/smoke_test.py"""

import json

import galcoh_py as g


def main():
    # (1, *; 0, *) mod 3: a rational 3-torsion line
    assert g.h1_invariants(3, 1, [[1, 1, 0, 1], [1, 0, 0, 2]]) == [3]
    assert g.h1_invariants(3, 1, [[1, 1, 0, 1], [2, 0, 0, 1]]) == []
    assert g.group_order(2, 2, [[1, 1, 0, 1], [1, 0, 1, 1], [3, 0, 0, 1]]) == 96

    summary = json.loads(g.table_json(2))["summary"]
    assert summary["classes"] == 43 and summary["nonvanishing"] == 36, summary

    n, a, inv = g.frobenius([0, 0, 0, 1, 0], 3)
    assert (n, a) == (4, 0), (n, a)
    assert g.frobenius([1, -1, 0, -2, -1], 347)[1] == 4

    v = json.loads(g.classify("121c2", 11))
    assert v["vanishing"] == "nonvanishing" and v["h_size"] == 11, v
    c = json.loads(g.cross_check("243a2", 3))
    assert c["h1"] == [3] and c["agrees"], c
    print("ok")


if __name__ == "__main__":
    main()
