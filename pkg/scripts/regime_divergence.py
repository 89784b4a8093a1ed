"""Money supply under the two lending regimes, driven by the same stream of loan demands.

In the classical regime every loan adds deposit money; in the quantum regime a
loan only moves existing notes, so supply stays at the minted total.
"""

import argparse
import csv
import sys

import numpy as np

from qmint.ledger import EntryKind, Ledger, Regime

DENOMS = (1, 10, 100)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--banks", type=int, default=4)
    ap.add_argument("--notes", type=int, default=40, help="notes minted per bank at the start")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--relend", action="store_true", help="let borrowers lend received notes again")
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    banks = [f"bank{i}" for i in range(args.banks)]
    quantum = Ledger(Regime.Quantum, relend=args.relend)
    serial = 0
    for b in banks:
        for d in rng.choice(DENOMS, size=args.notes):
            serial += 1
            quantum.mint(b, serial, int(d), 0.0)
    classical = Ledger(Regime.Classical, m_existing=quantum.state.m_total)

    rows = []
    for t in range(1, args.steps + 1):
        lender, borrower = rng.choice(banks, size=2, replace=False)
        amount = int(rng.choice(DENOMS) * rng.integers(1, 5))
        classical.classical_loan(str(lender), amount, float(t))
        e = quantum.quantum_loan(str(lender), amount, float(t), str(borrower))
        rows.append(
            {
                "step": t,
                "demand": amount,
                "classical_M_total": classical.state.m_total,
                "quantum_M_total": quantum.state.m_total,
                "quantum_accepted": int(e.kind is EntryKind.Transfer),
            }
        )
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.DictWriter(fh, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
    if fh is not sys.stdout:
        fh.close()
    accepted = sum(r["quantum_accepted"] for r in rows)
    print(
        f"classical supply {rows[-1]['classical_M_total']}, quantum supply {rows[-1]['quantum_M_total']}, "
        f"quantum loans funded {accepted}/{len(rows)}",
        file=sys.stderr,
    )


if __name__ == "__main__":
    main()
