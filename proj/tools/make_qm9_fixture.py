#!/usr/bin/env python3
"""Build a 100-molecule QM9-like XYZ fixture with RDKit.

The molecules are small closed-shell organics with at most 9 heavy atoms
drawn from H, C, N, O and F, the same chemical space as QM9. Geometries come
from ETKDG embedding followed by MMFF94 relaxation, so bond lengths are close
to (but not identical with) the DFT geometries of the real dataset.

Usage: make_qm9_fixture.py [output.xyz]
"""

import sys

from rdkit import Chem
from rdkit.Chem import AllChem

SMILES = """
C N O C#C C#N C=O CC CO CN CF C=C CC#C CC#N CC=O CCO COC CCC CC(C)=O CC(=O)O
CC(N)=O NC=O OC=O CCN CNC CN(C)C CC(C)C CCCC CC(C)O CCCO CCOC COCOC OCCO
NCCO C1CC1 C1CO1 C1CN1 C1CCC1 C1COC1 C1CCCC1 C1CCOC1 C1CCNC1 C1CCCCC1
C1CCOCC1 C1COCCO1 C1CNCCN1 O=C1CCC1 O=C1CCCC1 O=C1CCCCC1 CC1CC1 CC1CCC1
CC1(C)CC1 OC1CC1 NC1CC1 c1ccccc1 Cc1ccccc1 Oc1ccccc1 Nc1ccccc1 Fc1ccccc1
c1ccncc1 c1ccoc1 c1cc[nH]c1 c1cnc[nH]1 c1cocn1 c1ncncn1 c1ccncn1 Cc1ccco1
CC(C)(C)O CC(C)(C)C CCC(C)=O CCC(=O)O COC(C)=O CC(=O)OC CC#CC C#CCO N#CCO
N#CCC#N CC(O)C#N OCC(O)CO CC(O)CO NCC(=O)O CC(N)C(=O)O CNC(C)=O CN(C)C=O
FC(F)F FCC(F)F OCC(F)(F)F CC(F)(F)F FC(F)(F)C#N O=CC=O CC(=O)C(C)=O
C=CC=O C=CC#N C=CCO C=CCC C=C(C)C CC=CC C1=CCC1 C1=CCCC1 C1=CCCCC1
O=C1NCC1 O=C1CCN1 O=C1OCC1 O=C1CCCO1 CC12CC1C2 C1CC2CC12 C1CC2CCC12
OC1CCOC1 NC1CCOC1 CC1OC1C CC1NC1C N#CC1CC1 O=CC1CC1 OCC1CC1 CC1=CC=CO1
"""


def embed(smiles: str, seed: int):
    mol = Chem.AddHs(Chem.MolFromSmiles(smiles))
    params = AllChem.ETKDGv3()
    params.randomSeed = seed
    if AllChem.EmbedMolecule(mol, params) != 0:
        return None
    AllChem.MMFFOptimizeMolecule(mol, maxIters=2000)
    return mol


def main() -> None:
    out_path = sys.argv[1] if len(sys.argv) > 1 else "qm9_like_100.xyz"
    frames = []
    for k, smi in enumerate(SMILES.split()):
        mol = embed(smi, 1000 + k)
        if mol is None:
            continue
        heavy = mol.GetNumHeavyAtoms()
        if heavy > 9 or any(a.GetSymbol() not in "HCNOF" for a in mol.GetAtoms()):
            continue
        conf = mol.GetConformer()
        lines = [str(mol.GetNumAtoms()), smi]
        for a in mol.GetAtoms():
            p = conf.GetAtomPosition(a.GetIdx())
            lines.append(f"{a.GetSymbol()} {p.x:.6f} {p.y:.6f} {p.z:.6f}")
        frames.append("\n".join(lines))
        if len(frames) == 100:
            break
    if len(frames) < 100:
        sys.exit(f"only {len(frames)} molecules embedded; need 100")
    with open(out_path, "w") as fh:
        fh.write("\n".join(frames) + "\n")
    print(f"wrote {len(frames)} molecules to {out_path}")


if __name__ == "__main__":
    main()
