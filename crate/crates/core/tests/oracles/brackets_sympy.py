"""Independent symbolic oracle for the R^4 frame brackets and growth data.

Run: python3 brackets_sympy.py
Values printed here are frozen into the Rust tests.
"""
import itertools
import sympy as sp

x1, x2, x3, x4 = X = sp.symbols("x1 x2 x3 x4")


def bracket(A, B):
    return [sp.expand(sum(A[j] * sp.diff(B[i], X[j]) - B[j] * sp.diff(A[i], X[j]) for j in range(4)))
            for i in range(4)]


X1 = [sp.Integer(1), sp.Integer(0), 2 * x2, x3**2]
X2 = [sp.Integer(0), sp.Integer(1), -2 * x1, sp.Integer(0)]
G = {1: X1, 2: X2}


def commutator(beta):
    acc = G[beta[0]]
    for b in beta[1:]:
        acc = bracket(G[b], acc)
    return acc


print("[X1,X2] =", commutator((2, 1)))
print("[X1,[X1,X2]] =", commutator((2, 1, 1)))
print("X_(2,1,1,1) =", commutator((2, 1, 1, 1)))
print("X_(2,1,1,1,2) =", commutator((2, 1, 1, 1, 2)))
print("[X_(2,1), X_(2,1,1)] =", bracket(commutator((2, 1)), commutator((2, 1, 1))))

zero = {x1: 0, x2: 0, x3: 0, x4: 0}
rank_so_far = sp.Matrix.zeros(4, 0)
dims = []
for length in range(1, 7):
    for beta in itertools.product([1, 2], repeat=length):
        v = sp.Matrix([c.subs(zero) for c in commutator(beta)])
        rank_so_far = rank_so_far.row_join(v)
    dims.append(rank_so_far.rank())
print("layer dims at 0 (lengths 1..6):", dims)

