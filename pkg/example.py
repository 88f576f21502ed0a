"""
Example usage of the H(b) toolkit
"""

from funcspace import Poly, SingularInner, HbKernel
from dbr_rational import BSpec, mate, decompose_rational, fplus, e0_contains
from dbr_clark import clark_atoms, decompose_clark, hb_norm_clark
from cyclicity import certify_rational, certify_clark, noncyclicity_witness
from report import ReportBuilder


def example_rational_space():
    """b = (1+z)/2: mate, decomposition and norms of f = 1."""
    print("Example 1: Rational symbol b = (1+z)/2")
    print("=" * 60)

    spec = mate(Poly([0.5, 0.5]))
    print(f"Mate a = {spec.a}")
    print(f"Nodes: {spec.nodes}")

    f = Poly([1.0])
    dec = decompose_rational(f, spec)
    _, canonical = fplus(f, spec)
    print(f"f = a1 * {dec.ftilde} + {dec.p}")
    print(f"Equivalent norm: {dec.equivalent_norm:.6f}")
    print(f"Canonical norm:  {canonical:.6f}")


def example_certificate():
    """A converging certificate for f = 1 + z and a witness for f = z - 1."""
    print("\nExample 2: Cyclicity certificates")
    print("=" * 60)

    spec = mate(Poly([0.5, 0.5]))
    cert = certify_rational(Poly([1.0, 1.0]), spec, list(range(0, 33, 4)))
    print(ReportBuilder.convergence_table(cert).to_string(index=False))
    print(f"Verdict: {cert.verdict.value}")

    bound = noncyclicity_witness(Poly([-1.0, 1.0]), spec, 1.0)
    print(f"z - 1 vanishes at 1 in E0(b): every ||q f - 1|| >= {bound:.6f}")


def example_clark():
    """b = (1+S)/2 for the singular inner function with a unit atom at 1."""
    print("\nExample 3: Clark basis for a singular inner function")
    print("=" * 60)

    S = SingularInner([1.0], [1.0])
    data = clark_atoms(S, 1.0, N=20)
    print(f"{len(data.atoms)} atoms, retained mass {data.retained_mass:.4f} of {data.total_mass_target:.4f}")

    spec_b = (1 + S) * 0.5
    f = HbKernel(spec_b, 0.0)
    triple, exact = hb_norm_clark(decompose_clark(f, data))
    print(f"k_0: triple-bar norm {triple:.6f}, norm {exact:.6f}")
    print(f"1 in E0(b): {bool(e0_contains(BSpec.half_inner(S), 1.0))}")

    cert = certify_clark(f, data, list(range(0, 17, 4)))
    print(f"Residuals: {[round(r, 5) for r in cert.residuals]}")


if __name__ == "__main__":
    print("H(b) Toolkit - Examples")
    print("=" * 60)
    print("\nAll examples use built-in symbols; no input files are needed.")
    print("The same computations are available from the CLI:")
    print("  python main.py norm --b preset:half_z --f preset:one")
    print("  python main.py certify --b preset:half_z --f preset:one_plus_z --degrees 0..64")
    print("\n")

    example_rational_space()
    example_certificate()
    example_clark()
