import random
from fractions import Fraction

import pytest

from chambers.arrangement import (
    Arrangement,
    CharPoly,
    Hyperplane,
    build_poset,
    char_poly_finite_field,
    char_poly_mobius,
    char_poly_whitney,
    next_primes,
    rank_and_essential,
    region_counts,
    resonance_arrangement,
    sign_vector_at,
)
from chambers.errors import (
    BadPrime,
    DuplicateHyperplane,
    InputError,
    OnBoundary,
    SubsetBudgetExceeded,
)
from conftest import random_essential_arrangement


def boolean_3() -> Arrangement:
    return Arrangement.from_coefficients(3, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]])


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------


def test_duplicate_hyperplanes_rejected():
    with pytest.raises(DuplicateHyperplane):
        Arrangement.from_coefficients(2, [[1, 1, 1], [2, 2, 2]])


def test_zero_normal_rejected():
    with pytest.raises(InputError):
        Hyperplane((Fraction(0), Fraction(0)), Fraction(1))


def test_json_round_trip(three_lines):
    again = Arrangement.from_dict(three_lines.to_dict())
    assert again == three_lines


def test_rational_string_inputs():
    a = Arrangement.from_dict(
        {"n": 1, "hyperplanes": [{"normal": ["1/2"], "offset": "3/4"}]}
    )
    assert a.hyperplanes[0].normal == (Fraction(1, 2),)
    assert a.hyperplanes[0].offset == Fraction(3, 4)


def test_float_coefficients_rejected():
    with pytest.raises(InputError):
        Arrangement.from_dict({"n": 1, "hyperplanes": [{"normal": [0.5], "offset": 0}]})


# ---------------------------------------------------------------------------
# intersection poset
# ---------------------------------------------------------------------------


def test_poset_three_lines(three_lines):
    poset = build_poset(three_lines)
    dims = sorted(f.dim for f in poset.flats)
    assert dims == [0, 0, 1, 1, 1, 2]
    by_dim = {}
    for flat, mu in zip(poset.flats, poset.mobius):
        by_dim.setdefault(flat.dim, []).append(mu)
    assert by_dim[2] == [1]
    assert by_dim[1] == [-1, -1, -1]
    assert by_dim[0] == [1, 1]
    assert poset.zero_sum_check()


def test_poset_empty_arrangement():
    poset = build_poset(Arrangement(3, ()))
    assert len(poset) == 1
    assert poset.flats[0].dim == 3
    assert poset.mobius == [1]


def test_poset_boolean_lattice():
    poset = build_poset(boolean_3())
    assert len(poset) == 8
    for flat, mu in zip(poset.flats, poset.mobius):
        codim = 3 - flat.dim
        assert mu == (-1) ** codim
    assert poset.zero_sum_check()


def test_poset_covers_graded(three_lines):
    poset = build_poset(three_lines)
    for i, covers in enumerate(poset.covers):
        for j in covers:
            assert poset.flats[j].dim == poset.flats[i].dim - 1


def test_flat_point_and_basis(three_lines):
    poset = build_poset(three_lines)
    for flat in poset.flats:
        point = flat.point
        for i in flat.generators:
            assert three_lines.hyperplanes[i].evaluate(point) == 0
        assert len(flat.basis) == three_lines.n
        assert all(len(row) == flat.dim for row in flat.basis)


# ---------------------------------------------------------------------------
# characteristic polynomial, three routes
# ---------------------------------------------------------------------------


def test_charpoly_three_lines(three_lines):
    assert char_poly_mobius(three_lines).coeffs == (2, -3, 1)
    assert char_poly_whitney(three_lines).coeffs == (2, -3, 1)
    primes = [101, 103, 107, 109]
    assert char_poly_finite_field(three_lines, primes).coeffs == (2, -3, 1)


def test_charpoly_empty():
    empty = Arrangement(4, ())
    assert char_poly_mobius(empty).coeffs == (0, 0, 0, 0, 1)
    assert char_poly_finite_field(empty, next_primes(10, 6)).coeffs == (0, 0, 0, 0, 1)


def test_charpoly_single_hyperplane():
    single = Arrangement.from_coefficients(2, [[1, 0, 0]])
    assert char_poly_whitney(single).coeffs == (0, -1, 1)


def test_charpoly_boolean():
    assert char_poly_whitney(boolean_3()).coeffs == (-1, 3, -3, 1)
    assert char_poly_mobius(boolean_3()).coeffs == (-1, 3, -3, 1)


def test_whitney_budget_guard():
    k = 25
    rows = [[1] + [0] * 0 + [j] for j in range(k)]  # k parallel points in R^1? need distinct
    a = Arrangement.from_coefficients(1, [[1, j] for j in range(k)])
    with pytest.raises(SubsetBudgetExceeded):
        char_poly_whitney(a)


def test_resonance_charpoly_values():
    chi3 = char_poly_mobius(resonance_arrangement(3))
    assert abs(chi3(-1)) == 32
    chi4 = char_poly_finite_field(resonance_arrangement(4), next_primes(1000, 6))
    assert abs(chi4(-1)) == 370


def test_three_methods_agree_random():
    rng = random.Random(7)
    for _ in range(6):
        n = rng.randint(1, 4)
        k = rng.randint(n, 8)
        a = random_essential_arrangement(rng, n, k, coeff_bound=5)
        chi = char_poly_mobius(a)
        assert char_poly_whitney(a).coeffs == chi.coeffs
        assert char_poly_finite_field(a, next_primes(500, n + 2)).coeffs == chi.coeffs


def test_bad_prime_detected():
    # x = 0 and x = 101 collide mod 101
    a = Arrangement.from_coefficients(1, [[1, 0], [1, 101]])
    with pytest.raises(BadPrime):
        char_poly_finite_field(a, [101, 103, 107])
    assert char_poly_finite_field(a, [103, 107, 109]).coeffs == (-2, 1)


def test_finite_field_needs_enough_primes(three_lines):
    with pytest.raises(InputError):
        char_poly_finite_field(three_lines, [101, 103])


def test_deletion_restriction_random():
    rng = random.Random(11)
    for _ in range(5):
        n = rng.randint(2, 3)
        k = rng.randint(2, 6)
        a = random_essential_arrangement(rng, n, k, coeff_bound=4)
        chi = char_poly_mobius(a).coeffs
        for i in range(a.k):
            deleted = char_poly_mobius(a.delete(i)).coeffs
            restricted = char_poly_mobius(a.restrict(i)).coeffs
            assert all(
                chi[j] == deleted[j] - (restricted[j] if j < len(restricted) else 0)
                for j in range(len(chi))
            )


# ---------------------------------------------------------------------------
# region counts, rank, sign vectors
# ---------------------------------------------------------------------------


def test_region_counts_three_lines(three_lines):
    rc = region_counts(three_lines)
    assert (rc.regions, rc.bounded) == (6, 0)
    assert rc.essential


def test_region_counts_empty():
    rc = region_counts(Arrangement(3, ()))
    assert rc.regions == 1
    assert not rc.essential


def test_region_counts_resonance_2():
    assert region_counts(resonance_arrangement(2)).regions == 6


def test_region_count_lower_bound_essential():
    rng = random.Random(3)
    for _ in range(5):
        n = rng.randint(1, 3)
        a = random_essential_arrangement(rng, n, rng.randint(n, 6))
        rc = region_counts(a)
        assert rc.regions >= rc.bounded >= 0
        assert rc.regions >= n + 1


def test_rank_and_essential(three_lines):
    assert rank_and_essential(three_lines) == (2, True)
    parallel = Arrangement.from_coefficients(3, [[1, 0, 0, 0], [1, 0, 0, 1]])
    assert rank_and_essential(parallel) == (1, False)
    assert rank_and_essential(resonance_arrangement(4)) == (4, True)
    rc = region_counts(parallel)
    assert not rc.essential and rc.bounded == 0


def test_sign_vector(three_lines):
    assert sign_vector_at(three_lines, (0, 0.5)) == "-+-"
    assert sign_vector_at(three_lines, (0, 3)) == "+++"
    with pytest.raises(OnBoundary):
        sign_vector_at(three_lines, (0, 0))  # on the second line
    with pytest.raises(OnBoundary):
        sign_vector_at(three_lines, (0, 1))  # on the third line


def test_sign_vectors_distinguish_regions(three_lines):
    # interior points of all six regions carry pairwise distinct signs
    points = [(-5, 3), (5, 3), (-5, 1), (5, 1), (-5, -1), (5, -1)]
    signs = {sign_vector_at(three_lines, p) for p in points}
    assert len(signs) == 6
