import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfts import DomainError, PreconditionError, build_gcd_system, find_min
from lfts.kernel import Outcome, step_operation
from lfts.reference import min_post, min_pre


@given(st.frozensets(st.integers(0, 50), min_size=1))
def test_find_min_meets_its_postcondition(s):
    assert min_pre(s)
    assert min_post(s, find_min(s))


def test_empty_set_fails_precondition():
    assert not min_pre(frozenset())
    with pytest.raises(PreconditionError):
        find_min(set())


def test_negative_rejected():
    with pytest.raises(DomainError):
        find_min([3, -1])


def test_post_rejects_non_members_and_larger():
    s = frozenset({4, 7})
    assert not min_post(s, 3)
    assert not min_post(s, 7)
    assert min_post(s, 4)


def test_find_min_accepts_any_iterable():
    assert find_min(iter([5, 2, 9])) == 2


class TestGcdSystem:
    def test_domain_is_closed(self):
        system = build_gcd_system(9, 4)
        assert system.schema.domain("a") == tuple(range(1, 10))

    def test_explicit_bound(self):
        assert build_gcd_system(3, 2, bound=6).schema.size == 36

    @pytest.mark.parametrize("a0,b0,bound", [(0, 3, None), (3, -1, None), (5, 3, 4)])
    def test_rejects_bad_inputs(self, a0, b0, bound):
        with pytest.raises(DomainError):
            build_gcd_system(a0, b0, bound)

    def test_each_process_writes_only_its_variable(self):
        system = build_gcd_system(12, 8)
        p1, p2 = system.ops
        one = step_operation(p1, system.initial)
        assert (one.state["a"], one.state["b"]) == (4, 8)
        two = step_operation(p2, one.state)
        assert (two.state["a"], two.state["b"]) == (4, 4)
        assert step_operation(p2, system.initial).outcome is Outcome.NOOP

    def test_both_idle_at_equality(self):
        system = build_gcd_system(6, 6)
        assert all(step_operation(op, system.initial).outcome is Outcome.NOOP for op in system.ops)
