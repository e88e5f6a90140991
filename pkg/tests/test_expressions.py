import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonholo import autodiff as ad
from nonholo.errors import ParseError
from nonholo.expressions import (BinOp, Call, Neg, Num, Pow, Var,
                                 compile_vector, evaluate, parse_expression,
                                 print_expression)

NAMES = ("x", "y", "phi", "R")


def parse(text):
    return parse_expression(text, NAMES)


def value(text, **env):
    return evaluate(parse(text), env)


def test_single_variable():
    ast = parse("y")
    assert ast == Var("y")
    assert value("y", y=1.0) == 1.0


def test_negated_call_with_parameter():
    ast = parse("-sin(phi)*R")
    assert value("-sin(phi)*R", phi=0.0, R=1.0) == 0.0
    assert value("-sin(phi)*R", phi=math.pi / 2, R=1.0) \
        == pytest.approx(-1.0)
    assert ast == BinOp("*", Neg(Call("sin", Var("phi"))), Var("R"))


def test_precedence_chain():
    assert value("1 + 2*3^2") == 19.0


def test_left_associativity():
    assert value("10 - 3 - 4") == 3.0
    assert value("16 / 4 / 2") == 2.0


def test_power_binds_tighter_than_unary_minus():
    assert value("-2^2") == -4.0
    assert value("(-2)^2") == 4.0


def test_right_associative_exponent_chain():
    assert value("2^3^2") == 512.0


def test_negative_integer_exponent():
    assert value("2^-2") == 0.25
    assert parse("x^-2") == Pow(Var("x"), -2)


def test_functions():
    assert value("sqrt(4 + x)", x=5.0) == 3.0
    assert value("exp(0)") == 1.0
    assert value("cos(0) + sin(0)") == 1.0


def test_whitespace_insensitive():
    assert parse(" 1+ 2 *x ") == parse("1+2*x")


def test_unknown_identifier_positioned():
    with pytest.raises(ParseError) as err:
        parse("x + bogus")
    assert err.value.position == 4


def test_unknown_function():
    with pytest.raises(ParseError):
        parse("tan(x)")


def test_function_requires_call():
    with pytest.raises(ParseError):
        parse("sin + 1")


def test_non_integer_exponent_rejected():
    with pytest.raises(ParseError) as err:
        parse("x^2.5")
    assert err.value.position is not None
    with pytest.raises(ParseError):
        parse("x^y")


def test_syntax_error_positions():
    with pytest.raises(ParseError) as err:
        parse("1 + * 2")
    assert err.value.position == 4
    with pytest.raises(ParseError) as err:
        parse("(1 + 2")
    assert err.value.position == 6
    with pytest.raises(ParseError) as err:
        parse("1 2")
    assert err.value.position == 2
    with pytest.raises(ParseError):
        parse("x $ y")


# -- printer round trip ---------------------------------------------------------

def random_ast(rng, depth):
    kind = rng.integers(0, 6 if depth > 0 else 2)
    if kind == 0:
        return Num(float(abs(round(rng.uniform(0, 9.75) * 4) / 4)))
    if kind == 1:
        return Var(str(rng.choice(NAMES)))
    if kind == 2:
        return Neg(random_ast(rng, depth - 1))
    if kind == 3:
        op = str(rng.choice(["+", "-", "*", "/"]))
        return BinOp(op, random_ast(rng, depth - 1),
                     random_ast(rng, depth - 1))
    if kind == 4:
        return Pow(random_ast(rng, depth - 1), int(rng.integers(-3, 4)))
    return Call(str(rng.choice(["sin", "cos", "exp", "sqrt"])),
                random_ast(rng, depth - 1))


def test_print_parse_round_trip_1000(rng):
    for _ in range(1000):
        ast = random_ast(rng, depth=6)
        text = print_expression(ast)
        assert parse(text) == ast, text


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_print_parse_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    ast = random_ast(rng, depth=5)
    assert parse(print_expression(ast)) == ast


def test_printer_parenthesizes_minimally():
    assert print_expression(parse("x + y*R")) == "x + y * R"
    assert print_expression(parse("(x + y)*R")) == "(x + y) * R"
    assert print_expression(parse("x - (y - R)")) == "x - (y - R)"
    assert print_expression(parse("-x^2")) == "-x^2"
    assert print_expression(parse("(-x)^2")) == "(-x)^2"


# -- evaluation over duals ---------------------------------------------------------

def test_dual_evaluation_matches_finite_differences(rng):
    texts = ["sin(x)*y + exp(y/4)", "sqrt(1 + x^2) - y*x",
             "cos(x*y) + x^3 / (2 + y^2)"]
    fn = compile_vector([parse(t) for t in texts], ["x", "y"],
                        {"phi": 0.0, "R": 2.0})
    sm = ad.SmoothMap(2, 3, fn)
    for _ in range(25):
        point = rng.uniform(-1.5, 1.5, 2)
        jac = ad.jacobian(sm, point)
        h = 1e-6
        for j in range(2):
            step = np.zeros(2)
            step[j] = h
            fd = (np.array(fn(point + step)) - np.array(fn(point - step))) \
                / (2 * h)
            assert np.allclose(jac[:, j], fd, atol=1e-6)


def test_compile_vector_binds_constants():
    fn = compile_vector([parse("R*x")], ["x"], {"R": 3.0})
    assert fn([2.0]) == [6.0]
