use std::f64::consts::{E, PI};

use proptest::prelude::*;
use wcurvlab_core::expr::*;

fn ev(src: &str, x: &[f64], m: f64) -> f64 {
    parse(src)
        .unwrap_or_else(|e| panic!("{src}: {e}"))
        .eval(x, m)
        .unwrap_or_else(|e| panic!("{src}: {e}"))
}

fn num(v: f64) -> Expr {
    Expr {
        node: Node::Num(v),
        offset: 0,
    }
}

fn var(v: Var) -> Expr {
    Expr {
        node: Node::Var(v),
        offset: 0,
    }
}

#[test]
fn exponential_ast() {
    let e = parse("exp(-x0/m)").unwrap();
    let want = Expr {
        node: Node::Call(
            Func::Exp,
            Box::new(Expr {
                node: Node::Bin(
                    BinOp::Div,
                    Box::new(Expr {
                        node: Node::Neg(Box::new(var(Var::X(0)))),
                        offset: 0,
                    }),
                    Box::new(var(Var::M)),
                ),
                offset: 0,
            }),
        ),
        offset: 0,
    };
    assert_eq!(e, want);
}

#[test]
fn power_is_right_associative() {
    assert_eq!(ev("2^3^2", &[], 1.0), 512.0);
    assert_eq!(ev("(2^3)^2", &[], 1.0), 64.0);
}

#[test]
fn unclosed_call_reports_offset() {
    let err = parse("sin(x0").unwrap_err();
    assert!(matches!(err, ExprError::Syntax { offset: 7, .. }), "{err}");
    assert!(err.to_string().contains("offset 7"));
}

#[test]
fn evaluation_examples() {
    assert!((ev("exp(-x0/m)", &[1.0], 1.0) - 0.36787944117).abs() < 1e-11);
    assert_eq!(ev("pi", &[], 1.0), PI);
    let err = parse("log(x0-2)").unwrap().eval(&[1.0], 1.0).unwrap_err();
    assert!(matches!(err, ExprError::Domain { offset: 1, .. }), "{err}");
}

#[test]
fn errors() {
    assert!(matches!(
        parse("foo(x0)"),
        Err(ExprError::UnknownIdentifier { offset: 1, .. })
    ));
    assert!(matches!(
        parse("x0 + y"),
        Err(ExprError::UnknownIdentifier { offset: 6, .. })
    ));
    assert!(matches!(
        parse("x5"),
        Err(ExprError::UnknownIdentifier { .. })
    ));
    assert!(matches!(
        parse("1 +"),
        Err(ExprError::Syntax { offset: 4, .. })
    ));
    assert!(matches!(
        parse("(1"),
        Err(ExprError::Syntax { offset: 3, .. })
    ));
    assert!(matches!(
        parse("1 2"),
        Err(ExprError::Syntax { offset: 3, .. })
    ));
    assert!(matches!(
        parse("2 # 3"),
        Err(ExprError::Syntax { offset: 3, .. })
    ));
    assert!(matches!(
        parse(""),
        Err(ExprError::Syntax { offset: 1, .. })
    ));
    assert!(matches!(
        parse("sin x0"),
        Err(ExprError::Syntax { offset: 5, .. })
    ));
    let e = parse("sqrt(x1 - 3)").unwrap();
    assert!(matches!(
        e.eval(&[0.0, 1.0], 1.0),
        Err(ExprError::Domain { offset: 1, .. })
    ));
    assert!(matches!(
        parse("x2").unwrap().eval(&[0.0], 1.0),
        Err(ExprError::Unbound { .. })
    ));
    assert!(matches!(
        parse("t").unwrap().eval(&[0.0], 1.0),
        Err(ExprError::Unbound { .. })
    ));
    assert!(matches!(
        parse("1/x0").unwrap().eval(&[0.0], 1.0),
        Err(ExprError::Domain { offset: 2, .. })
    ));
    assert!(matches!(
        parse("(-2)^0.5").unwrap().eval(&[], 1.0),
        Err(ExprError::Domain { .. })
    ));
    assert!(matches!(
        parse("exp(1000)").unwrap().eval(&[], 1.0),
        Err(ExprError::Domain { .. })
    ));
}

#[test]
fn time_binding() {
    let e = parse("t * x0 + m").unwrap();
    let b = Bindings {
        x: &[2.0],
        t: Some(3.0),
        m: Some(0.5),
    };
    assert_eq!(e.eval_with(&b).unwrap(), 6.5);
    assert_eq!(e.free_vars(), (vec![0], true, true));
}

#[test]
fn table_of_values() {
    let x = [0.3, -1.2, 2.5, 0.75, 4.0];
    let m = 1.5;
    let (a, b, c, d, f) = (x[0], x[1], x[2], x[3], x[4]);
    let table: [(&str, f64); 50] = [
        ("1", 1.0),
        ("2.5", 2.5),
        (".5", 0.5),
        ("1e3", 1000.0),
        ("2.5E-2", 0.025),
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("10 - 4 - 3", 3.0),
        ("16 / 4 / 2", 2.0),
        ("-2^2", -4.0),
        ("(-2)^2", 4.0),
        ("2^-1", 0.5),
        ("--3", 3.0),
        ("-x0", -a),
        ("x0 * x1", a * b),
        ("x2 ^ 3", c * c * c),
        ("x4 ^ 0.5", 2.0),
        ("x3^2 + x1^2", d * d + b * b),
        ("m", m),
        ("x0 / m", a / m),
        ("pi", PI),
        ("e", E),
        ("2*pi", 2.0 * PI),
        ("e^2", E * E),
        ("sin(pi/6)", (PI / 6.0).sin()),
        ("cos(0)", 1.0),
        ("tan(x0)", a.tan()),
        ("sinh(x1)", b.sinh()),
        ("cosh(x1)", b.cosh()),
        ("tanh(x2)", c.tanh()),
        ("exp(-x0/m)", (-a / m).exp()),
        ("exp(1)", E),
        ("log(e)", 1.0),
        ("log(x4)", f.ln()),
        ("sqrt(x4)", 2.0),
        ("sqrt(2)", 2f64.sqrt()),
        ("abs(x1)", 1.2),
        ("abs(-3.5)", 3.5),
        ("sin(x0)^2 + cos(x0)^2", a.sin().powi(2) + a.cos().powi(2)),
        ("0.3 * sin(x0)", 0.3 * a.sin()),
        ("1 + 0.1 * sin(x0) * cos(x1)", 1.0 + 0.1 * a.sin() * b.cos()),
        ("exp(-2*x0) * (1 + x1^2)", (-2.0 * a).exp() * (1.0 + b * b)),
        ("x0*x1 - x2/x3", a * b - c / d),
        ("(x0 + x1) * (x2 - x3)", (a + b) * (c - d)),
        ("2^10", 1024.0),
        ("x3^-2", 1.0 / (d * d)),
        ("1/(1 + x4^2)", 1.0 / 17.0),
        ("-(m+1)/m", -(m + 1.0) / m),
        ("log(cosh(x1))", b.cosh().ln()),
        ("sqrt(abs(x1)) * exp(x3)", 1.2f64.sqrt() * d.exp()),
    ];
    for (src, want) in table {
        let got = ev(src, &x, m);
        assert!(
            (got - want).abs() <= 1e-14 * want.abs().max(1.0),
            "{src}: {got} vs {want}"
        );
    }
}

#[test]
fn integer_powers_are_exact() {
    assert_eq!(ev("3^2", &[], 1.0), 9.0);
    assert_eq!(ev("x0^3", &[0.1], 1.0), 0.1f64.powi(3));
    assert_eq!(ev("x0^-2", &[4.0], 1.0), 1.0 / 16.0);
}

#[test]
fn printing_round_trips() {
    for src in [
        "exp(-x0/m)",
        "2^3^2",
        "-2^2",
        "(-2)^2",
        "x0 - (x1 - x2)",
        "--x0",
        "1e-7 * sin(pi * t)",
        "2^-x1",
    ] {
        let e = parse(src).unwrap();
        let printed = e.to_string();
        let again = parse(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
        assert_eq!(e, again, "{src} -> {printed}");
        assert_eq!(again.to_string(), printed);
    }
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..100.0).prop_map(num),
        (0usize..=4).prop_map(|i| var(Var::X(i))),
        Just(var(Var::M)),
        Just(var(Var::T)),
        Just(Expr {
            node: Node::Pi,
            offset: 0
        }),
        Just(Expr {
            node: Node::E,
            offset: 0
        }),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr {
                node: Node::Neg(Box::new(a)),
                offset: 0
            }),
            (inner.clone(), 0usize..10).prop_map(|(a, f)| {
                let funcs = [
                    Func::Sin,
                    Func::Cos,
                    Func::Tan,
                    Func::Sinh,
                    Func::Cosh,
                    Func::Tanh,
                    Func::Exp,
                    Func::Log,
                    Func::Sqrt,
                    Func::Abs,
                ];
                Expr {
                    node: Node::Call(funcs[f], Box::new(a)),
                    offset: 0,
                }
            }),
            (inner.clone(), inner, 0usize..5).prop_map(|(a, b, o)| {
                let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];
                Expr {
                    node: Node::Bin(ops[o], Box::new(a), Box::new(b)),
                    offset: 0,
                }
            }),
        ]
    })
}

proptest! {
    #[test]
    fn parse_print_parse_is_idempotent(e in arb_expr()) {
        let once = parse(&e.to_string()).unwrap();
        prop_assert_eq!(&once, &e);
        let twice = parse(&once.to_string()).unwrap();
        prop_assert_eq!(twice, once);
    }
}
