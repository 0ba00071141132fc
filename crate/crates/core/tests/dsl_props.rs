use ncl_core::dsl::{
    add, div, mul, neg, parse_model, parse_model_bytes, pow, sub, unary, ConstraintDecl, Expr, ModelFile, Objective,
    Relation, UnaryOp, VarDecl,
};
use ncl_core::Sense;
use proptest::prelude::*;

const NAMES: [&str; 3] = ["x", "y", "z"];

/// Expressions that stay finite and smooth on `[−1, 1]³`.
fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(Expr::Var),
        (-3.0f64..3.0).prop_map(|c| Expr::Const((c * 8.0).round() / 8.0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| mul(a, b)),
            // Denominators and log/sqrt arguments are kept away from zero.
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| div(a, add(Expr::Const(2.0), pow(b, Expr::Const(2.0))))),
            (inner.clone(), 2u8..4).prop_map(|(a, k)| pow(a, Expr::Const(k as f64))),
            inner.clone().prop_map(|a| unary(UnaryOp::Sin, a)),
            inner.clone().prop_map(|a| unary(UnaryOp::Cos, a)),
            inner.clone().prop_map(|a| unary(UnaryOp::Exp, unary(UnaryOp::Sin, a))),
            inner
                .clone()
                .prop_map(|a| unary(UnaryOp::Log, add(Expr::Const(1.5), pow(a, Expr::Const(2.0))))),
            inner
                .clone()
                .prop_map(|a| unary(UnaryOp::Sqrt, add(Expr::Const(1.0), pow(a, Expr::Const(2.0))))),
            inner.prop_map(neg),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 3)
}

fn central(e: &Expr, x: &[f64], i: usize) -> f64 {
    let h = 1e-6;
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[i] += h;
    m[i] -= h;
    (e.eval(&p) - e.eval(&m)) / (2.0 * h)
}

fn model(obj: Expr, con: Expr) -> ModelFile {
    ModelFile {
        vars: NAMES
            .iter()
            .map(|n| VarDecl {
                name: n.to_string(),
                lower: None,
                upper: None,
                start: None,
            })
            .collect(),
        objective: Some(Objective {
            sense: Sense::Minimize,
            expr: obj,
        }),
        constraints: vec![ConstraintDecl {
            name: "c1".into(),
            expr: con,
            relation: Relation::Le,
            lower: f64::NEG_INFINITY,
            upper: 1.0,
        }],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parser_never_panics_on_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        let _ = parse_model_bytes(&bytes);
    }

    #[test]
    fn parser_never_panics_on_token_soup(
        toks in proptest::collection::vec(
            prop_oneof![
                Just("var"), Just("x"), Just("y"), Just("minimize"), Just("maximize"),
                Just("subject to"), Just("in"), Just("["), Just("]"), Just(","), Just("("),
                Just(")"), Just("^"), Just("*"), Just("-"), Just("+"), Just("/"), Just("=="),
                Just("<="), Just(">="), Just(";"), Just(":"), Just("1.5e3"), Just("sin"),
                Just("start"), Just("#"), Just("\n"), Just("2"), Just("1e400"),
            ],
            0..40,
        )
    ) {
        let text = toks.join(" ");
        if let Err(e) = parse_model(&text) {
            let (line, col) = e.position();
            prop_assert!(line >= 1 && col >= 1);
        }
    }

    #[test]
    fn gradient_matches_central_differences(e in expr(), x in point()) {
        for i in 0..3 {
            let d = e.diff(i).eval(&x);
            let fd = central(&e, &x, i);
            prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "d/d{} of {}: {d} vs {fd}", NAMES[i], e.display(&NAMES));
        }
    }

    #[test]
    fn second_derivatives_match_central_differences(e in expr(), x in point()) {
        for i in 0..3 {
            let di = e.diff(i);
            for j in 0..3 {
                let d = di.diff(j).eval(&x);
                let fd = central(&di, &x, j);
                prop_assert!((d - fd).abs() <= 1e-5 * (1.0 + d.abs()), "{d} vs {fd}");
            }
        }
    }

    #[test]
    fn print_then_parse_is_identity(a in expr(), b in expr()) {
        let mf = model(a, b);
        let text = mf.to_string();
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(back, mf, "{}", text);
    }
}
