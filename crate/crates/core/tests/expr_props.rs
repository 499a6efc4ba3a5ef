use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use progex_core::expr::{eval, type_of};
use progex_core::{
    parse, pretty_print, AtomRef, Comparator, Expr, Feature, FeatureId, FeatureSchema, Instance, Predicate, Type, Value,
};

fn schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        Feature::boolean("Married"),
        Feature::numeric("Age", vec![30.0, 42.5, 60.0]),
        Feature::categorical("Work class", ["Private", "Self-emp"]),
        Feature::numeric("Gain", vec![0.0, 0.125, 3000.0]),
        Feature::boolean("if_"),
    ])
    .unwrap()
}

const CONSTANTS: [f64; 7] = [0.0, 1.0, 2.0, 0.5, -3.0, 2.25, 1e-3];

fn leaf(t: Type, s: &FeatureSchema, rng: &mut ChaCha8Rng) -> Expr {
    match t {
        Type::Bool => match rng.gen_range(0..4) {
            0 => Expr::BoolConst(rng.gen()),
            1 => {
                let atoms = s.bool_atoms();
                Expr::BoolAtom(atoms[rng.gen_range(0..atoms.len())])
            }
            _ => {
                let id = FeatureId(if rng.gen() { 1 } else { 3 });
                let pool = &s.feature(id).thresholds;
                let c = if rng.gen() { Comparator::Le } else { Comparator::Gt };
                Expr::Predicate(Predicate::new(id, c, pool[rng.gen_range(0..pool.len())]))
            }
        },
        Type::Real => {
            if rng.gen() {
                Expr::RealAtom(FeatureId(if rng.gen() { 1 } else { 3 }))
            } else {
                Expr::RealConst(CONSTANTS[rng.gen_range(0..CONSTANTS.len())])
            }
        }
    }
}

/// A random well-typed tree of exactly `budget` nodes where possible.
fn random_expr(t: Type, budget: usize, s: &FeatureSchema, rng: &mut ChaCha8Rng) -> Expr {
    let b = |e: Expr| Box::new(e);
    if budget <= 1 {
        return leaf(t, s, rng);
    }
    let rest = budget - 1;
    let split = |rng: &mut ChaCha8Rng| {
        let l = rng.gen_range(1..rest.max(2));
        (l.min(rest - 1).max(1), rest - l.min(rest - 1).max(1))
    };
    if rest >= 3 && rng.gen_range(0..4) == 0 {
        let c = rng.gen_range(1..=rest - 2);
        let th = rng.gen_range(1..=rest - c - 1);
        let el = rest - c - th;
        return Expr::If(
            b(random_expr(Type::Bool, c, s, rng)),
            b(random_expr(t, th, s, rng)),
            b(random_expr(t, el, s, rng)),
        );
    }
    match t {
        Type::Bool => {
            if rest == 1 || rng.gen_range(0..4) == 0 {
                return Expr::Not(b(random_expr(Type::Bool, rest, s, rng)));
            }
            let (l, r) = split(rng);
            let (le, re) = (b(random_expr(Type::Bool, l, s, rng)), b(random_expr(Type::Bool, r, s, rng)));
            if rng.gen() {
                Expr::And(le, re)
            } else {
                Expr::Or(le, re)
            }
        }
        Type::Real => {
            if rest == 1 {
                return leaf(t, s, rng);
            }
            let (l, r) = split(rng);
            let (le, re) = (b(random_expr(Type::Real, l, s, rng)), b(random_expr(Type::Real, r, s, rng)));
            match rng.gen_range(0..3) {
                0 => Expr::Add(le, re),
                1 => Expr::Sub(le, re),
                _ => Expr::Mul(le, re),
            }
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    Instance::new(vec![
        f64::from(u8::from(rng.gen::<bool>())),
        [25.0, 30.0, 42.5, 50.0, 70.0][rng.gen_range(0..5)],
        f64::from(rng.gen_range(0..2u8)),
        [0.0, 0.125, 100.0, 5000.0][rng.gen_range(0..4)],
        f64::from(u8::from(rng.gen::<bool>())),
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>(), size in 1usize..=25, real in any::<bool>()) {
        let s = schema();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = if real { Type::Real } else { Type::Bool };
        let e = random_expr(t, size, &s, &mut rng);
        let text = pretty_print(&e, &s);
        let back = parse(&text, &s).map_err(|err| TestCaseError::fail(format!("{err}\n{text}")))?;
        prop_assert_eq!(&back, &e, "printed as:\n{}", text);
    }

    #[test]
    fn well_typed_programs_evaluate_to_their_type(seed in any::<u64>(), size in 1usize..=25, real in any::<bool>()) {
        let s = schema();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = if real { Type::Real } else { Type::Bool };
        let e = random_expr(t, size, &s, &mut rng);
        prop_assert_eq!(type_of(&e, &s).unwrap(), t);
        for _ in 0..8 {
            let x = random_instance(&mut rng);
            let v = eval(&e, &x);
            let vt = match v { Value::Bool(_) => Type::Bool, Value::Real(_) => Type::Real };
            prop_assert_eq!(vt, t);
            prop_assert_eq!(v, eval(&e, &x));
        }
    }
}

#[test]
fn category_atoms_print_with_level() {
    let s = schema();
    let e = Expr::BoolAtom(AtomRef::level(FeatureId(2), 1));
    let text = pretty_print(&e, &s);
    assert_eq!(text, "`Work class:Self-emp`");
    assert_eq!(parse(&text, &s).unwrap(), e);
}
