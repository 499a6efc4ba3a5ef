use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::expr::{pretty_print, BatchEvaluator, Expr, Mask};
use crate::schema::{FeatureSchema, Instance};

/// Largest number of candidate programs `simplify_binary` will build.
pub const SIMPLIFY_LIMIT: u128 = 10_000_000;

const MAX_FEATURES: usize = 12;

struct Layer {
    programs: Vec<(Expr, Mask)>,
}

/// Smallest boolean program that agrees with `e` on every instance of an
/// all-boolean schema, searched in order of node count up to `max_nodes`.
/// Among programs of the winning size the lexicographically smallest
/// print is kept. Returns `e` itself when nothing strictly smaller exists.
pub fn simplify_binary(e: &Expr, schema: &FeatureSchema, max_nodes: usize) -> Result<Expr> {
    if !schema.is_all_boolean() {
        return Err(Error::Invalid("simplification needs an all-boolean schema".into()));
    }
    if schema.arity() > MAX_FEATURES {
        return Err(Error::Invalid(format!("simplification supports at most {MAX_FEATURES} features")));
    }
    e.type_of(schema)?;
    let k = schema.arity();
    let rows: Vec<Instance> = (0..1usize << k)
        .map(|m| Instance::from_bools(&(0..k).map(|j| m >> j & 1 == 1).collect::<Vec<_>>()))
        .collect();
    let ev = BatchEvaluator::new(schema, &rows);
    let target = ev.predict(e);
    let cap = max_nodes.min(e.node_count().saturating_sub(1));

    let mut leaves = vec![Expr::BoolConst(false), Expr::BoolConst(true)];
    leaves.extend(schema.bool_atoms().into_iter().map(Expr::BoolAtom));

    // one representative per truth table, the first size it appears at
    let mut seen: HashSet<Mask> = HashSet::new();
    let mut layers: Vec<Layer> = vec![Layer { programs: vec![] }];
    let mut built: u128 = 0;

    for size in 1..=cap {
        let mut fresh: HashMap<Mask, (Expr, String)> = HashMap::new();
        let mut offer = |p: Expr, m: Mask, built: &mut u128| -> Result<()> {
            *built += 1;
            if *built > SIMPLIFY_LIMIT {
                return Err(Error::SpaceTooLarge { count: *built, limit: SIMPLIFY_LIMIT });
            }
            if seen.contains(&m) {
                return Ok(());
            }
            let text = pretty_print(&p, schema);
            match fresh.get(&m) {
                Some((_, old)) if *old <= text => {}
                _ => {
                    fresh.insert(m, (p, text));
                }
            }
            Ok(())
        };
        if size == 1 {
            for l in &leaves {
                offer(l.clone(), ev.predict(l), &mut built)?;
            }
        } else {
            for (c, m) in &layers[size - 1].programs {
                offer(Expr::Not(Box::new(c.clone())), m.not(), &mut built)?;
            }
            for a in 1..size - 1 {
                let b = size - 1 - a;
                for (l, ml) in &layers[a].programs {
                    for (r, mr) in &layers[b].programs {
                        let (lb, rb) = (Box::new(l.clone()), Box::new(r.clone()));
                        offer(Expr::And(lb.clone(), rb.clone()), ml.and(mr), &mut built)?;
                        offer(Expr::Or(lb, rb), ml.or(mr), &mut built)?;
                    }
                }
                for c in 1..b {
                    for (ce, cm) in &layers[a].programs {
                        for (te, tm) in &layers[c].programs {
                            for (ee, em) in &layers[b - c].programs {
                                let p = Expr::If(Box::new(ce.clone()), Box::new(te.clone()), Box::new(ee.clone()));
                                offer(p, cm.select(tm, em), &mut built)?;
                            }
                        }
                    }
                }
            }
        }
        if let Some((p, _)) = fresh.get(&target) {
            return Ok(p.clone());
        }
        let mut programs: Vec<(String, Expr, Mask)> = fresh.into_iter().map(|(m, (p, t))| (t, p, m)).collect();
        programs.sort_by(|x, y| x.0.cmp(&y.0));
        for (_, _, m) in &programs {
            seen.insert(m.clone());
        }
        layers.push(Layer { programs: programs.into_iter().map(|(_, p, m)| (p, m)).collect() });
    }
    Ok(e.clone())
}
