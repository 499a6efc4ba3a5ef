//! Python-flavoured rendering of programs.
//!
//! Conditionals in statement position (the root, and branches of a
//! statement conditional) print as `if`/`elif`/`else` lines; a conditional
//! used as an operand prints inline in parentheses. Parentheses elsewhere
//! are the minimum needed to re-parse the same tree.

use super::{Expr, Predicate};
use crate::schema::{AtomRef, FeatureId, FeatureSchema};

const INDENT: &str = "    ";

// Binding strength, loosest first.
const P_IF: u8 = 0;
const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_NOT: u8 = 3;
const P_CMP: u8 = 4;
const P_ADD: u8 = 5;
const P_MUL: u8 = 6;
const P_ATOM: u8 = 7;

pub(crate) const KEYWORDS: &[&str] = &["if", "elif", "else", "and", "or", "not", "True", "False", "return"];

pub fn pretty_print(e: &Expr, schema: &FeatureSchema) -> String {
    let mut out = String::new();
    Printer { schema }.statement(e, 0, &mut out);
    out
}

/// Integral thresholds print bare (`40`); fractional ones with two decimals
/// when that is exact (`0.30`), otherwise the shortest exact decimal.
pub fn format_threshold(t: f64) -> String {
    if t.fract() == 0.0 {
        return format!("{t}");
    }
    let two = format!("{t:.2}");
    if two.parse::<f64>().ok() == Some(t) {
        two
    } else {
        format!("{t}")
    }
}

pub(crate) fn is_plain_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    // `:` may join segments (`Diag:Other`) but never ends a name.
    let ok = s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ':')
        && !s.ends_with(':')
        && !s.contains("::")
        && s.split(':').skip(1).all(|seg| seg.starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_'));
    ok && !KEYWORDS.contains(&s)
}

struct Printer<'a> {
    schema: &'a FeatureSchema,
}

impl Printer<'_> {
    fn name(&self, raw: String, out: &mut String) {
        if is_plain_identifier(&raw) {
            out.push_str(&raw);
        } else {
            out.push('`');
            out.push_str(&raw);
            out.push('`');
        }
    }

    fn atom(&self, a: AtomRef, out: &mut String) {
        self.name(self.schema.atom_name(a), out);
    }

    fn feature(&self, id: FeatureId, out: &mut String) {
        let name = self.schema.get(id).map(|f| f.name.clone()).unwrap_or_else(|| format!("{id}"));
        self.name(name, out);
    }

    fn predicate(&self, p: &Predicate, out: &mut String) {
        self.feature(p.feature, out);
        out.push_str(p.comparator.symbol());
        out.push_str(&format_threshold(p.threshold));
    }

    fn statement(&self, e: &Expr, indent: usize, out: &mut String) {
        let Expr::If(..) = e else {
            self.expr(e, P_IF, out);
            return;
        };
        let pad = INDENT.repeat(indent);
        let mut cur = e;
        let mut first = true;
        while let Expr::If(c, t, f) = cur {
            if !first {
                out.push('\n');
                out.push_str(&pad);
                out.push_str("el");
            }
            out.push_str("if ");
            self.expr(c, P_OR, out);
            out.push(':');
            self.branch(t, indent, out);
            first = false;
            cur = f;
        }
        out.push('\n');
        out.push_str(&pad);
        out.push_str("else:");
        self.branch(cur, indent, out);
    }

    fn branch(&self, e: &Expr, indent: usize, out: &mut String) {
        if let Expr::If(..) = e {
            out.push('\n');
            out.push_str(&INDENT.repeat(indent + 1));
            self.statement(e, indent + 1, out);
        } else {
            out.push(' ');
            self.expr(e, P_IF, out);
        }
    }

    /// Renders `e` in a context that requires binding strength at least `min`.
    fn expr(&self, e: &Expr, min: u8, out: &mut String) {
        let own = precedence(e);
        let paren = own < min;
        if paren {
            out.push('(');
        }
        match e {
            Expr::BoolConst(b) => out.push_str(if *b { "True" } else { "False" }),
            Expr::BoolAtom(a) => self.atom(*a, out),
            Expr::RealAtom(id) => self.feature(*id, out),
            Expr::RealConst(v) => out.push_str(&format!("{v}")),
            Expr::Predicate(p) => self.predicate(p, out),
            Expr::Not(c) => {
                out.push_str("not ");
                self.expr(c, P_NOT, out);
            }
            Expr::And(l, r) => self.binary(l, " and ", r, P_AND, out),
            Expr::Or(l, r) => {
                // conjunctions under a disjunction are bracketed for readability
                let side = |c: &Expr, base: u8| if matches!(c, Expr::And(..)) { P_AND + 1 } else { base };
                self.expr(l, side(l, P_OR), out);
                out.push_str(" or ");
                self.expr(r, side(r, P_OR + 1), out);
            }
            Expr::Add(l, r) => self.binary(l, " + ", r, P_ADD, out),
            Expr::Sub(l, r) => self.binary(l, " - ", r, P_ADD, out),
            Expr::Mul(l, r) => self.binary(l, "*", r, P_MUL, out),
            Expr::If(..) => self.inline_if(e, out),
        }
        if paren {
            out.push(')');
        }
    }

    fn binary(&self, l: &Expr, op: &str, r: &Expr, level: u8, out: &mut String) {
        self.expr(l, level, out);
        out.push_str(op);
        self.expr(r, level + 1, out);
    }

    fn inline_if(&self, e: &Expr, out: &mut String) {
        let mut cur = e;
        let mut first = true;
        while let Expr::If(c, t, f) = cur {
            out.push_str(if first { "if " } else { " elif " });
            self.expr(c, P_OR, out);
            out.push_str(": ");
            self.expr(t, P_OR, out);
            first = false;
            cur = f;
        }
        out.push_str(" else: ");
        self.expr(cur, P_OR, out);
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::If(..) => P_IF,
        Expr::Or(..) => P_OR,
        Expr::And(..) => P_AND,
        Expr::Not(_) => P_NOT,
        Expr::Predicate(_) => P_CMP,
        Expr::Add(..) | Expr::Sub(..) => P_ADD,
        Expr::Mul(..) => P_MUL,
        _ => P_ATOM,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;
    use crate::schema::Feature;

    fn adult() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::numeric("CapitalGain", vec![0.0]),
            Feature::boolean("Married"),
            Feature::numeric("HoursPerWeek", vec![40.0]),
            Feature::boolean("Tolazamide"),
            Feature::numeric("NumInpatient", vec![1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn prints_nested_programs() {
        let s = adult();
        let e = and(pred(FeatureId(0), Comparator::Gt, 0.0), var(1));
        assert_eq!(pretty_print(&e, &s), "CapitalGain>0 and Married");
        assert_eq!(pretty_print(&not(var(3)), &s), "not Tolazamide");
        assert_eq!(pretty_print(&Expr::BoolConst(true), &s), "True");
        let rf = and(
            ite(pred(FeatureId(2), Comparator::Le, 40.0), pred(FeatureId(0), Comparator::Gt, 0.0), Expr::BoolConst(true)),
            var(1),
        );
        assert_eq!(
            pretty_print(&rf, &s),
            "(if HoursPerWeek<=40: CapitalGain>0 else: True) and Married"
        );
        let lin = ite(pred(FeatureId(0), Comparator::Gt, 0.0), var(1), Expr::BoolConst(false));
        assert_eq!(pretty_print(&lin, &s), "if CapitalGain>0: Married\nelse: False");
    }

    #[test]
    fn prints_nested_statements() {
        let s = FeatureSchema::booleans(&["A", "B", "C", "D"]).unwrap();
        let e = ite(var(0), ite(var(1), var(3), Expr::BoolConst(false)), not(var(2)));
        assert_eq!(pretty_print(&e, &s), "if A:\n    if B: D\n    else: False\nelse: not C");
        let chain = ite(var(0), var(1), ite(var(2), var(3), Expr::BoolConst(false)));
        assert_eq!(pretty_print(&chain, &s), "if A: B\nelif C: D\nelse: False");
    }

    #[test]
    fn minimal_parentheses() {
        let s = FeatureSchema::booleans(&["A", "B", "C"]).unwrap();
        assert_eq!(pretty_print(&or(and(var(0), var(1)), var(2)), &s), "(A and B) or C");
        assert_eq!(pretty_print(&and(or(var(0), var(1)), var(2)), &s), "(A or B) and C");
        assert_eq!(pretty_print(&or(var(0), or(var(1), var(2))), &s), "A or (B or C)");
        assert_eq!(pretty_print(&not(and(var(0), var(1))), &s), "not (A and B)");
    }

    #[test]
    fn prints_arithmetic() {
        let s = FeatureSchema::booleans(&["A", "B"]).unwrap();
        let lin = add(
            sub(mul(Expr::RealConst(10.0), Expr::RealAtom(FeatureId(0))), mul(Expr::RealConst(9.0), Expr::RealAtom(FeatureId(1)))),
            Expr::RealConst(2.0),
        );
        assert_eq!(pretty_print(&lin, &s), "10*A - 9*B + 2");
        let e = mul(add(Expr::RealAtom(FeatureId(0)), Expr::RealConst(0.5)), Expr::RealConst(-3.0));
        assert_eq!(pretty_print(&e, &s), "(A + 0.5)*-3");
    }

    #[test]
    fn threshold_formatting() {
        assert_eq!(format_threshold(1.0), "1");
        assert_eq!(format_threshold(0.3), "0.30");
        assert_eq!(format_threshold(35.5), "35.50");
        assert_eq!(format_threshold(0.125), "0.125");
        assert_eq!(format_threshold(-2.0), "-2");
    }

    #[test]
    fn quotes_awkward_names() {
        assert!(is_plain_identifier("Diag:Other"));
        assert!(!is_plain_identifier("marital-status"));
        assert!(!is_plain_identifier("and"));
        assert!(!is_plain_identifier("A:"));
        let s = FeatureSchema::new(vec![Feature::boolean("marital-status")]).unwrap();
        assert_eq!(pretty_print(&var(0), &s), "`marital-status`");
    }
}
