// SPDX-License-Identifier: Apache-2.0

//! SMT-LIB2 lowering for the two supported theories.
//!
//! Bitvector comparisons that involve sums are evaluated in a widened sort:
//! subtracted terms move to the other side and every summand is
//! zero-extended far enough that neither side can wrap around. The
//! comparison therefore has the same meaning as over the integers.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::term::{Sort, Term, Var};
use super::{EncodeError, LiteralLayout};
use crate::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theory {
    Bv,
    Lia,
}

impl Theory {
    pub fn logic_name(self) -> &'static str {
        match self {
            Theory::Bv => "QF_UFBV",
            Theory::Lia => "QF_UFLIA",
        }
    }
}

/// Minimal bitvector widths for each sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitWidths {
    pub id_width: u32,
    pub time_width: u32,
    pub load_width: u32,
    pub loc_width: u32,
}

/// Smallest `w >= 1` with `2^w > bound`.
fn bits_above(bound: u64) -> u32 {
    (u64::BITS - bound.leading_zeros()).max(1)
}

impl BitWidths {
    pub fn new(
        n_agents: usize,
        m_max: usize,
        t_max: Time,
        max_weight: Time,
        rho: Time,
        capacity: u64,
        n_locations: usize,
    ) -> Self {
        Self {
            id_width: bits_above((2 * m_max + n_agents) as u64),
            time_width: bits_above(t_max + max_weight + rho),
            load_width: bits_above(capacity),
            loc_width: bits_above(n_locations.saturating_sub(1) as u64),
        }
    }

    pub fn for_instance(instance: &crate::model::Instance, m_max: usize) -> Self {
        Self::new(
            instance.n_agents(),
            m_max,
            instance.config.t_max,
            instance.graph.max_weight(),
            instance.rho(),
            instance.config.capacity,
            instance.graph.n_locations(),
        )
    }

    pub fn of(&self, sort: Sort) -> u32 {
        match sort {
            Sort::Id => self.id_width,
            Sort::Time => self.time_width,
            Sort::Load => self.load_width,
            Sort::Loc => self.loc_width,
            Sort::Bool => 1,
        }
    }
}

fn sort_text(theory: Theory, widths: &BitWidths, sort: Sort) -> String {
    match (theory, sort) {
        (_, Sort::Bool) => "Bool".into(),
        (Theory::Lia, _) => "Int".into(),
        (Theory::Bv, s) => format!("(_ BitVec {})", widths.of(s)),
    }
}

/// Declarations for every layout variable plus the two uninterpreted
/// functions, in a fixed order.
pub fn declarations(layout: &LiteralLayout, theory: Theory, widths: &BitWidths) -> Vec<String> {
    let mut vars = layout.variables();
    if theory == Theory::Lia {
        vars.extend(layout.quotients());
    }
    let mut out: Vec<String> = vars
        .into_iter()
        .map(|v| format!("(declare-fun {v} () {})", sort_text(theory, widths, v.sort())))
        .collect();
    let id = sort_text(theory, widths, Sort::Id);
    let l = sort_text(theory, widths, Sort::Loc);
    let t = sort_text(theory, widths, Sort::Time);
    out.push(format!("(declare-fun Loc ({id}) {l})"));
    out.push(format!("(declare-fun Dist ({l} {l}) {t})"));
    out
}

/// Lower every formula of a scope to SMT-LIB2 term text.
pub fn lower(formulas: &[Term], theory: Theory, widths: &BitWidths) -> Result<Vec<String>, EncodeError> {
    let lw = Lowerer { theory, widths };
    formulas
        .iter()
        .map(|t| {
            let mut s = String::new();
            lw.term(t, 0, &mut s)?;
            Ok(s)
        })
        .collect()
}

/// Script fragment: logic, declarations, then one assert per formula.
pub fn emit_smtlib(assertions: &[String], logic_name: &str, declarations: &[String]) -> String {
    let mut out = format!("(set-logic {logic_name})\n");
    for d in declarations {
        out.push_str(d);
        out.push('\n');
    }
    for a in assertions {
        let _ = writeln!(out, "(assert {a})");
    }
    out
}

struct Lowerer<'a> {
    theory: Theory,
    widths: &'a BitWidths,
}

fn summands<'t>(t: &'t Term, positive: bool, pos: &mut Vec<&'t Term>, neg: &mut Vec<&'t Term>) {
    match t {
        Term::Add(ts) => ts.iter().for_each(|x| summands(x, positive, pos, neg)),
        Term::Sub(a, b) => {
            summands(a, positive, pos, neg);
            summands(b, !positive, pos, neg);
        }
        leaf if positive => pos.push(leaf),
        leaf => neg.push(leaf),
    }
}

fn is_arith(t: &Term) -> bool {
    matches!(t, Term::Add(_) | Term::Sub(..))
}

fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

impl Lowerer<'_> {
    fn num(&self, value: u64, sort: Sort, ext: u32, out: &mut String) -> Result<(), EncodeError> {
        match self.theory {
            Theory::Lia => {
                let _ = write!(out, "{value}");
            }
            Theory::Bv => {
                let width = self.widths.of(sort);
                if width < 64 && value >> width != 0 {
                    return Err(EncodeError::WidthOverflow { value, sort, width });
                }
                let _ = write!(out, "(_ bv{value} {})", width + ext);
            }
        }
        Ok(())
    }

    fn nary(&self, op: &str, ts: &[Term], ext: u32, out: &mut String) -> Result<(), EncodeError> {
        let _ = write!(out, "({op}");
        for t in ts {
            out.push(' ');
            self.term(t, ext, out)?;
        }
        out.push(')');
        Ok(())
    }

    fn binary(&self, op: &str, a: &Term, b: &Term, ext: u32, out: &mut String) -> Result<(), EncodeError> {
        let _ = write!(out, "({op} ");
        self.term(a, ext, out)?;
        out.push(' ');
        self.term(b, ext, out)?;
        out.push(')');
        Ok(())
    }

    /// Lower `t`; numeric leaves are widened by `ext` bits (bitvectors
    /// only).
    fn term(&self, t: &Term, ext: u32, out: &mut String) -> Result<(), EncodeError> {
        let bv = self.theory == Theory::Bv;
        if bv && ext > 0 && !matches!(t, Term::Num(..) | Term::Add(_) | Term::Sub(..)) && t.sort() != Sort::Bool {
            let _ = write!(out, "((_ zero_extend {ext}) ");
            self.term(t, 0, out)?;
            out.push(')');
            return Ok(());
        }
        match t {
            Term::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Term::Num(v, s) => self.num(*v, *s, ext, out)?,
            Term::Var(v) => {
                let _ = write!(out, "{v}");
            }
            Term::Loc(a) => {
                out.push_str("(Loc ");
                self.term(a, 0, out)?;
                out.push(')');
            }
            Term::Dist(a, b) => self.binary("Dist", a, b, 0, out)?,
            Term::Add(ts) => self.nary(if bv { "bvadd" } else { "+" }, ts, ext, out)?,
            Term::Sub(a, b) => self.binary(if bv { "bvsub" } else { "-" }, a, b, ext, out)?,
            Term::Ite(c, a, b) => {
                out.push_str("(ite ");
                self.term(c, 0, out)?;
                out.push(' ');
                self.term(a, ext, out)?;
                out.push(' ');
                self.term(b, ext, out)?;
                out.push(')');
            }
            Term::Parity(a) => {
                if bv {
                    out.push_str("(bvand ");
                    self.term(a, 0, out)?;
                    out.push(' ');
                    self.num(1, Sort::Id, 0, out)?;
                    out.push(')');
                } else {
                    let Term::Var(Var::Id(n, d)) = **a else {
                        return Err(EncodeError::UnsupportedParity);
                    };
                    let _ = write!(out, "(- {} (* 2 {}))", Var::Id(n, d), Var::Quotient(n, d));
                }
            }
            Term::ParityBound(n, d) => {
                if bv {
                    out.push_str("true");
                } else {
                    let r = format!("(- {} (* 2 {}))", Var::Id(*n, *d), Var::Quotient(*n, *d));
                    let _ = write!(out, "(and (<= 0 {r}) (<= {r} 1))");
                }
            }
            Term::Eq(a, b) => self.compare("=", "=", a, b, out)?,
            Term::Le(a, b) => self.compare("<=", "bvule", a, b, out)?,
            Term::Lt(a, b) => self.compare("<", "bvult", a, b, out)?,
            Term::Ge(a, b) => self.compare(">=", "bvuge", a, b, out)?,
            Term::Not(a) => {
                out.push_str("(not ");
                self.term(a, 0, out)?;
                out.push(')');
            }
            Term::And(ts) => self.nary("and", ts, 0, out)?,
            Term::Or(ts) => self.nary("or", ts, 0, out)?,
            Term::Implies(a, b) => self.binary("=>", a, b, 0, out)?,
        }
        Ok(())
    }

    fn compare(&self, lia_op: &str, bv_op: &str, a: &Term, b: &Term, out: &mut String) -> Result<(), EncodeError> {
        if self.theory == Theory::Lia {
            return self.binary(lia_op, a, b, 0, out);
        }
        if !is_arith(a) && !is_arith(b) {
            return self.binary(bv_op, a, b, 0, out);
        }
        let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
        let mut lneg = Vec::new();
        let mut rneg = Vec::new();
        summands(a, true, &mut lhs, &mut lneg);
        summands(b, true, &mut rhs, &mut rneg);
        lhs.extend(rneg);
        rhs.extend(lneg);
        let ext = ceil_log2(lhs.len().max(rhs.len()));
        let _ = write!(out, "({bv_op} ");
        self.side(&lhs, a.sort(), ext, out)?;
        out.push(' ');
        self.side(&rhs, a.sort(), ext, out)?;
        out.push(')');
        Ok(())
    }

    fn side(&self, terms: &[&Term], sort: Sort, ext: u32, out: &mut String) -> Result<(), EncodeError> {
        match terms {
            [] => self.num(0, sort, ext, out),
            [t] => self.term(t, ext, out),
            ts => {
                out.push_str("(bvadd");
                for t in ts {
                    out.push(' ');
                    self.term(t, ext, out)?;
                }
                out.push(')');
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::term::{eq, ge, lt, num, parity, sub, var};

    fn widths() -> BitWidths {
        BitWidths::new(1, 1, 100, 4, 1, 1, 3)
    }

    fn lower_one(t: &Term, theory: Theory) -> String {
        lower(std::slice::from_ref(t), theory, &widths()).unwrap().pop().unwrap()
    }

    #[test]
    fn widths_are_minimal() {
        let w = widths();
        assert_eq!(w.time_width, 7);
        assert_eq!(w.id_width, 2);
        assert_eq!(w.load_width, 1);
        assert_eq!(w.loc_width, 2);
        assert_eq!(bits_above(0), 1);
        assert_eq!(bits_above(127), 7);
        assert_eq!(bits_above(128), 8);
    }

    #[test]
    fn constants_must_fit() {
        let t = eq(var(Var::Id(0, 0)), num(4, Sort::Id));
        assert!(matches!(
            lower(&[t], Theory::Bv, &widths()),
            Err(EncodeError::WidthOverflow { value: 4, .. })
        ));
    }

    #[test]
    fn bv_sums_are_widened() {
        let t = eq(
            var(Var::Load(0, 1)),
            sub(Term::Add(vec![var(Var::Load(0, 0)), num(1, Sort::Load)]), num(0, Sort::Load)),
        );
        assert_eq!(
            lower_one(&t, Theory::Bv),
            "(= (bvadd ((_ zero_extend 1) l_0_1) (_ bv0 2)) (bvadd ((_ zero_extend 1) l_0_0) (_ bv1 2)))"
        );
        assert_eq!(lower_one(&t, Theory::Lia), "(= l_0_1 (- (+ l_0_0 1) 0))");
    }

    #[test]
    fn parity_per_theory() {
        let t = eq(parity(var(Var::Id(0, 2))), num(1, Sort::Id));
        assert_eq!(lower_one(&t, Theory::Bv), "(= (bvand i_0_2 (_ bv1 2)) (_ bv1 2))");
        assert_eq!(lower_one(&t, Theory::Lia), "(= (- i_0_2 (* 2 q_0_2)) 1)");
        assert_eq!(
            lower_one(&Term::ParityBound(0, 2), Theory::Lia),
            "(and (<= 0 (- i_0_2 (* 2 q_0_2))) (<= (- i_0_2 (* 2 q_0_2)) 1))"
        );
        assert!(lower(&[parity(num(3, Sort::Id))], Theory::Lia, &widths()).is_err());
    }

    #[test]
    fn unsigned_comparisons() {
        let w = BitWidths::new(1, 7, 10, 1, 1, 1, 2);
        assert_eq!(w.id_width, 4);
        let t = lt(num(5, Sort::Id), num(11, Sort::Id));
        assert_eq!(lower(&[t], Theory::Bv, &w).unwrap()[0], "(bvult (_ bv5 4) (_ bv11 4))");
        let g = ge(var(Var::Time(0, 1)), num(3, Sort::Time));
        assert_eq!(lower_one(&g, Theory::Bv), "(bvuge t_0_1 (_ bv3 7))");
    }

    #[test]
    fn emit_is_deterministic() {
        let layout = LiteralLayout {
            n_agents: 1,
            m_max: 1,
            points: 3,
            n_gammas: 1,
        };
        let decls = declarations(&layout, Theory::Bv, &widths());
        let empty = emit_smtlib(&[], "QF_UFBV", &decls);
        assert!(!empty.contains("assert"));
        assert_eq!(empty.lines().count(), 1 + decls.len());
        let a = vec!["(= i_0_0 (_ bv0 2))".to_string()];
        let once = emit_smtlib(&a, "QF_UFBV", &decls);
        assert_eq!(once.matches("(assert ").count(), 1);
        assert_eq!(once, emit_smtlib(&a, "QF_UFBV", &decls));
        assert!(decls.contains(&"(declare-fun Dist ((_ BitVec 2) (_ BitVec 2)) (_ BitVec 7))".to_string()));
    }
}
