// SPDX-License-Identifier: Apache-2.0

//! Theory-neutral formula terms. Terms are built once by the encoder and
//! lowered to either bitvector or integer SMT-LIB2 text.

use std::collections::HashMap;
use std::fmt;

use crate::AgentId;
use crate::TaskId;

/// Value domain of a term. Bitvector widths are attached at lowering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Id,
    Time,
    Load,
    Loc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Id(AgentId, usize),
    Time(AgentId, usize),
    Load(AgentId, usize),
    TaskStart(TaskId),
    TaskEnd(TaskId),
    TaskAgent(TaskId),
    Gamma(usize),
    /// Integer quotient witnessing the parity of `Id(n, d)`.
    Quotient(AgentId, usize),
}

impl Var {
    pub fn sort(self) -> Sort {
        match self {
            Var::Id(..) | Var::TaskAgent(_) | Var::Quotient(..) => Sort::Id,
            Var::Time(..) | Var::TaskStart(_) | Var::TaskEnd(_) => Sort::Time,
            Var::Load(..) => Sort::Load,
            Var::Gamma(_) => Sort::Bool,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::Id(n, d) => write!(f, "i_{n}_{d}"),
            Var::Time(n, d) => write!(f, "t_{n}_{d}"),
            Var::Load(n, d) => write!(f, "l_{n}_{d}"),
            Var::TaskStart(m) => write!(f, "mstart_{m}"),
            Var::TaskEnd(m) => write!(f, "mend_{m}"),
            Var::TaskAgent(m) => write!(f, "magent_{m}"),
            Var::Gamma(k) => write!(f, "gamma_{k}"),
            Var::Quotient(n, d) => write!(f, "q_{n}_{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Bool(bool),
    Num(u64, Sort),
    Var(Var),
    /// `Loc(id)`: location of an action id.
    Loc(Box<Term>),
    /// `Dist(loc, loc)`: travel time between two locations.
    Dist(Box<Term>, Box<Term>),
    Add(Vec<Term>),
    Sub(Box<Term>, Box<Term>),
    Ite(Box<Term>, Box<Term>, Box<Term>),
    /// Lowest bit of an id term, as an id-sorted 0/1 value.
    Parity(Box<Term>),
    /// Range constraint tying `Id(n, d)` to its quotient in the integer
    /// lowering; trivially true for bitvectors.
    ParityBound(AgentId, usize),
    Eq(Box<Term>, Box<Term>),
    Le(Box<Term>, Box<Term>),
    Lt(Box<Term>, Box<Term>),
    Ge(Box<Term>, Box<Term>),
    Not(Box<Term>),
    And(Vec<Term>),
    Or(Vec<Term>),
    Implies(Box<Term>, Box<Term>),
}

pub fn var(v: Var) -> Term {
    Term::Var(v)
}

pub fn num(value: u64, sort: Sort) -> Term {
    Term::Num(value, sort)
}

pub fn eq(a: Term, b: Term) -> Term {
    Term::Eq(Box::new(a), Box::new(b))
}

pub fn le(a: Term, b: Term) -> Term {
    Term::Le(Box::new(a), Box::new(b))
}

pub fn lt(a: Term, b: Term) -> Term {
    Term::Lt(Box::new(a), Box::new(b))
}

pub fn ge(a: Term, b: Term) -> Term {
    Term::Ge(Box::new(a), Box::new(b))
}

pub fn not(a: Term) -> Term {
    Term::Not(Box::new(a))
}

pub fn implies(a: Term, b: Term) -> Term {
    Term::Implies(Box::new(a), Box::new(b))
}

pub fn ite(c: Term, a: Term, b: Term) -> Term {
    Term::Ite(Box::new(c), Box::new(a), Box::new(b))
}

pub fn sub(a: Term, b: Term) -> Term {
    Term::Sub(Box::new(a), Box::new(b))
}

pub fn loc(id: Term) -> Term {
    Term::Loc(Box::new(id))
}

pub fn dist(a: Term, b: Term) -> Term {
    Term::Dist(Box::new(a), Box::new(b))
}

pub fn parity(id: Term) -> Term {
    Term::Parity(Box::new(id))
}

/// Conjunction; an empty list is `true` and a singleton is unwrapped.
pub fn and(mut terms: Vec<Term>) -> Term {
    terms.retain(|t| *t != Term::Bool(true));
    match terms.len() {
        0 => Term::Bool(true),
        1 => terms.pop().unwrap(),
        _ => Term::And(terms),
    }
}

/// Disjunction; an empty list is `false` and a singleton is unwrapped.
pub fn or(mut terms: Vec<Term>) -> Term {
    terms.retain(|t| *t != Term::Bool(false));
    match terms.len() {
        0 => Term::Bool(false),
        1 => terms.pop().unwrap(),
        _ => Term::Or(terms),
    }
}

impl Term {
    pub fn sort(&self) -> Sort {
        match self {
            Term::Num(_, s) => *s,
            Term::Var(v) => v.sort(),
            Term::Loc(_) => Sort::Loc,
            Term::Dist(..) => Sort::Time,
            Term::Add(ts) => ts.first().map_or(Sort::Time, Term::sort),
            Term::Sub(a, _) => a.sort(),
            Term::Ite(_, a, _) => a.sort(),
            Term::Parity(_) => Sort::Id,
            _ => Sort::Bool,
        }
    }

    /// Visit every variable occurring in the term.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Term::Bool(_) | Term::Num(..) => {}
            Term::Var(v) => f(*v),
            Term::ParityBound(n, d) => {
                f(Var::Id(*n, *d));
                f(Var::Quotient(*n, *d));
            }
            Term::Loc(a) | Term::Parity(a) | Term::Not(a) => a.for_each_var(f),
            Term::Dist(a, b)
            | Term::Sub(a, b)
            | Term::Eq(a, b)
            | Term::Le(a, b)
            | Term::Lt(a, b)
            | Term::Ge(a, b)
            | Term::Implies(a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Term::Ite(c, a, b) => {
                c.for_each_var(f);
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Term::Add(ts) | Term::And(ts) | Term::Or(ts) => {
                ts.iter().for_each(|t| t.for_each_var(f))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

/// Concrete interpretation for evaluating terms outside a solver.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub vars: HashMap<Var, i64>,
    pub loc: HashMap<i64, i64>,
    pub dist: HashMap<(i64, i64), i64>,
}

impl Env {
    pub fn with(mut self, v: Var, value: i64) -> Self {
        self.vars.insert(v, value);
        self
    }
}

impl Term {
    /// Evaluate with unbounded integer arithmetic. Returns `None` when a
    /// variable or function point is missing from the environment.
    pub fn eval(&self, env: &Env) -> Option<Value> {
        use Value::*;
        let int = |t: &Term| match t.eval(env) {
            Some(Int(v)) => Some(v),
            _ => None,
        };
        let boolean = |t: &Term| match t.eval(env) {
            Some(Bool(v)) => Some(v),
            _ => None,
        };
        Some(match self {
            Term::Bool(b) => Bool(*b),
            Term::Num(v, _) => Int(*v as i64),
            Term::Var(v) if v.sort() == Sort::Bool => Bool(*env.vars.get(v)? != 0),
            Term::Var(v) => Int(*env.vars.get(v)?),
            Term::Loc(a) => Int(*env.loc.get(&int(a)?)?),
            Term::Dist(a, b) => Int(*env.dist.get(&(int(a)?, int(b)?))?),
            Term::Add(ts) => Int(ts.iter().map(int).sum::<Option<i64>>()?),
            Term::Sub(a, b) => Int(int(a)? - int(b)?),
            Term::Ite(c, a, b) => {
                if boolean(c)? {
                    a.eval(env)?
                } else {
                    b.eval(env)?
                }
            }
            Term::Parity(a) => Int(int(a)?.rem_euclid(2)),
            Term::ParityBound(n, d) => {
                let i = *env.vars.get(&Var::Id(*n, *d))?;
                match env.vars.get(&Var::Quotient(*n, *d)) {
                    Some(q) => Bool((0..=1).contains(&(i - 2 * q))),
                    None => Bool(true),
                }
            }
            Term::Eq(a, b) => Bool(a.eval(env)? == b.eval(env)?),
            Term::Le(a, b) => Bool(int(a)? <= int(b)?),
            Term::Lt(a, b) => Bool(int(a)? < int(b)?),
            Term::Ge(a, b) => Bool(int(a)? >= int(b)?),
            Term::Not(a) => Bool(!boolean(a)?),
            Term::And(ts) => Bool(ts.iter().map(boolean).collect::<Option<Vec<_>>>()?.into_iter().all(|b| b)),
            Term::Or(ts) => Bool(ts.iter().map(boolean).collect::<Option<Vec<_>>>()?.into_iter().any(|b| b)),
            Term::Implies(a, b) => Bool(!boolean(a)? || boolean(b)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connectives_simplify() {
        assert_eq!(or(vec![]), Term::Bool(false));
        assert_eq!(and(vec![]), Term::Bool(true));
        let x = eq(var(Var::Id(0, 1)), num(2, Sort::Id));
        assert_eq!(or(vec![Term::Bool(false), x.clone()]), x);
    }

    #[test]
    fn eval_arithmetic_and_functions() {
        let mut env = Env::default()
            .with(Var::Time(0, 0), 3)
            .with(Var::Id(0, 0), 5)
            .with(Var::Id(0, 1), 6);
        env.loc.insert(5, 1);
        env.loc.insert(6, 2);
        env.dist.insert((1, 2), 3);
        let t = Term::Add(vec![
            var(Var::Time(0, 0)),
            dist(loc(var(Var::Id(0, 0))), loc(var(Var::Id(0, 1)))),
            num(1, Sort::Time),
        ]);
        assert_eq!(t.eval(&env), Some(Value::Int(7)));
        assert_eq!(parity(var(Var::Id(0, 0))).eval(&env), Some(Value::Int(1)));
        assert_eq!(var(Var::Load(0, 0)).eval(&env), None);
    }

    #[test]
    fn variable_names_are_fixed() {
        assert_eq!(Var::Id(1, 2).to_string(), "i_1_2");
        assert_eq!(Var::TaskAgent(3).to_string(), "magent_3");
        assert_eq!(Var::Gamma(0).to_string(), "gamma_0");
        assert_eq!(Var::Quotient(0, 4).to_string(), "q_0_4");
    }
}
