//! Size-configuration cases for the two Lagrangian bounds.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ElemType {
    #[serde(rename = "s")]
    Small,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "b")]
    Big,
}

impl ElemType {
    pub fn tag(self) -> char {
        match self {
            ElemType::Small => 's',
            ElemType::Zero => '0',
            ElemType::One => '1',
            ElemType::Two => '2',
            ElemType::Big => 'b',
        }
    }
}

/// Which of the two bounds a case belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Program {
    /// Three multipliers `(mu, l1, l2)`, small elements up to 2.
    Thirteen,
    /// Four multipliers `(mu, l0, l1, l2)`, small elements up to 1.
    Fourteen,
}

impl Program {
    /// Closed value range of a type; `hi` is infinite for big elements.
    /// Open left ends are closed at 0, which only adds the empty limit.
    pub fn range(self, t: ElemType) -> Option<(f64, f64)> {
        match (self, t) {
            (Program::Thirteen, ElemType::Small) => Some((0.0, 2.0)),
            (Program::Thirteen, ElemType::Zero) => None,
            (Program::Fourteen, ElemType::Small) => Some((0.0, 1.0)),
            (Program::Fourteen, ElemType::Zero) => Some((1.0, 2.0)),
            (_, ElemType::One) => Some((2.0, 4.0)),
            (_, ElemType::Two) => Some((4.0, 8.0)),
            (_, ElemType::Big) => Some((8.0, f64::INFINITY)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Flexible {
    pub kind: ElemType,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeConfigCase {
    pub id: usize,
    pub program: Program,
    pub fixed: Vec<(f64, ElemType)>,
    pub flexible: Option<Flexible>,
}

impl SizeConfigCase {
    fn new(id: usize, program: Program, fixed: Vec<(f64, ElemType)>, kind: ElemType) -> Self {
        let (lo, hi) = program.range(kind).expect("type exists in program");
        SizeConfigCase {
            id,
            program,
            fixed,
            flexible: Some(Flexible { kind, lo, hi }),
        }
    }

    /// Short label such as `{2s, a:1[2,4]}`.
    pub fn label(&self) -> String {
        let mut parts: Vec<String> = self
            .fixed
            .iter()
            .map(|(v, t)| format!("{}{}", v, t.tag()))
            .collect();
        if let Some(f) = &self.flexible {
            parts.push(format!("a:{}[{},{}]", f.kind.tag(), f.lo, f.hi));
        }
        format!("{{{}}}", parts.join(", "))
    }

    /// Every fixed element lies in its type's range.
    pub fn is_consistent(&self) -> bool {
        self.fixed.iter().all(|&(v, t)| match self.program.range(t) {
            Some((lo, hi)) => lo <= v && v <= hi,
            None => false,
        }) && self.flexible.map_or(true, |f| self.program.range(f.kind) == Some((f.lo, f.hi)))
    }
}

/// The 6 cases for the three-multiplier bound and the 23 for the
/// four-multiplier bound.
pub fn case_tables() -> (Vec<SizeConfigCase>, Vec<SizeConfigCase>) {
    use ElemType::*;
    let p = Program::Thirteen;
    let mut c13: Vec<SizeConfigCase> = Vec::new();
    for t in [Small, One, Two, Big] {
        c13.push(SizeConfigCase::new(c13.len(), p, vec![], t));
    }
    for t in [Small, One] {
        c13.push(SizeConfigCase::new(c13.len(), p, vec![(2.0, Small)], t));
    }

    let p = Program::Fourteen;
    let mut c14: Vec<SizeConfigCase> = Vec::new();
    for t in [Small, Zero, One, Two, Big] {
        c14.push(SizeConfigCase::new(c14.len(), p, vec![], t));
    }
    let heads = [(1.0, Small), (2.0, Zero), (2.0, One)];
    for a1 in heads {
        for t in [Small, Zero, One] {
            c14.push(SizeConfigCase::new(c14.len(), p, vec![a1], t));
        }
    }
    for a2 in heads {
        for t in [Small, Zero] {
            c14.push(SizeConfigCase::new(c14.len(), p, vec![(1.0, Small), a2], t));
        }
    }
    c14.push(SizeConfigCase::new(c14.len(), p, vec![(1.0, Small); 2], One));
    for t in [Small, Zero] {
        c14.push(SizeConfigCase::new(c14.len(), p, vec![(1.0, Small); 3], t));
    }
    (c13, c14)
}
