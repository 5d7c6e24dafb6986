//! Dimensional analysis with the Buckingham π theorem.
//!
//! Quantities carry exponent vectors over a configurable set of base
//! dimensions (force, length and time by default). A set of repeating
//! quantities is checked against the rank of the dimension matrix, and every
//! remaining quantity is turned into a dimensionless group by solving the
//! homogeneous dimension equation exactly.
//!
//! Exponents are generic over any exact field; [`crate::Rational`] is the
//! usual choice. Area is not a base dimension: register it as `L^2`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::ops::Neg;
use std::path::Path;

use num_traits::Num;

use crate::error::{Error, Result};
use crate::Rational;

/// Exponent field for dimension vectors.
pub trait Exponent: Num + Neg<Output = Self> + Clone + fmt::Debug + fmt::Display + Send + Sync {}

impl<T> Exponent for T where T: Num + Neg<Output = T> + Clone + fmt::Debug + fmt::Display + Send + Sync {}

/// Exponents of a quantity over named base dimensions.
///
/// Only nonzero exponents are stored, so derived equality is exact equality
/// of the exponent maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionVector<E> {
    exponents: BTreeMap<String, E>,
}

impl<E: Exponent> Default for DimensionVector<E> {
    fn default() -> Self {
        Self::dimensionless()
    }
}

impl<E: Exponent> DimensionVector<E> {
    pub fn dimensionless() -> Self {
        DimensionVector {
            exponents: BTreeMap::new(),
        }
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, E)>) -> Self {
        let mut v = Self::dimensionless();
        for (base, e) in pairs {
            v.add_exponent(base.as_ref(), e);
        }
        v
    }

    /// Exponent of `base`, zero when absent.
    pub fn get(&self, base: &str) -> E {
        self.exponents.get(base).cloned().unwrap_or_else(E::zero)
    }

    pub fn is_dimensionless(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn bases(&self) -> impl Iterator<Item = &str> {
        self.exponents.keys().map(String::as_str)
    }

    fn add_exponent(&mut self, base: &str, e: E) {
        let sum = self.get(base) + e;
        if sum.is_zero() {
            self.exponents.remove(base);
        } else {
            self.exponents.insert(base.to_string(), sum);
        }
    }

    /// `self + power * other`, i.e. the dimensions of `self · other^power`.
    pub fn add_scaled(&self, other: &Self, power: &E) -> Self {
        let mut out = self.clone();
        for (base, e) in &other.exponents {
            out.add_exponent(base, e.clone() * power.clone());
        }
        out
    }
}

impl<E: Exponent> fmt::Display for DimensionVector<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponents.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .exponents
            .iter()
            .map(|(b, e)| {
                if e.is_one() {
                    b.clone()
                } else {
                    format!("{b}^{e}")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantity<E> {
    pub name: String,
    pub symbol: String,
    pub dims: DimensionVector<E>,
}

impl<E: Exponent> Quantity<E> {
    pub fn new(symbol: impl Into<String>, name: impl Into<String>, dims: DimensionVector<E>) -> Self {
        Quantity {
            name: name.into(),
            symbol: symbol.into(),
            dims,
        }
    }
}

/// Dimensionless product of quantity powers.
///
/// The target quantity carries exponent one and comes first; repeating
/// quantities follow in registration order. Zero exponents are kept so the
/// full solution is visible; use [`PiGroup::nonzero`] for the compact form.
#[derive(Debug, Clone, PartialEq)]
pub struct PiGroup<E> {
    pub label: String,
    pub target: String,
    pub exponents: Vec<(String, E)>,
}

impl<E: Exponent> PiGroup<E> {
    pub fn exponent(&self, symbol: &str) -> E {
        self.exponents
            .iter()
            .find(|(s, _)| s == symbol)
            .map(|(_, e)| e.clone())
            .unwrap_or_else(E::zero)
    }

    pub fn nonzero(&self) -> Vec<(String, E)> {
        self.exponents
            .iter()
            .filter(|(_, e)| !e.is_zero())
            .cloned()
            .collect()
    }

    pub fn exponent_map(&self) -> BTreeMap<String, E> {
        self.nonzero().into_iter().collect()
    }
}

impl<E: Exponent> fmt::Display for PiGroup<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .nonzero()
            .into_iter()
            .map(|(s, e)| if e.is_one() { s } else { format!("{s}^{e}") })
            .collect();
        write!(f, "{} = {}", self.label, parts.join(" "))
    }
}

/// Why a repeating set was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RepeatingDiagnostic {
    PredictandRepeating(String),
    DuplicateRepeating(String),
    WrongCount { rank: usize, found: usize },
    Dependent(Vec<String>),
}

impl fmt::Display for RepeatingDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepeatingDiagnostic::PredictandRepeating(s) => {
                write!(f, "predictand {s} is in the repeating set")
            }
            RepeatingDiagnostic::DuplicateRepeating(s) => write!(f, "{s} listed twice"),
            RepeatingDiagnostic::WrongCount { rank, found } => write!(
                f,
                "repeating set has {found} quantities but the dimension matrix has rank {rank}"
            ),
            RepeatingDiagnostic::Dependent(s) => {
                write!(f, "dimension vectors of {} are linearly dependent", s.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RepeatingCheck {
    Valid,
    Invalid(Vec<RepeatingDiagnostic>),
}

impl RepeatingCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self, RepeatingCheck::Valid)
    }
}

/// Registered quantities plus the choice of repeating quantities.
#[derive(Debug, Clone)]
pub struct QuantitySystem<E> {
    base_dims: Vec<String>,
    quantities: Vec<Quantity<E>>,
    repeating: Vec<String>,
    predictand: Option<String>,
    labels: BTreeMap<String, String>,
}

impl<E: Exponent> QuantitySystem<E> {
    pub fn new<S: Into<String>>(base_dims: impl IntoIterator<Item = S>) -> Self {
        QuantitySystem {
            base_dims: base_dims.into_iter().map(Into::into).collect(),
            quantities: Vec::new(),
            repeating: Vec::new(),
            predictand: None,
            labels: BTreeMap::new(),
        }
    }

    /// Force, length, time.
    pub fn flt() -> Self {
        Self::new(["F", "L", "T"])
    }

    pub fn add(&mut self, q: Quantity<E>) -> Result<()> {
        if self.quantities.iter().any(|x| x.symbol == q.symbol) {
            return Err(Error::DuplicateSymbol(q.symbol));
        }
        if let Some(b) = q.dims.bases().find(|b| !self.base_dims.iter().any(|d| d == b)) {
            return Err(Error::InvalidInput(format!(
                "quantity {} uses base dimension {b} outside {:?}",
                q.symbol, self.base_dims
            )));
        }
        self.quantities.push(q);
        Ok(())
    }

    pub fn with(mut self, q: Quantity<E>) -> Result<Self> {
        self.add(q)?;
        Ok(self)
    }

    pub fn set_repeating<S: AsRef<str>>(&mut self, symbols: impl IntoIterator<Item = S>) -> Result<()> {
        let symbols: Vec<String> = symbols.into_iter().map(|s| s.as_ref().to_string()).collect();
        for s in &symbols {
            self.quantity(s)?;
        }
        self.repeating = symbols;
        Ok(())
    }

    pub fn set_predictand(&mut self, symbol: &str) -> Result<()> {
        self.quantity(symbol)?;
        self.predictand = Some(symbol.to_string());
        Ok(())
    }

    /// Attaches a display label to the group derived for `symbol`.
    pub fn set_label(&mut self, symbol: &str, label: impl Into<String>) -> Result<()> {
        self.quantity(symbol)?;
        self.labels.insert(symbol.to_string(), label.into());
        Ok(())
    }

    pub fn base_dims(&self) -> &[String] {
        &self.base_dims
    }

    pub fn quantities(&self) -> &[Quantity<E>] {
        &self.quantities
    }

    pub fn repeating(&self) -> &[String] {
        &self.repeating
    }

    pub fn predictand(&self) -> Option<&str> {
        self.predictand.as_deref()
    }

    pub fn quantity(&self, symbol: &str) -> Result<&Quantity<E>> {
        self.quantities
            .iter()
            .find(|q| q.symbol == symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))
    }

    fn column(&self, dims: &DimensionVector<E>) -> Vec<E> {
        self.base_dims.iter().map(|b| dims.get(b)).collect()
    }

    /// Rank of the base-dimension × quantity matrix.
    pub fn rank(&self) -> usize {
        let cols: Vec<Vec<E>> = self.quantities.iter().map(|q| self.column(&q.dims)).collect();
        rank_of(&cols, self.base_dims.len())
    }
}

/// Rank of the matrix whose columns are `cols` (each of length `rows`).
fn rank_of<E: Exponent>(cols: &[Vec<E>], rows: usize) -> usize {
    // Row-major copy: rows = base dims, columns = vectors.
    let mut m: Vec<Vec<E>> = (0..rows)
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect();
    let ncols = cols.len();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let factor = m[r][col].clone() / m[rank][col].clone();
                for c in col..ncols {
                    let v = m[rank][c].clone() * factor.clone();
                    m[r][c] = m[r][c].clone() - v;
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Solves `A x = b` exactly for an `rows × n` system with independent
/// columns. Returns `None` when the system is inconsistent.
fn solve_exact<E: Exponent>(cols: &[Vec<E>], rhs: &[E]) -> Option<Vec<E>> {
    let rows = rhs.len();
    let n = cols.len();
    let mut m: Vec<Vec<E>> = (0..rows)
        .map(|r| {
            let mut row: Vec<E> = cols.iter().map(|c| c[r].clone()).collect();
            row.push(rhs[r].clone());
            row
        })
        .collect();
    let mut pivot_cols = Vec::with_capacity(n);
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pv = m[rank][col].clone();
        for c in col..=n {
            m[rank][c] = m[rank][c].clone() / pv.clone();
        }
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..=n {
                    let v = m[rank][c].clone() * factor.clone();
                    m[r][c] = m[r][c].clone() - v;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    if (rank..rows).any(|r| !m[r][n].is_zero()) {
        return None;
    }
    let mut x = vec![E::zero(); n];
    for (r, &c) in pivot_cols.iter().enumerate() {
        x[c] = m[r][n].clone();
    }
    Some(x)
}

/// Dimensions of `Π Q_i^{a_i}`.
pub fn dimension_product<E: Exponent, S: AsRef<str>>(
    system: &QuantitySystem<E>,
    exponents: impl IntoIterator<Item = (S, E)>,
) -> Result<DimensionVector<E>> {
    let mut acc = DimensionVector::dimensionless();
    for (sym, a) in exponents {
        let q = system.quantity(sym.as_ref())?;
        acc = acc.add_scaled(&q.dims, &a);
    }
    Ok(acc)
}

/// Checks the repeating set: excludes the predictand, matches the rank of the
/// dimension matrix, and has linearly independent dimension vectors.
pub fn validate_repeating<E: Exponent>(system: &QuantitySystem<E>) -> RepeatingCheck {
    let mut diags = Vec::new();
    if let Some(p) = system.predictand() {
        if system.repeating.iter().any(|s| s == p) {
            diags.push(RepeatingDiagnostic::PredictandRepeating(p.to_string()));
        }
    }
    let mut seen = HashSet::new();
    for s in &system.repeating {
        if !seen.insert(s.as_str()) {
            diags.push(RepeatingDiagnostic::DuplicateRepeating(s.clone()));
        }
    }
    let rank = system.rank();
    if system.repeating.len() != rank {
        diags.push(RepeatingDiagnostic::WrongCount {
            rank,
            found: system.repeating.len(),
        });
    }
    let cols: Vec<Vec<E>> = system
        .repeating
        .iter()
        .filter_map(|s| system.quantity(s).ok())
        .map(|q| system.column(&q.dims))
        .collect();
    if rank_of(&cols, system.base_dims.len()) < cols.len() {
        diags.push(RepeatingDiagnostic::Dependent(system.repeating.clone()));
    }
    if diags.is_empty() {
        RepeatingCheck::Valid
    } else {
        RepeatingCheck::Invalid(diags)
    }
}

fn require_valid<E: Exponent>(system: &QuantitySystem<E>) -> Result<()> {
    match validate_repeating(system) {
        RepeatingCheck::Valid => Ok(()),
        RepeatingCheck::Invalid(d) => Err(Error::InvalidRepeating(
            d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        )),
    }
}

fn derive_unchecked<E: Exponent>(system: &QuantitySystem<E>, target: &str) -> Result<PiGroup<E>> {
    let q = system.quantity(target)?;
    if system.repeating.iter().any(|s| s == target) {
        return Err(Error::InvalidInput(format!("{target} is a repeating quantity")));
    }
    let cols: Vec<Vec<E>> = system
        .repeating
        .iter()
        .map(|s| system.quantity(s).map(|r| system.column(&r.dims)))
        .collect::<Result<_>>()?;
    let rhs: Vec<E> = system.column(&q.dims).into_iter().map(|e| -e).collect();
    let x = solve_exact(&cols, &rhs).ok_or_else(|| Error::SingularSystem {
        target: target.to_string(),
    })?;

    // Repeating exponents listed in registration order.
    let mut exponents = vec![(target.to_string(), E::one())];
    for reg in &system.quantities {
        if let Some(i) = system.repeating.iter().position(|s| *s == reg.symbol) {
            exponents.push((reg.symbol.clone(), x[i].clone()));
        }
    }
    let label = system
        .labels
        .get(target)
        .cloned()
        .unwrap_or_else(|| format!("pi[{target}]"));
    Ok(PiGroup {
        label,
        target: target.to_string(),
        exponents,
    })
}

/// Dimensionless group with exponent one on `target`.
pub fn derive_pi_group<E: Exponent>(system: &QuantitySystem<E>, target: &str) -> Result<PiGroup<E>> {
    require_valid(system)?;
    derive_unchecked(system, target)
}

/// One group per non-repeating quantity, in registration order.
pub fn derive_pi_system<E: Exponent>(system: &QuantitySystem<E>) -> Result<Vec<PiGroup<E>>> {
    require_valid(system)?;
    system
        .quantities
        .iter()
        .filter(|q| !system.repeating.contains(&q.symbol))
        .map(|q| derive_unchecked(system, &q.symbol))
        .collect()
}

fn r(n: i64) -> Rational {
    Rational::from_integer(n)
}

fn flt(f: i64, l: i64, t: i64) -> DimensionVector<Rational> {
    DimensionVector::from_pairs([("F", r(f)), ("L", r(l)), ("T", r(t))])
}

/// Quantities of the accumulated-damage model: damage rate, damage, stress,
/// short-term strength, reference failure time, stress rate and the three
/// specimen sizes. Repeating set {Q4, Q5, Q9}, predictand Q1.
///
/// Width is Q7 and Thickness is Q8. The stress rate Q6 has dimensions
/// `F L^-2 T^-1`.
pub fn table1() -> QuantitySystem<Rational> {
    let rows = [
        ("Q1", "damage rate", flt(0, 0, -1), "pi1"),
        ("Q2", "damage", flt(0, 0, 0), "pi2"),
        ("Q3", "stress", flt(1, -2, 0), "pi3"),
        ("Q4", "short-term strength", flt(1, -2, 0), "pi4"),
        ("Q5", "mean failure time", flt(0, 0, 1), "pi5"),
        ("Q6", "stress rate", flt(1, -2, -1), "pi6"),
        ("Q7", "width", flt(0, 1, 0), "pi7"),
        ("Q8", "thickness", flt(0, 1, 0), "pi8"),
        ("Q9", "length", flt(0, 1, 0), "pi9"),
    ];
    let mut sys = QuantitySystem::flt();
    for (sym, name, dims, label) in rows {
        sys.add(Quantity::new(sym, name, dims)).expect("preset symbols are unique");
        sys.set_label(sym, label).expect("registered above");
    }
    sys.set_repeating(["Q4", "Q5", "Q9"]).expect("registered above");
    sys.set_predictand("Q1").expect("registered above");
    sys
}

/// Drag force on an immersed body: force, length, velocity, density and
/// viscosity over {F, L, T}; repeating {L, V, rho}.
pub fn fluid_drag() -> QuantitySystem<Rational> {
    let rows = [
        ("Fd", "drag force", flt(1, 0, 0)),
        ("L", "body length", flt(0, 1, 0)),
        ("V", "velocity", flt(0, 1, -1)),
        ("rho", "density", flt(1, -4, 2)),
        ("mu", "viscosity", flt(1, -2, 1)),
    ];
    let mut sys = QuantitySystem::flt();
    for (sym, name, dims) in rows {
        sys.add(Quantity::new(sym, name, dims)).expect("preset symbols are unique");
    }
    sys.set_repeating(["L", "V", "rho"]).expect("registered above");
    sys.set_predictand("Fd").expect("registered above");
    sys
}

/// Reads a quantity table with header `symbol,name,<base dims...>`
/// (conventionally `symbol,name,F,L,T`). Exponents are integers or `p/q`.
pub fn read_quantities<R: Read>(reader: R, source: &str) -> Result<QuantitySystem<Rational>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "symbol" || &headers[1] != "name" {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 1,
            message: "header must start with `symbol,name`".into(),
        });
    }
    let bases: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut sys = QuantitySystem::new(bases.clone());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        if rec.len() != headers.len() {
            return Err(parse_err(format!("expected {} fields, found {}", headers.len(), rec.len())));
        }
        let mut dims = DimensionVector::dimensionless();
        for (i, base) in bases.iter().enumerate() {
            let raw = &rec[i + 2];
            let e: Rational = if raw.is_empty() {
                r(0)
            } else {
                raw.parse()
                    .map_err(|_| parse_err(format!("bad exponent `{raw}` for {base}")))?
            };
            dims = dims.add_scaled(&DimensionVector::from_pairs([(base.as_str(), r(1))]), &e);
        }
        sys.add(Quantity::new(&rec[0], &rec[1], dims))
            .map_err(|e| parse_err(e.to_string()))?;
    }
    Ok(sys)
}

pub fn load_quantities(path: &Path) -> Result<QuantitySystem<Rational>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_quantities(f, &path.display().to_string())
}

/// Writes groups as CSV `group,symbol,exponent`, nonzero exponents only.
pub fn write_pi_groups<W: Write, E: Exponent>(writer: W, groups: &[PiGroup<E>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "symbol", "exponent"])?;
    for g in groups {
        for (sym, e) in g.nonzero() {
            w.write_record([g.label.as_str(), sym.as_str(), &e.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<pi-groups output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn map(pairs: &[(&str, i64)]) -> BTreeMap<String, Rational> {
        pairs.iter().map(|(s, e)| (s.to_string(), r(*e))).collect()
    }

    #[test]
    fn dimension_product_examples() {
        let sys = table1();
        let z = dimension_product(&sys, [("Q3", r(1)), ("Q4", r(-1))]).unwrap();
        assert!(z.is_dimensionless());
        let empty: [(&str, Rational); 0] = [];
        assert!(dimension_product(&sys, empty).unwrap().is_dimensionless());
        let rate = dimension_product(&sys, [("Q1", r(1))]).unwrap();
        assert_eq!(rate, DimensionVector::from_pairs([("T", r(-1))]));
        assert!(matches!(
            dimension_product(&sys, [("Q42", r(1))]),
            Err(Error::UnknownSymbol(_))
        ));
    }

    #[test]
    fn absent_bases_read_as_zero() {
        let v = DimensionVector::from_pairs([("F", r(1)), ("L", r(0))]);
        assert_eq!(v.get("L"), r(0));
        assert_eq!(v, DimensionVector::from_pairs([("F", r(1))]));
    }

    #[test]
    fn table1_repeating_checks() {
        let mut sys = table1();
        assert!(validate_repeating(&sys).is_valid());

        sys.set_repeating(["Q4", "Q3", "Q9"]).unwrap();
        let RepeatingCheck::Invalid(d) = validate_repeating(&sys) else {
            panic!("Q3 and Q4 share dimensions")
        };
        assert!(d.iter().any(|x| matches!(x, RepeatingDiagnostic::Dependent(_))));

        sys.set_repeating(["Q1", "Q4", "Q9"]).unwrap();
        let RepeatingCheck::Invalid(d) = validate_repeating(&sys) else {
            panic!("predictand cannot repeat")
        };
        assert!(d.contains(&RepeatingDiagnostic::PredictandRepeating("Q1".into())));

        sys.set_repeating(["Q4", "Q5"]).unwrap();
        let RepeatingCheck::Invalid(d) = validate_repeating(&sys) else {
            panic!("too few repeating quantities")
        };
        assert!(d.contains(&RepeatingDiagnostic::WrongCount { rank: 3, found: 2 }));
    }

    #[test]
    fn derive_individual_groups() {
        let sys = table1();
        let g1 = derive_pi_group(&sys, "Q1").unwrap();
        assert_eq!(g1.exponent_map(), map(&[("Q1", 1), ("Q5", 1)]));
        assert_eq!(g1.exponent("Q4"), r(0));
        assert_eq!(g1.exponent("Q9"), r(0));

        let g2 = derive_pi_group(&sys, "Q2").unwrap();
        assert_eq!(g2.exponent_map(), map(&[("Q2", 1)]));

        let g6 = derive_pi_group(&sys, "Q6").unwrap();
        assert_eq!(g6.exponent_map(), map(&[("Q6", 1), ("Q4", -1), ("Q5", 1)]));
        assert_eq!(g6.label, "pi6");
    }

    #[test]
    fn derive_rejects_repeating_target_and_bad_sets() {
        let mut sys = table1();
        assert!(derive_pi_group(&sys, "Q4").is_err());
        sys.set_repeating(["Q4", "Q3", "Q9"]).unwrap();
        assert!(matches!(derive_pi_group(&sys, "Q1"), Err(Error::InvalidRepeating(_))));
    }

    #[test]
    fn singular_when_target_outside_span() {
        // Base set includes M, which no repeating quantity carries.
        let mut sys = QuantitySystem::new(["M", "L"]);
        sys.add(Quantity::new("x", "length", DimensionVector::from_pairs([("L", r(1))])))
            .unwrap();
        sys.add(Quantity::new("m", "mass", DimensionVector::from_pairs([("M", r(1))])))
            .unwrap();
        sys.set_repeating(["x"]).unwrap();
        // Rank is 2, so validation fails before solving.
        assert!(derive_pi_group(&sys, "m").is_err());
        let err = derive_unchecked(&sys, "m").unwrap_err();
        assert!(matches!(err, Error::SingularSystem { ref target } if target == "m"));
    }

    #[test]
    fn table1_system_matches_expected_groups() {
        let groups = derive_pi_system(&table1()).unwrap();
        let got: Vec<(String, BTreeMap<String, Rational>)> =
            groups.iter().map(|g| (g.label.clone(), g.exponent_map())).collect();
        let want = vec![
            ("pi1".to_string(), map(&[("Q1", 1), ("Q5", 1)])),
            ("pi2".to_string(), map(&[("Q2", 1)])),
            ("pi3".to_string(), map(&[("Q3", 1), ("Q4", -1)])),
            ("pi6".to_string(), map(&[("Q6", 1), ("Q4", -1), ("Q5", 1)])),
            ("pi7".to_string(), map(&[("Q7", 1), ("Q9", -1)])),
            ("pi8".to_string(), map(&[("Q8", 1), ("Q9", -1)])),
        ];
        assert_eq!(got, want);
        for g in &groups {
            assert!(dimension_product(&table1(), g.exponents.clone()).unwrap().is_dimensionless());
        }
    }

    #[test]
    fn single_dimensionless_quantity() {
        let mut sys = QuantitySystem::<Rational>::flt();
        sys.add(Quantity::new("a", "ratio", DimensionVector::dimensionless())).unwrap();
        let groups = derive_pi_system(&sys).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].nonzero(), vec![("a".to_string(), r(1))]);
    }

    #[test]
    fn fluid_groups_are_drag_coefficient_and_reynolds() {
        let groups = derive_pi_system(&fluid_drag()).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(
            groups[0].exponent_map(),
            map(&[("Fd", 1), ("L", -2), ("V", -2), ("rho", -1)])
        );
        // mu / (rho V L) = 1 / Re
        assert_eq!(groups[1].exponent_map(), map(&[("mu", 1), ("L", -1), ("V", -1), ("rho", -1)]));
    }

    #[test]
    fn fractional_exponents_solve_exactly() {
        // Repeating quantity with dimension L^2 forces half-integer exponents.
        let mut sys = QuantitySystem::<Rational>::flt();
        sys.add(Quantity::new("A", "area", DimensionVector::from_pairs([("L", r(2))])))
            .unwrap();
        sys.add(Quantity::new("d", "depth", DimensionVector::from_pairs([("L", r(1))])))
            .unwrap();
        sys.set_repeating(["A"]).unwrap();
        let g = derive_pi_group(&sys, "d").unwrap();
        assert_eq!(g.exponent("A"), q(-1, 2));
    }

    #[test]
    fn csv_roundtrip_of_table1() {
        let text = "symbol,name,F,L,T\n\
            Q1,damage rate,0,0,-1\nQ2,damage,0,0,0\nQ3,stress,1,-2,0\nQ4,strength,1,-2,0\n\
            Q5,mean time,0,0,1\nQ6,stress rate,1,-2,-1\nQ7,width,0,1,0\nQ8,thickness,0,1,0\n\
            Q9,length,0,1,0\n";
        let mut sys = read_quantities(text.as_bytes(), "inline").unwrap();
        sys.set_repeating(["Q4", "Q5", "Q9"]).unwrap();
        let groups = derive_pi_system(&sys).unwrap();
        assert_eq!(groups.len(), 6);
        let mut out = Vec::new();
        write_pi_groups(&mut out, &groups).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("group,symbol,exponent\n"));
        assert!(s.contains("pi[Q6],Q4,-1\n"));
    }

    #[test]
    fn csv_parse_errors_carry_line() {
        let text = "symbol,name,F,L,T\nQ1,rate,0,0,-1\nQ2,bad,x,0,0\n";
        match read_quantities(text.as_bytes(), "t.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let rational = "symbol,name,F,L,T\nQ1,odd,1/2,-3/2,0\n";
        let sys = read_quantities(rational.as_bytes(), "t.csv").unwrap();
        assert_eq!(sys.quantity("Q1").unwrap().dims.get("L"), q(-3, 2));
    }
}
