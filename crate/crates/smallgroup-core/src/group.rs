//! Finite groups on dense element indices, surjective homomorphisms,
//! towers of finite quotients and the canonical fiber enumeration.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Element index inside a finite group.
pub type Elem = u32;

/// How much checking `validate_group` performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationLevel {
    /// Closure, identity, inverses and associativity over all triples.
    Full,
    /// Everything except associativity.
    Trusted,
}

impl ValidationLevel {
    /// Default policy: full checks up to order 512.
    pub fn for_order(order: usize) -> Self {
        if order <= 512 {
            ValidationLevel::Full
        } else {
            ValidationLevel::Trusted
        }
    }
}

/// A single violated group axiom together with the offending indices.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum Violation {
    #[error("op({x},{y}) = {value} is not an element index")]
    NonClosure { x: usize, y: usize, value: usize },
    #[error("no two-sided identity element")]
    NoIdentity,
    #[error("element {element} has no inverse")]
    NoInverse { element: usize },
    #[error("({x}*{y})*{z} differs from {x}*({y}*{z})")]
    NonAssociative { x: usize, y: usize, z: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("multiplication table is empty")]
    Empty,
    #[error("row {row} has length {len}, expected {order}")]
    NotSquare { row: usize, len: usize, order: usize },
    #[error("order {0} does not fit element indices")]
    TooLarge(usize),
    #[error("group axioms violated: {}", list_violations(.0))]
    Axioms(Vec<Violation>),
}

fn list_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Debug)]
enum Law {
    Table(Vec<Elem>),
    Cyclic,
    /// Componentwise addition; the last modulus is the least significant digit.
    Abelian(Vec<u32>),
    /// Index `l * |right| + r`.
    Product(Arc<FiniteGroup>, Arc<FiniteGroup>),
}

/// A validated finite group.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    order: usize,
    law: Law,
    identity: Elem,
    inverse: Vec<Elem>,
    label: String,
}

impl FiniteGroup {
    pub fn trivial() -> Self {
        Self::cyclic(1)
    }

    /// Integers modulo `n` under addition.
    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1 && n <= Elem::MAX as usize, "cyclic order out of range");
        let inverse = (0..n).map(|x| ((n - x) % n) as Elem).collect();
        FiniteGroup {
            order: n,
            law: Law::Cyclic,
            identity: 0,
            inverse,
            label: format!("Z/{n}"),
        }
    }

    /// Direct sum of cyclic groups `Z/moduli[0] x ... x Z/moduli[k-1]`.
    pub fn abelian(moduli: &[u32]) -> Self {
        assert!(moduli.iter().all(|&q| q >= 1));
        let order = moduli.iter().map(|&q| q as usize).product::<usize>();
        assert!(order <= Elem::MAX as usize, "abelian order out of range");
        let mut g = FiniteGroup {
            order,
            law: Law::Abelian(moduli.to_vec()),
            identity: 0,
            inverse: Vec::new(),
            label: if moduli.is_empty() {
                "Z/1".to_string()
            } else {
                moduli.iter().map(|q| format!("Z/{q}")).collect::<Vec<_>>().join("x")
            },
        };
        g.inverse = (0..order as Elem).map(|x| g.abelian_neg(moduli, x)).collect();
        g
    }

    /// Direct product `left x right`; element `(l, r)` has index `l * |right| + r`.
    pub fn direct_product(left: Arc<FiniteGroup>, right: Arc<FiniteGroup>) -> Self {
        let order = left.order * right.order;
        assert!(order <= Elem::MAX as usize, "product order out of range");
        let rn = right.order as Elem;
        let inverse = (0..order as Elem)
            .map(|x| left.inverse(x / rn) * rn + right.inverse(x % rn))
            .collect();
        let identity = left.identity * rn + right.identity;
        let label = format!("({})x({})", left.label, right.label);
        FiniteGroup {
            order,
            law: Law::Product(left, right),
            identity,
            inverse,
            label,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> Elem {
        self.identity
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Whether the law is addition modulo the order.
    pub fn is_cyclic_law(&self) -> bool {
        matches!(self.law, Law::Cyclic)
    }

    pub fn is_trivial(&self) -> bool {
        self.order == 1
    }

    #[inline]
    pub fn inverse(&self, x: Elem) -> Elem {
        self.inverse[x as usize]
    }

    #[inline]
    pub fn op(&self, x: Elem, y: Elem) -> Elem {
        match &self.law {
            Law::Cyclic => {
                let s = x as u64 + y as u64;
                let n = self.order as u64;
                (if s >= n { s - n } else { s }) as Elem
            }
            Law::Table(t) => t[x as usize * self.order + y as usize],
            Law::Abelian(m) => self.abelian_add(m, x, y),
            Law::Product(l, r) => {
                let rn = r.order as Elem;
                l.op(x / rn, y / rn) * rn + r.op(x % rn, y % rn)
            }
        }
    }

    fn abelian_add(&self, moduli: &[u32], mut x: Elem, mut y: Elem) -> Elem {
        let mut out = 0u32;
        let mut place = 1u32;
        for &q in moduli.iter().rev() {
            let s = x % q + y % q;
            out += (if s >= q { s - q } else { s }) * place;
            place = place.wrapping_mul(q);
            x /= q;
            y /= q;
        }
        out
    }

    fn abelian_neg(&self, moduli: &[u32], mut x: Elem) -> Elem {
        let mut out = 0u32;
        let mut place = 1u32;
        for &q in moduli.iter().rev() {
            out += ((q - x % q) % q) * place;
            place = place.wrapping_mul(q);
            x /= q;
        }
        out
    }

    /// The full multiplication table.
    pub fn op_table(&self) -> Vec<Vec<Elem>> {
        let n = self.order as Elem;
        (0..n).map(|x| (0..n).map(|y| self.op(x, y)).collect()).collect()
    }

    /// Checks the axioms on this group's own law; used for generated groups in tests.
    pub fn check_axioms(&self, level: ValidationLevel) -> Result<(), GroupError> {
        let table: Vec<Vec<usize>> = self
            .op_table()
            .into_iter()
            .map(|r| r.into_iter().map(|v| v as usize).collect())
            .collect();
        validate_group_with(&table, level).map(|_| ())
    }
}

impl fmt::Display for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (order {})", self.label, self.order)
    }
}

/// Validates a raw multiplication table with the default validation level.
pub fn validate_group(table: &[Vec<usize>]) -> Result<FiniteGroup, GroupError> {
    validate_group_with(table, ValidationLevel::for_order(table.len()))
}

/// Validates a raw multiplication table, reporting every violated axiom.
pub fn validate_group_with(
    table: &[Vec<usize>],
    level: ValidationLevel,
) -> Result<FiniteGroup, GroupError> {
    let n = table.len();
    if n == 0 {
        return Err(GroupError::Empty);
    }
    if n > Elem::MAX as usize {
        return Err(GroupError::TooLarge(n));
    }
    for (row, r) in table.iter().enumerate() {
        if r.len() != n {
            return Err(GroupError::NotSquare { row, len: r.len(), order: n });
        }
    }
    for (x, r) in table.iter().enumerate() {
        for (y, &v) in r.iter().enumerate() {
            if v >= n {
                return Err(GroupError::Axioms(vec![Violation::NonClosure { x, y, value: v }]));
            }
        }
    }

    let mut violations = Vec::new();
    let identity = (0..n).find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x));
    let mut inverse = vec![0 as Elem; n];
    match identity {
        None => violations.push(Violation::NoIdentity),
        Some(e) => {
            for x in 0..n {
                match (0..n).find(|&y| table[x][y] == e && table[y][x] == e) {
                    Some(y) => inverse[x] = y as Elem,
                    None => {
                        violations.push(Violation::NoInverse { element: x });
                        break;
                    }
                }
            }
        }
    }
    if level == ValidationLevel::Full {
        'assoc: for x in 0..n {
            for y in 0..n {
                let xy = table[x][y];
                for z in 0..n {
                    if table[xy][z] != table[x][table[y][z]] {
                        violations.push(Violation::NonAssociative { x, y, z });
                        break 'assoc;
                    }
                }
            }
        }
    }
    if !violations.is_empty() {
        return Err(GroupError::Axioms(violations));
    }
    let flat = table.iter().flat_map(|r| r.iter().map(|&v| v as Elem)).collect();
    Ok(FiniteGroup {
        order: n,
        law: Law::Table(flat),
        identity: identity.unwrap() as Elem,
        inverse,
        label: format!("table({n})"),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HomError {
    #[error("map has length {found}, expected source order {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("map sends {x} to {value}, outside the target")]
    OutOfRange { x: usize, value: usize },
    #[error("map is not a homomorphism at ({x},{y})")]
    NotHomomorphism { x: usize, y: usize },
    #[error("target element {missing} has empty preimage")]
    NotSurjective { missing: usize },
    #[error("fiber over {element} has size {size}, expected {expected}")]
    UnequalFibers { element: usize, size: usize, expected: usize },
}

/// A validated surjective homomorphism with its fibers cached.
#[derive(Clone, Debug)]
pub struct SurjHom {
    source: Arc<FiniteGroup>,
    target: Arc<FiniteGroup>,
    map: Vec<Elem>,
    fibers: Vec<Vec<Elem>>,
}

/// Validates `map` as a surjective homomorphism `source -> target`.
pub fn validate_surjection(
    map: &[usize],
    source: Arc<FiniteGroup>,
    target: Arc<FiniteGroup>,
) -> Result<SurjHom, HomError> {
    SurjHom::build(map, source, target, true)
}

impl SurjHom {
    /// Builds a surjection without the quadratic homomorphism check.
    pub fn trusted(
        map: &[usize],
        source: Arc<FiniteGroup>,
        target: Arc<FiniteGroup>,
    ) -> Result<SurjHom, HomError> {
        SurjHom::build(map, source, target, false)
    }

    fn build(
        map: &[usize],
        source: Arc<FiniteGroup>,
        target: Arc<FiniteGroup>,
        check_hom: bool,
    ) -> Result<SurjHom, HomError> {
        let n = source.order();
        let t = target.order();
        if map.len() != n {
            return Err(HomError::LengthMismatch { expected: n, found: map.len() });
        }
        if let Some((x, &v)) = map.iter().enumerate().find(|(_, &v)| v >= t) {
            return Err(HomError::OutOfRange { x, value: v });
        }
        let map: Vec<Elem> = map.iter().map(|&v| v as Elem).collect();
        if check_hom {
            for x in 0..n as Elem {
                for y in 0..n as Elem {
                    let lhs = map[source.op(x, y) as usize];
                    let rhs = target.op(map[x as usize], map[y as usize]);
                    if lhs != rhs {
                        return Err(HomError::NotHomomorphism { x: x as usize, y: y as usize });
                    }
                }
            }
        }
        let mut fibers = vec![Vec::new(); t];
        for (x, &v) in map.iter().enumerate() {
            fibers[v as usize].push(x as Elem);
        }
        if let Some(missing) = fibers.iter().position(|f| f.is_empty()) {
            return Err(HomError::NotSurjective { missing });
        }
        let expected = n / t;
        if let Some((element, f)) =
            fibers.iter().enumerate().find(|(_, f)| f.len() != expected || n % t != 0)
        {
            return Err(HomError::UnequalFibers { element, size: f.len(), expected });
        }
        Ok(SurjHom { source, target, map, fibers })
    }

    pub fn source(&self) -> &Arc<FiniteGroup> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteGroup> {
        &self.target
    }

    #[inline]
    pub fn apply(&self, x: Elem) -> Elem {
        self.map[x as usize]
    }

    pub fn map(&self) -> &[Elem] {
        &self.map
    }

    /// Preimage of `g`, ascending.
    pub fn fiber(&self, g: Elem) -> &[Elem] {
        &self.fibers[g as usize]
    }

    pub fn fibers(&self) -> &[Vec<Elem>] {
        &self.fibers
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TowerError {
    #[error("a tower needs at least one level")]
    NoLevels,
    #[error("level 0 must be the trivial group, found order {0}")]
    BaseNotTrivial(usize),
    #[error("expected {expected} bonds, found {found}")]
    BondCount { expected: usize, found: usize },
    #[error("bond into level {level} does not connect consecutive levels")]
    BondMismatch { level: usize },
    #[error("|G_{level}| / |G_{prev}| must be an integer greater than 1", prev = .level - 1)]
    NonIncreasing { level: usize },
    #[error("level {level}: {source}")]
    Group { level: usize, source: GroupError },
    #[error("bond from level {level}: {source}")]
    Hom { level: usize, source: HomError },
}

/// Groups `G_0 = {e}, G_1, ..., G_N` with surjections `G_{i+1} -> G_i`.
#[derive(Clone, Debug)]
pub struct Tower {
    groups: Vec<Arc<FiniteGroup>>,
    bonds: Vec<SurjHom>,
    m: Vec<usize>,
}

impl Tower {
    /// `bonds[i]` maps `G_{i+1}` onto `G_i`.
    pub fn new(groups: Vec<Arc<FiniteGroup>>, bonds: Vec<SurjHom>) -> Result<Tower, TowerError> {
        if groups.is_empty() {
            return Err(TowerError::NoLevels);
        }
        if !groups[0].is_trivial() {
            return Err(TowerError::BaseNotTrivial(groups[0].order()));
        }
        if bonds.len() + 1 != groups.len() {
            return Err(TowerError::BondCount { expected: groups.len() - 1, found: bonds.len() });
        }
        let mut m = vec![1];
        for (i, b) in bonds.iter().enumerate() {
            if !Arc::ptr_eq(b.source(), &groups[i + 1]) && b.source().order() != groups[i + 1].order()
                || !Arc::ptr_eq(b.target(), &groups[i]) && b.target().order() != groups[i].order()
            {
                return Err(TowerError::BondMismatch { level: i + 1 });
            }
            let (hi, lo) = (groups[i + 1].order(), groups[i].order());
            if hi % lo != 0 || hi / lo <= 1 {
                return Err(TowerError::NonIncreasing { level: i + 1 });
            }
            m.push(hi / lo);
        }
        Ok(Tower { groups, bonds, m })
    }

    /// Tower from explicit tables and bond maps (`bonds[i]: G_{i+1} -> G_i`).
    pub fn from_tables(
        tables: &[Vec<Vec<usize>>],
        bonds: &[Vec<usize>],
        level: Option<ValidationLevel>,
    ) -> Result<Tower, TowerError> {
        let mut groups = Vec::with_capacity(tables.len());
        for (i, t) in tables.iter().enumerate() {
            let lvl = level.unwrap_or_else(|| ValidationLevel::for_order(t.len()));
            let g = validate_group_with(t, lvl)
                .map_err(|source| TowerError::Group { level: i, source })?;
            groups.push(Arc::new(g));
        }
        if groups.is_empty() {
            return Err(TowerError::NoLevels);
        }
        if bonds.len() + 1 != groups.len() {
            return Err(TowerError::BondCount { expected: groups.len() - 1, found: bonds.len() });
        }
        let mut homs = Vec::with_capacity(bonds.len());
        for (i, map) in bonds.iter().enumerate() {
            let check = level.unwrap_or_else(|| ValidationLevel::for_order(groups[i + 1].order()));
            let h = if check == ValidationLevel::Full {
                validate_surjection(map, groups[i + 1].clone(), groups[i].clone())
            } else {
                SurjHom::trusted(map, groups[i + 1].clone(), groups[i].clone())
            }
            .map_err(|source| TowerError::Hom { level: i + 1, source })?;
            homs.push(h);
        }
        Tower::new(groups, homs)
    }

    /// The sub-tower `H_{indices[0]}, H_{indices[1]}, ...` of a generator.
    pub fn from_generator(gen: &dyn TowerGenerator, indices: &[usize]) -> Result<Tower, TowerError> {
        if indices.first() != Some(&0) {
            return Err(TowerError::BaseNotTrivial(
                indices.first().map(|&k| gen.group(k).order()).unwrap_or(0),
            ));
        }
        let groups: Vec<Arc<FiniteGroup>> = indices.iter().map(|&k| Arc::new(gen.group(k))).collect();
        let mut bonds = Vec::new();
        for w in 1..indices.len() {
            if indices[w] <= indices[w - 1] {
                return Err(TowerError::NonIncreasing { level: w });
            }
            let map: Vec<usize> = gen
                .bond(indices[w], indices[w - 1])
                .into_iter()
                .map(|v| v as usize)
                .collect();
            let h = SurjHom::trusted(&map, groups[w].clone(), groups[w - 1].clone())
                .map_err(|source| TowerError::Hom { level: w, source })?;
            bonds.push(h);
        }
        Tower::new(groups, bonds)
    }

    /// Index of the last level.
    pub fn depth(&self) -> usize {
        self.groups.len() - 1
    }

    pub fn group(&self, i: usize) -> &Arc<FiniteGroup> {
        &self.groups[i]
    }

    pub fn groups(&self) -> &[Arc<FiniteGroup>] {
        &self.groups
    }

    pub fn order(&self, i: usize) -> usize {
        self.groups[i].order()
    }

    /// Fiber size `m_i = |G_i| / |G_{i-1}|`, with `m_0 = 1`.
    pub fn m(&self, i: usize) -> usize {
        self.m[i]
    }

    pub fn ms(&self) -> &[usize] {
        &self.m
    }

    /// The bond `G_i -> G_{i-1}` for `i >= 1`.
    pub fn bond(&self, i: usize) -> &SurjHom {
        &self.bonds[i - 1]
    }

    /// Composite projection `G_from -> G_to` applied to `x` (`to <= from`).
    pub fn project(&self, from: usize, to: usize, mut x: Elem) -> Elem {
        assert!(to <= from);
        for i in (to + 1..=from).rev() {
            x = self.bond(i).apply(x);
        }
        x
    }

    /// The tower cut at level `depth`.
    pub fn truncate(&self, depth: usize) -> Tower {
        Tower {
            groups: self.groups[..=depth].to_vec(),
            bonds: self.bonds[..depth].to_vec(),
            m: self.m[..=depth].to_vec(),
        }
    }

    /// Whether `word` is a compatible element word `(g_0, ..., g_N)`;
    /// returns the first level where the bonding relation fails.
    pub fn incompatibility(&self, word: &[Elem]) -> Option<usize> {
        for i in 0..word.len() {
            if word[i] as usize >= self.order(i) {
                return Some(i);
            }
            if i > 0 && self.bond(i).apply(word[i]) != word[i - 1] {
                return Some(i);
            }
        }
        None
    }
}

/// A sequence `H_0 = {e}, H_1, ...` of finite groups with compatible surjections.
pub trait TowerGenerator: Sync {
    fn label(&self) -> String;
    /// `|H_k|`, or `None` past the end of a finite generator.
    fn order(&self, k: usize) -> Option<BigUint>;
    fn group(&self, k: usize) -> FiniteGroup;
    /// The composite surjection `H_from -> H_to`, `to < from`.
    fn bond(&self, from: usize, to: usize) -> Vec<Elem>;
}

/// `H_k = Z/p^k` with reduction maps.
#[derive(Clone, Debug)]
pub struct CyclicGenerator {
    pub base: u32,
}

impl TowerGenerator for CyclicGenerator {
    fn label(&self) -> String {
        format!("cyclic:{}", self.base)
    }

    fn order(&self, k: usize) -> Option<BigUint> {
        Some(BigUint::from(self.base).pow(k as u32))
    }

    fn group(&self, k: usize) -> FiniteGroup {
        FiniteGroup::cyclic((self.base as usize).pow(k as u32))
    }

    fn bond(&self, from: usize, to: usize) -> Vec<Elem> {
        let n = (self.base as usize).pow(from as u32);
        let q = (self.base as usize).pow(to as u32);
        (0..n).map(|x| (x % q) as Elem).collect()
    }
}

/// `H_k = F^k` with projection onto the first `k - 1` factors.
#[derive(Clone, Debug)]
pub struct ProductGenerator {
    pub factor: Arc<FiniteGroup>,
}

impl ProductGenerator {
    pub fn cyclic(q: u32) -> Self {
        ProductGenerator { factor: Arc::new(FiniteGroup::cyclic(q as usize)) }
    }
}

impl TowerGenerator for ProductGenerator {
    fn label(&self) -> String {
        format!("product:{}", self.factor.label())
    }

    fn order(&self, k: usize) -> Option<BigUint> {
        Some(BigUint::from(self.factor.order()).pow(k as u32))
    }

    fn group(&self, k: usize) -> FiniteGroup {
        if let Law::Cyclic = self.factor.law {
            let q = self.factor.order() as u32;
            return FiniteGroup::abelian(&vec![q; k]).with_label(format!("(Z/{q})^{k}"));
        }
        let mut g = Arc::new(FiniteGroup::trivial());
        for _ in 0..k {
            g = Arc::new(FiniteGroup::direct_product(g, self.factor.clone()));
        }
        Arc::try_unwrap(g).unwrap_or_else(|a| (*a).clone())
    }

    fn bond(&self, from: usize, to: usize) -> Vec<Elem> {
        let f = self.factor.order();
        let n = f.pow(from as u32);
        let drop = f.pow((from - to) as u32);
        (0..n).map(|x| (x / drop) as Elem).collect()
    }
}

impl TowerGenerator for Tower {
    fn label(&self) -> String {
        let orders: Vec<String> = self.groups.iter().map(|g| g.order().to_string()).collect();
        format!("tower[{}]", orders.join(","))
    }

    fn order(&self, k: usize) -> Option<BigUint> {
        (k <= self.depth()).then(|| BigUint::from(self.order(k)))
    }

    fn group(&self, k: usize) -> FiniteGroup {
        (*self.groups[k]).clone()
    }

    fn bond(&self, from: usize, to: usize) -> Vec<Elem> {
        (0..self.order(from) as Elem).map(|x| self.project(from, to, x)).collect()
    }
}

/// Ordered fibers of every bond together with the coordinate maps `psi_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberEnumeration {
    levels: Vec<LevelFibers>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct LevelFibers {
    /// `fibers[g][k-1] = g^(k)` for `g` in `G_{i-1}`; level 0 has the single fiber `[0]`.
    fibers: Vec<Vec<Elem>>,
    /// `psi[x] = k` iff `x` lies in class `k` (1-based).
    psi: Vec<u32>,
}

/// Orders each fiber ascending, except that the identity fiber starts with the identity.
pub fn enumerate_fibers(tower: &Tower) -> FiberEnumeration {
    let mut levels = vec![LevelFibers { fibers: vec![vec![0]], psi: vec![1] }];
    for i in 1..=tower.depth() {
        let bond = tower.bond(i);
        let e_lo = tower.group(i - 1).identity();
        let e_hi = tower.group(i).identity();
        let mut fibers: Vec<Vec<Elem>> = bond.fibers().to_vec();
        for f in fibers.iter_mut() {
            f.sort_unstable();
        }
        let ef = &mut fibers[e_lo as usize];
        let pos = ef.iter().position(|&x| x == e_hi).expect("identity lies in the identity fiber");
        let e = ef.remove(pos);
        ef.insert(0, e);
        let mut psi = vec![0u32; tower.order(i)];
        for f in &fibers {
            for (k, &x) in f.iter().enumerate() {
                psi[x as usize] = k as u32 + 1;
            }
        }
        levels.push(LevelFibers { fibers, psi });
    }
    FiberEnumeration { levels }
}

impl FiberEnumeration {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Number of classes at level `i`.
    pub fn m(&self, i: usize) -> usize {
        self.levels[i].fibers[0].len()
    }

    /// The ordered fiber over `g` in `G_{i-1}`.
    pub fn fiber(&self, i: usize, g: Elem) -> &[Elem] {
        &self.levels[i].fibers[g as usize]
    }

    /// `g^(k)`, the `k`-th member (1-based) of the fiber over `g`.
    #[inline]
    pub fn member(&self, i: usize, g: Elem, k: u32) -> Elem {
        self.levels[i].fibers[g as usize][k as usize - 1]
    }

    /// `psi_i(x)`.
    #[inline]
    pub fn psi(&self, i: usize, x: Elem) -> u32 {
        self.levels[i].psi[x as usize]
    }

    pub fn psi_table(&self, i: usize) -> &[u32] {
        &self.levels[i].psi
    }

    /// The class `G_i^(k)`, listed by base element.
    pub fn class(&self, i: usize, k: u32) -> Vec<Elem> {
        self.levels[i].fibers.iter().map(|f| f[k as usize - 1]).collect()
    }

    /// Number of elements in each class, `|G_{i-1}|`.
    pub fn class_size(&self, i: usize) -> usize {
        self.levels[i].fibers.len()
    }
}

/// Serialized description of a tower.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TowerSpec {
    Tables {
        levels: Vec<TableLevel>,
        bonds: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        validation: Option<ValidationLevel>,
    },
    Generated(GeneratedTower),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableLevel {
    pub order: usize,
    pub table: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "lowercase")]
pub enum GeneratedTower {
    /// `Z/base^e` for each exponent.
    Cyclic { base: u32, exponents: Vec<usize> },
    /// `F^k` for `k = 0..=depth`, with `F` cyclic of order `factor` or given by `table`.
    Product {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        factor: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<Vec<Vec<usize>>>,
        depth: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("level {level}: declared order {declared} but table has {actual} rows")]
    OrderMismatch { level: usize, declared: usize, actual: usize },
    #[error("invalid generator: {0}")]
    Generator(String),
    #[error(transparent)]
    Tower(#[from] TowerError),
}

impl TowerSpec {
    /// Parses the short forms `cyclic:P:E0,E1,...` and `product:Q:DEPTH`.
    pub fn parse_short(s: &str) -> Result<TowerSpec, SpecError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || SpecError::Generator(s.to_string());
        match parts.as_slice() {
            ["cyclic", p, exps] => {
                let base = p.parse().map_err(|_| bad())?;
                let exponents = exps
                    .split(',')
                    .map(|e| e.trim().parse())
                    .collect::<Result<Vec<usize>, _>>()
                    .map_err(|_| bad())?;
                Ok(TowerSpec::Generated(GeneratedTower::Cyclic { base, exponents }))
            }
            ["product", q, d] => Ok(TowerSpec::Generated(GeneratedTower::Product {
                factor: Some(q.parse().map_err(|_| bad())?),
                table: None,
                depth: d.parse().map_err(|_| bad())?,
            })),
            _ => Err(bad()),
        }
    }

    pub fn build(&self) -> Result<Tower, SpecError> {
        match self {
            TowerSpec::Tables { levels, bonds, validation } => {
                for (i, l) in levels.iter().enumerate() {
                    if l.order != l.table.len() {
                        return Err(SpecError::OrderMismatch {
                            level: i,
                            declared: l.order,
                            actual: l.table.len(),
                        });
                    }
                }
                let tables: Vec<Vec<Vec<usize>>> = levels.iter().map(|l| l.table.clone()).collect();
                Ok(Tower::from_tables(&tables, bonds, *validation)?)
            }
            TowerSpec::Generated(g) => {
                let gen = g.generator()?;
                let indices = g.indices();
                Ok(Tower::from_generator(gen.as_ref(), &indices)?)
            }
        }
    }
}

impl GeneratedTower {
    pub fn generator(&self) -> Result<Box<dyn TowerGenerator>, SpecError> {
        match self {
            GeneratedTower::Cyclic { base, .. } => {
                if *base < 2 {
                    return Err(SpecError::Generator(format!("cyclic base {base} must be at least 2")));
                }
                Ok(Box::new(CyclicGenerator { base: *base }))
            }
            GeneratedTower::Product { factor, table, .. } => match (factor, table) {
                (Some(q), None) if *q >= 2 => Ok(Box::new(ProductGenerator::cyclic(*q))),
                (None, Some(t)) => {
                    let f = validate_group(t).map_err(|e| SpecError::Generator(e.to_string()))?;
                    if f.order() < 2 {
                        return Err(SpecError::Generator("factor must be nontrivial".into()));
                    }
                    Ok(Box::new(ProductGenerator { factor: Arc::new(f) }))
                }
                _ => Err(SpecError::Generator(
                    "product needs exactly one of factor >= 2 or table".into(),
                )),
            },
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        match self {
            GeneratedTower::Cyclic { exponents, .. } => exponents.clone(),
            GeneratedTower::Product { depth, .. } => (0..=*depth).collect(),
        }
    }
}

/// Parses a generator name such as `cyclic:2`, `product:3`.
pub fn parse_generator(s: &str) -> Result<Box<dyn TowerGenerator>, SpecError> {
    let bad = || SpecError::Generator(s.to_string());
    let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
    let n: u32 = arg.parse().map_err(|_| bad())?;
    if n < 2 {
        return Err(bad());
    }
    match kind {
        "cyclic" => Ok(Box::new(CyclicGenerator { base: n })),
        "product" => Ok(Box::new(ProductGenerator::cyclic(n))),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z4_tower() -> Tower {
        TowerSpec::parse_short("cyclic:2:0,1,2").unwrap().build().unwrap()
    }

    #[test]
    fn trivial_table() {
        let g = validate_group(&[vec![0]]).unwrap();
        assert_eq!(g.order(), 1);
        assert_eq!(g.identity(), 0);
    }

    #[test]
    fn z4_table_is_a_group() {
        let t: Vec<Vec<usize>> = (0..4).map(|x| (0..4).map(|y| (x + y) % 4).collect()).collect();
        let g = validate_group(&t).unwrap();
        assert_eq!(g.order(), 4);
        assert_eq!(g.inverse(1), 3);
    }

    #[test]
    fn monoid_without_inverse() {
        let err = validate_group(&[vec![0, 1], vec![1, 1]]).unwrap_err();
        assert_eq!(err, GroupError::Axioms(vec![Violation::NoInverse { element: 1 }]));
    }

    #[test]
    fn out_of_range_entry() {
        let err = validate_group(&[vec![0, 2], vec![1, 0]]).unwrap_err();
        assert_eq!(err, GroupError::Axioms(vec![Violation::NonClosure { x: 0, y: 1, value: 2 }]));
    }

    #[test]
    fn all_violations_listed() {
        // Left-zero semigroup on {0,1,2} patched so that nothing is an identity,
        // and a non-associative quasigroup on {0,1,2}.
        let t = vec![vec![1, 0, 2], vec![0, 2, 1], vec![2, 1, 1]];
        match validate_group(&t).unwrap_err() {
            GroupError::Axioms(v) => {
                assert!(v.contains(&Violation::NoIdentity));
                assert!(v.iter().any(|x| matches!(x, Violation::NonAssociative { .. })));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn trusted_skips_associativity() {
        // Commutative loop of order 5 with identity 0 that is not associative.
        let t = vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ];
        assert!(matches!(
            validate_group_with(&t, ValidationLevel::Full),
            Err(GroupError::Axioms(_))
        ));
        assert!(validate_group_with(&t, ValidationLevel::Trusted).is_ok());
    }

    #[test]
    fn mod_two_map() {
        let z4 = Arc::new(FiniteGroup::cyclic(4));
        let z2 = Arc::new(FiniteGroup::cyclic(2));
        let h = validate_surjection(&[0, 1, 0, 1], z4, z2).unwrap();
        assert_eq!(h.fiber(0), &[0, 2]);
        assert_eq!(h.fiber(1), &[1, 3]);
    }

    #[test]
    fn identity_map() {
        let z2 = Arc::new(FiniteGroup::cyclic(2));
        let h = validate_surjection(&[0, 1], z2.clone(), z2).unwrap();
        assert_eq!(h.fiber(1), &[1]);
    }

    #[test]
    fn constant_map_misses_one() {
        let z4 = Arc::new(FiniteGroup::cyclic(4));
        let z2 = Arc::new(FiniteGroup::cyclic(2));
        let err = validate_surjection(&[0, 0, 0, 0], z4, z2).unwrap_err();
        assert_eq!(err, HomError::NotSurjective { missing: 1 });
    }

    #[test]
    fn non_homomorphism_detected() {
        let z4 = Arc::new(FiniteGroup::cyclic(4));
        let z2 = Arc::new(FiniteGroup::cyclic(2));
        let err = validate_surjection(&[0, 0, 1, 1], z4, z2).unwrap_err();
        assert!(matches!(err, HomError::NotHomomorphism { .. }));
    }

    #[test]
    fn fibers_of_z2() {
        let t = TowerSpec::parse_short("cyclic:2:0,1").unwrap().build().unwrap();
        let f = enumerate_fibers(&t);
        assert_eq!(f.fiber(1, 0), &[0, 1]);
        assert_eq!(f.class(1, 1), vec![0]);
        assert_eq!(f.class(1, 2), vec![1]);
    }

    #[test]
    fn fibers_of_z4() {
        let t = z4_tower();
        let f = enumerate_fibers(&t);
        assert_eq!(f.fiber(2, 0), &[0, 2]);
        assert_eq!(f.fiber(2, 1), &[1, 3]);
        assert_eq!(f.class(2, 1), vec![0, 1]);
        assert_eq!(f.class(2, 2), vec![2, 3]);
        for i in 0..=2 {
            assert_eq!(f.psi(i, 0), 1);
        }
    }

    #[test]
    fn identity_moved_to_front() {
        // Z/4 with identity relabelled to index 2 (x -> x + 2).
        let t: Vec<Vec<usize>> =
            (0..4).map(|x| (0..4).map(|y| (x + y + 2) % 4).collect()).collect();
        let z2: Vec<Vec<usize>> = vec![vec![0, 1], vec![1, 0]];
        let tower = Tower::from_tables(&[vec![vec![0]], z2, t], &[vec![0, 0], vec![0, 1, 0, 1]], None)
            .unwrap();
        assert_eq!(tower.group(2).identity(), 2);
        let f = enumerate_fibers(&tower);
        assert_eq!(f.fiber(2, 0), &[2, 0]);
        assert_eq!(f.psi(2, 2), 1);
    }

    #[test]
    fn product_generator_projects() {
        let g = ProductGenerator::cyclic(2);
        let t = Tower::from_generator(&g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(t.ms(), &[1, 2, 2, 2]);
        assert_eq!(t.project(3, 1, 0b101), 1);
        let f = enumerate_fibers(&t);
        assert_eq!(f.class(3, 2), vec![1, 3, 5, 7]);
    }

    #[test]
    fn generated_groups_satisfy_axioms() {
        FiniteGroup::abelian(&[2, 3, 4]).check_axioms(ValidationLevel::Full).unwrap();
        let s3 = symmetric3();
        let p = FiniteGroup::direct_product(Arc::new(FiniteGroup::cyclic(2)), Arc::new(s3));
        p.check_axioms(ValidationLevel::Full).unwrap();
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"generator":"cyclic","base":2,"exponents":[0,1,2]}"#;
        let spec: TowerSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, TowerSpec::parse_short("cyclic:2:0,1,2").unwrap());
        let t = spec.build().unwrap();
        assert_eq!(t.ms(), &[1, 2, 2]);
        let tables = r#"{"levels":[{"order":1,"table":[[0]]},{"order":2,"table":[[0,1],[1,0]]}],"bonds":[[0,0]]}"#;
        let t: TowerSpec = serde_json::from_str(tables).unwrap();
        assert_eq!(t.build().unwrap().order(1), 2);
    }

    #[test]
    fn incompatible_word_detected() {
        let t = z4_tower();
        assert_eq!(t.incompatibility(&[0, 1, 3]), None);
        assert_eq!(t.incompatibility(&[0, 1, 2]), Some(2));
    }

    pub(crate) fn symmetric3() -> FiniteGroup {
        // Permutations of {0,1,2} in lexicographic order.
        let perms: Vec<[usize; 3]> =
            vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
        let t: Vec<Vec<usize>> = perms
            .iter()
            .map(|a| perms.iter().map(|b| idx([a[b[0]], a[b[1]], a[b[2]]])).collect())
            .collect();
        validate_group(&t).unwrap()
    }
}
