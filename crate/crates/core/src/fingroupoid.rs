//! Exact finite groupoids: axiom validation, morphisms and kernels, normal
//! subgroupoids, normal subgroupoid systems, and both quotient constructions.
//!
//! Objects and arrows are dense ids `0..n`. The partial multiplication is a
//! hash table keyed by composable pairs; asking for a non-composable product
//! is an error rather than an absent value.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Arrow = usize;
pub type Object = usize;
pub type ArrowSet = BTreeSet<Arrow>;

/// On-disk groupoid tables. `mul` lists `[g, h, gh]` triples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupoidTables {
    pub objects: usize,
    pub arrows: usize,
    pub src: Vec<Object>,
    pub tgt: Vec<Object>,
    pub unit: Vec<Arrow>,
    pub inv: Vec<Arrow>,
    pub mul: Vec<[Arrow; 3]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub axiom: String,
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport { valid: violations.is_empty(), violations }
    }

    pub fn has(&self, axiom: &str) -> bool {
        self.violations.iter().any(|v| v.axiom == axiom)
    }
}

/// Caps the number of witnesses recorded per axiom.
const MAX_WITNESSES: usize = 16;

#[derive(Default)]
struct Collector {
    out: Vec<Violation>,
    counts: HashMap<&'static str, usize>,
}

impl Collector {
    fn push(&mut self, axiom: &'static str, witness: Vec<usize>) {
        let c = self.counts.entry(axiom).or_insert(0);
        if *c < MAX_WITNESSES {
            self.out.push(Violation { axiom: axiom.to_string(), witness });
        }
        *c += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroupoid {
    n_objects: usize,
    src: Vec<Object>,
    tgt: Vec<Object>,
    unit: Vec<Arrow>,
    inv: Vec<Arrow>,
    mul: HashMap<(Arrow, Arrow), Arrow>,
}

impl FiniteGroupoid {
    /// Builds a groupoid from raw tables, checking only structure: ids in
    /// range and `mul` defined exactly on the composable pairs.
    pub fn from_tables(t: &GroupoidTables) -> Result<Self> {
        let n = t.arrows;
        let p = t.objects;
        let len_ok = t.src.len() == n && t.tgt.len() == n && t.inv.len() == n && t.unit.len() == p;
        if !len_ok {
            return Err(Error::Structural(format!(
                "table lengths (src {}, tgt {}, inv {}, unit {}) do not match {} arrows / {} objects",
                t.src.len(),
                t.tgt.len(),
                t.inv.len(),
                t.unit.len(),
                n,
                p
            )));
        }
        for (name, table, bound) in [("src", &t.src, p), ("tgt", &t.tgt, p), ("inv", &t.inv, n), ("unit", &t.unit, n)] {
            if let Some((i, v)) = table.iter().enumerate().find(|(_, &v)| v >= bound) {
                return Err(Error::Structural(format!("{name}[{i}] = {v} out of range (< {bound})")));
            }
        }
        let mut mul = HashMap::with_capacity(t.mul.len());
        for &[g, h, gh] in &t.mul {
            if g >= n || h >= n || gh >= n {
                return Err(Error::Structural(format!("mul entry [{g}, {h}, {gh}] out of range")));
            }
            if t.src[g] != t.tgt[h] {
                return Err(Error::Structural(format!("mul entry for non-composable pair ({g}, {h})")));
            }
            if let Some(prev) = mul.insert((g, h), gh) {
                if prev != gh {
                    return Err(Error::Structural(format!("conflicting mul entries for ({g}, {h})")));
                }
            }
        }
        for g in 0..n {
            for h in 0..n {
                if t.src[g] == t.tgt[h] && !mul.contains_key(&(g, h)) {
                    return Err(Error::Structural(format!("mul missing composable pair ({g}, {h})")));
                }
            }
        }
        Ok(FiniteGroupoid { n_objects: p, src: t.src.clone(), tgt: t.tgt.clone(), unit: t.unit.clone(), inv: t.inv.clone(), mul })
    }

    pub fn to_tables(&self) -> GroupoidTables {
        let mut mul: Vec<[Arrow; 3]> = self.mul.iter().map(|(&(g, h), &gh)| [g, h, gh]).collect();
        mul.sort_unstable();
        GroupoidTables {
            objects: self.n_objects,
            arrows: self.src.len(),
            src: self.src.clone(),
            tgt: self.tgt.clone(),
            unit: self.unit.clone(),
            inv: self.inv.clone(),
            mul,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: GroupoidTables = serde_json::from_str(s)?;
        FiniteGroupoid::from_tables(&t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_tables()).expect("tables serialize")
    }

    /// Pair groupoid on `n` objects; arrow `(a, b)` has id `a * n + b`,
    /// target `a`, source `b`.
    pub fn pair(n: usize) -> Self {
        let id = |a: usize, b: usize| a * n + b;
        let mut t = GroupoidTables {
            objects: n,
            arrows: n * n,
            src: vec![0; n * n],
            tgt: vec![0; n * n],
            unit: (0..n).map(|a| id(a, a)).collect(),
            inv: vec![0; n * n],
            mul: Vec::new(),
        };
        for a in 0..n {
            for b in 0..n {
                t.tgt[id(a, b)] = a;
                t.src[id(a, b)] = b;
                t.inv[id(a, b)] = id(b, a);
                for c in 0..n {
                    t.mul.push([id(a, b), id(b, c), id(a, c)]);
                }
            }
        }
        FiniteGroupoid::from_tables(&t).expect("pair groupoid tables are well formed")
    }

    /// Disjoint union of `objects` copies of ℤ/`order`; arrow `(p, x)` has id
    /// `p * order + x`.
    pub fn cyclic_bundle(order: usize, objects: usize) -> Self {
        let id = |p: usize, x: usize| p * order + x;
        let n = order * objects;
        let mut t = GroupoidTables {
            objects,
            arrows: n,
            src: vec![0; n],
            tgt: vec![0; n],
            unit: (0..objects).map(|p| id(p, 0)).collect(),
            inv: vec![0; n],
            mul: Vec::new(),
        };
        for p in 0..objects {
            for x in 0..order {
                t.src[id(p, x)] = p;
                t.tgt[id(p, x)] = p;
                t.inv[id(p, x)] = id(p, (order - x) % order);
                for y in 0..order {
                    t.mul.push([id(p, x), id(p, y), id(p, (x + y) % order)]);
                }
            }
        }
        FiniteGroupoid::from_tables(&t).expect("cyclic bundle tables are well formed")
    }

    /// ℤ/`order` as a one-object groupoid.
    pub fn cyclic_group(order: usize) -> Self {
        FiniteGroupoid::cyclic_bundle(order, 1)
    }

    /// Product groupoid; arrow `(x, y)` has id `x * b.arrows() + y` and object
    /// `(p, q)` has id `p * b.objects() + q`.
    pub fn product(a: &FiniteGroupoid, b: &FiniteGroupoid) -> Self {
        let (na, nb) = (a.arrows(), b.arrows());
        let (pa, pb) = (a.objects(), b.objects());
        let arrow = |x: usize, y: usize| x * nb + y;
        let object = |p: usize, q: usize| p * pb + q;
        let mut t = GroupoidTables {
            objects: pa * pb,
            arrows: na * nb,
            src: vec![0; na * nb],
            tgt: vec![0; na * nb],
            unit: vec![0; pa * pb],
            inv: vec![0; na * nb],
            mul: Vec::new(),
        };
        for p in 0..pa {
            for q in 0..pb {
                t.unit[object(p, q)] = arrow(a.unit(p), b.unit(q));
            }
        }
        for x in 0..na {
            for y in 0..nb {
                let g = arrow(x, y);
                t.src[g] = object(a.src(x), b.src(y));
                t.tgt[g] = object(a.tgt(x), b.tgt(y));
                t.inv[g] = arrow(a.inv(x), b.inv(y));
            }
        }
        for (&(x1, x2), &x) in &a.mul {
            for (&(y1, y2), &y) in &b.mul {
                t.mul.push([arrow(x1, y1), arrow(x2, y2), arrow(x, y)]);
            }
        }
        FiniteGroupoid::from_tables(&t).expect("product of well-formed tables is well formed")
    }

    pub fn objects(&self) -> usize {
        self.n_objects
    }

    pub fn arrows(&self) -> usize {
        self.src.len()
    }

    pub fn src(&self, g: Arrow) -> Object {
        self.src[g]
    }

    pub fn tgt(&self, g: Arrow) -> Object {
        self.tgt[g]
    }

    pub fn unit(&self, p: Object) -> Arrow {
        self.unit[p]
    }

    pub fn inv(&self, g: Arrow) -> Arrow {
        self.inv[g]
    }

    pub fn is_unit(&self, g: Arrow) -> bool {
        self.unit.contains(&g)
    }

    pub fn composable(&self, g: Arrow, h: Arrow) -> bool {
        self.src[g] == self.tgt[h]
    }

    /// `g ⋆ h`; an error when `s(g) ≠ t(h)`.
    pub fn mul(&self, g: Arrow, h: Arrow) -> Result<Arrow> {
        self.mul.get(&(g, h)).copied().ok_or_else(|| Error::Precondition(format!("arrows {g} and {h} are not composable")))
    }

    fn try_mul(&self, g: Arrow, h: Arrow) -> Option<Arrow> {
        self.mul.get(&(g, h)).copied()
    }

    /// Arrows from `q` to `p` (target `p`, source `q`).
    pub fn hom(&self, p: Object, q: Object) -> Vec<Arrow> {
        (0..self.arrows()).filter(|&g| self.tgt[g] == p && self.src[g] == q).collect()
    }

    /// Checks axioms (i)–(v) exhaustively, plus the cancellation
    /// consequences that make units and inverses unique.
    pub fn validate(&self) -> ValidationReport {
        let n = self.arrows();
        let mut c = Collector::default();
        for p in 0..self.n_objects {
            let u = self.unit[p];
            if self.src[u] != p || self.tgt[u] != p {
                c.push("iii", vec![p, u]);
            }
        }
        for g in 0..n {
            for h in 0..n {
                if let Some(gh) = self.try_mul(g, h) {
                    if self.src[gh] != self.src[h] || self.tgt[gh] != self.tgt[g] {
                        c.push("i", vec![g, h, gh]);
                    }
                    for l in 0..n {
                        if self.src[h] != self.tgt[l] {
                            continue;
                        }
                        let lhs = self.try_mul(gh, l);
                        let rhs = self.try_mul(h, l).and_then(|hl| self.try_mul(g, hl));
                        if lhs.is_none() || lhs != rhs {
                            c.push("ii", vec![g, h, l]);
                        }
                    }
                }
            }
            let right = self.try_mul(g, self.unit[self.src[g]]);
            let left = self.try_mul(self.unit[self.tgt[g]], g);
            if right != Some(g) || left != Some(g) {
                c.push("iv", vec![g]);
            }
            let gi = self.inv[g];
            let ok = self.src[gi] == self.tgt[g]
                && self.tgt[gi] == self.src[g]
                && self.try_mul(g, gi) == Some(self.unit[self.tgt[g]])
                && self.try_mul(gi, g) == Some(self.unit[self.src[g]]);
            if !ok {
                c.push("v", vec![g, gi]);
            }
        }
        for g in 0..n {
            let (sg, tg) = (self.src[g], self.tgt[g]);
            for h in 0..n {
                if self.src[h] == tg {
                    if let Some(hg) = self.try_mul(h, g) {
                        if hg == g && h != self.unit[tg] {
                            c.push("unicity_left_unit", vec![h, g]);
                        }
                        if hg == self.unit[sg] && h != self.inv[g] {
                            c.push("unicity_left_inverse", vec![h, g]);
                        }
                    }
                }
                if self.tgt[h] == sg {
                    if let Some(gl) = self.try_mul(g, h) {
                        if gl == g && h != self.unit[sg] {
                            c.push("unicity_right_unit", vec![g, h]);
                        }
                        if gl == self.unit[tg] && h != self.inv[g] {
                            c.push("unicity_right_inverse", vec![g, h]);
                        }
                    }
                }
            }
        }
        ValidationReport::from_violations(c.out)
    }

    /// First failing closure property of a would-be wide subgroupoid.
    fn wide_subgroupoid_failure(&self, n: &ArrowSet) -> Option<String> {
        if let Some(&g) = n.iter().find(|&&g| g >= self.arrows()) {
            return Some(format!("arrow {g} out of range"));
        }
        if let Some(p) = (0..self.n_objects).find(|&p| !n.contains(&self.unit[p])) {
            return Some(format!("not wide: unit of object {p} missing"));
        }
        if let Some(&g) = n.iter().find(|&&g| !n.contains(&self.inv[g])) {
            return Some(format!("not closed under inversion: inverse of {g} missing"));
        }
        for &g in n {
            for &h in n {
                if let Some(gh) = self.try_mul(g, h) {
                    if !n.contains(&gh) {
                        return Some(format!("not closed under multiplication: {g} * {h} = {gh} missing"));
                    }
                }
            }
        }
        None
    }

    pub fn check_wide_subgroupoid(&self, n: &ArrowSet) -> Result<()> {
        match self.wide_subgroupoid_failure(n) {
            None => Ok(()),
            Some(msg) => Err(Error::Precondition(msg)),
        }
    }

    fn object_relation_classes(&self, n: &ArrowSet) -> UnionFind {
        let mut uf = UnionFind::new(self.n_objects);
        for &g in n {
            uf.union(self.tgt[g], self.src[g]);
        }
        uf
    }

    /// Coset `gN = {g ⋆ n | n ∈ N, t(n) = s(g)}`.
    pub fn coset(&self, g: Arrow, n: &ArrowSet) -> Vec<Arrow> {
        let mut out: Vec<Arrow> =
            n.iter().filter_map(|&k| if self.tgt[k] == self.src[g] { self.try_mul(g, k) } else { None }).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Canonical coset representative: the minimal arrow id in `gN`.
    pub fn coset_rep(&self, g: Arrow, n: &ArrowSet) -> Arrow {
        self.coset(g, n).into_iter().min().unwrap_or(g)
    }
}

/// Result of checking normality: `Err` only when `N` is not a wide
/// subgroupoid; a failing conjugation is returned as a witness `(n, g)`.
pub fn is_normal_subgroupoid(g: &FiniteGroupoid, n: &ArrowSet) -> Result<(bool, Option<(Arrow, Arrow)>)> {
    g.check_wide_subgroupoid(n)?;
    for &k in n {
        if g.src(k) != g.tgt(k) {
            continue;
        }
        for x in 0..g.arrows() {
            if g.src(x) != g.src(k) {
                continue;
            }
            let conj = g.mul(g.mul(x, k)?, g.inv(x))?;
            if !n.contains(&conj) {
                return Ok((false, Some((k, x))));
            }
        }
    }
    Ok((true, None))
}

/// A groupoid morphism `(F, f)` given by its arrow and object tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteMorphism {
    pub arrow_map: Vec<Arrow>,
    pub object_map: Vec<Object>,
}

impl FiniteMorphism {
    pub fn identity(g: &FiniteGroupoid) -> Self {
        FiniteMorphism { arrow_map: (0..g.arrows()).collect(), object_map: (0..g.objects()).collect() }
    }

    /// Checks `s'∘F = f∘s`, `t'∘F = f∘t` and `F(gh) = F(g)F(h)`.
    pub fn validate(&self, from: &FiniteGroupoid, to: &FiniteGroupoid) -> Result<ValidationReport> {
        if self.arrow_map.len() != from.arrows() || self.object_map.len() != from.objects() {
            return Err(Error::Structural("morphism tables do not match the source groupoid".into()));
        }
        if self.arrow_map.iter().any(|&a| a >= to.arrows()) || self.object_map.iter().any(|&p| p >= to.objects()) {
            return Err(Error::Structural("morphism maps outside the target groupoid".into()));
        }
        let mut c = Collector::default();
        for g in 0..from.arrows() {
            let fg = self.arrow_map[g];
            if to.src(fg) != self.object_map[from.src(g)] {
                c.push("source", vec![g]);
            }
            if to.tgt(fg) != self.object_map[from.tgt(g)] {
                c.push("target", vec![g]);
            }
            for h in 0..from.arrows() {
                if let Some(gh) = from.try_mul(g, h) {
                    let fh = self.arrow_map[h];
                    if to.try_mul(fg, fh) != Some(self.arrow_map[gh]) {
                        c.push("multiplicative", vec![g, h]);
                    }
                }
            }
        }
        Ok(ValidationReport::from_violations(c.out))
    }
}

/// Kernel `K = {g | F(g) is a unit}`; asserts that it is normal.
pub fn kernel_of_morphism(from: &FiniteGroupoid, to: &FiniteGroupoid, f: &FiniteMorphism) -> Result<ArrowSet> {
    let report = f.validate(from, to)?;
    if !report.valid {
        return Err(Error::Precondition(format!("not a morphism: {:?}", report.violations[0])));
    }
    let k: ArrowSet = (0..from.arrows()).filter(|&g| to.is_unit(f.arrow_map[g])).collect();
    match is_normal_subgroupoid(from, &k)? {
        (true, _) => Ok(k),
        (false, w) => Err(Error::Internal(format!("kernel is not normal, witness {w:?}"))),
    }
}

/// A quotient groupoid together with its projection morphism.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quotient {
    pub groupoid: FiniteGroupoid,
    pub projection: FiniteMorphism,
}

/// Quotient `G/∼ ⇉ P/∼∘` by a normal subgroupoid.
pub fn quotient_by_normal_subgroupoid(g: &FiniteGroupoid, n: &ArrowSet) -> Result<Quotient> {
    match is_normal_subgroupoid(g, n)? {
        (true, _) => {}
        (false, w) => return Err(Error::Precondition(format!("N is not normal, witness {w:?}"))),
    }
    let mut objs = g.object_relation_classes(n);
    let mut arrows = UnionFind::new(g.arrows());
    for h in 0..g.arrows() {
        for &n1 in n.iter().filter(|&&k| g.src(k) == g.tgt(h)) {
            let left = g.mul(n1, h)?;
            for &n2 in n.iter().filter(|&&k| g.tgt(k) == g.src(h)) {
                arrows.union(h, g.mul(left, n2)?);
            }
        }
    }
    let (arrow_class, n_arrow_classes) = arrows.labels();
    let (object_class, n_object_classes) = objs.labels();

    // [g][h] = [g n h] for any n ∈ N from t(h) to s(g); checked over every choice.
    let mut mul: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for a in 0..g.arrows() {
        for b in 0..g.arrows() {
            if object_class[g.src(a)] != object_class[g.tgt(b)] {
                continue;
            }
            for &k in n.iter().filter(|&&k| g.tgt(k) == g.src(a) && g.src(k) == g.tgt(b)) {
                let prod = arrow_class[g.mul(g.mul(a, k)?, b)?];
                let key = (arrow_class[a], arrow_class[b]);
                if let Some(prev) = mul.insert(key, prod) {
                    if prev != prod {
                        return Err(Error::Internal(format!("induced multiplication not well defined at classes {key:?}")));
                    }
                }
            }
        }
    }
    build_quotient(g, &arrow_class, n_arrow_classes, &object_class, n_object_classes, mul)
}

fn build_quotient(
    g: &FiniteGroupoid,
    arrow_class: &[usize],
    n_arrow_classes: usize,
    object_class: &[usize],
    n_object_classes: usize,
    mul: BTreeMap<(usize, usize), usize>,
) -> Result<Quotient> {
    let mut src = vec![usize::MAX; n_arrow_classes];
    let mut tgt = vec![usize::MAX; n_arrow_classes];
    let mut inv = vec![usize::MAX; n_arrow_classes];
    let mut unit = vec![usize::MAX; n_object_classes];
    let set = |table: &mut Vec<usize>, i: usize, v: usize, what: &str| -> Result<()> {
        if table[i] != usize::MAX && table[i] != v {
            return Err(Error::Internal(format!("induced {what} not well defined at class {i}")));
        }
        table[i] = v;
        Ok(())
    };
    for a in 0..g.arrows() {
        let c = arrow_class[a];
        set(&mut src, c, object_class[g.src(a)], "source")?;
        set(&mut tgt, c, object_class[g.tgt(a)], "target")?;
        set(&mut inv, c, arrow_class[g.inv(a)], "inverse")?;
    }
    for p in 0..g.objects() {
        set(&mut unit, object_class[p], arrow_class[g.unit(p)], "unit")?;
    }
    let tables = GroupoidTables {
        objects: n_object_classes,
        arrows: n_arrow_classes,
        src,
        tgt,
        unit,
        inv,
        mul: mul.into_iter().map(|((a, b), c)| [a, b, c]).collect(),
    };
    let groupoid = FiniteGroupoid::from_tables(&tables).map_err(|e| Error::Internal(format!("quotient tables: {e}")))?;
    let projection = FiniteMorphism { arrow_map: arrow_class.to_vec(), object_map: object_class.to_vec() };
    let report = projection.validate(g, &groupoid)?;
    if !report.valid {
        return Err(Error::Internal(format!("projection is not a morphism: {:?}", report.violations)));
    }
    let axioms = groupoid.validate();
    if !axioms.valid {
        return Err(Error::Internal(format!("quotient violates axioms: {:?}", axioms.violations)));
    }
    Ok(Quotient { groupoid, projection })
}

/// On-disk form of a normal subgroupoid system: `theta` lists
/// `[p, q, g, h]` meaning `θ((p,q), gN) = hN`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NssTables {
    pub n: Vec<Arrow>,
    pub r: Vec<[Object; 2]>,
    pub theta: Vec<[usize; 4]>,
}

/// `(N, R, θ)` with θ stored on canonical coset representatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalSubgroupoidSystem {
    n: ArrowSet,
    r: BTreeSet<(Object, Object)>,
    theta: BTreeMap<(Object, Object, Arrow), Arrow>,
}

impl NormalSubgroupoidSystem {
    /// Checks the preconditions (N a wide subgroupoid, R an equivalence
    /// relation, θ total and well defined on cosets) and canonicalises θ.
    pub fn new(g: &FiniteGroupoid, tables: &NssTables) -> Result<Self> {
        let n: ArrowSet = tables.n.iter().copied().collect();
        g.check_wide_subgroupoid(&n)?;
        let r: BTreeSet<(Object, Object)> = tables.r.iter().map(|&[p, q]| (p, q)).collect();
        let np = g.objects();
        if r.iter().any(|&(p, q)| p >= np || q >= np) {
            return Err(Error::Structural("relation refers to unknown object".into()));
        }
        for p in 0..np {
            if !r.contains(&(p, p)) {
                return Err(Error::Precondition(format!("R not reflexive at {p}")));
            }
        }
        for &(p, q) in &r {
            if !r.contains(&(q, p)) {
                return Err(Error::Precondition(format!("R not symmetric at ({p}, {q})")));
            }
            for &(q2, l) in r.range((q, 0)..(q + 1, 0)) {
                debug_assert_eq!(q2, q);
                if !r.contains(&(p, l)) {
                    return Err(Error::Precondition(format!("R not transitive at ({p}, {q}, {l})")));
                }
            }
        }
        let mut theta = BTreeMap::new();
        for &[p, q, a, b] in &tables.theta {
            if a >= g.arrows() || b >= g.arrows() {
                return Err(Error::Structural(format!("theta entry [{p}, {q}, {a}, {b}] out of range")));
            }
            if !r.contains(&(p, q)) {
                return Err(Error::Precondition(format!("theta entry uses ({p}, {q}) outside R")));
            }
            if g.tgt(a) != q {
                return Err(Error::Precondition(format!("theta entry [{p}, {q}, {a}, {b}]: J(gN) = {} ≠ {q}", g.tgt(a))));
            }
            let key = (p, q, g.coset_rep(a, &n));
            let val = g.coset_rep(b, &n);
            if let Some(prev) = theta.insert(key, val) {
                if prev != val {
                    return Err(Error::ThetaNotWellDefined(format!(
                        "θ(({p}, {q}), {}N) given as both {prev}N and {val}N",
                        key.2
                    )));
                }
            }
        }
        let reps: BTreeSet<Arrow> = (0..g.arrows()).map(|a| g.coset_rep(a, &n)).collect();
        for &(p, q) in &r {
            for &a in reps.iter().filter(|&&a| g.tgt(a) == q) {
                if !theta.contains_key(&(p, q, a)) {
                    return Err(Error::Precondition(format!("theta not total: missing (({p}, {q}), {a}N)")));
                }
            }
        }
        Ok(NormalSubgroupoidSystem { n, r, theta })
    }

    /// The trivial system: units, the diagonal relation, identity action.
    pub fn trivial(g: &FiniteGroupoid) -> Self {
        let tables = NssTables {
            n: (0..g.objects()).map(|p| g.unit(p)).collect(),
            r: (0..g.objects()).map(|p| [p, p]).collect(),
            theta: (0..g.arrows()).map(|a| [g.tgt(a), g.tgt(a), a, a]).collect(),
        };
        NormalSubgroupoidSystem::new(g, &tables).expect("trivial system is valid")
    }

    pub fn n(&self) -> &ArrowSet {
        &self.n
    }

    pub fn relation(&self) -> &BTreeSet<(Object, Object)> {
        &self.r
    }

    /// Canonical representative of `θ((p,q), aN)`.
    pub fn theta(&self, g: &FiniteGroupoid, p: Object, q: Object, a: Arrow) -> Option<Arrow> {
        self.theta.get(&(p, q, g.coset_rep(a, &self.n))).copied()
    }

    pub fn to_tables(&self) -> NssTables {
        NssTables {
            n: self.n.iter().copied().collect(),
            r: self.r.iter().map(|&(p, q)| [p, q]).collect(),
            theta: self.theta.iter().map(|(&(p, q, a), &b)| [p, q, a, b]).collect(),
        }
    }
}

/// Exhaustively checks conditions 1–3 of a normal subgroupoid system plus
/// the action axioms of θ (unit, compatibility, `J(θ((p,q), gN)) = p`).
pub fn validate_nss(g: &FiniteGroupoid, nss: &NormalSubgroupoidSystem) -> Result<ValidationReport> {
    let mut c = Collector::default();
    let n = nss.n();
    let rep = |a: Arrow| g.coset_rep(a, n);
    for &(p, q) in nss.relation() {
        for a in (0..g.arrows()).filter(|&a| g.tgt(a) == q) {
            let Some(b) = nss.theta(g, p, q, a) else {
                return Err(Error::Precondition(format!("theta undefined at (({p}, {q}), {a}N)")));
            };
            if g.tgt(b) != p {
                c.push("action_anchor", vec![p, q, a]);
            }
            if p == q && b != rep(a) {
                c.push("action_unit", vec![p, a]);
            }
            for &(l, p2) in nss.relation().iter().filter(|&&(_, p2)| p2 == p) {
                let via = nss.theta(g, l, p, b);
                let direct = nss.theta(g, l, q, a);
                if via.is_none() || via != direct {
                    c.push("action_compatibility", vec![l, p2, q, a]);
                }
            }
            // condition 1: (s(h), s(g)) ∈ R for every h in θ((p,q), gN)
            for h in g.coset(b, n) {
                if !nss.relation().contains(&(g.src(h), g.src(a))) {
                    c.push("nss_condition_1", vec![p, q, a, h]);
                }
            }
            // condition 3
            for gp in g.coset(b, n) {
                if !nss.relation().contains(&(g.src(gp), g.src(a))) {
                    continue;
                }
                for h in (0..g.arrows()).filter(|&h| g.tgt(h) == g.src(a)) {
                    let Some(hp_rep) = nss.theta(g, g.src(gp), g.src(a), h) else {
                        c.push("nss_condition_3", vec![p, q, a, h]);
                        continue;
                    };
                    let lhs = nss.theta(g, p, q, g.mul(a, h)?);
                    for hp in g.coset(hp_rep, n) {
                        let rhs = rep(g.mul(gp, hp)?);
                        if lhs != Some(rhs) {
                            c.push("nss_condition_3", vec![p, q, a, h, gp, hp]);
                        }
                    }
                }
            }
        }
        // condition 2: θ((p,q), qN) = pN
        if nss.theta(g, p, q, g.unit(q)) != Some(rep(g.unit(p))) {
            c.push("nss_condition_2", vec![p, q]);
        }
    }
    Ok(ValidationReport::from_violations(c.out))
}

/// Quotient `G/𝒮 ⇉ P/R` by a validated normal subgroupoid system.
pub fn quotient_by_nss(g: &FiniteGroupoid, nss: &NormalSubgroupoidSystem) -> Result<Quotient> {
    let report = validate_nss(g, nss)?;
    if !report.valid {
        return Err(Error::Precondition(format!("invalid system: {:?}", report.violations.first())));
    }
    let n = nss.n();
    let mut arrows = UnionFind::new(g.arrows());
    for h in 0..g.arrows() {
        for a in 0..g.arrows() {
            let key = (g.tgt(h), g.tgt(a));
            if nss.relation().contains(&key) && nss.theta(g, key.0, key.1, a) == Some(g.coset_rep(h, n)) {
                arrows.union(h, a);
            }
        }
    }
    let mut objs = UnionFind::new(g.objects());
    for &(p, q) in nss.relation() {
        objs.union(p, q);
    }
    let (arrow_class, n_arrow_classes) = arrows.labels();
    let (object_class, n_object_classes) = objs.labels();

    // <gN> ⋆ <hN> = <g h' N> with h'N = θ((s(g), t(h)), hN)
    let mut mul: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for a in 0..g.arrows() {
        for b in 0..g.arrows() {
            if !nss.relation().contains(&(g.src(a), g.tgt(b))) {
                continue;
            }
            let hp_rep = nss.theta(g, g.src(a), g.tgt(b), b).ok_or_else(|| Error::Internal("theta not total".into()))?;
            for hp in g.coset(hp_rep, n) {
                let prod = arrow_class[g.mul(a, hp)?];
                let key = (arrow_class[a], arrow_class[b]);
                if let Some(prev) = mul.insert(key, prod) {
                    if prev != prod {
                        return Err(Error::Internal(format!("quotient multiplication ill defined at {key:?}")));
                    }
                }
            }
        }
    }
    build_quotient(g, &arrow_class, n_arrow_classes, &object_class, n_object_classes, mul)
}

/// Exact isomorphism search by backtracking. Returns the object and arrow
/// bijections when one exists.
pub fn find_isomorphism(a: &FiniteGroupoid, b: &FiniteGroupoid) -> Option<FiniteMorphism> {
    if a.arrows() != b.arrows() || a.objects() != b.objects() {
        return None;
    }
    let inv_a = arrow_invariants(a);
    let inv_b = arrow_invariants(b);
    let mut ms_a = inv_a.clone();
    let mut ms_b = inv_b.clone();
    ms_a.sort_unstable();
    ms_b.sort_unstable();
    if ms_a != ms_b {
        return None;
    }
    let mut obj_map = vec![usize::MAX; a.objects()];
    let mut used_obj = vec![false; b.objects()];
    search_objects(a, b, 0, &mut obj_map, &mut used_obj, &inv_a, &inv_b)
}

/// (order of arrow, is unit, |Hom(t,s)|).
fn arrow_invariants(g: &FiniteGroupoid) -> Vec<(usize, bool, usize)> {
    (0..g.arrows())
        .map(|x| {
            let order = if g.src(x) == g.tgt(x) {
                let mut k = 1;
                let mut acc = x;
                while !g.is_unit(acc) && k <= g.arrows() {
                    acc = g.mul(acc, x).expect("loop arrows compose");
                    k += 1;
                }
                k
            } else {
                0
            };
            (order, g.is_unit(x), g.hom(g.tgt(x), g.src(x)).len())
        })
        .collect()
}

fn search_objects(
    a: &FiniteGroupoid,
    b: &FiniteGroupoid,
    next: usize,
    obj_map: &mut Vec<usize>,
    used: &mut Vec<bool>,
    inv_a: &[(usize, bool, usize)],
    inv_b: &[(usize, bool, usize)],
) -> Option<FiniteMorphism> {
    if next == a.objects() {
        let mut arrow_map = vec![usize::MAX; a.arrows()];
        let mut used_arrows = vec![false; b.arrows()];
        if search_arrows(a, b, 0, obj_map, &mut arrow_map, &mut used_arrows, inv_a, inv_b) {
            return Some(FiniteMorphism { arrow_map, object_map: obj_map.clone() });
        }
        return None;
    }
    for cand in 0..b.objects() {
        if used[cand] {
            continue;
        }
        // hom-set sizes against already mapped objects must agree
        let ok = (0..next).chain(std::iter::once(next)).all(|q| {
            let fq = if q == next { cand } else { obj_map[q] };
            a.hom(next, q).len() == b.hom(cand, fq).len() && a.hom(q, next).len() == b.hom(fq, cand).len()
        });
        if !ok {
            continue;
        }
        obj_map[next] = cand;
        used[cand] = true;
        if let Some(m) = search_objects(a, b, next + 1, obj_map, used, inv_a, inv_b) {
            return Some(m);
        }
        used[cand] = false;
        obj_map[next] = usize::MAX;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn search_arrows(
    a: &FiniteGroupoid,
    b: &FiniteGroupoid,
    next: usize,
    obj_map: &[usize],
    arrow_map: &mut Vec<usize>,
    used: &mut Vec<bool>,
    inv_a: &[(usize, bool, usize)],
    inv_b: &[(usize, bool, usize)],
) -> bool {
    if next == a.arrows() {
        return true;
    }
    let (ft, fs) = (obj_map[a.tgt(next)], obj_map[a.src(next)]);
    for cand in b.hom(ft, fs) {
        if used[cand] || inv_a[next] != inv_b[cand] {
            continue;
        }
        arrow_map[next] = cand;
        let consistent = (0..=next).all(|x| {
            let fx = arrow_map[x];
            (0..=next).all(|y| match a.try_mul(x, y) {
                Some(xy) if arrow_map[xy] != usize::MAX => b.try_mul(fx, arrow_map[y]) == Some(arrow_map[xy]),
                _ => true,
            })
        });
        if consistent {
            used[cand] = true;
            if search_arrows(a, b, next + 1, obj_map, arrow_map, used, inv_a, inv_b) {
                return true;
            }
            used[cand] = false;
        }
        arrow_map[next] = usize::MAX;
    }
    false
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Dense class labels, ordered by the smallest member of each class.
    fn labels(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut label = vec![usize::MAX; n];
        let mut out = vec![0; n];
        let mut count = 0;
        for (x, slot) in out.iter_mut().enumerate() {
            let r = self.find(x);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            *slot = label[r];
        }
        (out, count)
    }
}

/// Discrete analogue of the pair-groupoid example: the pair groupoid on
/// `blocks * block_size` objects, `N` the block-diagonal subgroupoid, `R` the
/// block relation and `θ((m,n), {n}×B) = {m}×B`.
pub fn block_pair_system(blocks: usize, block_size: usize) -> (FiniteGroupoid, NormalSubgroupoidSystem) {
    let np = blocks * block_size;
    let g = FiniteGroupoid::pair(np);
    let id = |a: usize, b: usize| a * np + b;
    let block = |a: usize| a / block_size;
    let n: Vec<Arrow> = (0..np)
        .flat_map(|a| (0..np).map(move |b| (a, b)))
        .filter(|&(a, b)| block(a) == block(b))
        .map(|(a, b)| id(a, b))
        .collect();
    let r: Vec<[Object; 2]> = (0..np).flat_map(|a| (0..np).map(move |b| [a, b])).filter(|&[a, b]| block(a) == block(b)).collect();
    let mut theta = Vec::new();
    for &[m, q] in &r {
        for p in 0..np {
            theta.push([m, q, id(q, p), id(m, p)]);
        }
    }
    let nss = NormalSubgroupoidSystem::new(&g, &NssTables { n, r, theta }).expect("block system is well formed");
    (g, nss)
}

/// Discrete analogue of the vector-bundle example: `objects` copies of
/// ℤ/`order`, `N` the subgroup generated by `sub_generator` on every copy,
/// `R` the full relation when `connect` (else the diagonal), and θ moving
/// cosets across objects unchanged.
pub fn cyclic_bundle_system(
    order: usize,
    objects: usize,
    sub_generator: usize,
    connect: bool,
) -> (FiniteGroupoid, NormalSubgroupoidSystem) {
    let g = FiniteGroupoid::cyclic_bundle(order, objects);
    let id = |p: usize, x: usize| p * order + x;
    let sub: BTreeSet<usize> = (0..order).map(|k| (k * sub_generator) % order).collect();
    let n: Vec<Arrow> = (0..objects).flat_map(|p| sub.iter().map(move |&x| id(p, x))).collect();
    let r: Vec<[Object; 2]> =
        (0..objects).flat_map(|p| (0..objects).map(move |q| [p, q])).filter(|&[p, q]| connect || p == q).collect();
    let mut theta = Vec::new();
    for &[p, q] in &r {
        for x in 0..order {
            theta.push([p, q, id(q, x), id(p, x)]);
        }
    }
    let nss = NormalSubgroupoidSystem::new(&g, &NssTables { n, r, theta }).expect("bundle system is well formed");
    (g, nss)
}
