//! Scenario configs, the check pipeline and the versioned run report.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dirac::{
    self, characteristic_spaces, check_integrable, check_multiplicative_dirac, is_forward_dirac, pushforward_dirac,
};
use crate::error::{Error, Result};
use crate::fingroupoid::{
    block_pair_system, cyclic_bundle_system, find_isomorphism, is_normal_subgroupoid, kernel_of_morphism,
    quotient_by_normal_subgroupoid, quotient_by_nss, validate_nss, FiniteGroupoid, GroupoidTables, NormalSubgroupoidSystem,
    NssTables, ValidationReport,
};
use crate::leafspace::LeafSpace;
use crate::liegroupoid::{validate_smooth_groupoid, SmoothGroupoid};
use crate::multdist::{
    check_completeness, check_involutive, check_multiplicative, check_rank_structure, check_ts_surjectivity, lift_section,
    LiftMode,
};
use crate::numerics::Numerics;
use crate::report::CheckReport;
use crate::rng::{self, Rng};
use crate::scenarios::{self, columns, DiracScenario, SmoothScenario};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Finite,
    Pair,
    VbTrivial,
    GroupActionPair,
    PresymplecticPairDirac,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Finite, Family::Pair, Family::VbTrivial, Family::GroupActionPair, Family::PresymplecticPairDirac];

    pub fn name(self) -> &'static str {
        match self {
            Family::Finite => "finite",
            Family::Pair => "pair",
            Family::VbTrivial => "vb_trivial",
            Family::GroupActionPair => "group_action_pair",
            Family::PresymplecticPairDirac => "presymplectic_pair_dirac",
        }
    }

    pub fn parse(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }

    fn kind(self) -> Kind {
        match self {
            Family::Finite => Kind::Finite,
            Family::PresymplecticPairDirac => Kind::Dirac,
            _ => Kind::Smooth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Finite,
    Smooth,
    Dirac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub family: Family,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub numeric: Numerics,
    pub pipeline: Vec<String>,
}

fn empty_object() -> Value {
    json!({})
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "instance", rename_all = "snake_case")]
enum FiniteParams {
    BlockPair {
        blocks: usize,
        block_size: usize,
        #[serde(default)]
        expect_isomorphic: Option<bool>,
    },
    CyclicBundle {
        order: usize,
        objects: usize,
        sub_generator: usize,
        #[serde(default = "yes")]
        connect: bool,
        #[serde(default)]
        expect_isomorphic: Option<bool>,
    },
    Tables {
        #[serde(default)]
        groupoid: Option<Box<GroupoidTables>>,
        #[serde(default)]
        groupoid_file: Option<String>,
        #[serde(default)]
        nss: Option<NssTables>,
        #[serde(default)]
        expect_isomorphic: Option<bool>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairParams {
    #[serde(default = "two")]
    dim: usize,
    #[serde(default = "first_axis")]
    leaf_axes: Vec<usize>,
}

fn two() -> usize {
    2
}

fn first_axis() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct VbParams {
    k: usize,
    m: usize,
    #[serde(rename = "W", default)]
    w: Vec<Vec<f64>>,
    #[serde(rename = "F", default)]
    f: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupActionParams {
    #[serde(default = "x_direction")]
    direction: [f64; 2],
}

fn x_direction() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiracParams {
    #[serde(default)]
    omega: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    twist: Option<usize>,
}

struct CheckInfo {
    name: &'static str,
    kinds: &'static [Kind],
    summary: &'static str,
}

const SMOOTH: &[Kind] = &[Kind::Smooth, Kind::Dirac];

const CHECKS: &[CheckInfo] = &[
    CheckInfo {
        name: "validate_groupoid",
        kinds: &[Kind::Finite],
        summary: "groupoid axioms and inverse unicity on finite tables",
    },
    CheckInfo { name: "is_normal_subgroupoid", kinds: &[Kind::Finite], summary: "g n g⁻¹ ∈ N for every isotropy n ∈ N" },
    CheckInfo {
        name: "kernel_of_morphism",
        kinds: &[Kind::Finite],
        summary: "the kernel of the N-quotient projection is N and is normal",
    },
    CheckInfo {
        name: "quotient_by_normal_subgroupoid", kinds: &[Kind::Finite], summary: "G/∼ ⇉ P/∼ with g ∼ n₁ h n₂"
    },
    CheckInfo {
        name: "validate_nss",
        kinds: &[Kind::Finite],
        summary: "action axioms and the three compatibility conditions of (N, R, θ)",
    },
    CheckInfo {
        name: "quotient_by_nss",
        kinds: &[Kind::Finite],
        summary: "quotient by a normal subgroupoid system, ⟨gN⟩⋆⟨hN⟩ = ⟨g h' N⟩",
    },
    CheckInfo { name: "compare_quotients", kinds: &[Kind::Finite], summary: "isomorphism test between the two finite quotients" },
    CheckInfo {
        name: "validate_smooth_groupoid",
        kinds: SMOOTH,
        summary: "sampled groupoid axioms and submersion ranks of s, t",
    },
    CheckInfo { name: "check_multiplicative", kinds: &[Kind::Smooth], summary: "S is a subgroupoid of TG ⇉ TP" },
    CheckInfo {
        name: "check_rank_structure",
        kinds: &[Kind::Smooth],
        summary: "constant ranks, S|P = (S∩TP) ⊕ (S∩AG), Sᵗ(g) = TL_g Sᵗ(s(g))",
    },
    CheckInfo {
        name: "check_ts_surjectivity",
        kinds: &[Kind::Smooth],
        summary: "Ts(S(g)) = (S∩TP)(s(g)) and Tt(S(g)) = (S∩TP)(t(g))",
    },
    CheckInfo {
        name: "lift_section",
        kinds: &[Kind::Smooth],
        summary: "sections of S∩TP lift to s- and t-descending sections of S",
    },
    CheckInfo { name: "check_involutive", kinds: SMOOTH, summary: "brackets of spanning fields of S stay in S" },
    CheckInfo {
        name: "check_completeness",
        kinds: &[Kind::Smooth],
        summary: "declared complete fields integrate for ±t_max inside the chart",
    },
    CheckInfo { name: "check_first_integrals", kinds: SMOOTH, summary: "leaf labels are constant along S and S∩TP" },
    CheckInfo {
        name: "check_condition6",
        kinds: SMOOTH,
        summary: "g ⋆ ([s(g)] ∩ t⁻¹(s(g))) = [g] ∩ t⁻¹(t(g)), both inclusions sampled",
    },
    CheckInfo {
        name: "validate_quotient_groupoid",
        kinds: SMOOTH,
        summary: "groupoid axioms on G/S ⇉ P/S and the morphism property of the projection",
    },
    CheckInfo {
        name: "check_lifted_structures",
        kinds: &[Kind::Smooth],
        summary: "tangent and cotangent products commute with the projection",
    },
    CheckInfo {
        name: "check_ideal_system",
        kinds: &[Kind::Smooth],
        summary: "S∩AG has constant rank, anchors into ker Tλ_P, and is equivariant",
    },
    CheckInfo { name: "check_lagrangian", kinds: &[Kind::Dirac], summary: "D is isotropic of rank dim G" },
    CheckInfo { name: "check_integrable", kinds: &[Kind::Dirac], summary: "Courant–Dorfman brackets of generators stay in D" },
    CheckInfo {
        name: "characteristic_spaces", kinds: &[Kind::Dirac], summary: "G₀, G₁, P₀, P₁ of D with constant rank of G₀"
    },
    CheckInfo {
        name: "check_multiplicative_dirac",
        kinds: &[Kind::Dirac],
        summary: "D is a subgroupoid of TG ×_G T*G and G₀ is multiplicative",
    },
    CheckInfo { name: "pushforward_dirac", kinds: &[Kind::Dirac], summary: "D pushes forward to a Poisson structure on G/G₀" },
    CheckInfo {
        name: "is_forward_dirac",
        kinds: &[Kind::Dirac],
        summary: "the leaf map is forward Dirac onto the pushed-forward structure",
    },
];

/// One line per check: name, applicable families, statement.
pub fn list_checks() -> String {
    let mut out = String::new();
    for c in CHECKS {
        let families: Vec<&str> = Family::ALL.iter().filter(|f| c.kinds.contains(&f.kind())).map(|f| f.name()).collect();
        out.push_str(&format!("{:<32} [{}] {}\n", c.name, families.join(", "), c.summary));
    }
    out
}

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

pub fn describe_family(name: &str) -> Result<String> {
    let family = Family::parse(name).ok_or_else(|| Error::Config(format!("unknown family `{name}`")))?;
    let text = match family {
        Family::Finite => {
            "finite: exact finite groupoids with a normal subgroupoid system.\n\
             params.instance = \"block_pair\": blocks, block_size (pair groupoid on blocks·block_size objects, N the block pair groupoids)\n\
             params.instance = \"cyclic_bundle\": order, objects, sub_generator, connect (copies of Z/order, N generated by sub_generator)\n\
             params.instance = \"tables\": groupoid (inline tables) or groupoid_file (path relative to the config), optional nss {n, r, theta}\n\
             optional expect_isomorphic: whether the two quotients must be isomorphic"
        }
        Family::Pair => {
            "pair: pair groupoid of R^dim with S = D × D, D spanned by coordinate fields.\n\
             params: dim (default 2), leaf_axes (default [0]). Leaf space: pair groupoid of R^(dim - |leaf_axes|)."
        }
        Family::VbTrivial => {
            "vb_trivial: trivial vector-bundle groupoid R^k × R^m ⇉ R^m with S = W × F.\n\
             params: k, m, W (list of basis vectors in R^k), F (list of basis vectors in R^m).\n\
             Leaf space: (R^k/W) × (R^m/F) ⇉ R^m/F with fiberwise addition."
        }
        Family::GroupActionPair => {
            "group_action_pair: pair groupoid of R^2 with the diagonal translation action of H = R along a direction.\n\
             params: direction (default [1, 0]). Leaf labels (e⊥·m, e⊥·n, e·(n - m));\n\
             the quotient is the pair groupoid of R^2/H = R times the additive group R."
        }
        Family::PresymplecticPairDirac => {
            "presymplectic_pair_dirac: pair groupoid of R^n with D_ω ⊖ D_ω for a constant two-form ω.\n\
             params: omega (n×n antisymmetric rows, default dx∧dy on R^3), twist (optional coordinate i: use x_i·ω).\n\
             Leaf space of G₀ = ker ω × ker ω; the Dirac structure pushes forward to a Poisson bivector there."
        }
    };
    Ok(format!("{text}\n"))
}

/// Failure that stops the pipeline; the partial report is still emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortCircuit {
    pub check: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub family: String,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short_circuit: Option<ShortCircuit>,
    pub summaries: BTreeMap<String, Value>,
    pub config: ScenarioConfig,
    /// Wall-clock seconds per check; the only nondeterministic field.
    pub timing: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    /// The report as JSON without the `timing` field.
    pub fn deterministic_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Value::Object(m) = &mut v {
            m.remove("timing");
        }
        v
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.numeric.validate().map_err(Error::Config)?;
        if self.pipeline.is_empty() {
            return Err(Error::Config("pipeline is empty".into()));
        }
        let kind = self.family.kind();
        for name in &self.pipeline {
            match CHECKS.iter().find(|c| c.name == name) {
                None => return Err(Error::Config(format!("unknown check `{name}`"))),
                Some(c) if !c.kinds.contains(&kind) => {
                    return Err(Error::Config(format!("check `{name}` does not apply to family `{}`", self.family.name())))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn params<T: for<'de> Deserialize<'de>>(cfg: &ScenarioConfig) -> Result<T> {
    serde_json::from_value(cfg.params.clone()).map_err(|e| Error::Config(format!("params for `{}`: {e}", cfg.family.name())))
}

fn matrix_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("omega must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn build_smooth(cfg: &ScenarioConfig) -> Result<SmoothScenario> {
    let num = &cfg.numeric;
    match cfg.family {
        Family::Pair => {
            let p: PairParams = params(cfg)?;
            scenarios::pair_foliated(p.dim, &p.leaf_axes, num)
        }
        Family::VbTrivial => {
            let p: VbParams = params(cfg)?;
            scenarios::vb_trivial(&columns(p.k, &p.w)?, &columns(p.m, &p.f)?, num)
        }
        Family::GroupActionPair => {
            let p: GroupActionParams = params(cfg)?;
            scenarios::group_action_pair(p.direction, num)
        }
        _ => Err(Error::Internal("not a smooth family".into())),
    }
}

fn build_dirac(cfg: &ScenarioConfig) -> Result<DiracScenario> {
    let p: DiracParams = params(cfg)?;
    let omega = match &p.omega {
        Some(rows) => matrix_rows(rows)?,
        None => dirac::area_form(3, 1.0),
    };
    scenarios::presymplectic_pair(&omega, p.twist, &cfg.numeric)
}

struct FiniteScenario {
    g: FiniteGroupoid,
    nss: NormalSubgroupoidSystem,
    expect_isomorphic: Option<bool>,
}

fn build_finite(cfg: &ScenarioConfig, base_dir: Option<&Path>) -> Result<FiniteScenario> {
    let p: FiniteParams = params(cfg)?;
    Ok(match p {
        FiniteParams::BlockPair { blocks, block_size, expect_isomorphic } => {
            if blocks == 0 || block_size == 0 {
                return Err(Error::Config("blocks and block_size must be positive".into()));
            }
            let (g, nss) = block_pair_system(blocks, block_size);
            FiniteScenario { g, nss, expect_isomorphic }
        }
        FiniteParams::CyclicBundle { order, objects, sub_generator, connect, expect_isomorphic } => {
            if order == 0 || objects == 0 {
                return Err(Error::Config("order and objects must be positive".into()));
            }
            let (g, nss) = cyclic_bundle_system(order, objects, sub_generator, connect);
            FiniteScenario { g, nss, expect_isomorphic }
        }
        FiniteParams::Tables { groupoid, groupoid_file, nss, expect_isomorphic } => {
            let g = match (groupoid, groupoid_file) {
                (Some(t), None) => FiniteGroupoid::from_tables(&t)?,
                (None, Some(file)) => {
                    let path = base_dir.map_or_else(|| Path::new(&file).to_path_buf(), |d| d.join(&file));
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    FiniteGroupoid::from_json(&text)?
                }
                _ => return Err(Error::Config("give exactly one of groupoid, groupoid_file".into())),
            };
            let nss = match nss {
                Some(t) => NormalSubgroupoidSystem::new(&g, &t)?,
                None => NormalSubgroupoidSystem::trivial(&g),
            };
            FiniteScenario { g, nss, expect_isomorphic }
        }
    })
}

fn exact(name: &str, ok: bool, detail: Value) -> CheckReport {
    CheckReport { name: name.into(), pass: ok, max_residual: if ok { 0.0 } else { 1.0 }, witness: None, detail: Some(detail) }
}

fn validation(name: &str, r: &ValidationReport) -> CheckReport {
    CheckReport {
        name: name.into(),
        pass: r.valid,
        max_residual: r.violations.len() as f64,
        witness: r.violations.first().map(|v| v.witness.iter().map(|&x| x as f64).collect()),
        detail: Some(serde_json::to_value(r).expect("validation reports serialize")),
    }
}

fn shape(g: &FiniteGroupoid) -> Value {
    json!({ "objects": g.objects(), "arrows": g.arrows() })
}

fn run_finite(sc: &FiniteScenario, check: &str, summaries: &mut BTreeMap<String, Value>) -> Result<CheckReport> {
    let (g, nss) = (&sc.g, &sc.nss);
    Ok(match check {
        "validate_groupoid" => validation(check, &g.validate()),
        "is_normal_subgroupoid" => {
            let (normal, witness) = is_normal_subgroupoid(g, nss.n())?;
            exact(check, normal, json!({ "normal": normal, "witness": witness }))
        }
        "kernel_of_morphism" => {
            let q = quotient_by_normal_subgroupoid(g, nss.n())?;
            let k = kernel_of_morphism(g, &q.groupoid, &q.projection)?;
            let normal = is_normal_subgroupoid(g, &k)?.0;
            exact(check, &k == nss.n() && normal, json!({ "kernel_size": k.len(), "n_size": nss.n().len(), "normal": normal }))
        }
        "quotient_by_normal_subgroupoid" => {
            let q = quotient_by_normal_subgroupoid(g, nss.n())?;
            summaries.insert("normal_quotient".into(), shape(&q.groupoid));
            validation(check, &q.groupoid.validate())
        }
        "validate_nss" => validation(check, &validate_nss(g, nss)?),
        "quotient_by_nss" => {
            let q = quotient_by_nss(g, nss)?;
            summaries.insert("nss_quotient".into(), shape(&q.groupoid));
            validation(check, &q.groupoid.validate())
        }
        "compare_quotients" => {
            let a = quotient_by_normal_subgroupoid(g, nss.n())?;
            let b = quotient_by_nss(g, nss)?;
            let iso = find_isomorphism(&a.groupoid, &b.groupoid).is_some();
            let ok = sc.expect_isomorphic.is_none_or(|e| e == iso);
            exact(
                check,
                ok,
                json!({ "isomorphic": iso, "expected": sc.expect_isomorphic, "normal_quotient": shape(&a.groupoid), "nss_quotient": shape(&b.groupoid) }),
            )
        }
        _ => return Err(Error::Internal(format!("no finite check `{check}`"))),
    })
}

fn combined(name: &str, parts: Vec<CheckReport>) -> CheckReport {
    let pass = parts.iter().all(|r| r.pass);
    let worst = parts.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let witness = parts.iter().find(|r| !r.pass).and_then(|r| r.witness.clone());
    let detail = Value::Object(
        parts.iter().map(|r| (r.name.clone(), json!({ "pass": r.pass, "max_residual": r.max_residual }))).collect(),
    );
    CheckReport { name: name.into(), pass, max_residual: worst, witness, detail: Some(detail) }
}

fn sample_arrows(gd: &SmoothGroupoid, n: usize, rng: &mut Rng) -> Vec<nalgebra::DVector<f64>> {
    (0..n).map(|_| gd.sample_arrow(rng)).collect()
}

/// Checks shared by the smooth and Dirac families, on a leaf space.
fn run_leaf(
    leaf: &LeafSpace,
    quotient: &SmoothGroupoid,
    check: &str,
    num: &Numerics,
    rng: &mut Rng,
    summaries: &mut BTreeMap<String, Value>,
) -> Result<Option<CheckReport>> {
    let gd = &leaf.gd;
    let n = num.samples;
    Ok(Some(match check {
        "validate_smooth_groupoid" => combined(check, validate_smooth_groupoid(gd, n, num.tol_axiom, rng)?),
        "check_involutive" => check_involutive(&leaf.s, &sample_arrows(gd, n.min(50), rng), num)?,
        "check_first_integrals" => leaf.check_first_integrals(n, rng)?,
        "check_condition6" => leaf.check_condition6(n, rng)?,
        "validate_quotient_groupoid" => {
            let (rep, summary) = leaf.validate_quotient_groupoid(n, Some(quotient), rng)?;
            let mut v = serde_json::to_value(&summary)?;
            v["explicit_quotient"] = json!({ "arrow_dim": quotient.dim_g(), "object_dim": quotient.dim_p() });
            summaries.insert("quotient".into(), v);
            rep
        }
        _ => return Ok(None),
    }))
}

fn run_smooth(
    sc: &SmoothScenario,
    check: &str,
    num: &Numerics,
    rng: &mut Rng,
    summaries: &mut BTreeMap<String, Value>,
) -> Result<CheckReport> {
    if let Some(r) = run_leaf(&sc.leaf, &sc.quotient, check, num, rng, summaries)? {
        return Ok(r);
    }
    let (gd, s) = (&sc.leaf.gd, &sc.leaf.s);
    let n = num.samples;
    Ok(match check {
        "check_multiplicative" => check_multiplicative(gd, s, n, num, rng)?,
        "check_rank_structure" => {
            let (rep, ranks) = check_rank_structure(gd, s, n, num, rng)?;
            summaries.insert("ranks".into(), serde_json::to_value(ranks)?);
            rep
        }
        "check_ts_surjectivity" => check_ts_surjectivity(gd, s, n, rng)?,
        "lift_section" => {
            let mut parts = Vec::new();
            for (i, xbar) in sc.leaf.base_distribution().gens().iter().enumerate() {
                for mode in [LiftMode::Source, LiftMode::Target] {
                    let name = format!("generator_{i}_{}", if mode == LiftMode::Source { "s" } else { "t" });
                    parts.push(match lift_section(gd, s, xbar, mode, n.min(50), num, rng) {
                        Ok(_) => CheckReport { name, pass: true, max_residual: 0.0, witness: None, detail: None },
                        Err(Error::LiftFailed { residual, at }) => {
                            CheckReport { name, pass: false, max_residual: residual, witness: Some(at), detail: None }
                        }
                        Err(e) => return Err(e),
                    });
                }
            }
            combined(check, parts)
        }
        "check_completeness" => check_completeness(&sc.complete_fields, &sample_arrows(gd, n.min(20), rng), num),
        "check_lifted_structures" => sc.leaf.check_lifted_structures(&sc.quotient, n.min(50), rng)?,
        "check_ideal_system" => sc.leaf.check_ideal_system(n.min(50), rng)?,
        _ => return Err(Error::Internal(format!("no smooth check `{check}`"))),
    })
}

fn run_dirac(
    sc: &DiracScenario,
    check: &str,
    num: &Numerics,
    rng: &mut Rng,
    summaries: &mut BTreeMap<String, Value>,
) -> Result<CheckReport> {
    if let Some(r) = run_leaf(&sc.leaf, &sc.quotient, check, num, rng, summaries)? {
        return Ok(r);
    }
    let d = &sc.dirac;
    let n = num.samples;
    let dirac_summary = summaries.entry("dirac".into()).or_insert_with(|| json!({}));
    Ok(match check {
        "check_lagrangian" => {
            let rep = d.check_lagrangian(n, num.tol_member, num.rank_policy(), rng);
            dirac_summary["lagrangian_max_residual"] = json!(rep.max_residual);
            rep
        }
        "check_integrable" => {
            let rep = check_integrable(d, n.min(50), num, rng)?;
            dirac_summary["integrable"] = json!(rep.pass);
            rep
        }
        "characteristic_spaces" => {
            let mut seen: Option<[usize; 4]> = None;
            for _ in 0..n.min(50) {
                let x = d.sample_point(rng);
                let c = characteristic_spaces(d, &x, num.rank_policy())?;
                let ranks = [c.g0.ncols(), c.g1.ncols(), c.p0.ncols(), c.p1.ncols()];
                match seen {
                    Some(r) if r[0] != ranks[0] => {
                        return Err(Error::RankDrift { expected: r[0], found: ranks[0], at: x.iter().cloned().collect() })
                    }
                    None => seen = Some(ranks),
                    _ => {}
                }
            }
            let r = seen.unwrap_or_default();
            dirac_summary["g0_rank"] = json!(r[0]);
            exact(check, true, json!({ "g0_rank": r[0], "g1_rank": r[1], "p0_rank": r[2], "p1_rank": r[3] }))
        }
        "check_multiplicative_dirac" => check_multiplicative_dirac(&sc.leaf.gd, d, n.min(20), num, rng)?,
        "pushforward_dirac" => {
            let out = pushforward_dirac(d, &sc.leaf.chart, n.min(50), num, rng)?;
            dirac_summary["pushforward"] = json!({
                "poisson_matrix_at_samples": out.summary.poisson_matrix_at_samples,
                "jacobi_residual": out.summary.jacobi_residual,
                "characteristic_rank": out.summary.characteristic_rank_max,
            });
            out.report
        }
        "is_forward_dirac" => {
            let out = pushforward_dirac(d, &sc.leaf.chart, 5, num, rng)?;
            match out.dirac {
                Some(q) => is_forward_dirac(&sc.leaf.chart.lambda_g, d, &q, n.min(50), num, rng)?,
                None => CheckReport {
                    name: check.into(),
                    pass: false,
                    max_residual: f64::MAX,
                    witness: None,
                    detail: Some(json!({ "error": "no quotient Poisson structure" })),
                },
            }
        }
        _ => return Err(Error::Internal(format!("no Dirac check `{check}`"))),
    })
}

enum Built {
    Finite(FiniteScenario),
    Smooth(SmoothScenario),
    Dirac(DiracScenario),
}

fn is_hypothesis_violation(e: &Error) -> bool {
    matches!(e, Error::RankDrift { .. } | Error::Condition6Violated { .. })
}

fn error_report(check: &str, e: &Error) -> CheckReport {
    let (residual, witness) = match e {
        Error::Condition6Violated { residual, witness } => (*residual, Some(witness.clone())),
        Error::LiftFailed { residual, at } => (*residual, Some(at.clone())),
        Error::RankDrift { at, .. } => (f64::MAX, Some(at.clone())),
        Error::TransportFailed { residual } | Error::WellDefinednessViolated { residual } => (*residual, None),
        _ => (f64::MAX, None),
    };
    CheckReport {
        name: check.into(),
        pass: false,
        max_residual: if residual.is_finite() { residual } else { f64::MAX },
        witness,
        detail: Some(json!({ "error": e.to_string() })),
    }
}

/// Runs a validated config. `base_dir` resolves relative file references.
/// Errors are configuration problems; check failures land in the report.
pub fn run_config(cfg: &ScenarioConfig, base_dir: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let num = cfg.numeric;
    let built = match cfg.family.kind() {
        Kind::Finite => Built::Finite(build_finite(cfg, base_dir)?),
        Kind::Smooth => Built::Smooth(build_smooth(cfg)?),
        Kind::Dirac => Built::Dirac(build_dirac(cfg)?),
    };
    let mut rng = rng::seeded(num.seed);
    let mut checks = Vec::new();
    let mut summaries = BTreeMap::new();
    let mut timing = BTreeMap::new();
    let mut short_circuit = None;
    for (i, check) in cfg.pipeline.iter().enumerate() {
        let start = Instant::now();
        let result = match &built {
            Built::Finite(sc) => run_finite(sc, check, &mut summaries),
            Built::Smooth(sc) => run_smooth(sc, check, &num, &mut rng, &mut summaries),
            Built::Dirac(sc) => run_dirac(sc, check, &num, &mut rng, &mut summaries),
        };
        timing.insert(format!("{i:02}_{check}"), start.elapsed().as_secs_f64());
        match result {
            Ok(r) => checks.push(r),
            Err(e) => {
                checks.push(error_report(check, &e));
                if is_hypothesis_violation(&e) {
                    short_circuit = Some(ShortCircuit { check: check.clone(), error: e.to_string() });
                    break;
                }
            }
        }
    }
    let pass = short_circuit.is_none() && checks.iter().all(|r| r.pass);
    Ok(RunReport {
        schema: SCHEMA,
        family: cfg.family.name().into(),
        pass,
        checks,
        short_circuit,
        summaries,
        config: cfg.clone(),
        timing,
    })
}

/// Reads, validates and runs a config file.
pub fn run_path(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let cfg = ScenarioConfig::from_json(&text)?;
    run_config(&cfg, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(text).unwrap()
    }

    #[test]
    fn every_family_is_described() {
        for f in Family::ALL {
            assert!(describe_family(f.name()).unwrap().starts_with(f.name()));
        }
        let vb = describe_family("vb_trivial").unwrap();
        assert!(vb.contains('k') && vb.contains('W') && vb.contains('F'));
        assert!(matches!(describe_family("bogus"), Err(Error::Config(_))));
    }

    #[test]
    fn list_mentions_the_key_checks() {
        let text = list_checks();
        assert!(text.contains("check_condition6") && text.contains("pushforward_dirac"));
        assert_eq!(text.lines().count(), check_names().len());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_tol = r#"{"family": "pair", "numeric": {"tol_rank": -1}, "pipeline": ["check_multiplicative"]}"#;
        assert!(matches!(ScenarioConfig::from_json(bad_tol), Err(Error::Config(_))));
        let unknown = r#"{"family": "pair", "pipeline": ["nope"]}"#;
        assert!(matches!(ScenarioConfig::from_json(unknown), Err(Error::Config(_))));
        let wrong_family = r#"{"family": "finite", "pipeline": ["check_condition6"]}"#;
        assert!(matches!(ScenarioConfig::from_json(wrong_family), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_json(r#"{"family": "bogus", "pipeline": []}"#), Err(Error::Json(_))));
        let bad_params = cfg(r#"{"family": "vb_trivial", "params": {"k": 2}, "pipeline": ["check_multiplicative"]}"#);
        assert!(matches!(run_config(&bad_params, None), Err(Error::Config(_))));
    }

    #[test]
    fn finite_block_pair_runs_clean() {
        let c = cfg(
            r#"{"family": "finite", "params": {"instance": "block_pair", "blocks": 2, "block_size": 2, "expect_isomorphic": true},
            "pipeline": ["validate_groupoid", "is_normal_subgroupoid", "kernel_of_morphism", "quotient_by_normal_subgroupoid", "validate_nss", "quotient_by_nss", "compare_quotients"]}"#,
        );
        let r = run_config(&c, None).unwrap();
        assert!(r.pass, "{r:#?}");
        assert_eq!(r.summaries["nss_quotient"], json!({"objects": 2, "arrows": 4}));
    }

    #[test]
    fn finite_expectation_mismatch_fails() {
        let c = cfg(
            r#"{"family": "finite", "params": {"instance": "cyclic_bundle", "order": 4, "objects": 2, "sub_generator": 2, "expect_isomorphic": true},
            "pipeline": ["compare_quotients"]}"#,
        );
        let r = run_config(&c, None).unwrap();
        assert!(!r.pass);
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn smooth_pipeline_is_deterministic() {
        let text = r#"{"family": "pair", "numeric": {"samples": 10}, "pipeline": ["check_multiplicative", "check_rank_structure", "check_condition6", "validate_quotient_groupoid"]}"#;
        let a = run_config(&cfg(text), None).unwrap();
        let b = run_config(&cfg(text), None).unwrap();
        assert!(a.pass, "{a:#?}");
        assert_eq!(
            serde_json::to_string(&a.deterministic_json()).unwrap(),
            serde_json::to_string(&b.deterministic_json()).unwrap()
        );
        assert_eq!(a.summaries["ranks"]["rank_s_cap_tp"], 1);
    }

    #[test]
    fn hypothesis_violations_short_circuit() {
        let text = r#"{"family": "presymplectic_pair_dirac", "params": {"twist": 2}, "numeric": {"samples": 10},
            "pipeline": ["check_integrable", "characteristic_spaces", "pushforward_dirac"]}"#;
        let r = run_config(&cfg(text), None).unwrap();
        assert!(!r.pass);
        assert!(!r.checks[0].pass);
        if let Some(sc) = &r.short_circuit {
            assert_eq!(sc.check, "characteristic_spaces");
            assert_eq!(r.checks.len(), 2);
        }
    }
}
