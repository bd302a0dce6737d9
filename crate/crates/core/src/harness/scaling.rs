use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::abe::Abe;
use crate::nodes::{Census, Deployment, InitConfig, NodeError, ProtocolParams, ScalingAction};
use crate::policy::AttributeSet;
use crate::suite::CryptoSuite;

/// Allowed excess over the fitted leading term.
pub const RATIO_TOLERANCE: f64 = 1.5;

/// Sizes swept for every component count.
pub const SWEEP: [u64; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

/// Class the effort of an action must stay within.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    /// O(‖A‖).
    Authorities,
    /// O(‖v‖‖A‖ + ‖AN‖).
    PartitionTimesAuthorities,
}

impl Growth {
    pub fn of(action: ScalingAction) -> Self {
        match action {
            ScalingAction::RemoveConsumer | ScalingAction::RevokeValidity => Self::PartitionTimesAuthorities,
            _ => Self::Authorities,
        }
    }

    /// The bound's argument for one measured action.
    pub fn bound(self, before: &Census, v: u64) -> f64 {
        match self {
            Self::Authorities => before.authorities as f64,
            Self::PartitionTimesAuthorities => (v * before.authorities + before.authorization_nodes) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub before: Census,
    pub v: u64,
    pub bound: f64,
    /// Messages plus keying operations.
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub action: ScalingAction,
    /// Which component count the series varies.
    pub series: String,
    pub points: Vec<SamplePoint>,
    pub alpha: f64,
    pub beta: f64,
    /// Largest cost over fitted value.
    pub max_ratio: f64,
    /// Largest discrete slope over the first one.
    pub slope_ratio: f64,
    pub passed: bool,
}

/// Least-squares line through (bound, cost), then the ratio tests: no point
/// above `RATIO_TOLERANCE` times the fit, and no later slope steeper than
/// `RATIO_TOLERANCE` times the first.
pub fn fit_growth(action: ScalingAction, series: &str, points: Vec<SamplePoint>) -> ScalingReport {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.bound, b + p.cost as f64));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = points.iter().map(|p| (p.bound - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.bound - mx) * (p.cost as f64 - my)).sum();
    let alpha = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let beta = my - alpha * mx;

    let mut max_ratio: f64 = 0.0;
    let mut fits = true;
    for p in &points {
        let fitted = alpha * p.bound + beta;
        if fitted <= 0.0 {
            fits &= p.cost == 0;
            continue;
        }
        max_ratio = max_ratio.max(p.cost as f64 / fitted);
    }
    fits &= max_ratio <= RATIO_TOLERANCE;

    let slopes: Vec<f64> = points
        .windows(2)
        .filter(|w| w[1].bound != w[0].bound)
        .map(|w| (w[1].cost as f64 - w[0].cost as f64) / (w[1].bound - w[0].bound))
        .collect();
    let slope_ratio = match slopes.split_first() {
        Some((&first, rest)) if first > 0.0 => rest.iter().fold(1.0_f64, |m, s| m.max(s / first)),
        Some((_, rest)) if rest.iter().all(|s| *s <= 0.0) => 1.0,
        Some(_) => f64::INFINITY,
        None => 1.0,
    };
    ScalingReport {
        action,
        series: series.to_owned(),
        points,
        alpha,
        beta,
        max_ratio,
        slope_ratio,
        passed: fits && slope_ratio <= RATIO_TOLERANCE,
    }
}

/// Generic attribute every sweep deployment carries.
const GENERIC: &str = "g1";

fn fresh(seed: u64, authorities: u64) -> Result<(Deployment, ChaCha20Rng), NodeError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut d = Deployment::init(
        Abe::mock(),
        CryptoSuite::modern_fast(),
        InitConfig {
            generic: vec![GENERIC.into()],
            ..InitConfig::default()
        },
        ProtocolParams { x: 4, u: 2, ttl_max: 60 },
        &mut rng,
    )?;
    for _ in 1..authorities {
        d.add_authority()?;
    }
    Ok((d, rng))
}

fn set(names: &[&str]) -> AttributeSet {
    names.iter().copied().collect()
}

fn add_authz(d: &mut Deployment, id: &str, rng: &mut ChaCha20Rng) -> Result<(), NodeError> {
    d.provision_authorization_node(id, &format!("{id}.sim"), &set(&[GENERIC]), rng)
        .map(|_| ())
}

fn last_cost(d: &Deployment) -> (Census, u64, u64) {
    let c = d.authority().ledger().last().expect("action was accounted");
    (c.before, c.messages + c.keying_ops, c.v_partition)
}

/// One run of `action` against a deployment of `authorities` authorities,
/// `authz` authorization nodes and `v` consumers in the revoked partition.
fn sample(action: ScalingAction, seed: u64, authorities: u64, authz: u64, v: u64) -> Result<SamplePoint, NodeError> {
    let (mut d, mut rng) = fresh(seed, authorities)?;
    for i in 0..authz {
        add_authz(&mut d, &format!("an{i}"), &mut rng)?;
    }
    d.provision_service_node("sn0", "sn0.sim", &mut rng)?;
    let g = set(&[GENERIC]);
    match action {
        ScalingAction::AddAuthority => d.add_authority()?,
        ScalingAction::RemoveAuthority => {
            d.add_authority()?;
            d.remove_authority()?
        }
        ScalingAction::AddAuthorizationNode => add_authz(&mut d, "new", &mut rng)?,
        ScalingAction::RemoveAuthorizationNode => {
            add_authz(&mut d, "old", &mut rng)?;
            d.remove_node("old")?
        }
        ScalingAction::AddServiceNode => {
            d.provision_service_node("new", "new.sim", &mut rng)?;
        }
        ScalingAction::RemoveServiceNode => d.remove_node("sn0")?,
        ScalingAction::AddConsumer => {
            d.enroll_consumer("new", &g, &set(&["v1", "v2"]), &mut rng)?;
        }
        ScalingAction::RemoveConsumer => {
            d.enroll_consumer("target", &g, &set(&["v1", "v2"]), &mut rng)?;
            for i in 0..v {
                d.enroll_consumer(&format!("holder{i}"), &g, &set(&["v1", "v3"]), &mut rng)?;
            }
            // Outside the partition: never re-keyed.
            d.enroll_consumer("bystander", &g, &set(&["v3", "v4"]), &mut rng)?;
            d.remove_consumer("target", 0, &mut rng)?;
        }
        other => return Err(NodeError::Invalid(format!("{other:?} is not swept"))),
    }
    let (before, cost, partition) = last_cost(&d);
    Ok(SamplePoint {
        before,
        v: partition,
        bound: Growth::of(action).bound(&before, partition),
        cost,
    })
}

/// Sweeps `action` over `sizes`. Actions bounded by ‖A‖ give one series;
/// consumer removal gives one per argument of its bound, the others held
/// at 2.
pub fn measure_scaling(action: ScalingAction, sizes: &[u64], seed: u64) -> Result<Vec<ScalingReport>, NodeError> {
    let series = |name: &str, f: &dyn Fn(u64) -> (u64, u64, u64)| -> Result<ScalingReport, NodeError> {
        let points = sizes
            .iter()
            .map(|&n| {
                let (a, an, v) = f(n);
                sample(action, seed ^ n, a, an, v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(fit_growth(action, name, points))
    };
    match Growth::of(action) {
        Growth::Authorities => Ok(vec![series("A", &|n| (n, 1, 0))?]),
        Growth::PartitionTimesAuthorities => Ok(vec![
            series("v", &|n| (2, 2, n))?,
            series("AN", &|n| (2, n, 2))?,
            series("A", &|n| (n, 2, 2))?,
        ]),
    }
}

/// The five actions of the analysis, with removal counterparts where the
/// bound covers both directions.
pub const MEASURED_ACTIONS: [ScalingAction; 8] = [
    ScalingAction::AddAuthority,
    ScalingAction::RemoveAuthority,
    ScalingAction::AddAuthorizationNode,
    ScalingAction::RemoveAuthorizationNode,
    ScalingAction::AddServiceNode,
    ScalingAction::RemoveServiceNode,
    ScalingAction::AddConsumer,
    ScalingAction::RemoveConsumer,
];
