use serde::{Deserialize, Serialize};

use super::ScoringError;

/// Decrement table: `decrements[item][level - 1]`. Level 1 is the best
/// level and always carries a zero decrement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AdditiveRaw", into = "AdditiveRaw")]
pub struct AdditiveParams {
    decrements: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct AdditiveRaw {
    decrements: Vec<Vec<f64>>,
}

impl TryFrom<AdditiveRaw> for AdditiveParams {
    type Error = ScoringError;
    fn try_from(r: AdditiveRaw) -> Result<Self, Self::Error> {
        Self::new(r.decrements)
    }
}

impl From<AdditiveParams> for AdditiveRaw {
    fn from(p: AdditiveParams) -> Self {
        AdditiveRaw { decrements: p.decrements }
    }
}

impl AdditiveParams {
    pub fn new(decrements: Vec<Vec<f64>>) -> Result<Self, ScoringError> {
        if decrements.is_empty() {
            return Err(ScoringError::Definition("additive decrement table is empty".into()));
        }
        for (i, row) in decrements.iter().enumerate() {
            if row.len() < 2 {
                return Err(ScoringError::Definition(format!("item {}: needs at least 2 levels", i + 1)));
            }
            if row[0] != 0.0 {
                return Err(ScoringError::Definition(format!(
                    "item {}: decrement at level 1 must be 0, got {}",
                    i + 1,
                    row[0]
                )));
            }
            if row.iter().any(|d| !d.is_finite()) {
                return Err(ScoringError::Definition(format!("item {}: decrements must be finite", i + 1)));
            }
        }
        Ok(Self { decrements })
    }

    pub fn decrements(&self) -> &[Vec<f64>] {
        &self.decrements
    }

    pub fn decrement(&self, item: usize, level: u32) -> f64 {
        self.decrements[item][level as usize - 1]
    }

    pub fn levels(&self) -> Vec<u32> {
        self.decrements.iter().map(|r| r.len() as u32).collect()
    }
}

/// Item level weights, domain membership, domain weights and global scale
/// for the multiplicative engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MultiplicativeRaw", into = "MultiplicativeRaw")]
pub struct MultiplicativeParams {
    item_weights: Vec<Vec<f64>>,
    domains: Vec<Vec<usize>>,
    domain_weights: Vec<f64>,
    scale: f64,
}

#[derive(Serialize, Deserialize)]
struct MultiplicativeRaw {
    item_weights: Vec<Vec<f64>>,
    #[serde(default)]
    domains: Vec<Vec<usize>>,
    domain_weights: Vec<f64>,
    scale: f64,
}

impl TryFrom<MultiplicativeRaw> for MultiplicativeParams {
    type Error = ScoringError;
    fn try_from(r: MultiplicativeRaw) -> Result<Self, Self::Error> {
        Self::new(r.item_weights, r.domains, r.domain_weights, r.scale)
    }
}

impl From<MultiplicativeParams> for MultiplicativeRaw {
    fn from(p: MultiplicativeParams) -> Self {
        MultiplicativeRaw { item_weights: p.item_weights, domains: p.domains, domain_weights: p.domain_weights, scale: p.scale }
    }
}

impl MultiplicativeParams {
    /// `domains` lists 0-based item indices per domain. When empty, every
    /// item forms a single domain (set later by the instrument definition).
    pub fn new(
        item_weights: Vec<Vec<f64>>,
        domains: Vec<Vec<usize>>,
        domain_weights: Vec<f64>,
        scale: f64,
    ) -> Result<Self, ScoringError> {
        let def = |m: String| Err(ScoringError::Definition(m));
        if item_weights.is_empty() {
            return def("item weight table is empty".into());
        }
        for (i, row) in item_weights.iter().enumerate() {
            if row.len() < 2 {
                return def(format!("item {}: needs at least 2 levels", i + 1));
            }
            if let Some(w) = row.iter().find(|w| !(0.0..=1.0).contains(*w)) {
                return def(format!("item {}: weight {w} outside [0, 1]", i + 1));
            }
            if row[0] != 0.0 {
                return def(format!("item {}: weight at level 1 must be 0, got {}", i + 1, row[0]));
            }
        }
        if let Some(k) = domain_weights.iter().find(|k| !(0.0..=1.0).contains(*k)) {
            return def(format!("domain weight {k} outside [0, 1]"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return def(format!("scale must be positive and finite, got {scale}"));
        }
        let p = Self { item_weights, domains, domain_weights, scale };
        if !p.domains.is_empty() {
            p.check_domains()?;
        }
        Ok(p)
    }

    pub(crate) fn with_domains(mut self, domains: Vec<Vec<usize>>) -> Result<Self, ScoringError> {
        self.domains = domains;
        self.check_domains()?;
        Ok(self)
    }

    fn check_domains(&self) -> Result<(), ScoringError> {
        let n = self.item_weights.len();
        let mut seen = vec![0usize; n];
        for d in &self.domains {
            if d.is_empty() {
                return Err(ScoringError::Definition("empty domain".into()));
            }
            for &i in d {
                if i >= n {
                    return Err(ScoringError::Definition(format!("domain refers to item index {i}, only {n} items")));
                }
                seen[i] += 1;
            }
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(ScoringError::Definition(format!("item {} must belong to exactly one domain", i + 1)));
        }
        if self.domain_weights.len() != self.domains.len() {
            return Err(ScoringError::Definition(format!(
                "{} domain weights for {} domains",
                self.domain_weights.len(),
                self.domains.len()
            )));
        }
        Ok(())
    }

    pub fn levels(&self) -> Vec<u32> {
        self.item_weights.iter().map(|r| r.len() as u32).collect()
    }

    pub fn weight(&self, item: usize, level: u32) -> f64 {
        self.item_weights[item][level as usize - 1]
    }

    pub fn domains(&self) -> &[Vec<usize>] {
        &self.domains
    }

    /// Disutility of one domain: `1 - prod(1 - w_item(level))`.
    pub fn domain_disutility(&self, domain: usize, state: &[u32]) -> f64 {
        1.0 - self.domains[domain].iter().map(|&i| 1.0 - self.weight(i, state[i])).product::<f64>()
    }
}

fn check_levels(state: &[u32], levels: &[u32]) -> Result<(), ScoringError> {
    if state.len() != levels.len() {
        return Err(ScoringError::StateLength { expected: levels.len(), got: state.len() });
    }
    for (i, (&s, &l)) in state.iter().zip(levels).enumerate() {
        if s < 1 || s > l {
            return Err(ScoringError::Level { item: (i + 1).to_string(), level: s as i64, levels: l });
        }
    }
    Ok(())
}

/// `anchor - sum_i decrement(i, level_i)`. Unclamped.
pub fn score_additive(state: &[u32], params: &AdditiveParams, anchor: f64) -> Result<f64, ScoringError> {
    check_levels(state, &params.levels())?;
    Ok(anchor - state.iter().enumerate().map(|(i, &l)| params.decrement(i, l)).sum::<f64>())
}

/// `1 - scale * (1 - prod_d (1 - k_d * domain_disutility_d))`. Unclamped.
pub fn score_multiplicative(state: &[u32], params: &MultiplicativeParams) -> Result<f64, ScoringError> {
    check_levels(state, &params.levels())?;
    if params.domains.is_empty() {
        return Err(ScoringError::Definition("multiplicative parameters have no domains".into()));
    }
    let kept: f64 = (0..params.domains.len())
        .map(|d| 1.0 - params.domain_weights[d] * params.domain_disutility(d, state))
        .product();
    Ok(1.0 - params.scale * (1.0 - kept))
}
