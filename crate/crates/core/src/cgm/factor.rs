use crate::error::{Error, Result};

/// Non-negative table over the product of its scope's domains.
///
/// Entries are row-major with the first scope variable most significant;
/// scope entries are variable indices and `cards` the matching domain sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::InvalidArgument("factor scope and cardinalities differ in length".into()));
        }
        let size: usize = cards.iter().product();
        if values.len() != size {
            return Err(Error::InvalidArgument(format!("factor needs {size} entries, got {}", values.len())));
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("factor entries must be non-negative".into()));
        }
        Ok(Factor { scope, cards, values })
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn strides(&self) -> Vec<usize> {
        strides(&self.cards)
    }

    /// Entry at one configuration given as domain positions.
    pub fn get(&self, config: &[usize]) -> f64 {
        let s = self.strides();
        self.values[config.iter().zip(&s).map(|(c, s)| c * s).sum::<usize>()]
    }

    /// Sums out every variable not in `keep`; the result follows `keep`'s order.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Factor> {
        let pos: Vec<usize> = keep
            .iter()
            .map(|v| {
                self.scope
                    .iter()
                    .position(|s| s == v)
                    .ok_or_else(|| Error::InvalidArgument(format!("variable {v} not in factor scope")))
            })
            .collect::<Result<_>>()?;
        let cards: Vec<usize> = pos.iter().map(|&p| self.cards[p]).collect();
        let out_strides = strides(&cards);
        let mut values = vec![0.0; cards.iter().product()];
        for_each_config(&self.cards, |config, flat| {
            let idx: usize = pos.iter().zip(&out_strides).map(|(&p, s)| config[p] * s).sum();
            values[idx] += self.values[flat];
        });
        Ok(Factor {
            scope: keep.to_vec(),
            cards,
            values,
        })
    }

    /// Pointwise product over the union of both scopes (this factor's
    /// variables first).
    pub fn multiply(&self, other: &Factor) -> Result<Factor> {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            match scope.iter().position(|s| s == v) {
                Some(p) if cards[p] != *c => {
                    return Err(Error::InvalidArgument(format!("variable {v} has conflicting cardinalities")))
                }
                Some(_) => {}
                None => {
                    scope.push(*v);
                    cards.push(*c);
                }
            }
        }
        let pos: Vec<usize> = other.scope.iter().map(|v| scope.iter().position(|s| s == v).unwrap()).collect();
        let (sa, sb) = (self.strides(), other.strides());
        let na = self.scope.len();
        let mut values = vec![0.0; cards.iter().product()];
        for_each_config(&cards, |config, flat| {
            let ia: usize = (0..na).map(|k| config[k] * sa[k]).sum();
            let ib: usize = pos.iter().zip(&sb).map(|(&p, s)| config[p] * s).sum();
            values[flat] = self.values[ia] * other.values[ib];
        });
        Ok(Factor { scope, cards, values })
    }

    /// Largest absolute entry difference; scopes must agree.
    pub fn max_abs_diff(&self, other: &Factor) -> Result<f64> {
        if self.scope != other.scope || self.cards != other.cards {
            return Err(Error::InvalidArgument("factors have different scopes".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for k in (0..cards.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * cards[k + 1];
    }
    s
}

/// Visits every configuration of a mixed-radix counter in row-major order.
pub(crate) fn for_each_config(cards: &[usize], mut f: impl FnMut(&[usize], usize)) {
    let total: usize = cards.iter().product();
    let mut config = vec![0usize; cards.len()];
    for flat in 0..total {
        f(&config, flat);
        for k in (0..cards.len()).rev() {
            config[k] += 1;
            if config[k] < cards[k] {
                break;
            }
            config[k] = 0;
        }
    }
}
