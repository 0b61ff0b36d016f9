use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{groups, mean_at, EffectEstimate, Regressor};
use crate::data::{format_number, Dataset};
use crate::error::{Error, Result};
use crate::kernel_stats::{Kernel, KernelRidge};
use crate::linalg::{design, mean, standardize, Ols};

/// First-stage `|t|` below this rejects the instrument.
pub const WEAK_INSTRUMENT_T: f64 = 3.0;

/// Plug-in front-door estimate for binary `t` and discrete mediator `m`:
/// `E[Y | do(t)] = sum_m p(m | t) sum_t' p(t') E[Y | m, t']`.
pub fn ate_front_door(data: &Dataset, y: &str, t: &str, mediator: &str) -> Result<EffectEstimate> {
    let (yv, tv, mv) = (data.values(y)?, data.binary(t)?, data.values(mediator)?);
    if !data.column(mediator)?.is_discrete() && mv.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::InvalidArgument(format!("mediator `{mediator}` must be discrete")));
    }
    let g = groups(tv)?;
    let n = yv.len() as f64;
    let mut levels = mv.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    // cells[(m, t)] = rows
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for r in 0..yv.len() {
        let k = levels.binary_search_by(|l| l.total_cmp(&mv[r])).expect("level");
        cells.entry((k, tv[r] as usize)).or_default().push(r);
    }
    for k in 0..levels.len() {
        for arm in 0..2 {
            if !cells.contains_key(&(k, arm)) {
                return Err(Error::Positivity(format!(
                    "no rows with {t}={arm}, {mediator}={}",
                    format_number(levels[k])
                )));
            }
        }
    }
    let p_t = [g.control.len() as f64 / n, g.treated.len() as f64 / n];
    let arm_size = [g.control.len() as f64, g.treated.len() as f64];
    // E[Y | do(m)] by adjusting for t.
    let do_m: Vec<f64> = (0..levels.len())
        .map(|k| (0..2).map(|a| p_t[a] * mean_at(yv, &cells[&(k, a)])).sum())
        .collect();
    let do_t = |arm: usize| -> f64 {
        (0..levels.len())
            .map(|k| cells[&(k, arm)].len() as f64 / arm_size[arm] * do_m[k])
            .sum()
    };
    let (d1, d0) = (do_t(1), do_t(0));
    Ok(EffectEstimate::new("front-door", d1 - d0)
        .diag("m0", g.control.len())
        .diag("m1", g.treated.len())
        .diag("do_treated", d1)
        .diag("do_control", d0)
        .diag("naive", mean_at(yv, &g.treated) - mean_at(yv, &g.control))
        .diag("mediator_levels", levels.len()))
}

/// Two-stage least squares with one instrument.
pub fn ate_iv_2sls(data: &Dataset, y: &str, t: &str, instrument: &str) -> Result<EffectEstimate> {
    let (yv, tv, iv) = (data.values(y)?, data.values(t)?, data.values(instrument)?);
    let n = yv.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("2SLS needs at least 4 rows, got {n}")));
    }
    let first = Ols::fit(&design(n, &[iv]), tv)?;
    let t_stat = first.coef[1] / first.std_errors()[1];
    if !(t_stat.abs() >= WEAK_INSTRUMENT_T) {
        return Err(Error::WeakInstrument {
            t_stat,
            threshold: WEAK_INSTRUMENT_T,
        });
    }
    let t_hat: Vec<f64> = first.predict(&design(n, &[iv])).iter().copied().collect();
    let second = Ols::fit(&design(n, &[&t_hat]), yv)?;
    let (b0, b1) = (second.coef[0], second.coef[1]);
    // Structural residuals use the observed treatment.
    let rss: f64 = (0..n).map(|r| (yv[r] - b0 - b1 * tv[r]).powi(2)).sum();
    let th_mean = mean(&t_hat);
    let sxx: f64 = t_hat.iter().map(|v| (v - th_mean).powi(2)).sum();
    let naive = Ols::fit(&design(n, &[tv]), yv)?;
    let mut est = EffectEstimate::new("iv-2sls", b1)
        .diag("n", n)
        .diag("first_stage_coef", first.coef[1])
        .diag("first_stage_t", t_stat)
        .diag("weak_instrument_threshold", WEAK_INSTRUMENT_T)
        .diag("naive", naive.coef[1]);
    est.stderr = Some((rss / (n as f64 - 2.0) / sxx).sqrt());
    Ok(est)
}

/// Sharp regression discontinuity: separate linear fits of `y` on the score
/// within `epsilon` on each side of `cutoff`; the effect is the jump between
/// their values at the cutoff. Units with `score >= cutoff` are treated.
pub fn ate_rdd(data: &Dataset, y: &str, score: &str, cutoff: f64, epsilon: f64) -> Result<EffectEstimate> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("window {epsilon} must be positive")));
    }
    let (yv, sv) = (data.values(y)?, data.values(score)?);
    let side = |right: bool| -> Result<Ols> {
        let rows: Vec<usize> = (0..yv.len())
            .filter(|&r| {
                let d = sv[r] - cutoff;
                if right {
                    (0.0..=epsilon).contains(&d)
                } else {
                    d < 0.0 && d >= -epsilon
                }
            })
            .collect();
        let which = if right { "right" } else { "left" };
        if rows.is_empty() {
            return Err(Error::EmptyGroup(format!("no rows {which} of the cutoff within the window")));
        }
        if rows.len() < 3 {
            return Err(Error::InsufficientData(format!("{} rows {which} of the cutoff", rows.len())));
        }
        let x: Vec<f64> = rows.iter().map(|&r| sv[r] - cutoff).collect();
        let yy: Vec<f64> = rows.iter().map(|&r| yv[r]).collect();
        Ols::fit(&design(rows.len(), &[&x]), &yy)
    };
    let (left, right) = (side(false)?, side(true)?);
    let (se_l, se_r) = (left.std_errors()[0], right.std_errors()[0]);
    let mut est = EffectEstimate::new("rdd", right.coef[0] - left.coef[0])
        .diag("cutoff", cutoff)
        .diag("epsilon", epsilon)
        .diag("n_left", left.residuals.len())
        .diag("n_right", right.residuals.len());
    est.stderr = Some((se_l * se_l + se_r * se_r).sqrt());
    Ok(est)
}

/// Removes from `target` the part predictable from `siblings` (one series
/// per column), returning `target - E[target | siblings]`.
pub fn half_sibling_regress(target: &[f64], siblings: &DMatrix<f64>, regressor: Regressor) -> Result<Vec<f64>> {
    let n = target.len();
    if siblings.nrows() != n {
        return Err(Error::InvalidArgument("siblings and target differ in length".into()));
    }
    if siblings.ncols() == 0 {
        let m = mean(target);
        return Ok(target.iter().map(|v| v - m).collect());
    }
    match regressor {
        Regressor::Linear => {
            let cols: Vec<Vec<f64>> = (0..siblings.ncols()).map(|c| siblings.column(c).iter().copied().collect()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let fit = Ols::fit(&design(n, &refs), target)?;
            Ok(fit.residuals.iter().copied().collect())
        }
        Regressor::KernelRidge => {
            let cols: Vec<Vec<f64>> = (0..siblings.ncols())
                .map(|c| standardize(&siblings.column(c).iter().copied().collect::<Vec<_>>()))
                .collect();
            let x = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
            let fit = KernelRidge::fit(Kernel::gaussian_median(&x), &x, target, None)?;
            Ok(fit.residuals(target))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgm::DiscreteCgm;
    use crate::data::Column;
    use crate::linalg::correlation;
    use crate::rng;
    use crate::scenario::{halfsibling_scm, Scenario, SIBLINGS};
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn front_door_matches_latent_truth() {
        let (d, truth) = Scenario::Frontdoor.generate(50_000, 1).unwrap();
        let e = ate_front_door(&d, "Y", "T", "M").unwrap();
        let ate = truth["ate"].as_f64().unwrap();
        assert!((e.ate - ate).abs() < 0.05, "{}", e.ate);
        let naive = e.diagnostics["naive"].as_f64().unwrap();
        assert!((naive - ate).abs() > 0.05, "{naive}");
    }

    #[test]
    fn front_door_truth_matches_exact_models() {
        // The scenario's mechanisms as explicit tables over (H, T, M, Y).
        let g = crate::graph::Dag::from_names(
            &["H", "T", "M", "Y"],
            &[("H", "T"), ("T", "M"), ("M", "Y"), ("H", "Y")],
        )
        .unwrap();
        let bern = |p: f64| vec![1.0 - p, p];
        let cgm = DiscreteCgm::new(
            g,
            vec![vec![0.0, 1.0]; 4],
            vec![
                vec![bern(0.5)],
                vec![bern(0.2), bern(0.8)],
                vec![bern(0.1), bern(0.8)],
                vec![bern(0.1), bern(0.6), bern(0.4), bern(0.9)],
            ],
        )
        .unwrap();
        let (t, m, y) = (1, 2, 3);
        let truth = cgm.do_table(t, y).unwrap();
        let ate = truth[1][1] - truth[0][1];
        let stated = Scenario::Frontdoor.ground_truth()["ate"].as_f64().unwrap();
        assert!((ate - stated).abs() < 1e-12, "{ate}");
        let fd = cgm.front_door_formula(t, m, y).unwrap();
        assert!((fd[1][1] - fd[0][1] - ate).abs() < 1e-12);
    }

    #[test]
    fn mediator_independent_of_treatment_gives_zero() {
        let d = Dataset::new(vec![
            Column::binary("T", vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
            Column::binary("M", vec![0.0, 1.0, 0.0, 1.0]).unwrap(),
            Column::real("Y", vec![1.0, 4.0, 2.0, 3.5]).unwrap(),
        ])
        .unwrap();
        assert!(ate_front_door(&d, "Y", "T", "M").unwrap().ate.abs() < 1e-15);
        let missing = d.filter_rows(|r| r != 1);
        assert!(matches!(ate_front_door(&missing, "Y", "T", "M"), Err(Error::Positivity(_))));
    }

    #[test]
    fn two_stage_least_squares() {
        let (d, truth) = Scenario::IvLinear.generate(10_000, 3).unwrap();
        let e = ate_iv_2sls(&d, "Y", "T", "I").unwrap();
        assert!((e.ate - 2.0).abs() < 0.05, "{}", e.ate);
        let naive = e.diagnostics["naive"].as_f64().unwrap();
        assert!((naive - truth["naive"].as_f64().unwrap()).abs() < 0.05);
        let mut g = rng::stream(4, 0);
        let junk: Vec<f64> = (0..10_000).map(|_| g.sample(StandardNormal)).collect();
        let weak = Dataset::new(
            d.columns().iter().cloned().chain([Column::real("J", junk).unwrap()]).collect(),
        )
        .unwrap();
        assert!(matches!(ate_iv_2sls(&weak, "Y", "T", "J"), Err(Error::WeakInstrument { .. })));
    }

    fn rdd_data(n: usize, jump: f64, seed: u64) -> Dataset {
        let mut g = rng::stream(seed, 0);
        let s: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = s
            .iter()
            .map(|&s| jump * f64::from(u8::from(s >= 0.0)) + s + 0.2 * g.sample::<f64, _>(StandardNormal))
            .collect();
        Dataset::new(vec![Column::real("S", s).unwrap(), Column::real("Y", y).unwrap()]).unwrap()
    }

    #[test]
    fn regression_discontinuity() {
        let e = ate_rdd(&rdd_data(20_000, 2.0, 5), "Y", "S", 0.0, 0.1).unwrap();
        assert!((e.ate - 2.0).abs() < 0.1, "{}", e.ate);
        let smooth = rdd_data(20_000, 0.0, 6);
        let wide = ate_rdd(&smooth, "Y", "S", 0.0, 0.1).unwrap();
        assert!(wide.ate.abs() < 0.1);
        let narrow = ate_rdd(&smooth, "Y", "S", 0.0, 0.05).unwrap();
        assert!((narrow.ate - wide.ate).abs() < narrow.stderr.unwrap());
        assert!(matches!(ate_rdd(&smooth, "Y", "S", 5.0, 0.1), Err(Error::EmptyGroup(_))));
    }

    fn sibling_matrix(d: &Dataset) -> DMatrix<f64> {
        let names: Vec<String> = (1..=SIBLINGS).map(|j| format!("X{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        d.matrix(&refs).unwrap()
    }

    #[test]
    fn half_sibling_recovers_signal() {
        let (d, _) = Scenario::Halfsibling.generate(2000, 7).unwrap();
        let s_hat = half_sibling_regress(d.values("Y").unwrap(), &sibling_matrix(&d), Regressor::Linear).unwrap();
        let s = d.values("S").unwrap();
        assert!(correlation(&s_hat, s) >= 0.95);
        // Adding a function of the siblings to the target changes nothing.
        let sib = sibling_matrix(&d);
        let shifted: Vec<f64> = (0..2000).map(|r| d.values("Y").unwrap()[r] + 3.0 * sib[(r, 0)]).collect();
        let again = half_sibling_regress(&shifted, &sib, Regressor::Linear).unwrap();
        assert!(again.iter().zip(&s_hat).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn half_sibling_without_systematics_centers() {
        let mut g = rng::stream(8, 0);
        let s: Vec<f64> = (0..500).map(|_| g.sample(StandardNormal)).collect();
        let sib = DMatrix::from_fn(500, 3, |_, _| g.sample(StandardNormal));
        let out = half_sibling_regress(&s, &sib, Regressor::Linear).unwrap();
        let m = mean(&s);
        let rms = (out.iter().zip(&s).map(|(o, v)| (o - (v - m)).powi(2)).sum::<f64>() / 500.0).sqrt();
        assert!(rms < 0.15, "{rms}");
        assert!(half_sibling_regress(&s, &DMatrix::from_element(500, 2, 1.0), Regressor::Linear).is_err());
    }

    #[test]
    fn kernel_beats_linear_on_nonlinear_systematics() {
        let full = halfsibling_scm(true).sample(1000, 9).unwrap();
        let sib = sibling_matrix(&full);
        let (y, s) = (full.values("Y").unwrap(), full.values("S").unwrap());
        let lin = correlation(&half_sibling_regress(y, &sib, Regressor::Linear).unwrap(), s);
        let ker = correlation(&half_sibling_regress(y, &sib, Regressor::KernelRidge).unwrap(), s);
        assert!(ker > lin, "{ker} {lin}");
    }
}
