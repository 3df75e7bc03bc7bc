use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::numstat::{ols_fit, OlsResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepAction {
    Remove,
    Add,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub action: StepAction,
    pub term: String,
    pub aic_before: f64,
    pub aic_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepwiseConfig {
    pub screening_p: f64,
    pub backward_threshold: f64,
    pub forward_threshold: f64,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        StepwiseConfig {
            screening_p: 0.05,
            backward_threshold: 1.0,
            forward_threshold: 2.0,
        }
    }
}

/// Screening thresholds reported side by side.
pub const SCREENING_SWEEP: [f64; 3] = [0.05, 0.10, 0.157];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepwiseModel {
    pub config: StepwiseConfig,
    pub screened: Vec<String>,
    pub main_effects: Vec<String>,
    pub interactions: Vec<(String, String)>,
    /// Terms of `final_ols` in coefficient order (after the intercept).
    pub terms: Vec<String>,
    pub final_ols: OlsResult,
    pub selection_trace: Vec<TraceStep>,
    pub notes: Vec<String>,
}

fn interaction_name(names: &[String], a: usize, b: usize) -> String {
    format!("{}:{}", names[a], names[b])
}

fn design(x: ArrayView2<f64>, mains: &[usize], pairs: &[(usize, usize)]) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::<f64>::zeros((n, mains.len() + pairs.len()));
    for (c, &j) in mains.iter().enumerate() {
        out.column_mut(c).assign(&x.column(j));
    }
    for (c, &(a, b)) in pairs.iter().enumerate() {
        let prod: Array1<f64> = &x.column(a) * &x.column(b);
        out.column_mut(mains.len() + c).assign(&prod);
    }
    out
}

fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>, mains: &[usize], pairs: &[(usize, usize)]) -> Result<OlsResult> {
    ols_fit(design(x, mains, pairs).view(), y, 0.05)
}

/// Column indices whose simple-regression slope has `p < p_threshold`.
/// Every column survives at threshold 1 (p-values of degenerate fits count as 1).
pub fn univariate_screen(x: ArrayView2<f64>, y: ArrayView1<f64>, p_threshold: f64) -> Result<Vec<usize>> {
    let mut keep = Vec::new();
    for j in 0..x.ncols() {
        let p = match fit(x, y, &[j], &[]) {
            Ok(f) => f.p_values[1],
            Err(Error::Singular(_)) => 1.0,
            Err(e) => return Err(e),
        };
        if p < p_threshold || p_threshold >= 1.0 {
            keep.push(j);
        }
    }
    Ok(keep)
}

/// Backward elimination on AIC: drops the variable whose removal lowers AIC
/// the most, while that decrease exceeds `threshold`. Ties go to the earlier
/// variable.
pub fn backward_eliminate(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    names: &[String],
    candidates: &[usize],
    threshold: f64,
) -> Result<(Vec<usize>, Vec<TraceStep>)> {
    let mut current = candidates.to_vec();
    let mut trace = Vec::new();
    if current.is_empty() {
        return Ok((current, trace));
    }
    let mut aic = fit(x, y, &current, &[])?.aic;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for pos in 0..current.len() {
            let mut reduced = current.clone();
            reduced.remove(pos);
            let a = fit(x, y, &reduced, &[])?.aic;
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((pos, a));
            }
        }
        match best {
            Some((pos, a)) if aic - a > threshold => {
                let removed = current.remove(pos);
                trace.push(TraceStep {
                    action: StepAction::Remove,
                    term: names[removed].clone(),
                    aic_before: aic,
                    aic_after: a,
                });
                aic = a;
                if current.is_empty() {
                    break;
                }
            }
            _ => break,
        }
    }
    Ok((current, trace))
}

/// Forward selection over pairwise products of `mains`. Candidates whose
/// column makes the design singular are skipped and noted.
#[allow(clippy::type_complexity)]
pub fn forward_interactions(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    names: &[String],
    mains: &[usize],
    threshold: f64,
) -> Result<(Vec<(usize, usize)>, OlsResult, Vec<TraceStep>, Vec<String>)> {
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for a in 0..mains.len() {
        for b in (a + 1)..mains.len() {
            pool.push((mains[a], mains[b]));
        }
    }
    let mut accepted: Vec<(usize, usize)> = Vec::new();
    let mut trace = Vec::new();
    let mut notes = Vec::new();
    let mut skipped: Vec<(usize, usize)> = Vec::new();
    let mut current = fit(x, y, mains, &[])?;
    loop {
        let mut best: Option<(usize, OlsResult)> = None;
        for (ci, &cand) in pool.iter().enumerate() {
            let mut pairs = accepted.clone();
            pairs.push(cand);
            match fit(x, y, mains, &pairs) {
                Ok(f) => {
                    if best.as_ref().is_none_or(|(_, b)| f.aic < b.aic) {
                        best = Some((ci, f));
                    }
                }
                Err(Error::Singular(_)) | Err(Error::TooFewRows(_)) => {
                    if !skipped.contains(&cand) {
                        skipped.push(cand);
                        notes.push(format!(
                            "interaction {} skipped: collinear with the current model",
                            interaction_name(names, cand.0, cand.1)
                        ));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        match best {
            Some((ci, f)) if current.aic - f.aic > threshold => {
                let cand = pool.remove(ci);
                trace.push(TraceStep {
                    action: StepAction::Add,
                    term: interaction_name(names, cand.0, cand.1),
                    aic_before: current.aic,
                    aic_after: f.aic,
                });
                accepted.push(cand);
                current = f;
            }
            _ => break,
        }
    }
    Ok((accepted, current, trace, notes))
}

/// Screening, backward elimination of mains, then forward interaction search.
pub fn stepwise(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    names: &[String],
    cfg: &StepwiseConfig,
) -> Result<StepwiseModel> {
    if names.len() != x.ncols() {
        return Err(Error::Shape("stepwise: names do not match columns".into()));
    }
    let screened = univariate_screen(x, y, cfg.screening_p)?;
    let (mains, mut trace) = backward_eliminate(x, y, names, &screened, cfg.backward_threshold)?;
    let (pairs, final_ols, forward_trace, notes) =
        forward_interactions(x, y, names, &mains, cfg.forward_threshold)?;
    trace.extend(forward_trace);
    let mut terms: Vec<String> = mains.iter().map(|&j| names[j].clone()).collect();
    terms.extend(pairs.iter().map(|&(a, b)| interaction_name(names, a, b)));
    Ok(StepwiseModel {
        config: *cfg,
        screened: screened.iter().map(|&j| names[j].clone()).collect(),
        main_effects: mains.iter().map(|&j| names[j].clone()).collect(),
        interactions: pairs
            .iter()
            .map(|&(a, b)| (names[a].clone(), names[b].clone()))
            .collect(),
        terms,
        final_ols,
        selection_trace: trace,
        notes,
    })
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl StepwiseModel {
    /// Final model table with a leading comment line holding the screening
    /// threshold, the AIC thresholds and R².
    pub fn to_csv(&self) -> String {
        let o = &self.final_ols;
        let lo = format!("[{:.3}", (1.0 - o.ci_level) / 2.0);
        let hi = format!("{:.3}]", 1.0 - (1.0 - o.ci_level) / 2.0);
        let mut out = format!(
            "# screening_p={},backward_threshold={},forward_threshold={},r_squared={}\n",
            self.config.screening_p,
            self.config.backward_threshold,
            self.config.forward_threshold,
            o.r_squared
        );
        out.push_str(&format!("Variable,Coef.,Std. Err.,t,P>|t|,{lo},{hi}\n"));
        for k in 0..o.coefficients.len() {
            let term = if k == 0 { "Intercept" } else { self.terms[k - 1].as_str() };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                quote(term),
                o.coefficients[k],
                o.standard_errors[k],
                o.t_values[k],
                o.p_values[k],
                o.ci_lower[k],
                o.ci_upper[k]
            ));
        }
        out
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,action,term,aic_before,aic_after\n");
        for (i, s) in self.selection_trace.iter().enumerate() {
            let action = match s.action {
                StepAction::Remove => "remove",
                StepAction::Add => "add",
            };
            out.push_str(&format!(
                "{},{action},{},{},{}\n",
                i + 1,
                quote(&s.term),
                s.aic_before,
                s.aic_after
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
    }

    fn names(p: usize) -> Vec<String> {
        (1..=p).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn screen_exact_copy_and_threshold_one() {
        let x = gaussian(50, 5, 1);
        let y = x.column(2).to_owned();
        let keep = univariate_screen(x.view(), y.view(), 0.01).unwrap();
        assert!(keep.contains(&2));
        assert_eq!(univariate_screen(x.view(), y.view(), 1.0).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn backward_drops_noise() {
        let x = gaussian(200, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = Array1::from_shape_fn(200, |i| {
            2.0 * x[[i, 0]] + 0.5 * { let e: f64 = StandardNormal.sample(&mut rng); e }
        });
        // choose a noise column whose AIC contribution is below the threshold
        let nm = names(2);
        let (kept, trace) = backward_eliminate(x.view(), y.view(), &nm, &[0, 1], 1.0).unwrap();
        if kept.len() == 1 {
            assert_eq!(kept, vec![0]);
            assert_eq!(trace.len(), 1);
            assert_eq!(trace[0].term, "x2");
        } else {
            assert!(trace.is_empty());
        }
        for s in &trace {
            assert!(s.aic_before - s.aic_after > 1.0);
        }
        let (single, _) = backward_eliminate(x.view(), y.view(), &nm, &[0], 1.0).unwrap();
        assert_eq!(single, vec![0]);
    }

    #[test]
    fn forward_finds_product() {
        let x = gaussian(150, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = Array1::from_shape_fn(150, |i| {
            x[[i, 0]] + x[[i, 1]] + 2.0 * x[[i, 0]] * x[[i, 1]]
                + 0.1 * { let e: f64 = StandardNormal.sample(&mut rng); e }
        });
        let nm = names(3);
        let (pairs, _, trace, _) = forward_interactions(x.view(), y.view(), &nm, &[0, 1, 2], 2.0).unwrap();
        assert_eq!(pairs[0], (0, 1));
        assert_eq!(trace[0].term, "x1:x2");
        for s in &trace {
            assert!(s.aic_before - s.aic_after > 2.0);
        }
    }

    #[test]
    fn collinear_candidate_noted() {
        let n = 40;
        let mut x = gaussian(n, 3, 6);
        // x3 = x1·x2, so the x1:x2 product duplicates a main effect
        for i in 0..n {
            x[[i, 2]] = x[[i, 0]] * x[[i, 1]];
        }
        let y = x.column(0).to_owned() + &x.column(1);
        let nm = names(3);
        let (pairs, _, _, notes) = forward_interactions(x.view(), y.view(), &nm, &[0, 1, 2], 2.0).unwrap();
        assert!(!pairs.contains(&(0, 1)));
        assert!(notes.iter().any(|n| n.contains("x1:x2")));
    }

    #[test]
    fn report_layout() {
        let x = gaussian(60, 3, 7);
        let y = x.column(0).to_owned() * 3.0 + &x.column(1);
        let m = stepwise(x.view(), y.view(), &names(3), &StepwiseConfig::default()).unwrap();
        let csv = m.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# screening_p=0.05"));
        assert_eq!(
            lines.next().unwrap(),
            "Variable,Coef.,Std. Err.,t,P>|t|,[0.025,0.975]"
        );
        assert!(lines.next().unwrap().starts_with("Intercept,"));
        assert!(m.main_effects.contains(&"x1".to_string()));
    }
}
