//! Forecast accuracy (MAE) and consistency (NEES) metrics.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{ensure, Error, Result};

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    ensure!(!a.is_empty(), InvalidArgument, "no predictions to evaluate");
    ensure!(
        a.len() == b.len(),
        InvalidArgument,
        "length mismatch: {} predictions vs {} truths",
        a.len(),
        b.len()
    );
    Ok(())
}

/// Mean absolute error `(1/N) sum |x - y|`.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / pred.len() as f64)
}

/// Signed mean error `(1/N) sum (x - y)`, kept for comparison with MAE.
pub fn mean_signed_error(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(x, y)| x - y).sum();
    Ok(total / pred.len() as f64)
}

/// Percentage change of a candidate MAE against a baseline; negative is an
/// improvement.
pub fn mae_pct_diff(baseline_mae: f64, candidate_mae: f64) -> Result<f64> {
    ensure!(
        baseline_mae > 0.0 && baseline_mae.is_finite(),
        InvalidArgument,
        "baseline MAE must be positive, got {baseline_mae}"
    );
    Ok(100.0 * (candidate_mae - baseline_mae) / baseline_mae)
}

/// Normalised estimation error squared for scalar predictions,
/// `(1/N) sum (x - y)^2 / C`. Values near 1 indicate consistent variances;
/// above 1 the forecast is over-confident, below 1 over-cautious.
pub fn nees(pred_mean: &[f64], pred_var: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred_mean, truth)?;
    check_lengths(pred_var, truth)?;
    ensure!(
        pred_var.iter().all(|c| *c > 0.0 && c.is_finite()),
        InvalidArgument,
        "predicted variances must be positive"
    );
    let total: f64 = pred_mean
        .iter()
        .zip(pred_var)
        .zip(truth)
        .map(|((x, c), y)| (x - y).powi(2) / c)
        .sum();
    Ok(total / truth.len() as f64)
}

/// Per-day prediction summary handed to the table builder.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInput {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub truth: Vec<f64>,
}

impl EvalInput {
    pub fn mae(&self) -> Result<f64> {
        mae(&self.mean, &self.truth)
    }

    pub fn nees(&self) -> Result<f64> {
        nees(&self.mean, &self.variance, &self.truth)
    }
}

/// One region row: baseline NEES, then MAE % diff and NEES per feed set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub region: String,
    pub baseline_nees: f64,
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub name: String,
    pub mae_pct_diff: f64,
    pub nees: f64,
}

pub fn evaluate_region(
    region: &str,
    baseline: &EvalInput,
    candidates: &[(String, EvalInput)],
) -> Result<EvalRow> {
    let baseline_mae = baseline.mae()?;
    let candidates = candidates
        .iter()
        .map(|(name, input)| {
            Ok(CandidateScore {
                name: name.clone(),
                mae_pct_diff: mae_pct_diff(baseline_mae, input.mae()?)?,
                nees: input.nees()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalRow {
        region: region.to_string(),
        baseline_nees: baseline.nees()?,
        candidates,
    })
}

/// Writes rows as `region,deaths_nees,<name>_mae_pct_diff,<name>_nees,...`.
/// All rows must carry the same candidate names in the same order.
pub fn write_table<W: Write>(rows: &[EvalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<&str> = rows
        .first()
        .map(|r| r.candidates.iter().map(|c| c.name.as_str()).collect())
        .unwrap_or_default();
    let mut header = vec!["region".to_string(), "deaths_nees".to_string()];
    for n in &names {
        header.push(format!("{n}_mae_pct_diff"));
        header.push(format!("{n}_nees"));
    }
    w.write_record(&header)?;
    for row in rows {
        let row_names: Vec<&str> = row.candidates.iter().map(|c| c.name.as_str()).collect();
        if row_names != names {
            return Err(Error::InvalidArgument(format!(
                "region {} has candidates {:?}, expected {:?}",
                row.region, row_names, names
            )));
        }
        let mut rec = vec![row.region.clone(), format!("{:.3}", row.baseline_nees)];
        for c in &row.candidates {
            rec.push(format!("{:.0}", c.mae_pct_diff));
            rec.push(format!("{:.3}", c.nees));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}

pub fn write_table_file(rows: &[EvalRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(rows, file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[10.0, 12.0, 8.0], &[9.0, 10.0, 11.0]).unwrap(), 2.0);
        assert_eq!(
            mean_signed_error(&[10.0, 12.0, 8.0], &[9.0, 10.0, 11.0]).unwrap(),
            0.0
        );
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pct_diff_examples() {
        assert_eq!(mae_pct_diff(5.0, 5.0).unwrap(), 0.0);
        assert!((mae_pct_diff(10.0, 7.6).unwrap() + 24.0).abs() < 1e-12);
        assert!((mae_pct_diff(10.0, 22.4).unwrap() - 124.0).abs() < 1e-12);
        assert!(mae_pct_diff(0.0, 1.0).is_err());
    }

    #[test]
    fn nees_examples() {
        assert_eq!(nees(&[3.0, 4.0], &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(nees(&[1.0, 2.0], &[1.0, 4.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(nees(&[1.0], &[0.0], &[1.0]).is_err());
        assert!(nees(&[1.0], &[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn halving_variance_doubles_nees() {
        let pred = [1.0, 5.0, -2.0];
        let truth = [0.5, 3.0, 1.0];
        let var = [2.0, 3.0, 0.5];
        let half: Vec<f64> = var.iter().map(|v| v / 2.0).collect();
        let a = nees(&pred, &var, &truth).unwrap();
        let b = nees(&pred, &half, &truth).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn table_layout() {
        let base = EvalInput {
            mean: vec![10.0, 10.0],
            variance: vec![4.0, 4.0],
            truth: vec![12.0, 8.0],
        };
        let row = evaluate_region("London", &base, &[("twitter".into(), base.clone())]).unwrap();
        let mut buf = Vec::new();
        write_table(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "region,deaths_nees,twitter_mae_pct_diff,twitter_nees\nLondon,1.000,0,1.000\n"
        );
    }

    proptest! {
        #[test]
        fn mae_is_symmetric_and_translation_invariant(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50),
            shift in -1e3f64..1e3,
        ) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = mae(&p, &t).unwrap();
            prop_assert!((a - mae(&t, &p).unwrap()).abs() < 1e-12);
            let ps: Vec<f64> = p.iter().map(|x| x + shift).collect();
            let ts: Vec<f64> = t.iter().map(|x| x + shift).collect();
            prop_assert!((a - mae(&ps, &ts).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn nees_is_scale_consistent(
            rows in prop::collection::vec((-50f64..50.0, 0.1f64..20.0), 1..40),
            a in 0.1f64..10.0,
        ) {
            let err: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let var: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let zeros = vec![0.0; err.len()];
            let base = nees(&err, &var, &zeros).unwrap();
            let e2: Vec<f64> = err.iter().map(|e| a * e).collect();
            let v2: Vec<f64> = var.iter().map(|v| a * a * v).collect();
            let scaled = nees(&e2, &v2, &zeros).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
