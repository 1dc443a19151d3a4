use std::collections::BTreeMap;
use std::io::Write;

use super::config::Scheme;
use crate::Result;

pub const CSV_HEADER: &str = "scheme,seed,k,a_out,sum_rate_mbps,jain,mean_reward";
pub const SUMMARY_HEADER: &str = "scheme,k,a_out,n,sum_rate_mbps_mean,sum_rate_mbps_std,jain_mean,mean_reward_mean";

/// Jain's fairness index `(sum r)^2 / (n * sum r^2)`; `None` when every rate
/// is zero or the slice is empty.
pub fn jain_index(rates: &[f64]) -> Option<f64> {
    let sum: f64 = rates.iter().sum();
    let sq: f64 = rates.iter().map(|r| r * r).sum();
    if rates.is_empty() || sq == 0.0 {
        return None;
    }
    Some((sum * sum / (rates.len() as f64 * sq)).min(1.0))
}

/// One evaluated (scheme, seed, sweep point).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scheme: Scheme,
    pub seed: u64,
    pub k: usize,
    pub a_out: f64,
    pub sum_rate_mbps: f64,
    pub jain: Option<f64>,
    pub mean_reward: f64,
}

/// Decimal rendering rounded to `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - magnitude;
    if decimals >= 0 {
        let s = format!("{:.*}", decimals as usize, x);
        // Rounding can carry into a new leading digit (9.999995 -> 10.00000).
        let reparsed: f64 = s.parse().expect("formatted float");
        if reparsed != 0.0 && (reparsed.abs().log10().floor() as i32) > magnitude && decimals > 0 {
            return format!("{:.*}", decimals as usize - 1, x);
        }
        s
    } else {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    }
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.scheme.name(),
            self.seed,
            self.k,
            format_sig(self.a_out, 6),
            format_sig(self.sum_rate_mbps, 6),
            self.jain.map(|j| format_sig(j, 6)).unwrap_or_default(),
            format_sig(self.mean_reward, 6),
        )
    }
}

/// Rows ordered by scheme, then sweep value, then seed.
pub fn sort_rows(rows: &mut [MetricsRow]) {
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.k.cmp(&b.k))
            .then(a.a_out.total_cmp(&b.a_out))
            .then(a.seed.cmp(&b.seed))
    });
}

pub fn write_csv<W: Write>(rows: &[MetricsRow], mut w: W) -> Result<()> {
    w.write_all(CSV_HEADER.as_bytes())?;
    w.write_all(b"\n")?;
    for r in rows {
        w.write_all(r.to_csv_line().as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Per (scheme, sweep point) aggregate over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub k: usize,
    pub a_out: f64,
    pub n: usize,
    pub sum_rate_mean: f64,
    pub sum_rate_std: f64,
    pub jain_mean: Option<f64>,
    pub reward_mean: f64,
}

pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Scheme, usize, u64), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.scheme, r.k, r.a_out.to_bits())).or_default().push(r);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((scheme, k, a_bits), g)| {
            let n = g.len();
            let mean = g.iter().map(|r| r.sum_rate_mbps).sum::<f64>() / n as f64;
            let var = if n > 1 {
                g.iter().map(|r| (r.sum_rate_mbps - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let jains: Vec<f64> = g.iter().filter_map(|r| r.jain).collect();
            SummaryRow {
                scheme,
                k,
                a_out: f64::from_bits(a_bits),
                n,
                sum_rate_mean: mean,
                sum_rate_std: var.sqrt(),
                jain_mean: (!jains.is_empty()).then(|| jains.iter().sum::<f64>() / jains.len() as f64),
                reward_mean: g.iter().map(|r| r.mean_reward).sum::<f64>() / n as f64,
            }
        })
        .collect();
    out.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(a.k.cmp(&b.k)).then(a.a_out.total_cmp(&b.a_out)));
    out
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut w: W) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.scheme.name(),
            r.k,
            format_sig(r.a_out, 6),
            r.n,
            format_sig(r.sum_rate_mean, 6),
            format_sig(r.sum_rate_std, 6),
            r.jain_mean.map(|j| format_sig(j, 6)).unwrap_or_default(),
            format_sig(r.reward_mean, 6),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[3.0, 3.0, 3.0]), Some(1.0));
        assert!((jain_index(&[0.0, 5.0, 0.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((jain_index(&[1.0, 3.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(jain_index(&[0.0, 0.0]), None);
        assert_eq!(jain_index(&[]), None);
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig(9876.54321, 6), "9876.54");
        assert_eq!(format_sig(0.8, 6), "0.800000");
        assert_eq!(format_sig(1.0 / 30.0, 6), "0.0333333");
        assert_eq!(format_sig(1.0, 6), "1.00000");
        assert_eq!(format_sig(9.9999996, 6), "10.0000");
        assert_eq!(format_sig(123456789.0, 6), "123457000");
        assert_eq!(format_sig(-42.0, 6), "-42.0000");
        assert_eq!(format_sig(0.0, 6), "0");
    }

    #[test]
    fn csv_layout() {
        let row = MetricsRow {
            scheme: Scheme::Myopic,
            seed: 3,
            k: 4,
            a_out: 1.0 / 30.0,
            sum_rate_mbps: 9500.123456,
            jain: None,
            mean_reward: 31.25,
        };
        let mut out = Vec::new();
        write_csv(&[row], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "scheme,seed,k,a_out,sum_rate_mbps,jain,mean_reward\nMYOPIC,3,4,0.0333333,9500.12,,31.2500\n"
        );
    }
}
