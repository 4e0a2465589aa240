use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use serde_yaml::{Number, Value};

use super::config::ScenarioConfig;
use super::sweep::SweepRecord;
use super::{HarnessError, HarnessResult, TOOL_VERSION};
use crate::analysis::{analyze_with_probabilities, DimensionReport};
use crate::protocol::run_preparation;

/// Fixed column header of every tabular output.
pub const SWEEP_HEADER: &str =
    "param,trial,p00,p10,p01,p11,nosignal,pur00,pur01,pur10,pur11,rank,f00,f01,f10,f11";

const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Structured,
    Tabular,
}

/// Result of a single scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub tool_version: String,
    pub seed_used: u64,
    /// True when `probabilities` were estimated from sampled outcomes.
    pub probabilities_estimated: bool,
    pub config_echo: ScenarioConfig,
    /// `probabilities[i][j] = p(j|i)`.
    pub probabilities: [[f64; 2]; 2],
    pub report: DimensionReport,
}

/// Result of a sweep, one record per (grid point, trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDocument {
    pub tool_version: String,
    pub seed_used: u64,
    pub config_echo: ScenarioConfig,
    pub records: Vec<SweepRecord>,
}

/// Draws `shots` outcomes per setting and returns the empirical table.
pub fn sample_probabilities(
    table: &[[f64; 2]; 2],
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> HarnessResult<[[f64; 2]; 2]> {
    let mut out = [[0.0; 2]; 2];
    for (row, p) in out.iter_mut().zip(table) {
        let p0 = p[0].clamp(0.0, 1.0);
        let dist = Binomial::new(shots, p0)
            .map_err(|e| HarnessError::Numerical(format!("binomial sampler: {e}")))?;
        let k = dist.sample(rng);
        row[0] = k as f64 / shots as f64;
        row[1] = (shots - k) as f64 / shots as f64;
    }
    Ok(out)
}

/// Builds the scenario, steers, analyzes and assembles the document.
///
/// A no-signaling residual above tolerance or a span rank above 2 means the
/// arithmetic went wrong and is reported as a numerical failure.
pub fn run_once(config: &ScenarioConfig) -> HarnessResult<ReportDocument> {
    let scenario = config.build_scenario()?;
    let ensemble =
        run_preparation(&scenario).map_err(|e| HarnessError::from_core("run_preparation", e))?;
    let exact = ensemble.probability_table();
    let (probabilities, estimated) = match config.sample_shots {
        Some(shots) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (sample_probabilities(&exact, shots, &mut rng)?, true)
        }
        None => (exact, false),
    };
    let report = analyze_with_probabilities(
        &ensemble,
        &config.tolerances,
        estimated.then_some(probabilities),
    )
    .map_err(|e| HarnessError::from_core("analyze", e))?;
    if report.nosignal_residual > config.tolerances.nosignal_tol {
        return Err(HarnessError::Numerical(format!(
            "no-signaling residual {:e} exceeds nosignal_tol {:e}",
            report.nosignal_residual, config.tolerances.nosignal_tol
        )));
    }
    if let Some(rank) = report.span_rank.filter(|&r| r > 2) {
        return Err(HarnessError::Numerical(format!(
            "span rank {rank} exceeds 2"
        )));
    }
    Ok(ReportDocument {
        tool_version: TOOL_VERSION.to_string(),
        seed_used: config.seed,
        probabilities_estimated: estimated,
        config_echo: config.clone(),
        probabilities,
        report,
    })
}

fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

fn round_value(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *n = Number::from(round_significant(x));
            }
        }
        Value::Sequence(items) => items.iter_mut().for_each(round_value),
        Value::Mapping(map) => map.iter_mut().for_each(|(_, v)| round_value(v)),
        Value::Tagged(tagged) => round_value(&mut tagged.value),
        _ => {}
    }
}

fn to_structured<T: Serialize>(doc: &T) -> String {
    let mut value =
        serde_yaml::with::singleton_map_recursive::serialize(doc, serde_yaml::value::Serializer)
            .expect("report documents serialize to plain values");
    round_value(&mut value);
    serde_yaml::to_string(&value).expect("plain values serialize to text")
}

fn from_structured<T: for<'de> Deserialize<'de>>(text: &str) -> HarnessResult<T> {
    serde_yaml::with::singleton_map_recursive::deserialize(serde_yaml::Deserializer::from_str(text))
        .map_err(|e| HarnessError::Parse(e.to_string()))
}

/// Renders a number with 12 significant digits, in positional notation for
/// moderate magnitudes and scientific notation otherwise.
pub fn format_number(x: f64) -> String {
    let r = round_significant(x);
    if r == 0.0 || !r.is_finite() || (1e-4..1e12).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub(crate) fn tabular_row(param: Option<f64>, record: &SweepRecord) -> String {
    let p = &record.probabilities;
    let mut cells = vec![
        optional(param),
        record.trial.to_string(),
        format_number(p[0][0]),
        format_number(p[0][1]),
        format_number(p[1][0]),
        format_number(p[1][1]),
        format_number(record.nosignal),
    ];
    cells.extend(record.purities.iter().map(|&x| optional(x)));
    cells.push(record.rank.map(|r| r.to_string()).unwrap_or_default());
    let fidelities = record.fidelities.unwrap_or([None; 4]);
    cells.extend(fidelities.iter().map(|&x| optional(x)));
    cells.join(",")
}

/// Structured output is the full document; tabular output is the header and
/// one row with an empty parameter column.
pub fn emit_report(doc: &ReportDocument, format: OutputFormat) -> String {
    match format {
        OutputFormat::Structured => to_structured(doc),
        OutputFormat::Tabular => {
            let record = SweepRecord::from_document(0.0, 0, doc);
            format!("{SWEEP_HEADER}\n{}\n", tabular_row(None, &record))
        }
    }
}

pub fn emit_sweep(doc: &SweepDocument, format: OutputFormat) -> String {
    match format {
        OutputFormat::Structured => to_structured(doc),
        OutputFormat::Tabular => {
            let mut out = String::from(SWEEP_HEADER);
            out.push('\n');
            for record in &doc.records {
                out.push_str(&tabular_row(Some(record.param), record));
                out.push('\n');
            }
            out
        }
    }
}

pub fn parse_report(text: &str) -> HarnessResult<ReportDocument> {
    from_structured(text)
}

pub fn parse_sweep_document(text: &str) -> HarnessResult<SweepDocument> {
    from_structured(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_scenario;
    use crate::harness::StateSpec;

    #[test]
    fn ideal_run() {
        let doc = run_once(&ScenarioConfig::ideal()).unwrap();
        for row in doc.probabilities {
            for p in row {
                assert!((p - 0.5).abs() <= 1e-12);
            }
        }
        assert_eq!(doc.report.span_rank, Some(2));
        assert_eq!(doc.report.usd_feasible, Some(false));
        assert!(!doc.probabilities_estimated);
        let text = emit_report(&doc, OutputFormat::Structured);
        assert!(text.contains("span_rank: 2"), "{text}");
    }

    #[test]
    fn werner_run_reports_mixed_branches() {
        let mut config = ScenarioConfig::ideal();
        config.state = StateSpec::Werner { v: 0.9 };
        let doc = run_once(&config).unwrap();
        assert!(!doc.report.all_pure);
        for p in doc.report.purities {
            assert!((p.unwrap() - 0.905).abs() <= 1e-9);
        }
        assert_eq!(doc.report.span_rank, None);
    }

    #[test]
    fn structured_round_trip_is_byte_identical() {
        let config = parse_scenario(
            "{state: {random_pure: {seed: 11}}, measurements: [{tilted: {alpha: 0.2}}, hadamard], seed: 5}",
        )
        .unwrap();
        let doc = run_once(&config).unwrap();
        let first = emit_report(&doc, OutputFormat::Structured);
        let second = emit_report(&parse_report(&first).unwrap(), OutputFormat::Structured);
        assert_eq!(first, second);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let mut config = ScenarioConfig::ideal();
        config.sample_shots = Some(1000);
        config.seed = 42;
        assert_eq!(run_once(&config).unwrap(), run_once(&config).unwrap());
    }

    #[test]
    fn sampled_probabilities_are_flagged_and_normalized() {
        let mut config = ScenarioConfig::ideal();
        config.sample_shots = Some(10_000);
        let doc = run_once(&config).unwrap();
        assert!(doc.probabilities_estimated);
        for row in doc.probabilities {
            assert_eq!(row[0] + row[1], 1.0);
            assert!((row[0] - 0.5).abs() < 0.03);
        }
        assert!(doc.report.nosignal_residual <= 1e-11);
    }

    #[test]
    fn tabular_report_has_fixed_header() {
        let doc = run_once(&ScenarioConfig::ideal()).unwrap();
        let text = emit_report(&doc, OutputFormat::Tabular);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SWEEP_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 16);
        assert_eq!(row[0], "");
        assert_eq!(&row[2..6], &["0.5"; 4]);
        assert_eq!(row[11], "2");
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(2.0_f64.sqrt() * 1e-17), "1.41421356237e-17");
        assert_eq!(format_number(0.9049999999999999), "0.905");
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(1.234567890123456), 1.23456789012);
        assert_eq!(
            round_significant(round_significant(0.123456789012345)),
            0.123456789012
        );
        assert_eq!(round_significant(-2.5e-300), -2.5e-300);
    }
}
