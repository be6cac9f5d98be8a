use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::{Model, OutputFormat};

/// Reads and writes `f64` values, spelling infinities as `"inf"` so they
/// survive JSON and CSV.
pub mod inf_float {
    use std::fmt;

    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    struct FloatVisitor;

    impl Visitor<'_> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(E::custom),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

/// One row of the per-trial output. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u64,
    pub k_argmin: usize,
    pub ell_star: f64,
    #[serde(with = "inf_float")]
    pub t_r_upper: f64,
    pub informative: bool,
    pub oracle_calls: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub chain: String,
    pub model: Model,
    pub nonlazy: bool,
    pub weighted: bool,
    pub budget: u64,
    pub num_paths: u64,
    pub max_path_length: usize,
    pub confidence: f64,
    /// Whether `2·ln(2K/δ)/I ≤ 1/|Ω|` holds.
    pub guaranteed: bool,
    pub master_seed: u64,
    pub exact_lambda2: Option<f64>,
    pub exact_lambda_star: Option<f64>,
    #[serde(with = "inf_float::option")]
    pub exact_relaxation_time: Option<f64>,
    pub oracle_comparison_skipped: bool,
    /// Fraction of trials with a bound below one.
    pub informative_frequency: f64,
    /// Fraction of trials whose bound is at least the exact value.
    pub coverage_frequency: Option<f64>,
    /// `ℓ̂⋆` of the squared chain, per trial, for non-lazy runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw_squared_ell_star: Vec<f64>,
    /// Segments extracted per trial under the single-trajectory model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub usp_segments: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
    pub trials: Vec<TrialSummary>,
}

impl ExperimentReport {
    pub fn write<W: Write>(&self, format: OutputFormat, mut out: W) -> Result<()> {
        match format {
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)?;
            }
            OutputFormat::Csv => write_trials_csv(&self.trials, &mut out)?,
            OutputFormat::Table => out.write_all(self.to_table().as_bytes())?,
        }
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let model = match self.model {
            Model::Rtf => "rtf",
            Model::Usp => "usp",
        };
        let _ = writeln!(s, "chain            {}", self.chain);
        let mut variant = String::from(model);
        if self.nonlazy {
            variant.push_str(", squared chain");
        }
        if self.weighted {
            variant.push_str(", weighted start");
        }
        let _ = writeln!(s, "model            {variant}");
        let _ = writeln!(
            s,
            "budget           n = {}, I = {}, K = {}, delta = {:.6}",
            self.budget, self.num_paths, self.max_path_length, self.confidence
        );
        let _ = writeln!(s, "guaranteed       {}", self.guaranteed);
        match (self.exact_lambda_star, self.exact_relaxation_time) {
            (Some(l), Some(t)) => {
                let _ = writeln!(s, "exact lambda*    {l:.6}  (t_r = {})", fmt_value(t));
            }
            _ => {
                let _ = writeln!(s, "exact lambda*    skipped (no exact spectrum)");
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>6} {:>8} {:>10} {:>12} {:>12} {:>14} {:>20}",
            "trial", "k_argmin", "ell_star", "t_r_upper", "informative", "oracle_calls", "seed"
        );
        for t in &self.trials {
            let _ = writeln!(
                s,
                "{:>6} {:>8} {:>10.6} {:>12} {:>12} {:>14} {:>20}",
                t.trial,
                t.k_argmin,
                t.ell_star,
                fmt_value(t.t_r_upper),
                t.informative,
                t.oracle_calls,
                t.seed
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "informative      {:.4}", self.informative_frequency);
        if let Some(c) = self.coverage_frequency {
            let _ = writeln!(s, "coverage         {c:.4}");
        }
        if let Some(e) = self.elapsed_seconds {
            let _ = writeln!(s, "elapsed          {e:.3} s");
        }
        s
    }
}

pub fn write_trials_csv<W: Write>(trials: &[TrialSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in trials {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: std::io::Read>(input: R) -> Result<Vec<TrialSummary>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub(crate) fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else if v >= 1e4 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
