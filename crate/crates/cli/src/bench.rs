use serde::Deserialize;

use pwls::simbench::{HeteroCase, HeteroSimConfig, HomoSimConfig, Method, SimConfig};

use crate::error::{CliError, Result};

/// Top level of a benchmark file.
///
/// ```toml
/// seed = 1000
/// reps = 200
///
/// [[run]]
/// method = "pwls"
/// design = "homo"
/// k = 100
/// leverage = 15.0
///
/// [[run]]
/// method = "hpwls"
/// design = "hetero"
/// case = 1
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(rename = "run")]
    pub runs: Vec<RunSpec>,
}

fn default_reps() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Homo,
    Hetero,
}

/// One benchmark cell; omitted fields take the design's defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub method: String,
    pub design: Design,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub r: Option<f64>,
    pub leverage: Option<f64>,
    pub case: Option<u8>,
    pub theta: Option<[f64; 2]>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
}

/// A validated cell ready to run.
#[derive(Debug, Clone)]
pub struct Cell {
    pub method: Method,
    pub config: SimConfig,
    pub reps: usize,
    pub seed: u64,
}

impl RunSpec {
    fn cell(&self, file: &BenchFile, seed_override: Option<u64>) -> Result<Cell> {
        let method: Method = self.method.parse()?;
        let config = match self.design {
            Design::Homo => {
                if self.case.is_some() || self.theta.is_some() {
                    return Err(CliError::Config("case and theta apply to hetero designs only".into()));
                }
                let d = HomoSimConfig::default();
                let c = HomoSimConfig {
                    n: self.n.unwrap_or(d.n),
                    p: self.p.unwrap_or(d.p),
                    k: self.k.unwrap_or(d.k),
                    r: self.r.unwrap_or(d.r),
                    leverage: self.leverage,
                    seed: 0,
                };
                c.validate()?;
                SimConfig::Homo(c)
            }
            Design::Hetero => {
                if self.leverage.is_some() {
                    return Err(CliError::Config("leverage applies to homo designs only".into()));
                }
                let d = HeteroSimConfig::default();
                let case = match self.case.unwrap_or(1) {
                    1 => HeteroCase::Correct,
                    2 => HeteroCase::Misspecified,
                    other => return Err(CliError::Config(format!("case must be 1 or 2, got {other}"))),
                };
                let c = HeteroSimConfig {
                    n: self.n.unwrap_or(d.n),
                    p: self.p.unwrap_or(d.p),
                    k: self.k.unwrap_or(d.k),
                    r: self.r.unwrap_or(d.r),
                    case,
                    theta: self.theta.unwrap_or(d.theta),
                    seed: 0,
                };
                c.validate()?;
                SimConfig::Hetero(c)
            }
        };
        let reps = self.reps.unwrap_or(file.reps);
        if reps == 0 {
            return Err(CliError::Config("reps must be positive".into()));
        }
        Ok(Cell {
            method,
            config,
            reps,
            seed: seed_override.or(self.seed).unwrap_or(file.seed),
        })
    }
}

pub fn parse_bench(text: &str, seed_override: Option<u64>) -> Result<Vec<Cell>> {
    let file: BenchFile = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
    if file.runs.is_empty() {
        return Err(CliError::Config("no [[run]] entries".into()));
    }
    file.runs.iter().map(|r| r.cell(&file, seed_override)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cells = parse_bench(
            r#"
            seed = 7
            reps = 3
            [[run]]
            method = "pwls"
            design = "homo"
            leverage = 15.0
            [[run]]
            method = "hpwls"
            design = "hetero"
            case = 2
            reps = 5
            seed = 9
            "#,
            None,
        )
        .unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].reps, 3);
        assert_eq!(cells[0].seed, 7);
        assert_eq!(cells[0].config.scenario(), "L=15");
        assert_eq!(cells[0].config.k(), 100);
        assert_eq!(cells[1].method, Method::Hpwls);
        assert_eq!((cells[1].reps, cells[1].seed), (5, 9));
        assert_eq!(cells[1].config.scenario(), "case2:r=20");
        let overridden = parse_bench("[[run]]\nmethod = \"pwls\"\ndesign = \"homo\"\nseed = 4\n", Some(11)).unwrap();
        assert_eq!(overridden[0].seed, 11);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(parse_bench("seed = 1\n", None).is_err());
        assert!(parse_bench("[[run]]\nmethod = \"ols\"\ndesign = \"homo\"\n", None).is_err());
        assert!(parse_bench("[[run]]\nmethod = \"pwls\"\ndesign = \"homo\"\ncase = 1\n", None).is_err());
        assert!(parse_bench("[[run]]\nmethod = \"pwls\"\ndesign = \"homo\"\ncolour = 1\n", None).is_err());
        assert!(parse_bench("[[run]]\nmethod = \"pwls\"\ndesign = \"homo\"\nk = 2000\n", None).is_err());
    }
}
