//! Flat `key = value` experiment-file parsing.
//!
//! The format is line-based: blank lines and lines starting with `#` are
//! skipped, every other line must read `key = value`, keys carry section
//! prefixes (`grid.s`, `experiment.seed`, `power.rho`), list values are
//! comma-separated, and covariance families are written as a name with an
//! optional parenthesized argument list, e.g. `equicorrelation(gamma=0.5)`
//! or `diagonalscaled(weights=1:0.5:0.25)`.
//!
//! Syntax problems (malformed lines, unparseable numbers, unknown family
//! names) surface as [`Error::ConfigSyntax`]; semantic problems (missing or
//! unknown keys, out-of-range values) as [`Error::InvalidConfig`].

use crate::detect::SweepGrid;
use crate::mc::{EstimatorKind, ExperimentConfig, GridSpec};
use crate::models::{CovFamily, SignalShape};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};

/// Parsed key/value file with consumption tracking: every getter marks its
/// key as used, and [`ConfigMap::finish`] rejects leftovers so typos in
/// key names cannot silently change an experiment.
#[derive(Debug, Clone)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

fn syntax(msg: String) -> Error {
    Error::ConfigSyntax(msg)
}

impl ConfigMap {
    /// Parses the full text of a config file.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(syntax(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty() {
                return Err(syntax(format!("line {}: empty key", lineno + 1)));
            }
            if value.is_empty() {
                return Err(syntax(format!(
                    "line {}: empty value for key '{key}'",
                    lineno + 1
                )));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(syntax(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(ConfigMap {
            entries,
            used: BTreeSet::new(),
        })
    }

    /// Raw value lookup; marks the key as consumed.
    pub fn opt_str(&mut self, key: &str) -> Option<String> {
        let v = self.entries.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    pub fn req_str(&mut self, key: &str) -> Result<String> {
        self.opt_str(key)
            .ok_or_else(|| Error::InvalidConfig(format!("missing required key '{key}'")))
    }

    pub fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.opt_str(key)
            .map(|v| parse_num::<f64>(key, &v))
            .transpose()
    }

    pub fn req_f64(&mut self, key: &str) -> Result<f64> {
        parse_num(key, &self.req_str(key)?)
    }

    pub fn opt_u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.opt_str(key)
            .map(|v| parse_num::<u64>(key, &v))
            .transpose()
    }

    pub fn req_u64(&mut self, key: &str) -> Result<u64> {
        parse_num(key, &self.req_str(key)?)
    }

    pub fn opt_usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.opt_str(key)
            .map(|v| parse_num::<usize>(key, &v))
            .transpose()
    }

    pub fn req_usize(&mut self, key: &str) -> Result<usize> {
        parse_num(key, &self.req_str(key)?)
    }

    pub fn req_f64_list(&mut self, key: &str) -> Result<Vec<f64>> {
        split_top_level(&self.req_str(key)?)?
            .iter()
            .map(|t| parse_num(key, t))
            .collect()
    }

    pub fn req_usize_list(&mut self, key: &str) -> Result<Vec<usize>> {
        split_top_level(&self.req_str(key)?)?
            .iter()
            .map(|t| parse_num(key, t))
            .collect()
    }

    pub fn req_families(&mut self, key: &str) -> Result<Vec<CovFamily>> {
        split_top_level(&self.req_str(key)?)?
            .iter()
            .map(|t| parse_family(t))
            .collect()
    }

    pub fn req_shapes(&mut self, key: &str) -> Result<Vec<SignalShape>> {
        split_top_level(&self.req_str(key)?)?
            .iter()
            .map(|t| parse_shape(t))
            .collect()
    }

    /// Errors if any key was never consumed (catches misspelled keys).
    pub fn finish(self) -> Result<()> {
        let unused: Vec<&String> = self
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if unused.is_empty() {
            Ok(())
        } else {
            let list = unused
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ");
            Err(Error::InvalidConfig(format!("unknown config keys: {list}")))
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, token: &str) -> Result<T> {
    token.trim().parse::<T>().map_err(|_| {
        syntax(format!(
            "key '{key}': cannot parse '{}' as a {}",
            token.trim(),
            std::any::type_name::<T>()
        ))
    })
}

/// Splits a comma-separated list while respecting parentheses, so family
/// specs like `blockones(r=5,p=8)` survive as single tokens.
pub fn split_top_level(value: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in value.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| syntax(format!("unbalanced ')' in '{value}'")))?;
                current.push(ch);
            }
            ',' if depth == 0 => {
                out.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    if depth != 0 {
        return Err(syntax(format!("unbalanced '(' in '{value}'")));
    }
    out.push(current.trim().to_string());
    if out.iter().any(|t| t.is_empty()) {
        return Err(syntax(format!("empty list element in '{value}'")));
    }
    Ok(out)
}

fn family_args(token: &str) -> Result<(String, BTreeMap<String, String>)> {
    let token = token.trim();
    let (name, rest) = match token.find('(') {
        None => (token.to_string(), None),
        Some(open) => {
            if !token.ends_with(')') {
                return Err(syntax(format!("family '{token}': missing closing ')'")));
            }
            (
                token[..open].trim().to_string(),
                Some(&token[open + 1..token.len() - 1]),
            )
        }
    };
    let mut args = BTreeMap::new();
    if let Some(body) = rest {
        for part in body.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(syntax(format!("family '{token}': empty argument")));
            }
            let Some(eq) = part.find('=') else {
                return Err(syntax(format!(
                    "family '{token}': argument '{part}' is not name=value"
                )));
            };
            let k = part[..eq].trim().to_string();
            let v = part[eq + 1..].trim().to_string();
            if args.insert(k.clone(), v).is_some() {
                return Err(syntax(format!(
                    "family '{token}': duplicate argument '{k}'"
                )));
            }
        }
    }
    Ok((name.to_lowercase(), args))
}

fn take_arg(token: &str, args: &mut BTreeMap<String, String>, name: &str) -> Result<String> {
    args.remove(name)
        .ok_or_else(|| syntax(format!("family '{token}': missing argument '{name}'")))
}

fn no_leftover(token: &str, args: BTreeMap<String, String>) -> Result<()> {
    if let Some(k) = args.keys().next() {
        return Err(syntax(format!("family '{token}': unknown argument '{k}'")));
    }
    Ok(())
}

/// Parses one covariance family spec: `identity`,
/// `equicorrelation(gamma=0.5)`, `blockones(r=5,p=8)`, `ar1(rho=0.9)`, or
/// `diagonalscaled(weights=1:0.5:0.25)`.
pub fn parse_family(token: &str) -> Result<CovFamily> {
    let (name, mut args) = family_args(token)?;
    let fam = match name.as_str() {
        "identity" => CovFamily::Identity,
        "equicorrelation" => {
            let gamma: f64 = parse_num("gamma", &take_arg(token, &mut args, "gamma")?)?;
            CovFamily::Equicorrelation { gamma }
        }
        "blockones" => {
            let r: usize = parse_num("r", &take_arg(token, &mut args, "r")?)?;
            let p: usize = parse_num("p", &take_arg(token, &mut args, "p")?)?;
            CovFamily::BlockOnes { r, p }
        }
        "ar1" => {
            let rho_corr: f64 = parse_num("rho", &take_arg(token, &mut args, "rho")?)?;
            CovFamily::Ar1 { rho_corr }
        }
        "diagonalscaled" => {
            let spec = take_arg(token, &mut args, "weights")?;
            let weights = spec
                .split(':')
                .map(|w| parse_num::<f64>("weights", w))
                .collect::<Result<Vec<f64>>>()?;
            CovFamily::DiagonalScaled { weights }
        }
        other => {
            return Err(syntax(format!(
                "unknown covariance family '{other}' \
                 (expected identity, equicorrelation, blockones, ar1, diagonalscaled)"
            )))
        }
    };
    no_leftover(token, args)?;
    Ok(fam)
}

/// Parses a signal shape keyword (`flat`, `single-spike`, `geometric`).
pub fn parse_shape(token: &str) -> Result<SignalShape> {
    token
        .trim()
        .parse::<SignalShape>()
        .map_err(|_| syntax(format!("unknown signal shape '{}'", token.trim())))
}

/// Parses an estimator keyword plus its parameter keys
/// (`experiment.rho` for n-tilde, `experiment.eta` for the eta variants).
pub fn estimator_from_map(map: &mut ConfigMap) -> Result<EstimatorKind> {
    let name = map.req_str("experiment.estimator")?;
    match name.as_str() {
        "n-hat" => Ok(EstimatorKind::NHat),
        "n-tilde" => Ok(EstimatorKind::NTilde {
            rho: map.req_f64("experiment.rho")?,
        }),
        "n-star" => Ok(EstimatorKind::NStar),
        "n-star-eta" => Ok(EstimatorKind::NStarEta {
            eta: map.req_f64("experiment.eta")?,
        }),
        "n-star-star" => Ok(EstimatorKind::NStarStar {
            eta: map.req_f64("experiment.eta")?,
        }),
        other => Err(syntax(format!(
            "unknown estimator '{other}' \
             (expected n-hat, n-tilde, n-star, n-star-eta, n-star-star)"
        ))),
    }
}

/// Assembles a full experiment description from the standard key set:
/// `experiment.{id,estimator,rho,eta,replications,seed}` and
/// `grid.{d,s,sigma,family,shape,norm2}`.
pub fn experiment_from_map(map: &mut ConfigMap) -> Result<ExperimentConfig> {
    let experiment_id = map
        .opt_str("experiment.id")
        .unwrap_or_else(|| "experiment".to_string());
    let estimator = estimator_from_map(map)?;
    let grid = GridSpec {
        dims: map.req_usize_list("grid.d")?,
        sparsities: map.req_usize_list("grid.s")?,
        sigmas: map.req_f64_list("grid.sigma")?,
        families: map.req_families("grid.family")?,
        shapes: map.req_shapes("grid.shape")?,
        norm2_targets: map.req_f64_list("grid.norm2")?,
    };
    let replications = map.req_usize("experiment.replications")?;
    let seed = map.req_u64("experiment.seed")?;
    let config = ExperimentConfig {
        experiment_id,
        estimator,
        grid,
        replications,
        seed,
    };
    config.validate()?;
    Ok(config)
}

/// A parsed `test-power` run: models are still family specs here; the
/// caller materializes them at dimension `d`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PowerConfig {
    pub id: String,
    pub d: usize,
    pub s: usize,
    pub sigma: f64,
    pub rho: f64,
    pub replications: usize,
    pub seed: u64,
    pub nulls: Vec<CovFamily>,
    pub alt_families: Vec<CovFamily>,
    pub alt_shapes: Vec<SignalShape>,
    pub grid: SweepGrid,
}

/// Assembles a test-power sweep from `power.*` keys: `power.{d,s,sigma,
/// rho,replications,seed,nulls,alt-family,alt-shape,grid}` plus
/// `power.gamma`/`power.radii` (radius grid) or `power.gammas` (gamma
/// grid).
pub fn power_from_map(map: &mut ConfigMap) -> Result<PowerConfig> {
    let grid = match map.req_str("power.grid")?.as_str() {
        "radius" => SweepGrid::Radius {
            gamma: map.req_f64("power.gamma")?,
            radii: map.req_f64_list("power.radii")?,
        },
        "gamma" => SweepGrid::Gamma {
            gammas: map.req_f64_list("power.gammas")?,
        },
        other => {
            return Err(syntax(format!(
                "power.grid must be 'radius' or 'gamma', got '{other}'"
            )))
        }
    };
    Ok(PowerConfig {
        id: map
            .opt_str("power.id")
            .unwrap_or_else(|| "power".to_string()),
        d: map.req_usize("power.d")?,
        s: map.req_usize("power.s")?,
        sigma: map.req_f64("power.sigma")?,
        rho: map.req_f64("power.rho")?,
        replications: map.req_usize("power.replications")?,
        seed: map.req_u64("power.seed")?,
        nulls: map.req_families("power.nulls")?,
        alt_families: map.req_families("power.alt-family")?,
        alt_shapes: map.req_shapes("power.alt-shape")?,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIM: &str = "\
# demo experiment
experiment.id = demo
experiment.estimator = n-tilde
experiment.rho = 6.5
experiment.replications = 20
experiment.seed = 9

grid.d = 100, 200
grid.s = 2, 8
grid.sigma = 1.0
grid.family = identity, equicorrelation(gamma=0.25), blockones(r=5, p=8)
grid.shape = flat, single-spike
grid.norm2 = 0, 3.5
";

    #[test]
    fn parses_full_experiment() {
        let mut map = ConfigMap::parse(SIM).unwrap();
        let cfg = experiment_from_map(&mut map).unwrap();
        map.finish().unwrap();
        assert_eq!(cfg.experiment_id, "demo");
        assert_eq!(cfg.estimator, EstimatorKind::NTilde { rho: 6.5 });
        assert_eq!(cfg.grid.dims, vec![100, 200]);
        assert_eq!(cfg.grid.families.len(), 3);
        assert_eq!(
            cfg.grid.families[1],
            CovFamily::Equicorrelation { gamma: 0.25 }
        );
        assert_eq!(cfg.grid.families[2], CovFamily::BlockOnes { r: 5, p: 8 });
        assert_eq!(
            cfg.grid.shapes,
            vec![SignalShape::Flat, SignalShape::SingleSpike]
        );
        assert_eq!(cfg.grid.n_cells(), 2 * 2 * 1 * 3 * 2 * 2);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn syntax_errors_are_syntax() {
        for bad in ["novalue\n", "key = \n", " = value\n", "a = 1\na = 2\n"] {
            assert!(
                matches!(ConfigMap::parse(bad).unwrap_err(), Error::ConfigSyntax(_)),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let map = ConfigMap::parse("# top\n\n  # indented comment\nx = 1\n").unwrap();
        let mut map = map;
        assert_eq!(map.req_usize("x").unwrap(), 1);
        map.finish().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_at_finish() {
        let mut map = ConfigMap::parse("known = 1\ntypo = 2\n").unwrap();
        let _ = map.req_usize("known").unwrap();
        let err = map.finish().unwrap_err();
        match err {
            Error::InvalidConfig(msg) => assert!(msg.contains("typo"), "{msg}"),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn missing_required_key_is_validation() {
        let mut map = ConfigMap::parse("experiment.estimator = n-hat\n").unwrap();
        assert!(matches!(
            experiment_from_map(&mut map).unwrap_err(),
            Error::InvalidConfig(_)
        ));
    }

    #[test]
    fn list_splitting_respects_parens() {
        let toks = split_top_level("identity, blockones(r=2,p=3), ar1(rho=0.5)").unwrap();
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[1], "blockones(r=2,p=3)");
        assert!(split_top_level("a, (b").is_err());
        assert!(split_top_level("a)").is_err());
        assert!(split_top_level("a,,b").is_err());
    }

    #[test]
    fn family_grammar() {
        assert_eq!(parse_family("identity").unwrap(), CovFamily::Identity);
        assert_eq!(
            parse_family(" AR1(rho=0.9) ").unwrap(),
            CovFamily::Ar1 { rho_corr: 0.9 }
        );
        assert_eq!(
            parse_family("diagonalscaled(weights=1:0.5:0.25)").unwrap(),
            CovFamily::DiagonalScaled {
                weights: vec![1.0, 0.5, 0.25]
            }
        );
        for bad in [
            "mystery",
            "equicorrelation",
            "equicorrelation(g=0.5)",
            "equicorrelation(gamma=0.5,extra=1)",
            "blockones(r=2)",
            "ar1(rho=x)",
            "identity(",
        ] {
            let err = parse_family(bad).unwrap_err();
            assert!(matches!(err, Error::ConfigSyntax(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn shape_grammar() {
        assert_eq!(parse_shape("flat").unwrap(), SignalShape::Flat);
        assert_eq!(
            parse_shape("single-spike").unwrap(),
            SignalShape::SingleSpike
        );
        assert_eq!(parse_shape("geometric").unwrap(), SignalShape::Geometric);
        assert!(parse_shape("round").is_err());
    }

    #[test]
    fn estimator_parameter_keys() {
        let mut map =
            ConfigMap::parse("experiment.estimator = n-star-eta\nexperiment.eta = 0.2\n").unwrap();
        assert_eq!(
            estimator_from_map(&mut map).unwrap(),
            EstimatorKind::NStarEta { eta: 0.2 }
        );
        let mut map = ConfigMap::parse("experiment.estimator = n-tilde\n").unwrap();
        assert!(estimator_from_map(&mut map).is_err());
        let mut map = ConfigMap::parse("experiment.estimator = nhat\n").unwrap();
        assert!(matches!(
            estimator_from_map(&mut map).unwrap_err(),
            Error::ConfigSyntax(_)
        ));
    }

    #[test]
    fn power_config_both_grids() {
        let mut map = ConfigMap::parse(
            "power.d = 400\npower.s = 5\npower.sigma = 1\npower.rho = 40\n\
             power.replications = 50\npower.seed = 3\npower.nulls = identity\n\
             power.alt-family = identity\npower.alt-shape = flat\n\
             power.grid = radius\npower.gamma = 1.5\npower.radii = 1,2,4\n",
        )
        .unwrap();
        let cfg = power_from_map(&mut map).unwrap();
        map.finish().unwrap();
        assert_eq!(cfg.d, 400);
        match cfg.grid {
            SweepGrid::Radius { gamma, ref radii } => {
                assert_eq!(gamma, 1.5);
                assert_eq!(radii, &vec![1.0, 2.0, 4.0]);
            }
            _ => panic!("wrong grid"),
        }

        let mut map = ConfigMap::parse(
            "power.d = 400\npower.s = 5\npower.sigma = 1\npower.rho = 40\n\
             power.replications = 50\npower.seed = 3\npower.nulls = identity\n\
             power.alt-family = identity\npower.alt-shape = flat\n\
             power.grid = gamma\npower.gammas = 0.5, 1, 2\n",
        )
        .unwrap();
        let cfg = power_from_map(&mut map).unwrap();
        map.finish().unwrap();
        match cfg.grid {
            SweepGrid::Gamma { ref gammas } => assert_eq!(gammas, &vec![0.5, 1.0, 2.0]),
            _ => panic!("wrong grid"),
        }
    }

    #[test]
    fn grid_validation_flows_through() {
        let text = SIM.replace("grid.sigma = 1.0", "grid.sigma = -1.0");
        let mut map = ConfigMap::parse(&text).unwrap();
        assert!(matches!(
            experiment_from_map(&mut map).unwrap_err(),
            Error::InvalidConfig(_)
        ));
    }
}
