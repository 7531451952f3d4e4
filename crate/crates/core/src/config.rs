//! Plain-text `key = value` scenario files. `#` starts a comment and
//! `[name]` opens a new section; keys before the first header belong to an
//! unnamed section.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::copula::{kendall_tau_start, CopulaSpec, Family};
use crate::error::{Error, Result};
use crate::estimation::Method;
use crate::simulation::{default_components, Dgp, ScenarioConfig, WeibullComponent, WorkingModel, DEFAULT_CENSOR_BETA};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    entries: BTreeMap<String, (String, usize)>,
    used: std::collections::BTreeSet<String>,
}

impl Section {
    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let v = self.entries.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = '{v}'"))),
        }
    }

    pub fn get_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("section [{}]: missing required key '{key}'", self.name)))
    }

    pub fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("line {line}: cannot parse '{}' in {key}", s.trim())))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Errors listing every key that was never read.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(|k| k.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("section [{}]: unknown keys: {}", self.name, unknown.join(", "))))
        }
    }
}

pub fn parse_config(text: &str) -> Result<Vec<Section>> {
    let mut sections = vec![Section::default()];
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push(Section {
                name: name.trim().to_string(),
                ..Section::default()
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line_no}: expected key = value")))?;
        let key = key.trim().to_string();
        let cur = sections.last_mut().expect("nonempty");
        if cur.entries.insert(key.clone(), (value.trim().to_string(), line_no)).is_some() {
            return Err(Error::Config(format!("line {line_no}: duplicate key '{key}'")));
        }
    }
    if sections[0].entries.is_empty() && sections.len() > 1 {
        sections.remove(0);
    }
    Ok(sections)
}

/// DGP keys: `copula`, `theta` or `kendall_tau`, `components`,
/// `shape{q}`, `scale{q}`, `beta{q}`, `beta_a{q}`, `censor_beta`, `lambda_c`.
pub fn dgp_from_section(s: &mut Section) -> Result<Dgp> {
    let family: Family = s.get_or("copula", Family::Gumbel)?;
    let theta: Option<f64> = s.get("theta")?;
    let ktau: Option<f64> = s.get("kendall_tau")?;
    let copula = match (theta, ktau) {
        (Some(_), Some(_)) => return Err(Error::Config("give theta or kendall_tau, not both".into())),
        (Some(t), None) => CopulaSpec::new(family, t)?,
        (None, Some(k)) => {
            let t = kendall_tau_start(family, k)
                .ok_or_else(|| Error::Config(format!("no {} parameter with Kendall tau {k}", family.name())))?;
            CopulaSpec::new(family, t)?
        }
        (None, None) if family == Family::Independence => CopulaSpec::independence(),
        (None, None) => return Err(Error::Config("missing required key 'theta' (or 'kendall_tau')".into())),
    };
    let defaults = default_components();
    let nq: usize = s.get_or("components", defaults.len())?;
    let mut comps = Vec::with_capacity(nq);
    for q in 0..nq {
        let d = defaults.get(q).cloned();
        let k = q + 1;
        let pick = |v: Option<f64>, dv: Option<f64>, key: &str| {
            v.or(dv).ok_or_else(|| Error::Config(format!("missing required key '{key}{k}'")))
        };
        let shape = pick(s.get(&format!("shape{k}"))?, d.as_ref().map(|c| c.shape), "shape")?;
        let scale = pick(s.get(&format!("scale{k}"))?, d.as_ref().map(|c| c.scale), "scale")?;
        let beta_a = pick(s.get(&format!("beta_a{k}"))?, d.as_ref().map(|c| c.beta_a), "beta_a")?;
        let beta = match s.list::<f64>(&format!("beta{k}"))? {
            Some(b) => b,
            None => d.map(|c| c.beta).ok_or_else(|| Error::Config(format!("missing required key 'beta{k}'")))?,
        };
        comps.push(WeibullComponent {
            shape,
            scale,
            beta,
            beta_a,
        });
    }
    let censor_beta = s.list("censor_beta")?.unwrap_or_else(|| DEFAULT_CENSOR_BETA.to_vec());
    let lambda_c = s.get_or("lambda_c", 0.0)?;
    Dgp::new(comps, copula, censor_beta, lambda_c)
}

/// Truth keys: the DGP keys plus required `taus`.
pub fn truth_from_section(s: &mut Section) -> Result<(Dgp, Vec<f64>)> {
    let dgp = dgp_from_section(s)?;
    let taus: Vec<f64> = s
        .list("taus")?
        .ok_or_else(|| Error::Config(format!("section [{}]: missing required key 'taus'", s.name)))?;
    s.finish()?;
    Ok((dgp, taus))
}

/// Scenario keys: the DGP keys plus `taus`, `reps`, `seed` (required),
/// `n_per_arm`, `censoring`, `working`, `working_copula`, `methods`, `eps`,
/// `conf_level`, `point_only`.
pub fn scenario_from_section(s: &mut Section) -> Result<ScenarioConfig> {
    let dgp = dgp_from_section(s)?;
    let taus: Vec<f64> = s
        .list("taus")?
        .ok_or_else(|| Error::Config(format!("section [{}]: missing required key 'taus'", s.name)))?;
    let reps: usize = s.require("reps")?;
    let seed: u64 = s.require("seed")?;
    let has_lambda = dgp.lambda_c > 0.0;
    let target: Option<f64> = s.get("censoring")?;
    if target.is_some() && has_lambda {
        return Err(Error::Config("give censoring or lambda_c, not both".into()));
    }
    let cfg = ScenarioConfig {
        n_per_arm: s.get_or("n_per_arm", 400)?,
        dgp,
        target_censoring: target,
        taus,
        working: s.get_or("working", WorkingModel::M1)?,
        working_copula: s.get("working_copula")?,
        methods: s.list("methods")?.unwrap_or_else(|| vec![Method::Ipcw, Method::MIpcw]),
        reps,
        seed,
        eps: s.get_or("eps", 1e-6)?,
        conf_level: s.get_or("conf_level", 0.95)?,
        point_only: s.get_or("point_only", false)?,
    };
    s.finish()?;
    cfg.validate()?;
    Ok(cfg)
}
