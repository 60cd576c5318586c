//! Flat `key = value` run configuration with optional `[section]` headers.

use std::collections::BTreeMap;
use std::fmt::Write;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::h2_synth::H2Weights;
use crate::io::fmt_f64;
use crate::ring_model::{GuidanceKind, OvmParams};
use crate::sdp::SdpOptions;
use crate::simulator::{DelayRealization, Plant, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ovm: OvmParams,
    pub weights: H2Weights,
    pub sim: SimConfig,
    pub guidance: GuidanceKind,
    pub plant: Plant,
    pub k_mult: f64,
    pub bernoulli_p: f64,
    pub mask_redraw: bool,
    pub delay_realization: DelayRealization,
    pub search_min: f64,
    pub search_max: f64,
    pub granularity: f64,
    pub sdp: SdpOptions,
    pub epsilon: f64,
    pub c_prime: f64,
    pub c_dprime: f64,
    pub d_margin: f64,
    /// Fixed smoothness constant for the delay bound; estimated from a pilot run when `None`.
    pub d_v_bar: Option<f64>,
    /// Compute the LK column in sweeps.
    pub lk_in_sweeps: bool,
    /// Raw `key = value` pairs as read, in file order.
    pub overrides: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ovm: OvmParams::default(),
            weights: H2Weights::default(),
            sim: SimConfig::default(),
            guidance: GuidanceKind::PiecewiseAcceleration,
            plant: Plant::NonlinearOvm,
            k_mult: 1.0,
            bernoulli_p: 0.5,
            mask_redraw: false,
            delay_realization: DelayRealization::WorstCase,
            search_min: 0.0,
            search_max: 10.0,
            granularity: 0.01,
            sdp: SdpOptions::default(),
            epsilon: 1.0,
            c_prime: 1.0,
            c_dprime: 1.0,
            d_margin: 2.0,
            d_v_bar: None,
            lk_in_sweeps: false,
            overrides: BTreeMap::new(),
        }
    }
}

/// Section each key belongs to.
const KEYS: &[(&str, &str)] = &[
    ("L", "ovm"),
    ("n", "ovm"),
    ("s_st", "ovm"),
    ("s_go", "ovm"),
    ("v_max", "ovm"),
    ("alpha", "ovm"),
    ("beta", "ovm"),
    ("guidance", "ovm"),
    ("k_mult", "control"),
    ("gamma_s", "control"),
    ("gamma_v", "control"),
    ("gamma_u", "control"),
    ("epsilon", "control"),
    ("plant", "sim"),
    ("t_step", "sim"),
    ("total_time", "sim"),
    ("n_seeds", "sim"),
    ("perturb_s", "sim"),
    ("perturb_v", "sim"),
    ("a_min", "sim"),
    ("s_d", "sim"),
    ("convergence_eps", "sim"),
    ("rng_seed", "sim"),
    ("aeb", "sim"),
    ("divergence_norm", "sim"),
    ("bernoulli_p", "sim"),
    ("mask_redraw", "sim"),
    ("delay_realization", "sim"),
    ("search_min", "search"),
    ("search_max", "search"),
    ("granularity", "search"),
    ("lk_in_sweeps", "search"),
    ("lmi_margin", "lmi"),
    ("lmi_box", "lmi"),
    ("sdp_tol", "lmi"),
    ("sdp_max_iter", "lmi"),
    ("c_prime", "theory"),
    ("c_dprime", "theory"),
    ("d_margin", "theory"),
    ("d_v_bar", "theory"),
];

fn section_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s)
}

fn num(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::parse(line, format!("{key}: '{v}' is not a number")))?;
    if !x.is_finite() {
        return Err(Error::parse(line, format!("{key}: value must be finite")));
    }
    Ok(x)
}

fn int(line: usize, key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::parse(line, format!("{key}: '{v}' is not a nonnegative integer")))
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::parse(line, format!("{key}: '{v}' is not a boolean"))),
    }
}

impl RunConfig {
    /// Parses config text; unknown keys, duplicates and misplaced keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(line_no, "unterminated section header"))?
                    .trim();
                if !KEYS.iter().any(|(_, s)| *s == name) {
                    return Err(Error::parse(line_no, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            let home = section_of(key).ok_or_else(|| Error::parse(line_no, format!("unknown key '{key}'")))?;
            if let Some(s) = &section {
                if s != home {
                    return Err(Error::parse(line_no, format!("key '{key}' belongs in [{home}], not [{s}]")));
                }
            }
            if cfg.overrides.contains_key(key) {
                return Err(Error::parse(line_no, format!("duplicate key '{key}'")));
            }
            cfg.set(line_no, key, value)?;
            cfg.overrides.insert(key.to_string(), value.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "L" => self.ovm.l = num(line, key, v)?,
            "n" => self.ovm.n = int(line, key, v)? as usize,
            "s_st" => self.ovm.s_st = num(line, key, v)?,
            "s_go" => self.ovm.s_go = num(line, key, v)?,
            "v_max" => self.ovm.v_max = num(line, key, v)?,
            "alpha" => self.ovm.alpha = num(line, key, v)?,
            "beta" => self.ovm.beta = num(line, key, v)?,
            "guidance" => {
                self.guidance = match v {
                    "acceleration" => GuidanceKind::PiecewiseAcceleration,
                    "velocity" => GuidanceKind::PiecewiseVelocity,
                    _ => return Err(Error::parse(line, "guidance must be 'acceleration' or 'velocity'")),
                }
            }
            "k_mult" => self.k_mult = num(line, key, v)?,
            "gamma_s" => self.weights.gamma_s = num(line, key, v)?,
            "gamma_v" => self.weights.gamma_v = num(line, key, v)?,
            "gamma_u" => self.weights.gamma_u = num(line, key, v)?,
            "epsilon" => self.epsilon = num(line, key, v)?,
            "plant" => {
                self.plant = match v {
                    "nonlinear" => Plant::NonlinearOvm,
                    "linearized" => Plant::Linearized,
                    _ => return Err(Error::parse(line, "plant must be 'nonlinear' or 'linearized'")),
                }
            }
            "t_step" => self.sim.t_step = num(line, key, v)?,
            "total_time" => self.sim.total_time = num(line, key, v)?,
            "n_seeds" => self.sim.n_seeds = int(line, key, v)? as usize,
            "perturb_s" => self.sim.perturb_s = num(line, key, v)?,
            "perturb_v" => self.sim.perturb_v = num(line, key, v)?,
            "a_min" => self.sim.a_min = num(line, key, v)?,
            "s_d" => self.sim.s_d = num(line, key, v)?,
            "convergence_eps" => self.sim.convergence_eps = num(line, key, v)?,
            "rng_seed" => self.sim.rng_seed = int(line, key, v)?,
            "aeb" => self.sim.aeb = boolean(line, key, v)?,
            "divergence_norm" => self.sim.divergence_norm = num(line, key, v)?,
            "bernoulli_p" => self.bernoulli_p = num(line, key, v)?,
            "mask_redraw" => self.mask_redraw = boolean(line, key, v)?,
            "delay_realization" => {
                self.delay_realization = match v {
                    "worst_case" => DelayRealization::WorstCase,
                    "uniform" => DelayRealization::Uniform,
                    _ => return Err(Error::parse(line, "delay_realization must be 'worst_case' or 'uniform'")),
                }
            }
            "search_min" => self.search_min = num(line, key, v)?,
            "search_max" => self.search_max = num(line, key, v)?,
            "granularity" => self.granularity = num(line, key, v)?,
            "lk_in_sweeps" => self.lk_in_sweeps = boolean(line, key, v)?,
            "lmi_margin" => self.sdp.margin = num(line, key, v)?,
            "lmi_box" => self.sdp.box_radius = Some(num(line, key, v)?),
            "sdp_tol" => self.sdp.tol = num(line, key, v)?,
            "sdp_max_iter" => self.sdp.max_iter = int(line, key, v)? as usize,
            "c_prime" => self.c_prime = num(line, key, v)?,
            "c_dprime" => self.c_dprime = num(line, key, v)?,
            "d_margin" => self.d_margin = num(line, key, v)?,
            "d_v_bar" => {
                self.d_v_bar = if v == "auto" { None } else { Some(num(line, key, v)?) };
            }
            _ => unreachable!("key table and setter out of sync: {key}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.ovm.validate()?;
        self.weights.validate()?;
        self.sim.validate()?;
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.k_mult >= 0.0) {
            return bad("k_mult must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.bernoulli_p) {
            return bad("bernoulli_p must lie in [0, 1]");
        }
        if !(self.granularity >= self.sim.t_step * (1.0 - 1e-9)) {
            return bad("granularity must be at least t_step");
        }
        if !(self.search_min >= 0.0 && self.search_max > self.search_min) {
            return bad("need 0 <= search_min < search_max");
        }
        if !(self.sdp.margin > 0.0 && self.sdp.tol > 0.0) {
            return bad("lmi_margin and sdp_tol must be positive");
        }
        if let Some(r) = self.sdp.box_radius {
            if !(r > 0.0) {
                return bad("lmi_box must be positive");
            }
        }
        if !(self.epsilon > 0.0 && self.c_prime > 0.0 && self.c_dprime >= 0.0) {
            return bad("epsilon and c_prime must be positive, c_dprime nonnegative");
        }
        if !(self.d_margin > 1.0) {
            return bad("d_margin must exceed 1");
        }
        Ok(())
    }

    /// Fully resolved configuration in the same format the parser reads.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let g = match self.guidance {
            GuidanceKind::PiecewiseAcceleration => "acceleration",
            GuidanceKind::PiecewiseVelocity => "velocity",
        };
        let plant = match self.plant {
            Plant::NonlinearOvm => "nonlinear",
            Plant::Linearized => "linearized",
        };
        let delay = match self.delay_realization {
            DelayRealization::WorstCase => "worst_case",
            DelayRealization::Uniform => "uniform",
        };
        let f = fmt_f64;
        let _ = writeln!(s, "[ovm]");
        let _ = writeln!(s, "L = {}", f(self.ovm.l));
        let _ = writeln!(s, "n = {}", self.ovm.n);
        let _ = writeln!(s, "s_st = {}", f(self.ovm.s_st));
        let _ = writeln!(s, "s_go = {}", f(self.ovm.s_go));
        let _ = writeln!(s, "v_max = {}", f(self.ovm.v_max));
        let _ = writeln!(s, "alpha = {}", f(self.ovm.alpha));
        let _ = writeln!(s, "beta = {}", f(self.ovm.beta));
        let _ = writeln!(s, "guidance = {g}");
        let _ = writeln!(s, "\n[control]");
        let _ = writeln!(s, "k_mult = {}", f(self.k_mult));
        let _ = writeln!(s, "gamma_s = {}", f(self.weights.gamma_s));
        let _ = writeln!(s, "gamma_v = {}", f(self.weights.gamma_v));
        let _ = writeln!(s, "gamma_u = {}", f(self.weights.gamma_u));
        let _ = writeln!(s, "epsilon = {}", f(self.epsilon));
        let _ = writeln!(s, "\n[sim]");
        let _ = writeln!(s, "plant = {plant}");
        let _ = writeln!(s, "t_step = {}", f(self.sim.t_step));
        let _ = writeln!(s, "total_time = {}", f(self.sim.total_time));
        let _ = writeln!(s, "n_seeds = {}", self.sim.n_seeds);
        let _ = writeln!(s, "perturb_s = {}", f(self.sim.perturb_s));
        let _ = writeln!(s, "perturb_v = {}", f(self.sim.perturb_v));
        let _ = writeln!(s, "a_min = {}", f(self.sim.a_min));
        let _ = writeln!(s, "s_d = {}", f(self.sim.s_d));
        let _ = writeln!(s, "convergence_eps = {}", f(self.sim.convergence_eps));
        let _ = writeln!(s, "rng_seed = {}", self.sim.rng_seed);
        let _ = writeln!(s, "aeb = {}", self.sim.aeb);
        let _ = writeln!(s, "divergence_norm = {}", f(self.sim.divergence_norm));
        let _ = writeln!(s, "bernoulli_p = {}", f(self.bernoulli_p));
        let _ = writeln!(s, "mask_redraw = {}", self.mask_redraw);
        let _ = writeln!(s, "delay_realization = {delay}");
        let _ = writeln!(s, "\n[search]");
        let _ = writeln!(s, "search_min = {}", f(self.search_min));
        let _ = writeln!(s, "search_max = {}", f(self.search_max));
        let _ = writeln!(s, "granularity = {}", f(self.granularity));
        let _ = writeln!(s, "lk_in_sweeps = {}", self.lk_in_sweeps);
        let _ = writeln!(s, "\n[lmi]");
        let _ = writeln!(s, "lmi_margin = {}", f(self.sdp.margin));
        if let Some(r) = self.sdp.box_radius {
            let _ = writeln!(s, "lmi_box = {}", f(r));
        }
        let _ = writeln!(s, "sdp_tol = {}", f(self.sdp.tol));
        let _ = writeln!(s, "sdp_max_iter = {}", self.sdp.max_iter);
        let _ = writeln!(s, "\n[theory]");
        let _ = writeln!(s, "c_prime = {}", f(self.c_prime));
        let _ = writeln!(s, "c_dprime = {}", f(self.c_dprime));
        let _ = writeln!(s, "d_margin = {}", f(self.d_margin));
        match self.d_v_bar {
            Some(v) => {
                let _ = writeln!(s, "d_v_bar = {}", f(v));
            }
            None => {
                let _ = writeln!(s, "d_v_bar = auto");
            }
        }
        s
    }

    /// SHA-256 of the resolved echo, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.echo().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.ovm.l, 400.0);
        assert_eq!(cfg.weights.gamma_v, 0.15);
        assert_eq!(cfg.sim.n_seeds, 50);
    }

    #[test]
    fn sections_and_comments() {
        let cfg = RunConfig::parse("# hi\n[ovm]\nbeta = 2.0 ; stiff\n[sim]\nrng_seed=7\n").unwrap();
        assert_eq!(cfg.ovm.beta, 2.0);
        assert_eq!(cfg.sim.rng_seed, 7);
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        assert!(matches!(RunConfig::parse("gamma = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(RunConfig::parse("[sim]\nbeta = 1").is_err());
        assert!(RunConfig::parse("beta = 1\nbeta = 2").is_err());
        assert!(RunConfig::parse("[nope]").is_err());
        assert!(RunConfig::parse("beta").is_err());
        assert!(RunConfig::parse("beta = nan").is_err());
        assert!(RunConfig::parse("beta = -1").is_err());
    }

    #[test]
    fn echo_roundtrips() {
        let cfg = RunConfig::parse("alpha = 0.7\nplant = linearized\nd_v_bar = 1.5\n").unwrap();
        let back = RunConfig::parse(&cfg.echo()).unwrap();
        assert_eq!(back.echo(), cfg.echo());
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(RunConfig::default().hash(), cfg.hash());
    }
}
