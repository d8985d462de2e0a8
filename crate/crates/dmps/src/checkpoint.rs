//! Plain-text checkpoints: the resolved config, the seed and training
//! progress, then every network tensor under a `tensor <name> <rows> <cols>`
//! header followed by one line of values per row. Optimiser state is not
//! stored, so checkpoints serve evaluation, not resumption.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dmps_core::mdp::Mdp;
use dmps_core::rng::{stream, Stream};
use dmps_core::{Env, Td3Agent};

use crate::config::RunConfig;
use crate::error::{DmpsError, DmpsResult};

const MAGIC: &str = "dmps-checkpoint 1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub seed: u64,
    pub timestep: usize,
    pub agent: Td3Agent,
}

pub fn render(config: &RunConfig, seed: u64, timestep: usize, agent: &Td3Agent) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "seed {seed}");
    let _ = writeln!(out, "timestep {timestep}");
    out.push_str("config-begin\n");
    out.push_str(&config.snapshot());
    out.push_str("config-end\n");
    for (net, mlp) in agent.networks() {
        for (name, [rows, cols], values) in mlp.tensors() {
            let _ = writeln!(out, "tensor {net}.{name} {rows} {cols}");
            for row in values.chunks(cols) {
                let line: Vec<String> = row.iter().map(f64::to_string).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
    }
    out.push_str("end\n");
    out
}

/// Writes through a temporary file and a rename, so an interrupted write
/// leaves the previous checkpoint in place.
pub fn save(path: &Path, config: &RunConfig, seed: u64, timestep: usize, agent: &Td3Agent) -> DmpsResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, render(config, seed, timestep, agent)).map_err(|e| DmpsError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| DmpsError::io(path, e))
}

pub fn load(path: &Path) -> DmpsResult<Checkpoint> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(DmpsError::MissingCheckpoint(path.into())),
        Err(e) => return Err(DmpsError::io(path, e)),
    };
    parse(&text).map_err(|msg| DmpsError::Checkpoint { path: path.into(), msg })
}

fn field<T: std::str::FromStr>(line: Option<&str>, key: &str) -> Result<T, String> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| format!("expected `{key} <value>`"))
}

pub fn parse(text: &str) -> Result<Checkpoint, String> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err("missing header".into());
    }
    let seed = field(lines.next(), "seed ")?;
    let timestep = field(lines.next(), "timestep ")?;
    if lines.next() != Some("config-begin") {
        return Err("missing config block".into());
    }
    let mut cfg_text = String::new();
    loop {
        match lines.next() {
            Some("config-end") => break,
            Some(l) => {
                cfg_text.push_str(l);
                cfg_text.push('\n');
            }
            None => return Err("unterminated config block".into()),
        }
    }
    let config = RunConfig::parse(&cfg_text).map_err(|e| e.to_string())?;
    let env = Env::new(config.env.clone()).map_err(|e| e.to_string())?;
    let mut agent =
        Td3Agent::new(env.feature_dim(), env.action_bounds(), config.learner.clone(), stream(seed, Stream::Learner))
            .map_err(|e| e.to_string())?;
    for (net, mlp) in agent.networks_mut() {
        let expected: Vec<(String, [usize; 2])> =
            mlp.tensors().into_iter().map(|(n, s, _)| (format!("{net}.{n}"), s)).collect();
        let mut values = Vec::with_capacity(mlp.param_count());
        for (name, [rows, cols]) in expected {
            let header = lines.next().ok_or("truncated tensor list")?;
            if header != format!("tensor {name} {rows} {cols}") {
                return Err(format!("expected tensor {name} {rows}x{cols}, found `{header}`"));
            }
            for _ in 0..rows {
                let row: Vec<f64> = lines
                    .next()
                    .ok_or("truncated tensor data")?
                    .split(' ')
                    .map(|v| v.parse::<f64>().map_err(|_| format!("bad value `{v}` in {name}")))
                    .collect::<Result<_, _>>()?;
                if row.len() != cols {
                    return Err(format!("{name}: row of {} values, expected {cols}", row.len()));
                }
                values.extend(row);
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("{net} has non-finite parameters"));
        }
        mlp.params_mut().copy_from_slice(&values);
    }
    if lines.next() != Some("end") || lines.next().is_some() {
        return Err("missing end marker".into());
    }
    Ok(Checkpoint { config, seed, timestep, agent })
}
