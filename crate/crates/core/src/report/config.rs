use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::e2e::ExperimentConfig;
use crate::error::{Error, Result};

/// Sections of the configuration file, in schema order. The empty name is
/// the top level (also reachable as `[experiment]`).
const SECTIONS: [&str; 5] = ["", "transceiver", "channel", "gan", "pretrain"];

/// Sets the samples per symbol of channel, transceiver and GAN at once.
const SHARED_N: &str = "samples_per_symbol";

const DESCRIPTIONS: &[(&str, &str)] = &[
    ("iterations", "outer optimization iterations K"),
    ("sequences", "sequences N per transmission"),
    ("messages_per_sequence", "messages w per sequence"),
    ("q", "held-out transceiver rows per iteration, capped at 10% of N w"),
    ("inner_transceiver_steps", "Adam steps of the transceiver per iteration"),
    ("transceiver_lr", "transceiver learning rate"),
    (
        "baseline_rx_steps",
        "receiver-only baseline steps, `auto` = iterations x inner steps",
    ),
    ("seed", "experiment seed"),
    ("transceiver.order", "messages S"),
    ("transceiver.samples_per_symbol", "samples n per symbol"),
    ("transceiver.hidden_width", "width of the hidden layers"),
    ("channel.samples_per_symbol", "samples n per symbol"),
    ("channel.dac_rate", "converter sample rate, Sa/s"),
    (
        "channel.lpf_bandwidth",
        "brick-wall filter bandwidth, Hz (below dac_rate / 2)",
    ),
    ("channel.fiber_length", "fibre length, m"),
    ("channel.dispersion", "dispersion parameter D, s/m^2"),
    ("channel.wavelength", "carrier wavelength, m"),
    ("channel.dac_bits", "DAC resolution"),
    ("channel.adc_bits", "ADC resolution"),
    ("channel.modulator_vpi_normalization", "modulator drive scaling"),
    ("channel.receiver_noise_sigma", "receiver noise standard deviation"),
    ("channel.seed", "channel noise seed"),
    ("gan.memory", "symbol memory m (odd)"),
    ("gan.samples_per_symbol", "samples n per symbol"),
    ("gan.batch_size", "batch size B"),
    ("gan.total_steps", "training steps per iteration"),
    ("gan.d_updates_per_step", "discriminator updates per step"),
    ("gan.d_learning_rate", "discriminator learning rate"),
    ("gan.g_lr_start", "initial generator learning rate"),
    ("gan.g_lr_end", "final generator learning rate"),
    ("gan.g_lr_interval", "steps between generator learning-rate changes"),
    ("gan.warm_start", "continue from the previous iteration's GAN"),
    ("gan.adam_beta1", "first-moment decay of the GAN optimizers"),
    ("pretrain.steps", "offline training steps"),
    ("pretrain.symbols_per_batch", "symbols per offline batch"),
    ("pretrain.learning_rate", "offline learning rate"),
    (
        "pretrain.fiber_length_scale",
        "model fibre length relative to the channel",
    ),
    ("pretrain.noise_sigma", "model receiver noise"),
];

struct Assignment {
    line: usize,
    path: Vec<String>,
    value: Value,
}

fn line_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line: Some(line),
        message: message.into(),
    }
}

fn parse_integer(raw: &str) -> Option<u64> {
    let clean = raw.replace('_', "");
    if let Some(hex) = clean.strip_prefix("0x").or_else(|| clean.strip_prefix("0X")) {
        return u64::from_str_radix(hex, 16).ok();
    }
    if let Ok(v) = clean.parse::<u64>() {
        return Some(v);
    }
    let f: f64 = clean.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64).then_some(f as u64)
}

fn parse_value(template: &Value, raw: &str, key: &str, line: usize) -> Result<Value> {
    let bad = |what: &str| line_error(line, format!("`{key}` expects {what}, got `{raw}`"));
    match template {
        Value::Bool(_) => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(bad("true or false")),
        },
        Value::Number(n) if n.is_u64() => parse_integer(raw)
            .map(|v| Value::Number(v.into()))
            .ok_or_else(|| bad("a nonnegative integer")),
        Value::Number(_) => raw
            .replace('_', "")
            .parse::<f64>()
            .ok()
            .and_then(Number::from_f64)
            .map(Value::Number)
            .ok_or_else(|| bad("a finite number")),
        Value::Null => match raw {
            "auto" | "none" => Ok(Value::Null),
            _ => parse_integer(raw)
                .map(|v| Value::Number(v.into()))
                .ok_or_else(|| bad("a nonnegative integer or `auto`")),
        },
        _ => Err(bad("a scalar")),
    }
}

fn leaf<'a>(root: &'a Value, path: &[String]) -> Option<&'a Value> {
    let mut node = root;
    for part in path {
        node = node.as_object()?.get(part)?;
    }
    (!node.is_object()).then_some(node)
}

fn set_leaf(root: &mut Value, path: &[String], value: Value) {
    let mut node = root;
    for part in path {
        node = node.get_mut(part).expect("path checked against the template");
    }
    *node = value;
}

fn tokenize(text: &str, template: &Value) -> Result<Vec<Assignment>> {
    let mut section = String::new();
    let mut out: Vec<Assignment> = Vec::new();
    for (index, raw_line) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() || content.starts_with(';') {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| line_error(line, "unterminated section header"))?
                .trim();
            section = match name {
                "experiment" => String::new(),
                s if SECTIONS.contains(&s) => s.to_string(),
                s => return Err(line_error(line, format!("unknown section `[{s}]`"))),
            };
            continue;
        }
        let (key, raw) = content
            .split_once('=')
            .ok_or_else(|| line_error(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, raw) = (key.trim(), raw.trim().trim_matches('"'));
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if out.iter().any(|a| a.path.join(".") == full) {
            return Err(line_error(line, format!("`{full}` assigned twice")));
        }
        if full == SHARED_N {
            let value = parse_value(&Value::Number(0u64.into()), raw, &full, line)?;
            for owner in ["transceiver", "channel", "gan"] {
                out.push(Assignment {
                    line,
                    path: vec![owner.to_string(), SHARED_N.to_string()],
                    value: value.clone(),
                });
            }
            continue;
        }
        let path: Vec<String> = full.split('.').map(str::to_string).collect();
        let template_leaf = leaf(template, &path).ok_or_else(|| line_error(line, format!("unknown key `{full}`")))?;
        let value = parse_value(template_leaf, raw, &full, line)?;
        out.push(Assignment { line, path, value });
    }
    Ok(out)
}

fn build(template: &Value, assignments: &[Assignment]) -> Result<ExperimentConfig> {
    let mut value = template.clone();
    for a in assignments {
        set_leaf(&mut value, &a.path, a.value.clone());
    }
    serde_json::from_value(value).map_err(|e| Error::config(e.to_string()))
}

/// Parses the `key = value` configuration text. Missing keys keep their
/// defaults; a violated constraint is blamed on the first line that makes
/// the configuration invalid.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let template = serde_json::to_value(ExperimentConfig::default()).expect("config serializes");
    let assignments = tokenize(text, &template)?;
    let config = build(&template, &assignments)?;
    let Err(err) = config.validate() else {
        return Ok(config);
    };
    let message = match &err {
        Error::Config { message, .. } => message.clone(),
        other => other.to_string(),
    };
    for end in 1..=assignments.len() {
        if build(&template, &assignments[..end])?.validate().is_err() {
            return Err(line_error(assignments[end - 1].line, message));
        }
    }
    Err(err)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

fn render_scalar(v: &Value) -> String {
    match v {
        Value::Null => "auto".to_string(),
        Value::Number(n) if n.is_f64() => format!("{:e}", n.as_f64().expect("f64")).replace("e0", ""),
        other => other.to_string(),
    }
}

/// Every key with its default and meaning, as a valid configuration file.
pub fn config_schema() -> String {
    let defaults = serde_json::to_value(ExperimentConfig::default()).expect("config serializes");
    let root = defaults.as_object().expect("object");
    let mut out = String::from("# ganae experiment configuration; every key is optional.\n");
    let _ = writeln!(out, "# `{SHARED_N} = n` at the top level sets it for all sections.");
    for section in SECTIONS {
        let fields: &Map<String, Value> = if section.is_empty() {
            root
        } else {
            root[section].as_object().expect("section object")
        };
        if !section.is_empty() {
            let _ = writeln!(out, "\n[{section}]");
        } else {
            out.push('\n');
        }
        for (key, value) in fields {
            if value.is_object() {
                continue;
            }
            let full = if section.is_empty() {
                key.clone()
            } else {
                format!("{section}.{key}")
            };
            if let Some((_, doc)) = DESCRIPTIONS.iter().find(|(k, _)| *k == full) {
                let _ = writeln!(out, "# {doc}");
            }
            let _ = writeln!(out, "{key} = {}", render_scalar(value));
        }
    }
    out
}
