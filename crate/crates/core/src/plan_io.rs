//! Plan-file encoding.
//!
//! Plans are written as single-line UTF-8 JSON with fields in declaration
//! order. Floats use 17 significant digits (C `%.17g`), so a plan read back
//! replays bit-for-bit.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

use crate::error::{Error, Result};
use crate::planner::{Plan, PLAN_FORMAT_VERSION};

/// Formats like C's `%.17g`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return "null".into();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Compact JSON with `%.17g` floats.
#[derive(Default)]
pub struct G17Formatter(CompactFormatter);

impl Formatter for G17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes any value as compact JSON with `%.17g` floats.
pub fn to_json_g17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, G17Formatter::default());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::PlanFormat(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

impl Plan {
    pub fn to_json(&self) -> Result<String> {
        to_json_g17(self)
    }

    pub fn from_json(text: &str) -> Result<Plan> {
        let plan: Plan = serde_json::from_str(text).map_err(|e| Error::PlanFormat(e.to_string()))?;
        if plan.version != PLAN_FORMAT_VERSION {
            return Err(Error::PlanFormat(format!(
                "unsupported plan version {}",
                plan.version
            )));
        }
        for (t, step) in plan.steps.iter().enumerate() {
            if step.params.len() != step.op.dim() {
                return Err(Error::PlanFormat(format!(
                    "step {t}: {} expects {} params, found {}",
                    step.op,
                    step.op.dim(),
                    step.params.len()
                )));
            }
            if let (Some(i), Some(masks)) = (step.mask_index, &plan.masks) {
                if i >= masks.len() {
                    return Err(Error::PlanFormat(format!(
                        "step {t}: mask_index {i} but only {} masks listed",
                        masks.len()
                    )));
                }
            }
        }
        Ok(plan)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Plan> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Plan::from_json(&text)
    }
}
