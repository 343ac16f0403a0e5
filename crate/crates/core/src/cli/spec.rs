//! Parsers for the textual method, parameter and data specifications.

use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::quantifier::ParamValue;

/// `name` or `name(key=value,...)`; values may themselves be specs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpec {
    pub name: String,
    pub args: Vec<(String, String)>,
}

impl MethodSpec {
    pub fn arg(&self, key: &str) -> Option<&str> {
        self.args.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// File-name friendly rendering, e.g. `ensemble_base-hdy_policy-ds`.
    pub fn label(&self) -> String {
        let mut out = String::new();
        for ch in self.to_string().chars() {
            match ch {
                '(' | ',' => out.push('_'),
                ')' => {}
                '=' => out.push('-'),
                c if c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' => out.push(c),
                _ => out.push('-'),
            }
        }
        out
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

/// Splits on commas outside parentheses.
pub fn split_top_level(s: &str) -> Result<Vec<String>> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::invalid(format!("unbalanced `)` in `{s}`")))?;
                cur.push(ch);
            }
            ',' if depth == 0 => parts.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    if depth != 0 {
        return Err(Error::invalid(format!("unbalanced `(` in `{s}`")));
    }
    parts.push(cur);
    Ok(parts.into_iter().map(|p| p.trim().to_string()).collect())
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

pub fn parse_method_spec(s: &str) -> Result<MethodSpec> {
    let s = s.trim();
    let (name, inner) = match s.find('(') {
        Some(i) => {
            let rest = &s[i + 1..];
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::invalid(format!("method spec `{s}` must end with `)`")))?;
            (&s[..i], Some(inner))
        }
        None => (s, None),
    };
    let name = name.trim().to_ascii_lowercase();
    if !valid_ident(&name) {
        return Err(Error::invalid(format!("bad method name in `{s}`")));
    }
    let mut args = Vec::new();
    if let Some(inner) = inner {
        if !inner.trim().is_empty() {
            for part in split_top_level(inner)? {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::invalid(format!("argument `{part}` of `{s}` is not key=value")))?;
                let (k, v) = (k.trim().to_string(), v.trim().to_string());
                if !valid_ident(&k) || v.is_empty() {
                    return Err(Error::invalid(format!("bad argument `{part}` in `{s}`")));
                }
                if args.iter().any(|(a, _): &(String, String)| *a == k) {
                    return Err(Error::invalid(format!("argument `{k}` repeated in `{s}`")));
                }
                args.push((k, v));
            }
        }
    } else if s.contains(')') {
        return Err(Error::invalid(format!("unbalanced `)` in `{s}`")));
    }
    Ok(MethodSpec { name, args })
}

/// Comma-separated method specs.
pub fn parse_method_list(s: &str) -> Result<Vec<MethodSpec>> {
    let parts = split_top_level(s)?;
    if parts.iter().all(|p| p.is_empty()) {
        return Err(Error::invalid("no method given"));
    }
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| parse_method_spec(p))
        .collect()
}

/// `name=v1,v2,...` as given to `--param`.
pub fn parse_param_flag(s: &str) -> Result<(String, Vec<ParamValue>)> {
    let (name, values) = s
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("--param `{s}` is not name=value[,value...]")))?;
    let name = name.trim();
    if !valid_ident(name) {
        return Err(Error::invalid(format!("bad parameter name `{name}`")));
    }
    let values: Vec<ParamValue> = values
        .split(',')
        .map(str::trim)
        .map(|v| {
            if v.is_empty() {
                Err(Error::invalid(format!("empty value in --param `{s}`")))
            } else {
                Ok(ParamValue::parse(v))
            }
        })
        .collect::<Result<_>>()?;
    Ok((name.to_string(), values))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    /// `synth:gaussian[:n=..][:classes=..][:separation=..][:seed=..]`
    Gaussian {
        n: usize,
        classes: usize,
        separation: f64,
        seed: Option<u64>,
    },
    /// A dense `.csv` file, or a sparse file for any other extension.
    File(PathBuf),
}

pub const DEFAULT_SYNTH_N: usize = 2000;
/// Separation giving about 85% accuracy on two balanced unit Gaussians.
pub const DEFAULT_SEPARATION: f64 = 2.07;

pub fn parse_data_spec(s: &str) -> Result<DataSpec> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::invalid("empty data spec"));
    }
    let Some(rest) = s.strip_prefix("synth:") else {
        return Ok(DataSpec::File(PathBuf::from(s)));
    };
    let mut parts = rest.split(':');
    let kind = parts.next().unwrap_or("");
    if kind != "gaussian" {
        return Err(Error::invalid(format!("unknown synthetic generator `{kind}` (expected gaussian)")));
    }
    let (mut n, mut classes, mut separation, mut seed) = (DEFAULT_SYNTH_N, 2usize, DEFAULT_SEPARATION, None);
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("`{kv}` in `{s}` is not key=value")))?;
        let bad = || Error::invalid(format!("bad value `{v}` for `{k}` in `{s}`"));
        match k.trim() {
            "n" => n = v.trim().parse().map_err(|_| bad())?,
            "classes" | "c" => classes = v.trim().parse().map_err(|_| bad())?,
            "separation" | "sep" => {
                separation = v.trim().parse().map_err(|_| bad())?;
                if !f64::is_finite(separation) || separation < 0.0 {
                    return Err(bad());
                }
            }
            "seed" => seed = Some(v.trim().parse().map_err(|_| bad())?),
            other => return Err(Error::invalid(format!("unknown key `{other}` in `{s}`"))),
        }
    }
    if classes < 2 || n < 2 * classes {
        return Err(Error::invalid(format!(
            "`{s}` needs at least 2 classes and 2 items per class"
        )));
    }
    Ok(DataSpec::Gaussian {
        n,
        classes,
        separation,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_lists() {
        let m = parse_method_list("cc, acc ,ensemble(base=hdy,policy=ds,size=30,red_size=15),ova(base=acc)").unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m[1].name, "acc");
        assert_eq!(m[2].arg("policy"), Some("ds"));
        assert_eq!(m[2].arg("red_size"), Some("15"));
        assert_eq!(m[3].arg("base"), Some("acc"));
        assert_eq!(m[2].to_string(), "ensemble(base=hdy,policy=ds,size=30,red_size=15)");
        assert_eq!(m[2].label(), "ensemble_base-hdy_policy-ds_size-30_red_size-15");
        let nested = parse_method_spec("ova(base=ensemble(base=acc,size=3))").unwrap();
        assert_eq!(nested.arg("base"), Some("ensemble(base=acc,size=3)"));
        assert_eq!(parse_method_spec("CC()").unwrap(), MethodSpec { name: "cc".into(), args: vec![] });
    }

    #[test]
    fn bad_method_specs() {
        for s in ["", "acc(", "acc)", "a(b)", "a(b=)", "a(=1)", "a(b=1,b=2)", "a b", "x(y=1))", ","] {
            assert!(parse_method_list(s).is_err(), "{s}");
        }
    }

    #[test]
    fn param_flags() {
        let (n, v) = parse_param_flag("learner.C=0.1, 1,10").unwrap();
        assert_eq!(n, "learner.C");
        assert_eq!(v, vec![ParamValue::Num(0.1), ParamValue::Num(1.0), ParamValue::Num(10.0)]);
        let (_, v) = parse_param_flag("learner.class_weight=balanced,none").unwrap();
        assert_eq!(v[0], ParamValue::Text("balanced".into()));
        for s in ["C", "=1", "C=", "C=1,,2", "a b=1"] {
            assert!(parse_param_flag(s).is_err(), "{s}");
        }
    }

    #[test]
    fn data_specs() {
        assert_eq!(
            parse_data_spec("synth:gaussian").unwrap(),
            DataSpec::Gaussian {
                n: 2000,
                classes: 2,
                separation: DEFAULT_SEPARATION,
                seed: None
            }
        );
        assert_eq!(
            parse_data_spec("synth:gaussian:n=300:classes=3:sep=4:seed=9").unwrap(),
            DataSpec::Gaussian {
                n: 300,
                classes: 3,
                separation: 4.0,
                seed: Some(9)
            }
        );
        assert_eq!(parse_data_spec("data/x.csv").unwrap(), DataSpec::File("data/x.csv".into()));
        for s in ["", "synth:uniform", "synth:gaussian:n", "synth:gaussian:k=1", "synth:gaussian:classes=1", "synth:gaussian:sep=-1", "synth:gaussian:n=3"] {
            assert!(parse_data_spec(s).is_err(), "{s}");
        }
    }
}
