//! Line-oriented text records for instances and solutions.
//!
//! Each non-blank line is a record tag followed by `key=value` fields:
//!
//! ```text
//! instance denom=20 capacity=2
//! user id=0 z=8 cost=power theta=0.5
//! user id=1 z=12 cost=linear slope=1
//! user id=2 z=16 cost=table points=0:0,0.2:0.5,0.8:0.8
//! ```
//!
//! Lines starting with `#` are comments. Rates are written as exact fractions
//! alongside a decimal rendering; the decimal is ignored when parsing.

use std::collections::HashMap;
use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{CostFunction, CostKind, GridProb, RateVector, Rational, UserProfile};
use crate::noback::{NobackInstance, NobackSolution, NobackUser, RateDistribution};
use crate::optimizer::ConcMinSolution;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub users: Vec<UserProfile>,
    pub capacity: Rational,
}

struct Record<'a> {
    line: usize,
    tag: &'a str,
    fields: HashMap<&'a str, &'a str>,
}

impl<'a> Record<'a> {
    fn get(&self, key: &str) -> Result<&'a str> {
        self.fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(self.line, format!("`{}` record lacks `{key}`", self.tag)))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::parse(self.line, format!("bad value `{raw}` for `{key}`")))
    }

    fn rational(&self, key: &str) -> Result<Rational> {
        parse_rational(self.get(key)?).ok_or_else(|| {
            Error::parse(self.line, format!("`{key}` is not an integer or fraction"))
        })
    }
}

fn records(text: &str) -> Result<Vec<Record<'_>>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut parts = body.split_whitespace();
        let tag = parts.next().unwrap_or_default();
        let mut fields = HashMap::new();
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("field `{part}` is not key=value")))?;
            if fields.insert(k, v).is_some() {
                return Err(Error::parse(line, format!("duplicate field `{k}`")));
            }
        }
        out.push(Record { line, tag, fields });
    }
    Ok(out)
}

fn parse_rational(s: &str) -> Option<Rational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let d: i64 = d.parse().ok()?;
            let n: i64 = n.parse().ok()?;
            (d != 0).then(|| Rational::new(n, d))
        }
        None => Some(Rational::from_integer(s.parse().ok()?)),
    }
}

fn check_ids(ids: &[(usize, usize)]) -> Result<()> {
    for (pos, &(id, line)) in ids.iter().enumerate() {
        if id != pos {
            return Err(Error::parse(line, format!("expected user id {pos}, found {id}")));
        }
    }
    Ok(())
}

fn write_cost(out: &mut String, kind: &CostKind) {
    match kind {
        CostKind::PowerLaw { theta } => write!(out, " cost=power theta={theta}"),
        CostKind::Linear { slope } => write!(out, " cost=linear slope={slope}"),
        CostKind::Table { breakpoints } => {
            let pts: Vec<String> = breakpoints.iter().map(|(x, y)| format!("{x}:{y}")).collect();
            write!(out, " cost=table points={}", pts.join(","))
        }
    }
    .expect("writing to a String cannot fail");
}

fn read_cost(rec: &Record) -> Result<CostKind> {
    match rec.get("cost")? {
        "power" => Ok(CostKind::PowerLaw { theta: rec.parse("theta")? }),
        "linear" => Ok(CostKind::Linear { slope: rec.parse("slope")? }),
        "table" => {
            let points = rec
                .get("points")?
                .split(',')
                .map(|pair| {
                    let (x, y) = pair.split_once(':')?;
                    Some((x.parse().ok()?, y.parse().ok()?))
                })
                .collect::<Option<Vec<(f64, f64)>>>()
                .ok_or_else(|| Error::parse(rec.line, "table points must be x:y pairs"))?;
            Ok(CostKind::Table { breakpoints: points })
        }
        other => Err(Error::parse(rec.line, format!("unknown cost kind `{other}`"))),
    }
}

pub fn write_instance(inst: &Instance) -> Result<String> {
    let denom = crate::model::shared_denominator(inst.users.iter().map(|u| &u.p))?;
    let mut out = format!("instance denom={denom} capacity={}\n", inst.capacity);
    for (i, u) in inst.users.iter().enumerate() {
        let _ = write!(out, "user id={i} z={}", u.p.z());
        write_cost(&mut out, u.cost.kind());
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let recs = records(text)?;
    let header = recs
        .iter()
        .find(|r| r.tag == "instance")
        .ok_or_else(|| Error::parse(1, "missing `instance` record"))?;
    let denom: u32 = header.parse("denom")?;
    let capacity = header.rational("capacity")?;
    let mut users = Vec::new();
    let mut ids = Vec::new();
    for rec in &recs {
        match rec.tag {
            "instance" if !std::ptr::eq(rec, header) => {
                return Err(Error::parse(rec.line, "more than one `instance` record"));
            }
            "instance" => {}
            "user" => {
                let p = GridProb::new(rec.parse("z")?, denom)
                    .map_err(|e| Error::parse(rec.line, e.to_string()))?;
                let cost = CostFunction::new(read_cost(rec)?, p)
                    .map_err(|e| Error::parse(rec.line, e.to_string()))?;
                ids.push((rec.parse("id")?, rec.line));
                users.push(UserProfile { p, cost });
            }
            other => return Err(Error::parse(rec.line, format!("unexpected record `{other}`"))),
        }
    }
    check_ids(&ids)?;
    if users.is_empty() {
        return Err(Error::parse(header.line, "instance has no users"));
    }
    Ok(Instance { users, capacity })
}

fn write_rates(out: &mut String, rates: &RateVector) {
    for (i, a) in rates.alpha.iter().enumerate() {
        let _ = writeln!(out, "rate id={i} alpha={a} decimal={:.12}", crate::model::rational_to_f64(*a));
    }
}

pub fn write_solution(sol: &ConcMinSolution) -> String {
    let frac = sol.fractional_user.map_or("none".to_string(), |k| k.to_string());
    let mut out = format!("solution cost={:.15} fractional={frac}\n", sol.cost);
    write_rates(&mut out, &sol.rates);
    out
}

/// Reads the `rate` records of a solution; the cost field is returned as written.
pub fn parse_solution(text: &str) -> Result<(RateVector, f64)> {
    let recs = records(text)?;
    let mut cost = None;
    let mut alpha = Vec::new();
    let mut ids = Vec::new();
    for rec in &recs {
        match rec.tag {
            "solution" => cost = Some(rec.parse::<f64>("cost")?),
            "rate" => {
                alpha.push(rec.rational("alpha")?);
                ids.push((rec.parse("id")?, rec.line));
            }
            other => return Err(Error::parse(rec.line, format!("unexpected record `{other}`"))),
        }
    }
    check_ids(&ids)?;
    let cost = cost.ok_or_else(|| Error::parse(1, "missing `solution` record"))?;
    Ok((RateVector::new(alpha), cost))
}

pub fn write_noback_instance(inst: &NobackInstance) -> String {
    let mut out = format!("noback capacity={}\n", inst.capacity);
    for (i, u) in inst.users.iter().enumerate() {
        let _ = write!(out, "user id={i} weight={} a={} b={}", u.weight, u.a, u.b);
        match u.dist {
            RateDistribution::Uniform => out.push_str(" cdf=uniform\n"),
            RateDistribution::LinearDensity { tilt } => {
                let _ = writeln!(out, " cdf=linear tilt={tilt}");
            }
        }
    }
    out
}

pub fn parse_noback_instance(text: &str) -> Result<NobackInstance> {
    let recs = records(text)?;
    let mut capacity = None;
    let mut users = Vec::new();
    let mut ids = Vec::new();
    for rec in &recs {
        match rec.tag {
            "noback" => capacity = Some(rec.rational("capacity")?),
            "user" => {
                let dist = match rec.get("cdf")? {
                    "uniform" => RateDistribution::Uniform,
                    "linear" => RateDistribution::LinearDensity { tilt: rec.parse("tilt")? },
                    other => {
                        return Err(Error::parse(rec.line, format!("unknown cdf `{other}`")));
                    }
                };
                users.push(NobackUser {
                    weight: rec.parse("weight")?,
                    a: rec.parse("a")?,
                    b: rec.parse("b")?,
                    dist,
                });
                ids.push((rec.parse("id")?, rec.line));
            }
            other => return Err(Error::parse(rec.line, format!("unexpected record `{other}`"))),
        }
    }
    check_ids(&ids)?;
    let capacity = capacity.ok_or_else(|| Error::parse(1, "missing `noback` record"))?;
    NobackInstance::new(users, capacity)
}

pub fn write_noback_solution(sol: &NobackSolution) -> String {
    let threshold = sol.threshold_user.map_or("none".to_string(), |k| k.to_string());
    let mut out = format!(
        "noback_solution multiplier={} threshold={threshold} perturbed={}\n",
        sol.multiplier, sol.weights_perturbed
    );
    for (i, a) in sol.rates.iter().enumerate() {
        let _ = writeln!(out, "rate id={i} alpha={a}");
    }
    out
}
