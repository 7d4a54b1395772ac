use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::c64;

/// Which part of `lambda` a half-plane predicate looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

/// Membership test on atoms.
#[derive(Clone)]
pub enum Predicate {
    /// `part(lambda) < value` (or `>` when `less` is false).
    HalfPlane {
        part: Part,
        less: bool,
        value: f64,
    },
    Custom(Arc<dyn Fn(c64) -> bool + Send + Sync>),
}

impl Predicate {
    pub fn holds(&self, z: c64) -> bool {
        match self {
            Predicate::HalfPlane { part, less, value } => {
                let x = match part {
                    Part::Re => z.re,
                    Part::Im => z.im,
                };
                if *less {
                    x < *value
                } else {
                    x > *value
                }
            }
            Predicate::Custom(f) => f(z),
        }
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Custom(_) => f.write_str("Custom(..)"),
            other => write!(f, "{other}"),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::HalfPlane { part, less, value } => {
                let p = if *part == Part::Re { "re" } else { "im" };
                let op = if *less { '<' } else { '>' };
                write!(f, "halfplane:{p}{op}{value}")
            }
            Predicate::Custom(_) => f.write_str("custom"),
        }
    }
}

/// Closed ball data `(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: c64,
    pub radius: f64,
}

/// Subsets of the plane for which spectral subspaces are computed.
#[derive(Debug, Clone)]
pub enum SetDescriptor {
    /// The whole plane.
    All,
    /// The empty set.
    Empty,
    /// Closed disk `|z - c| <= r`.
    Disk(Ball),
    /// Complement of the open disk: `|z - c| >= r`.
    Codisk(Ball),
    /// Closed set given as the complement of a finite union of open balls.
    Closed(Vec<Ball>),
    /// Borel set known only through membership of atoms.
    Pred(Predicate),
}

impl SetDescriptor {
    pub fn contains(&self, z: c64) -> bool {
        match self {
            SetDescriptor::All => true,
            SetDescriptor::Empty => false,
            SetDescriptor::Disk(b) => (z - b.center).norm() <= b.radius,
            SetDescriptor::Codisk(b) => (z - b.center).norm() >= b.radius,
            SetDescriptor::Closed(cover) => cover.iter().all(|b| (z - b.center).norm() >= b.radius),
            SetDescriptor::Pred(p) => p.holds(z),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SetDescriptor::All => "all",
            SetDescriptor::Empty => "none",
            SetDescriptor::Disk(_) => "disk",
            SetDescriptor::Codisk(_) => "codisk",
            SetDescriptor::Closed(_) => "closed",
            SetDescriptor::Pred(_) => "pred",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |b: &Ball| {
            if b.center.re.is_finite()
                && b.center.im.is_finite()
                && b.radius.is_finite()
                && b.radius > 0.0
            {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("bad ball {b:?}")))
            }
        };
        match self {
            SetDescriptor::Disk(b) | SetDescriptor::Codisk(b) => check(b),
            SetDescriptor::Closed(cover) => {
                if cover.is_empty() {
                    return Err(Error::InvalidParameter("closed-set cover is empty".into()));
                }
                cover.iter().try_for_each(check)
            }
            SetDescriptor::Pred(Predicate::HalfPlane { value, .. }) if !value.is_finite() => Err(
                Error::InvalidParameter("half-plane offset must be finite".into()),
            ),
            _ => Ok(()),
        }
    }
}

fn fmt_ball(f: &mut fmt::Formatter<'_>, b: &Ball) -> fmt::Result {
    write!(f, "{},{},{}", b.center.re, b.center.im, b.radius)
}

impl fmt::Display for SetDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetDescriptor::All => f.write_str("all"),
            SetDescriptor::Empty => f.write_str("none"),
            SetDescriptor::Disk(b) => {
                f.write_str("disk:")?;
                fmt_ball(f, b)
            }
            SetDescriptor::Codisk(b) => {
                f.write_str("codisk:")?;
                fmt_ball(f, b)
            }
            SetDescriptor::Closed(cover) => {
                f.write_str("closed:[")?;
                for (i, b) in cover.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    fmt_ball(f, b)?;
                }
                f.write_str("]")
            }
            SetDescriptor::Pred(p) => write!(f, "pred:{p}"),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite number: {s:?}")));
    }
    Ok(v)
}

fn parse_ball(s: &str) -> Result<Ball> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("ball needs cx,cy,r: {s:?}")));
    }
    let radius = parse_f64(parts[2])?;
    if !(radius > 0.0) {
        return Err(Error::Parse(format!("radius must be positive: {s:?}")));
    }
    Ok(Ball {
        center: c64::new(parse_f64(parts[0])?, parse_f64(parts[1])?),
        radius,
    })
}

fn parse_predicate(s: &str) -> Result<Predicate> {
    let body = s
        .strip_prefix("halfplane:")
        .ok_or_else(|| Error::Parse(format!("unknown predicate {s:?}")))?;
    let (part, rest) = if let Some(r) = body.strip_prefix("re") {
        (Part::Re, r)
    } else if let Some(r) = body.strip_prefix("im") {
        (Part::Im, r)
    } else {
        return Err(Error::Parse(format!(
            "half-plane must start with re or im: {body:?}"
        )));
    };
    let (less, value) = if let Some(v) = rest.strip_prefix('<') {
        (true, v)
    } else if let Some(v) = rest.strip_prefix('>') {
        (false, v)
    } else {
        return Err(Error::Parse(format!("expected < or > in {body:?}")));
    };
    Ok(Predicate::HalfPlane {
        part,
        less,
        value: parse_f64(value)?,
    })
}

impl FromStr for SetDescriptor {
    type Err = Error;

    /// Grammar:
    ///
    /// ```text
    /// all | none
    /// disk:cx,cy,r | codisk:cx,cy,r
    /// closed:[cx,cy,r;cx,cy,r;...]
    /// pred:halfplane:(re|im)(<|>)value
    /// ```
    ///
    /// The `pred:` prefix may be omitted.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "all" => return Ok(SetDescriptor::All),
            "none" => return Ok(SetDescriptor::Empty),
            _ => {}
        }
        // Bare predicates are accepted as shorthand for `pred:`.
        if s.starts_with("halfplane:") {
            return Ok(SetDescriptor::Pred(parse_predicate(s)?));
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("missing ':' in set descriptor {s:?}")))?;
        match kind {
            "disk" => Ok(SetDescriptor::Disk(parse_ball(rest)?)),
            "codisk" => Ok(SetDescriptor::Codisk(parse_ball(rest)?)),
            "closed" => {
                let inner = rest
                    .strip_prefix('[')
                    .and_then(|r| r.strip_suffix(']'))
                    .ok_or_else(|| Error::Parse(format!("closed set needs [..]: {rest:?}")))?;
                let cover = inner
                    .split(';')
                    .map(parse_ball)
                    .collect::<Result<Vec<_>>>()?;
                Ok(SetDescriptor::Closed(cover))
            }
            "pred" => Ok(SetDescriptor::Pred(parse_predicate(rest)?)),
            other => Err(Error::Parse(format!("unknown set kind {other:?}"))),
        }
    }
}
