use std::fmt;
use std::str::FromStr;

use crate::brown::GridSpec;
use crate::error::{Error, Result};
use crate::integrate::HoelderPath;
use crate::linalg::CMatrix;

fn number(s: &str) -> Result<f64> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("non-finite number `{s}`")));
    }
    Ok(x)
}

/// Parses `"xmin,xmax,ymin,ymax,h"`.
pub fn parse_grid_spec(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 5 {
        return Err(Error::Parse(format!(
            "grid spec `{s}` needs 5 fields: xmin,xmax,ymin,ymax,h"
        )));
    }
    let v: Vec<f64> = parts.iter().map(|p| number(p)).collect::<Result<_>>()?;
    let grid = GridSpec {
        re_min: v[0],
        re_max: v[1],
        im_min: v[2],
        im_max: v[3],
        h: v[4],
    };
    grid.validate().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Constant,
    Linear,
    Spike,
}

/// `"constant|linear|spike:alpha[@a,b]"`; the interval defaults to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub kind: PathKind,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl PathSpec {
    /// Path with values in multiples of `m`, measured in the `p` quasi-norm.
    pub fn build(&self, m: &CMatrix, p: f64) -> Result<HoelderPath> {
        match self.kind {
            PathKind::Constant => HoelderPath::constant(m, self.a, self.b, self.alpha, p),
            PathKind::Linear => HoelderPath::linear(m, self.a, self.b, self.alpha, p),
            PathKind::Spike => HoelderPath::spike(m, self.a, self.b, self.alpha, p),
        }
    }
}

impl FromStr for PathSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Parse(format!("path spec `{s}`: {why}"));
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad("expected kind:alpha"))?;
        let kind = match kind.trim() {
            "constant" => PathKind::Constant,
            "linear" => PathKind::Linear,
            "spike" => PathKind::Spike,
            _ => return Err(bad("kind must be constant, linear or spike")),
        };
        let (alpha, interval) = match rest.split_once('@') {
            Some((al, iv)) => (al, Some(iv)),
            None => (rest, None),
        };
        let alpha = number(alpha)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(bad("alpha must lie in (0, 1]"));
        }
        let (a, b) = match interval {
            None => (0.0, 1.0),
            Some(iv) => {
                let (a, b) = iv
                    .split_once(',')
                    .ok_or_else(|| bad("interval must be a,b"))?;
                (number(a)?, number(b)?)
            }
        };
        if !(a < b) {
            return Err(bad("need a < b"));
        }
        Ok(Self { kind, alpha, a, b })
    }
}

impl fmt::Display for PathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PathKind::Constant => "constant",
            PathKind::Linear => "linear",
            PathKind::Spike => "spike",
        };
        write!(f, "{kind}:{}@{},{}", self.alpha, self.a, self.b)
    }
}

pub fn parse_path_spec(s: &str) -> Result<PathSpec> {
    s.parse()
}
