//! Seeded synthetic observation streams.
//!
//! Every stream draws from a ChaCha8 generator seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`, so a fixed seed reproduces the stream
//! bit for bit.
//!
//! Text form, as used in experiment files:
//!
//! ```text
//! normal(MEAN, SD)
//! uniform(LO, HI)
//! lognormal(MU, SIGMA)
//! mixture(WEIGHT_OF_FIRST, DIST, DIST)
//! fixed(X1, X2, ...)          cycles through the listed values
//! ```

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal, Normal, Uniform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Mixture { weight: f64, first: Box<Distribution>, second: Box<Distribution> },
    Fixed(Vec<f64>),
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Self::Normal { mean, sd } => {
                if !finite(&[*mean, *sd]) || *sd <= 0.0 {
                    return bad(format!("normal({mean}, {sd}) needs finite mean and sd > 0"));
                }
            }
            Self::Uniform { lo, hi } => {
                if !finite(&[*lo, *hi]) || lo >= hi {
                    return bad(format!("uniform({lo}, {hi}) needs lo < hi"));
                }
            }
            Self::LogNormal { mu, sigma } => {
                if !finite(&[*mu, *sigma]) || *sigma <= 0.0 {
                    return bad(format!("lognormal({mu}, {sigma}) needs sigma > 0"));
                }
            }
            Self::Mixture { weight, first, second } => {
                if !(0.0..=1.0).contains(weight) {
                    return bad(format!("mixture weight {weight} outside [0, 1]"));
                }
                first.validate()?;
                second.validate()?;
            }
            Self::Fixed(xs) => {
                if xs.is_empty() || !finite(xs) {
                    return bad("fixed stream needs at least one finite value".into());
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Normal { mean, sd } => write!(f, "normal({mean}, {sd})"),
            Self::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            Self::LogNormal { mu, sigma } => write!(f, "lognormal({mu}, {sigma})"),
            Self::Mixture { weight, first, second } => {
                write!(f, "mixture({weight}, {first}, {second})")
            }
            Self::Fixed(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                write!(f, "fixed({})", parts.join(", "))
            }
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parser = Parser { src: s, pos: 0 };
        let dist = parser.distribution()?;
        parser.skip_ws();
        if parser.pos != s.len() {
            return Err(parser.error("trailing input"));
        }
        dist.validate()?;
        Ok(dist)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::InvalidConfig(format!("stream `{}`: {what} at offset {}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn token(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| c == '(' || c == ')' || c == ',' || c.is_whitespace())
            .unwrap_or(rest.len());
        self.pos += len;
        &self.src[start..start + len]
    }

    fn number(&mut self) -> Result<f64> {
        let tok = self.token().to_string();
        tok.parse::<f64>()
            .map_err(|_| self.error(&format!("expected a number, found `{tok}`")))
    }

    fn numbers<const K: usize>(&mut self) -> Result<[f64; K]> {
        let mut out = [0.0; K];
        for (i, slot) in out.iter_mut().enumerate() {
            if i > 0 {
                self.expect(',')?;
            }
            *slot = self.number()?;
        }
        Ok(out)
    }

    fn distribution(&mut self) -> Result<Distribution> {
        let name = self.token().to_ascii_lowercase();
        self.expect('(')?;
        let dist = match name.as_str() {
            "normal" => {
                let [mean, sd] = self.numbers()?;
                Distribution::Normal { mean, sd }
            }
            "uniform" => {
                let [lo, hi] = self.numbers()?;
                Distribution::Uniform { lo, hi }
            }
            "lognormal" => {
                let [mu, sigma] = self.numbers()?;
                Distribution::LogNormal { mu, sigma }
            }
            "mixture" => {
                let weight = self.number()?;
                self.expect(',')?;
                let first = Box::new(self.distribution()?);
                self.expect(',')?;
                let second = Box::new(self.distribution()?);
                Distribution::Mixture { weight, first, second }
            }
            "fixed" => {
                let mut xs = vec![self.number()?];
                loop {
                    self.skip_ws();
                    if self.src[self.pos..].starts_with(',') {
                        self.pos += 1;
                        xs.push(self.number()?);
                    } else {
                        break;
                    }
                }
                Distribution::Fixed(xs)
            }
            other => return Err(self.error(&format!("unknown distribution `{other}`"))),
        };
        self.expect(')')?;
        Ok(dist)
    }
}

/// A distribution that may switch to another one at a given interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub base: Distribution,
    /// `(interval, distribution)`: intervals numbered from 0 at or after the
    /// shift draw from the second distribution.
    pub shift: Option<(u64, Distribution)>,
    pub seed: u64,
}

impl StreamSpec {
    pub fn new(base: Distribution, seed: u64) -> Self {
        Self {
            base,
            shift: None,
            seed,
        }
    }

    pub fn with_shift(mut self, at_interval: u64, to: Distribution) -> Self {
        self.shift = Some((at_interval, to));
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if let Some((_, d)) = &self.shift {
            d.validate()?;
        }
        Ok(())
    }

    pub fn generator(&self) -> Result<StreamGenerator> {
        self.validate()?;
        Ok(StreamGenerator {
            base: Sampler::new(&self.base)?,
            shift: match &self.shift {
                Some((at, d)) => Some((*at, Sampler::new(d)?)),
                None => None,
            },
            rng: ChaCha8Rng::seed_from_u64(self.seed),
        })
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
    LogNormal(LogNormal<f64>),
    Mixture(f64, Box<Sampler>, Box<Sampler>),
    Fixed(Vec<f64>, usize),
}

impl Sampler {
    fn new(d: &Distribution) -> Result<Self> {
        let cfg = |e: String| Error::InvalidConfig(e);
        Ok(match d {
            Distribution::Normal { mean, sd } => {
                Self::Normal(Normal::new(*mean, *sd).map_err(|e| cfg(e.to_string()))?)
            }
            Distribution::Uniform { lo, hi } => {
                Self::Uniform(Uniform::new(*lo, *hi).map_err(|e| cfg(e.to_string()))?)
            }
            Distribution::LogNormal { mu, sigma } => {
                Self::LogNormal(LogNormal::new(*mu, *sigma).map_err(|e| cfg(e.to_string()))?)
            }
            Distribution::Mixture { weight, first, second } => Self::Mixture(
                *weight,
                Box::new(Self::new(first)?),
                Box::new(Self::new(second)?),
            ),
            Distribution::Fixed(xs) => Self::Fixed(xs.clone(), 0),
        })
    }

    fn sample(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Normal(d) => d.sample(rng),
            Self::Uniform(d) => d.sample(rng),
            Self::LogNormal(d) => d.sample(rng),
            Self::Mixture(w, a, b) => {
                if rng.random::<f64>() < *w {
                    a.sample(rng)
                } else {
                    b.sample(rng)
                }
            }
            Self::Fixed(xs, next) => {
                let x = xs[*next];
                *next = (*next + 1) % xs.len();
                x
            }
        }
    }
}

/// Draws observations interval by interval.
#[derive(Debug, Clone)]
pub struct StreamGenerator {
    base: Sampler,
    shift: Option<(u64, Sampler)>,
    rng: ChaCha8Rng,
}

impl StreamGenerator {
    /// Next observation for an interval numbered from 0.
    pub fn sample(&mut self, interval: u64) -> f64 {
        match &mut self.shift {
            Some((at, d)) if interval >= *at => d.sample(&mut self.rng),
            _ => self.base.sample(&mut self.rng),
        }
    }

    pub fn fill(&mut self, interval: u64, out: &mut Vec<f64>, n: usize) {
        out.extend((0..n).map(|_| self.sample(interval)));
    }
}
