use std::fmt::Write as _;
use std::sync::Arc;

use super::{PolyVectorField, C64};
use crate::error::KamError;
use crate::lattice::{Block, Lattice, LatticeConfig, Monomial, NVar, Sign, Site, Var};

const MAGIC: &str = "# cnls-kam field v1";

fn nvar_tag(lat: &Lattice, v: NVar) -> String {
    Var::Normal(v).tag(lat)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Canonical text form: a header with the lattice, then one sorted line per term.
pub fn write_field(x: &PolyVectorField) -> String {
    let lat = x.lattice();
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let cfg = serde_json::to_string(lat.config()).expect("lattice config serializes");
    let _ = writeln!(out, "# lattice {cfg}");
    for (v, m, c) in x.sorted_terms() {
        let nv = if m.nv.is_empty() {
            "-".to_string()
        } else {
            m.nv.iter().map(|&(v, e)| format!("{}^{e}", nvar_tag(lat, v))).collect::<Vec<_>>().join(";")
        };
        let _ = writeln!(out, "{} k={} l={} n={} c={},{}", v.tag(lat), join(&m.k), join(&m.l), nv, c.re, c.im);
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> KamError {
    KamError::Parse { line, msg: msg.into() }
}

fn parse_site(s: &str, line: usize) -> Result<Site, KamError> {
    let inner = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(|| perr(line, format!("bad site {s}")))?;
    inner
        .split(',')
        .map(|p| p.trim().parse::<i32>().map_err(|e| perr(line, format!("bad site coordinate {p}: {e}"))))
        .collect::<Result<Vec<_>, _>>()
        .map(Site)
}

fn parse_nvar(lat: &Lattice, s: &str, line: usize) -> Result<NVar, KamError> {
    let mut ch = s.chars();
    let block = match ch.next() {
        Some('z') => Block::Z,
        Some('w') => Block::W,
        _ => return Err(perr(line, format!("bad normal variable {s}"))),
    };
    let sign = match ch.next() {
        Some('+') => Sign::Plus,
        Some('-') => Sign::Minus,
        _ => return Err(perr(line, format!("bad sign in {s}"))),
    };
    let site = parse_site(ch.as_str(), line)?;
    let id = lat.id(&site).ok_or_else(|| perr(line, format!("site {site} outside lattice")))?;
    if !lat.is_normal(block, id) {
        return Err(perr(line, format!("site {site} is tangential for this block")));
    }
    Ok(NVar::new(block, sign, id))
}

fn parse_var(lat: &Lattice, s: &str, line: usize) -> Result<Var, KamError> {
    let n = lat.n();
    let idx = |rest: &str, lim: usize| -> Result<u8, KamError> {
        let b: usize = rest.parse().map_err(|_| perr(line, format!("bad component {s}")))?;
        if b == 0 || b > lim {
            return Err(perr(line, format!("component index out of range in {s}")));
        }
        Ok((b - 1) as u8)
    };
    if let Some(r) = s.strip_prefix("th") {
        return Ok(Var::Angle(idx(r, n)?));
    }
    if let Some(r) = s.strip_prefix("ph") {
        return Ok(Var::Angle(idx(r, lat.m())? + n as u8));
    }
    if let Some(r) = s.strip_prefix('I') {
        return Ok(Var::Action(idx(r, n)?));
    }
    if let Some(r) = s.strip_prefix('J') {
        return Ok(Var::Action(idx(r, lat.m())? + n as u8));
    }
    parse_nvar(lat, s, line).map(Var::Normal)
}

fn field<'a>(tok: Option<&'a str>, key: &str, line: usize) -> Result<&'a str, KamError> {
    tok.and_then(|t| t.strip_prefix(key)).ok_or_else(|| perr(line, format!("expected {key}")))
}

/// Inverse of [`write_field`]. When `lattice` is given, the header must match it.
pub fn parse_field(text: &str, lattice: Option<Arc<Lattice>>) -> Result<PolyVectorField, KamError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(perr(1, "missing field header")),
    }
    let cfg_line = lines.next().ok_or_else(|| perr(2, "missing lattice line"))?.1;
    let cfg: LatticeConfig = serde_json::from_str(
        cfg_line.strip_prefix("# lattice ").ok_or_else(|| perr(2, "missing lattice line"))?,
    )
    .map_err(|e| perr(2, e.to_string()))?;
    let lat = match lattice {
        Some(l) if l.config() == &cfg => l,
        Some(_) => return Err(perr(2, "lattice in file differs from the expected lattice")),
        None if cfg.tangential1.is_empty() && cfg.tangential2.is_empty() => {
            Arc::new(Lattice::all_normal(cfg.d, cfg.radius)?)
        }
        None => Arc::new(Lattice::new(cfg)?),
    };
    let nm = lat.n() + lat.m();
    let mut f = PolyVectorField::zero(lat.clone());
    for (no, l) in lines {
        let line = no + 1;
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut toks = l.split_whitespace();
        let comp = parse_var(&lat, toks.next().ok_or_else(|| perr(line, "empty line"))?, line)?;
        let k: Vec<i16> = field(toks.next(), "k=", line)?
            .split(',')
            .map(|x| x.parse().map_err(|_| perr(line, "bad k")))
            .collect::<Result<_, _>>()?;
        let lv: Vec<u16> = field(toks.next(), "l=", line)?
            .split(',')
            .map(|x| x.parse().map_err(|_| perr(line, "bad l")))
            .collect::<Result<_, _>>()?;
        if k.len() != nm || lv.len() != nm {
            return Err(perr(line, "exponent vector has wrong length"));
        }
        let mut m = Monomial::fourier(&k);
        for (a, &e) in lv.iter().enumerate() {
            m = m.with_action(a, e);
        }
        let ns = field(toks.next(), "n=", line)?;
        if ns != "-" {
            for part in ns.split(';') {
                let (v, e) = part.split_once('^').ok_or_else(|| perr(line, "bad normal exponent"))?;
                let e: u16 = e.parse().map_err(|_| perr(line, "bad normal exponent"))?;
                if e == 0 {
                    return Err(perr(line, "zero normal exponent"));
                }
                m = m.with_normal(parse_nvar(&lat, v, line)?, e);
            }
        }
        let (re, im) = field(toks.next(), "c=", line)?.split_once(',').ok_or_else(|| perr(line, "bad coefficient"))?;
        let c = C64::new(
            re.parse().map_err(|_| perr(line, "bad coefficient"))?,
            im.parse().map_err(|_| perr(line, "bad coefficient"))?,
        );
        if toks.next().is_some() {
            return Err(perr(line, "trailing tokens"));
        }
        f.add_term(comp, m, c);
    }
    f.drop_zeros();
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let lat = Arc::new(Lattice::new(LatticeConfig::default()).unwrap());
        let a = lat.id(&Site(vec![-3, 2])).unwrap();
        let b = lat.id(&Site(vec![1, 0])).unwrap();
        let x = PolyVectorField::from_terms(
            lat.clone(),
            [
                (
                    Var::Normal(NVar::new(Block::W, Sign::Minus, b)),
                    Monomial::fourier(&[1, -2, 0, 3]).with_normal(NVar::new(Block::Z, Sign::Plus, a), 2),
                    C64::new(0.1 + 0.2, -1.0 / 3.0),
                ),
                (Var::Angle(3), Monomial::one(4).with_action(2, 1), C64::new(1e-300, 7.0)),
            ],
        );
        let s = write_field(&x);
        let y = parse_field(&s, Some(lat.clone())).unwrap();
        assert_eq!(x, y);
        assert_eq!(write_field(&y), s);
    }

    #[test]
    fn rejects_garbage() {
        let lat = Arc::new(Lattice::new(LatticeConfig::default()).unwrap());
        let s = write_field(&PolyVectorField::zero(lat.clone()));
        let bad = format!("{s}th1 k=0,0 l=0,0,0,0 n=- c=1,0\n");
        assert!(matches!(parse_field(&bad, None), Err(KamError::Parse { .. })));
        let bad = format!("{s}z+(1,0) k=0,0,0,0 l=0,0,0,0 n=- c=1,0\n");
        assert!(parse_field(&bad, None).is_err());
    }
}
