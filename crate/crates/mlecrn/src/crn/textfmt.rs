//! Plain-text reaction network format.
//!
//! One reaction per line:
//!
//! ```text
//! # species: X1 X2 X3
//! X1 + X3 <-> 2 X2 @ 1,1
//! 2 X2 -> X1 + X3 @ 0.5
//! ```
//!
//! `<->` expands to two reactions and takes a `kf,kr` rate pair. A bare `0`
//! denotes the empty side. `#` starts a comment, except the `# species:`
//! directive which fixes the species universe and its order; without it,
//! species are numbered by first appearance.

use super::{CrnError, Reaction, ReactionNetwork};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError { line, message: message.into() }
    }
}

/// A parsed network plus non-fatal diagnostics.
#[derive(Debug)]
pub struct ParsedNetwork {
    pub network: ReactionNetwork,
    pub warnings: Vec<String>,
}

pub fn is_valid_species_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct RawReaction {
    line: usize,
    reactant: Vec<(String, u64)>,
    product: Vec<(String, u64)>,
    rate: f64,
}

fn parse_term(line_no: usize, term: &str) -> Result<(String, u64), ParseError> {
    let term = term.trim();
    let digits: String = term.chars().take_while(|c| c.is_ascii_digit()).collect();
    let rest = term[digits.len()..].trim_start();
    let coeff = if digits.is_empty() {
        1
    } else {
        digits.parse::<u64>().map_err(|_| {
            ParseError::new(line_no, format!("coefficient {digits:?} out of range"))
        })?
    };
    if coeff == 0 {
        return Err(ParseError::new(
            line_no,
            format!("zero coefficient in term {term:?}; omit the species instead"),
        ));
    }
    if !is_valid_species_name(rest) {
        return Err(ParseError::new(
            line_no,
            format!("invalid species name {rest:?} in term {term:?}"),
        ));
    }
    Ok((rest.to_string(), coeff))
}

fn parse_side(line_no: usize, side: &str) -> Result<Vec<(String, u64)>, ParseError> {
    let side = side.trim();
    if side.is_empty() {
        return Err(ParseError::new(line_no, "empty reaction side; use 0"));
    }
    if side == "0" {
        return Ok(Vec::new());
    }
    let mut terms = Vec::new();
    for raw in side.split('+') {
        if raw.trim() == "0" {
            return Err(ParseError::new(line_no, "0 cannot be combined with terms"));
        }
        terms.push(parse_term(line_no, raw)?);
    }
    Ok(terms)
}

fn parse_rate(line_no: usize, s: &str) -> Result<f64, ParseError> {
    let s = s.trim();
    s.parse::<f64>()
        .map_err(|_| ParseError::new(line_no, format!("invalid rate {s:?}")))
}

/// Parses the text format. Duplicate reactions are legal and reported as
/// warnings; they stay separate in the returned network.
pub fn parse_network(text: &str) -> Result<ParsedNetwork, ParseError> {
    let mut declared: Vec<String> = Vec::new();
    let mut has_declaration = false;
    let mut raws: Vec<RawReaction> = Vec::new();

    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = full_line.trim();
        if let Some(rest) = trimmed.strip_prefix("# species:") {
            has_declaration = true;
            for name in rest.split_whitespace() {
                if !is_valid_species_name(name) {
                    return Err(ParseError::new(
                        line_no,
                        format!("invalid species name {name:?} in species directive"),
                    ));
                }
                if declared.iter().any(|d| d == name) {
                    return Err(ParseError::new(
                        line_no,
                        format!("species {name:?} declared twice"),
                    ));
                }
                declared.push(name.to_string());
            }
            continue;
        }
        let code = match trimmed.find('#') {
            Some(pos) => trimmed[..pos].trim(),
            None => trimmed,
        };
        if code.is_empty() {
            continue;
        }

        let (reaction_part, rate_part) = code.split_once('@').ok_or_else(|| {
            ParseError::new(line_no, "missing '@ rate'")
        })?;
        if rate_part.contains('@') {
            return Err(ParseError::new(line_no, "more than one '@'"));
        }

        let (lhs, rhs, reversible) = if let Some((l, r)) = reaction_part.split_once("<->") {
            (l, r, true)
        } else if let Some((l, r)) = reaction_part.split_once("->") {
            (l, r, false)
        } else {
            return Err(ParseError::new(line_no, "missing '->' or '<->'"));
        };
        if rhs.contains("->") {
            return Err(ParseError::new(line_no, "more than one arrow"));
        }

        let reactant = parse_side(line_no, lhs)?;
        let product = parse_side(line_no, rhs)?;

        let rates: Vec<&str> = rate_part.split(',').collect();
        match (reversible, rates.len()) {
            (false, 1) => {
                raws.push(RawReaction {
                    line: line_no,
                    reactant,
                    product,
                    rate: parse_rate(line_no, rates[0])?,
                });
            }
            (true, 2) => {
                let kf = parse_rate(line_no, rates[0])?;
                let kr = parse_rate(line_no, rates[1])?;
                raws.push(RawReaction {
                    line: line_no,
                    reactant: reactant.clone(),
                    product: product.clone(),
                    rate: kf,
                });
                raws.push(RawReaction {
                    line: line_no,
                    reactant: product,
                    product: reactant,
                    rate: kr,
                });
            }
            (false, _) => {
                return Err(ParseError::new(line_no, "'->' takes exactly one rate"));
            }
            (true, _) => {
                return Err(ParseError::new(line_no, "'<->' takes rates 'kf,kr'"));
            }
        }
    }

    let mut species = declared;
    if !has_declaration {
        for raw in &raws {
            for (name, _) in raw.reactant.iter().chain(&raw.product) {
                if !species.iter().any(|s| s == name) {
                    species.push(name.clone());
                }
            }
        }
    }

    let index_of = |line: usize, name: &str| {
        species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ParseError::new(line, format!("species {name:?} not declared")))
    };

    let mut reactions = Vec::with_capacity(raws.len());
    let mut warnings = Vec::new();
    let mut seen: Vec<(Vec<u64>, Vec<u64>)> = Vec::new();
    for raw in &raws {
        let mut reactant = vec![0u64; species.len()];
        let mut product = vec![0u64; species.len()];
        for (name, coeff) in &raw.reactant {
            reactant[index_of(raw.line, name)?] += coeff;
        }
        for (name, coeff) in &raw.product {
            product[index_of(raw.line, name)?] += coeff;
        }
        let key = (reactant.clone(), product.clone());
        if seen.contains(&key) {
            warnings.push(format!(
                "line {}: duplicate reaction; rates add up in the dynamics",
                raw.line
            ));
        } else {
            seen.push(key);
        }
        let reaction = Reaction::new(reactant, product, raw.rate).map_err(|e| {
            let msg = match e {
                CrnError::TrivialReaction => "reaction does not change any species".to_string(),
                CrnError::InvalidRate(k) => format!("rate must be positive, got {k}"),
                other => other.to_string(),
            };
            ParseError::new(raw.line, msg)
        })?;
        reactions.push(reaction);
    }

    let network = ReactionNetwork::new(species, reactions)
        .map_err(|e| ParseError::new(0, e.to_string()))?;
    Ok(ParsedNetwork { network, warnings })
}

fn format_side(species: &[String], coeffs: &[u64]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            if c == 1 {
                species[i].clone()
            } else {
                format!("{c} {}", species[i])
            }
        })
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    }
}

/// Renders a network in the text format, starting with a `# species:`
/// directive so the parse round-trips exactly. Adjacent mirror-image
/// reactions collapse into one `<->` line.
pub fn emit_network(net: &ReactionNetwork) -> String {
    debug_assert!(
        net.species().iter().all(|s| is_valid_species_name(s)),
        "species names must fit the grammar"
    );
    let mut out = String::new();
    out.push_str("# species:");
    for s in net.species() {
        out.push(' ');
        out.push_str(s);
    }
    out.push('\n');
    let reactions = net.reactions();
    let mut i = 0;
    while i < reactions.len() {
        let r = &reactions[i];
        let paired = i + 1 < reactions.len()
            && reactions[i + 1].reactant() == r.product()
            && reactions[i + 1].product() == r.reactant();
        let lhs = format_side(net.species(), r.reactant());
        let rhs = format_side(net.species(), r.product());
        if paired {
            let kr = reactions[i + 1].rate();
            out.push_str(&format!("{lhs} <-> {rhs} @ {},{kr}\n", r.rate()));
            i += 2;
        } else {
            out.push_str(&format!("{lhs} -> {rhs} @ {}\n", r.rate()));
            i += 1;
        }
    }
    out
}
