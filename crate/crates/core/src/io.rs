//! Plain-text formats for MDPs and datasets.
//!
//! MDP files are line oriented. Blank lines and lines starting with `#` are
//! ignored; the rest are keyword records:
//!
//! ```text
//! states 3
//! actions 2
//! gamma 0.95
//! initial 1 0 0
//! reward 2 0 1
//! transition 0 0 1 0.9
//! ```
//!
//! `states`, `actions`, `gamma` and `initial` must come first. Each `reward s a r`
//! sets one entry (default 0); each `transition s a s' p` sets one nonzero
//! entry of `T(s'|s,a)`.
//!
//! Datasets hold one sequence per line with space-separated tokens and `_`
//! for a MISSING step. Observation tokens are symbol indices; trajectory
//! tokens are `state:action`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::irl::{ObservationSequence, PartialTrajectory};
use crate::mdp::Mdp;
use crate::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number<T: FromStr>(token: Option<&str>, line: usize, what: &str) -> Result<T> {
    let token = token.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} {token:?}")))
}

/// Renders an MDP; reading it back yields an identical model.
pub fn format_mdp(mdp: &Mdp) -> String {
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut out = String::new();
    writeln!(out, "states {n}").unwrap();
    writeln!(out, "actions {m}").unwrap();
    writeln!(out, "gamma {}", mdp.gamma()).unwrap();
    let initial: Vec<String> = mdp.initial().iter().map(f64::to_string).collect();
    writeln!(out, "initial {}", initial.join(" ")).unwrap();
    for s in 0..n {
        for a in 0..m {
            let r = mdp.reward(s, a);
            if r != 0.0 {
                writeln!(out, "reward {s} {a} {r}").unwrap();
            }
        }
    }
    for s in 0..n {
        for a in 0..m {
            for &(s2, p) in mdp.successors(s, a) {
                writeln!(out, "transition {s} {a} {s2} {p}").unwrap();
            }
        }
    }
    out
}

pub fn write_mdp<W: Write>(mdp: &Mdp, mut writer: W) -> Result<()> {
    writer.write_all(format_mdp(mdp).as_bytes())?;
    Ok(())
}

pub fn parse_mdp(text: &str) -> Result<Mdp> {
    let mut states: Option<usize> = None;
    let mut actions: Option<usize> = None;
    let mut gamma: Option<f64> = None;
    let mut initial: Option<Vec<f64>> = None;
    let mut reward: Vec<Vec<f64>> = Vec::new();
    let mut transitions: Vec<Vec<Vec<f64>>> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let keyword = tokens.next().expect("nonempty line");
        let ready = states.is_some() && actions.is_some() && gamma.is_some() && initial.is_some();
        match keyword {
            "states" | "actions" | "gamma" | "initial" if ready => {
                return Err(parse_err(line, format!("duplicate {keyword} record")));
            }
            "states" => states = Some(number(tokens.next(), line, "state count")?),
            "actions" => actions = Some(number(tokens.next(), line, "action count")?),
            "gamma" => gamma = Some(number(tokens.next(), line, "discount")?),
            "initial" => {
                let values = tokens
                    .by_ref()
                    .map(|t| number(Some(t), line, "initial probability"))
                    .collect::<Result<Vec<f64>>>()?;
                initial = Some(values);
            }
            "reward" | "transition" if !ready => {
                return Err(parse_err(line, "header must precede reward and transition records"));
            }
            "reward" | "transition" => {
                let (n, m) = (states.unwrap(), actions.unwrap());
                if reward.is_empty() {
                    reward = vec![vec![0.0; m]; n];
                    transitions = vec![vec![vec![0.0; n]; m]; n];
                }
                let s: usize = number(tokens.next(), line, "state")?;
                let a: usize = number(tokens.next(), line, "action")?;
                if s >= n || a >= m {
                    return Err(parse_err(line, format!("({s}, {a}) outside {n} states x {m} actions")));
                }
                if keyword == "reward" {
                    reward[s][a] = number(tokens.next(), line, "reward")?;
                } else {
                    let s2: usize = number(tokens.next(), line, "successor")?;
                    if s2 >= n {
                        return Err(parse_err(line, format!("successor {s2} outside {n} states")));
                    }
                    transitions[s][a][s2] = number(tokens.next(), line, "probability")?;
                }
            }
            other => return Err(parse_err(line, format!("unknown record {other:?}"))),
        }
        if tokens.next().is_some() {
            return Err(parse_err(line, "trailing tokens"));
        }
    }
    let (Some(n), Some(m), Some(gamma), Some(initial)) = (states, actions, gamma, initial) else {
        return Err(parse_err(0, "missing states, actions, gamma or initial record"));
    };
    if transitions.is_empty() {
        transitions = vec![vec![vec![0.0; n]; m]; n];
        reward = vec![vec![0.0; m]; n];
    }
    Mdp::new(transitions, reward, gamma, initial)
}

pub fn read_mdp<R: BufRead>(mut reader: R) -> Result<Mdp> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_mdp(&text)
}

fn format_lines<T>(items: &[T], token: impl Fn(&T) -> Vec<String>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&token(item).join(" "));
        out.push('\n');
    }
    out
}

fn parse_lines<T>(text: &str, mut parse_token: impl FnMut(&str, usize) -> Result<T>) -> Result<Vec<Vec<Option<T>>>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let row = body
            .split_whitespace()
            .map(|t| {
                if t == "_" {
                    Ok(None)
                } else {
                    parse_token(t, i + 1).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

pub fn format_sequences(sequences: &[ObservationSequence]) -> String {
    format_lines(sequences, |seq| {
        seq.symbols()
            .iter()
            .map(|w| w.map_or_else(|| "_".to_string(), |w| w.to_string()))
            .collect()
    })
}

pub fn parse_sequences(text: &str) -> Result<Vec<ObservationSequence>> {
    parse_lines(text, |t, line| number(Some(t), line, "symbol"))?
        .into_iter()
        .map(ObservationSequence::new)
        .collect()
}

pub fn format_trajectories(trajectories: &[PartialTrajectory]) -> String {
    format_lines(trajectories, |t| {
        t.steps()
            .iter()
            .map(|step| step.map_or_else(|| "_".to_string(), |(s, a)| format!("{s}:{a}")))
            .collect()
    })
}

pub fn parse_trajectories(text: &str) -> Result<Vec<PartialTrajectory>> {
    parse_lines(text, |t, line| {
        let (s, a) = t
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("expected state:action, got {t:?}")))?;
        Ok((number(Some(s), line, "state")?, number(Some(a), line, "action")?))
    })?
    .into_iter()
    .map(PartialTrajectory::new)
    .collect()
}
