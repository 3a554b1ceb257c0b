//! Plain-text exchange formats: sparse triplets for signatures, channels and
//! constraint systems, plus the solver trace CSV.
//!
//! Lines starting with `#` and blank lines are ignored by every reader.
//! Floating-point values are written in shortest round-trip form, so a
//! write/read cycle is lossless.

use std::io::{BufRead, Write};

use crate::channel::EffectiveChannel;
use crate::constraints::{Axis, ConstraintSystem, RowKind, RowProvenance};
use crate::signature::SignatureMatrix;
use crate::solver::{OpCounters, SolveResult};
use crate::sparse::SparseMatrix;
use crate::{Error, Result, C64};

fn content_lines<R: BufRead>(input: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push((no + 1, t.to_string()));
        }
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse(format!("line {line}: missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: invalid {what}")))
}

fn expect_end<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<()> {
    match toks.next() {
        None => Ok(()),
        Some(t) => Err(Error::Parse(format!("line {line}: unexpected token '{t}'"))),
    }
}

/// Header `K N L seed`, then one `row col value` line per nonzero.
pub fn write_signatures<W: Write>(s: &SignatureMatrix, mut out: W) -> Result<()> {
    writeln!(out, "{} {} {} {}", s.n_users(), s.n_subcarriers(), s.nonzeros_per_user(), s.seed())?;
    for (k, row) in s.rows().iter().enumerate() {
        for &(n, v) in row {
            writeln!(out, "{k} {n} {v}")?;
        }
    }
    Ok(())
}

pub fn read_signatures<R: BufRead>(input: R) -> Result<SignatureMatrix> {
    let lines = content_lines(input)?;
    let (hl, header) = lines.first().ok_or_else(|| Error::Parse("empty signature file".into()))?;
    let mut t = header.split_whitespace();
    let k: usize = parse(t.next(), *hl, "K")?;
    let n: usize = parse(t.next(), *hl, "N")?;
    let l: usize = parse(t.next(), *hl, "L")?;
    let seed: u64 = parse(t.next(), *hl, "seed")?;
    expect_end(t, *hl)?;
    let mut rows = vec![Vec::new(); k];
    for (no, line) in &lines[1..] {
        let mut t = line.split_whitespace();
        let r: usize = parse(t.next(), *no, "row")?;
        let c: usize = parse(t.next(), *no, "column")?;
        let v: f64 = parse(t.next(), *no, "value")?;
        expect_end(t, *no)?;
        rows.get_mut(r)
            .ok_or_else(|| Error::Parse(format!("line {no}: row {r} out of range")))?
            .push((c, v));
    }
    SignatureMatrix::from_rows(n, l, seed, rows)
}

/// Header `K N`, then one `row col re im` line per nonzero.
pub fn write_channel<W: Write>(h: &EffectiveChannel, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", h.n_users(), h.n_subcarriers())?;
    for (k, row) in h.rows().iter().enumerate() {
        for &(n, v) in row {
            writeln!(out, "{k} {n} {} {}", v.re, v.im)?;
        }
    }
    Ok(())
}

/// Reads the format of [`write_channel`]; every listed entry is kept, even
/// an explicit zero.
pub fn read_channel<R: BufRead>(input: R) -> Result<EffectiveChannel> {
    let lines = content_lines(input)?;
    let (hl, header) = lines.first().ok_or_else(|| Error::Parse("empty channel file".into()))?;
    let mut t = header.split_whitespace();
    let k: usize = parse(t.next(), *hl, "K")?;
    let n: usize = parse(t.next(), *hl, "N")?;
    expect_end(t, *hl)?;
    let mut rows = vec![Vec::new(); k];
    for (no, line) in &lines[1..] {
        let mut t = line.split_whitespace();
        let r: usize = parse(t.next(), *no, "row")?;
        let c: usize = parse(t.next(), *no, "column")?;
        let re: f64 = parse(t.next(), *no, "real part")?;
        let im: f64 = parse(t.next(), *no, "imaginary part")?;
        expect_end(t, *no)?;
        rows.get_mut(r)
            .ok_or_else(|| Error::Parse(format!("line {no}: row {r} out of range")))?
            .push((c, C64::new(re, im)));
    }
    EffectiveChannel::from_rows(n, rows)
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::Real => "re",
        Axis::Imag => "im",
    }
}

fn kind_name(k: RowKind) -> &'static str {
    match k {
        RowKind::Upper => "upper",
        RowKind::Lower => "lower",
        RowKind::Equality => "equality",
        RowKind::Padding => "padding",
    }
}

fn write_block<W: Write>(
    out: &mut W,
    name: char,
    m: &SparseMatrix,
    rhs: &[f64],
    prov: &[RowProvenance],
) -> Result<()> {
    writeln!(out, "{name} {} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(out, "{i} {j} {v}")?;
    }
    for (i, (b, p)) in rhs.iter().zip(prov).enumerate() {
        writeln!(out, "{i} {b} {} {} {}", p.user, axis_name(p.axis), kind_name(p.kind))?;
    }
    Ok(())
}

/// Two blocks, `A` then `B`. Each starts with `<name> rows cols nnz`,
/// followed by `nnz` lines `i j value` and one line per row
/// `i rhs user axis kind`, where `rhs` is `c_i` (or `e_i`), `axis` is
/// `re`/`im` and `kind` is `upper`, `lower`, `equality` or `padding`.
pub fn write_constraint_system<W: Write>(sys: &ConstraintSystem, mut out: W) -> Result<()> {
    write_block(&mut out, 'A', &sys.a, &sys.c, &sys.a_rows)?;
    write_block(&mut out, 'B', &sys.b, &sys.e, &sys.b_rows)?;
    Ok(())
}

type Block = (SparseMatrix, Vec<f64>, Vec<RowProvenance>);

fn read_block(lines: &[(usize, String)], pos: &mut usize, name: &str) -> Result<Block> {
    let (hl, header) = lines
        .get(*pos)
        .ok_or_else(|| Error::Parse(format!("missing block {name}")))?;
    let mut t = header.split_whitespace();
    if t.next() != Some(name) {
        return Err(Error::Parse(format!("line {hl}: expected block {name}")));
    }
    let m: usize = parse(t.next(), *hl, "row count")?;
    let n: usize = parse(t.next(), *hl, "column count")?;
    let nnz: usize = parse(t.next(), *hl, "nonzero count")?;
    expect_end(t, *hl)?;
    *pos += 1;
    let take = |pos: &mut usize| -> Result<&(usize, String)> {
        let line = lines
            .get(*pos)
            .ok_or_else(|| Error::Parse(format!("block {name} truncated")))?;
        *pos += 1;
        Ok(line)
    };
    let mut rows = vec![Vec::new(); m];
    for _ in 0..nnz {
        let (no, line) = take(pos)?;
        let mut t = line.split_whitespace();
        let i: usize = parse(t.next(), *no, "row")?;
        let j: usize = parse(t.next(), *no, "column")?;
        let v: f64 = parse(t.next(), *no, "value")?;
        expect_end(t, *no)?;
        if j >= n {
            return Err(Error::Parse(format!("line {no}: column {j} out of range")));
        }
        rows.get_mut(i)
            .ok_or_else(|| Error::Parse(format!("line {no}: row {i} out of range")))?
            .push((j, v));
    }
    let mut rhs = Vec::with_capacity(m);
    let mut prov = Vec::with_capacity(m);
    for r in 0..m {
        let (no, line) = take(pos)?;
        let mut t = line.split_whitespace();
        let i: usize = parse(t.next(), *no, "row")?;
        if i != r {
            return Err(Error::Parse(format!("line {no}: expected row {r}")));
        }
        rhs.push(parse(t.next(), *no, "right-hand side")?);
        let user: usize = parse(t.next(), *no, "user")?;
        let axis = match t.next() {
            Some("re") => Axis::Real,
            Some("im") => Axis::Imag,
            _ => return Err(Error::Parse(format!("line {no}: invalid axis"))),
        };
        let kind = match t.next() {
            Some("upper") => RowKind::Upper,
            Some("lower") => RowKind::Lower,
            Some("equality") => RowKind::Equality,
            Some("padding") => RowKind::Padding,
            _ => return Err(Error::Parse(format!("line {no}: invalid row kind"))),
        };
        expect_end(t, *no)?;
        prov.push(RowProvenance { user, axis, kind });
    }
    Ok((SparseMatrix::from_rows(n, rows), rhs, prov))
}

pub fn read_constraint_system<R: BufRead>(input: R) -> Result<ConstraintSystem> {
    let lines = content_lines(input)?;
    let mut pos = 0;
    let (a, c, a_rows) = read_block(&lines, &mut pos, "A")?;
    let (b, e, b_rows) = read_block(&lines, &mut pos, "B")?;
    if let Some((no, _)) = lines.get(pos) {
        return Err(Error::Parse(format!("line {no}: trailing content")));
    }
    if a.n_cols() != b.n_cols() {
        return Err(Error::Parse("A and B column counts differ".into()));
    }
    Ok(ConstraintSystem {
        a,
        c,
        b,
        e,
        a_rows,
        b_rows,
    })
}

/// CSV `iteration,g,max_violation,messages,adds,muls` with cumulative
/// counters. `max_violation` is empty unless the run recorded it.
pub fn write_trace<W: Write>(res: &SolveResult, per_iteration: OpCounters, mut out: W) -> Result<()> {
    writeln!(out, "iteration,g,max_violation,messages,adds,muls")?;
    for (t, g) in res.dual_trace.iter().enumerate() {
        let v = res
            .violation_trace
            .as_ref()
            .map(|v| v[t].to_string())
            .unwrap_or_default();
        let c = per_iteration * (t as u64 + 1);
        writeln!(
            out,
            "{},{g},{v},{},{},{}",
            t + 1,
            c.messages,
            c.additions,
            c.multiplications
        )?;
    }
    Ok(())
}

/// One `index re im` line per complex entry.
pub fn write_complex_vector<W: Write>(x: &[C64], mut out: W) -> Result<()> {
    for (i, v) in x.iter().enumerate() {
        writeln!(out, "{i} {} {}", v.re, v.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{assemble_qp, constraint_region, ConstellationSpec, RowLayout};
    use crate::constellation::Modulation;
    use crate::signature::generate_regular_signatures;
    use crate::solver::{per_iteration_counters, solve, SolverOptions};

    fn worked_channel() -> EffectiveChannel {
        let c = C64::new;
        EffectiveChannel::from_rows(
            3,
            vec![vec![(0, c(1.0, 1.0)), (1, c(-1.0, 1.0))], vec![(1, c(1.0, 1.0)), (2, c(1.0, -1.0))]],
        )
        .unwrap()
    }

    #[test]
    fn signature_roundtrip() {
        let s = generate_regular_signatures(12, 16, 4, 77).unwrap();
        let mut buf = Vec::new();
        write_signatures(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("12 16 4 77\n"));
        assert_eq!(read_signatures(&buf[..]).unwrap(), s);
    }

    #[test]
    fn channel_roundtrip() {
        let h = worked_channel();
        let mut buf = Vec::new();
        write_channel(&h, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().nth(1), Some("0 0 1 1"));
        assert_eq!(read_channel(&buf[..]).unwrap(), h);
    }

    #[test]
    fn constraint_system_roundtrip() {
        let spec = ConstellationSpec::standard(Modulation::Qam16, std::f64::consts::FRAC_1_SQRT_2, 1e-3).unwrap();
        let h = worked_channel();
        let regions = vec![constraint_region(0, 15, &spec).unwrap(), constraint_region(1, 10, &spec).unwrap()];
        let sys = assemble_qp(&h, &regions, RowLayout::for_spec(&spec)).unwrap();
        let mut buf = Vec::new();
        write_constraint_system(&sys, &mut buf).unwrap();
        assert_eq!(read_constraint_system(&buf[..]).unwrap(), sys);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(read_signatures(&b"2 4 2\n"[..]).is_err());
        assert!(read_signatures(&b"1 4 2 0\n3 0 1\n"[..]).is_err());
        assert!(read_channel(&b"1 2\n0 1 0.5\n"[..]).is_err());
        assert!(read_constraint_system(&b"A 1 2 0\n0 1 0 re upper\n"[..]).is_err());
        assert!(read_signatures(&b"# comment\n\n1 2 1 5\n0 1 -1\n"[..]).is_ok());
    }

    #[test]
    fn trace_rows_match_iterations() {
        let h = worked_channel();
        let spec = ConstellationSpec::standard(Modulation::Qam4, std::f64::consts::FRAC_1_SQRT_2, 1e-3).unwrap();
        let regions = vec![constraint_region(0, 3, &spec).unwrap(), constraint_region(1, 0, &spec).unwrap()];
        let sys = assemble_qp(&h, &regions, RowLayout::for_spec(&spec)).unwrap();
        let res = solve(&sys, &SolverOptions { record_violation: true, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        write_trace(&res, per_iteration_counters(&sys), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iteration,g,max_violation,messages,adds,muls");
        assert_eq!(lines.len(), res.iterations + 1);
        let last: Vec<&str> = lines.last().unwrap().split(',').collect();
        assert_eq!(last[3].parse::<u64>().unwrap(), res.counters.messages);
    }
}
