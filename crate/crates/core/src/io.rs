//! Tab-separated text formats for expression data, state matrices,
//! parameters, traces and metrics.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evaluate::{MetricSummary, TimepointMetrics};
use crate::gamma_gamma::ExpressionData;
use crate::inference::TraceEntry;
use crate::scalar::Real;
use crate::states::StateMatrix;

pub const EXPRESSION_HEADER: [&str; 5] = ["gene", "time", "group", "sample", "value"];

/// Formats with 6 significant digits, `%g` style: fixed notation for
/// decimal exponents in [-4, 6), scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Exponent after rounding, so 999999.7 becomes 1e6 rather than 1000000.
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses the long-format expression table. Genes keep their order of first
/// appearance; within a group, samples are ordered by identifier, numeric
/// identifiers numerically.
pub fn read_expression<T: Real>(text: &str) -> Result<(Vec<String>, ExpressionData<T>)> {
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or(Error::EmptyInput("expression file has no header"))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols != EXPRESSION_HEADER {
        return Err(parse_err(hline, format!("expected header `{}`", EXPRESSION_HEADER.join("\t"))));
    }

    let mut genes: Vec<String> = Vec::new();
    let mut gene_index: HashMap<String, usize> = HashMap::new();
    // (gene, time, group) -> sample key -> value; numeric ids sort numerically.
    let mut cells: BTreeMap<(usize, usize, u8), BTreeMap<(u64, String), f64>> = BTreeMap::new();
    let mut max_time = 0usize;
    for (line, l) in lines {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, found {}", f.len())));
        }
        let gene = f[0].trim();
        if gene.is_empty() {
            return Err(parse_err(line, "empty gene identifier"));
        }
        let time: usize = f[1].trim().parse().map_err(|_| parse_err(line, format!("bad time `{}`", f[1])))?;
        let group: u8 = match f[2].trim() {
            "1" => 1,
            "2" => 2,
            other => return Err(parse_err(line, format!("group must be 1 or 2, found `{other}`"))),
        };
        let value: f64 = f[4].trim().parse().map_err(|_| parse_err(line, format!("bad value `{}`", f[4])))?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(parse_err(line, format!("value must be positive, found {value}")));
        }
        let g = *gene_index.entry(gene.to_string()).or_insert_with(|| {
            genes.push(gene.to_string());
            genes.len() - 1
        });
        max_time = max_time.max(time);
        let slot = cells.entry((g, time, group)).or_default();
        let sample = f[3].trim();
        let key = (sample.parse::<u64>().unwrap_or(u64::MAX), sample.to_string());
        if slot.insert(key, value).is_some() {
            return Err(parse_err(line, format!("duplicate sample `{}` for gene {gene} at time {time}", f[3].trim())));
        }
    }
    if genes.is_empty() {
        return Err(Error::EmptyInput("expression file has no data rows"));
    }

    let times = max_time + 1;
    let count = |g: usize, t: usize, grp: u8| cells.get(&(g, t, grp)).map_or(0, BTreeMap::len);
    let (m, n) = (count(0, 0, 1), count(0, 0, 2));
    let mut values = Vec::with_capacity(genes.len() * times * (m + n));
    for g in 0..genes.len() {
        for t in 0..times {
            if count(g, t, 1) != m || count(g, t, 2) != n {
                return Err(Error::DimensionMismatch(format!(
                    "gene {} at time {t} has {}+{} samples, expected {m}+{n}",
                    genes[g],
                    count(g, t, 1),
                    count(g, t, 2)
                )));
            }
            for grp in [1u8, 2] {
                if let Some(s) = cells.get(&(g, t, grp)) {
                    values.extend(s.values().map(|&v| T::lit(v)));
                }
            }
        }
    }
    let data = ExpressionData::new(genes.len(), times, m, n, values)?;
    Ok((genes, data))
}

pub fn write_expression<T: Real>(labels: &[String], data: &ExpressionData<T>) -> Result<String> {
    if labels.len() != data.genes() {
        return Err(Error::DimensionMismatch(format!("{} labels for {} genes", labels.len(), data.genes())));
    }
    let m = data.m();
    let mut out = EXPRESSION_HEADER.join("\t");
    out.push('\n');
    for (g, label) in labels.iter().enumerate() {
        for t in 0..data.times() {
            for (j, v) in data.cell(g, t).iter().enumerate() {
                let (group, sample) = if j < m { (1, j + 1) } else { (2, j - m + 1) };
                let _ = writeln!(out, "{label}\t{t}\t{group}\t{sample}\t{}", fmt_sig(v.to_f64_lossy()));
            }
        }
    }
    Ok(out)
}

/// Parses `gene<TAB>t0<TAB>...<TAB>tT` with 0/1 cells.
pub fn read_states(text: &str) -> Result<(Vec<String>, StateMatrix)> {
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or(Error::EmptyInput("state file has no header"))?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let times = cols.len().saturating_sub(1);
    let expected: Vec<String> = (0..times).map(|t| format!("t{t}")).collect();
    if cols.first() != Some(&"gene") || times == 0 || cols[1..] != expected.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        return Err(parse_err(hline, "expected header `gene\\tt0\\t...`"));
    }
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (line, l) in lines {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != times + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", times + 1, f.len())));
        }
        let row = f[1..]
            .iter()
            .map(|c| match c.trim() {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(parse_err(line, format!("state must be 0 or 1, found `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        labels.push(f[0].trim().to_string());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("state file has no rows"));
    }
    Ok((labels, StateMatrix::from_rows(&rows)?))
}

pub fn write_states(labels: &[String], states: &StateMatrix) -> Result<String> {
    if labels.len() != states.genes() {
        return Err(Error::DimensionMismatch(format!("{} labels for {} genes", labels.len(), states.genes())));
    }
    let mut out = String::from("gene");
    for t in 0..states.times() {
        let _ = write!(out, "\tt{t}");
    }
    out.push('\n');
    for (g, label) in labels.iter().enumerate() {
        out.push_str(label);
        for t in 0..states.times() {
            let _ = write!(out, "\t{}", states.get(g, t));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Reorders `states` (labelled by `from`) into the row order of `to`.
pub fn align_states(states: &StateMatrix, from: &[String], to: &[String]) -> Result<StateMatrix> {
    let index: HashMap<&str, usize> = from.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if from.len() != to.len() || index.len() != from.len() {
        return Err(Error::DimensionMismatch(format!("{} genes versus {}", from.len(), to.len())));
    }
    let mut out = StateMatrix::zeros(to.len(), states.times());
    for (g, label) in to.iter().enumerate() {
        let src = *index
            .get(label.as_str())
            .ok_or_else(|| Error::DimensionMismatch(format!("gene {label} missing from one of the state files")))?;
        out.set_row(g, &states.row(src));
    }
    Ok(out)
}

/// `name<TAB>value` lines.
pub fn write_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::from("name\tvalue\n");
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}\t{v}");
    }
    out
}

pub fn write_trace<T: Real>(trace: &[TraceEntry<T>]) -> String {
    let mut out = String::from(
        "cycle\tgamma0\tbeta0\tgamma\tbeta1\tbeta2\talpha\talpha0\tnu\tpseudolikelihood\tflips\tmax_rel_change\tmin_score_gain\n",
    );
    for e in trace {
        let _ = write!(out, "{}", e.cycle);
        for v in e.phi.to_array().into_iter().chain(e.theta.to_array()) {
            let _ = write!(out, "\t{}", fmt_sig(v.to_f64_lossy()));
        }
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}",
            fmt_sig(e.pseudolikelihood.to_f64_lossy()),
            e.flips,
            fmt_sig(e.max_rel_change.to_f64_lossy()),
            fmt_sig(e.min_score_gain.to_f64_lossy())
        );
    }
    out
}

pub const METRICS_HEADER: &str = "replicate\tt\tsen\tspe\tfdr\ttp\tfp\ttn\tfn";

pub fn write_metrics(rows: &[(usize, Vec<TimepointMetrics>)]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for (rep, metrics) in rows {
        for m in metrics {
            let _ = writeln!(
                out,
                "{rep}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                m.t,
                fmt_sig(m.sensitivity),
                fmt_sig(m.specificity),
                fmt_sig(m.fdr),
                m.tp,
                m.fp,
                m.tn,
                m.fn_
            );
        }
    }
    out
}

pub const AGGREGATE_HEADER: &str = "method\tscenario\tt\treplicates\tsen\tsen_se\tspe\tspe_se\tfdr\tfdr_se";

/// One block of rows per (method, scenario), one row per time point.
pub fn write_aggregate(blocks: &[(&str, &str, Vec<MetricSummary>)]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for (method, scenario, rows) in blocks {
        for s in rows {
            let _ = writeln!(
                out,
                "{method}\t{scenario}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.t,
                s.replicates,
                fmt_sig(s.sensitivity.mean),
                fmt_sig(s.sensitivity.se),
                fmt_sig(s.specificity.mean),
                fmt_sig(s.specificity.se),
                fmt_sig(s.fdr.mean),
                fmt_sig(s.fdr.se)
            );
        }
    }
    out
}
