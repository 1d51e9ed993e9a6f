//! Sparse bipartite cost matrix between demand points and candidate facilities.
//!
//! Both directions are stored in compressed-row form: candidate -> demands
//! (`forward`) and demand -> candidates (`reverse`). A missing entry means the
//! pair is unreachable (infinite cost).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::loss::LossPair;

/// One stored entry seen from either side of the matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    offsets: Vec<usize>,
    entries: Vec<Neighbor>,
}

impl Csr {
    /// Bucket `(row, col, cost)` triples by row, each row sorted by column.
    fn build(n_rows: usize, triples: &[(usize, usize, f64)]) -> Csr {
        let mut offsets = vec![0usize; n_rows + 1];
        for &(r, _, _) in triples {
            offsets[r + 1] += 1;
        }
        for i in 0..n_rows {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut entries = vec![Neighbor { id: 0, cost: 0.0 }; triples.len()];
        for &(r, c, cost) in triples {
            entries[fill[r]] = Neighbor { id: c, cost };
            fill[r] += 1;
        }
        for r in 0..n_rows {
            entries[offsets[r]..offsets[r + 1]].sort_unstable_by_key(|n| n.id);
        }
        Csr { offsets, entries }
    }

    #[inline]
    fn row(&self, r: usize) -> &[Neighbor] {
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }
}

/// Immutable sparse cost matrix over `n_demand` demand points and
/// `n_candidates` candidate facilities, with a positive penalty per demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCostMatrix {
    n_demand: usize,
    n_candidates: usize,
    forward: Csr,
    reverse: Csr,
    penalties: Vec<f64>,
}

impl SparseCostMatrix {
    /// Build from `(demand, candidate, cost)` entries. `penalties` defaults to
    /// 1.0 for every demand. Duplicate pairs and negative or non-finite costs
    /// are rejected.
    pub fn new<I>(n_demand: usize, n_candidates: usize, entries: I, penalties: Option<Vec<f64>>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut by_demand = Vec::new();
        let mut by_candidate = Vec::new();
        for (demand, candidate, cost) in entries {
            if demand >= n_demand {
                return Err(Error::DemandOutOfRange { demand, n_demand });
            }
            if candidate >= n_candidates {
                return Err(Error::CandidateOutOfRange {
                    candidate,
                    n_candidates,
                });
            }
            if !cost.is_finite() || cost < 0.0 {
                return Err(Error::InvalidCost {
                    demand,
                    candidate,
                    cost,
                });
            }
            by_demand.push((demand, candidate, cost));
            by_candidate.push((candidate, demand, cost));
        }
        let penalties = match penalties {
            Some(p) => {
                if p.len() != n_demand {
                    return Err(Error::InvalidArgument(format!(
                        "expected {} penalties, got {}",
                        n_demand,
                        p.len()
                    )));
                }
                if let Some((demand, &penalty)) = p.iter().enumerate().find(|(_, &v)| !(v.is_finite() && v > 0.0)) {
                    return Err(Error::InvalidPenalty { demand, penalty });
                }
                p
            }
            None => vec![1.0; n_demand],
        };
        let reverse = Csr::build(n_demand, &by_demand);
        for o in 0..n_demand {
            let row = reverse.row(o);
            if let Some(w) = row.windows(2).find(|w| w[0].id == w[1].id) {
                return Err(Error::DuplicateEntry {
                    demand: o,
                    candidate: w[0].id,
                });
            }
        }
        let forward = Csr::build(n_candidates, &by_candidate);
        Ok(SparseCostMatrix {
            n_demand,
            n_candidates,
            forward,
            reverse,
            penalties,
        })
    }

    /// Complete matrix from dense rows (`rows[o][j]` = cost of demand `o` to
    /// candidate `j`). Infinite values are left out.
    pub fn from_dense(rows: &[Vec<f64>], penalties: Option<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument("ragged dense matrix".into()));
        }
        let entries = rows.iter().enumerate().flat_map(|(o, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| **c != f64::INFINITY)
                .map(move |(j, &c)| (o, j, c))
        });
        SparseCostMatrix::new(n, m, entries, penalties)
    }

    #[inline]
    pub fn n_demand(&self) -> usize {
        self.n_demand
    }

    #[inline]
    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    /// Number of stored entries.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.forward.entries.len()
    }

    /// Largest stored cost, 0 for an empty matrix.
    pub fn max_cost(&self) -> f64 {
        self.forward.entries.iter().map(|n| n.cost).fold(0.0, f64::max)
    }

    /// Fraction of demand/candidate pairs without a stored cost.
    pub fn sparsity(&self) -> f64 {
        let total = self.n_demand * self.n_candidates;
        if total == 0 {
            return 1.0;
        }
        1.0 - self.nnz() as f64 / total as f64
    }

    /// Demands reachable from candidate `j`, sorted by demand id.
    #[inline]
    pub fn candidate_neighbors(&self, j: usize) -> &[Neighbor] {
        self.forward.row(j)
    }

    /// Candidates reaching demand `o`, sorted by candidate id.
    #[inline]
    pub fn demand_neighbors(&self, o: usize) -> &[Neighbor] {
        self.reverse.row(o)
    }

    #[inline]
    pub fn penalty(&self, o: usize) -> f64 {
        self.penalties[o]
    }

    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn total_penalty(&self) -> f64 {
        self.penalties.iter().sum()
    }

    /// Stored cost between demand `o` and candidate `j`, if any.
    pub fn cost(&self, o: usize, j: usize) -> Option<f64> {
        let row = self.reverse.row(o);
        row.binary_search_by_key(&j, |n| n.id).ok().map(|i| row[i].cost)
    }

    /// Demands with no candidate at all.
    pub fn isolated_demands(&self) -> Vec<usize> {
        (0..self.n_demand).filter(|&o| self.reverse.row(o).is_empty()).collect()
    }

    /// All entries as `(demand, candidate, cost)`, ordered by demand then candidate.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_demand).flat_map(move |o| self.reverse.row(o).iter().map(move |n| (o, n.id, n.cost)))
    }

    fn check_medoids(&self, medoids: &[usize]) -> Result<()> {
        for &j in medoids {
            if j >= self.n_candidates {
                return Err(Error::CandidateOutOfRange {
                    candidate: j,
                    n_candidates: self.n_candidates,
                });
            }
        }
        Ok(())
    }

    /// Loss of a medoid set computed from scratch: penalty mass of uncovered
    /// demands and the summed nearest-medoid cost of the covered ones.
    pub fn evaluate_loss(&self, medoids: &[usize]) -> Result<LossPair> {
        self.check_medoids(medoids)?;
        let mut is_medoid = vec![false; self.n_candidates];
        for &j in medoids {
            is_medoid[j] = true;
        }
        let mut loss = LossPair::ZERO;
        for o in 0..self.n_demand {
            let best = self
                .reverse
                .row(o)
                .iter()
                .filter(|n| is_medoid[n.id])
                .map(|n| n.cost)
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                loss.dist += best;
            } else {
                loss.penalty += self.penalties[o];
            }
        }
        Ok(loss)
    }

    /// Parse the text format: header `N m nnz`, then `demand<TAB>candidate<TAB>cost`
    /// lines. `#` starts a comment; blank lines are ignored.
    pub fn read_text<R: BufRead>(reader: R, penalties: Option<Vec<f64>>) -> Result<Self> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut entries = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = strip_comment(&line);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let lineno = lineno + 1;
            if fields.len() != 3 {
                return Err(parse_err(lineno, "expected 3 fields"));
            }
            if header.is_none() {
                header = Some((
                    parse_field(fields[0], lineno)?,
                    parse_field(fields[1], lineno)?,
                    parse_field(fields[2], lineno)?,
                ));
                continue;
            }
            let o: usize = parse_field(fields[0], lineno)?;
            let j: usize = parse_field(fields[1], lineno)?;
            let c: f64 = parse_field(fields[2], lineno)?;
            entries.push((o, j, c));
        }
        let (n, m, nnz) = header.ok_or_else(|| parse_err(0, "missing header"))?;
        if entries.len() != nnz {
            return Err(parse_err(
                0,
                &format!("header declares {} entries, found {}", nnz, entries.len()),
            ));
        }
        SparseCostMatrix::new(n, m, entries, penalties)
    }

    /// Write the text format read by [`SparseCostMatrix::read_text`].
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.n_demand, self.n_candidates, self.nnz())?;
        for (o, j, c) in self.entries() {
            writeln!(out, "{}\t{}\t{}", o, j, c)?;
        }
        Ok(())
    }

    /// Write non-default penalties as `demand<TAB>pi` lines.
    pub fn write_penalties<W: Write>(&self, mut out: W) -> Result<()> {
        for (o, p) in self.penalties.iter().enumerate() {
            writeln!(out, "{}\t{}", o, p)?;
        }
        Ok(())
    }
}

/// Parse a penalty file (`demand<TAB>pi` per line); unlisted demands get 1.0.
pub fn read_penalties<R: BufRead>(reader: R, n_demand: usize) -> Result<Vec<f64>> {
    let mut out = vec![1.0; n_demand];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = strip_comment(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(lineno + 1, "expected 2 fields"));
        }
        let o: usize = parse_field(fields[0], lineno + 1)?;
        let p: f64 = parse_field(fields[1], lineno + 1)?;
        if o >= n_demand {
            return Err(Error::DemandOutOfRange { demand: o, n_demand });
        }
        out[o] = p;
    }
    Ok(out)
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

pub(crate) fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(line, &format!("cannot parse field {:?}", s)))
}
