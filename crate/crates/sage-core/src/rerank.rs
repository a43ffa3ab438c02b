//! Energy-based candidate re-ranking and ICS-filtered majority voting.

use std::collections::BTreeMap;

use crate::error::{CoreError, CoreResult};

/// One sampled reasoning candidate with its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tokens: Vec<usize>,
    /// log P(z|x) under the model; ≤ 0.
    pub logp: f64,
    /// Reconstruction score; ≤ 0, higher = more consistent.
    pub ics: f64,
    pub energy: f64,
}

impl Candidate {
    pub fn new(tokens: Vec<usize>, logp: f64, ics: f64, lambda: f64) -> CoreResult<Self> {
        let energy = energy(logp, ics, lambda)?;
        Ok(Self {
            tokens,
            logp,
            ics,
            energy,
        })
    }
}

/// E(z) = −logp − λ·ICS. Lower is better: high model likelihood and high
/// reconstruction consistency both push the energy down.
pub fn energy(logp: f64, ics: f64, lambda: f64) -> CoreResult<f64> {
    if !(lambda >= 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "energy: lambda must be >= 0, got {lambda}"
        )));
    }
    if !logp.is_finite() || !ics.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "energy: scores must be finite, got logp={logp} ics={ics}"
        )));
    }
    Ok(-logp - lambda * ics)
}

/// Argmin-energy winner at the given λ. Ties go to higher logp, then to the
/// lexicographically smallest token sequence.
pub fn rerank_candidates(candidates: &[Candidate], lambda: f64) -> CoreResult<Candidate> {
    if candidates.is_empty() {
        return Err(CoreError::InvalidArgument(
            "rerank_candidates: empty candidate list".into(),
        ));
    }
    let mut best: Option<(f64, &Candidate)> = None;
    for c in candidates {
        let e = energy(c.logp, c.ics, lambda)?;
        best = Some(match best {
            None => (e, c),
            Some((be, bc)) => {
                if e < be
                    || (e == be && c.logp > bc.logp)
                    || (e == be && c.logp == bc.logp && c.tokens < bc.tokens)
                {
                    (e, c)
                } else {
                    (be, bc)
                }
            }
        });
    }
    let (e, c) = best.unwrap();
    Ok(Candidate {
        tokens: c.tokens.clone(),
        logp: c.logp,
        ics: c.ics,
        energy: e,
    })
}

/// One vote: the produced answer plus the ICS of the trace behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteSample {
    pub answer: Vec<usize>,
    pub ics: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult {
    pub winner: Vec<usize>,
    pub tally: BTreeMap<Vec<usize>, usize>,
    /// Indices into the input sample list that the ICS floor discarded.
    pub filtered_out: Vec<usize>,
}

/// Majority vote over samples whose ICS clears the floor. Count ties break
/// toward the answer with the highest summed ICS, then toward the
/// lexicographically smallest answer. If the floor removes everything, the
/// vote falls back to all samples unfiltered.
pub fn ir_guided_vote(samples: &[VoteSample], ics_floor: f64) -> CoreResult<VoteResult> {
    if samples.is_empty() {
        return Err(CoreError::InvalidArgument(
            "ir_guided_vote: no samples".into(),
        ));
    }
    let keep: Vec<usize> = (0..samples.len())
        .filter(|&i| !(samples[i].ics < ics_floor))
        .collect();
    let (survivors, filtered_out): (Vec<usize>, Vec<usize>) = if keep.is_empty() {
        ((0..samples.len()).collect(), Vec::new())
    } else {
        let dropped = (0..samples.len()).filter(|i| !keep.contains(i)).collect();
        (keep, dropped)
    };

    let mut tally: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut ics_sum: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for &i in &survivors {
        *tally.entry(samples[i].answer.clone()).or_insert(0) += 1;
        *ics_sum.entry(samples[i].answer.clone()).or_insert(0.0) += samples[i].ics;
    }

    let winner = tally
        .iter()
        .map(|(ans, &count)| (ans, count, ics_sum[ans]))
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then(a.2.total_cmp(&b.2))
                // smaller answers must win full ties, so compare reversed
                .then_with(|| b.0.cmp(a.0))
        })
        .map(|(ans, _, _)| ans.clone())
        .expect("survivors non-empty");

    Ok(VoteResult {
        winner,
        tally,
        filtered_out,
    })
}
