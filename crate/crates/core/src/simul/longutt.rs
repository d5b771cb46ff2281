//! Long-utterance construction: consecutive utterances of the same talk are
//! joined in their original order until each result reaches a minimum length.

use crate::domain::{FeatureSequence, TargetSequence};
use crate::error::{Error, Result};

use super::synth::{SyntheticUtterance, UtterancePart};

fn join(group: &[&SyntheticUtterance]) -> Result<SyntheticUtterance> {
    let first = group[0];
    if group.len() == 1 {
        return Ok(first.clone());
    }
    let dim = first.features.dim();
    let vocab = first.target.vocab_size();
    let mut data = Vec::new();
    let mut tokens = Vec::new();
    let mut boundaries = Vec::new();
    let mut parts = Vec::new();
    for u in group {
        if u.features.dim() != dim || u.target.vocab_size() != vocab {
            return Err(Error::InvalidConfig(format!("{} does not match {}", u.id, first.id)));
        }
        let frame_offset = data.len() / dim;
        let token_offset = tokens.len();
        for p in &u.parts {
            parts.push(UtterancePart {
                frame_offset: p.frame_offset + frame_offset,
                token_offset: p.token_offset + token_offset,
                ..p.clone()
            });
        }
        data.extend_from_slice(u.features.as_slice());
        tokens.extend_from_slice(u.target.tokens());
        boundaries.extend(u.true_boundaries.iter().map(|b| b + frame_offset));
    }
    let mut out = SyntheticUtterance::new(
        format!("{}+{}", first.id, group.len() - 1),
        first.talk_id,
        FeatureSequence::new(data, dim, first.features.frame_ms())?,
        TargetSequence::new(tokens, vocab)?,
        boundaries,
    )?;
    out.parts = parts;
    Ok(out)
}

/// Greedily concatenates utterances of each talk, in original order, until
/// every result lasts at least `min_seconds`; a shorter trailing remainder is
/// still emitted. Talks keep the order of their first appearance.
/// `min_seconds <= 0` returns the input unchanged.
pub fn concat_long_utterances(utts: &[SyntheticUtterance], min_seconds: f64) -> Result<Vec<SyntheticUtterance>> {
    if !(min_seconds > 0.0) {
        return Ok(utts.to_vec());
    }
    let mut talks: Vec<usize> = Vec::new();
    for u in utts {
        if !talks.contains(&u.talk_id) {
            talks.push(u.talk_id);
        }
    }
    let mut out = Vec::new();
    for talk in talks {
        let mut group: Vec<&SyntheticUtterance> = Vec::new();
        let mut seconds = 0.0;
        for u in utts.iter().filter(|u| u.talk_id == talk) {
            group.push(u);
            seconds += u.duration_s();
            if seconds >= min_seconds - 1e-9 {
                out.push(join(&group)?);
                group.clear();
                seconds = 0.0;
            }
        }
        if !group.is_empty() {
            out.push(join(&group)?);
        }
    }
    Ok(out)
}

/// Recovers the original utterances from a concatenation via its recorded parts.
pub fn split_concatenated(utt: &SyntheticUtterance) -> Result<Vec<SyntheticUtterance>> {
    let dim = utt.features.dim();
    utt.parts
        .iter()
        .map(|p| {
            let data = utt.features.as_slice()[p.frame_offset * dim..(p.frame_offset + p.frames) * dim].to_vec();
            let tokens = utt.target.tokens()[p.token_offset..p.token_offset + p.tokens].to_vec();
            let boundaries = utt.true_boundaries[p.token_offset..p.token_offset + p.tokens]
                .iter()
                .map(|b| b - p.frame_offset)
                .collect();
            SyntheticUtterance::new(
                p.id.clone(),
                utt.talk_id,
                FeatureSequence::new(data, dim, utt.features.frame_ms())?,
                TargetSequence::new(tokens, utt.target.vocab_size())?,
                boundaries,
            )
        })
        .collect()
}
