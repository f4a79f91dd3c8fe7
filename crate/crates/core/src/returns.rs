//! Excess returns over the risk-free rate and the loss series derived from them.
//!
//! Tail fitting downstream always works on losses (`loss = -ar`): the
//! generalized Pareto model describes an upper tail above a positive
//! threshold, and downside risk is the lower tail of returns.

use std::ops::Range;

use chrono::NaiveDate;

use crate::ingest::{AlignedSeries, DatedSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessReturn {
    pub date: NaiveDate,
    pub ar: f64,
    pub loss: f64,
}

/// One excess return per consecutive pair of closes, dated at the later close.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessReturnSeries {
    entity_id: String,
    observations: Vec<ExcessReturn>,
}

impl ExcessReturnSeries {
    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    pub fn observations(&self) -> &[ExcessReturn] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.loss).collect()
    }

    pub fn losses_in(&self, span: Range<usize>) -> Vec<f64> {
        self.observations[span].iter().map(|o| o.loss).collect()
    }
}

impl DatedSeries for ExcessReturnSeries {
    fn entity_id(&self) -> &str {
        &self.entity_id
    }

    fn date_at(&self, index: usize) -> NaiveDate {
        self.observations[index].date
    }

    fn date_count(&self) -> usize {
        self.observations.len()
    }
}

/// `ar_t = (a_t - a_{t-1} - a_{t-1} * R_t) / a_{t-1}` for every consecutive
/// pair; the first close only seeds the recursion.
pub fn excess_returns(aligned: &AlignedSeries) -> ExcessReturnSeries {
    let observations = aligned
        .rows()
        .windows(2)
        .map(|w| {
            let (prev, cur) = (w[0].close, w[1].close);
            let ar = (cur - prev - prev * w[1].rate) / prev;
            ExcessReturn {
                date: w[1].date,
                ar,
                loss: -ar,
            }
        })
        .collect();
    ExcessReturnSeries {
        entity_id: aligned.entity_id().to_owned(),
        observations,
    }
}
