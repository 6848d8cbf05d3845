//! Data-segment channel prediction from a beam-domain estimate.

use crate::error::check_len;
use crate::fast_ops::{OperatorMode, TbOperator};
use crate::{Error, Result, C64};

/// Predicted space-frequency channels of the current (last) slot:
/// `per_ut[u][s]` has length `antennas * valid_subcarriers`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedChannel {
    pub per_ut: Vec<Vec<Vec<C64>>>,
}

/// Full-frame channel of every terminal from stacked beam-domain estimates.
pub fn predict_frame(op_full: &TbOperator, h_tb_hat: &[C64]) -> Result<Vec<Vec<C64>>> {
    if op_full.mode() != OperatorMode::FullFrame {
        return Err(Error::Config("prediction needs a full-frame operator".into()));
    }
    let tb = op_full.grid().tb_len();
    if h_tb_hat.is_empty() || h_tb_hat.len() % tb != 0 {
        return Err(Error::DimensionMismatch { what: "stacked beam-domain estimate", expected: tb, got: h_tb_hat.len() });
    }
    h_tb_hat.chunks(tb).map(|blk| op_full.forward_apply(blk)).collect()
}

/// Channel of the last slot at every symbol index.
pub fn predict(op_full: &TbOperator, h_tb_hat: &[C64]) -> Result<PredictedChannel> {
    let g = op_full.grid();
    let rows = g.symbol_rows();
    let first = (g.slots - 1) * g.symbols_per_slot;
    let per_ut = predict_frame(op_full, h_tb_hat)?
        .into_iter()
        .map(|frame| {
            check_len("frame", g.frame_rows(), frame.len())?;
            Ok((0..g.symbols_per_slot).map(|s| frame[(first + s) * rows..][..rows].to_vec()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictedChannel { per_ut })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, FineFactors, GridParams};
    use crate::scenario::{synth_sft_channel, tb_ground_truth, Path};

    #[test]
    fn static_and_on_grid() {
        let g = build_grid(&GridParams {
            antennas: 4,
            subcarriers: 16,
            cp_len: 4,
            valid_subcarriers: 8,
            slots: 2,
            symbols_per_slot: 3,
            pilot_symbol: 1,
            doppler_base: 2,
            fine: FineFactors::uniform(2),
            ..GridParams::reference()
        })
        .unwrap();
        let op = TbOperator::full_frame(&g).unwrap();
        let pts = g.grid_points();
        let paths = [
            Path { beta: 0.8, phi0: 0.4, omega: pts.angle[3], tau: pts.delay[1], nu: pts.doppler[2] },
            Path { beta: 0.5, phi0: 2.0, omega: pts.angle[6], tau: pts.delay[2], nu: pts.doppler[0] },
        ];
        let h = tb_ground_truth(&g, &paths).unwrap();
        let frame = &predict_frame(&op, &h).unwrap()[0];
        let truth = synth_sft_channel(&g, &paths).unwrap();
        for (a, b) in frame.iter().zip(&truth) {
            assert!((a - b).norm() < 1e-10);
        }
        // zero Doppler: every symbol of the slot identical
        let still = [Path { nu: 0.0, ..paths[0] }];
        let p = predict(&op, &tb_ground_truth(&g, &still).unwrap()).unwrap();
        for s in 1..g.symbols_per_slot {
            for (a, b) in p.per_ut[0][s].iter().zip(&p.per_ut[0][0]) {
                assert!((a - b).norm() < 1e-10);
            }
        }
        assert!(predict(&TbOperator::pilot_rows(&g).unwrap(), &h).is_err());
    }
}
