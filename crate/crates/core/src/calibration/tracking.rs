use crate::airlink::ReceptionReport;
use crate::calibration::StepAction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfTrackState {
    /// No correction while `|IF offset|` is at or below this.
    pub deadband_hz: f64,
}

impl RfTrackState {
    pub fn new(deadband_hz: f64, rf_delta_f_hz: f64) -> Result<Self> {
        if !(deadband_hz >= 0.0 && deadband_hz < rf_delta_f_hz) {
            return Err(Error::Config(format!(
                "deadband {deadband_hz} Hz must lie in [0, {rf_delta_f_hz}) Hz"
            )));
        }
        Ok(Self { deadband_hz })
    }
}

/// One RF step per received beacon, in the direction that cancels the IF
/// offset. A positive offset means the LO sits below the carrier.
pub fn if_track(report: &ReceptionReport, track: &RfTrackState) -> Result<StepAction> {
    let offset = match (report.crc_ok, report.if_offset_hz) {
        (true, Some(offset)) => offset,
        _ => return Err(Error::Precondition("IF tracking needs a CRC-OK reception".into())),
    };
    Ok(if offset > track.deadband_hz {
        StepAction::Step(1)
    } else if offset < -track.deadband_hz {
        StepAction::Step(-1)
    } else {
        StepAction::Hold
    })
}
