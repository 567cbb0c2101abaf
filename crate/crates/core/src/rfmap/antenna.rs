use super::SectorAntenna;

/// Two-plane sector pattern gain in dB.
///
/// `az_offset_deg` is the bearing relative to boresight, `el_offset_deg` the
/// depression angle of the receiver below the horizon. The horizontal and
/// vertical cuts are parabolic in dB, clamped at the front-to-back ratio and the
/// vertical side-lobe limit, and the combined attenuation is clamped at the
/// front-to-back ratio.
pub fn antenna_gain(antenna: &SectorAntenna, az_offset_deg: f64, el_offset_deg: f64, downtilt_deg: f64) -> f64 {
    let a_m = antenna.front_back_ratio_db;
    let phi = wrap_degrees(az_offset_deg);
    let h_att = (12.0 * (phi / antenna.h_beamwidth_deg).powi(2)).min(a_m);
    let v_att = (12.0 * ((el_offset_deg - downtilt_deg) / antenna.v_beamwidth_deg).powi(2)).min(antenna.sla_v_db);
    antenna.max_gain_dbi - (h_att + v_att).min(a_m)
}

/// Maps an angle to (-180, 180].
pub(crate) fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}
