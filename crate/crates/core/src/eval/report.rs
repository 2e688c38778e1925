use std::io::Write;

use super::episode::InteractionLog;
use crate::error::Result;

/// Appends one row per slot:
/// `experiment,policy,user,round,slot,item,theta,reward`.
pub fn write_log_csv<W: Write>(
    out: &mut csv::Writer<W>,
    experiment: &str,
    policy: &str,
    log: &InteractionLog,
) -> Result<()> {
    for u in &log.users {
        for (t, r) in u.rounds.iter().enumerate() {
            for (slot, ((&item, &theta), &reward)) in r.slate.iter().zip(&r.theta).zip(&r.reward).enumerate() {
                out.write_record(&[
                    experiment.to_string(),
                    policy.to_string(),
                    u.user.to_string(),
                    (t + 1).to_string(),
                    (slot + 1).to_string(),
                    item.to_string(),
                    theta.to_string(),
                    reward.to_string(),
                ])?;
            }
        }
    }
    Ok(())
}

pub const LOG_CSV_HEADER: [&str; 8] = [
    "experiment",
    "policy",
    "user",
    "round",
    "slot",
    "item",
    "theta",
    "reward",
];
