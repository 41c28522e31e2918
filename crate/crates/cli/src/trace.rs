//! Per-tick CSV trace: header
//! `n,pi,theta,step_norm,kkt_residual,activated_players,activated_couplings`,
//! reals with 17 significant digits, `theta` empty when no update happened, block
//! ids separated by `;`, LF line endings.

use std::io::Write;

use nash_core::TickReport;

pub const HEADER: [&str; 7] = ["n", "pi", "theta", "step_norm", "kkt_residual", "activated_players", "activated_couplings"];

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn ids(ids: impl Iterator<Item = usize>) -> String {
    ids.map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_trace<W: Write>(out: W, reports: &[TickReport<f64>]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in reports {
        w.write_record([
            r.n.to_string(),
            real(r.pi),
            r.theta.map(real).unwrap_or_default(),
            real(r.step_norm),
            real(r.kkt_residual),
            ids(r.activated.players.iter().map(|a| a.block)),
            ids(r.activated.couplings.iter().map(|a| a.block)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nash_core::scheduler::TickPlan;

    #[test]
    fn rows_follow_the_schema() {
        let reports = vec![
            TickReport { n: 0, pi: -2.0, theta: Some(-0.5), step_norm: 1.0, kkt_residual: 0.1, activated: TickPlan::full(0, 2, 1) },
            TickReport { n: 1, pi: 0.0, theta: None, step_norm: 0.0, kkt_residual: 1.0 / 3.0, activated: TickPlan::full(1, 1, 0) },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expected = "n,pi,theta,step_norm,kkt_residual,activated_players,activated_couplings\n\
            0,-2.0000000000000000e0,-5.0000000000000000e-1,1.0000000000000000e0,1.0000000000000001e-1,0;1,0\n\
            1,0.0000000000000000e0,,0.0000000000000000e0,3.3333333333333331e-1,0,\n";
        assert_eq!(text, expected);
    }
}
