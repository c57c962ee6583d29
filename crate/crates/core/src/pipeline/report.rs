use std::fmt::Write as _;
use std::path::Path;

use super::tables::{read_events, read_fits, read_groups};
use super::{Manifest, DETECT_EVENTS, FIT_TABLE, STUDY_GROUPS};
use crate::detect::EventSign;
use crate::error::{Error, Result};

/// Fixed-width summary of a completed run. The manifest is verified first;
/// a corrupt or stale manifest is refused.
pub fn report(manifest_path: &Path) -> Result<String> {
    let manifest = Manifest::read(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    manifest.verify(root)?;
    if !manifest.contains(DETECT_EVENTS) {
        return Err(Error::Manifest(format!("{DETECT_EVENTS} is not listed")));
    }
    let events = read_events(&root.join(DETECT_EVENTS))?;
    let count = |s: EventSign| events.iter().filter(|e| e.sign == s).count();

    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "positive: {}, negative: {}", count(EventSign::Positive), count(EventSign::Negative)).unwrap();
    if events.is_empty() {
        writeln!(w, "no events; no groups or fits to report").unwrap();
        return Ok(out);
    }

    if manifest.contains(STUDY_GROUPS) {
        let groups = read_groups(&root.join(STUDY_GROUPS))?;
        writeln!(w).unwrap();
        writeln!(w, "{:<48} {:>6} {:>6} {:>14}", "group", "events", "t_max", "peak").unwrap();
        for g in &groups {
            let (t, v) = match g.peak {
                Some((t, v)) => (t.to_string(), format!("{v:.4}")),
                None => ("-".into(), "-".into()),
            };
            writeln!(w, "{:<48} {:>6} {:>6} {:>14}", g.group, g.n_events, t, v).unwrap();
        }
    }

    if manifest.contains(FIT_TABLE) {
        let fits = read_fits(&root.join(FIT_TABLE))?;
        writeln!(w).unwrap();
        writeln!(w, "{:<48} {:<18} {:>11}", "group", "exponent", "range").unwrap();
        for f in &fits {
            match &f.outcome {
                Ok(fit) => {
                    let range = format!("[{}, {}]", fit.used.lo, fit.used.hi);
                    let alpha = format!("α = {:.2} ± {:.2}", fit.alpha, fit.stderr);
                    writeln!(w, "{:<48} {:<18} {:>11}", f.group, alpha, range).unwrap();
                }
                Err(why) => writeln!(w, "{:<48} refused: {why}", f.group).unwrap(),
            }
        }
    }
    Ok(out)
}
