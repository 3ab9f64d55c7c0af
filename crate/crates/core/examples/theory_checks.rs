//! The lemma verification suite as a table.

use mimpac::harness::run_checks;

fn main() -> mimpac::Result<()> {
    let rows = run_checks(1)?;
    for r in &rows {
        println!(
            "{:<6} {:<18} {:<28} value={:<12.4e} ref={:<12.4e} {}",
            if r.passed { "ok" } else { "FAIL" },
            r.check,
            r.case,
            r.value,
            r.reference,
            r.note
        );
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    println!("{} rows, {failed} failed", rows.len());
    Ok(())
}
