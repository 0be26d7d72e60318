//! How filters route the pair through the splitter, what coincidence rates
//! that gives for each setting, and one simulated count table.

use polartomo::io::counts_to_csv;
use polartomo::simlab::{expected_coincidence_rate, parse_filters, route_probabilities, simulate_counts};
use polartomo::{Protocol, SourceSpec};

fn main() -> polartomo::Result<()> {
    for (name, spec) in [("QOM-A", SourceSpec::qom_a()), ("QOM-B", SourceSpec::qom_b())] {
        println!("{name} routing:");
        for filters in ["", "LP1250,LP1400", "LP1550@arm1", "BP1475/50@arm2"] {
            let f = if filters.is_empty() { vec![] } else { parse_filters(filters)? };
            let r = route_probabilities(&spec, &f);
            println!(
                "  {:<16} signal->1 idler->2 {:.3}   idler->1 signal->2 {:.3}   coincident {:.3}",
                if filters.is_empty() { "(no filters)" } else { filters },
                r.signal1_idler2,
                r.idler1_signal2,
                r.coincident()
            );
        }
    }

    let spec = SourceSpec::qom_a();
    let filters = parse_filters("LP1550@arm1")?;
    println!("\nexpected coincidence rates with LP1550@arm1:");
    for s in Protocol::Two.settings() {
        println!("  {:<4} {:>8.3} Hz", s.label, expected_coincidence_rate(&spec, &s, &filters)?);
    }

    let records = simulate_counts(&spec, &Protocol::Two.settings(), &filters, 10.0, 1)?;
    println!("\nsimulated table, 10 s per setting, seed 1:");
    print!("{}", counts_to_csv(&records)?);
    Ok(())
}
