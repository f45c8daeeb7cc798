use std::io::{self, Write};

use crate::scalar::Real;

use super::PathSolution;

/// Writes one CSV row per state `k = -m..=N`: `k,t,x0,…,x{d-1},truncation_flag`.
///
/// The flag refers to the step leaving node `k`; it is 0 on the initial
/// segment and at the final node.
pub fn write_trace<T: Real, W: Write>(solution: &PathSolution<T>, mut out: W) -> io::Result<()> {
    let d = solution.dim();
    let mut header = String::from("k,t");
    for i in 0..d {
        header.push_str(&format!(",x{i}"));
    }
    writeln!(out, "{header},truncation_flag")?;

    let m = solution.mesh().steps_per_delay() as i64;
    let n = solution.mesh().total_steps() as i64;
    let flags = solution.truncation_flags();
    for k in -m..=n {
        write!(out, "{k},{}", solution.mesh().node_time(k))?;
        for v in solution.state(k) {
            write!(out, ",{v}")?;
        }
        let flag = k >= 0 && k < n && flags[k as usize];
        writeln!(out, ",{}", u8::from(flag))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example2;
    use crate::paths::{BrownianGrid, MeshSpec};
    use crate::scheme::simulate_with_level;

    #[test]
    fn trace_layout() {
        let p = example2::<f64>().with_constant_initial(&[2.0]).unwrap();
        let g = BrownianGrid::generate(1, 0, MeshSpec::new(1.0, 4, 1.0).unwrap(), 1).unwrap();
        let s = simulate_with_level(&p, 1.5, g.increments()).unwrap();
        let mut buf = Vec::new();
        write_trace(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,t,x0,truncation_flag");
        assert_eq!(lines.len(), 1 + 9);
        assert_eq!(lines[1], "-4,-1,2,0");
        assert!(lines[5].starts_with("0,0,2,1"));
        assert!(lines[9].ends_with(",0"));
    }
}
