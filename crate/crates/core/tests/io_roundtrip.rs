use oldroyd_fsi::coupled::{initial_state, SimConfig};
use oldroyd_fsi::io::{decode_snapshot, encode_snapshot, read_snapshot, snapshot_state, state_snapshot, write_atomic, write_snapshot, Table};
use proptest::prelude::*;

#[test]
fn state_survives_snapshot_file() {
    let mut c = SimConfig::default();
    c.grid.nx = 16;
    c.grid.ny = 16;
    c.initial.eta0_amplitude = 0.03;
    c.initial.eta0_noise = 0.01;
    c.initial.rho0_amplitude = 0.4;
    c.initial.t0_anisotropy = 0.5;
    let s = initial_state(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.bin");
    write_snapshot(&p, &state_snapshot(&s)).unwrap();
    let back = snapshot_state(&read_snapshot(&p).unwrap()).unwrap();
    assert_eq!(back.structure, s.structure);
    assert_eq!(back.fluid, s.fluid);
    assert_eq!(back.solute.rho, s.solute.rho);
    assert_eq!(back.solute.t, s.solute.t);
    assert_eq!(back.time.to_bits(), s.time.to_bits());
}

#[test]
fn truncated_snapshot_rejected() {
    let c = SimConfig { grid: oldroyd_fsi::coupled::GridConfig { nx: 16, ny: 16, ny_s: None }, ..SimConfig::default() };
    let bytes = encode_snapshot(&state_snapshot(&initial_state(&c).unwrap())).unwrap();
    assert!(decode_snapshot(&bytes[..bytes.len() - 3]).is_err());
    assert!(decode_snapshot(b"garbage").is_err());
}

#[test]
fn atomic_write_replaces_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.txt");
    write_atomic(&p, b"first").unwrap();
    write_atomic(&p, b"second").unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), b"second");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

proptest! {
    #[test]
    fn csv_preserves_values(vals in proptest::collection::vec(-1e300..1e300f64, 1..40)) {
        let mut t = Table::new(&["a[m]", "b[s]"]);
        for pair in vals.chunks(2) {
            t.push(vec![pair[0], *pair.last().unwrap()]);
        }
        let back = Table::parse(&t.to_csv()).unwrap();
        prop_assert_eq!(back.rows, t.rows);
    }
}
