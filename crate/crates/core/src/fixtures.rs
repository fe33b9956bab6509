//! Bundled scenarios used by the tests, the acceptance suite and as
//! examples for the command-line tool.

use crate::script::Scenario;
use crate::{Emulator, Result};

pub const DNS: &str = include_str!("../scenarios/dns.emu");
pub const MORRIS: &str = include_str!("../scenarios/morris.emu");
pub const SCALING: &str = include_str!("../scenarios/scaling.emu");
pub const TRANSIT: &str = include_str!("../scenarios/transit.emu");
pub const PROVIDER: &str = include_str!("../scenarios/provider.emu");
pub const HIJACK: &str = include_str!("../scenarios/hijack.emu");
pub const MIXED: &str = include_str!("../scenarios/mixed.emu");

/// Every bundled scenario by file stem.
pub const ALL: &[(&str, &str)] = &[
    ("dns", DNS),
    ("morris", MORRIS),
    ("scaling", SCALING),
    ("transit", TRANSIT),
    ("provider", PROVIDER),
    ("hijack", HIJACK),
    ("mixed", MIXED),
];

pub fn emulator(text: &str) -> Result<Emulator> {
    Scenario::parse(text)?.into_emulator()
}

/// One AS with `n` routers on a shared network and the routing layer on.
pub fn ibgp_mesh(n: usize) -> String {
    let mut s = String::from("network 2 net0\nrouting\n");
    if n > 0 {
        s.push_str(&format!("for i in 0..{} : router 2 r$i net0\n", n - 1));
    }
    s
}
