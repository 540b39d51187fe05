//! Bundled experiment files.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal, $summary:literal) => {
        Preset {
            name: $name,
            summary: $summary,
            text: include_str!(concat!("../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("fig2", "self-consistent photon number against bare cavity detuning, 4 atoms in 4 wells"),
    preset!("fig3", "self-consistent ground-state p_MI against g1d, kappa = 4, detuning -kappa/10"),
    preset!("fig4", "quantum against classical Mott/superfluid overlaps along g1d at equivalent depth 5.5"),
    preset!("fig5", "single atom starting in the right well, master equation, mean position"),
    preset!("fig6", "two interacting atoms in a purely quantum lattice, master equation"),
    preset!("fig7a", "cavity-pump master equation at V_cl = -10, U = 0"),
    preset!("fig7b", "cavity-pump master equation at V_cl = -10, U = 0.0065"),
    preset!("fig7c", "cavity-pump master equation at V_cl = -10, U = 0.0324"),
    preset!("fig7d", "cavity-pump master equation at V_cl = -10, U = 0.081"),
    preset!("fig8", "quantum and classical p_MI = p_SF crossings along kappa at fixed equivalent depth"),
    preset!("fig9", "atom-pump quantum trajectories from the Mott state, 500 trajectories"),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    let name = name.strip_suffix(".toml").unwrap_or(name);
    PRESETS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            let cfg = crate::config::parse(p.text, p.name).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(cfg.sweep.is_some(), ["fig2", "fig3", "fig4", "fig8"].contains(&p.name));
        }
        assert!(find("fig7a.toml").is_some());
    }
}
