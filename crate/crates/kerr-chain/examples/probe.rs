use kerr_chain::*;
use kerr_chain::wavepacket::*;
use kerr_chain::params::*;
use kerr_chain::kernels::*;
fn main() {
    let s0 = SiteParams::new(1.0, 0.0, 0.0).unwrap();
    for (hw, m) in [(4.0, 257), (6.0, 257), (8.0, 257), (6.0, 385), (8.0, 513), (4.0, 513)] {
        let g = FrequencyGrid::build(0.0, hw, m).unwrap();
        let p = PulseShape::gaussian(0.0, 0.2).unwrap();
        let jsa = make_separable_jsa(&p, &p, g, g).unwrap();
        let chain = ChainSpec::uniform(Propagation::Counter, s0, 1).unwrap();
        let k = KernelSpec::new(KernelVariant::VAtomLimit, chain).unwrap();
        let out = scatter_two_photon(&jsa, &k).unwrap();
        println!("vatom  hw={hw} M={m}: norm = {:.7}", out.norm());
    }
    for chi in [1.0, 5.0] {
        let s = SiteParams::new(1.0, 0.0, chi).unwrap();
        let g = FrequencyGrid::build(0.0, 4.0, 257).unwrap();
        let p = PulseShape::gaussian(0.0, 0.2).unwrap();
        let jsa = make_separable_jsa(&p, &p, g, g).unwrap();
        let chain = ChainSpec::uniform(Propagation::Counter, s, 1).unwrap();
        let k = KernelSpec::new(KernelVariant::SingleSite, chain).unwrap();
        let out = scatter_two_photon(&jsa, &k).unwrap();
        println!("single chi={chi} hw=4 M=257: norm = {:.7}", out.norm());
    }
}
