use pinnlab::pb::*;
fn main() {
    for (eps, zeta, variant, n) in [
        (1.0, 1.0, PbVariant::Half, 4001),
        (0.5, 1.0, PbVariant::Half, 4001),
        (0.2, 1.0, PbVariant::Half, 4001),
        (0.2, 2.0, PbVariant::Channel, 20001),
        (0.1, 2.0, PbVariant::Channel, 20001),
        (0.05, 2.0, PbVariant::Channel, 20001),
    ] {
        let p = solve_pb(eps, zeta, variant, n).unwrap();
        let mut worst = 0.0f64;
        for i in 0..4000 {
            let x = (i as f64 + 0.5) / 4000.0;
            let (v, _, dd) = p.phi_jet(x).unwrap();
            worst = worst.max((eps * eps * dd - 2.0 * v.sinh()).abs());
        }
        println!("eps={eps} zeta={zeta} {:?}: discrete={:.2e} interp-residual={:.2e}", variant, p.residual_inf_norm(), worst);
    }
}
