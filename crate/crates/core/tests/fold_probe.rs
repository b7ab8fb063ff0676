use dnf_rom::hbm::{frf, HbmConfig, RomSystem};
use dnf_rom::rom::{DampingVariant, Monomial, RomModel, RomVariant};
use nalgebra::DVector;

#[test]
#[ignore = "scratch"]
fn fold_probe() {
    let rom = RomModel {
        masters: vec![0],
        omegas: vec![1.0],
        linear_damping: vec![0.02],
        monomials: vec![Monomial { eq: 0, r_exp: vec![3], s_exp: vec![0], coeff: 0.15 }],
        variant: RomVariant::o2(DampingVariant::LinearOnly),
        forcing: None,
    };
    let sys = RomSystem::new(&rom, None);
    let forcing = DVector::from_vec(vec![0.02]);
    let mut cfg = HbmConfig::frf_defaults(0.7, 1.6, 2.0, 7);
    cfg.max_steps = 6000;
    let branch = frf(&sys, &forcing, &cfg).unwrap();
    println!("stop {:?}, points {}, folds {}", branch.stop, branch.points.len(), branch.fold_count());
    for (i, p) in branch.points.iter().enumerate() {
        if p.fold {
            println!("fold idx {i}: w={:.6} amp={:.6}", p.omega, p.amplitude);
        }
    }
    for p in branch.points.iter().step_by(40) {
        println!("w={:.4} amp={:.4}", p.omega, p.amplitude);
    }
}
