use helmddm::ddm::{DdmOptions, DdmSolver};
use helmddm::krylov::{fgmres_ddm, KrylovConfig};
use helmddm::medium::{MediumModel, SourceSpec};
use helmddm::oracle::direct_solve_global;
use helmddm::partition::{build_partition, GridSpec, Partition};
use helmddm::pml::PmlProfile;
use helmddm::{FieldGrid, Rect};
use proptest::prelude::*;

fn layered_problem() -> (Partition, MediumModel, PmlProfile) {
    let interior = Rect::new(0.0, 1.0, 0.0, 1.0);
    let part = build_partition(GridSpec { interior, h: 0.02, n_ramp: 10, n_overlap: 5, n1: 2, n2: 2 }).unwrap();
    let outer = interior.dilate(part.spec.ramp_width() + 0.04);
    let medium = MediumModel::equal_layers(40.0, &[2.0, 1.5, 1.0], interior, outer).unwrap();
    let profile = PmlProfile::from_c_sigma(25.0, medium.k_min(), part.spec.ramp_width(), part.spec.overlap_width());
    (part, medium, profile)
}

fn rel_gap(a: &FieldGrid, b: &FieldGrid) -> f64 {
    let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm_sqr()).sum();
    d.sqrt() / b.norm2()
}

#[test]
fn sweeps_krylov_and_direct_agree_on_layered_medium() {
    let (part, medium, profile) = layered_problem();
    let solver = DdmSolver::new(part.clone(), medium.clone(), profile, &DdmOptions::default()).unwrap();
    let f = SourceSpec::gaussian(0.3, 0.7).sample(solver.global_window(), part.lattice, medium.k_min());
    let direct = direct_solve_global(&part, &profile, &medium, &f).unwrap();

    let (u, st) = solver.solve_iterative(&f, 1e-10, 60, 1).unwrap();
    assert!(st.converged, "{:?}", st.final_relres);
    assert!(rel_gap(&u, &direct) < 1e-7);

    let cfg = KrylovConfig { tol: 1e-10, ..Default::default() };
    let (v, st) = fgmres_ddm(&solver, &f, 2, &cfg).unwrap();
    assert!(st.converged);
    assert!(rel_gap(&v, &direct) < 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_interior_node_lies_in_its_owner_core(n1 in 1usize..5, n2 in 1usize..5, c in 3usize..9, ramp in 1usize..5) {
        let h = 0.1;
        let interior = Rect::new(0.0, (n1 * c) as f64 * h, 0.0, (n2 * c) as f64 * h);
        let part = build_partition(GridSpec { interior, h, n_ramp: ramp, n_overlap: 1, n1, n2 }).unwrap();
        let w = part.interior_window();
        for k in 0..w.len() {
            let (p, q) = w.node(k);
            let (i, j) = part.owner(p, q);
            let sub = &part.subdomains[part.id(i, j)];
            prop_assert!(sub.core.contains(p, q));
            prop_assert!(sub.window.contains(p, q));
        }
    }
}
