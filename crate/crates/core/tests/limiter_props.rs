use afc_core::fem::assemble_convection;
use afc_core::problems::{builtin_flux, FLUX_NAMES};
use afc_core::stabilization::{
    afc_correction, antidiffusive_fluxes, artificial_diffusion, correction_factors, dh_form, dhat_form,
};
use afc_core::Mesh;
use proptest::prelude::*;

fn setup(m: usize, flux_idx: usize, raw: &[f64]) -> (Mesh, Vec<f64>, usize) {
    let mesh = Mesh::uniform(m).unwrap();
    let alpha: Vec<f64> = (0..mesh.num_nodes())
        .map(|i| {
            if mesh.is_boundary[i] {
                0.0
            } else {
                raw[i % raw.len()] * (1.0 + i as f64 * 0.01)
            }
        })
        .collect();
    (mesh, alpha, flux_idx % FLUX_NAMES.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn local_bounds_and_factor_range(
        m in 3usize..7,
        flux_idx in 0usize..16,
        t in 0.0f64..1.0,
        raw in prop::collection::vec(-10.0f64..10.0, 5..40),
    ) {
        let (mesh, alpha, fi) = setup(m, flux_idx, &raw);
        let flux = builtin_flux(FLUX_NAMES[fi]).unwrap();
        let psi = (flux.exponent == 1).then_some(&alpha[..]);
        let d = artificial_diffusion(&assemble_convection(&mesh, &flux, psi, t).unwrap()).unwrap();
        let r = antidiffusive_fluxes(&d, &alpha);
        let lf = correction_factors(&mesh, &d, &r, &alpha, None);
        let rbar = afc_correction(&lf, &r);
        for &i in &mesh.interior_ids {
            prop_assert!(rbar[i] <= lf.q_plus[i] + 1e-12);
            prop_assert!(rbar[i] >= lf.q_minus[i] - 1e-12);
            prop_assert!(lf.q_plus[i] >= 0.0 && lf.q_minus[i] <= 0.0);
        }
        for v in &lf.factors.values {
            prop_assert!((0.0..=1.0).contains(v));
        }
        // Limited diffusion sits between zero and the full diffusion.
        let full = dh_form(&d, &alpha, &alpha);
        let kept = dhat_form(&d, &lf, &alpha, &alpha);
        prop_assert!(kept >= -1e-12 && kept <= full + 1e-12 * full.max(1.0));
    }

    #[test]
    fn sum_of_raw_fluxes_cancels_diffusion(
        m in 2usize..6,
        flux_idx in 0usize..16,
        raw in prop::collection::vec(-1.0f64..1.0, 3..30),
    ) {
        let (mesh, alpha, fi) = setup(m, flux_idx, &raw);
        let flux = builtin_flux(FLUX_NAMES[fi]).unwrap();
        let psi = (flux.exponent == 1).then_some(&alpha[..]);
        let d = artificial_diffusion(&assemble_convection(&mesh, &flux, psi, 0.3).unwrap()).unwrap();
        let r = antidiffusive_fluxes(&d, &alpha);
        let da = d.matrix.mul_vec(&alpha);
        let sums = r.matrix.row_sums();
        for i in 0..mesh.num_nodes() {
            prop_assert!((sums[i] + da[i]).abs() < 1e-13);
        }
    }
}
