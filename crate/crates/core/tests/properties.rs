use proptest::prelude::*;

use confluence::adapt::err_c;
use confluence::config::{ConfluenceConfig, VelocityBc};
use confluence::material::{AlphaParams, RveKind};
use confluence::mesh::MorphSpec;
use confluence::metrics::iou;
use confluence::optimize::project_volume;

fn bounds_and_point() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-0.5f64..1.5, n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.01f64..1.0, n),
        )
            .prop_map(|(y, a, b, m)| {
                let lo: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a.min(*b)).collect();
                let hi: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a.max(*b)).collect();
                (y, lo, hi, m)
            })
    })
}

proptest! {
    #[test]
    fn projection_is_feasible((y, lo, hi, mass) in bounds_and_point(), slack in 0.0f64..1.0) {
        let floor: f64 = lo.iter().zip(&mass).map(|(l, m)| l * m).sum();
        let ceil: f64 = hi.iter().zip(&mass).map(|(h, m)| h * m).sum();
        let budget = floor + slack * (ceil - floor);
        let r = project_volume(&y, &lo, &hi, &mass, budget).unwrap();
        for ((v, l), h) in r.iter().zip(&lo).zip(&hi) {
            prop_assert!(*l <= *v && *v <= *h);
        }
        let vol: f64 = r.iter().zip(&mass).map(|(v, m)| v * m).sum();
        prop_assert!(vol <= budget + 1e-8);
        // with slack the projection is the box clip
        let clip: Vec<f64> = y.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect();
        let clip_vol: f64 = clip.iter().zip(&mass).map(|(v, m)| v * m).sum();
        if clip_vol <= budget {
            prop_assert_eq!(r, clip);
        } else {
            prop_assert!((vol - budget).abs() <= 1e-8);
        }
    }

    #[test]
    fn projection_is_idempotent((y, lo, hi, mass) in bounds_and_point(), slack in 0.0f64..1.0) {
        let floor: f64 = lo.iter().zip(&mass).map(|(l, m)| l * m).sum();
        let ceil: f64 = hi.iter().zip(&mass).map(|(h, m)| h * m).sum();
        let budget = floor + slack * (ceil - floor) + 1e-9;
        let once = project_volume(&y, &lo, &hi, &mass, budget).unwrap();
        let twice = project_volume(&once, &lo, &hi, &mass, budget).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn alpha_is_bounded_and_decreasing(
        amax in 1e2f64..1e7,
        amin in 1e-6f64..1e-1,
        phi in 0.05f64..5.0,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let p = AlphaParams { alpha_max: amax, alpha_min: amin, phi };
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(p.alpha(lo) >= p.alpha(hi));
        prop_assert!(p.alpha(lo) <= amax && p.alpha(hi) >= amin);
        prop_assert!(p.dalpha(a) < 0.0);
    }

    #[test]
    fn err_c_is_a_relative_change(a in 1usize..100_000, b in 0usize..100_000) {
        let e = err_c(a, b);
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e, (b as f64 - a as f64).abs() / a as f64);
        prop_assert_eq!(err_c(a, a), 0.0);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in prop::collection::vec(any::<bool>(), 1..200), seed in any::<u64>()) {
        let b: Vec<bool> = a.iter().enumerate().map(|(i, v)| v ^ ((seed >> (i % 64)) & 1 == 1)).collect();
        let x = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x, iou(&b, &a));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn config_round_trips(
        h0 in 0.01f64..0.2,
        delta in 0.05f64..0.9,
        s in -0.2f64..0.2,
        amax in 1e3f64..1e7,
        kmax in 1usize..80,
        density in any::<bool>(),
        vel in 0usize..3,
    ) {
        let mut cfg = ConfluenceConfig::pair(RveKind::A, RveKind::Bar);
        cfg.mesh.h0 = h0;
        cfg.morph.delta = delta;
        cfg.morph.s = s;
        cfg.physics.alpha_max = amax;
        cfg.tolerances.kmax = kmax;
        cfg.matching.enforce_density_bc = density;
        cfg.matching.enforce_velocity_bc = [VelocityBc::Full, VelocityBc::XOnly, VelocityBc::None][vel];
        let text = cfg.to_toml_string().unwrap();
        let back = ConfluenceConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn nonpositive_width_is_rejected(delta in -1.0f64..=0.0) {
        let spec = MorphSpec { delta, ..MorphSpec::default() };
        let err = spec.validate().unwrap_err().to_string();
        prop_assert!(err.contains("MorphSpec"));
    }

    #[test]
    fn strip_sides_bound_the_strip(delta in 0.05f64..0.9, s in -0.05f64..0.05, theta in 0.6f64..2.5) {
        let spec = MorphSpec { delta, s, theta, ..MorphSpec::default() };
        spec.validate().unwrap();
        let (gl, gr) = (spec.gamma_l(), spec.gamma_r());
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            prop_assert!(spec.contains(gl.at(gl.length() * t), 1e-9));
            prop_assert!(spec.contains(gr.at(gr.length() * t), 1e-9));
        }
        let e = spec.interface();
        prop_assert!(e.signed_distance(gl.at(0.0)) < e.signed_distance(gr.at(0.0)));
    }
}
