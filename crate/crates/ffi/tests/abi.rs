use std::ffi::CStr;
use std::ptr;

use amlab_ffi::*;

fn last_error() -> String {
    let p = amlab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn quadratic(dim: usize) -> *mut AmlabModel {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { amlab_model_quadratic(dim, &mut model) }, AmlabStatus::Ok);
    model
}

fn cube_field(count: usize, f: impl Fn(f64, f64) -> f64) -> *mut AmlabField {
    let h = 2.0 / (count - 1) as f64;
    let mut values = Vec::with_capacity(count * count);
    for i in 0..count {
        for j in 0..count {
            values.push(f(-1.0 + i as f64 * h, -1.0 + j as f64 * h));
        }
    }
    let mut field = ptr::null_mut();
    let status = unsafe { amlab_field_new(2, 1.0, count, values.as_ptr(), values.len(), &mut field) };
    assert_eq!(status, AmlabStatus::Ok);
    field
}

#[test]
fn model_value_and_cone() {
    let model = quadratic(2);
    unsafe {
        assert_eq!(amlab_model_dim(model), 2);
        let mut v = 0.0;
        assert_eq!(amlab_model_value(model, [3.0, 4.0].as_ptr(), 2, &mut v), AmlabStatus::Ok);
        assert!((v - 12.5).abs() < 1e-14);
        assert_eq!(amlab_model_cone(model, 2.0, [3.0, 4.0].as_ptr(), 2, &mut v), AmlabStatus::Ok);
        assert!((v - 10.0).abs() < 1e-10, "{v}");
        amlab_model_free(model);
    }
}

#[test]
fn anisotropic_and_power_models() {
    let mut model = ptr::null_mut();
    let a = [2.0, 0.0, 0.0, 0.5];
    unsafe {
        assert_eq!(amlab_model_anisotropic(2, a.as_ptr(), &mut model), AmlabStatus::Ok);
        let mut v = 0.0;
        amlab_model_value(model, [1.0, 2.0].as_ptr(), 2, &mut v);
        assert!((v - 2.0).abs() < 1e-14);
        amlab_model_free(model);

        let bad = [1.0, 0.0, 0.0, -1.0];
        assert_eq!(amlab_model_anisotropic(2, bad.as_ptr(), &mut model), AmlabStatus::Config);
        assert!(!last_error().is_empty());

        assert_eq!(amlab_model_separable_power(2, 4.0, 1.5, &mut model), AmlabStatus::Ok);
        amlab_model_value(model, [1.0, 1.0].as_ptr(), 2, &mut v);
        assert!((v - 1.5).abs() < 1e-14, "{v}");
        amlab_model_free(model);
    }
}

#[test]
fn errors_are_reported() {
    let model = quadratic(2);
    unsafe {
        let mut v = 0.0;
        assert_eq!(amlab_model_value(model, [1.0].as_ptr(), 1, &mut v), AmlabStatus::Input);
        assert!(last_error().contains("expected 2"));
        assert_eq!(
            amlab_model_value(ptr::null(), [1.0, 0.0].as_ptr(), 2, &mut v),
            AmlabStatus::NullPointer
        );
        assert!(last_error().contains("model"));
        assert_eq!(
            amlab_model_value(model, [1.0, 0.0].as_ptr(), 2, ptr::null_mut()),
            AmlabStatus::NullPointer
        );
        let mut field = ptr::null_mut();
        assert_eq!(amlab_field_new(2, 1.0, 5, [0.0; 3].as_ptr(), 3, &mut field), AmlabStatus::Input);
        assert!(field.is_null());
        amlab_model_free(model);
        amlab_model_free(ptr::null_mut());
        amlab_field_free(ptr::null_mut());
    }
}

#[test]
fn solve_reproduces_affine_data() {
    let model = quadratic(2);
    let boundary = cube_field(17, |x, y| 0.3 * x - 0.6 * y + 0.1);
    unsafe {
        let mut solved = ptr::null_mut();
        let mut iterations = 0;
        let status = amlab_solve(model, boundary, 0.1, &mut solved, &mut iterations);
        assert_eq!(status, AmlabStatus::Ok, "{}", last_error());
        let len = amlab_field_len(solved);
        assert_eq!(len, 17 * 17);
        let mut values = vec![0.0; len];
        assert_eq!(amlab_field_values(solved, values.as_mut_ptr(), len), AmlabStatus::Ok);
        let mut expected = vec![0.0; len];
        amlab_field_values(boundary, expected.as_mut_ptr(), len);
        for (a, b) in values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-8);
        }
        let mut v = 0.0;
        assert_eq!(amlab_field_interpolate(solved, [0.25, 0.5].as_ptr(), 2, &mut v), AmlabStatus::Ok);
        assert!((v - (0.075 - 0.3 + 0.1)).abs() < 1e-8);
        assert_eq!(amlab_field_values(solved, values.as_mut_ptr(), len - 1), AmlabStatus::Input);
        assert_eq!(amlab_solve(model, boundary, 0.0, &mut solved, ptr::null_mut()), AmlabStatus::Config);
        amlab_field_free(solved);
        amlab_field_free(boundary);
        amlab_model_free(model);
    }
}

#[test]
fn control_distance_matches_cone() {
    let model = quadratic(2);
    let layout = cube_field(21, |_, _| 0.0);
    unsafe {
        let mut barrier = ptr::null_mut();
        let status = amlab_control_distance(model, layout, 2.0, 0.0, [0.0, 0.0].as_ptr(), 2, &mut barrier);
        assert_eq!(status, AmlabStatus::Ok, "{}", last_error());
        let mut v = 0.0;
        amlab_field_interpolate(barrier, [1.0, 0.0].as_ptr(), 2, &mut v);
        assert!((v - 2.0).abs() < 0.05 * 2.0, "{v}");
        let status = amlab_control_distance(model, layout, 2.0, 0.0, [0.03, 0.0].as_ptr(), 2, &mut barrier);
        assert_eq!(status, AmlabStatus::Input);
        amlab_field_free(barrier);
        amlab_field_free(layout);
        amlab_model_free(model);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/amlab.h");
    for name in [
        "amlab_last_error",
        "amlab_model_quadratic",
        "amlab_model_anisotropic",
        "amlab_model_separable_power",
        "amlab_model_free",
        "amlab_model_dim",
        "amlab_model_value",
        "amlab_model_cone",
        "amlab_field_new",
        "amlab_field_free",
        "amlab_field_len",
        "amlab_field_values",
        "amlab_field_interpolate",
        "amlab_solve",
        "amlab_control_distance",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name}");
    }
    assert!(header.contains("typedef struct AmlabModel AmlabModel;"));
}
