use mixrate_web::{classify_json, phase_svg_string, renewal_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn classify_regimes() {
    let v = parse(&classify_json(1.0, 0.5, f64::INFINITY).unwrap());
    assert_eq!(v["regime"], "dependence_dominated");
    assert_eq!(v["exponent"], "1/6");
    assert!((v["exponent_value"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-15);
    let v = parse(&classify_json(1.0, 2.0, f64::INFINITY).unwrap());
    assert_eq!(v["regime"], "donsker_bounded");
    assert_eq!(v["exponent"], "0");
    let v = parse(&classify_json(2.0, 1.0, f64::INFINITY).unwrap());
    assert_eq!(v["regime"], "boundary");
    assert!(v["exponent"].is_null());
    let v = parse(&classify_json(4.0, 3.0, 4.0).unwrap());
    assert_eq!(v["regime"], "iid_like");
    assert_eq!(v["exponent"], "1/4");
}

#[test]
fn classify_rejects_bad_input() {
    assert!(classify_json(-1.0, 1.0, f64::INFINITY).is_err());
    assert!(classify_json(1.0, 0.0, f64::INFINITY).is_err());
    assert!(classify_json(1.0, 1.0, 1.0).is_err());
    assert!(classify_json(f64::NAN, 1.0, f64::INFINITY).is_err());
}

#[test]
fn phase_svg_ranges() {
    let svg = phase_svg_string(f64::INFINITY, 20, 5.0).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    assert!(phase_svg_string(f64::INFINITY, 1, 5.0).is_err());
    assert!(phase_svg_string(f64::INFINITY, 201, 5.0).is_err());
    assert!(phase_svg_string(f64::INFINITY, 10, 0.1).is_err());
    assert!(phase_svg_string(f64::INFINITY, 10, 51.0).is_err());
    assert!(phase_svg_string(1.5, 10, 5.0).is_err());
    assert!(phase_svg_string(4.0, 10, 5.0).is_ok());
}

#[test]
fn renewal_sample_shape() {
    let v = parse(&renewal_json(0.5, 1000, 7).unwrap());
    assert_eq!(v["n"], 1000);
    assert_eq!(v["path"].as_array().unwrap().len(), 400);
    let ks = v["ks"].as_f64().unwrap();
    assert!(ks > 0.0 && ks < 1000f64.sqrt());
    let short = parse(&renewal_json(0.5, 50, 7).unwrap());
    assert_eq!(short["path"].as_array().unwrap().len(), 50);
    assert_eq!(renewal_json(0.5, 1000, 7).unwrap(), renewal_json(0.5, 1000, 7).unwrap());
    assert_ne!(renewal_json(0.5, 1000, 7).unwrap(), renewal_json(0.5, 1000, 8).unwrap());
}

#[test]
fn renewal_rejects_bad_input() {
    assert!(renewal_json(0.5, 1, 0).is_err());
    assert!(renewal_json(0.5, (1 << 20) + 1, 0).is_err());
    assert!(renewal_json(0.0, 100, 0).is_err());
    assert!(renewal_json(-1.0, 100, 0).is_err());
}
