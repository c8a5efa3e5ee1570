use gfol_web::{classify_json, closed_form_curves_json, flow_vs_closed_form_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn flow_tracks_the_closed_form() {
    let v = parse(&flow_vs_closed_form_json("heisenberg:2,3", 2.0, -3.0).unwrap());
    assert!(v["max_gap"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["eigs"].as_array().unwrap().len(), 4);
    assert_eq!(v["converged"], true);
}

#[test]
fn flow_errors_are_messages() {
    assert!(flow_vs_closed_form_json("para_model:1,1", 1.0, -1.0).is_err());
    assert!(flow_vs_closed_form_json("nosuch", 1.0, -1.0).is_err());
    assert!(flow_vs_closed_form_json("heisenberg:1", 1.0, -1e6).is_err());
}

#[test]
fn classification_labels() {
    let v = parse(&classify_json("heisenberg:1", "").unwrap());
    assert_eq!(v["label"], "Sasakian (classical)");
    let v = parse(&classify_json("quat_heisenberg:1", "p_contact").unwrap());
    assert_eq!(v["kind"], "p_contact");
    assert_eq!(v["ric_perp"][0], 3.0);
    assert!(classify_json("heisenberg:1", "bogus").is_err());
}

#[test]
fn curves_start_at_mu0() {
    let v = parse(&closed_form_curves_json(&[4.0, 0.5], 1.0, 0.0, -2.0, 11).unwrap());
    assert_eq!(v["mu"][0][0], 4.0);
    assert_eq!(v["mu"][1][0], 0.5);
    assert_eq!(v["t"].as_array().unwrap().len(), 11);
    assert!(closed_form_curves_json(&[4.0], 1.0, 0.0, 1.0, 11).is_err());
}
