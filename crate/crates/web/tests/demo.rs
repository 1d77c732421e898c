use drapefit_web::{drape_scene, gradcheck_text, move_handle};

#[test]
fn strip_drape_sags_and_stays_unstretched() {
    let v = drape_scene("strip", 40).unwrap();
    assert_eq!(v.steps(), 40);
    assert_eq!(v.positions().len() % 3, 0);
    assert!(v.max_strain() < 0.05);
    assert!(v.positions().chunks(3).any(|p| p[2] < 0.99));
    assert!(drape_scene("cape", 1).is_err());
}

#[test]
fn zero_move_reproduces_the_pattern() {
    let c = move_handle("skirt", 0, 0.0, 0.0).unwrap();
    let scene = drapefit::scenes::skirt();
    for (a, b) in c.rest().chunks(2).zip(&scene.pattern.vertices_2d) {
        assert!((a[0] - b.x).abs() < 1e-12 && (a[1] - b.y).abs() < 1e-12);
    }
    assert!(!c.inverted() && c.min_quality() > 0.0);
    let far = move_handle("skirt", 0, 2.0, 2.0).unwrap();
    assert!(far.inverted() || far.min_quality() < c.min_quality());
    assert!(move_handle("skirt", 10_000, 0.0, 0.0).is_err());
}

#[test]
fn gradcheck_text_reports_rows() {
    let t = gradcheck_text("material").unwrap();
    assert!(t.contains("log_bend") && t.contains("within"));
    assert!(gradcheck_text("mass").is_err());
}
