use calibset_demo::{attack_summary, book_summary, comass_pair, sigma_triangles};

#[test]
fn mesh_layout() {
    let res = 6;
    let data = sigma_triangles(3, res).unwrap();
    // 3 faces, 2 triangles per cell, 3 vertices of 4 numbers each
    assert_eq!(data.len(), 3 * 2 * (res - 1) * (res - 1) * 3 * 4);
    let faces: std::collections::BTreeSet<u32> = data.chunks(4).map(|c| c[0] as u32).collect();
    assert_eq!(faces.into_iter().collect::<Vec<_>>(), [0, 1, 2]);
    assert!(data.chunks(4).all(|c| c[1..].iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-12));
}

#[test]
fn book_verdicts() {
    assert!(book_summary(&[120.0, 120.0, 120.0]).unwrap().starts_with("status: pass"));
    assert!(book_summary(&[100.0, 130.0, 130.0]).unwrap().starts_with("status: nonvanishing-sum"));
    assert!(book_summary(&[100.0, 100.0]).is_err());
}

#[test]
fn attack_on_unbalanced_book() {
    let text = attack_summary(&[100.0, 130.0, 130.0], 500, 0).unwrap();
    assert!(text.contains("area decreased"), "{text}");
}

#[test]
fn comass_agrees_with_closed_form() {
    for seed in 0..5 {
        let (_, estimate, oracle) = comass_pair(seed, false, 0.0).unwrap();
        assert!((estimate - oracle).abs() < 1e-6, "{seed}: {estimate} vs {oracle}");
    }
    let (_, estimate, oracle) = comass_pair(0, true, 1.3).unwrap();
    assert!((estimate - 1.0).abs() < 1e-9 && (oracle - 1.0).abs() < 1e-12);
}
