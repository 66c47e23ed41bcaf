use bundlechoice::dgp::{simulate, CovariateScheme, DgpConfig, Design, LatentGamma};
use bundlechoice::harness::io::{load_json, read_panel, save_json, write_panel};
use bundlechoice::harness::{EstimatorKind, RunConfig};
use bundlechoice::Error;

#[test]
fn panel_csv_roundtrip_is_lossless() {
    let panel = simulate(&DgpConfig::standard(Design::Four, 50, 3, 12)).unwrap().panel;
    let mut buf = Vec::new();
    write_panel(&panel, &mut buf).unwrap();
    let back = read_panel(buf.as_slice()).unwrap();
    assert_eq!(back, panel);
}

#[test]
fn run_config_json_roundtrip() {
    let mut dgp = DgpConfig::standard(Design::Two, 100, 4, 9);
    dgp.covariate_scheme = CovariateScheme::Bounded;
    dgp.latent_gamma = Some(LatentGamma::TwoPoint { eta: 0.3, g_plus: 1.5, g_minus: 0.1 + 0.2 });
    let mut cfg = RunConfig::montecarlo(dgp, vec![EstimatorKind::TwoStep, EstimatorKind::SemiNb], 7, u64::MAX);
    cfg.settings.ccp.learning_rate = 0.1 + 0.2;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    save_json(&cfg, &path).unwrap();
    let back: RunConfig = load_json(&path).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn nan_reports_its_row() {
    let csv = "id,t,y,xa_1,xb_1,z_1\n0,0,A,0.5,1,2\n0,1,O,NaN,1,2\n";
    match read_panel(csv.as_bytes()) {
        Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn malformed_panels_are_rejected() {
    let cases = [
        "id,t,y,xa_1,xb_1\n0,0,A,0,0\n",
        "id,t,y,xa_1,xb_1,z_1\n0,0,Q,0,0,0\n0,1,A,0,0,0\n",
        "id,t,y,xa_1,xb_1,z_1\n0,0,A,0,0,0\n0,1,A,0,0,1\n",
        "id,t,y,xa_1,xb_1,z_1\n0,0,A,0,0,0\n0,1,A,0,0,0\n1,0,A,0,0,0\n",
        "id,t,y,xa_1,xb_1,z_1\n0,0,A,0,x,0\n0,1,A,0,0,0\n",
    ];
    for c in cases {
        assert!(matches!(read_panel(c.as_bytes()), Err(Error::Parse { .. })), "{c}");
    }
}
