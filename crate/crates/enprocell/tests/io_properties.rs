use std::collections::BTreeMap;
use std::fmt::Write as _;

use enprocell::io::{
    input_digest, read_dense, read_labels, read_mtx_dir, read_sparse_mtx, write_dense, write_labels, write_mtx_dir,
    Delimiter, LabelOptions, Orientation,
};
use enprocell_core::{ExpressionMatrix, LabeledDataset, Matrix};
use proptest::prelude::*;

fn matrix_strategy() -> impl Strategy<Value = ExpressionMatrix> {
    (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
        // zeros are common in expression data, so mix them in
        let value = prop_oneof![Just(0.0), 0.0..1e6f64, (0u32..1000).prop_map(f64::from), 1e-300..1e-250f64];
        prop::collection::vec(value, n * m).prop_map(move |v| {
            let rows: Vec<Vec<f64>> = v.chunks(m).map(<[f64]>::to_vec).collect();
            let dense = Matrix::from_rows(&rows).unwrap();
            let genes = (0..m).map(|j| format!("g{j}")).collect();
            let cells = (0..n).map(|i| format!("c{i}")).collect();
            ExpressionMatrix::from_dense(&dense, genes, cells).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_round_trip_is_exact(
        m in matrix_strategy(),
        genes_as_rows in any::<bool>(),
        tab in any::<bool>(),
    ) {
        let orientation = if genes_as_rows { Orientation::GenesAsRows } else { Orientation::CellsAsRows };
        let delimiter = if tab { Delimiter::Tab } else { Delimiter::Comma };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        write_dense(&m, &p, orientation, delimiter).unwrap();
        prop_assert_eq!(read_dense(&p, orientation, delimiter).unwrap(), m);
    }

    #[test]
    fn mtx_round_trip_is_exact(m in matrix_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        write_mtx_dir(&m, dir.path()).unwrap();
        prop_assert_eq!(read_mtx_dir(dir.path()).unwrap(), m);
    }

    /// Densification agrees with replaying the coordinate list by hand,
    /// including repeated coordinates (summed) and arbitrary entry order.
    #[test]
    fn mtx_matches_coordinate_replay(
        genes in 1usize..7,
        cells in 1usize..7,
        raw in prop::collection::vec((0usize..100, 0usize..100, 1u32..50), 0..30),
        integer in any::<bool>(),
    ) {
        let entries: Vec<(usize, usize, u32)> = raw.into_iter().map(|(g, c, v)| (g % genes, c % cells, v)).collect();
        let mut text = format!(
            "%%MatrixMarket matrix coordinate {} general\n% written by a test\n{genes} {cells} {}\n",
            if integer { "integer" } else { "real" },
            entries.len()
        );
        for (g, c, v) in &entries {
            writeln!(text, "{} {} {}", g + 1, c + 1, v).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let (mp, gp, bp) = (dir.path().join("m.mtx"), dir.path().join("genes.tsv"), dir.path().join("barcodes.tsv"));
        std::fs::write(&mp, text).unwrap();
        std::fs::write(&gp, (0..genes).map(|g| format!("id{g}\tname{g}\n")).collect::<String>()).unwrap();
        std::fs::write(&bp, (0..cells).map(|c| format!("bc{c}\n")).collect::<String>()).unwrap();
        let m = read_sparse_mtx(&mp, &gp, &bp).unwrap();

        let mut oracle = vec![vec![0.0; genes]; cells];
        for (g, c, v) in &entries {
            oracle[*c][*g] += f64::from(*v);
        }
        prop_assert_eq!(m.n_cells(), cells);
        prop_assert_eq!(m.n_genes(), genes);
        for (c, row) in oracle.iter().enumerate() {
            for (g, v) in row.iter().enumerate() {
                prop_assert_eq!(m.get(c, g), *v);
            }
        }
        prop_assert_eq!(&m.gene_names()[0], "id0");
    }
}

fn small_matrix() -> ExpressionMatrix {
    let dense = Matrix::from_rows(&[[1.0, 0.0], [2.0, 3.0], [0.0, 4.0]]).unwrap();
    ExpressionMatrix::from_dense(&dense, vec!["g1".into(), "g2".into()], vec!["c1".into(), "c2".into(), "c3".into()]).unwrap()
}

#[test]
fn cells_as_rows_reading_of_a_genes_as_rows_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    std::fs::write(&p, "gene,c1,c2,c3\ng1,1,2,3\ng2,0,0,0\n").unwrap();
    let m = read_dense(&p, Orientation::CellsAsRows, Delimiter::Comma).unwrap();
    assert_eq!((m.n_cells(), m.n_genes()), (2, 3));
    assert_eq!(m.gene_names(), ["c1", "c2", "c3"]);
}

#[test]
fn unknown_label_rows_warn_and_are_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("labels.csv");
    std::fs::write(&p, "c1,alpha\nc2,alpha\nzz,gamma\nc3,alpha\n").unwrap();
    let (ds, warnings) = read_labels(&p, small_matrix(), LabelOptions::default()).unwrap();
    assert_eq!(ds.labels, ["alpha", "alpha", "alpha"]);
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].contains("zz"));
}

#[test]
fn labels_join_by_id_not_by_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("labels.tsv");
    std::fs::write(&p, "cell\ttype\tbatch\nc3\tx\tb2\nc1\tx\tb1\nc2\tx\tb1\n").unwrap();
    let options = LabelOptions { delimiter: Delimiter::Tab, header: true };
    let (ds, _) = read_labels(&p, small_matrix(), options).unwrap();
    assert_eq!(ds.labels, ["x", "x", "x"]);
    assert_eq!(ds.batch.as_deref().unwrap(), ["b1", "b1", "b2"]);

    let back = dir.path().join("back.csv");
    write_labels(&ds, &back).unwrap();
    let (again, _) = read_labels(&back, small_matrix(), LabelOptions::default()).unwrap();
    assert_eq!(again, ds);
}

#[test]
fn digests_follow_content_not_location() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = small_matrix();
    write_mtx_dir(&m, a.path()).unwrap();
    write_mtx_dir(&m, &b.path().join("nested")).unwrap();
    assert_eq!(input_digest(a.path()).unwrap(), input_digest(&b.path().join("nested")).unwrap());

    let ds = LabeledDataset::new(m.clone(), vec!["x".into(), "y".into(), "x".into()], None);
    assert!(ds.is_err(), "a label seen once is rejected");
    let f1 = a.path().join("one.csv");
    let f2 = b.path().join("two.csv");
    write_dense(&m, &f1, Orientation::CellsAsRows, Delimiter::Comma).unwrap();
    write_dense(&m, &f2, Orientation::CellsAsRows, Delimiter::Comma).unwrap();
    assert_eq!(input_digest(&f1).unwrap(), input_digest(&f2).unwrap());
    write_dense(&m, &f2, Orientation::GenesAsRows, Delimiter::Comma).unwrap();
    assert_ne!(input_digest(&f1).unwrap(), input_digest(&f2).unwrap());
}

#[test]
fn sparse_and_dense_readers_agree() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_matrix();
    write_mtx_dir(&m, &dir.path().join("mtx")).unwrap();
    let csv = dir.path().join("m.csv");
    write_dense(&m, &csv, Orientation::GenesAsRows, Delimiter::Comma).unwrap();
    let a = read_mtx_dir(&dir.path().join("mtx")).unwrap();
    let b = read_dense(&csv, Orientation::GenesAsRows, Delimiter::Comma).unwrap();
    assert_eq!(a, b);
    let totals: BTreeMap<&str, f64> = a.cell_ids().iter().map(String::as_str).zip(a.cell_totals()).collect();
    assert_eq!(totals["c2"], 5.0);
}
