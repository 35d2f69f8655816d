mod props;

macro_rules! suite {
    ($name:ident) => {
        #[test]
        fn $name() {
            if let Err(e) = props::$name() {
                panic!("{e}");
            }
        }
    };
}

suite!(canonical_form);
suite!(gauge_invariance);
suite!(truncation_bound);
suite!(tci_pivots);
suite!(maxvol_dominance);
suite!(qft_matches_dft);
suite!(cost_recomputation);
suite!(frobenius_round_trip);
