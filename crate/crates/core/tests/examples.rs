//! Every example under examples/ runs to completion.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run().unwrap();
        }
    };
}

example!(generate_data);
example!(kernels);
example!(nuisance_regressors);
example!(dcdr_vs_scdr);
example!(fold_cycling);
example!(inference_tools);
example!(regressor_diagnostics);
example!(doppler_sweep);
example!(holder_study);
example!(custom_study);
example!(seeds);
