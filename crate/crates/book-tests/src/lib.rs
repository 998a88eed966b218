//! Compiles and runs the book's code listings as doc-tests.

macro_rules! chapters {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub mod $name {}
        )*
    };
}

chapters! {
    introduction => "introduction.md",
    lattice => "lattice.md",
    gaussian => "gaussian.md",
    conditioning => "conditioning.md",
    localization => "localization.md",
    gamma_poisson => "gamma_poisson.md",
    determinants => "determinants.md",
    variational => "variational.md",
    suites => "suites.md",
}
