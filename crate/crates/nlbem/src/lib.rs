pub mod dirac_nrl;
pub mod geometry;
pub mod interactions;
pub mod layer_operators;
pub mod parallel;
pub mod quadrature;
pub mod rootfind;
pub mod selftest;
pub mod special_functions;
pub mod spectral_solver;
