//! Random periodic points, the degree obstruction, random horseshoes, weak
//! horseshoes and graph measures.

mod graph;
pub mod horseshoe;
pub mod measure;
pub mod obstruction;
pub mod periodic;
pub mod weak;

pub use graph::{GraphFunction, GraphKind};
pub use horseshoe::{
    build_horseshoe, capture_separated_family, CaptureOptions, HorseshoeEmbedding, HorseshoeOptions, R1Certificate,
    SeparatedFamily, SeparationCertificate, SeparationSample, SymbolWord,
};
pub use measure::{
    graph_measure, image_graph, injectivity_probe, pushforward_check, EmpiricalGraphMeasure, InjectivityReport,
    PushforwardReport, TestFunction,
};
pub use obstruction::{continuous_graph_obstruction, Obstruction};
pub use periodic::{
    detect_graph_discontinuity, find_random_periodic_point, ContinuityReport, ContinuityVerdict, PeriodicOptions,
    PeriodicPoint,
};
pub use weak::{build_weak_horseshoe, VisitReport, WeakHorseshoe};
