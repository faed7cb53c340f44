//! Volume-preserving mean curvature flow of radial tubes over geodesic balls
//! in invariant submanifolds of rank-one symmetric spaces.

pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod profile;
pub mod quadrature;
pub mod symspace;
pub mod tubegeom;

pub use diagnostics::{AuditContext, PointDiagnostics, ResidualReport, Which};
pub use error::{Result, TubeError};
pub use flow::{
    run, CmcProfile, CmcSearch, Flow, FlowConfig, FlowOutcome, FlowState, Marker, RunReport, Scheme, TimeSeries,
    TimeSeriesRow,
};
pub use profile::{BaseDensity, BaseGrid, LapMode, RadialProfile};
pub use symspace::{catalog, catalog_lookup, CatalogEntry, Curvature, RootMult, SpaceParams};
pub use tubegeom::{BoundsContext, BoundsReport, Observed, PointData, SignMode};
