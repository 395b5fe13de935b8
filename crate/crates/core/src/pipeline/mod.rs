//! The decomposition pipeline: transforms, modes, cluster and interaction
//! removal, memory filtration, factor selection and sector enrichment.

mod decompose;
mod enrichment;
mod filtration;
mod modes;
mod report;
mod transform;

pub use decompose::{
    decompose, market_stage, regression_stage, remove_cluster_and_interactions, Decomposition, EnetConfig,
    MarketStage, PipelineConfig, StockDecomposition,
};
pub use enrichment::{
    bonferroni_divisor, load_sectors, read_sectors, sector_enrichment, sector_labels, EnrichmentResult,
};
pub use filtration::{
    contribution_fractions, memory_filtration, select_cluster_factors, FiltrationReport, Group, GroupFiltration,
    StageSeries, StageStat, StockFiltration, RATIOS, STAGES,
};
pub use modes::{cluster_modes, market_mode, remove_market, MarketRemoval, ModeKind, ModeSeries};
pub use report::{memory_relations, rho_vol, scatter_rows, MemoryScatterRow, RelationTest};
pub use transform::{clamped_log_abs, log_abs_transform, log_returns, raw_log_returns, LogVolPanel, ReturnPanel};

impl Decomposition {
    /// Stage series for the filtration, borrowing from `omega` and `self`.
    pub fn stage_series<'a>(&'a self, omega: &'a LogVolPanel) -> Vec<StageSeries<'a>> {
        (0..self.tickers.len())
            .map(|i| StageSeries {
                plain: &omega.omega[i],
                market_removed: &self.residuals[i],
                cluster_removed: &self.stocks[i].cluster_removed,
                residual: &self.stocks[i].residual,
            })
            .collect()
    }
}
