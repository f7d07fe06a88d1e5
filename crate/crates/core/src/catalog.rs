//! Bundled scenario configurations, one per reproduced figure.

use crate::config::ConfigDocument;
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    /// File stem, e.g. `fig04a_batch_size`.
    pub id: &'static str,
    pub toml: &'static str,
}

const fn entry(id: &'static str, toml: &'static str) -> CatalogEntry {
    CatalogEntry { id, toml }
}

pub const CATALOG: &[CatalogEntry] = &[
    entry(
        "fig04a_batch_size",
        include_str!("../catalog/fig04a_batch_size.toml"),
    ),
    entry(
        "fig04b_batch_size_default_buffer",
        include_str!("../catalog/fig04b_batch_size_default_buffer.toml"),
    ),
    entry(
        "fig05_batch_size_fairness",
        include_str!("../catalog/fig05_batch_size_fairness.toml"),
    ),
    entry(
        "fig06a_split_ratio",
        include_str!("../catalog/fig06a_split_ratio.toml"),
    ),
    entry(
        "fig06b_bandwidth_ratio",
        include_str!("../catalog/fig06b_bandwidth_ratio.toml"),
    ),
    entry(
        "fig06c_matched_split",
        include_str!("../catalog/fig06c_matched_split.toml"),
    ),
    entry(
        "fig07_bandwidth_ratio_fairness",
        include_str!("../catalog/fig07_bandwidth_ratio_fairness.toml"),
    ),
    entry("fig08c_loss", include_str!("../catalog/fig08c_loss.toml")),
    entry(
        "fig09a_delay_ratio",
        include_str!("../catalog/fig09a_delay_ratio.toml"),
    ),
    entry(
        "fig09b_delay_ratio_high",
        include_str!("../catalog/fig09b_delay_ratio_high.toml"),
    ),
    entry(
        "fig10a_duplication_goodput",
        include_str!("../catalog/fig10a_duplication_goodput.toml"),
    ),
    entry(
        "fig10b_duplication_fairness",
        include_str!("../catalog/fig10b_duplication_fairness.toml"),
    ),
    entry(
        "fig11_cc_throughput",
        include_str!("../catalog/fig11_cc_throughput.toml"),
    ),
    entry(
        "fig12_cc_fairness",
        include_str!("../catalog/fig12_cc_fairness.toml"),
    ),
    entry(
        "fig13_cubic_batch_size",
        include_str!("../catalog/fig13_cubic_batch_size.toml"),
    ),
    entry(
        "fig14_recv_buffer_ratio",
        include_str!("../catalog/fig14_recv_buffer_ratio.toml"),
    ),
    entry(
        "fig15_trace_batch_size",
        include_str!("../catalog/fig15_trace_batch_size.toml"),
    ),
    entry(
        "fig16_pairwise_sc",
        include_str!("../catalog/fig16_pairwise_sc.toml"),
    ),
    entry(
        "fig17_quic_vs_tcp",
        include_str!("../catalog/fig17_quic_vs_tcp.toml"),
    ),
    entry(
        "fig18_loss_fairness",
        include_str!("../catalog/fig18_loss_fairness.toml"),
    ),
    entry(
        "fig19_split_fairness",
        include_str!("../catalog/fig19_split_fairness.toml"),
    ),
    entry(
        "fig20_trace_fairness",
        include_str!("../catalog/fig20_trace_fairness.toml"),
    ),
    entry(
        "fig21_trace_split",
        include_str!("../catalog/fig21_trace_split.toml"),
    ),
];

impl CatalogEntry {
    pub fn document(&self) -> Result<ConfigDocument> {
        ConfigDocument::from_toml_str(self.toml)
    }

    /// `"<figure> <title>"`, e.g. `fig4a batch-size sweep`.
    pub fn label(&self) -> String {
        let doc = self.document().unwrap_or_default();
        format!(
            "{} {}",
            doc.figure.as_deref().unwrap_or(self.id),
            doc.title.as_deref().unwrap_or("")
        )
    }
}

/// Looks an entry up by id, figure tag or scenario name.
pub fn find(key: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| {
        e.id == key
            || e.document()
                .is_ok_and(|d| d.figure.as_deref() == Some(key) || d.name.as_deref() == Some(key))
    })
}
