//! Relay selection for sleep-wake cycling wireless sensor networks.
//!
//! A node holding a packet for a far-away sink must choose among candidate
//! relays in its forwarding region. Candidates wake once per period at
//! independent random offsets, so the holder faces a trade-off between
//! transmitting early (low delay, likely poor progress) and waiting for a
//! better candidate. This crate provides:
//!
//! - [`geometry`]: the forwarding-region areas and the distribution of
//!   one-hop progress for a uniformly placed candidate;
//! - [`wake`]: order statistics of the candidate wake times within a period;
//! - [`sf`]: fixed-threshold stopping policies, including the extremes that
//!   transmit at the first wake or wait for every candidate, the fixed-point
//!   threshold optimal for a delay/progress trade-off multiplier, and
//!   calibration of the threshold to a target mean progress;
//! - [`bf`]: the dynamic-programming solver for the best stage-dependent
//!   stopping rule, which sees elapsed time and best progress so far;
//! - [`analytics`]: closed-form one-hop mean delay and mean progress for the
//!   threshold family;
//! - [`netsim`]: Monte-Carlo one-hop evaluation, Poisson network generation,
//!   and a slotted end-to-end simulator measuring delivery delay and hop
//!   counts across a multihop network.
//!
//! All lengths are normalized to the radio range and all times to the wake
//! period unless a function says otherwise (the end-to-end simulator works
//! in seconds and meters).

pub mod analytics;
pub mod bf;
pub mod error;
pub mod geometry;
pub mod netsim;
pub mod numeric;
pub mod sf;
pub mod wake;

pub use analytics::{
    ff_averages, mf_averages, sf_averages, sf_mean_delay, sf_mean_progress, write_averages_csv,
    HopAverages, AVERAGES_CSV_HEADER,
};
pub use bf::{bf_decide, solve_bf, ThresholdSurface};
pub use error::{Error, Result};
pub use geometry::{region_area, HopContext, ProgressModel};
pub use netsim::{
    generate_network, run_onehop, sweep_e2e, sweep_onehop, write_e2e_csv, write_network_csv,
    write_onehop_csv, E2eParams, E2ePolicy, E2eRow, E2eSimulator, E2eStats, HopStats, Network,
    OneHopKind, OneHopPolicy, OneHopRow, OneHopCase, E2E_CSV_HEADER, ONEHOP_CSV_HEADER,
};
pub use sf::{
    calibrate_threshold, ff_decide, iterate_value, mf_decide, one_step_table, one_step_value,
    sf_decide, solve_threshold, SfThreshold, ThresholdOrigin, ValueTable,
};
pub use wake::{cond_interwake_pdf, order_stat_pdf, sample_wakes, waiting_time, WakeSequence};
