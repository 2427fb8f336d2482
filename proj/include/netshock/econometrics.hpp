#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "netshock/ingest.hpp"
#include "netshock/kv_config.hpp"

namespace netshock {

// Long-format estimation data. Each fe[d] assigns a group id to every row;
// ids need not be dense. weights is empty for unweighted estimation.
struct PanelDataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> names;
  std::vector<std::vector<std::uint32_t>> fe;
  std::vector<std::uint32_t> cluster;
  std::vector<double> weights;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(y.size()); }
  void validate() const;
};

struct FeOlsOptions {
  double demean_tol = 1e-8;
  int max_sweeps = 10000;
  bool drop_singletons = true;
};

struct DemeanDiagnostics {
  int sweeps = 0;
  double max_group_mean = 0;
  bool converged = false;
};

struct RegressionResult {
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::MatrixXd cov;
  Eigen::VectorXd se;
  double r2 = 0;         // against the raw outcome
  double r2_within = 0;  // against the demeaned outcome
  std::size_t n = 0;
  std::size_t n_clusters = 0;
  std::size_t dropped_singletons = 0;
  std::size_t absorbed_dof = 0;  // sum over FE dimensions of (groups - 1)
  DemeanDiagnostics demean;

  double t_stat(std::size_t k) const { return coef(k) / se(k); }
  // Two-sided p-value from Student t with (clusters - 1) degrees of freedom.
  double p_value(std::size_t k) const;
  std::size_t index_of(const std::string& name) const;
};

// Fixed-effects OLS: outcome and regressors are demeaned by alternating
// projections over every FE dimension, then OLS runs on the residualized data.
// Coefficients equal those of the full dummy-variable regression.
// Throws Error{singular} naming collinear columns, ConvergenceError when
// demeaning stalls.
RegressionResult twoway_fe_ols(const PanelDataset& data, const FeOlsOptions& options = {});

// Demeans columns of m in place. Exposed for tests and diagnostics.
DemeanDiagnostics demean_columns(Eigen::MatrixXd& m, const std::vector<std::vector<std::uint32_t>>& fe,
                                 std::span<const double> weights, const FeOlsOptions& options);

// Cluster-robust sandwich covariance for regressors xd (already demeaned) and
// residuals u: small-sample factor G/(G-1) * (N-1)/(N-K), K = columns + absorbed_dof.
Eigen::MatrixXd cluster_robust_covariance(const Eigen::MatrixXd& xd, const Eigen::VectorXd& u,
                                          std::span<const std::uint32_t> cluster, std::size_t absorbed_dof,
                                          std::span<const double> weights = {});

std::string significance_stars(double p_value);
void write_results(std::ostream& out, const RegressionResult& result);

double ihs(double x);
// log(1 + x); throws Error{domain} for x < 0.
double log1p_checked(double x);

// Share of the full two-degree impact missed by a first-degree-only estimate.
double underestimation_share(double beta_naive, double beta1_full, double beta2_full, double share1,
                             double share2);

// ---------------------------------------------------------------------------
// Trade-propagation specifications

enum class TradeOutcome { any_shipment, log_shipments, log_weight };
enum class PropagationVariant { first_degree, both_degrees, buyer_supplier };

struct PropagationSpec {
  TradeOutcome outcome = TradeOutcome::any_shipment;
  PropagationVariant variant = PropagationVariant::both_degrees;
  bool include_both_conflict = false;
  bool partner_count_controls = false;
  // Fifth-order polynomial in each endpoint's distance to the conflict areas,
  // interacted with Post; keyed by rayon id.
  std::optional<std::unordered_map<std::string, double>> rayon_distance;
  bool post_province_effects = false;
};

TradeOutcome parse_trade_outcome(std::string_view text);

// Builds the establishment-pair x month regression data.
PanelDataset propagation_dataset(const TradePanel& panel, const FirmTable& firms, const PropagationSpec& spec);
RegressionResult did_propagation(const TradePanel& panel, const FirmTable& firms, const PropagationSpec& spec,
                                 const FeOlsOptions& options = {});

// ---------------------------------------------------------------------------
// Event studies

struct EventStudyInput {
  PanelDataset base;  // outcome, fixed effects, clusters, optional controls
  std::vector<std::string> treatment_names;
  Eigen::MatrixXd treatment;  // rows x treatments, time-invariant per unit
  std::vector<int> period;    // period label per row
  int baseline_period = 0;
};

struct EventStudyResult {
  std::vector<std::string> treatment_names;
  std::vector<int> periods;
  Eigen::MatrixXd coef;  // periods x treatments; baseline row exactly 0
  Eigen::MatrixXd se;
  RegressionResult regression;
};

EventStudyResult event_study(const EventStudyInput& input, const FeOlsOptions& options = {});

// Conflict and PartnerConflict interacted with quarter indicators; the quarter
// containing `baseline` is omitted.
EventStudyResult propagation_event_study(const TradePanel& panel, const FirmTable& firms, const PropagationSpec& spec,
                                         YearMonth baseline, const FeOlsOptions& options = {});

// ---------------------------------------------------------------------------
// Centrality specifications

enum class FirmOutcome { log_sales, ihs_profits, ihs_profits_minus_ihs_costs };
enum class CentralityVariant { pre_post, yearly, joint };

FirmOutcome parse_firm_outcome(std::string_view text);

struct CentralitySpec {
  FirmOutcome outcome = FirmOutcome::log_sales;
  CentralityVariant variant = CentralityVariant::pre_post;
  int post_year = 2014;
  int baseline_year = 2013;
  // Firms that traded with the conflict areas in the baseline year (joint variant).
  std::unordered_map<std::string, bool> conflict_trade;
};

struct CentralityEstimate {
  RegressionResult regression;
  std::vector<int> years;  // populated for yearly / joint variants
  std::vector<double> year_coef;
  std::vector<double> year_se;
};

// Firm-year panel with firm and year effects, clustered by firm. Firms without a
// centrality change (conflict-area firms, firms outside the graph) are excluded.
CentralityEstimate did_centrality(const std::vector<AccountingRecord>& accounting,
                                  const std::vector<std::string>& firm_ids, std::span<const double> delta,
                                  const CentralitySpec& spec, const FeOlsOptions& options = {});

// OLS residuals of delta on [1, characteristics], re-standardized.
// Throws Error{singular} when the characteristics are rank deficient.
std::vector<double> residualize(std::span<const double> delta, const Eigen::MatrixXd& characteristics);

struct BaselineCharacteristics {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // firms x characteristics
};

// Conflict-trade indicator, share of shipments with conflict areas, share of
// shipped weight sold to conflict areas, partners' conflict-trade weight
// (log1p), log1p sales and IHS profits, all measured in `year`.
BaselineCharacteristics baseline_characteristics(const std::vector<TransactionRecord>& records,
                                                 const FirmTable& firms,
                                                 const std::vector<AccountingRecord>& accounting, int year,
                                                 const std::vector<std::string>& firm_ids);

struct LaborCostRecord {
  std::string firm_id;
  int year = 0;
  double revenue = 0;
  double labor_cost = 0;
};

struct AlphaEstimate {
  double alpha = 0;
  double elasticity = 0;  // within-firm slope of log labor cost on log revenue
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};

// Log-log fixed-effects regression of labor cost on revenue. The share is the
// geometric-mean ratio exp(mean(log labor_cost - log revenue)), i.e. the
// constant of the log-log relation under unit elasticity.
AlphaEstimate estimate_alpha(const std::vector<LaborCostRecord>& records, int first_year, int last_year);

std::vector<LaborCostRecord> parse_labor_costs(std::istream& in);
void write_labor_costs(std::ostream& out, const std::vector<LaborCostRecord>& records);

}  // namespace netshock
