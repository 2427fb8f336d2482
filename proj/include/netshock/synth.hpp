#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "netshock/econometrics.hpp"
#include "netshock/graph.hpp"
#include "netshock/ingest.hpp"
#include "netshock/kv_config.hpp"
#include "netshock/leontief.hpp"

namespace netshock {

enum class Attachment { preferential, uniform };

struct SyntheticEconomyConfig {
  std::uint64_t seed = 0;
  std::size_t n_firms = 400;
  double mean_suppliers = 5.0;  // average number of suppliers per buyer
  Attachment attachment = Attachment::preferential;
  double no_input_share = 0.1;  // buyers without in-network suppliers (ignored in structural mode)
  double alpha = 0.18;
  bool structural = false;

  int n_provinces = 10;
  int rayons_per_province = 4;
  int conflict_provinces = 1;  // the first k provinces form the conflict area

  double demand_scale = 1000.0;  // median outside demand
  double demand_sigma = 1.0;     // log-sd of outside demand

  // Transactions
  int first_year = 2013;
  int last_year = 2016;
  YearMonth event{2014, 3};
  double beta1 = -0.131;  // shift of the monthly shipment probability on conflict links
  double beta2 = -0.025;  // same for links with a preconflict partner in the conflict area
  double base_prob_low = 0.3;
  double base_prob_high = 0.9;
  double extra_shipments_mean = 2.0;  // shipments per active month = 1 + Poisson(mean)
  double weight_scale = 10.0;         // kg per unit of omega * buyer revenue

  // Accounting
  int accounting_first_year = 2011;
  int accounting_last_year = 2016;
  double centrality_effect = 0.145;  // log-sales shift per SD of the centrality change after the event
  CentralityKind centrality_kind = CentralityKind::eigenvector;
  double sales_noise = 0.05;   // sd of the log-sales noise
  double year_effect_sd = 0.05;
  double labor_noise = 0.0;    // sd of log labor-cost noise around alpha * revenue

  void validate() const;
  // `seed` is mandatory; every other key is optional.
  static SyntheticEconomyConfig from_config(const KeyValueConfig& cfg);
};

// Cobb-Douglas limit of the CES technology: x_i = z_i l_i^alpha (prod_j x_ji^a_ji)^(1-alpha),
// with a_ji = omega_ji and unit wage.
struct StructuralPrimitives {
  std::vector<double> z;  // productivity
  std::vector<double> l;  // labor
  std::vector<double> p;  // prices
  std::vector<double> x;  // output quantities
  std::vector<double> c;  // final consumption
  double w = 1.0;
  double total_labor = 0;
  double eta = 1.0;
  double sigma = 1.0;
};

struct SyntheticEconomy {
  SyntheticEconomyConfig config;
  std::vector<FirmRecord> firms;
  IOMatrix io;
  DemandVector demand;
  RevenueVector revenue;
  std::optional<StructuralPrimitives> structural;

  std::unordered_set<std::string> conflict_firms() const;
};

SyntheticEconomy generate_economy(const SyntheticEconomyConfig& config);

// Largest violations of the equilibrium conditions, relative to the scale of
// the quantities involved.
struct StructuralResiduals {
  double labor_foc = 0;        // w l_i vs alpha p_i x_i
  double input_foc = 0;        // p_j x_ji vs (1 - alpha) a_ji p_i x_i
  double price_cost = 0;       // p_i vs unit cost
  double goods_clearing = 0;   // x_j vs c_j + sum_i x_ji
  double labor_clearing = 0;   // L vs sum_i l_i
  double revenue_identity = 0; // r vs (1 - alpha) Omega r + xi
};

StructuralResiduals check_structural(const SyntheticEconomy& economy);

struct PlantedTruth {
  double beta1 = 0;
  double beta2 = 0;
  double centrality_effect = 0;
  PredictedCentralityChange centrality;  // the regressor the effect was planted on
  std::vector<double> year_effects;      // by accounting year
};

struct SyntheticData {
  std::vector<FirmRecord> firms;
  std::vector<TransactionRecord> transactions;
  std::vector<AccountingRecord> accounting;
  std::vector<LaborCostRecord> labor_costs;
  PlantedTruth truth;
};

// Monthly shipments on every link of the economy, one establishment per firm.
// Each link ships in a month with probability base_ij + beta1 Conflict Post +
// beta2 PartnerConflict Post (clamped to [0, 1]); base_ij ~ U[low, high] and
// every link ships in the first month so preconflict ties are observed.
// An active month carries 1 + Poisson(extra_shipments_mean) shipments with
// integer weights whose expectation per year is proportional to omega_ij r_j.
// Accounting: log(1 + sales) = log(1 + r) + year effect + effect * dC * Post + noise.
SyntheticData emit_transactions(const SyntheticEconomy& economy);

// The firm outcome panel alone, without transactions.
std::vector<AccountingRecord> plant_centrality_effect(const SyntheticEconomy& economy, double effect,
                                                      PlantedTruth* truth = nullptr);

// Centrality change of every surviving firm when the conflict firms are cut
// out of the economy's preconflict graph (links inside the conflict area excluded).
PredictedCentralityChange economy_centrality_change(const SyntheticEconomy& economy);

}  // namespace netshock
