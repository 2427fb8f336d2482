#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netshock/ingest.hpp"
#include "netshock/leontief.hpp"

namespace netshock {

// Everything a scenario needs: firm registry, yearly firm-level flows, and
// accounting sales.
struct DataBundle {
  FirmTable firms;
  std::map<int, std::vector<Flow>> flows_by_year;
  std::vector<AccountingRecord> accounting;

  static DataBundle from_records(FirmTable firms, const std::vector<TransactionRecord>& records,
                                 std::vector<AccountingRecord> accounting, const std::vector<int>& years);
};

enum class ScenarioName { baseline, destruction, adjustment, outside_demand, total };
enum class SampleRule {
  balanced,              // firms with accounting data in every year involved
  all_firms_with_zeros,  // any firm with accounting data; missing years count as zero sales
};

std::string_view to_string(ScenarioName name);
ScenarioName parse_scenario_name(std::string_view text);
SampleRule parse_sample_rule(std::string_view text);

struct Scenario {
  ScenarioName name = ScenarioName::baseline;
  int io_year = 2013;
  bool truncate_conflict = false;  // cut every link of conflict-area firms out of the network
  int demand_year = 2013;
  SampleRule sample = SampleRule::balanced;
  // Years whose accounting data define the sample, in addition to io_year and demand_year.
  std::vector<int> sample_years;
};

// Presets: baseline (O_pre, xi_pre), destruction (truncated O_pre, xi_pre),
// adjustment (O_post, xi_pre), outside_demand (O_pre, xi_post), total (O_post, xi_post).
Scenario preset(ScenarioName name, int pre_year = 2013, int post_year = 2014,
                SampleRule sample = SampleRule::balanced);

struct DistributionStats {
  double median = 0;
  double p25 = 0;
  double p75 = 0;
  double mean = 0;
  double p40 = 0;
  double p60 = 0;
};

// Linear interpolation between order statistics (type 7). Throws Error{domain}
// on an empty sample.
double percentile(std::vector<double> values, double q);
DistributionStats distribution_stats(std::span<const double> values);

double relative_change(double stat, double baseline_stat);
// (D_dest - D_adj) / D_dest with D_s = 1 - stat_s / baseline.
double compensation_share(double baseline_stat, double destruction_stat, double adjustment_stat);
// Same quantity from relative declines given directly (e.g. 0.468 and 0.097).
double compensation_share_from_declines(double destruction_decline, double adjustment_decline);

// Firms entering a scenario, in sorted order, with their sales per year.
struct ScenarioSample {
  std::vector<std::string> firms;
  std::map<int, std::vector<double>> sales;  // year -> sales aligned with firms
  std::vector<char> reported;                // 1 for firms outside the conflict areas
};

ScenarioSample scenario_sample(const DataBundle& bundle, const std::vector<int>& years, SampleRule rule);

struct ScenarioResult {
  Scenario scenario;
  std::vector<std::string> firms;
  RevenueVector revenue;
  DistributionStats stats;  // over non-conflict firms
  int iterations = 0;
};

ScenarioResult run_scenario(const Scenario& scenario, const DataBundle& bundle, const EconomyConfig& config);

// Runs the scenarios concurrently; results are returned in input order.
std::vector<ScenarioResult> run_scenarios(const std::vector<Scenario>& scenarios, const DataBundle& bundle,
                                          const EconomyConfig& config);

// scenario,stat,value,relative_to_baseline. Relative values are fractions
// (stat / baseline - 1); the baseline scenario must be among the results
// unless baseline is given.
void write_scenario_report(std::ostream& out, const std::vector<ScenarioResult>& results);
void write_scenario_report(std::ostream& out, const std::vector<ScenarioResult>& results,
                           const DistributionStats& baseline);

struct DynamicsYear {
  int year = 0;
  DistributionStats observed;
  DistributionStats counterfactual;
};

struct DynamicsResult {
  int base_year = 0;
  std::vector<std::string> firms;
  std::vector<DynamicsYear> years;
};

// Adjustment counterfactual with demand pinned at the first year and the
// network of every later year plugged in.
DynamicsResult run_dynamics(const DataBundle& bundle, const std::vector<int>& years, const EconomyConfig& config,
                            SampleRule sample = SampleRule::balanced);

// year,series,stat,value,relative_to_baseline
void write_dynamics(std::ostream& out, const DynamicsResult& result);

enum class RegionLevel { province, district };
RegionLevel parse_region_level(std::string_view text);

struct RegionRow {
  std::string region_id;
  int year = 0;
  double observed = 0;
  double counterfactual = 0;
  double relative = 0;  // counterfactual / observed in the base year - 1
};

struct RegionResult {
  RegionLevel level = RegionLevel::province;
  int base_year = 0;
  std::vector<std::string> regions;
  std::vector<std::string> unconnected;  // no cross-region shipments in the base year
  std::vector<RegionRow> rows;           // region rows per year, then the countrywide total per year
};

inline constexpr std::string_view kCountryTotalId = "ALL";

// Region revenue = summed accounting sales of its firms; region Omega from
// summed cross-region shipments, column-normalized. The counterfactual keeps
// the base-year demand and plugs in each year's regional network.
RegionResult aggregate_regions(const std::vector<AccountingRecord>& accounting,
                               const std::vector<TransactionRecord>& records, const FirmTable& firms,
                               RegionLevel level, const std::vector<int>& years, const EconomyConfig& config);

void write_region_report(std::ostream& out, const RegionResult& result);

}  // namespace netshock
