#include "netshock/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <unordered_set>

#include "netshock/csv.hpp"
#include "netshock/error.hpp"

namespace netshock {

DataBundle DataBundle::from_records(FirmTable firms, const std::vector<TransactionRecord>& records,
                                    std::vector<AccountingRecord> accounting, const std::vector<int>& years) {
  DataBundle b;
  for (int y : years) b.flows_by_year[y] = build_yearly_flows(records, firms, y);
  b.firms = std::move(firms);
  b.accounting = std::move(accounting);
  return b;
}

std::string_view to_string(ScenarioName name) {
  switch (name) {
    case ScenarioName::baseline: return "baseline";
    case ScenarioName::destruction: return "destruction";
    case ScenarioName::adjustment: return "adjustment";
    case ScenarioName::outside_demand: return "outside_demand";
    case ScenarioName::total: return "total";
  }
  return "?";
}

ScenarioName parse_scenario_name(std::string_view text) {
  for (auto n : {ScenarioName::baseline, ScenarioName::destruction, ScenarioName::adjustment,
                 ScenarioName::outside_demand, ScenarioName::total}) {
    if (text == to_string(n)) return n;
  }
  if (text == "outside-demand" || text == "demand") return ScenarioName::outside_demand;
  throw Error(ErrorCategory::usage, "unknown scenario preset '" + std::string(text) + "'");
}

SampleRule parse_sample_rule(std::string_view text) {
  if (text == "balanced") return SampleRule::balanced;
  if (text == "all" || text == "all_firms_with_zeros") return SampleRule::all_firms_with_zeros;
  throw Error(ErrorCategory::usage, "unknown sample rule '" + std::string(text) + "'");
}

Scenario preset(ScenarioName name, int pre_year, int post_year, SampleRule sample) {
  Scenario s;
  s.name = name;
  s.sample = sample;
  s.io_year = pre_year;
  s.demand_year = pre_year;
  s.sample_years = {pre_year, post_year};
  switch (name) {
    case ScenarioName::baseline: break;
    case ScenarioName::destruction: s.truncate_conflict = true; break;
    case ScenarioName::adjustment: s.io_year = post_year; break;
    case ScenarioName::outside_demand: s.demand_year = post_year; break;
    case ScenarioName::total:
      s.io_year = post_year;
      s.demand_year = post_year;
      break;
  }
  return s;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCategory::domain, "percentile of an empty sample");
  if (!(q >= 0 && q <= 1)) throw Error(ErrorCategory::domain, "percentile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

DistributionStats distribution_stats(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCategory::domain, "distribution statistics of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  DistributionStats s;
  s.median = percentile(v, 0.5);
  s.p25 = percentile(v, 0.25);
  s.p75 = percentile(v, 0.75);
  s.p40 = percentile(v, 0.40);
  s.p60 = percentile(v, 0.60);
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  return s;
}

double relative_change(double stat, double baseline_stat) {
  if (baseline_stat == 0) throw Error(ErrorCategory::domain, "relative change against a zero baseline");
  return stat / baseline_stat - 1.0;
}

double compensation_share_from_declines(double destruction_decline, double adjustment_decline) {
  if (destruction_decline == 0) throw Error(ErrorCategory::domain, "destruction leaves the statistic unchanged");
  return (destruction_decline - adjustment_decline) / destruction_decline;
}

double compensation_share(double baseline_stat, double destruction_stat, double adjustment_stat) {
  const double d_dest = -relative_change(destruction_stat, baseline_stat);
  const double d_adj = -relative_change(adjustment_stat, baseline_stat);
  return compensation_share_from_declines(d_dest, d_adj);
}

ScenarioSample scenario_sample(const DataBundle& bundle, const std::vector<int>& years, SampleRule rule) {
  std::map<std::string, std::map<int, double>> sales;
  const std::set<int> wanted(years.begin(), years.end());
  for (const auto& r : bundle.accounting) {
    if (wanted.count(r.year) && bundle.firms.contains(r.firm_id)) sales[r.firm_id][r.year] += r.sales;
  }
  ScenarioSample s;
  for (const auto& [firm, by_year] : sales) {
    if (rule == SampleRule::balanced && by_year.size() != wanted.size()) continue;
    s.firms.push_back(firm);
    s.reported.push_back(bundle.firms.is_conflict_firm(firm) ? 0 : 1);
  }
  for (int y : wanted) {
    auto& col = s.sales[y];
    col.reserve(s.firms.size());
    for (const auto& f : s.firms) {
      const auto& by_year = sales.at(f);
      auto it = by_year.find(y);
      col.push_back(it == by_year.end() ? 0.0 : it->second);
    }
  }
  if (s.firms.empty()) throw Error(ErrorCategory::domain, "no firms with accounting data for the requested years");
  return s;
}

namespace {

const std::vector<Flow>& flows_for(const DataBundle& bundle, int year) {
  auto it = bundle.flows_by_year.find(year);
  if (it == bundle.flows_by_year.end()) {
    throw Error(ErrorCategory::domain, "no transaction data for year " + std::to_string(year));
  }
  return it->second;
}

void require_accounting_year(const DataBundle& bundle, int year) {
  for (const auto& r : bundle.accounting) {
    if (r.year == year) return;
  }
  throw Error(ErrorCategory::domain, "no accounting data for year " + std::to_string(year));
}

std::unordered_set<std::string> conflict_set(const FirmTable& firms) {
  const auto ids = firms.conflict_firm_ids();
  return {ids.begin(), ids.end()};
}

std::vector<double> reported_values(std::span<const double> values, const std::vector<char>& reported) {
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (reported[i]) out.push_back(values[i]);
  }
  return out;
}

IOMatrix scenario_network(const DataBundle& bundle, const std::vector<std::string>& firms, int year,
                          bool truncate) {
  IOMatrix io = build_io_matrix(flows_for(bundle, year), firms, year);
  if (truncate) io = truncate_network(io, conflict_set(bundle.firms));
  return io;
}

}  // namespace

ScenarioResult run_scenario(const Scenario& scenario, const DataBundle& bundle, const EconomyConfig& config) {
  config.validate();
  std::set<int> year_set{scenario.io_year, scenario.demand_year};
  for (int y : year_set) {
    require_accounting_year(bundle, y);
    flows_for(bundle, y);
  }
  std::set<int> sample_years = year_set;
  sample_years.insert(scenario.sample_years.begin(), scenario.sample_years.end());
  const std::vector<int> years(sample_years.begin(), sample_years.end());
  const auto sample = scenario_sample(bundle, years, scenario.sample);

  ScenarioResult res;
  res.scenario = scenario;
  res.firms = sample.firms;

  const IOMatrix demand_io = scenario_network(bundle, sample.firms, scenario.demand_year, false);
  RevenueVector observed{scenario.demand_year, sample.sales.at(scenario.demand_year)};
  const DemandVector xi = backout_demand(demand_io, observed, config);

  const IOMatrix io = scenario_network(bundle, sample.firms, scenario.io_year, scenario.truncate_conflict);
  auto sol = solve_revenue(io, xi, config);
  res.revenue = std::move(sol.revenue);
  res.revenue.year = scenario.io_year;
  res.iterations = sol.iterations;
  const auto shown = reported_values(res.revenue.values, sample.reported);
  if (shown.empty()) throw Error(ErrorCategory::domain, "no firms outside the conflict areas in the sample");
  res.stats = distribution_stats(shown);
  return res;
}

std::vector<ScenarioResult> run_scenarios(const std::vector<Scenario>& scenarios, const DataBundle& bundle,
                                          const EconomyConfig& config) {
  std::vector<ScenarioResult> out(scenarios.size());
  std::vector<std::string> errors(scenarios.size());
  std::vector<ErrorCategory> categories(scenarios.size(), ErrorCategory::domain);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(scenarios.size()); ++i) {
    try {
      out[i] = run_scenario(scenarios[i], bundle, config);
    } catch (const Error& e) {
      errors[i] = e.what();
      categories[i] = e.category();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (!errors[i].empty()) {
      throw Error(categories[i], std::string(to_string(scenarios[i].name)) + ": " + errors[i]);
    }
  }
  return out;
}

namespace {

void write_stats_rows(csv::Writer& w, std::string_view label, const DistributionStats& s, const DistributionStats& b,
                      bool include_bands) {
  auto row = [&](std::string_view stat, double v, double base) {
    w.field(label).field(stat).field(v).field(relative_change(v, base));
    w.end_row();
  };
  row("median", s.median, b.median);
  row("p25", s.p25, b.p25);
  row("p75", s.p75, b.p75);
  row("mean", s.mean, b.mean);
  if (include_bands) {
    row("p40", s.p40, b.p40);
    row("p60", s.p60, b.p60);
  }
}

}  // namespace

void write_scenario_report(std::ostream& out, const std::vector<ScenarioResult>& results,
                           const DistributionStats& baseline) {
  csv::Writer w(out, {"scenario", "stat", "value", "relative_to_baseline"});
  for (const auto& r : results) write_stats_rows(w, to_string(r.scenario.name), r.stats, baseline, false);
}

void write_scenario_report(std::ostream& out, const std::vector<ScenarioResult>& results) {
  for (const auto& r : results) {
    if (r.scenario.name == ScenarioName::baseline) {
      write_scenario_report(out, results, r.stats);
      return;
    }
  }
  throw Error(ErrorCategory::domain, "scenario report needs the baseline scenario");
}

DynamicsResult run_dynamics(const DataBundle& bundle, const std::vector<int>& years, const EconomyConfig& config,
                            SampleRule rule) {
  if (years.empty()) throw Error(ErrorCategory::domain, "no years requested");
  config.validate();
  for (int y : years) {
    require_accounting_year(bundle, y);
    flows_for(bundle, y);
  }
  const auto sample = scenario_sample(bundle, years, rule);
  DynamicsResult res;
  res.base_year = years.front();
  res.firms = sample.firms;

  const IOMatrix base_io = scenario_network(bundle, sample.firms, res.base_year, false);
  const DemandVector xi = backout_demand(base_io, {res.base_year, sample.sales.at(res.base_year)}, config);

  res.years.resize(years.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(years.size()); ++k) {
    const int y = years[k];
    auto& out = res.years[k];
    out.year = y;
    out.observed = distribution_stats(reported_values(sample.sales.at(y), sample.reported));
    const IOMatrix io = scenario_network(bundle, sample.firms, y, false);
    const auto sol = solve_revenue(io, xi, config);
    out.counterfactual = distribution_stats(reported_values(sol.revenue.values, sample.reported));
  }
  return res;
}

void write_dynamics(std::ostream& out, const DynamicsResult& result) {
  csv::Writer w(out, {"year", "series", "stat", "value", "relative_to_baseline"});
  if (result.years.empty()) return;
  const auto& base = result.years.front().observed;
  for (const auto& y : result.years) {
    for (const auto* series : {"observed", "counterfactual"}) {
      const auto& s = std::string_view(series) == "observed" ? y.observed : y.counterfactual;
      const std::pair<const char*, std::pair<double, double>> rows[] = {
          {"median", {s.median, base.median}}, {"p25", {s.p25, base.p25}}, {"p75", {s.p75, base.p75}},
          {"p40", {s.p40, base.p40}},          {"p60", {s.p60, base.p60}}, {"mean", {s.mean, base.mean}},
      };
      for (const auto& [stat, v] : rows) {
        w.field(y.year).field(series).field(stat).field(v.first).field(relative_change(v.first, v.second));
        w.end_row();
      }
    }
  }
}

RegionLevel parse_region_level(std::string_view text) {
  if (text == "province") return RegionLevel::province;
  if (text == "district" || text == "rayon") return RegionLevel::district;
  throw Error(ErrorCategory::usage, "unknown region level '" + std::string(text) + "'");
}

RegionResult aggregate_regions(const std::vector<AccountingRecord>& accounting,
                               const std::vector<TransactionRecord>& records, const FirmTable& firms,
                               RegionLevel level, const std::vector<int>& years, const EconomyConfig& config) {
  if (years.empty()) throw Error(ErrorCategory::domain, "no years requested");
  config.validate();
  auto firm_region = [&](const std::string& firm_id) -> const std::string& {
    const auto& f = firms.at(firm_id);
    return level == RegionLevel::province ? f.province_id : f.rayon_id;
  };
  auto shipment_region = [&](const std::string& firm_id, const std::string& rayon) -> std::string {
    if (level == RegionLevel::district) return rayon;
    return firms.province_of_rayon(rayon, firms.at(firm_id).province_id);
  };

  RegionResult res;
  res.level = level;
  res.base_year = years.front();

  std::map<std::string, std::map<int, double>> revenue;
  const std::set<int> wanted(years.begin(), years.end());
  for (const auto& a : accounting) {
    if (wanted.count(a.year)) revenue[firm_region(a.firm_id)][a.year] += a.sales;
  }
  std::map<int, std::map<std::pair<std::string, std::string>, double>> flows;
  for (const auto& r : records) {
    if (!wanted.count(r.date.year)) continue;
    auto from = shipment_region(r.sender_firm_id, r.sender_rayon_id);
    auto to = shipment_region(r.receiver_firm_id, r.receiver_rayon_id);
    if (from == to) continue;
    flows[r.date.year][{std::move(from), std::move(to)}] += static_cast<double>(r.weight_kg);
  }
  for (const auto& [region, by_year] : revenue) res.regions.push_back(region);
  if (res.regions.empty()) throw Error(ErrorCategory::domain, "no accounting data for the requested years");

  std::set<std::string> connected;
  for (const auto& [pair, w] : flows[res.base_year]) {
    connected.insert(pair.first);
    connected.insert(pair.second);
  }
  for (const auto& r : res.regions) {
    if (!connected.count(r)) res.unconnected.push_back(r);
  }

  auto region_flows = [&](int year) {
    std::vector<Flow> out;
    for (const auto& [pair, w] : flows[year]) out.push_back({pair.first, pair.second, w});
    return out;
  };
  auto observed = [&](const std::string& region, int year) {
    auto it = revenue.at(region).find(year);
    return it == revenue.at(region).end() ? 0.0 : it->second;
  };

  RevenueVector base{res.base_year, {}};
  for (const auto& r : res.regions) base.values.push_back(observed(r, res.base_year));
  const auto base_io = build_io_matrix(region_flows(res.base_year), res.regions, res.base_year);
  const auto xi = backout_demand(base_io, base, config);

  std::vector<RegionRow> totals;
  for (int y : years) {
    const auto io = build_io_matrix(region_flows(y), res.regions, y);
    const auto sol = solve_revenue(io, xi, config);
    RegionRow total{std::string(kCountryTotalId), y, 0, 0, 0};
    double base_total = 0;
    for (std::size_t i = 0; i < res.regions.size(); ++i) {
      RegionRow row{res.regions[i], y, observed(res.regions[i], y), sol.revenue.values[i], 0};
      row.relative = base.values[i] != 0 ? row.counterfactual / base.values[i] - 1.0
                                         : std::numeric_limits<double>::quiet_NaN();
      total.observed += row.observed;
      total.counterfactual += row.counterfactual;
      base_total += base.values[i];
      res.rows.push_back(std::move(row));
    }
    total.relative = base_total != 0 ? total.counterfactual / base_total - 1.0
                                     : std::numeric_limits<double>::quiet_NaN();
    totals.push_back(std::move(total));
  }
  res.rows.insert(res.rows.end(), totals.begin(), totals.end());
  return res;
}

void write_region_report(std::ostream& out, const RegionResult& result) {
  csv::Writer w(out, {"region_id", "year", "observed", "counterfactual", "relative"});
  for (const auto& r : result.rows) {
    w.field(r.region_id).field(r.year).field(r.observed).field(r.counterfactual).field(r.relative);
    w.end_row();
  }
}

}  // namespace netshock
