#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "netshock/counterfactual.hpp"
#include "netshock/error.hpp"
#include "oracles.hpp"

using namespace netshock;

namespace {

TransactionRecord tx(const std::string& date, const std::string& s, const std::string& r, const std::string& rs,
                     const std::string& rr, std::int64_t w) {
  return {parse_date(date), s, r, rs, rr, w};
}

// A and B buy from each other and from the conflict firm C; D is isolated.
// After the event B replaces C as A's supplier.
DataBundle fixture() {
  FirmTable firms({{"A", "R1", "P1", false},
                   {"B", "R2", "P2", false},
                   {"C", "RC", "PC", true},
                   {"D", "R3", "P2", false}});
  std::vector<TransactionRecord> recs = {
      tx("2013-02-01", "C", "A", "RC", "R1", 600), tx("2013-02-01", "B", "A", "R2", "R1", 400),
      tx("2013-03-01", "A", "B", "R1", "R2", 500), tx("2013-03-01", "C", "B", "RC", "R2", 500),
      tx("2013-04-01", "A", "C", "R1", "RC", 100), tx("2014-05-01", "B", "A", "R2", "R1", 900),
      tx("2014-05-01", "A", "B", "R1", "R2", 700)};
  std::vector<AccountingRecord> acc;
  const std::map<std::string, std::pair<double, double>> sales = {
      {"A", {10, 8}}, {"B", {6, 5}}, {"C", {4, 1}}, {"D", {3, 3.5}}};
  for (const auto& [id, s] : sales) {
    acc.push_back({id, 2013, s.first, 1, s.first - 1});
    acc.push_back({id, 2014, s.second, 1, s.second - 1});
  }
  return DataBundle::from_records(firms, recs, acc, {2013, 2014});
}

EconomyConfig config() {
  EconomyConfig c;
  c.alpha = 0.3;
  c.tol = 1e-14;
  c.max_iter = 100000;
  return c;
}

}  // namespace

TEST_SUITE("counterfactual") {
  TEST_CASE("percentiles follow linear interpolation") {
    const std::vector<double> v{4, 1, 3, 2};
    CHECK(percentile(v, 0.5) == doctest::Approx(2.5));
    CHECK(percentile(v, 0.25) == doctest::Approx(1.75));
    CHECK(percentile(v, 0.75) == doctest::Approx(3.25));
    CHECK(percentile(v, 0.0) == 1);
    CHECK(percentile(v, 1.0) == 4);
    CHECK_THROWS_AS(percentile({}, 0.5), Error);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    std::vector<double> w(37);
    for (auto& x : w) x = n(rng);
    for (double q : {0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.93}) {
      CHECK(percentile(w, q) == doctest::Approx(oracle::percentile_type7(w, q)).epsilon(1e-14));
    }
    const auto s = distribution_stats(v);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.p40 == doctest::Approx(2.2));
  }

  TEST_CASE("relative change and compensation share") {
    CHECK(relative_change(1.20, 2.26) == doctest::Approx(-0.4690).epsilon(1e-3));
    CHECK(compensation_share(2, 1, 2) == doctest::Approx(1.0));
    CHECK(compensation_share(2, 1, 1) == doctest::Approx(0.0));
    CHECK(compensation_share(2.26, 1.20, 2.03) == doctest::Approx(compensation_share(22.6, 12.0, 20.3)));
    CHECK(compensation_share_from_declines(0.468, 0.097) == doctest::Approx(0.79273).epsilon(1e-4));
    CHECK_THROWS_AS(compensation_share(2, 2, 1), Error);
  }

  TEST_CASE("scenario names and presets") {
    CHECK(parse_scenario_name("outside-demand") == ScenarioName::outside_demand);
    CHECK(to_string(ScenarioName::destruction) == "destruction");
    CHECK_THROWS_AS(parse_scenario_name("nope"), Error);
    const auto d = preset(ScenarioName::destruction);
    CHECK(d.truncate_conflict);
    CHECK(d.io_year == 2013);
    CHECK(d.demand_year == 2013);
    const auto a = preset(ScenarioName::adjustment);
    CHECK(a.io_year == 2014);
    CHECK(a.demand_year == 2013);
    const auto o = preset(ScenarioName::outside_demand);
    CHECK(o.io_year == 2013);
    CHECK(o.demand_year == 2014);
    const auto t = preset(ScenarioName::total);
    CHECK(t.io_year == 2014);
    CHECK(t.demand_year == 2014);
  }

  TEST_CASE("baseline reproduces observed sales and total reproduces the post year") {
    const auto b = fixture();
    const auto cfg = config();
    const auto base = run_scenario(preset(ScenarioName::baseline), b, cfg);
    REQUIRE(base.firms == std::vector<std::string>{"A", "B", "C", "D"});
    const std::vector<double> pre{10, 6, 4, 3}, post{8, 5, 1, 3.5};
    for (std::size_t i = 0; i < 4; ++i) CHECK(base.revenue.values[i] == doctest::Approx(pre[i]).epsilon(1e-12));
    const auto total = run_scenario(preset(ScenarioName::total), b, cfg);
    for (std::size_t i = 0; i < 4; ++i) CHECK(total.revenue.values[i] == doctest::Approx(post[i]).epsilon(1e-12));
    // Stats cover the non-conflict firms only: {10, 6, 3}.
    CHECK(base.stats.median == doctest::Approx(6));
  }

  TEST_CASE("destruction lowers revenue of firms tied to the conflict area") {
    const auto b = fixture();
    const auto cfg = config();
    const auto base = run_scenario(preset(ScenarioName::baseline), b, cfg);
    const auto dest = run_scenario(preset(ScenarioName::destruction), b, cfg);
    for (std::size_t i = 0; i < 4; ++i) CHECK(dest.revenue.values[i] <= base.revenue.values[i] + 1e-12);
    CHECK(dest.revenue.values[0] < base.revenue.values[0]);
    CHECK(dest.revenue.values[3] == doctest::Approx(base.revenue.values[3]));
  }

  TEST_CASE("scenarios run concurrently in input order") {
    const auto b = fixture();
    std::vector<Scenario> sc;
    for (auto n : {ScenarioName::total, ScenarioName::baseline, ScenarioName::destruction}) sc.push_back(preset(n));
    const auto res = run_scenarios(sc, b, config());
    REQUIRE(res.size() == 3);
    CHECK(res[0].scenario.name == ScenarioName::total);
    CHECK(res[1].scenario.name == ScenarioName::baseline);
    std::ostringstream out;
    write_scenario_report(out, res);
    CHECK(out.str().rfind("scenario,stat,value,relative_to_baseline", 0) == 0);
    CHECK(out.str().find("\nbaseline,median,") != std::string::npos);
    CHECK(out.str().find("baseline,mean,") != std::string::npos);
  }

  TEST_CASE("balanced sample drops firms missing a year") {
    auto b = fixture();
    b.accounting.erase(std::remove_if(b.accounting.begin(), b.accounting.end(),
                                      [](const AccountingRecord& r) { return r.firm_id == "D" && r.year == 2014; }),
                       b.accounting.end());
    const auto bal = scenario_sample(b, {2013, 2014}, SampleRule::balanced);
    CHECK(bal.firms == std::vector<std::string>{"A", "B", "C"});
    const auto all = scenario_sample(b, {2013, 2014}, SampleRule::all_firms_with_zeros);
    CHECK(all.firms.size() == 4);
    CHECK(all.sales.at(2014)[3] == 0);
    CHECK(all.reported == std::vector<char>{1, 1, 0, 1});
  }

  TEST_CASE("dynamics pin demand at the first year") {
    const auto b = fixture();
    const auto dyn = run_dynamics(b, {2013, 2014}, config());
    REQUIRE(dyn.years.size() == 2);
    CHECK(dyn.years[0].counterfactual.median == doctest::Approx(dyn.years[0].observed.median));
    std::ostringstream out;
    write_dynamics(out, dyn);
    CHECK(out.str().rfind("year,series,stat,value,relative_to_baseline", 0) == 0);
  }

  TEST_CASE("regional aggregation conserves totals") {
    const auto b = fixture();
    std::vector<TransactionRecord> recs = {
        tx("2013-02-01", "C", "A", "RC", "R1", 600), tx("2013-02-01", "B", "A", "R2", "R1", 400),
        tx("2013-03-01", "A", "B", "R1", "R2", 500), tx("2014-05-01", "B", "A", "R2", "R1", 900)};
    const auto res = aggregate_regions(b.accounting, recs, b.firms, RegionLevel::province, {2013, 2014}, config());
    CHECK(res.regions == std::vector<std::string>{"P1", "P2", "PC"});
    for (int year : {2013, 2014}) {
      double sum_obs = 0, total_obs = -1;
      for (const auto& r : res.rows) {
        if (r.year != year) continue;
        if (r.region_id == kCountryTotalId) {
          total_obs = r.observed;
        } else {
          sum_obs += r.observed;
        }
      }
      CHECK(total_obs == doctest::Approx(sum_obs));
    }
    // Base year: the counterfactual reproduces observed revenue.
    for (const auto& r : res.rows) {
      if (r.year == 2013) CHECK(r.counterfactual == doctest::Approx(r.observed).epsilon(1e-10));
    }
    std::ostringstream out;
    write_region_report(out, res);
    CHECK(out.str().rfind("region_id,year,observed,counterfactual,relative", 0) == 0);
  }
}
