#include <doctest.h>

#include <cmath>

#include "netshock/error.hpp"
#include "netshock/synth.hpp"

using namespace netshock;

namespace {

SyntheticEconomyConfig small(std::uint64_t seed) {
  SyntheticEconomyConfig c;
  c.seed = seed;
  c.n_firms = 120;
  return c;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("seed is mandatory and values are validated") {
    CHECK_THROWS_AS(SyntheticEconomyConfig::from_config(KeyValueConfig::parse("n_firms = 10\n")), Error);
    const auto c = SyntheticEconomyConfig::from_config(KeyValueConfig::parse("seed = 3\nn_firms = 50\n"));
    CHECK(c.seed == 3);
    CHECK(c.n_firms == 50);
    auto bad = small(1);
    bad.alpha = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("economy satisfies the revenue identity") {
    const auto eco = generate_economy(small(1));
    CHECK(eco.firms.size() == 120);
    for (double s : eco.io.omega.column_sums()) CHECK(s <= 1.0 + 1e-12);
    std::vector<double> om(eco.io.size(), 0.0);
    eco.io.omega.multiply(eco.revenue.values, om, 1.0 - eco.config.alpha);
    for (std::size_t i = 0; i < om.size(); ++i) {
      CHECK(eco.revenue.values[i] == doctest::Approx(om[i] + eco.demand.values[i]).epsilon(1e-10));
    }
    CHECK_FALSE(eco.conflict_firms().empty());
  }

  TEST_CASE("structural mode satisfies the equilibrium conditions") {
    auto c = small(2);
    c.structural = true;
    const auto eco = generate_economy(c);
    REQUIRE(eco.structural.has_value());
    const auto r = check_structural(eco);
    CHECK(r.labor_foc < 1e-10);
    CHECK(r.input_foc < 1e-10);
    CHECK(r.price_cost < 1e-9);
    CHECK(r.goods_clearing < 1e-9);
    CHECK(r.labor_clearing < 1e-10);
    CHECK(r.revenue_identity < 1e-10);
  }

  TEST_CASE("same seed, same data; different seed, different data") {
    const auto a = emit_transactions(generate_economy(small(5)));
    const auto b = emit_transactions(generate_economy(small(5)));
    const auto c = emit_transactions(generate_economy(small(6)));
    REQUIRE(a.transactions.size() == b.transactions.size());
    for (std::size_t i = 0; i < a.transactions.size(); ++i) {
      CHECK(a.transactions[i].weight_kg == b.transactions[i].weight_kg);
      CHECK(a.transactions[i].date == b.transactions[i].date);
    }
    REQUIRE(a.accounting.size() == b.accounting.size());
    for (std::size_t i = 0; i < a.accounting.size(); ++i) CHECK(a.accounting[i].sales == b.accounting[i].sales);
    CHECK(a.transactions.size() != c.transactions.size());
  }

  TEST_CASE("beta1 = -1 shuts down conflict links after the event") {
    auto cfg = small(7);
    cfg.beta1 = -1.0;
    const auto eco = generate_economy(cfg);
    const auto data = emit_transactions(eco);
    const FirmTable firms(data.firms);
    std::size_t pre_conflict = 0;
    for (const auto& t : data.transactions) {
      const bool conflict = firms.is_conflict_rayon(t.sender_rayon_id) || firms.is_conflict_rayon(t.receiver_rayon_id);
      if (!conflict) continue;
      if (year_month_of(t.date) >= cfg.event) {
        FAIL("conflict link shipped after the event");
      } else {
        ++pre_conflict;
      }
    }
    CHECK(pre_conflict > 0);
    CHECK(data.truth.beta1 == -1.0);
  }

  TEST_CASE("planted accounting follows the centrality change") {
    const auto eco = generate_economy(small(8));
    PlantedTruth truth;
    const auto acc = plant_centrality_effect(eco, 0.145, &truth);
    CHECK(truth.centrality_effect == 0.145);
    CHECK(truth.centrality.firm_ids.size() == truth.centrality.standardized.size());
    CHECK_FALSE(acc.empty());
    for (const auto& r : acc) {
      CHECK(r.sales >= 0);
      CHECK(r.total_costs == doctest::Approx(r.sales - r.profits));
    }
    const auto again = plant_centrality_effect(eco, 0.145);
    REQUIRE(again.size() == acc.size());
    CHECK(again.front().sales == acc.front().sales);
  }
}
