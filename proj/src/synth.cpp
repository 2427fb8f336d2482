#include "netshock/synth.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <random>
#include <set>

#include "netshock/error.hpp"

namespace netshock {

namespace {

// Independent, reproducible stream per purpose.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

enum Purpose : std::uint64_t { kNetwork = 1, kDemand, kGeography, kPrices, kShipments, kAccounting };

std::string padded(char prefix, std::size_t value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

std::string province_id(int p) { return padded('P', static_cast<std::size_t>(p + 1), 2); }
std::string rayon_id(int p, int r) { return province_id(p) + padded('R', static_cast<std::size_t>(r + 1), 2); }

}  // namespace

void SyntheticEconomyConfig::validate() const {
  if (n_firms < 2) throw Error(ErrorCategory::domain, "synthetic economy needs at least two firms");
  if (!(alpha > 0 && alpha <= 1)) throw Error(ErrorCategory::domain, "alpha must lie in (0, 1]");
  if (n_provinces < 2 || rayons_per_province < 1) throw Error(ErrorCategory::domain, "invalid region layout");
  if (conflict_provinces < 1 || conflict_provinces >= n_provinces) {
    throw Error(ErrorCategory::domain, "conflict provinces must be a nonempty proper subset");
  }
  if (!(mean_suppliers >= 1)) throw Error(ErrorCategory::domain, "mean_suppliers must be at least 1");
  if (!(no_input_share >= 0 && no_input_share < 1)) throw Error(ErrorCategory::domain, "no_input_share outside [0, 1)");
  if (!(base_prob_low >= 0 && base_prob_low <= base_prob_high && base_prob_high <= 1)) {
    throw Error(ErrorCategory::domain, "shipment probabilities must satisfy 0 <= low <= high <= 1");
  }
  if (first_year > last_year || accounting_first_year > accounting_last_year) {
    throw Error(ErrorCategory::domain, "empty year range");
  }
  if (!(demand_scale > 0) || demand_sigma < 0 || extra_shipments_mean < 0 || !(weight_scale > 0) ||
      sales_noise < 0 || year_effect_sd < 0 || labor_noise < 0) {
    throw Error(ErrorCategory::domain, "scales and noise levels must be non-negative");
  }
}

SyntheticEconomyConfig SyntheticEconomyConfig::from_config(const KeyValueConfig& cfg) {
  SyntheticEconomyConfig c;
  if (!cfg.has("seed")) throw Error(ErrorCategory::usage, "synthetic economy config requires a seed");
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  c.n_firms = static_cast<std::size_t>(cfg.get_int("n_firms", static_cast<long long>(c.n_firms)));
  c.mean_suppliers = cfg.get_double("mean_suppliers", c.mean_suppliers);
  const auto att = cfg.get_string("attachment", "preferential");
  if (att == "preferential") {
    c.attachment = Attachment::preferential;
  } else if (att == "uniform") {
    c.attachment = Attachment::uniform;
  } else {
    throw Error(ErrorCategory::usage, "unknown attachment '" + att + "'");
  }
  c.no_input_share = cfg.get_double("no_input_share", c.no_input_share);
  c.alpha = cfg.get_double("alpha", c.alpha);
  c.structural = cfg.get_bool("structural", c.structural);
  c.n_provinces = static_cast<int>(cfg.get_int("n_provinces", c.n_provinces));
  c.rayons_per_province = static_cast<int>(cfg.get_int("rayons_per_province", c.rayons_per_province));
  c.conflict_provinces = static_cast<int>(cfg.get_int("conflict_provinces", c.conflict_provinces));
  c.demand_scale = cfg.get_double("demand_scale", c.demand_scale);
  c.demand_sigma = cfg.get_double("demand_sigma", c.demand_sigma);
  c.first_year = static_cast<int>(cfg.get_int("first_year", c.first_year));
  c.last_year = static_cast<int>(cfg.get_int("last_year", c.last_year));
  if (auto e = cfg.get("post_start")) c.event = parse_year_month(*e);
  c.beta1 = cfg.get_double("beta1", c.beta1);
  c.beta2 = cfg.get_double("beta2", c.beta2);
  c.base_prob_low = cfg.get_double("base_prob_low", c.base_prob_low);
  c.base_prob_high = cfg.get_double("base_prob_high", c.base_prob_high);
  c.extra_shipments_mean = cfg.get_double("extra_shipments_mean", c.extra_shipments_mean);
  c.weight_scale = cfg.get_double("weight_scale", c.weight_scale);
  c.accounting_first_year = static_cast<int>(cfg.get_int("accounting_first_year", c.accounting_first_year));
  c.accounting_last_year = static_cast<int>(cfg.get_int("accounting_last_year", c.accounting_last_year));
  c.centrality_effect = cfg.get_double("centrality_effect", c.centrality_effect);
  if (auto k = cfg.get("centrality_kind")) c.centrality_kind = parse_centrality_kind(*k);
  c.sales_noise = cfg.get_double("sales_noise", c.sales_noise);
  c.year_effect_sd = cfg.get_double("year_effect_sd", c.year_effect_sd);
  c.labor_noise = cfg.get_double("labor_noise", c.labor_noise);
  c.validate();
  return c;
}

std::unordered_set<std::string> SyntheticEconomy::conflict_firms() const {
  std::unordered_set<std::string> out;
  for (const auto& f : firms) {
    if (f.conflict_flag) out.insert(f.firm_id);
  }
  return out;
}

SyntheticEconomy generate_economy(const SyntheticEconomyConfig& config) {
  config.validate();
  const std::size_t n = config.n_firms;
  SyntheticEconomy eco;
  eco.config = config;

  // Geography: uniform rayon per firm; keep the conflict subset nonempty and proper.
  {
    auto rng = stream(config.seed, kGeography);
    std::uniform_int_distribution<int> pick_p(0, config.n_provinces - 1);
    std::uniform_int_distribution<int> pick_r(0, config.rayons_per_province - 1);
    std::vector<int> prov(n);
    for (auto& p : prov) p = pick_p(rng);
    auto in_conflict = [&](int p) { return p < config.conflict_provinces; };
    if (std::none_of(prov.begin(), prov.end(), in_conflict)) prov[0] = 0;
    if (std::all_of(prov.begin(), prov.end(), in_conflict)) prov[n - 1] = config.n_provinces - 1;
    eco.firms.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& f = eco.firms[i];
      f.firm_id = padded('F', i + 1, 6);
      f.province_id = province_id(prov[i]);
      f.rayon_id = rayon_id(prov[i], pick_r(rng));
      f.conflict_flag = in_conflict(prov[i]);
    }
  }

  // Network: supplier counts 1 + Poisson(mean - 1); preferential attachment draws
  // suppliers from an urn holding every firm once plus once per supplier link.
  std::vector<Triplet> triplets;
  {
    auto rng = stream(config.seed, kNetwork);
    std::poisson_distribution<int> extra(config.mean_suppliers - 1.0);
    std::bernoulli_distribution no_inputs(config.structural ? 0.0 : config.no_input_share);
    std::exponential_distribution<double> share(1.0);
    std::vector<std::uint32_t> urn(n);
    std::iota(urn.begin(), urn.end(), 0u);
    std::vector<std::uint32_t> chosen;
    std::vector<double> w;
    for (std::size_t i = 0; i < n; ++i) {
      if (no_inputs(rng)) continue;
      const std::size_t k = std::min<std::size_t>(n - 1, 1 + static_cast<std::size_t>(extra(rng)));
      chosen.clear();
      while (chosen.size() < k) {
        std::uint32_t j;
        if (config.attachment == Attachment::preferential) {
          j = urn[std::uniform_int_distribution<std::size_t>(0, urn.size() - 1)(rng)];
        } else {
          j = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
        }
        if (j == i || std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
        chosen.push_back(j);
      }
      w.resize(k);
      double total = 0;
      for (auto& v : w) total += (v = share(rng) + 1e-3);
      for (std::size_t m = 0; m < k; ++m) {
        triplets.push_back({chosen[m], static_cast<std::uint32_t>(i), w[m] / total});
        if (config.attachment == Attachment::preferential) urn.push_back(chosen[m]);
      }
    }
  }
  const int base_year = config.event.year - 1;
  eco.io.year = base_year;
  for (const auto& f : eco.firms) eco.io.firms.push_back(f.firm_id);
  eco.io.omega = SparseMatrix::from_triplets(n, n, std::move(triplets));

  {
    auto rng = stream(config.seed, kDemand);
    std::lognormal_distribution<double> demand(std::log(config.demand_scale), config.demand_sigma);
    eco.demand.year = base_year;
    eco.demand.values.resize(n);
    for (auto& v : eco.demand.values) v = demand(rng);
  }

  EconomyConfig solver;
  solver.alpha = config.alpha;
  solver.tol = 1e-14;
  solver.max_iter = 100000;
  auto sol = solve_revenue(eco.io, eco.demand, solver);
  eco.revenue = std::move(sol.revenue);
  eco.revenue.year = base_year;

  if (config.structural) {
    auto rng = stream(config.seed, kPrices);
    std::uniform_real_distribution<double> price(0.5, 2.0);
    StructuralPrimitives s;
    const double a = config.alpha;
    s.p.resize(n);
    for (auto& v : s.p) v = price(rng);
    s.l.resize(n);
    s.x.resize(n);
    s.c.resize(n);
    s.z.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.l[i] = a * eco.revenue.values[i] / s.w;
      s.x[i] = eco.revenue.values[i] / s.p[i];
      s.c[i] = eco.demand.values[i] / s.p[i];
      s.total_labor += s.l[i];
    }
    // log of prod_j x_ji^a_ji for each buyer i; rows of omega are suppliers.
    std::vector<double> log_bundle(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto cols = eco.io.omega.row_indices(j);
      const auto vals = eco.io.omega.row_values(j);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const std::size_t i = cols[k];
        const double x_ji = (1 - a) * vals[k] * eco.revenue.values[i] / s.p[j];
        log_bundle[i] += vals[k] * std::log(x_ji);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      s.z[i] = std::exp(std::log(s.x[i]) - a * std::log(s.l[i]) - (1 - a) * log_bundle[i]);
    }
    eco.structural = std::move(s);
  }
  return eco;
}

StructuralResiduals check_structural(const SyntheticEconomy& eco) {
  if (!eco.structural) throw Error(ErrorCategory::domain, "economy was not generated in structural mode");
  const auto& s = *eco.structural;
  const double a = eco.config.alpha;
  const std::size_t n = eco.firms.size();
  const auto& r = eco.revenue.values;
  auto rel = [](double lhs, double rhs) { return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300}); };

  StructuralResiduals out;
  std::vector<double> input_demand(n, 0.0);  // sum_i x_ji per supplier j
  std::vector<double> log_unit_input(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto cols = eco.io.omega.row_indices(j);
    const auto vals = eco.io.omega.row_values(j);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::size_t i = cols[k];
      const double x_ji = (1 - a) * vals[k] * s.p[i] * s.x[i] / s.p[j];
      out.input_foc = std::max(out.input_foc, rel(s.p[j] * x_ji, (1 - a) * vals[k] * s.p[i] * s.x[i]));
      input_demand[j] += x_ji;
      log_unit_input[i] += vals[k] * std::log(s.p[j] / vals[k]);
    }
  }
  double labor = 0;
  std::vector<double> implied(n);
  eco.io.omega.multiply(r, implied, 1 - a);
  for (std::size_t i = 0; i < n; ++i) {
    out.labor_foc = std::max(out.labor_foc, rel(s.w * s.l[i], a * s.p[i] * s.x[i]));
    out.goods_clearing = std::max(out.goods_clearing, rel(s.x[i], s.c[i] + input_demand[i]));
    const double log_cost = -std::log(s.z[i]) + a * std::log(s.w / a) +
                            (a < 1 ? (1 - a) * (log_unit_input[i] - std::log(1 - a)) : 0.0);
    out.price_cost = std::max(out.price_cost, rel(s.p[i], std::exp(log_cost)));
    out.revenue_identity = std::max(out.revenue_identity, rel(r[i], implied[i] + eco.demand.values[i]));
    labor += s.l[i];
  }
  out.labor_clearing = rel(s.total_labor, labor);
  return out;
}

PredictedCentralityChange economy_centrality_change(const SyntheticEconomy& eco) {
  std::vector<Flow> flows;
  for (const auto& t : eco.io.omega.triplets()) {
    const auto& from = eco.firms[t.row];
    const auto& to = eco.firms[t.col];
    if (from.conflict_flag && to.conflict_flag) continue;
    flows.push_back({from.firm_id, to.firm_id, t.value});
  }
  const auto graph = TradeGraph::from_flows(flows, eco.io.firms);
  return predicted_centrality_change(graph, eco.conflict_firms(), eco.config.centrality_kind);
}

std::vector<AccountingRecord> plant_centrality_effect(const SyntheticEconomy& eco, double effect,
                                                      PlantedTruth* truth) {
  const auto& cfg = eco.config;
  const auto change = economy_centrality_change(eco);
  std::unordered_map<std::string, double> z;
  for (std::size_t k = 0; k < change.firm_ids.size(); ++k) z[change.firm_ids[k]] = change.standardized[k];

  auto rng = stream(cfg.seed, kAccounting);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> margin(-0.05, 0.15);
  const int base_year = cfg.event.year - 1;
  std::vector<double> year_effects;
  for (int y = cfg.accounting_first_year; y <= cfg.accounting_last_year; ++y) {
    const double g = cfg.year_effect_sd * normal(rng);
    year_effects.push_back(y == base_year ? 0.0 : g);
  }

  std::vector<AccountingRecord> out;
  for (std::size_t i = 0; i < eco.firms.size(); ++i) {
    const auto& id = eco.firms[i].firm_id;
    auto it = z.find(id);
    const double dz = it == z.end() ? 0.0 : it->second;
    for (int y = cfg.accounting_first_year; y <= cfg.accounting_last_year; ++y) {
      const double post = y >= cfg.event.year ? 1.0 : 0.0;
      const double log_sales = std::log1p(eco.revenue.values[i]) + year_effects[y - cfg.accounting_first_year] +
                               effect * dz * post + cfg.sales_noise * normal(rng);
      AccountingRecord rec;
      rec.firm_id = id;
      rec.year = y;
      rec.sales = std::expm1(log_sales);
      rec.profits = margin(rng) * rec.sales;
      rec.total_costs = rec.sales - rec.profits;
      out.push_back(std::move(rec));
    }
  }
  if (truth) {
    truth->centrality_effect = effect;
    truth->centrality = change;
    truth->year_effects = std::move(year_effects);
  }
  return out;
}

SyntheticData emit_transactions(const SyntheticEconomy& eco) {
  const auto& cfg = eco.config;
  const std::size_t n = eco.firms.size();
  SyntheticData data;
  data.firms = eco.firms;
  data.truth.beta1 = cfg.beta1;
  data.truth.beta2 = cfg.beta2;

  const auto links = eco.io.omega.triplets();  // row = supplier, col = buyer
  std::vector<char> conflict(n);
  for (std::size_t i = 0; i < n; ++i) conflict[i] = eco.firms[i].conflict_flag ? 1 : 0;
  // Every link is a preconflict tie; links inside the conflict area never reach the data.
  std::vector<char> tied_to_conflict(n, 0);
  for (const auto& t : links) {
    if (conflict[t.row] && conflict[t.col]) continue;
    if (conflict[t.row]) tied_to_conflict[t.col] = 1;
    if (conflict[t.col]) tied_to_conflict[t.row] = 1;
  }

  auto rng = stream(cfg.seed, kShipments);
  std::uniform_real_distribution<double> base_prob(cfg.base_prob_low, cfg.base_prob_high);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  std::uniform_int_distribution<int> day(1, 28);
  std::poisson_distribution<int> extra(cfg.extra_shipments_mean > 0 ? cfg.extra_shipments_mean : 1.0);

  const YearMonth start{cfg.first_year, 1};
  const int n_months = months_between(start, {cfg.last_year, 12});
  for (const auto& t : links) {
    const auto& sender = eco.firms[t.row];
    const auto& receiver = eco.firms[t.col];
    const bool c = conflict[t.row] || conflict[t.col];
    const bool pc = !c && (tied_to_conflict[t.row] || tied_to_conflict[t.col]);
    const double base = base_prob(rng);
    const double shift = (c ? cfg.beta1 : 0.0) + (pc ? cfg.beta2 : 0.0);
    const double mean_weight =
        cfg.weight_scale * t.value * eco.revenue.values[t.col] / ((1.0 + cfg.extra_shipments_mean) * std::max(base, 1e-3));
    for (int m = 0; m < n_months; ++m) {
      const YearMonth ym = start.plus(m);
      const double p = m == 0 ? 1.0 : std::clamp(base + (ym >= cfg.event ? shift : 0.0), 0.0, 1.0);
      if (!(unit(rng) < p)) continue;
      const int count = 1 + (cfg.extra_shipments_mean > 0 ? extra(rng) : 0);
      for (int s = 0; s < count; ++s) {
        TransactionRecord rec;
        rec.date = {ym.year, ym.month, day(rng)};
        rec.sender_firm_id = sender.firm_id;
        rec.receiver_firm_id = receiver.firm_id;
        rec.sender_rayon_id = sender.rayon_id;
        rec.receiver_rayon_id = receiver.rayon_id;
        rec.weight_kg = std::max<std::int64_t>(1, std::llround(mean_weight * jitter(rng)));
        data.transactions.push_back(std::move(rec));
      }
    }
  }
  std::stable_sort(data.transactions.begin(), data.transactions.end(),
                   [](const TransactionRecord& a, const TransactionRecord& b) { return a.date < b.date; });

  data.accounting = plant_centrality_effect(eco, cfg.centrality_effect, &data.truth);
  auto rng_labor = stream(cfg.seed, kAccounting + 100);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& a : data.accounting) {
    const double noise = cfg.labor_noise > 0 ? std::exp(cfg.labor_noise * normal(rng_labor)) : 1.0;
    data.labor_costs.push_back({a.firm_id, a.year, a.sales, cfg.alpha * a.sales * noise});
  }
  return data;
}

}  // namespace netshock
