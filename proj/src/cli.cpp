#include "netshock/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "netshock/counterfactual.hpp"
#include "netshock/csv.hpp"
#include "netshock/default_config.hpp"
#include "netshock/econometrics.hpp"
#include "netshock/error.hpp"
#include "netshock/graph.hpp"
#include "netshock/ingest.hpp"
#include "netshock/kv_config.hpp"
#include "netshock/leontief.hpp"
#include "netshock/parallel.hpp"
#include "netshock/synth.hpp"

namespace netshock::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::string& category) {
  static const std::map<std::string, int> codes = {
      {"usage", 2},       {"io", 3},     {"parse", 4},       {"schema", 5},    {"referential", 6},
      {"dimension", 7},   {"domain", 8}, {"convergence", 9}, {"singular", 10},
  };
  auto it = codes.find(category);
  return it == codes.end() ? 1 : it->second;
}

namespace {

struct Options {
  std::string input;
  std::string output;
  std::string config;
  std::optional<long long> seed;
  int threads = 0;
  std::string preset;
  std::optional<double> alpha;
  std::string window_start;
  std::string window_end;
  std::string post_start;
  bool strict = false;
  bool lenient = false;
  std::string spec;
  std::optional<int> year;
  std::string kind;
  std::string level;
  std::string sample;
};

class Context {
 public:
  Context(std::string command, Options opt) : command_(std::move(command)), opt_(std::move(opt)) {
    cfg_ = KeyValueConfig::parse(kDefaultConfig);
    std::string path = opt_.config;
    if (path.empty()) {
      if (const char* env = std::getenv("NETSHOCK_CONFIG"); env && *env) path = env;
    }
    if (!path.empty()) {
      cfg_.merge(KeyValueConfig::load(path));
      config_path_ = path;
    }
    if (opt_.seed) cfg_.set("seed", std::to_string(*opt_.seed));
    if (opt_.alpha) cfg_.set("alpha", csv::format_double(*opt_.alpha));
    if (!opt_.window_start.empty()) cfg_.set("window_start", opt_.window_start);
    if (!opt_.window_end.empty()) cfg_.set("window_end", opt_.window_end);
    if (!opt_.post_start.empty()) cfg_.set("post_start", opt_.post_start);
    if (opt_.strict && opt_.lenient) throw Error(ErrorCategory::usage, "--strict and --lenient are exclusive");
    if (opt_.strict) cfg_.set("strict", "true");
    if (opt_.lenient) cfg_.set("strict", "false");
    if (!opt_.kind.empty()) cfg_.set("centrality_kind", opt_.kind);
    if (!opt_.level.empty()) cfg_.set("level", opt_.level);
    if (!opt_.sample.empty()) cfg_.set("sample", opt_.sample);
    if (opt_.output.empty()) throw Error(ErrorCategory::usage, "--output is required");
    fs::create_directories(opt_.output);
  }

  const Options& opt() const { return opt_; }
  const KeyValueConfig& cfg() const { return cfg_; }

  std::string input_file(const std::string& name) const {
    if (opt_.input.empty()) throw Error(ErrorCategory::usage, "--input is required for " + command_);
    return (fs::path(opt_.input) / name).string();
  }
  bool has_input(const std::string& name) const {
    return !opt_.input.empty() && fs::exists(fs::path(opt_.input) / name);
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto path = (fs::path(opt_.output) / name).string();
    auto out = csv::open_output(path);
    body(out);
    out.flush();
    if (!out) throw Error(ErrorCategory::io, "failed writing " + path);
    outputs_.push_back(name);
  }

  template <class F>
  auto timed(const std::string& stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timings_[stage] += seconds_since(t0);
    } else {
      auto result = f();
      timings_[stage] += seconds_since(t0);
      return result;
    }
  }

  void note(const std::string& key, json value) { notes_[key] = std::move(value); }

  void write_manifest(double wall_seconds) {
    json m;
    m["command"] = command_;
    m["version"] = NETSHOCK_VERSION;
    m["seed"] = cfg_.has("seed") ? json(cfg_.get_int("seed", 0)) : json(nullptr);
    m["input"] = opt_.input;
    m["output"] = opt_.output;
    m["config_file"] = config_path_;
    m["config"] = cfg_.values();
    auto files = outputs_;
    std::sort(files.begin(), files.end());
    m["outputs"] = files;
    if (!notes_.empty()) m["notes"] = notes_;
    json runtime;
    runtime["threads"] = thread_count();
    runtime["wall_seconds"] = wall_seconds;
    runtime["stages"] = timings_;
    m["runtime"] = runtime;
    const auto path = (fs::path(opt_.output) / "manifest.json").string();
    auto out = csv::open_output(path);
    out << m.dump(2) << '\n';
  }

  // Shared loaders ----------------------------------------------------------

  FirmTable firm_table() {
    auto list = cfg_.get_list("conflict_rayons");
    return timed("load", [&] {
      return FirmTable(load_firms(input_file("firms.csv")), std::set<std::string>(list.begin(), list.end()));
    });
  }

  IngestOptions ingest_options() const {
    IngestOptions o;
    o.window_start = parse_date(cfg_.get_string("window_start", "2013-01-01"));
    o.window_end = parse_date(cfg_.get_string("window_end", "2016-12-31"));
    o.strict = cfg_.get_bool("strict", true);
    auto foreign = cfg_.get_list("foreign_rayons");
    o.foreign_rayons = {foreign.begin(), foreign.end()};
    o.exclude_international = cfg_.get_bool("exclude_international", false);
    return o;
  }

  TransactionLoad transactions(const FirmTable& firms) {
    return timed("load", [&] { return load_transactions(input_file("transactions.csv"), firms, ingest_options()); });
  }

  std::vector<AccountingRecord> accounting() {
    return timed("load", [&] { return load_accounting(input_file("accounting.csv"), cfg_.get_bool("strict", true)); });
  }

  EconomyConfig economy() const {
    auto e = EconomyConfig::from_config(cfg_);
    e.validate();
    return e;
  }

  int pre_year() const { return static_cast<int>(cfg_.get_int("pre_year", 2013)); }
  int post_year() const { return static_cast<int>(cfg_.get_int("post_year", 2014)); }

  std::vector<int> years() const {
    std::vector<int> out;
    for (const auto& y : cfg_.get_list("years")) {
      out.push_back(static_cast<int>(csv::parse_int(y, 0, "years")));
    }
    if (out.empty()) throw Error(ErrorCategory::usage, "config key 'years' is empty");
    return out;
  }

  FeOlsOptions fe_options() const {
    FeOlsOptions o;
    o.demean_tol = cfg_.get_double("demean_tol", o.demean_tol);
    o.max_sweeps = static_cast<int>(cfg_.get_int("max_sweeps", o.max_sweeps));
    return o;
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  std::string command_;
  Options opt_;
  KeyValueConfig cfg_;
  std::string config_path_;
  std::vector<std::string> outputs_;
  std::map<std::string, double> timings_;
  json notes_ = json::object();
};

void write_key_values(std::ostream& out, const std::vector<std::string>& header,
                      const std::vector<std::pair<std::string, double>>& rows) {
  csv::Writer w(out, header);
  for (const auto& [k, v] : rows) {
    w.field(k).field(v);
    w.end_row();
  }
}

void write_regression_summary(std::ostream& out, const RegressionResult& r) {
  write_key_values(out, {"stat", "value"},
                   {{"n", static_cast<double>(r.n)},
                    {"clusters", static_cast<double>(r.n_clusters)},
                    {"r2", r.r2},
                    {"r2_within", r.r2_within},
                    {"dropped_singletons", static_cast<double>(r.dropped_singletons)},
                    {"absorbed_dof", static_cast<double>(r.absorbed_dof)},
                    {"demean_sweeps", static_cast<double>(r.demean.sweeps)},
                    {"demean_max_group_mean", r.demean.max_group_mean}});
}

std::vector<std::string> firm_universe(const FirmTable& firms) {
  std::vector<std::string> ids;
  for (const auto& f : firms.records()) ids.push_back(f.firm_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::unordered_set<std::string> conflict_ids(const FirmTable& firms) {
  auto ids = firms.conflict_firm_ids();
  return {ids.begin(), ids.end()};
}

CentralityTransform parse_transform(const std::string& s) {
  if (s == "none") return CentralityTransform::none;
  if (s == "log1p") return CentralityTransform::log1p;
  throw Error(ErrorCategory::usage, "unknown centrality transform '" + s + "'");
}

PredictedCentralityChange centrality_change(Context& ctx, const FirmTable& firms,
                                            const std::vector<TransactionRecord>& records) {
  const auto& cfg = ctx.cfg();
  const int year = ctx.pre_year();
  EigenvectorOptions eo;
  eo.tol = cfg.get_double("eigen_tol", eo.tol);
  eo.max_iter = static_cast<int>(cfg.get_int("eigen_max_iter", eo.max_iter));
  const auto kind = parse_centrality_kind(cfg.get_string("centrality_kind", "eigenvector"));
  const auto transform = parse_transform(cfg.get_string("centrality_transform", "none"));
  return ctx.timed("centrality", [&] {
    const auto graph = TradeGraph::from_flows(build_yearly_flows(records, firms, year), firm_universe(firms));
    return predicted_centrality_change(graph, conflict_ids(firms), kind, transform, eo);
  });
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_simulate(Context& ctx) {
  if (!ctx.cfg().has("seed")) throw Error(ErrorCategory::usage, "simulate requires --seed (or a seed config key)");
  const auto sc = SyntheticEconomyConfig::from_config(ctx.cfg());
  const auto eco = ctx.timed("generate", [&] { return generate_economy(sc); });
  const auto data = ctx.timed("emit", [&] { return emit_transactions(eco); });
  ctx.timed("write", [&] {
    ctx.write("firms.csv", [&](std::ostream& o) { write_firms(o, data.firms); });
    ctx.write("transactions.csv", [&](std::ostream& o) { write_transactions(o, data.transactions); });
    ctx.write("accounting.csv", [&](std::ostream& o) { write_accounting(o, data.accounting); });
    ctx.write("labor_costs.csv", [&](std::ostream& o) { write_labor_costs(o, data.labor_costs); });
    ctx.write("economy_omega.csv", [&](std::ostream& o) { write_io_matrix(o, eco.io); });
    ctx.write("economy_demand.csv", [&](std::ostream& o) { write_firm_vector(o, eco.io.firms, eco.demand.values); });
    ctx.write("economy_revenue.csv",
              [&](std::ostream& o) { write_firm_vector(o, eco.io.firms, eco.revenue.values); });
    ctx.write("planted_centrality.csv", [&](std::ostream& o) { write_centrality(o, data.truth.centrality); });
    ctx.write("planted.csv", [&](std::ostream& o) {
      write_key_values(o, {"parameter", "value"},
                       {{"beta1", data.truth.beta1},
                        {"beta2", data.truth.beta2},
                        {"centrality_effect", data.truth.centrality_effect},
                        {"alpha", sc.alpha}});
    });
  });
  ctx.note("transactions", data.transactions.size());
}

void cmd_ingest(Context& ctx) {
  const auto firms = ctx.firm_table();
  const auto load = ctx.transactions(firms);
  const auto accounting = ctx.accounting();
  ctx.timed("write", [&] {
    ctx.write("transactions.csv", [&](std::ostream& o) { write_transactions(o, load.records); });
    ctx.write("firms.csv", [&](std::ostream& o) { write_firms(o, firms.records()); });
    ctx.write("accounting.csv", [&](std::ostream& o) { write_accounting(o, accounting); });
    if (ctx.has_input("labor_costs.csv")) {
      auto in = csv::open_input(ctx.input_file("labor_costs.csv"));
      const auto labor = parse_labor_costs(in);
      ctx.write("labor_costs.csv", [&](std::ostream& o) { write_labor_costs(o, labor); });
    }
    const auto& r = load.report;
    ctx.write("ingest_report.csv", [&](std::ostream& o) {
      write_key_values(o, {"counter", "value"},
                       {{"rows_read", static_cast<double>(r.rows_read)},
                        {"kept", static_cast<double>(r.kept)},
                        {"malformed_skipped", static_cast<double>(r.malformed_skipped)},
                        {"first_malformed_line", static_cast<double>(r.first_malformed_line)},
                        {"conflict_internal_excluded", static_cast<double>(r.conflict_internal_excluded)},
                        {"out_of_window", static_cast<double>(r.out_of_window)},
                        {"zero_weight", static_cast<double>(r.zero_weight)},
                        {"international_excluded", static_cast<double>(r.international_excluded)}});
    });
  });
}

TradePanel flagged_panel(Context& ctx, const FirmTable& firms, const std::vector<TransactionRecord>& records) {
  const auto& cfg = ctx.cfg();
  PanelOptions po;
  po.start = parse_year_month(cfg.get_string("panel_start", "2013-01"));
  po.end = parse_year_month(cfg.get_string("panel_end", "2016-12"));
  po.post_start = parse_year_month(cfg.get_string("post_start", "2014-03"));
  po.include_post_entrants = cfg.get_bool("include_post_entrants", true);
  TreatmentOptions to;
  to.preconflict_start = parse_year_month(cfg.get_string("preconflict_start", "2013-01"));
  to.preconflict_end = parse_year_month(cfg.get_string("preconflict_end", "2014-02"));
  to.firm_level = cfg.get_bool("firm_level", false);
  return ctx.timed("panel", [&] { return assign_treatment_flags(build_trade_panel(records, firms, po), firms, to); });
}

void cmd_panel(Context& ctx) {
  const auto firms = ctx.firm_table();
  const auto load = ctx.transactions(firms);
  const auto panel = flagged_panel(ctx, firms, load.records);
  ctx.timed("write", [&] {
    ctx.write("pairs.csv", [&](std::ostream& o) {
      csv::Writer w(o, {"pair", "origin_firm_id", "origin_rayon_id", "destination_firm_id", "destination_rayon_id",
                        "first_active_month", "conflict", "partner_conflict", "buyer_conflict", "supplier_conflict",
                        "partner_buyer_conflict", "partner_supplier_conflict", "both_conflict",
                        "origin_partners_pre", "destination_partners_pre"});
      for (std::size_t p = 0; p < panel.pairs.size(); ++p) {
        const auto& pd = panel.pairs[p];
        const auto& oe = panel.establishments[pd.origin];
        const auto& de = panel.establishments[pd.destination];
        w.field(p).field(oe.firm_id).field(oe.rayon_id).field(de.firm_id).field(de.rayon_id);
        w.field(to_string(panel.month_at(pd.first_active_month)));
        for (bool b : {pd.conflict, pd.partner_conflict, pd.buyer_conflict, pd.supplier_conflict,
                       pd.partner_buyer_conflict, pd.partner_supplier_conflict, pd.both_conflict}) {
          w.field(b ? 1 : 0);
        }
        w.field(static_cast<long long>(pd.origin_partners_pre)).field(static_cast<long long>(pd.destination_partners_pre));
        w.end_row();
      }
    });
    ctx.write("panel.csv", [&](std::ostream& o) {
      csv::Writer w(o, {"pair", "month", "post", "n_shipments", "weight_kg"});
      for (std::size_t p = 0; p < panel.pairs.size(); ++p) {
        for (int t = 0; t < panel.n_months; ++t) {
          const auto& c = panel.cell(p, t);
          w.field(p).field(to_string(panel.month_at(t))).field(panel.is_post(t) ? 1 : 0);
          w.field(static_cast<long long>(c.n_shipments)).field(static_cast<long long>(c.total_weight_kg));
          w.end_row();
        }
      }
    });
  });
  ctx.note("pairs", panel.pairs.size());
  ctx.note("months", panel.n_months);
}

void cmd_network(Context& ctx) {
  const auto firms = ctx.firm_table();
  const auto load = ctx.transactions(firms);
  const auto universe = firm_universe(firms);
  for (int y : ctx.years()) {
    const auto flows = ctx.timed("network", [&] { return build_yearly_flows(load.records, firms, y); });
    const auto io = ctx.timed("network", [&] { return build_io_matrix(flows, universe, y); });
    const auto ys = std::to_string(y);
    ctx.timed("write", [&] {
      ctx.write("flows_" + ys + ".csv", [&](std::ostream& o) { write_flows(o, flows); });
      ctx.write("io_" + ys + ".csv", [&](std::ostream& o) { write_io_matrix(o, io); });
    });
  }
}

void cmd_centrality(Context& ctx) {
  const auto firms = ctx.firm_table();
  const auto load = ctx.transactions(firms);
  const auto change = centrality_change(ctx, firms, load.records);
  ctx.write("centrality.csv", [&](std::ostream& o) { write_centrality(o, change); });
}

DataBundle bundle_for(Context& ctx, const std::vector<int>& years) {
  auto firms = ctx.firm_table();
  const auto load = ctx.transactions(firms);
  auto accounting = ctx.accounting();
  return ctx.timed("network",
                   [&] { return DataBundle::from_records(std::move(firms), load.records, std::move(accounting), years); });
}

void cmd_demand(Context& ctx) {
  const int year = ctx.opt().year.value_or(ctx.pre_year());
  const auto bundle = bundle_for(ctx, {year});
  const auto config = ctx.economy();
  const auto rule = parse_sample_rule(ctx.cfg().get_string("sample", "balanced"));
  const auto sample = scenario_sample(bundle, {year}, rule);
  const auto demand = ctx.timed("demand", [&] {
    const auto io = build_io_matrix(bundle.flows_by_year.at(year), sample.firms, year);
    return backout_demand(io, {year, sample.sales.at(year)}, config);
  });
  const auto ys = std::to_string(year);
  ctx.write("demand_" + ys + ".csv", [&](std::ostream& o) { write_firm_vector(o, sample.firms, demand.values); });
  ctx.write("revenue_" + ys + ".csv", [&](std::ostream& o) { write_firm_vector(o, sample.firms, sample.sales.at(year)); });
  ctx.note("negative_demand_count", demand.negative_count);
  ctx.note("negative_demand_mass", demand.negative_mass);
}

void cmd_counterfactual(Context& ctx) {
  const int pre = ctx.pre_year();
  const int post = ctx.post_year();
  const auto rule = parse_sample_rule(ctx.cfg().get_string("sample", "balanced"));
  std::vector<ScenarioName> names;
  const std::string preset = ctx.opt().preset.empty() ? "all" : ctx.opt().preset;
  if (preset == "all") {
    names = {ScenarioName::baseline, ScenarioName::destruction, ScenarioName::adjustment,
             ScenarioName::outside_demand, ScenarioName::total};
  } else {
    names = {ScenarioName::baseline};
    for (const auto& item : KeyValueConfig::parse("p = " + preset).get_list("p")) {
      const auto n = parse_scenario_name(item);
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    }
  }
  std::vector<Scenario> scenarios;
  for (auto n : names) scenarios.push_back(netshock::preset(n, pre, post, rule));
  const auto bundle = bundle_for(ctx, {pre, post});
  const auto config = ctx.economy();
  const auto results = ctx.timed("solve", [&] { return run_scenarios(scenarios, bundle, config); });
  ctx.write("scenarios.csv", [&](std::ostream& o) { write_scenario_report(o, results); });
  for (const auto& r : results) {
    ctx.write("revenue_" + std::string(to_string(r.scenario.name)) + ".csv",
              [&](std::ostream& o) { write_firm_vector(o, r.firms, r.revenue.values); });
  }
  const ScenarioResult* base = nullptr;
  const ScenarioResult* dest = nullptr;
  const ScenarioResult* adj = nullptr;
  for (const auto& r : results) {
    if (r.scenario.name == ScenarioName::baseline) base = &r;
    if (r.scenario.name == ScenarioName::destruction) dest = &r;
    if (r.scenario.name == ScenarioName::adjustment) adj = &r;
  }
  if (base && dest && adj) {
    ctx.write("compensation.csv", [&](std::ostream& o) {
      csv::Writer w(o, {"stat", "compensation_share"});
      auto row = [&](const char* stat, double b, double d, double a) {
        w.field(stat);
        if (d == b) {
          w.field(std::numeric_limits<double>::quiet_NaN());
        } else {
          w.field(compensation_share(b, d, a));
        }
        w.end_row();
      };
      row("median", base->stats.median, dest->stats.median, adj->stats.median);
      row("p25", base->stats.p25, dest->stats.p25, adj->stats.p25);
      row("p75", base->stats.p75, dest->stats.p75, adj->stats.p75);
      row("mean", base->stats.mean, dest->stats.mean, adj->stats.mean);
    });
  }
}

void cmd_dynamics(Context& ctx) {
  const auto years = ctx.years();
  const auto bundle = bundle_for(ctx, years);
  const auto config = ctx.economy();
  const auto rule = parse_sample_rule(ctx.cfg().get_string("sample", "balanced"));
  const auto result = ctx.timed("solve", [&] { return run_dynamics(bundle, years, config, rule); });
  ctx.write("dynamics.csv", [&](std::ostream& o) { write_dynamics(o, result); });
}

void cmd_aggregate(Context& ctx) {
  const auto firms = ctx.firm_table();
  const auto load = ctx.transactions(firms);
  const auto accounting = ctx.accounting();
  const auto level = parse_region_level(ctx.cfg().get_string("level", "province"));
  const auto years = ctx.years();
  const auto config = ctx.economy();
  const auto result =
      ctx.timed("solve", [&] { return aggregate_regions(accounting, load.records, firms, level, years, config); });
  ctx.write("regions.csv", [&](std::ostream& o) { write_region_report(o, result); });
  ctx.write("regions_unconnected.csv", [&](std::ostream& o) {
    csv::Writer w(o, {"region_id"});
    for (const auto& r : result.unconnected) {
      w.field(r);
      w.end_row();
    }
  });
}

std::unordered_map<std::string, double> load_distances(const std::string& path) {
  auto in = csv::open_input(path);
  csv::Reader reader(in, {"rayon_id", "distance"});
  std::unordered_map<std::string, double> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != 2) throw ParseError(reader.line(), "expected 2 fields");
    out[f[0]] = csv::parse_double(f[1], reader.line(), "distance");
  }
  return out;
}

void cmd_did(Context& ctx) {
  std::string spec = ctx.opt().spec;
  KeyValueConfig spec_cfg = ctx.cfg();
  if (!spec.empty() && fs::is_regular_file(spec)) {
    spec_cfg.merge(KeyValueConfig::load(spec));
    spec = spec_cfg.get_string("spec", "");
  }
  if (spec.empty()) spec = spec_cfg.get_string("spec", "");
  if (spec.empty()) throw Error(ErrorCategory::usage, "did requires --spec");
  const auto fe = ctx.fe_options();

  if (spec.rfind("propagation", 0) == 0) {
    const auto firms = ctx.firm_table();
    const auto load = ctx.transactions(firms);
    const auto panel = flagged_panel(ctx, firms, load.records);
    PropagationSpec ps;
    ps.outcome = parse_trade_outcome(spec_cfg.get_string("outcome", "any"));
    ps.include_both_conflict = spec_cfg.get_bool("include_both_conflict", false);
    ps.partner_count_controls = spec_cfg.get_bool("partner_controls", false);
    ps.post_province_effects = spec_cfg.get_bool("post_province_effects", false);
    if (auto d = spec_cfg.get_string("distance_file", ""); !d.empty()) ps.rayon_distance = load_distances(d);
    if (spec == "propagation-event-study") {
      const auto baseline = parse_year_month(spec_cfg.get_string("event_baseline", "2013-12"));
      const auto es = ctx.timed("estimate", [&] { return propagation_event_study(panel, firms, ps, baseline, fe); });
      ctx.write("event_study.csv", [&](std::ostream& o) {
        csv::Writer w(o, {"period", "term", "estimate", "se"});
        for (std::size_t p = 0; p < es.periods.size(); ++p) {
          for (std::size_t k = 0; k < es.treatment_names.size(); ++k) {
            const int period = es.periods[p];
            w.field(std::to_string(period / 10) + "Q" + std::to_string(period % 10)).field(es.treatment_names[k]);
            w.field(es.coef(p, k)).field(es.se(p, k));
            w.end_row();
          }
        }
      });
      ctx.write("summary.csv", [&](std::ostream& o) { write_regression_summary(o, es.regression); });
      return;
    }
    if (spec == "propagation-first-degree") {
      ps.variant = PropagationVariant::first_degree;
    } else if (spec == "propagation-both-degrees") {
      ps.variant = PropagationVariant::both_degrees;
    } else if (spec == "propagation-buyer-supplier") {
      ps.variant = PropagationVariant::buyer_supplier;
    } else {
      throw Error(ErrorCategory::usage, "unknown estimation spec '" + spec + "'");
    }
    const auto res = ctx.timed("estimate", [&] { return did_propagation(panel, firms, ps, fe); });
    ctx.write("results.csv", [&](std::ostream& o) { write_results(o, res); });
    ctx.write("summary.csv", [&](std::ostream& o) { write_regression_summary(o, res); });
    return;
  }

  if (spec == "alpha") {
    auto in = csv::open_input(ctx.input_file("labor_costs.csv"));
    const auto records = parse_labor_costs(in);
    const auto est = estimate_alpha(records, static_cast<int>(spec_cfg.get_int("alpha_first_year", 2013)),
                                    static_cast<int>(spec_cfg.get_int("alpha_last_year", 2015)));
    ctx.write("alpha.csv", [&](std::ostream& o) {
      write_key_values(o, {"stat", "value"},
                       {{"alpha", est.alpha},
                        {"elasticity", est.elasticity},
                        {"n_used", static_cast<double>(est.n_used)},
                        {"n_excluded", static_cast<double>(est.n_excluded)}});
    });
    return;
  }

  if (spec.rfind("centrality", 0) == 0) {
    const auto firms = ctx.firm_table();
    const auto load = ctx.transactions(firms);
    const auto accounting = ctx.accounting();
    const auto change = centrality_change(ctx, firms, load.records);
    CentralitySpec cs;
    cs.outcome = parse_firm_outcome(spec_cfg.get_string("outcome", "log_sales") == "any"
                                        ? "log_sales"
                                        : spec_cfg.get_string("outcome", "log_sales"));
    cs.baseline_year = ctx.pre_year();
    cs.post_year = ctx.post_year();
    std::vector<double> delta = change.standardized;
    if (spec == "centrality") {
      cs.variant = CentralityVariant::pre_post;
    } else if (spec == "centrality-yearly") {
      cs.variant = CentralityVariant::yearly;
    } else if (spec == "centrality-joint" || spec == "centrality-residualized") {
      const auto chars =
          baseline_characteristics(load.records, firms, accounting, ctx.pre_year(), change.firm_ids);
      if (spec == "centrality-joint") {
        cs.variant = CentralityVariant::joint;
        for (std::size_t i = 0; i < change.firm_ids.size(); ++i) {
          cs.conflict_trade[change.firm_ids[i]] = chars.values(static_cast<Eigen::Index>(i), 0) > 0;
        }
      } else {
        cs.variant = CentralityVariant::pre_post;
        delta = residualize(delta, chars.values);
      }
    } else {
      throw Error(ErrorCategory::usage, "unknown estimation spec '" + spec + "'");
    }
    const auto est = ctx.timed("estimate", [&] { return did_centrality(accounting, change.firm_ids, delta, cs, fe); });
    ctx.write("results.csv", [&](std::ostream& o) { write_results(o, est.regression); });
    ctx.write("summary.csv", [&](std::ostream& o) { write_regression_summary(o, est.regression); });
    if (!est.years.empty()) {
      ctx.write("yearly.csv", [&](std::ostream& o) {
        csv::Writer w(o, {"year", "estimate", "se"});
        for (std::size_t k = 0; k < est.years.size(); ++k) {
          w.field(est.years[k]).field(est.year_coef[k]).field(est.year_se[k]);
          w.end_row();
        }
      });
    }
    return;
  }
  throw Error(ErrorCategory::usage, "unknown estimation spec '" + spec + "'");
}

const std::vector<std::pair<std::string, std::string>> kCommands = {
    {"simulate", "generate a seeded synthetic economy and its transaction data"},
    {"ingest", "validate and filter raw transactions, firms and accounting data"},
    {"panel", "build the establishment-pair x month panel with treatment flags"},
    {"network", "yearly firm-level flows and input-output matrices"},
    {"centrality", "centrality change from removing conflict-area firms"},
    {"demand", "back out outside demand for one year"},
    {"counterfactual", "run scenario presets and write the scenario report"},
    {"dynamics", "adjustment counterfactual year by year"},
    {"did", "difference-in-differences estimation"},
    {"aggregate", "region-level revenue totals and counterfactuals"},
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"netshock: production-network shock analysis", "netshock"};
  app.set_version_flag("--version", std::string(NETSHOCK_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--input", opt.input, "input data directory");
  app.add_option("--output", opt.output, "output directory");
  app.add_option("--config", opt.config, "key-value config file (default: $NETSHOCK_CONFIG)");
  app.add_option("--seed", opt.seed, "random seed");
  app.add_option("--threads", opt.threads, "worker threads (0 = all cores)");
  app.add_option("--preset", opt.preset, "scenario preset(s), comma separated, or 'all'");
  app.add_option("--alpha", opt.alpha, "labor share");
  app.add_option("--window-start", opt.window_start, "first shipment date kept (YYYY-MM-DD)");
  app.add_option("--window-end", opt.window_end, "last shipment date kept (YYYY-MM-DD)");
  app.add_option("--post-start", opt.post_start, "first post-event month (YYYY-MM)");
  app.add_flag("--strict", opt.strict, "fail on the first malformed row");
  app.add_flag("--lenient", opt.lenient, "skip and count malformed rows");
  app.add_option("--spec", opt.spec, "estimation spec name or spec file");
  app.add_option("--year", opt.year, "year for single-year commands");
  app.add_option("--kind", opt.kind, "centrality kind");
  app.add_option("--level", opt.level, "region level (province|district)");
  app.add_option("--sample", opt.sample, "sample rule (balanced|all)");

  std::map<std::string, std::function<void(Context&)>> handlers = {
      {"simulate", cmd_simulate},         {"ingest", cmd_ingest},     {"panel", cmd_panel},
      {"network", cmd_network},           {"centrality", cmd_centrality}, {"demand", cmd_demand},
      {"counterfactual", cmd_counterfactual}, {"dynamics", cmd_dynamics}, {"did", cmd_did},
      {"aggregate", cmd_aggregate},
  };
  for (const auto& [name, help] : kCommands) app.add_subcommand(name, help);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << NETSHOCK_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: usage: " << msg << '\n';
    return exit_code_for("usage");
  }

  const auto subs = app.get_subcommands();
  const std::string command = subs.front()->get_name();
  try {
    const auto t0 = std::chrono::steady_clock::now();
    set_thread_count(opt.threads);
    Context ctx(command, opt);
    handlers.at(command)(ctx);
    ctx.write_manifest(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << category_name(e.category()) << ": " << msg << '\n';
    return exit_code_for(std::string(category_name(e.category())));
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: io: " << e.what() << '\n';
    return exit_code_for("io");
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace netshock::cli
