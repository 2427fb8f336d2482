#include "netshock/ingest.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include "netshock/csv.hpp"
#include "netshock/error.hpp"

namespace netshock {

namespace {

const std::vector<std::string> kTransactionHeader = {"date",           "sender_firm_id",    "receiver_firm_id",
                                                     "sender_rayon_id", "receiver_rayon_id", "weight_kg"};
const std::vector<std::string> kFirmHeader = {"firm_id", "rayon_id", "province_id", "conflict_flag"};
const std::vector<std::string> kAccountingHeader = {"firm_id", "year", "sales", "profits", "total_costs"};
const std::vector<std::string> kFlowHeader = {"from", "to", "weight"};

void require_fields(const std::vector<std::string>& fields, std::size_t expected, std::size_t line) {
  if (fields.size() != expected) {
    throw ParseError(line, "expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
  }
}

void require_nonempty(const std::string& value, std::size_t line, const char* what) {
  if (value.empty()) throw ParseError(line, std::string("empty ") + what);
}

std::string join_ids(const std::set<std::string>& ids) {
  std::string out;
  std::size_t shown = 0;
  for (const auto& id : ids) {
    if (shown == 20) {
      out += ", ... (" + std::to_string(ids.size()) + " total)";
      break;
    }
    out += (shown ? ", " : "") + id;
    ++shown;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// FirmTable

FirmTable::FirmTable(std::vector<FirmRecord> firms, std::set<std::string> extra_conflict_rayons)
    : firms_(std::move(firms)), conflict_rayons_(std::move(extra_conflict_rayons)) {
  for (std::size_t i = 0; i < firms_.size(); ++i) {
    const auto& f = firms_[i];
    if (!index_.emplace(f.firm_id, i).second) {
      throw Error(ErrorCategory::schema, "duplicate firm id '" + f.firm_id + "' in firm table");
    }
    if (f.conflict_flag) conflict_rayons_.insert(f.rayon_id);
    rayon_province_.emplace(f.rayon_id, f.province_id);
  }
}

const FirmRecord* FirmTable::find(const std::string& firm_id) const {
  auto it = index_.find(firm_id);
  return it == index_.end() ? nullptr : &firms_[it->second];
}

const FirmRecord& FirmTable::at(const std::string& firm_id) const {
  const auto* f = find(firm_id);
  if (!f) throw Error(ErrorCategory::referential, "unknown firm id '" + firm_id + "'");
  return *f;
}

bool FirmTable::is_conflict_firm(const std::string& firm_id) const {
  const auto* f = find(firm_id);
  return f && (f->conflict_flag || is_conflict_rayon(f->rayon_id));
}

const std::string& FirmTable::province_of_rayon(const std::string& rayon_id, const std::string& fallback) const {
  auto it = rayon_province_.find(rayon_id);
  return it == rayon_province_.end() ? fallback : it->second;
}

std::vector<std::string> FirmTable::conflict_firm_ids() const {
  std::vector<std::string> ids;
  for (const auto& f : firms_) {
    if (is_conflict_firm(f.firm_id)) ids.push_back(f.firm_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------
// CSV ingest

TransactionLoad parse_transactions(std::istream& in, const FirmTable& firms, const IngestOptions& options) {
  TransactionLoad load;
  auto& rep = load.report;
  csv::Reader reader(in, kTransactionHeader);
  std::vector<std::string> fields;
  while (true) {
    TransactionRecord rec;
    try {
      if (!reader.next(fields)) break;
      ++rep.rows_read;
      require_fields(fields, 6, reader.line());
      rec.date = [&] {
        try {
          return parse_date(fields[0]);
        } catch (const Error& e) {
          throw ParseError(reader.line(), e.what());
        }
      }();
      rec.sender_firm_id = std::move(fields[1]);
      rec.receiver_firm_id = std::move(fields[2]);
      rec.sender_rayon_id = std::move(fields[3]);
      rec.receiver_rayon_id = std::move(fields[4]);
      require_nonempty(rec.sender_firm_id, reader.line(), "sender_firm_id");
      require_nonempty(rec.receiver_firm_id, reader.line(), "receiver_firm_id");
      require_nonempty(rec.sender_rayon_id, reader.line(), "sender_rayon_id");
      require_nonempty(rec.receiver_rayon_id, reader.line(), "receiver_rayon_id");
      rec.weight_kg = csv::parse_int(fields[5], reader.line(), "weight_kg");
      if (rec.weight_kg < 0) throw ParseError(reader.line(), "negative weight_kg");
    } catch (const ParseError&) {
      if (options.strict) throw;
      ++rep.malformed_skipped;
      if (rep.first_malformed_line == 0) rep.first_malformed_line = reader.line();
      continue;
    }

    if (rec.date < options.window_start || rec.date > options.window_end) {
      ++rep.out_of_window;
      continue;
    }
    if (rec.weight_kg == 0) {
      ++rep.zero_weight;
      continue;
    }
    if (firms.is_conflict_rayon(rec.sender_rayon_id) && firms.is_conflict_rayon(rec.receiver_rayon_id)) {
      ++rep.conflict_internal_excluded;
      continue;
    }
    if (options.exclude_international && (options.foreign_rayons.count(rec.sender_rayon_id) ||
                                          options.foreign_rayons.count(rec.receiver_rayon_id))) {
      ++rep.international_excluded;
      continue;
    }
    load.records.push_back(std::move(rec));
  }
  rep.kept = load.records.size();
  return load;
}

TransactionLoad load_transactions(const std::string& path, const FirmTable& firms, const IngestOptions& options) {
  auto in = csv::open_input(path);
  return parse_transactions(in, firms, options);
}

std::vector<FirmRecord> parse_firms(std::istream& in) {
  csv::Reader reader(in, kFirmHeader);
  std::vector<FirmRecord> firms;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    require_fields(fields, 4, reader.line());
    FirmRecord f{fields[0], fields[1], fields[2], csv::parse_bool(fields[3], reader.line(), "conflict_flag")};
    require_nonempty(f.firm_id, reader.line(), "firm_id");
    require_nonempty(f.rayon_id, reader.line(), "rayon_id");
    firms.push_back(std::move(f));
  }
  return firms;
}

std::vector<FirmRecord> load_firms(const std::string& path) {
  auto in = csv::open_input(path);
  return parse_firms(in);
}

std::vector<AccountingRecord> parse_accounting(std::istream& in, bool strict) {
  csv::Reader reader(in, kAccountingHeader);
  std::vector<AccountingRecord> out;
  std::vector<std::string> fields;
  while (true) {
    try {
      if (!reader.next(fields)) break;
      require_fields(fields, 5, reader.line());
      AccountingRecord r;
      r.firm_id = fields[0];
      require_nonempty(r.firm_id, reader.line(), "firm_id");
      r.year = static_cast<int>(csv::parse_int(fields[1], reader.line(), "year"));
      r.sales = csv::parse_double(fields[2], reader.line(), "sales");
      r.profits = csv::parse_double(fields[3], reader.line(), "profits");
      r.total_costs = csv::parse_double(fields[4], reader.line(), "total_costs");
      if (r.sales < 0) throw ParseError(reader.line(), "negative sales");
      if (r.total_costs < 0) throw ParseError(reader.line(), "negative total_costs");
      out.push_back(std::move(r));
    } catch (const ParseError&) {
      if (strict) throw;
    }
  }
  return out;
}

std::vector<AccountingRecord> load_accounting(const std::string& path, bool strict) {
  auto in = csv::open_input(path);
  return parse_accounting(in, strict);
}

void write_transactions(std::ostream& out, const std::vector<TransactionRecord>& records) {
  csv::Writer w(out, kTransactionHeader);
  for (const auto& r : records) {
    w.field(to_string(r.date))
        .field(r.sender_firm_id)
        .field(r.receiver_firm_id)
        .field(r.sender_rayon_id)
        .field(r.receiver_rayon_id)
        .field(static_cast<long long>(r.weight_kg));
    w.end_row();
  }
}

void write_firms(std::ostream& out, const std::vector<FirmRecord>& firms) {
  csv::Writer w(out, kFirmHeader);
  for (const auto& f : firms) {
    w.field(f.firm_id).field(f.rayon_id).field(f.province_id).field(f.conflict_flag ? 1 : 0);
    w.end_row();
  }
}

void write_accounting(std::ostream& out, const std::vector<AccountingRecord>& records) {
  csv::Writer w(out, kAccountingHeader);
  for (const auto& r : records) {
    w.field(r.firm_id).field(r.year).field(r.sales).field(r.profits).field(r.total_costs);
    w.end_row();
  }
}

// ---------------------------------------------------------------------------
// Panel

namespace {

void check_referential(const std::vector<TransactionRecord>& records, const FirmTable& firms) {
  std::set<std::string> unknown;
  for (const auto& r : records) {
    if (!firms.contains(r.sender_firm_id)) unknown.insert(r.sender_firm_id);
    if (!firms.contains(r.receiver_firm_id)) unknown.insert(r.receiver_firm_id);
  }
  if (!unknown.empty()) {
    throw Error(ErrorCategory::referential, "unresolved firm ids: " + join_ids(unknown));
  }
}

struct ShipmentKey {
  std::uint64_t pair;
  int month;
  std::int64_t weight;
};

}  // namespace

TradePanel build_trade_panel(const std::vector<TransactionRecord>& records, const FirmTable& firms,
                             const PanelOptions& options) {
  if (options.end < options.start) throw Error(ErrorCategory::domain, "panel window ends before it starts");
  check_referential(records, firms);

  TradePanel panel;
  panel.start = options.start;
  panel.n_months = months_between(options.start, options.end);
  panel.post_start = options.post_start;

  std::map<Establishment, std::uint32_t> est_index;
  for (const auto& r : records) {
    est_index.emplace(Establishment{r.sender_firm_id, r.sender_rayon_id}, 0);
    est_index.emplace(Establishment{r.receiver_firm_id, r.receiver_rayon_id}, 0);
  }
  panel.establishments.reserve(est_index.size());
  for (auto& [est, idx] : est_index) {
    idx = static_cast<std::uint32_t>(panel.establishments.size());
    panel.establishments.push_back(est);
  }

  std::vector<ShipmentKey> keys;
  keys.reserve(records.size());
  for (const auto& r : records) {
    const int offset = year_month_of(r.date).index() - options.start.index();
    if (offset < 0 || offset >= panel.n_months) continue;
    const std::uint64_t o = est_index.at({r.sender_firm_id, r.sender_rayon_id});
    const std::uint64_t d = est_index.at({r.receiver_firm_id, r.receiver_rayon_id});
    keys.push_back({(o << 32) | d, offset, r.weight_kg});
  }
  std::sort(keys.begin(), keys.end(), [](const ShipmentKey& a, const ShipmentKey& b) {
    return a.pair != b.pair ? a.pair < b.pair : a.month < b.month;
  });

  const int post_offset = options.post_start.index() - options.start.index();
  std::size_t i = 0;
  while (i < keys.size()) {
    std::size_t j = i;
    while (j < keys.size() && keys[j].pair == keys[i].pair) ++j;
    PairDirection pd;
    pd.origin = static_cast<std::uint32_t>(keys[i].pair >> 32);
    pd.destination = static_cast<std::uint32_t>(keys[i].pair & 0xffffffffu);
    pd.first_active_month = keys[i].month;
    pd.first_trade_post = keys[i].month >= post_offset;
    if (pd.first_trade_post && !options.include_post_entrants) {
      i = j;
      continue;
    }
    const std::size_t base = panel.cells.size();
    panel.cells.resize(base + panel.n_months);
    for (std::size_t k = i; k < j; ++k) {
      auto& c = panel.cells[base + keys[k].month];
      c.n_shipments += 1;
      c.total_weight_kg += keys[k].weight;
    }
    panel.pairs.push_back(pd);
    i = j;
  }
  return panel;
}

TradePanel assign_treatment_flags(TradePanel panel, const FirmTable& firms, const TreatmentOptions& options) {
  const auto& ests = panel.establishments;
  const std::size_t n_est = ests.size();

  // Treatment unit per establishment: itself, or its firm under the firm-level switch.
  std::vector<std::uint32_t> unit(n_est);
  std::vector<char> unit_conflict;
  if (options.firm_level) {
    std::map<std::string, std::uint32_t> firm_unit;
    for (const auto& e : ests) firm_unit.emplace(e.firm_id, 0);
    std::uint32_t next = 0;
    for (auto& [id, u] : firm_unit) u = next++;
    unit_conflict.assign(firm_unit.size(), 0);
    for (std::size_t e = 0; e < n_est; ++e) {
      unit[e] = firm_unit.at(ests[e].firm_id);
      if (firms.is_conflict_rayon(ests[e].rayon_id) || firms.is_conflict_firm(ests[e].firm_id)) {
        unit_conflict[unit[e]] = 1;
      }
    }
  } else {
    unit_conflict.assign(n_est, 0);
    for (std::size_t e = 0; e < n_est; ++e) {
      unit[e] = static_cast<std::uint32_t>(e);
      unit_conflict[e] = firms.is_conflict_rayon(ests[e].rayon_id) ? 1 : 0;
    }
  }
  const std::size_t n_units = unit_conflict.size();

  const int pre_first = std::max(0, options.preconflict_start.index() - panel.start.index());
  const int pre_last = std::min(panel.n_months - 1, options.preconflict_end.index() - panel.start.index());

  std::vector<char> has_conflict_buyer(n_units, 0), has_conflict_supplier(n_units, 0);
  std::vector<std::set<std::uint32_t>> partners(n_units);
  for (std::size_t p = 0; p < panel.pairs.size(); ++p) {
    bool traded_pre = false;
    for (int t = pre_first; t <= pre_last && !traded_pre; ++t) traded_pre = panel.cell(p, t).any_shipment();
    if (!traded_pre) continue;
    const auto uo = unit[panel.pairs[p].origin];
    const auto ud = unit[panel.pairs[p].destination];
    if (uo == ud) continue;
    if (unit_conflict[ud]) has_conflict_buyer[uo] = 1;
    if (unit_conflict[uo]) has_conflict_supplier[ud] = 1;
    partners[uo].insert(ud);
    partners[ud].insert(uo);
  }

  for (auto& pd : panel.pairs) {
    const auto uo = unit[pd.origin];
    const auto ud = unit[pd.destination];
    const bool co = unit_conflict[uo];
    const bool cd = unit_conflict[ud];
    pd.conflict = co || cd;
    pd.both_conflict = co && cd;
    pd.supplier_conflict = co;
    pd.buyer_conflict = cd;
    if (!pd.conflict) {
      pd.partner_buyer_conflict = has_conflict_buyer[uo] || has_conflict_buyer[ud];
      pd.partner_supplier_conflict = has_conflict_supplier[uo] || has_conflict_supplier[ud];
    } else {
      pd.partner_buyer_conflict = false;
      pd.partner_supplier_conflict = false;
    }
    pd.partner_conflict = pd.partner_buyer_conflict || pd.partner_supplier_conflict;
    pd.origin_partners_pre = static_cast<std::uint32_t>(partners[uo].size());
    pd.destination_partners_pre = static_cast<std::uint32_t>(partners[ud].size());
  }
  panel.flags_assigned = true;
  return panel;
}

// ---------------------------------------------------------------------------
// Yearly flows

std::vector<Flow> build_yearly_flows(const std::vector<TransactionRecord>& records, const FirmTable& firms, int year) {
  check_referential(records, firms);
  std::map<std::pair<std::string, std::string>, double> sums;
  for (const auto& r : records) {
    if (r.date.year != year) continue;
    sums[{r.sender_firm_id, r.receiver_firm_id}] += static_cast<double>(r.weight_kg);
  }
  std::vector<Flow> flows;
  flows.reserve(sums.size());
  for (const auto& [key, w] : sums) flows.push_back({key.first, key.second, w});
  return flows;
}

void write_flows(std::ostream& out, const std::vector<Flow>& flows) {
  csv::Writer w(out, kFlowHeader);
  for (const auto& f : flows) {
    w.field(f.from).field(f.to).field(f.weight);
    w.end_row();
  }
}

std::vector<Flow> parse_flows(std::istream& in) {
  csv::Reader reader(in, kFlowHeader);
  std::vector<Flow> flows;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    require_fields(fields, 3, reader.line());
    Flow f{fields[0], fields[1], csv::parse_double(fields[2], reader.line(), "weight")};
    if (f.weight < 0) throw ParseError(reader.line(), "negative flow weight");
    flows.push_back(std::move(f));
  }
  return flows;
}

}  // namespace netshock
